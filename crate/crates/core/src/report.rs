//! Report assembly: a versioned, deterministic JSON document in which every
//! registered check appears exactly once, plus a traceability matrix tying
//! each verified claim to the checks that witness it.

use serde::Serialize;
use thiserror::Error;

use crate::flow;
use crate::gns;
use crate::linalg::Tolerance;
use crate::quasi::Classification;
use crate::scenario::{self, ClassificationCounts, RunOutcome, TracialDetail};
use crate::tracial;
use crate::verdict::{CheckStatus, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("verdict list does not match the check registry at position {position}: expected {expected}, got {got}")]
    RegistryMismatch { position: usize, expected: String, got: String },
    #[error("verdict list has {got} entries but the registry has {expected}")]
    RegistryLength { expected: usize, got: usize },
    #[error("traceability row {row} references unknown check id {id}")]
    UnknownCheck { row: usize, id: String },
    #[error("check id {id} is not covered by any traceability row")]
    UnmappedCheck { id: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceabilityRow {
    pub claim: &'static str,
    pub check_ids: Vec<&'static str>,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Summary {
    pub holds: usize,
    pub fails: usize,
    pub not_applicable: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub kind: &'static str,
    pub scenario: String,
    pub parameters: Vec<(String, String)>,
    pub environment: Environment,
    pub trials: usize,
    pub classification: Option<Classification>,
    pub classification_counts: Option<ClassificationCounts>,
    pub summary: Summary,
    pub verdicts: Vec<Verdict>,
    pub tracial_decomposition: Option<TracialDetail>,
    pub traceability: Vec<TraceabilityRow>,
}

/// Claims verified by this laboratory, each tied to the checks witnessing it.
pub fn traceability() -> Vec<TraceabilityRow> {
    vec![
        TraceabilityRow {
            claim: "Quasi-invariant states admit cocycles that carry each transported density back to the original",
            check_ids: vec![scenario::DENSITY_TRANSFORMATION_CHECK],
        },
        TraceabilityRow {
            claim: "Cocycle families are normalized, multiplicative under the chain rule, and compatible with inversion",
            check_ids: vec![
                scenario::COCYCLE_IDENTITY_CHECK,
                scenario::COCYCLE_CHAIN_CHECK,
                scenario::COCYCLE_INVERSE_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "Every cocycle has strictly positive spectrum; in the strong case the family is Hermitian, pairwise commuting, and commutes with the density",
            check_ids: vec![scenario::COCYCLE_POSITIVITY_CHECK, scenario::STRONG_STRUCTURE_CHECK],
        },
        TraceabilityRow {
            claim: "The modular flow is a state-preserving one-parameter automorphism group",
            check_ids: vec![flow::GROUP_LAW_CHECK, flow::STATE_INVARIANCE_CHECK],
        },
        TraceabilityRow {
            claim: "The flow commutes with the group action exactly when the cocycles are central; invariant states are the trivial case",
            check_ids: vec![flow::GROUP_COMMUTATION_CHECK],
        },
        TraceabilityRow {
            claim: "On a factor, each cocycle factorizes through the flow: x_g multiplied by the flow of x_g at time t equals the cocycle of the time-t twisted automorphism",
            check_ids: vec![flow::FACTOR_COCYCLE_CHECK],
        },
        TraceabilityRow {
            claim: "The state composed with group and flow automorphisms in either order agree",
            check_ids: vec![flow::STATE_LEVEL_COMMUTATION_CHECK],
        },
        TraceabilityRow {
            claim: "A cocycle fixed by the whole group is the identity",
            check_ids: vec![flow::FIXED_COCYCLE_CHECK],
        },
        TraceabilityRow {
            claim: "Invariance of the state, triviality of all cocycles, and commutation of each group unitary with the density are equivalent",
            check_ids: vec![flow::INVARIANCE_EQUIVALENCE_CHECK],
        },
        TraceabilityRow {
            claim: "The group mean composed with the state behaves as the averaged state, and the mean commutes with the averaged flow",
            check_ids: vec![flow::MEAN_STATE_COMPOSITIONS_CHECK, flow::MEAN_MAP_COMMUTATION_CHECK],
        },
        TraceabilityRow {
            claim: "The averaged state's modular flow is the mean-twisted flow of the original state and preserves the averaged state",
            check_ids: vec![flow::TWISTED_FLOW_CHECK, flow::AVERAGED_FLOW_INVARIANCE_CHECK],
        },
        TraceabilityRow {
            claim: "The group mean preserves the centralizer and the flow preserves the fixed-point algebra",
            check_ids: vec![
                flow::MEAN_PRESERVES_CENTRALIZER_CHECK,
                flow::FLOW_PRESERVES_FIXED_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "The long-time flow average is the pinching over spectral blocks: an idempotent, state-preserving projection onto the centralizer",
            check_ids: vec![
                flow::PINCHING_IDEMPOTENT_CHECK,
                flow::PINCHING_STATE_CHECK,
                flow::PINCHING_RANGE_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "For an invariant state whose centralizer equals the fixed-point algebra, the group mean coincides with the flow average",
            check_ids: vec![flow::ERGODIC_COINCIDENCE_CHECK],
        },
        TraceabilityRow {
            claim: "The worked examples reproduce their pinned closed forms: cocycle matrices, mean density, averaged state, conditional expectation, flow phases, and algebra coincidences",
            check_ids: vec![scenario::CLOSED_FORMS_CHECK],
        },
        TraceabilityRow {
            claim: "The mean of a Hermitian cocycle family is Hermitian, positive definite, commutes with the density, and averages the state to an invariant one",
            check_ids: vec![
                tracial::MEAN_DENSITY_STRUCTURE_CHECK,
                tracial::MEAN_STATE_INVARIANCE_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "Under the ergodicity hypothesis the state factors through the trace via a positive operator, and the invariant part of the factorization lies in the fixed-point algebra",
            check_ids: vec![
                tracial::RECONSTRUCTION_CHECK,
                tracial::TRACE_PROPERTIES_CHECK,
                tracial::INVARIANT_DENSITY_FIXED_CHECK,
                tracial::TWIST_COMMUTATION_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "The shifted representation vectors implement the transported states, the shift unitaries form a covariant representation, and the commutant-side unitaries mirror them",
            check_ids: vec![gns::REPRESENTATION_CHECK, gns::COVARIANCE_CHECK],
        },
        TraceabilityRow {
            claim: "The representation unitaries exchange the original and shifted closure operators on both the algebra and commutant sides",
            check_ids: vec![gns::MODULAR_EXCHANGE_S_CHECK, gns::MODULAR_EXCHANGE_F_CHECK],
        },
        TraceabilityRow {
            claim: "Each shifted modular operator factorizes through the original one, with closed forms for the shifted closure and modular operators driven by the cocycle",
            check_ids: vec![
                gns::SHIFT_DELTA_FACTORIZATION_CHECK,
                gns::SHIFT_S_CLOSED_FORM_CHECK,
                gns::SHIFT_DELTA_CLOSED_FORM_CHECK,
                gns::SHIFT_EXCHANGE_COMPOSITE_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "The average of the representation unitaries is an orthogonal projection whose range is the jointly fixed subspace",
            check_ids: vec![gns::PROJECTION_STRUCTURE_CHECK, gns::PROJECTION_RANGE_FIXED_CHECK],
        },
        TraceabilityRow {
            claim: "Compressing the lifted mean reproduces the algebra-level mean: identity blocks on the invariant subspace and vanishing off-blocks",
            check_ids: vec![
                gns::LIFTED_MEAN_MATCHES_CHECK,
                gns::BLOCK_IDENTITY_CHECK,
                gns::OFF_BLOCKS_VANISH_CHECK,
                gns::LIFTED_MEAN_INVARIANT_CHECK,
            ],
        },
        TraceabilityRow {
            claim: "The compression of the algebra generated with the representation unitaries is abelian exactly when the compression of the lifted-mean range is",
            check_ids: vec![gns::COMPRESSED_ABELIANNESS_CHECK],
        },
        TraceabilityRow {
            claim: "Along a chain of subgroups the invariant projections are nested, the compression deviations shrink monotonically, and the full-group stage reaches the block identity",
            check_ids: vec![
                gns::CHAIN_NESTED_CHECK,
                gns::CHAIN_MONOTONE_CHECK,
                gns::CHAIN_FINAL_CHECK,
            ],
        },
    ]
}

fn summarize(verdicts: &[Verdict]) -> Summary {
    let mut summary = Summary::default();
    for v in verdicts {
        match v.status {
            CheckStatus::Holds => summary.holds += 1,
            CheckStatus::Fails => summary.fails += 1,
            CheckStatus::NotApplicable => summary.not_applicable += 1,
        }
    }
    summary
}

fn validate(verdicts: &[Verdict]) -> Result<(), ReportError> {
    let registry = scenario::check_registry();
    if verdicts.len() != registry.len() {
        return Err(ReportError::RegistryLength { expected: registry.len(), got: verdicts.len() });
    }
    for (position, (verdict, &expected)) in verdicts.iter().zip(&registry).enumerate() {
        if verdict.check_id != expected {
            return Err(ReportError::RegistryMismatch {
                position,
                expected: expected.to_string(),
                got: verdict.check_id.clone(),
            });
        }
    }
    let rows = traceability();
    for (index, row) in rows.iter().enumerate() {
        for id in &row.check_ids {
            if !registry.contains(id) {
                return Err(ReportError::UnknownCheck { row: index, id: id.to_string() });
            }
        }
    }
    for &id in &registry {
        if !rows.iter().any(|row| row.check_ids.contains(&id)) {
            return Err(ReportError::UnmappedCheck { id: id.to_string() });
        }
    }
    Ok(())
}

/// Assembles and validates a report; fails if the outcome does not cover the
/// registry exactly or the traceability matrix has gaps.
pub fn assemble(
    kind: &'static str,
    outcome: RunOutcome,
    parameters: Vec<(String, String)>,
    tol: Tolerance,
    seed: Option<u64>,
) -> Result<Report, ReportError> {
    validate(&outcome.verdicts)?;
    let summary = summarize(&outcome.verdicts);
    Ok(Report {
        schema: SCHEMA_VERSION,
        kind,
        scenario: outcome.label,
        parameters,
        environment: Environment { tol_abs: tol.abs, tol_rel: tol.rel, seed },
        trials: outcome.trials,
        classification: outcome.classification,
        classification_counts: outcome.classification_counts,
        summary,
        verdicts: outcome.verdicts,
        tracial_decomposition: outcome.tracial,
        traceability: traceability(),
    })
}

impl Report {
    pub fn has_failures(&self) -> bool {
        self.summary.fails > 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text rendering: one status line per check, then a summary.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} ({})", self.scenario, self.kind);
        if !self.parameters.is_empty() {
            let rendered: Vec<String> =
                self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "parameters: {}", rendered.join(", "));
        }
        let _ = writeln!(
            out,
            "tolerance: abs {:.3e}, rel {:.3e}{}",
            self.environment.tol_abs,
            self.environment.tol_rel,
            match self.environment.seed {
                Some(seed) => format!(", seed {seed}"),
                None => String::new(),
            }
        );
        if let Some(classification) = self.classification {
            let _ = writeln!(out, "classification: {}", classification.name());
        }
        if let Some(counts) = self.classification_counts {
            let _ = writeln!(
                out,
                "classification counts over {} trials: invariant {}, strongly quasi invariant {}, quasi invariant only {}",
                self.trials,
                counts.g_invariant,
                counts.strongly_quasi_invariant,
                counts.quasi_invariant_only
            );
        }
        for v in &self.verdicts {
            let status = match v.status {
                CheckStatus::Holds => "HOLDS",
                CheckStatus::Fails => "FAILS",
                CheckStatus::NotApplicable => "N/A  ",
            };
            let _ = writeln!(
                out,
                "[{status}] {:<40} deviation {:.3e} (threshold {:.3e})",
                v.check_id, v.max_deviation, v.threshold
            );
            if v.status == CheckStatus::Fails {
                for w in &v.witnesses {
                    let mut parts = Vec::new();
                    if let Some(g) = w.g {
                        parts.push(format!("g={g}"));
                    }
                    if let Some(t) = w.t {
                        parts.push(format!("t={t:.6}"));
                    }
                    if let Some(location) = &w.location {
                        parts.push(location.clone());
                    }
                    if !parts.is_empty() {
                        let _ = writeln!(out, "        witness: {}", parts.join(", "));
                    }
                }
            }
        }
        let _ = writeln!(
            out,
            "summary: {} hold, {} fail, {} not applicable",
            self.summary.holds, self.summary.fails, self.summary.not_applicable
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run_example, ExampleId, ExampleParams};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn traceability_covers_registry_both_ways() {
        let outcome = run_example(ExampleId::Ex4, &ExampleParams::default(), tol()).unwrap();
        let report = assemble("example", outcome, vec![], tol(), None).unwrap();
        assert_eq!(report.schema, 1);
        assert_eq!(
            report.summary.holds + report.summary.fails + report.summary.not_applicable,
            scenario::check_registry().len()
        );
        assert!(!report.has_failures());
    }

    #[test]
    fn registry_drift_is_detected() {
        let mut outcome = run_example(ExampleId::Ex4, &ExampleParams::default(), tol()).unwrap();
        outcome.verdicts.pop();
        let err = assemble("example", outcome, vec![], tol(), None).unwrap_err();
        assert!(matches!(err, ReportError::RegistryLength { .. }));

        let mut outcome = run_example(ExampleId::Ex4, &ExampleParams::default(), tol()).unwrap();
        outcome.verdicts.swap(0, 1);
        let err = assemble("example", outcome, vec![], tol(), None).unwrap_err();
        assert!(matches!(err, ReportError::RegistryMismatch { position: 0, .. }));
    }

    #[test]
    fn json_rendering_is_deterministic() {
        let run = || {
            let outcome = run_example(ExampleId::Ex2, &ExampleParams::default(), tol()).unwrap();
            assemble(
                "example",
                outcome,
                vec![("beta".to_string(), "0.6931471805599453".to_string())],
                tol(),
                None,
            )
            .unwrap()
            .to_json()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn text_rendering_mentions_every_check() {
        let outcome = run_example(ExampleId::Ex2, &ExampleParams::default(), tol()).unwrap();
        let report = assemble("example", outcome, vec![], tol(), None).unwrap();
        let text = report.to_text();
        for id in scenario::check_registry() {
            assert!(text.contains(id), "missing {id}");
        }
        assert!(text.contains("summary:"));
    }
}
