//! Three-state verdicts for executable checks and their JSON wire form.
//!
//! Every check reports its achieved deviation and the threshold it was judged
//! against, never a bare boolean. Checks whose statement is conditional carry a
//! hypothesis status so a falsified hypothesis is never counted as a falsified
//! conclusion.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "fails")]
    Fails,
    #[serde(rename = "not-applicable")]
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisStatus {
    /// The check has no hypothesis beyond construction succeeding.
    #[serde(rename = "unconditional")]
    Unconditional,
    #[serde(rename = "satisfied")]
    Satisfied,
    #[serde(rename = "not-satisfied")]
    NotSatisfied,
}

/// Where the worst deviation of a check was attained.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Witness {
    /// Group element index, when the check ranges over the group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<usize>,
    /// Flow time, when the check ranges over sampled times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Free-form position, e.g. the matrix unit or entry involved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub check_id: String,
    pub status: CheckStatus,
    pub max_deviation: f64,
    pub threshold: f64,
    pub hypothesis_status: HypothesisStatus,
    pub witnesses: Vec<Witness>,
}

impl Verdict {
    /// Unconditional check: holds iff the deviation is within the threshold.
    pub fn from_deviation(
        check_id: &str,
        max_deviation: f64,
        threshold: f64,
        witnesses: Vec<Witness>,
    ) -> Self {
        Self {
            check_id: check_id.to_string(),
            status: if max_deviation <= threshold {
                CheckStatus::Holds
            } else {
                CheckStatus::Fails
            },
            max_deviation,
            threshold,
            hypothesis_status: HypothesisStatus::Unconditional,
            witnesses,
        }
    }

    /// Hypothesis-gated check: not-applicable when the hypothesis fails,
    /// otherwise judged by the deviation.
    pub fn gated(
        check_id: &str,
        hypothesis_holds: bool,
        max_deviation: f64,
        threshold: f64,
        witnesses: Vec<Witness>,
    ) -> Self {
        if hypothesis_holds {
            Self {
                hypothesis_status: HypothesisStatus::Satisfied,
                ..Self::from_deviation(check_id, max_deviation, threshold, witnesses)
            }
        } else {
            Self {
                check_id: check_id.to_string(),
                status: CheckStatus::NotApplicable,
                max_deviation,
                threshold,
                hypothesis_status: HypothesisStatus::NotSatisfied,
                witnesses,
            }
        }
    }

    /// Biconditional check: holds iff the independently evaluated sides agree.
    pub fn agreement(
        check_id: &str,
        agrees: bool,
        max_deviation: f64,
        threshold: f64,
        witnesses: Vec<Witness>,
    ) -> Self {
        Self {
            check_id: check_id.to_string(),
            status: if agrees { CheckStatus::Holds } else { CheckStatus::Fails },
            max_deviation,
            threshold,
            hypothesis_status: HypothesisStatus::Unconditional,
            witnesses,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fails
    }
}

/// Tracks the worst deviation seen and the witness that attained it.
#[derive(Debug, Default)]
pub struct MaxTracker {
    max: f64,
    witness: Option<Witness>,
}

impl MaxTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a deviation; the witness closure runs only on a new maximum.
    pub fn observe(&mut self, deviation: f64, witness: impl FnOnce() -> Witness) {
        if deviation > self.max || self.witness.is_none() {
            self.max = self.max.max(deviation);
            self.witness = Some(witness());
        }
    }

    pub fn observe_plain(&mut self, deviation: f64) {
        self.max = self.max.max(deviation);
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn witnesses(self) -> Vec<Witness> {
        self.witness.into_iter().collect()
    }
}
