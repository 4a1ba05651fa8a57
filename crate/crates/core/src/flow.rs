//! Modular flow of a faithful state, the flow-invariant conditional
//! expectation, and executable checks for every statement relating a group
//! action, the flow, the fixed-point algebra, and the centralizer.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::algebra::{commutant, orthonormalize, AlgebraBasis};
use crate::group::GroupAction;
use crate::linalg::{hermitian_eigen, Operator, Tolerance};
use crate::quasi::{
    averaged_state, kappa, Classification, CocycleFamily, FaithfulState, QuasiError,
};
use crate::verdict::{MaxTracker, Verdict, Witness};

/// Times at which "for all t" identities are sampled; both sides of every
/// identity are entire in t with finitely many frequencies, so failure on a
/// dense set would surface at these samples.
pub const DEFAULT_SAMPLE_TIMES: [f64; 8] = [0.0, 0.37, -0.37, 1.0, -1.0, 2.5, -2.5, PI];

/// Relative gap (times the largest eigenvalue) below which neighboring
/// density eigenvalues are treated as one spectral cluster, keeping the
/// pinching stable against floating-point splitting of equal eigenvalues.
pub const SPECTRAL_CLUSTER_RELATIVE_GAP: f64 = 1e-6;

pub const GROUP_LAW_CHECK: &str = "flow.group-law";
pub const STATE_INVARIANCE_CHECK: &str = "flow.state-invariance";
pub const FACTOR_COCYCLE_CHECK: &str = "flow.factor-cocycle-relation";
pub const GROUP_COMMUTATION_CHECK: &str = "flow.group-commutation-criterion";
pub const STATE_LEVEL_COMMUTATION_CHECK: &str = "flow.state-level-commutation";
pub const MEAN_STATE_COMPOSITIONS_CHECK: &str = "flow.mean-state-compositions";
pub const MEAN_MAP_COMMUTATION_CHECK: &str = "flow.mean-map-commutation";
pub const TWISTED_FLOW_CHECK: &str = "flow.mean-twisted-flow";
pub const AVERAGED_FLOW_INVARIANCE_CHECK: &str = "flow.averaged-flow-preserves-state";
pub const ERGODIC_COINCIDENCE_CHECK: &str = "flow.ergodic-coincidence";
pub const MEAN_PRESERVES_CENTRALIZER_CHECK: &str = "flow.mean-preserves-centralizer";
pub const FLOW_PRESERVES_FIXED_CHECK: &str = "flow.flow-preserves-fixed-algebra";
pub const INVARIANCE_EQUIVALENCE_CHECK: &str = "flow.invariance-equivalence";
pub const FIXED_COCYCLE_CHECK: &str = "flow.fixed-cocycle-triviality";
pub const PINCHING_IDEMPOTENT_CHECK: &str = "flow.pinching-idempotent";
pub const PINCHING_STATE_CHECK: &str = "flow.pinching-preserves-state";
pub const PINCHING_RANGE_CHECK: &str = "flow.pinching-range-centralizer";

/// The one-parameter automorphism group a -> rho^{it} a rho^{-it} of a
/// faithful state, with cached spectral projections for the pinching map.
#[derive(Clone, Debug)]
pub struct ModularFlow {
    state: FaithfulState,
    sample_times: Vec<f64>,
    projections: Vec<Operator>,
}

impl ModularFlow {
    pub fn new(state: FaithfulState) -> Self {
        Self::with_sample_times(state, DEFAULT_SAMPLE_TIMES.to_vec())
    }

    pub fn with_sample_times(state: FaithfulState, sample_times: Vec<f64>) -> Self {
        let projections = cluster_projections(&state);
        Self { state, sample_times, projections }
    }

    pub fn state(&self) -> &FaithfulState {
        &self.state
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    /// The flow unitary rho^{it}.
    pub fn unitary(&self, t: f64) -> Operator {
        self.state.density_power(Complex64::new(0.0, t))
    }

    /// sigma_t(a) = rho^{it} a rho^{-it}.
    pub fn apply(&self, a: &Operator, t: f64) -> Operator {
        let u = self.unitary(t);
        u.mul(a).mul(&u.adjoint())
    }

    /// Spectral projections of the density onto its eigenvalue clusters.
    pub fn spectral_projections(&self) -> &[Operator] {
        &self.projections
    }

    /// The pinching x -> sum_k P_k x P_k over the density's spectral clusters:
    /// the state-preserving conditional expectation onto the centralizer,
    /// equal to the long-time average of the flow.
    pub fn invariant_expectation(&self, x: &Operator) -> Operator {
        let mut acc = Operator::zeros(x.dim());
        for p in &self.projections {
            acc = acc.add(&p.mul(x).mul(p));
        }
        acc
    }
}

fn cluster_projections(state: &FaithfulState) -> Vec<Operator> {
    let eigen = state.eigen();
    let n = state.dim();
    let largest = eigen.values[eigen.values.len() - 1];
    let gap = SPECTRAL_CLUSTER_RELATIVE_GAP * largest;
    let mut projections = Vec::new();
    let mut current = Operator::zeros(n);
    for (k, &value) in eigen.values.iter().enumerate() {
        if k > 0 && value - eigen.values[k - 1] > gap {
            projections.push(current);
            current = Operator::zeros(n);
        }
        let v = eigen.vectors.column(k).clone_owned();
        let rank_one = Operator::new(&v * v.adjoint()).expect("eigenvector outer product");
        current = current.add(&rank_one);
    }
    projections.push(current);
    projections
}

/// Trapezoidal time average (1/2T) \int_{-T}^{T} sigma_t(x) dt; converges to
/// the pinching at rate O(1/T), which makes it an independent slow oracle.
pub fn time_averaged_flow(flow: &ModularFlow, x: &Operator, half_width: f64, nodes: usize) -> Operator {
    assert!(nodes >= 2, "trapezoid rule needs at least two nodes");
    let step = 2.0 * half_width / (nodes - 1) as f64;
    let mut acc = Operator::zeros(x.dim());
    for k in 0..nodes {
        let t = -half_width + k as f64 * step;
        let weight = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        acc = acc.add(&flow.apply(x, t).scale(Complex64::new(weight, 0.0)));
    }
    acc.scale(Complex64::new(step / (2.0 * half_width), 0.0))
}

/// Conjugation a -> w a w^* as a matrix on the coefficient space (row-major).
fn conjugation_superop(w: &Operator) -> Operator {
    w.kronecker(&w.conjugate())
}

/// Max-entry distance between the superoperators of two conjugations; equals
/// the worst deviation of the two maps over all matrix units, entrywise.
fn conjugation_distance(w1: &Operator, w2: &Operator) -> f64 {
    conjugation_superop(w1).sub(&conjugation_superop(w2)).max_norm()
}

/// Deviations of the flow's own laws: identity at t = 0, the one-parameter
/// group law at sampled time pairs, and invariance of the state.
#[derive(Clone, Debug)]
pub struct FlowLaws {
    pub identity_deviation: f64,
    pub composition_deviation: f64,
    pub state_invariance_deviation: f64,
    pub group_law: Verdict,
    pub state_invariance: Verdict,
}

pub fn check_flow_laws(flow: &ModularFlow, tol: Tolerance) -> FlowLaws {
    let n = flow.state().dim();
    let identity_deviation = flow.unitary(0.0).sub(&Operator::identity(n)).max_norm();
    let mut composition = MaxTracker::new();
    for &t in flow.sample_times() {
        for &s in flow.sample_times() {
            let lhs = flow.unitary(t).mul(&flow.unitary(s));
            let deviation = lhs.sub(&flow.unitary(t + s)).max_norm();
            composition.observe(deviation, || Witness {
                t: Some(t),
                location: Some(format!("second time {s}")),
                ..Witness::default()
            });
        }
    }
    // Tr(rho sigma_t(a)) = Tr(a rho) for all a is the entrywise statement
    // rho^{-it} rho rho^{it} = rho.
    let rho = flow.state().density();
    let mut invariance = MaxTracker::new();
    for &t in flow.sample_times() {
        let u = flow.unitary(t);
        let moved = u.adjoint().mul(rho).mul(&u);
        invariance.observe(moved.sub(rho).max_norm(), || Witness {
            t: Some(t),
            ..Witness::default()
        });
    }
    let threshold = tol.threshold(1.0);
    FlowLaws {
        identity_deviation,
        composition_deviation: composition.max(),
        state_invariance_deviation: invariance.max(),
        group_law: Verdict::from_deviation(
            GROUP_LAW_CHECK,
            identity_deviation.max(composition.max()),
            threshold,
            composition.witnesses(),
        ),
        state_invariance: Verdict::from_deviation(
            STATE_INVARIANCE_CHECK,
            invariance.max(),
            threshold,
            invariance.witnesses(),
        ),
    }
}

/// Worst deviation between sigma_t(g(a)) and g(sigma_t(a)) over the group,
/// sampled times, and all matrix units.
pub fn flow_group_commutation_deviation(flow: &ModularFlow, action: &GroupAction) -> (f64, Vec<Witness>) {
    let mut tracker = MaxTracker::new();
    for g in action.group().elements() {
        let u = action.map(g).unitary();
        for &t in flow.sample_times() {
            let f = flow.unitary(t);
            let deviation = conjugation_distance(&f.mul(u), &u.mul(&f));
            tracker.observe(deviation, || Witness {
                g: Some(g),
                t: Some(t),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    (max, tracker.witnesses())
}

/// Both sides of the criterion "the flow commutes with the action if and only
/// if the state is strongly quasi invariant with central cocycles", evaluated
/// independently.
#[derive(Clone, Debug)]
pub struct FlowGroupCommutation {
    pub commute: bool,
    pub commutation_deviation: f64,
    pub central_cocycles: bool,
    pub centrality_deviation: f64,
    pub strongly_quasi: bool,
    pub verdict: Verdict,
}

pub fn check_flow_group_commutation(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> FlowGroupCommutation {
    let n = flow.state().dim();
    let (commutation_deviation, witnesses) = flow_group_commutation_deviation(flow, action);
    let commute = commutation_deviation <= tol.threshold(1.0);

    // The ambient algebra is the full matrix algebra, whose center is the
    // scalars; centrality of x_g is its distance from (Tr x_g / n) I.
    let mut centrality = MaxTracker::new();
    let mut scale = 1.0f64;
    for (g, x) in family.cocycles.iter().enumerate() {
        let mean = x.trace() / Complex64::new(n as f64, 0.0);
        let deviation = x.sub(&Operator::identity(n).scale(mean)).max_norm();
        scale = scale.max(x.max_norm());
        centrality.observe(deviation, || Witness { g: Some(g), ..Witness::default() });
    }
    let centrality_deviation = centrality.max();
    let central_cocycles = centrality_deviation <= tol.threshold(scale);
    let strongly_quasi = family.classification != Classification::QuasiInvariantOnly;

    let agrees = commute == (central_cocycles && strongly_quasi);
    FlowGroupCommutation {
        commute,
        commutation_deviation,
        central_cocycles,
        centrality_deviation,
        strongly_quasi,
        verdict: Verdict::agreement(
            GROUP_COMMUTATION_CHECK,
            agrees,
            commutation_deviation.min(centrality_deviation),
            tol.threshold(scale),
            witnesses,
        ),
    }
}

/// Factor-algebra cocycle relation: g^{-1}(sigma_t(a)) equals
/// x_g^{it} sigma_t(g^{-1}(a)) x_g^{-it} for strongly quasi invariant states.
pub fn check_factor_cocycle_relation(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<Verdict, QuasiError> {
    if family.classification == Classification::QuasiInvariantOnly {
        return Err(QuasiError::NotStronglyQuasiInvariant {
            found: family.classification,
        });
    }
    let mut tracker = MaxTracker::new();
    for g in action.group().elements() {
        let u = action.map(g).unitary();
        let mut x = family.cocycles[g].clone();
        x.ensure_hermitian(tol)?;
        let x_eigen = hermitian_eigen(&x, tol)?;
        for &t in flow.sample_times() {
            let f = flow.unitary(t);
            let x_it = x_eigen.map_spectrum(|v| (Complex64::new(0.0, t) * v.ln()).exp());
            // Both sides conjugate by a unitary: w1 = u^* rho^{it} and
            // w2 = x_g^{it} rho^{it} u^*.
            let w1 = u.adjoint().mul(&f);
            let w2 = x_it.mul(&f).mul(&u.adjoint());
            let deviation = conjugation_distance(&w1, &w2);
            tracker.observe(deviation, || Witness {
                g: Some(g),
                t: Some(t),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    Ok(Verdict::from_deviation(
        FACTOR_COCYCLE_CHECK,
        max,
        tol.threshold(1.0),
        tracker.witnesses(),
    ))
}

/// State-level commutation: phi(g(sigma_t(a))) = phi(sigma_t(g(a))) and, with
/// it, flow-invariance of every transported state phi(g(.)); both hold for
/// strongly quasi invariant states even when the maps themselves do not
/// commute.
pub fn check_state_level_commutation(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Verdict {
    let applicable = family.classification != Classification::QuasiInvariantOnly;
    let rho = flow.state().density();
    let mut tracker = MaxTracker::new();
    for g in action.group().elements() {
        let u = action.map(g).unitary();
        let transported = u.adjoint().mul(rho).mul(u);
        for &t in flow.sample_times() {
            let f = flow.unitary(t);
            // a -> phi(g(sigma_t(a))) has density rho^{-it} u^* rho u rho^{it};
            // a -> phi(sigma_t(g(a))) has density u^* rho^{-it} rho rho^{it} u.
            let lhs = f.adjoint().mul(&transported).mul(&f);
            let rhs = u.adjoint().mul(&f.adjoint()).mul(rho).mul(&f).mul(u);
            let deviation = lhs.sub(&rhs).max_norm().max(lhs.sub(&transported).max_norm());
            tracker.observe(deviation, || Witness {
                g: Some(g),
                t: Some(t),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    Verdict::gated(
        STATE_LEVEL_COMMUTATION_CHECK,
        applicable,
        max,
        tol.threshold(1.0),
        tracker.witnesses(),
    )
}

/// The two mean-versus-flow commutation statements: the state-level identity
/// phi∘mean = phi∘sigma_t∘mean = phi∘mean∘sigma_t (unconditional under strong
/// quasi invariance) and the map-level identity sigma_t∘mean = mean∘sigma_t
/// (expected only when the flow commutes with the action).
#[derive(Clone, Debug)]
pub struct MeanModularCommutation {
    pub state_level: Verdict,
    pub map_level: Verdict,
    pub flow_group_commute: bool,
}

pub fn check_mean_modular_commutation(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> MeanModularCommutation {
    let strongly_quasi = family.classification != Classification::QuasiInvariantOnly;
    let (commutation_deviation, _) = flow_group_commutation_deviation(flow, action);
    let commute = commutation_deviation <= tol.threshold(1.0);
    let n = flow.state().dim();

    let mut state_level = MaxTracker::new();
    let mut map_level = MaxTracker::new();
    for i in 0..n {
        for j in 0..n {
            let unit = Operator::matrix_unit(n, i, j);
            let averaged = action.mean_over_group(&unit);
            let base = flow.state().expect(&averaged);
            for &t in flow.sample_times() {
                let flowed_then_averaged = action.mean_over_group(&flow.apply(&unit, t));
                let averaged_then_flowed = flow.apply(&averaged, t);
                let d1 = (flow.state().expect(&averaged_then_flowed) - base).norm();
                let d2 = (flow.state().expect(&flowed_then_averaged) - base).norm();
                state_level.observe(d1.max(d2), || Witness {
                    t: Some(t),
                    location: Some(format!("matrix unit ({i},{j})")),
                    ..Witness::default()
                });
                let map_deviation =
                    averaged_then_flowed.sub(&flowed_then_averaged).max_norm();
                map_level.observe(map_deviation, || Witness {
                    t: Some(t),
                    location: Some(format!("matrix unit ({i},{j})")),
                    ..Witness::default()
                });
            }
        }
    }
    let threshold = tol.threshold(1.0);
    let state_max = state_level.max();
    let map_max = map_level.max();
    MeanModularCommutation {
        state_level: Verdict::gated(
            MEAN_STATE_COMPOSITIONS_CHECK,
            strongly_quasi,
            state_max,
            threshold,
            state_level.witnesses(),
        ),
        map_level: Verdict::gated(
            MEAN_MAP_COMMUTATION_CHECK,
            strongly_quasi && commute,
            map_max,
            threshold,
            map_level.witnesses(),
        ),
        flow_group_commute: commute,
    }
}

/// The twist relating the flow of the state to the flow of its Haar average:
/// sigma_t(x) = kappa^{-it} sigma_t^avg(x) kappa^{it}, plus invariance of the
/// original state under the averaged flow.
#[derive(Clone, Debug)]
pub struct TwistedFlowReport {
    pub twist: Verdict,
    pub averaged_invariance: Verdict,
}

pub fn check_mean_twisted_flow(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<TwistedFlowReport, QuasiError> {
    if family.classification == Classification::QuasiInvariantOnly {
        let na = |id: &str| Verdict::gated(id, false, 0.0, tol.threshold(1.0), vec![]);
        return Ok(TwistedFlowReport {
            twist: na(TWISTED_FLOW_CHECK),
            averaged_invariance: na(AVERAGED_FLOW_INVARIANCE_CHECK),
        });
    }
    let mean = kappa(family, tol)?;
    let mean_eigen = hermitian_eigen(&mean, tol)?;
    let averaged = averaged_state(flow.state(), family, action, tol)?;
    let averaged_flow =
        ModularFlow::with_sample_times(averaged.state.clone(), flow.sample_times().to_vec());

    let mut twist = MaxTracker::new();
    let mut invariance = MaxTracker::new();
    let rho = flow.state().density();
    for &t in flow.sample_times() {
        let mean_down = mean_eigen.map_spectrum(|v| (Complex64::new(0.0, -t) * v.ln()).exp());
        let w1 = flow.unitary(t);
        let w2 = mean_down.mul(&averaged_flow.unitary(t));
        twist.observe(conjugation_distance(&w1, &w2), || Witness {
            t: Some(t),
            ..Witness::default()
        });
        let u = averaged_flow.unitary(t);
        let moved = u.adjoint().mul(rho).mul(&u);
        invariance.observe(moved.sub(rho).max_norm(), || Witness {
            t: Some(t),
            ..Witness::default()
        });
    }
    let threshold = tol.threshold(1.0);
    let twist_max = twist.max();
    let invariance_max = invariance.max();
    Ok(TwistedFlowReport {
        twist: Verdict::gated(TWISTED_FLOW_CHECK, true, twist_max, threshold, twist.witnesses()),
        averaged_invariance: Verdict::gated(
            AVERAGED_FLOW_INVARIANCE_CHECK,
            true,
            invariance_max,
            threshold,
            invariance.witnesses(),
        ),
    })
}

/// Coincidence of the group average with the flow average on every matrix
/// unit, gated on the hypotheses that the state is invariant and that its
/// centralizer equals the fixed-point algebra. Equality, not one inclusion,
/// is required: both maps are projections onto their respective algebras, so
/// they can only agree when the algebras agree, and one-sided containment
/// admits counterexamples (a trivial action on a non-tracial state has
/// Centr strictly inside the fixed points, identity group mean, and a
/// non-trivial flow average).
pub fn check_ergodic_coincidence(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<Verdict, QuasiError> {
    let invariant = family.classification == Classification::GInvariant;
    let centr = commutant(std::slice::from_ref(flow.state().density()), tol)?;
    let fixed = action.fixed_point_algebra(tol)?;
    let centr_in_fixed = fixed.containment_residual(&centr);
    let fixed_in_centr = centr.containment_residual(&fixed);
    let equality_residual = centr_in_fixed.max(fixed_in_centr);
    let hypothesis = invariant && equality_residual <= tol.threshold(1.0);
    if !hypothesis {
        return Ok(Verdict::gated(
            ERGODIC_COINCIDENCE_CHECK,
            false,
            equality_residual,
            tol.threshold(1.0),
            vec![Witness {
                location: Some(if !invariant {
                    "state is not invariant under the action".to_string()
                } else if centr_in_fixed > fixed_in_centr {
                    "centralizer escapes the fixed-point algebra".to_string()
                } else {
                    "fixed-point algebra escapes the centralizer".to_string()
                }),
                ..Witness::default()
            }],
        ));
    }
    let n = flow.state().dim();
    let mut tracker = MaxTracker::new();
    for i in 0..n {
        for j in 0..n {
            let unit = Operator::matrix_unit(n, i, j);
            let group_mean = action.mean_over_group(&unit);
            let flow_mean = flow.invariant_expectation(&unit);
            tracker.observe(group_mean.sub(&flow_mean).max_norm(), || Witness {
                location: Some(format!("matrix unit ({i},{j})")),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    Ok(Verdict::gated(
        ERGODIC_COINCIDENCE_CHECK,
        true,
        max,
        tol.threshold(1.0),
        tracker.witnesses(),
    ))
}

/// The two invariant-subalgebra inclusions available once the flow commutes
/// with the action: the group mean preserves the centralizer, and the flow
/// preserves the fixed-point algebra.
#[derive(Clone, Debug)]
pub struct InvariantInclusions {
    pub mean_preserves_centralizer: Verdict,
    pub flow_preserves_fixed_algebra: Verdict,
}

pub fn check_invariant_inclusions(
    flow: &ModularFlow,
    action: &GroupAction,
    tol: Tolerance,
) -> Result<InvariantInclusions, QuasiError> {
    let (commutation_deviation, _) = flow_group_commutation_deviation(flow, action);
    let commute = commutation_deviation <= tol.threshold(1.0);
    let centr = commutant(std::slice::from_ref(flow.state().density()), tol)?;
    let fixed = action.fixed_point_algebra(tol)?;

    let mut mean_tracker = MaxTracker::new();
    for (k, b) in centr.basis().iter().enumerate() {
        let averaged = action.mean_over_group(b);
        mean_tracker.observe(centr.span_residual(&averaged), || Witness {
            location: Some(format!("centralizer basis element {k}")),
            ..Witness::default()
        });
    }
    let mut flow_tracker = MaxTracker::new();
    for (k, b) in fixed.basis().iter().enumerate() {
        for &t in flow.sample_times() {
            let moved = flow.apply(b, t);
            flow_tracker.observe(fixed.span_residual(&moved), || Witness {
                t: Some(t),
                location: Some(format!("fixed-point basis element {k}")),
                ..Witness::default()
            });
        }
    }
    let threshold = tol.threshold(1.0);
    let mean_max = mean_tracker.max();
    let flow_max = flow_tracker.max();
    Ok(InvariantInclusions {
        mean_preserves_centralizer: Verdict::gated(
            MEAN_PRESERVES_CENTRALIZER_CHECK,
            commute,
            mean_max,
            threshold,
            mean_tracker.witnesses(),
        ),
        flow_preserves_fixed_algebra: Verdict::gated(
            FLOW_PRESERVES_FIXED_CHECK,
            commute,
            flow_max,
            threshold,
            flow_tracker.witnesses(),
        ),
    })
}

/// Three independently evaluated characterizations of invariance that must
/// agree: the cocycles are trivial; every cocycle lies in the fixed-point
/// algebra; the flow commutes with the action and every cocycle lies in the
/// fixed-point algebra.
#[derive(Clone, Debug)]
pub struct InvarianceEquivalence {
    pub invariant: bool,
    pub cocycles_fixed: bool,
    pub commute_and_fixed: bool,
    pub identity_distance: f64,
    pub fixed_residual: f64,
    pub commutation_deviation: f64,
    pub verdict: Verdict,
}

pub fn check_invariance_equivalence(
    flow: &ModularFlow,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<InvarianceEquivalence, QuasiError> {
    let invariant = family.classification == Classification::GInvariant;
    let fixed = action.fixed_point_algebra(tol)?;
    let mut scale = 1.0f64;
    let mut fixed_residual = 0.0f64;
    for x in &family.cocycles {
        scale = scale.max(x.max_norm());
        fixed_residual = fixed_residual.max(fixed.span_residual(x));
    }
    let cocycles_fixed = fixed_residual <= tol.threshold(scale);
    let (commutation_deviation, witnesses) = flow_group_commutation_deviation(flow, action);
    let commute = commutation_deviation <= tol.threshold(1.0);
    let commute_and_fixed = commute && cocycles_fixed;

    let agrees = invariant == cocycles_fixed && cocycles_fixed == commute_and_fixed;
    Ok(InvarianceEquivalence {
        invariant,
        cocycles_fixed,
        commute_and_fixed,
        identity_distance: family.laws.identity_distance,
        fixed_residual,
        commutation_deviation,
        verdict: Verdict::agreement(
            INVARIANCE_EQUIVALENCE_CHECK,
            agrees,
            family.laws.identity_distance.min(fixed_residual),
            tol.threshold(scale),
            witnesses,
        ),
    })
}

/// Any cocycle lying in the fixed-point algebra must be the unit; checked for
/// every group element whose cocycle is in the fixed span (the identity
/// element always qualifies, so the check is never vacuous).
pub fn check_fixed_cocycle_triviality(
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<Verdict, QuasiError> {
    let strongly_quasi = family.classification != Classification::QuasiInvariantOnly;
    let fixed = action.fixed_point_algebra(tol)?;
    let n = action.dim();
    let id = Operator::identity(n);
    let mut tracker = MaxTracker::new();
    for (g, x) in family.cocycles.iter().enumerate() {
        let residual = fixed.span_residual(x);
        if residual <= tol.threshold(x.max_norm()) {
            tracker.observe(x.sub(&id).max_norm(), || Witness {
                g: Some(g),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    Ok(Verdict::gated(
        FIXED_COCYCLE_CHECK,
        strongly_quasi,
        max,
        tol.threshold(1.0),
        tracker.witnesses(),
    ))
}

/// Structural facts about the pinching: idempotence, state preservation, and
/// that its range is exactly the centralizer (which it fixes elementwise).
#[derive(Clone, Debug)]
pub struct PinchingReport {
    pub idempotent: Verdict,
    pub preserves_state: Verdict,
    pub range_matches_centralizer: Verdict,
}

pub fn check_pinching_expectation(
    flow: &ModularFlow,
    tol: Tolerance,
) -> Result<PinchingReport, QuasiError> {
    let n = flow.state().dim();
    let mut idempotent = MaxTracker::new();
    let mut preserves = MaxTracker::new();
    let mut images = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let unit = Operator::matrix_unit(n, i, j);
            let once = flow.invariant_expectation(&unit);
            let twice = flow.invariant_expectation(&once);
            idempotent.observe(twice.sub(&once).max_norm(), || Witness {
                location: Some(format!("matrix unit ({i},{j})")),
                ..Witness::default()
            });
            preserves.observe(
                (flow.state().expect(&once) - flow.state().expect(&unit)).norm(),
                || Witness {
                    location: Some(format!("matrix unit ({i},{j})")),
                    ..Witness::default()
                },
            );
            images.push(once);
        }
    }
    let range = AlgebraBasis::from_orthonormal(n, orthonormalize(n * n, &images, tol));
    let centr = commutant(std::slice::from_ref(flow.state().density()), tol)?;
    let mut range_deviation = range
        .containment_residual(&centr)
        .max(centr.containment_residual(&range));
    for b in centr.basis() {
        range_deviation = range_deviation
            .max(flow.invariant_expectation(b).sub(b).max_norm());
    }
    let threshold = tol.threshold(1.0);
    Ok(PinchingReport {
        idempotent: Verdict::from_deviation(
            PINCHING_IDEMPOTENT_CHECK,
            idempotent.max(),
            threshold,
            idempotent.witnesses(),
        ),
        preserves_state: Verdict::from_deviation(
            PINCHING_STATE_CHECK,
            preserves.max(),
            threshold,
            preserves.witnesses(),
        ),
        range_matches_centralizer: Verdict::from_deviation(
            PINCHING_RANGE_CHECK,
            range_deviation,
            threshold,
            vec![],
        ),
    })
}
