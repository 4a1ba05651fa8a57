//! Faithful states, Radon-Nikodym cocycles, invariance classification,
//! the Haar-averaged density `kappa`, and centralizers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{commutant, AlgebraBasis, AlgebraError};
use crate::group::GroupAction;
use crate::linalg::{hermitian_eigen, HermitianEigen, LinalgError, Operator, Tolerance};

#[derive(Debug, thiserror::Error)]
pub enum QuasiError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("density trace is {trace:.6e}, not 1 within {threshold:.3e}")]
    TraceNotOne { trace: f64, threshold: f64 },
    #[error("state and action dimensions differ: {state} vs {action}")]
    DimensionMismatch { state: usize, action: usize },
    #[error("operation requires a strongly quasi invariant family, found {found:?}")]
    NotStronglyQuasiInvariant { found: Classification },
    #[error(
        "defining relation for the cocycle at element {g} deviates by {deviation:.3e} \
         (threshold {threshold:.3e})"
    )]
    CocycleRelation { g: usize, deviation: f64, threshold: f64 },
    #[error("averaged state fails invariance by {deviation:.3e} (threshold {threshold:.3e})")]
    AveragedStateNotInvariant { deviation: f64, threshold: f64 },
    #[error(
        "averaged state disagrees with the averaged-argument form by {deviation:.3e} \
         (threshold {threshold:.3e})"
    )]
    AveragedStateMeanMismatch { deviation: f64, threshold: f64 },
}

/// A faithful state a -> Tr(rho a) given by a positive-definite density with unit trace.
///
/// The spectral decomposition of the density is computed once and cached; it backs
/// every real and imaginary power of the density used elsewhere.
#[derive(Clone, Debug)]
pub struct FaithfulState {
    density: Operator,
    eigen: HermitianEigen,
}

impl FaithfulState {
    /// Validates Hermiticity, unit trace, and strict positivity of the density.
    ///
    /// Eigenvalues at or below the absolute tolerance are rejected: a state this close
    /// to singular cannot support the inverse-density constructions downstream.
    pub fn new(density: Operator, tol: Tolerance) -> Result<Self, QuasiError> {
        let mut density = density;
        density.ensure_hermitian(tol)?;
        let trace = density.trace().re;
        let threshold = tol.threshold(1.0);
        if (trace - 1.0).abs() > threshold {
            return Err(QuasiError::TraceNotOne { trace, threshold });
        }
        let eigen = hermitian_eigen(&density, tol)?;
        let smallest = eigen.values[0];
        if smallest <= tol.abs {
            return Err(LinalgError::NotPositiveDefinite {
                eigenvalue: smallest,
                threshold: tol.abs,
            }
            .into());
        }
        Ok(Self { density, eigen })
    }

    /// Normalizes a positive-definite operator by its trace and wraps it as a state.
    pub fn from_unnormalized(op: &Operator, tol: Tolerance) -> Result<Self, QuasiError> {
        let trace = op.trace().re;
        Self::new(op.scale(Complex64::new(1.0 / trace, 0.0)), tol)
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn density(&self) -> &Operator {
        &self.density
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    /// Evaluates the state: Tr(rho a).
    pub fn expect(&self, a: &Operator) -> Complex64 {
        self.density.mul(a).trace()
    }

    /// rho^z through the cached spectral decomposition; z may be complex (rho^{it} is unitary).
    pub fn density_power(&self, z: Complex64) -> Operator {
        self.eigen.map_spectrum(|lambda| (z * lambda.ln()).exp())
    }
}

/// Invariance class of a state under a group action, ordered strongest to weakest.
///
/// Classification never over-claims: a family on the boundary of a stronger class is
/// reported in the weaker one, with the deviations retained in the law report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "G-invariant")]
    GInvariant,
    #[serde(rename = "strongly-quasi-invariant")]
    StronglyQuasiInvariant,
    #[serde(rename = "quasi-invariant-only")]
    QuasiInvariantOnly,
}

impl Classification {
    /// Same spelling as the serialized form.
    pub fn name(self) -> &'static str {
        match self {
            Classification::GInvariant => "G-invariant",
            Classification::StronglyQuasiInvariant => "strongly-quasi-invariant",
            Classification::QuasiInvariantOnly => "quasi-invariant-only",
        }
    }
}

/// Residuals of the algebraic laws every cocycle family must satisfy, plus the
/// deviations that decide the classification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CocycleLawReport {
    /// Max-norm distance of the identity element's cocycle from the unit.
    pub identity_deviation: f64,
    /// Worst pair deviation of x_{g2 g1} from x_{g1} * g1^{-1}(x_{g2}).
    pub chain_deviation: f64,
    /// Worst deviation of x_g^{-1} from g^{-1}(x_{g^{-1}}).
    pub inverse_deviation: f64,
    /// Worst Hermiticity deviation over the family; decides strong quasi invariance.
    pub hermiticity_deviation: f64,
    /// Worst distance of any cocycle from the unit; decides invariance.
    pub identity_distance: f64,
    /// Worst pairwise commutator among the cocycles (a consequence of strong
    /// quasi invariance, verified rather than assumed).
    pub commutation_deviation: f64,
    /// Smallest eigenvalue over the symmetrized cocycles; positive for strongly
    /// quasi invariant families.
    pub positivity_margin: f64,
}

/// All cocycles of a state under an action, indexed by group element.
///
/// Cocycles are always realized as bounded matrices: in finite dimension an operator
/// affiliated with the algebra is itself a member, so families satisfying the defining
/// relation only in the generalized (affiliated-density) sense coincide with this type.
#[derive(Clone, Debug, Serialize)]
pub struct CocycleFamily {
    pub cocycles: Vec<Operator>,
    pub classification: Classification,
    pub laws: CocycleLawReport,
}

impl CocycleFamily {
    /// Finite-dimensional models never produce genuinely unbounded cocycles, so the
    /// generalized and bounded notions agree for every family this type can hold.
    pub const BOUNDED_ONLY: bool = true;
}

/// The unique x_g with Tr(rho g(a)) = Tr(rho x_g a) for all a, namely
/// x_g = rho^{-1} u_g^* rho u_g for g = Ad(u_g).
///
/// The defining relation is re-verified against every matrix unit E_ij; since
/// Tr(M E_ij) reads off the (j,i) entry of M, that amounts to the entrywise
/// comparison of u_g^* rho u_g with rho x_g.
pub fn cocycle_of(
    state: &FaithfulState,
    action: &GroupAction,
    g: usize,
    tol: Tolerance,
) -> Result<Operator, QuasiError> {
    if state.dim() != action.dim() {
        return Err(QuasiError::DimensionMismatch {
            state: state.dim(),
            action: action.dim(),
        });
    }
    let rho = state.density();
    let rho_inv = state.density_power(Complex64::new(-1.0, 0.0));
    let u = action.map(g).unitary();
    let twisted = u.adjoint().mul(rho).mul(u);
    let x = rho_inv.mul(&twisted);
    let deviation = rho.mul(&x).sub(&twisted).max_norm();
    let threshold = tol.threshold(twisted.max_norm());
    if deviation > threshold {
        return Err(QuasiError::CocycleRelation { g, deviation, threshold });
    }
    Ok(x)
}

/// Computes every cocycle, measures the family laws, and classifies the invariance.
///
/// Classification thresholds are strict: all cocycles within tolerance of the unit
/// gives `GInvariant`; all Hermitian within tolerance gives `StronglyQuasiInvariant`;
/// anything on or past a boundary falls to `QuasiInvariantOnly` (or from invariant to
/// strongly quasi invariant) with the deviation reported.
pub fn classify_invariance(
    state: &FaithfulState,
    action: &GroupAction,
    tol: Tolerance,
) -> Result<CocycleFamily, QuasiError> {
    let group = action.group();
    let cocycles: Vec<Operator> = group
        .elements()
        .map(|g| cocycle_of(state, action, g, tol))
        .collect::<Result<_, _>>()?;
    let scale = cocycles.iter().map(Operator::max_norm).fold(1.0, f64::max);
    let id = Operator::identity(state.dim());

    let identity_deviation = cocycles[group.identity()].sub(&id).max_norm();
    let mut chain_deviation = 0.0f64;
    for g2 in group.elements() {
        for g1 in group.elements() {
            let lhs = &cocycles[group.mul(g2, g1)];
            let rhs = cocycles[g1].mul(&action.apply_inverse(g1, &cocycles[g2]));
            chain_deviation = chain_deviation.max(lhs.sub(&rhs).max_norm());
        }
    }
    let mut inverse_deviation = 0.0f64;
    for g in group.elements() {
        let lhs = invert_cocycle(&cocycles[g]);
        let rhs = action.apply_inverse(g, &cocycles[group.inv(g)]);
        inverse_deviation = inverse_deviation.max(lhs.sub(&rhs).max_norm());
    }
    let hermiticity_deviation = cocycles
        .iter()
        .map(Operator::hermitian_deviation)
        .fold(0.0, f64::max);
    let identity_distance = cocycles
        .iter()
        .map(|x| x.sub(&id).max_norm())
        .fold(0.0, f64::max);
    let mut commutation_deviation = 0.0f64;
    for (i, a) in cocycles.iter().enumerate() {
        for b in &cocycles[i + 1..] {
            commutation_deviation = commutation_deviation.max(a.commutator(b).max_norm());
        }
    }
    let mut positivity_margin = f64::INFINITY;
    for x in &cocycles {
        let sym = x.add(&x.adjoint()).scale(Complex64::new(0.5, 0.0));
        let eig = hermitian_eigen(&sym, Tolerance::default())?;
        positivity_margin = positivity_margin.min(eig.values[0]);
    }

    let threshold = tol.threshold(scale);
    let classification = if identity_distance < threshold {
        Classification::GInvariant
    } else if hermiticity_deviation < threshold {
        Classification::StronglyQuasiInvariant
    } else {
        Classification::QuasiInvariantOnly
    };
    Ok(CocycleFamily {
        cocycles,
        classification,
        laws: CocycleLawReport {
            identity_deviation,
            chain_deviation,
            inverse_deviation,
            hermiticity_deviation,
            identity_distance,
            commutation_deviation,
            positivity_margin,
        },
    })
}

// x_g = rho^{-1} u^* rho u is a product of two positive-definite factors, so it is
// invertible with inverse u^* rho^{-1} u rho; no spectral decomposition needed.
fn invert_cocycle(x: &Operator) -> Operator {
    let lu = x.mat().clone().full_piv_lu();
    let inv = lu
        .try_inverse()
        .expect("cocycles are products of positive-definite factors, hence invertible");
    Operator::new(inv).expect("inverse of a finite matrix is finite")
}

/// Uniform Haar mean of the cocycles, kappa = (1/|G|) sum_g x_g.
///
/// Requires a strongly quasi invariant (or invariant) family; the mean is then
/// Hermitian positive definite with a bounded inverse, and both facts are verified.
pub fn kappa(family: &CocycleFamily, tol: Tolerance) -> Result<Operator, QuasiError> {
    if family.classification == Classification::QuasiInvariantOnly {
        return Err(QuasiError::NotStronglyQuasiInvariant {
            found: family.classification,
        });
    }
    let n = family.cocycles[0].dim();
    let order = family.cocycles.len();
    let mut sum = Operator::zeros(n);
    for x in &family.cocycles {
        sum = sum.add(x);
    }
    let mut mean = sum.scale(Complex64::new(1.0 / order as f64, 0.0));
    mean.ensure_hermitian(tol)?;
    let eig = hermitian_eigen(&mean, tol)?;
    if eig.values[0] <= tol.abs {
        return Err(LinalgError::NotPositiveDefinite {
            eigenvalue: eig.values[0],
            threshold: tol.abs,
        }
        .into());
    }
    Ok(mean)
}

/// A Haar-averaged state together with the residuals of its defining identities.
#[derive(Clone, Debug)]
pub struct AveragedState {
    pub state: FaithfulState,
    /// Worst violation of invariance of the averaged state under the action.
    pub invariance_deviation: f64,
    /// Worst disagreement between a -> Tr(rho kappa a) and a -> mean_g Tr(rho g(a)).
    pub mean_identity_deviation: f64,
}

/// The G-invariant state a -> phi(kappa a), with density the symmetrized kappa rho.
///
/// kappa commutes with rho up to tolerance (it lies in the centralizer), so the
/// symmetrization only removes numerical skew. Invariance of the result and the
/// identity phi(kappa a) = mean_g phi(g(a)) are verified on all matrix units, which
/// again reduces to entrywise comparisons of the transported densities.
pub fn averaged_state(
    state: &FaithfulState,
    family: &CocycleFamily,
    action: &GroupAction,
    tol: Tolerance,
) -> Result<AveragedState, QuasiError> {
    let mean = kappa(family, tol)?;
    let rho = state.density();
    let raw = rho.mul(&mean);
    let density = raw.add(&raw.adjoint()).scale(Complex64::new(0.5, 0.0));

    let transported_mean = {
        let group = action.group();
        let mut sum = Operator::zeros(state.dim());
        for g in group.elements() {
            let u = action.map(g).unitary();
            sum = sum.add(&u.adjoint().mul(rho).mul(u));
        }
        sum.scale(Complex64::new(1.0 / group.order() as f64, 0.0))
    };
    let mean_identity_deviation = density.sub(&transported_mean).max_norm();
    let threshold = tol.threshold(transported_mean.max_norm());
    if mean_identity_deviation > threshold {
        return Err(QuasiError::AveragedStateMeanMismatch {
            deviation: mean_identity_deviation,
            threshold,
        });
    }

    let mut invariance_deviation = 0.0f64;
    for g in action.group().elements() {
        let u = action.map(g).unitary();
        let moved = u.adjoint().mul(&density).mul(u);
        invariance_deviation = invariance_deviation.max(moved.sub(&density).max_norm());
    }
    let threshold = tol.threshold(density.max_norm());
    if invariance_deviation > threshold {
        return Err(QuasiError::AveragedStateNotInvariant {
            deviation: invariance_deviation,
            threshold,
        });
    }

    Ok(AveragedState {
        state: FaithfulState::new(density, tol)?,
        invariance_deviation,
        mean_identity_deviation,
    })
}

/// Basis of the centralizer {x : phi(xy) = phi(yx) for all y}, computed as the
/// commutant of the density; in finite dimension the two descriptions coincide.
pub fn centralizer(state: &FaithfulState, tol: Tolerance) -> Result<AlgebraBasis, QuasiError> {
    Ok(commutant(std::slice::from_ref(state.density()), tol)?)
}
