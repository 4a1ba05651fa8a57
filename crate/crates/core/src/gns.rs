//! Cyclic representation of a faithful state on a matrix algebra, its modular
//! objects (S, F, J, Delta), the unitaries implementing a group action
//! relative to the shifted vectors Omega_g, the invariant-subspace projection,
//! and verdicts for the operator identities tying all of these together.

use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::{
    generate_algebra, is_abelian, left_mul_superop, orthonormalize, unvectorize, vectorize,
    AlgebraError,
};
use crate::group::{GroupAction, GroupError};
use crate::linalg::{
    hermitian_eigen, null_space, CMatrix, CVector, HermitianEigen, LinalgError, Operator,
    Tolerance,
};
use crate::quasi::{Classification, CocycleFamily, FaithfulState, QuasiError};
use crate::verdict::{MaxTracker, Verdict, Witness};

pub const COVARIANCE_CHECK: &str = "gns.covariance";
pub const REPRESENTATION_CHECK: &str = "gns.unitary-representation";
pub const MODULAR_EXCHANGE_S_CHECK: &str = "gns.modular-exchange-s";
pub const MODULAR_EXCHANGE_F_CHECK: &str = "gns.modular-exchange-f";
pub const SHIFT_DELTA_FACTORIZATION_CHECK: &str = "gns.shift-delta-factorization";
pub const SHIFT_S_CLOSED_FORM_CHECK: &str = "gns.shift-s-closed-form";
pub const SHIFT_DELTA_CLOSED_FORM_CHECK: &str = "gns.shift-delta-closed-form";
pub const SHIFT_EXCHANGE_COMPOSITE_CHECK: &str = "gns.shift-exchange-composite";
pub const PROJECTION_STRUCTURE_CHECK: &str = "gns.projection-structure";
pub const PROJECTION_RANGE_FIXED_CHECK: &str = "gns.projection-range-fixed";
pub const LIFTED_MEAN_MATCHES_CHECK: &str = "gns.lifted-mean-matches-algebra-mean";
pub const BLOCK_IDENTITY_CHECK: &str = "gns.compression-block-identity";
pub const OFF_BLOCKS_VANISH_CHECK: &str = "gns.compression-off-blocks-vanish";
pub const LIFTED_MEAN_INVARIANT_CHECK: &str = "gns.lifted-mean-invariant";
pub const COMPRESSED_ABELIANNESS_CHECK: &str = "gns.compressed-abelianness";
pub const CHAIN_NESTED_CHECK: &str = "gns.chain-projections-nested";
pub const CHAIN_MONOTONE_CHECK: &str = "gns.chain-deviation-monotone";
pub const CHAIN_FINAL_CHECK: &str = "gns.chain-final-identity";

#[derive(Debug, Error)]
pub enum GnsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
    #[error("construction invariant '{name}' violated (deviation {deviation:.3e} > {threshold:.3e})")]
    ConstructionInvariant { name: &'static str, deviation: f64, threshold: f64 },
    #[error("spanning set is singular; the state or a cocycle is numerically degenerate")]
    SingularSpanningSet,
    #[error("subgroup chain stage {stage} is not contained in the next stage")]
    ChainNotNested { stage: usize },
}

/// Antilinear operator T(v) = M conj(v). Composition rules used throughout:
/// antilinear after antilinear is linear with matrix M1 conj(M2); antilinear
/// after linear L has matrix M conj(L); linear L after antilinear has matrix
/// L M; the adjoint for ⟨Tv, w⟩ = ⟨T*w, v⟩ has matrix Mᵀ.
#[derive(Clone, Debug)]
pub struct AntilinearOp {
    mat: Operator,
}

impl AntilinearOp {
    pub fn from_matrix(mat: Operator) -> Self {
        Self { mat }
    }

    pub fn matrix(&self) -> &Operator {
        &self.mat
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.mat.mat() * v.conjugate()
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.transpose() }
    }

    /// self ∘ other, a linear map.
    pub fn compose_antilinear(&self, other: &Self) -> Operator {
        self.mat.mul(&other.mat.conjugate())
    }

    /// self ∘ l for linear l.
    pub fn after_linear(&self, l: &Operator) -> Self {
        Self { mat: self.mat.mul(&l.conjugate()) }
    }

    /// l ∘ self for linear l.
    pub fn then_linear(&self, l: &Operator) -> Self {
        Self { mat: l.mul(&self.mat) }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.mat.sub(&other.mat).max_norm()
    }
}

/// Conjugation j L j of a linear map by an antilinear involution: the linear
/// map with matrix M_j conj(L) conj(M_j).
fn sandwich(j: &AntilinearOp, l: &Operator) -> Operator {
    j.matrix().mul(&l.conjugate()).mul(&j.matrix().conjugate())
}

fn invert(m: &CMatrix) -> Option<CMatrix> {
    m.clone().full_piv_lu().try_inverse()
}

/// Solves the antilinear operator T with T(v_k) = w_k on a spanning set,
/// i.e. M conj(V) = W columnwise.
fn antilinear_from_pairs(vcols: CMatrix, wcols: CMatrix) -> Result<AntilinearOp, GnsError> {
    let inv = invert(&vcols.conjugate()).ok_or(GnsError::SingularSpanningSet)?;
    Ok(AntilinearOp::from_matrix(Operator::new(wcols * inv).expect("solve output is finite")))
}

/// Construction-time deviations of the cyclic representation; every field is
/// checked against the tolerance before the system is returned.
#[derive(Clone, Debug)]
pub struct GnsConstructionReport {
    /// |⟨Ω, π(a)Ω⟩ − φ(a)| over matrix units.
    pub state_reproduction: f64,
    /// ‖S π(a)Ω − π(a†)Ω‖ over matrix units.
    pub conjugation_action: f64,
    /// ‖S − JΔ^{1/2}‖.
    pub polar_factorization: f64,
    /// ‖J² − 1‖.
    pub j_involution: f64,
    /// ‖JΩ − Ω‖.
    pub j_fixes_omega: f64,
    /// Antiunitarity of J as unitarity of its matrix.
    pub j_antiunitarity: f64,
    /// ‖FS − Δ‖.
    pub delta_equals_fs: f64,
    /// ‖[Jπ(a)J, π(b)]‖ over matrix-unit pairs.
    pub commutant_commutation: f64,
}

/// The cyclic representation of (M_n, φ) on ℂ^{n²}: coordinates are taken in
/// the orthonormal basis E_ij ρ^{-1/2}, so a vector's coordinates are
/// vec(a ρ^{1/2}) for the algebra element a it represents.
#[derive(Clone, Debug)]
pub struct GnsSystem {
    state: FaithfulState,
    base_dim: usize,
    space_dim: usize,
    root_density: Operator,
    inv_root_density: Operator,
    omega: CVector,
    s: AntilinearOp,
    f: AntilinearOp,
    j: AntilinearOp,
    delta: Operator,
    delta_eigen: HermitianEigen,
    report: GnsConstructionReport,
}

impl GnsSystem {
    pub fn state(&self) -> &FaithfulState {
        &self.state
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn omega(&self) -> &CVector {
        &self.omega
    }

    pub fn s(&self) -> &AntilinearOp {
        &self.s
    }

    pub fn f(&self) -> &AntilinearOp {
        &self.f
    }

    pub fn j(&self) -> &AntilinearOp {
        &self.j
    }

    pub fn delta(&self) -> &Operator {
        &self.delta
    }

    pub fn report(&self) -> &GnsConstructionReport {
        &self.report
    }

    /// Left-multiplication representation π(a).
    pub fn pi(&self, a: &Operator) -> Operator {
        left_mul_superop(a)
    }

    /// Coordinates of the algebra element a, i.e. the vector π(a)Ω.
    pub fn embed(&self, a: &Operator) -> CVector {
        vectorize(&a.mul(&self.root_density))
    }

    /// Algebra element represented by a coordinate vector.
    pub fn unembed(&self, v: &CVector) -> Operator {
        unvectorize(v, self.base_dim).mul(&self.inv_root_density)
    }

    /// Δ^z by spectral calculus.
    pub fn delta_power(&self, z: Complex64) -> Operator {
        self.delta_eigen.map_spectrum(|v| (z * v.ln()).exp())
    }

    /// k-th orthonormal-basis algebra element E_ij ρ^{-1/2}, whose coordinate
    /// vector is the k-th standard basis vector.
    fn basis_element(&self, k: usize) -> Operator {
        let n = self.base_dim;
        Operator::matrix_unit(n, k / n, k % n).mul(&self.inv_root_density)
    }
}

pub fn build_gns(state: &FaithfulState, tol: Tolerance) -> Result<GnsSystem, GnsError> {
    let n = state.dim();
    let d = n * n;
    let root = state.density_power(Complex64::new(0.5, 0.0));
    let inv_root = state.density_power(Complex64::new(-0.5, 0.0));
    let omega = vectorize(&root);
    let embed = |a: &Operator| vectorize(&a.mul(&root));
    let basis_element =
        |k: usize| Operator::matrix_unit(n, k / n, k % n).mul(&inv_root);

    // S on the orthonormal basis: b_k ↦ b_k†.
    let mut scols = CMatrix::zeros(d, d);
    for k in 0..d {
        scols.set_column(k, &embed(&basis_element(k).adjoint()));
    }
    let s = AntilinearOp::from_matrix(Operator::new(scols).expect("finite entries"));

    // Δ = S*S, a positive linear operator.
    let mut delta = s.adjoint().compose_antilinear(&s);
    delta.ensure_hermitian(tol)?;
    let delta_eigen = hermitian_eigen(&delta, tol)?;
    if delta_eigen.values[0] <= 0.0 {
        return Err(GnsError::ConstructionInvariant {
            name: "modular operator positivity",
            deviation: -delta_eigen.values[0],
            threshold: 0.0,
        });
    }
    let inv_sqrt_delta = delta_eigen.map_spectrum(|v| Complex64::new(1.0 / v.sqrt(), 0.0));
    let sqrt_delta = delta_eigen.map_spectrum(|v| Complex64::new(v.sqrt(), 0.0));
    let j = s.after_linear(&inv_sqrt_delta);

    // F from its action on the commutant side: Jπ(b)JΩ ↦ Jπ(b†)JΩ.
    let mut vcols = CMatrix::zeros(d, d);
    let mut wcols = CMatrix::zeros(d, d);
    for k in 0..d {
        let b = basis_element(k);
        vcols.set_column(k, &(sandwich(&j, &left_mul_superop(&b)).mat() * &omega));
        wcols.set_column(k, &(sandwich(&j, &left_mul_superop(&b.adjoint())).mat() * &omega));
    }
    let f = antilinear_from_pairs(vcols, wcols)?;

    let mut state_reproduction = 0.0_f64;
    let mut conjugation_action = 0.0_f64;
    let mut commutant_commutation = 0.0_f64;
    let mut commutant_side = Vec::with_capacity(d);
    for i in 0..n {
        for j_col in 0..n {
            let unit = Operator::matrix_unit(n, i, j_col);
            let pi_unit = left_mul_superop(&unit);
            let reproduced = omega.dotc(&(pi_unit.mat() * &omega));
            state_reproduction =
                state_reproduction.max((reproduced - state.expect(&unit)).norm());
            conjugation_action = conjugation_action
                .max((s.apply(&embed(&unit)) - embed(&unit.adjoint())).norm());
            commutant_side.push(sandwich(&j, &pi_unit));
        }
    }
    for c in &commutant_side {
        for i in 0..n {
            for j_col in 0..n {
                let pi_unit = left_mul_superop(&Operator::matrix_unit(n, i, j_col));
                commutant_commutation =
                    commutant_commutation.max(c.commutator(&pi_unit).max_norm());
            }
        }
    }
    let report = GnsConstructionReport {
        state_reproduction,
        conjugation_action,
        polar_factorization: s.distance(&j.after_linear(&sqrt_delta)),
        j_involution: j.compose_antilinear(&j).sub(&Operator::identity(d)).max_norm(),
        j_fixes_omega: (j.apply(&omega) - &omega).norm(),
        j_antiunitarity: j.matrix().unitary_deviation(),
        delta_equals_fs: f.compose_antilinear(&s).sub(&delta).max_norm(),
        commutant_commutation,
    };
    let threshold = tol.threshold(delta.max_norm().max(1.0));
    for (name, deviation) in [
        ("state reproduction", report.state_reproduction),
        ("conjugation action", report.conjugation_action),
        ("polar factorization", report.polar_factorization),
        ("conjugation involution", report.j_involution),
        ("conjugation fixes the cyclic vector", report.j_fixes_omega),
        ("conjugation antiunitarity", report.j_antiunitarity),
        ("modular operator factorization", report.delta_equals_fs),
        ("commutant commutation", report.commutant_commutation),
    ] {
        if deviation > threshold {
            return Err(GnsError::ConstructionInvariant { name, deviation, threshold });
        }
    }

    Ok(GnsSystem {
        state: state.clone(),
        base_dim: n,
        space_dim: d,
        root_density: root,
        inv_root_density: inv_root,
        omega,
        s,
        f,
        j,
        delta,
        delta_eigen,
        report,
    })
}

/// Construction-time deviations of a shifted system; checked like the base
/// system's report.
#[derive(Clone, Debug)]
pub struct ShiftConstructionReport {
    /// |⟨Ω_g, π(a)Ω_g⟩ − φ(g(a))| over matrix units.
    pub shifted_state_reproduction: f64,
    /// ‖U_g†U_g − 1‖.
    pub u_unitarity: f64,
    /// ‖V_g†V_g − 1‖.
    pub v_unitarity: f64,
    /// ‖[π(√x_g), Δ]‖, the premise for the cone identity.
    pub cone_premise: f64,
    /// ‖Ω_g − Δ^{1/4}π(√x_g)Ω‖, placing Ω_g in the natural cone.
    pub cone_identity: f64,
    /// ‖JΩ_g − Ω_g‖.
    pub j_fixes_shifted_vector: f64,
    /// ‖J_g − J‖ for J_g from the polar decomposition of S_g.
    pub conjugations_coincide: f64,
    /// ‖S_g π(a)Ω_g − π(a†)Ω_g‖ over matrix units.
    pub shifted_conjugation_action: f64,
}

/// Modular data of the pair (π(M_n), Ω_g) for Ω_g = π(√x_g)Ω, together with
/// the unitary U_g: π(a)Ω_g ↦ π(g(a))Ω and its commutant twin V_g = JU_gJ.
#[derive(Clone, Debug)]
pub struct GnsShift {
    g: usize,
    omega_g: CVector,
    u: Operator,
    v: Operator,
    s_g: AntilinearOp,
    f_g: AntilinearOp,
    j_g: AntilinearOp,
    delta_g: Operator,
    delta_g_eigen: HermitianEigen,
    root_cocycle: Operator,
    inv_root_cocycle: Operator,
    report: ShiftConstructionReport,
}

impl GnsShift {
    pub fn element(&self) -> usize {
        self.g
    }

    pub fn omega_g(&self) -> &CVector {
        &self.omega_g
    }

    pub fn u(&self) -> &Operator {
        &self.u
    }

    pub fn v(&self) -> &Operator {
        &self.v
    }

    pub fn s_g(&self) -> &AntilinearOp {
        &self.s_g
    }

    pub fn f_g(&self) -> &AntilinearOp {
        &self.f_g
    }

    pub fn j_g(&self) -> &AntilinearOp {
        &self.j_g
    }

    pub fn delta_g(&self) -> &Operator {
        &self.delta_g
    }

    pub fn delta_g_power(&self, z: Complex64) -> Operator {
        self.delta_g_eigen.map_spectrum(|v| (z * v.ln()).exp())
    }

    /// √x_g.
    pub fn root_cocycle(&self) -> &Operator {
        &self.root_cocycle
    }

    /// √(x_g⁻¹) for the matrix inverse of x_g.
    pub fn inv_root_cocycle(&self) -> &Operator {
        &self.inv_root_cocycle
    }

    pub fn report(&self) -> &ShiftConstructionReport {
        &self.report
    }
}

fn positive_root(
    x: &Operator,
    name: &'static str,
    tol: Tolerance,
) -> Result<(Operator, Operator), GnsError> {
    let mut sym = x.clone();
    sym.ensure_hermitian(tol)?;
    let eigen = hermitian_eigen(&sym, tol)?;
    if eigen.values[0] <= 0.0 {
        return Err(GnsError::ConstructionInvariant {
            name,
            deviation: -eigen.values[0],
            threshold: 0.0,
        });
    }
    Ok((
        eigen.map_spectrum(|v| Complex64::new(v.sqrt(), 0.0)),
        eigen.map_spectrum(|v| Complex64::new(1.0 / v.sqrt(), 0.0)),
    ))
}

pub fn shift_for(
    gns: &GnsSystem,
    action: &GroupAction,
    family: &CocycleFamily,
    g: usize,
    tol: Tolerance,
) -> Result<GnsShift, GnsError> {
    if family.classification == Classification::QuasiInvariantOnly {
        return Err(QuasiError::NotStronglyQuasiInvariant { found: family.classification }.into());
    }
    let n = gns.base_dim;
    let d = gns.space_dim;
    let (root_cocycle, inv_root_cocycle) =
        positive_root(&family.cocycles[g], "cocycle positivity", tol)?;
    let ginv = action.group().inv(g);
    let (root_cocycle_of_inverse, _) =
        positive_root(&family.cocycles[ginv], "inverse-element cocycle positivity", tol)?;

    let omega_g = gns.embed(&root_cocycle);

    // U_g on the basis, via its closed form on vectors of the unshifted
    // system: π(a)Ω ↦ π(g(a) x_{g⁻¹}^{1/2})Ω with x_{g⁻¹} the cocycle of the
    // inverse group element.
    let mut ucols = CMatrix::zeros(d, d);
    for k in 0..d {
        let moved = action.map(g).apply(&gns.basis_element(k)).mul(&root_cocycle_of_inverse);
        ucols.set_column(k, &gns.embed(&moved));
    }
    let u = Operator::new(ucols).expect("finite entries");
    let v = sandwich(&gns.j, &u);

    // S_g from its defining action π(a)Ω_g ↦ π(a†)Ω_g on the basis elements.
    let mut vcols = CMatrix::zeros(d, d);
    let mut wcols = CMatrix::zeros(d, d);
    for k in 0..d {
        let b = gns.basis_element(k);
        vcols.set_column(k, &gns.embed(&b.mul(&root_cocycle)));
        wcols.set_column(k, &gns.embed(&b.adjoint().mul(&root_cocycle)));
    }
    let s_g = antilinear_from_pairs(vcols, wcols)?;

    let mut delta_g = s_g.adjoint().compose_antilinear(&s_g);
    delta_g.ensure_hermitian(tol)?;
    let delta_g_eigen = hermitian_eigen(&delta_g, tol)?;
    if delta_g_eigen.values[0] <= 0.0 {
        return Err(GnsError::ConstructionInvariant {
            name: "shifted modular operator positivity",
            deviation: -delta_g_eigen.values[0],
            threshold: 0.0,
        });
    }
    let j_g = s_g
        .after_linear(&delta_g_eigen.map_spectrum(|v| Complex64::new(1.0 / v.sqrt(), 0.0)));

    // F_g on the commutant side relative to Ω_g.
    let mut vcols = CMatrix::zeros(d, d);
    let mut wcols = CMatrix::zeros(d, d);
    for k in 0..d {
        let b = gns.basis_element(k);
        vcols.set_column(k, &(sandwich(&gns.j, &gns.pi(&b)).mat() * &omega_g));
        wcols.set_column(k, &(sandwich(&gns.j, &gns.pi(&b.adjoint())).mat() * &omega_g));
    }
    let f_g = antilinear_from_pairs(vcols, wcols)?;

    let mut shifted_state_reproduction = 0.0_f64;
    let mut shifted_conjugation_action = 0.0_f64;
    for i in 0..n {
        for j_col in 0..n {
            let unit = Operator::matrix_unit(n, i, j_col);
            let reproduced = omega_g.dotc(&(gns.pi(&unit).mat() * &omega_g));
            let moved = gns.state.expect(&action.map(g).apply(&unit));
            shifted_state_reproduction =
                shifted_state_reproduction.max((reproduced - moved).norm());
            let lhs = s_g.apply(&(gns.pi(&unit).mat() * &omega_g));
            let rhs = gns.pi(&unit.adjoint()).mat() * &omega_g;
            shifted_conjugation_action = shifted_conjugation_action.max((lhs - rhs).norm());
        }
    }
    let pi_root = gns.pi(&root_cocycle);
    let cone_vector = gns.delta_power(Complex64::new(0.25, 0.0)).mul(&pi_root).mat() * &gns.omega;
    let report = ShiftConstructionReport {
        shifted_state_reproduction,
        u_unitarity: u.unitary_deviation(),
        v_unitarity: v.unitary_deviation(),
        cone_premise: pi_root.commutator(&gns.delta).max_norm(),
        cone_identity: (&omega_g - cone_vector).norm(),
        j_fixes_shifted_vector: (gns.j.apply(&omega_g) - &omega_g).norm(),
        conjugations_coincide: j_g.distance(&gns.j),
        shifted_conjugation_action,
    };
    let scale = gns.delta.max_norm().max(root_cocycle.max_norm()).max(1.0);
    let threshold = tol.threshold(scale);
    for (name, deviation) in [
        ("shifted state reproduction", report.shifted_state_reproduction),
        ("shift unitarity", report.u_unitarity),
        ("commutant shift unitarity", report.v_unitarity),
        ("cone premise commutation", report.cone_premise),
        ("cone membership identity", report.cone_identity),
        ("conjugation fixes the shifted vector", report.j_fixes_shifted_vector),
        ("shifted conjugation equals base conjugation", report.conjugations_coincide),
        ("shifted conjugation action", report.shifted_conjugation_action),
    ] {
        if deviation > threshold {
            return Err(GnsError::ConstructionInvariant { name, deviation, threshold });
        }
    }

    Ok(GnsShift {
        g,
        omega_g,
        u,
        v,
        s_g,
        f_g,
        j_g,
        delta_g,
        delta_g_eigen,
        root_cocycle,
        inv_root_cocycle,
        report,
    })
}

/// Shifts for every group element, indexed by element.
pub fn shifts_for_all(
    gns: &GnsSystem,
    action: &GroupAction,
    family: &CocycleFamily,
    tol: Tolerance,
) -> Result<Vec<GnsShift>, GnsError> {
    action.group().elements().map(|g| shift_for(gns, action, family, g, tol)).collect()
}

/// U_g U_h = U_{gh}, U_e = 1, U_g† = U_{g⁻¹} across all shifts.
pub fn check_representation_laws(
    action: &GroupAction,
    shifts: &[GnsShift],
    tol: Tolerance,
) -> Verdict {
    let group = action.group();
    let d = shifts[0].u.dim();
    let mut tracker = MaxTracker::new();
    tracker.observe(
        shifts[group.identity()].u.sub(&Operator::identity(d)).max_norm(),
        || Witness { g: Some(group.identity()), ..Witness::default() },
    );
    for g in group.elements() {
        tracker.observe(
            shifts[g].u.adjoint().sub(&shifts[group.inv(g)].u).max_norm(),
            || Witness {
                g: Some(g),
                location: Some("adjoint versus inverse element".to_string()),
                ..Witness::default()
            },
        );
        for h in group.elements() {
            let product = shifts[g].u.mul(&shifts[h].u);
            tracker.observe(product.sub(&shifts[group.mul(g, h)].u).max_norm(), || Witness {
                g: Some(g),
                location: Some(format!("second element {h}")),
                ..Witness::default()
            });
        }
    }
    let max = tracker.max();
    Verdict::from_deviation(REPRESENTATION_CHECK, max, tol.threshold(1.0), tracker.witnesses())
}

/// U_g π(a) U_g† = π(g(a)) and its commutant twin with V_g, over matrix units.
pub fn check_covariance(
    gns: &GnsSystem,
    action: &GroupAction,
    shifts: &[GnsShift],
    tol: Tolerance,
) -> Verdict {
    let n = gns.base_dim;
    let mut tracker = MaxTracker::new();
    for shift in shifts {
        let g = shift.g;
        for i in 0..n {
            for j in 0..n {
                let unit = Operator::matrix_unit(n, i, j);
                let moved = action.map(g).apply(&unit);
                let pi_unit = gns.pi(&unit);
                let algebra_side =
                    shift.u.mul(&pi_unit).mul(&shift.u.adjoint()).sub(&gns.pi(&moved));
                tracker.observe(algebra_side.max_norm(), || Witness {
                    g: Some(g),
                    location: Some(format!("matrix unit ({i},{j})")),
                    ..Witness::default()
                });
                let commutant_side = shift
                    .v
                    .mul(&sandwich(&gns.j, &pi_unit))
                    .mul(&shift.v.adjoint())
                    .sub(&sandwich(&gns.j, &gns.pi(&moved)));
                tracker.observe(commutant_side.max_norm(), || Witness {
                    g: Some(g),
                    location: Some(format!("commutant side, matrix unit ({i},{j})")),
                    ..Witness::default()
                });
            }
        }
    }
    let max = tracker.max();
    Verdict::from_deviation(COVARIANCE_CHECK, max, tol.threshold(1.0), tracker.witnesses())
}

/// The operator identities relating the base and shifted modular objects.
#[derive(Clone, Debug)]
pub struct ModularRelationVerdicts {
    /// S U_g = U_g S_g.
    pub exchange_s: Verdict,
    /// F V_g = V_g F_g.
    pub exchange_f: Verdict,
    /// Δ_g = (V_g† F V_g)(U_g† S U_g).
    pub delta_factorization: Verdict,
    /// S_g = π(x_g^{-1/2}) J π(x_g^{1/2}) J S.
    pub shift_s_closed_form: Verdict,
    /// Δ_g^{1/2} = π(x_g^{1/2}) J π(x_g^{-1/2}) J Δ^{1/2}.
    pub shift_delta_closed_form: Verdict,
    /// U_g S_g = π(x_g^{1/2}) J π(x_g^{-1/2}) J S_g U_g.
    pub shift_exchange_composite: Verdict,
}

pub fn check_modular_relations(
    gns: &GnsSystem,
    shifts: &[GnsShift],
    tol: Tolerance,
) -> ModularRelationVerdicts {
    let sqrt_delta = gns.delta_power(Complex64::new(0.5, 0.0));
    let mut exchange_s = MaxTracker::new();
    let mut exchange_f = MaxTracker::new();
    let mut factorization = MaxTracker::new();
    let mut s_closed = MaxTracker::new();
    let mut delta_closed = MaxTracker::new();
    let mut composite = MaxTracker::new();
    for shift in shifts {
        let g = shift.g;
        let witness = |location: &str| {
            let location = location.to_string();
            move || Witness { g: Some(g), location: Some(location), ..Witness::default() }
        };

        let su = gns.s.after_linear(&shift.u);
        let us = shift.s_g.then_linear(&shift.u);
        exchange_s.observe(su.distance(&us), witness("algebra side"));

        let fv = gns.f.after_linear(&shift.v);
        let vf = shift.f_g.then_linear(&shift.v);
        exchange_f.observe(fv.distance(&vf), witness("commutant side"));

        let vfv = gns.f.after_linear(&shift.v).then_linear(&shift.v.adjoint());
        let usu = gns.s.after_linear(&shift.u).then_linear(&shift.u.adjoint());
        factorization.observe(
            vfv.compose_antilinear(&usu).sub(&shift.delta_g).max_norm(),
            witness("two-sided factorization"),
        );

        // π(√x_g) and π(√(x_g⁻¹)) with their commutant mirrors JπJ.
        let pi_root = gns.pi(&shift.root_cocycle);
        let pi_inv_root = gns.pi(&shift.inv_root_cocycle);
        let mirror_root = sandwich(&gns.j, &pi_root);
        let mirror_inv_root = sandwich(&gns.j, &pi_inv_root);

        let s_rhs = gns.s.then_linear(&pi_inv_root.mul(&mirror_root));
        s_closed.observe(shift.s_g.distance(&s_rhs), witness("shifted conjugation closed form"));

        let sqrt_delta_g = shift.delta_g_power(Complex64::new(0.5, 0.0));
        let delta_rhs = pi_root.mul(&mirror_inv_root).mul(&sqrt_delta);
        delta_closed.observe(
            sqrt_delta_g.sub(&delta_rhs).max_norm(),
            witness("shifted modular operator closed form"),
        );

        let lhs = shift.s_g.then_linear(&shift.u);
        let rhs = shift
            .s_g
            .after_linear(&shift.u)
            .then_linear(&pi_root.mul(&mirror_inv_root));
        composite.observe(lhs.distance(&rhs), witness("composite exchange"));
    }
    let threshold = tol.threshold(gns.delta.max_norm().max(1.0));
    let finish = |id: &str, tracker: MaxTracker| {
        let max = tracker.max();
        Verdict::from_deviation(id, max, threshold, tracker.witnesses())
    };
    ModularRelationVerdicts {
        exchange_s: finish(MODULAR_EXCHANGE_S_CHECK, exchange_s),
        exchange_f: finish(MODULAR_EXCHANGE_F_CHECK, exchange_f),
        delta_factorization: finish(SHIFT_DELTA_FACTORIZATION_CHECK, factorization),
        shift_s_closed_form: finish(SHIFT_S_CLOSED_FORM_CHECK, s_closed),
        shift_delta_closed_form: finish(SHIFT_DELTA_CLOSED_FORM_CHECK, delta_closed),
        shift_exchange_composite: finish(SHIFT_EXCHANGE_COMPOSITE_CHECK, composite),
    }
}

/// The group average of the shift unitaries with its structure verdicts.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    pub projection: Operator,
    pub rank: usize,
    pub idempotency_deviation: f64,
    pub self_adjointness_deviation: f64,
    pub absorption_deviation: f64,
    pub range_fixed_deviation: f64,
    pub structure: Verdict,
    pub range_fixed: Verdict,
}

/// P = (1/|G|) Σ_g U_g, the orthogonal projection onto the jointly fixed
/// vectors of the shift unitaries.
pub fn invariant_projection(shifts: &[GnsShift], tol: Tolerance) -> ProjectionReport {
    let d = shifts[0].u.dim();
    let mut p = Operator::zeros(d);
    for shift in shifts {
        p = p.add(&shift.u);
    }
    let p = p.scale(Complex64::new(1.0 / shifts.len() as f64, 0.0));

    let idempotency_deviation = p.mul(&p).sub(&p).max_norm();
    let self_adjointness_deviation = p.hermitian_deviation();
    let mut absorption = MaxTracker::new();
    for shift in shifts {
        let deviation = p
            .mul(&shift.u)
            .sub(&p)
            .max_norm()
            .max(shift.u.mul(&p).sub(&p).max_norm());
        absorption.observe(deviation, || Witness { g: Some(shift.g), ..Witness::default() });
    }

    // Range basis from the kernel of 1 − P; every range vector must be fixed
    // by each shift unitary.
    let gap = Operator::identity(d).sub(&p);
    let range = null_space(gap.mat(), tol);
    let mut range_fixed = MaxTracker::new();
    for (k, psi) in range.iter().enumerate() {
        for shift in shifts {
            range_fixed.observe((shift.u.mat() * psi - psi).norm(), || Witness {
                g: Some(shift.g),
                location: Some(format!("range vector {k}")),
                ..Witness::default()
            });
        }
    }

    let threshold = tol.threshold(1.0);
    let absorption_deviation = absorption.max();
    let range_fixed_deviation = range_fixed.max();
    let structure_deviation = idempotency_deviation
        .max(self_adjointness_deviation)
        .max(absorption_deviation);
    ProjectionReport {
        projection: p,
        rank: range.len(),
        idempotency_deviation,
        self_adjointness_deviation,
        absorption_deviation,
        range_fixed_deviation,
        structure: Verdict::from_deviation(
            PROJECTION_STRUCTURE_CHECK,
            structure_deviation,
            threshold,
            absorption.witnesses(),
        ),
        range_fixed: Verdict::from_deviation(
            PROJECTION_RANGE_FIXED_CHECK,
            range_fixed_deviation,
            threshold,
            range_fixed.witnesses(),
        ),
    }
}

/// (1/|G|) Σ_g U_g x U_g†, the group mean lifted to operators on the
/// representation space.
pub fn lifted_mean(shifts: &[GnsShift], x: &Operator) -> Operator {
    let mut acc = Operator::zeros(x.dim());
    for shift in shifts {
        acc = acc.add(&shift.u.mul(x).mul(&shift.u.adjoint()));
    }
    acc.scale(Complex64::new(1.0 / shifts.len() as f64, 0.0))
}

/// Verdicts for the compression identities of the lifted mean.
#[derive(Clone, Debug)]
pub struct LiftedExpectationChecks {
    /// Lifted mean of π(a) equals π(mean of a).
    pub mean_matches_algebra_mean: Verdict,
    /// Pπ(a)P = Ẽ(π(a))P = PẼ(π(a)) = PẼ(π(a))P.
    pub block_identity: Verdict,
    /// P⊥Ẽ(π(a))P = PẼ(π(a))P⊥ = 0.
    pub off_blocks_vanish: Verdict,
    /// U_g Ẽ(π(a)) U_g† = Ẽ(π(a)).
    pub mean_invariant: Verdict,
}

pub fn check_lifted_expectation(
    gns: &GnsSystem,
    action: &GroupAction,
    shifts: &[GnsShift],
    projection: &Operator,
    tol: Tolerance,
) -> LiftedExpectationChecks {
    let n = gns.base_dim;
    let d = gns.space_dim;
    let complement = Operator::identity(d).sub(projection);
    let mut matches = MaxTracker::new();
    let mut blocks = MaxTracker::new();
    let mut off_blocks = MaxTracker::new();
    let mut invariant = MaxTracker::new();
    for i in 0..n {
        for j in 0..n {
            let unit = Operator::matrix_unit(n, i, j);
            let pi_unit = gns.pi(&unit);
            let lifted = lifted_mean(shifts, &pi_unit);
            let witness = |location: &str| {
                let location = format!("{location}, matrix unit ({i},{j})");
                move || Witness { location: Some(location), ..Witness::default() }
            };

            matches.observe(
                lifted.sub(&gns.pi(&action.mean_over_group(&unit))).max_norm(),
                witness("lifted mean"),
            );

            let compressed = projection.mul(&pi_unit).mul(projection);
            let left = lifted.mul(projection);
            let right = projection.mul(&lifted);
            let both = projection.mul(&lifted).mul(projection);
            let chain = compressed
                .sub(&left)
                .max_norm()
                .max(left.sub(&right).max_norm())
                .max(right.sub(&both).max_norm());
            blocks.observe(chain, witness("block chain"));

            let off = complement
                .mul(&lifted)
                .mul(projection)
                .max_norm()
                .max(projection.mul(&lifted).mul(&complement).max_norm());
            off_blocks.observe(off, witness("off-diagonal block"));

            for shift in shifts {
                let moved = shift.u.mul(&lifted).mul(&shift.u.adjoint());
                invariant.observe(moved.sub(&lifted).max_norm(), || Witness {
                    g: Some(shift.g),
                    location: Some(format!("matrix unit ({i},{j})")),
                    ..Witness::default()
                });
            }
        }
    }
    let threshold = tol.threshold(1.0);
    let finish = |id: &str, tracker: MaxTracker| {
        let max = tracker.max();
        Verdict::from_deviation(id, max, threshold, tracker.witnesses())
    };
    LiftedExpectationChecks {
        mean_matches_algebra_mean: finish(LIFTED_MEAN_MATCHES_CHECK, matches),
        block_identity: finish(BLOCK_IDENTITY_CHECK, blocks),
        off_blocks_vanish: finish(OFF_BLOCKS_VANISH_CHECK, off_blocks),
        mean_invariant: finish(LIFTED_MEAN_INVARIANT_CHECK, invariant),
    }
}

/// Both sides of the compression-abelianness equivalence, evaluated
/// independently: compressing the algebra generated by π(M_n) and the shift
/// unitaries versus compressing the lifted mean's range.
#[derive(Clone, Debug)]
pub struct CompressedAbelianness {
    pub generated_compression_abelian: bool,
    pub mean_range_compression_abelian: bool,
    pub agree: bool,
    pub generated_commutator: f64,
    pub mean_range_commutator: f64,
    pub verdict: Verdict,
}

pub fn check_compressed_abelianness(
    gns: &GnsSystem,
    shifts: &[GnsShift],
    projection: &Operator,
    tol: Tolerance,
) -> Result<CompressedAbelianness, GnsError> {
    let n = gns.base_dim;
    let d = gns.space_dim;
    let mut seeds: Vec<Operator> = Vec::new();
    let mut mean_seeds: Vec<Operator> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let pi_unit = gns.pi(&Operator::matrix_unit(n, i, j));
            mean_seeds.push(lifted_mean(shifts, &pi_unit));
            seeds.push(pi_unit);
        }
    }
    for shift in shifts {
        seeds.push(shift.u.clone());
    }
    let generated = generate_algebra(&seeds, tol)?;
    let mean_range = generate_algebra(&mean_seeds, tol)?;

    let compress = |basis: &[Operator]| {
        let compressed: Vec<Operator> =
            basis.iter().map(|b| projection.mul(b).mul(projection)).collect();
        orthonormalize(d, &compressed, tol)
    };
    let lhs = is_abelian(&compress(generated.basis()), tol);
    let rhs = is_abelian(&compress(mean_range.basis()), tol);
    let agree = lhs.abelian == rhs.abelian;
    Ok(CompressedAbelianness {
        generated_compression_abelian: lhs.abelian,
        mean_range_compression_abelian: rhs.abelian,
        agree,
        generated_commutator: lhs.max_commutator,
        mean_range_commutator: rhs.max_commutator,
        verdict: Verdict::agreement(
            COMPRESSED_ABELIANNESS_CHECK,
            agree,
            lhs.max_commutator.min(rhs.max_commutator),
            lhs.threshold.max(rhs.threshold),
            vec![],
        ),
    })
}

/// Convergence data for an increasing chain of subgroups: the per-stage
/// deviation of the stage mean from the full compression, which must shrink
/// to zero as the chain exhausts the group.
#[derive(Clone, Debug)]
pub struct ChainReport {
    pub stage_sizes: Vec<usize>,
    /// max over matrix units of ‖Ẽ_N(π(a))P − Pπ(a)P‖ in the Frobenius norm,
    /// which projections contract, making the sequence non-increasing.
    pub stage_deviations: Vec<f64>,
    /// ‖P_last − P‖ for the full-group projection P.
    pub final_projection_gap: f64,
    pub nested: Verdict,
    pub monotone: Verdict,
    pub final_identity: Verdict,
}

pub fn subgroup_chain_limit(
    gns: &GnsSystem,
    action: &GroupAction,
    shifts: &[GnsShift],
    chain: &[Vec<usize>],
    tol: Tolerance,
) -> Result<ChainReport, GnsError> {
    let group = action.group();
    for stage in chain {
        group.check_subgroup(stage)?;
    }
    for (k, window) in chain.windows(2).enumerate() {
        if !window[0].iter().all(|g| window[1].contains(g)) {
            return Err(GnsError::ChainNotNested { stage: k });
        }
    }

    let n = gns.base_dim;
    let d = gns.space_dim;
    let stage_projection = |stage: &[usize]| {
        let mut p = Operator::zeros(d);
        for &g in stage {
            p = p.add(&shifts[g].u);
        }
        p.scale(Complex64::new(1.0 / stage.len() as f64, 0.0))
    };
    let full = invariant_projection(shifts, tol).projection;

    let mut nesting = MaxTracker::new();
    let mut stage_deviations = Vec::with_capacity(chain.len());
    let mut previous: Option<Operator> = None;
    for (k, stage) in chain.iter().enumerate() {
        let p_stage = stage_projection(stage);
        if let Some(prev) = &previous {
            nesting.observe(p_stage.mul(prev).sub(&p_stage).max_norm(), || Witness {
                location: Some(format!("stage {k}")),
                ..Witness::default()
            });
        }
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let pi_unit = gns.pi(&Operator::matrix_unit(n, i, j));
                let mut mean = Operator::zeros(d);
                for &g in stage {
                    mean = mean.add(&shifts[g].u.mul(&pi_unit).mul(&shifts[g].u.adjoint()));
                }
                let mean = mean.scale(Complex64::new(1.0 / stage.len() as f64, 0.0));
                let deviation =
                    mean.mul(&full).sub(&full.mul(&pi_unit).mul(&full)).hs_norm();
                worst = worst.max(deviation);
            }
        }
        stage_deviations.push(worst);
        previous = Some(p_stage);
    }
    let final_projection_gap =
        previous.expect("chain is non-empty").sub(&full).max_norm();

    let mut monotone_excess = 0.0_f64;
    let mut monotone_witness = MaxTracker::new();
    for (k, pair) in stage_deviations.windows(2).enumerate() {
        let increase = (pair[1] - pair[0]).max(0.0);
        monotone_excess = monotone_excess.max(increase);
        monotone_witness.observe(increase, || Witness {
            location: Some(format!("stage {} to {}", k, k + 1)),
            ..Witness::default()
        });
    }

    let threshold = tol.threshold(1.0);
    let nesting_max = nesting.max();
    let final_deviation =
        stage_deviations.last().copied().unwrap_or(0.0).max(final_projection_gap);
    Ok(ChainReport {
        stage_sizes: chain.iter().map(Vec::len).collect(),
        stage_deviations,
        final_projection_gap,
        nested: Verdict::from_deviation(
            CHAIN_NESTED_CHECK,
            nesting_max,
            threshold,
            nesting.witnesses(),
        ),
        monotone: Verdict::from_deviation(
            CHAIN_MONOTONE_CHECK,
            monotone_excess,
            tol.abs,
            monotone_witness.witnesses(),
        ),
        final_identity: Verdict::from_deviation(CHAIN_FINAL_CHECK, final_deviation, threshold, vec![]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ModularFlow;
    use crate::group::FiniteGroup;
    use crate::quasi::classify_invariance;
    use crate::random::{random_density, random_root_unitary, DENSITY_EIGENVALUE_FLOOR};
    use crate::verdict::CheckStatus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn rotation(theta: f64) -> Operator {
        Operator::from_real_rows(2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
            .unwrap()
    }

    fn rotation_action(order: usize) -> GroupAction {
        let group = FiniteGroup::cyclic(order);
        let step = -2.0 * std::f64::consts::PI / order as f64;
        let maps = (0..order).map(|k| rotation(step * k as f64)).collect();
        GroupAction::new(group, maps, tol()).unwrap()
    }

    fn two_thirds_state() -> FaithfulState {
        FaithfulState::new(Operator::diagonal(&[2.0 / 3.0, 1.0 / 3.0]), tol()).unwrap()
    }

    fn rotation_setup() -> (GnsSystem, GroupAction, Vec<GnsShift>) {
        let state = two_thirds_state();
        let action = rotation_action(4);
        let family = classify_invariance(&state, &action, tol()).unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let shifts = shifts_for_all(&gns, &action, &family, tol()).unwrap();
        (gns, action, shifts)
    }

    #[test]
    fn tracial_state_has_identity_modular_operator() {
        let state = FaithfulState::new(Operator::diagonal(&[0.5, 0.5]), tol()).unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        assert!(gns.delta().sub(&Operator::identity(4)).max_norm() < 1e-12);
    }

    #[test]
    fn modular_spectrum_is_eigenvalue_ratios() {
        let gns = build_gns(&two_thirds_state(), tol()).unwrap();
        let eigen = hermitian_eigen(gns.delta(), tol()).unwrap();
        let expected = [0.5, 1.0, 1.0, 2.0];
        for (got, want) in eigen.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn modular_objects_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let state = FaithfulState::new(
            random_density(&mut rng, 3, DENSITY_EIGENVALUE_FLOOR),
            tol(),
        )
        .unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let rho = state.density();
        let root = state.density_power(Complex64::new(0.5, 0.0));
        let inv_root = state.density_power(Complex64::new(-0.5, 0.0));
        let inv = state.density_power(Complex64::new(-1.0, 0.0));
        let a = crate::random::unit_disc_matrix(&mut rng, 3);
        // Δ(aΩ) = (ρ a ρ⁻¹)Ω and J(aΩ) = (ρ^{1/2} a† ρ^{-1/2})Ω.
        let delta_applied = gns.delta().mat() * gns.embed(&a);
        let expected = gns.embed(&rho.mul(&a).mul(&inv));
        assert!((delta_applied - expected).norm() < 1e-10);
        let j_applied = gns.j().apply(&gns.embed(&a));
        let expected = gns.embed(&root.mul(&a.adjoint()).mul(&inv_root));
        assert!((j_applied - expected).norm() < 1e-10);
        // F is the adjoint of S.
        assert!(gns.f().distance(&gns.s().adjoint()) < 1e-10);
    }

    #[test]
    fn modular_flow_is_implemented_by_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let state = FaithfulState::new(
            random_density(&mut rng, 3, DENSITY_EIGENVALUE_FLOOR),
            tol(),
        )
        .unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let flow = ModularFlow::new(state);
        for &t in flow.sample_times() {
            let conj = gns.delta_power(Complex64::new(0.0, t));
            for i in 0..3 {
                for j in 0..3 {
                    let unit = Operator::matrix_unit(3, i, j);
                    let lhs = conj.mul(&gns.pi(&unit)).mul(&conj.adjoint());
                    let rhs = gns.pi(&flow.apply(&unit, t));
                    assert!(lhs.sub(&rhs).max_norm() < 1e-10, "t={t}, unit=({i},{j})");
                }
            }
        }
    }

    #[test]
    fn identity_shift_is_trivial() {
        let (gns, _, shifts) = rotation_setup();
        let e = &shifts[0];
        assert!((e.omega_g() - gns.omega()).norm() < 1e-12);
        assert!(e.u().sub(&Operator::identity(4)).max_norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_shift_matches_closed_forms() {
        let (gns, action, shifts) = rotation_setup();
        let shift = &shifts[1];
        // x_g = diag(1/2, 2), so Ω_g = π(diag(1/√2, √2))Ω.
        let root = Operator::diagonal(&[1.0 / 2.0_f64.sqrt(), 2.0_f64.sqrt()]);
        assert!((shift.omega_g() - gns.embed(&root)).norm() < 1e-12);
        // ⟨Ω_g, π(E00)Ω_g⟩ reproduces the transported state at E00, which the
        // quarter turn sends to the smaller eigenvalue 1/3.
        let unit = Operator::matrix_unit(2, 0, 0);
        let reproduced = shift.omega_g().dotc(&(gns.pi(&unit).mat() * shift.omega_g()));
        let expected = gns.state().expect(&action.map(1).apply(&unit));
        assert!((reproduced - expected).norm() < 1e-12);
        assert!((reproduced.re - 1.0 / 3.0).abs() < 1e-12);
        assert!(reproduced.im.abs() < 1e-14);
    }

    #[test]
    fn shift_construction_reports_are_small() {
        let (_, _, shifts) = rotation_setup();
        for shift in &shifts {
            let report = shift.report();
            assert!(report.cone_premise < 1e-12);
            assert!(report.cone_identity < 1e-12);
            assert!(report.conjugations_coincide < 1e-10);
            assert!(report.j_fixes_shifted_vector < 1e-12);
        }
    }

    #[test]
    fn shifts_require_hermitian_cocycles() {
        let state = FaithfulState::new(
            Operator::diagonal(&[0.55, 0.25, 0.2]),
            tol(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_root_unitary(&mut rng, 3, 3);
        let group = FiniteGroup::cyclic(3);
        let action = GroupAction::new(
            group,
            vec![Operator::identity(3), u.clone(), u.mul(&u)],
            tol(),
        )
        .unwrap();
        let family = classify_invariance(&state, &action, tol()).unwrap();
        assert_eq!(family.classification, Classification::QuasiInvariantOnly);
        let gns = build_gns(&state, tol()).unwrap();
        assert!(matches!(
            shift_for(&gns, &action, &family, 1, tol()),
            Err(GnsError::Quasi(QuasiError::NotStronglyQuasiInvariant { .. }))
        ));
    }

    #[test]
    fn representation_and_covariance_hold() {
        let (gns, action, shifts) = rotation_setup();
        let laws = check_representation_laws(&action, &shifts, tol());
        assert_eq!(laws.status, CheckStatus::Holds);
        let covariance = check_covariance(&gns, &action, &shifts, tol());
        assert_eq!(covariance.status, CheckStatus::Holds);
    }

    #[test]
    fn modular_relations_hold_for_rotation_example() {
        let (gns, _, shifts) = rotation_setup();
        let verdicts = check_modular_relations(&gns, &shifts, tol());
        for v in [
            &verdicts.exchange_s,
            &verdicts.exchange_f,
            &verdicts.delta_factorization,
            &verdicts.shift_s_closed_form,
            &verdicts.shift_delta_closed_form,
            &verdicts.shift_exchange_composite,
        ] {
            assert_eq!(v.status, CheckStatus::Holds, "{}: {}", v.check_id, v.max_deviation);
        }
    }

    #[test]
    fn modular_relations_hold_for_cyclic_shift_in_dimension_three() {
        // Diagonal state with a cyclic-permutation action: cocycles are
        // Hermitian, so every shifted object exists.
        let state =
            FaithfulState::new(Operator::diagonal(&[0.5, 0.3, 0.2]), tol()).unwrap();
        let mut shift_mat = CMatrix::zeros(3, 3);
        shift_mat[(0, 1)] = Complex64::new(1.0, 0.0);
        shift_mat[(1, 2)] = Complex64::new(1.0, 0.0);
        shift_mat[(2, 0)] = Complex64::new(1.0, 0.0);
        let u = Operator::new(shift_mat).unwrap();
        let group = FiniteGroup::cyclic(3);
        let action =
            GroupAction::new(group, vec![Operator::identity(3), u.clone(), u.mul(&u)], tol())
                .unwrap();
        let family = classify_invariance(&state, &action, tol()).unwrap();
        assert_eq!(family.classification, Classification::StronglyQuasiInvariant);
        let gns = build_gns(&state, tol()).unwrap();
        let shifts = shifts_for_all(&gns, &action, &family, tol()).unwrap();
        let covariance = check_covariance(&gns, &action, &shifts, tol());
        assert_eq!(covariance.status, CheckStatus::Holds);
        let verdicts = check_modular_relations(&gns, &shifts, tol());
        for v in [
            &verdicts.exchange_s,
            &verdicts.exchange_f,
            &verdicts.delta_factorization,
            &verdicts.shift_s_closed_form,
            &verdicts.shift_delta_closed_form,
            &verdicts.shift_exchange_composite,
        ] {
            assert_eq!(v.status, CheckStatus::Holds, "{}: {}", v.check_id, v.max_deviation);
        }
    }

    #[test]
    fn trivial_group_projection_is_identity() {
        let state = two_thirds_state();
        let action = GroupAction::new(
            FiniteGroup::cyclic(1),
            vec![Operator::identity(2)],
            tol(),
        )
        .unwrap();
        let family = classify_invariance(&state, &action, tol()).unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let shifts = shifts_for_all(&gns, &action, &family, tol()).unwrap();
        let report = invariant_projection(&shifts, tol());
        assert!(report.projection.sub(&Operator::identity(4)).max_norm() < 1e-12);
        assert_eq!(report.rank, 4);
    }

    #[test]
    fn projection_structure_and_rank_oracle() {
        let (_, _, shifts) = rotation_setup();
        let report = invariant_projection(&shifts, tol());
        assert_eq!(report.structure.status, CheckStatus::Holds);
        assert_eq!(report.range_fixed.status, CheckStatus::Holds);
        // Independent rank oracle: the joint fixed space is the kernel of
        // Σ (U_g − 1)†(U_g − 1).
        let d = shifts[0].u().dim();
        let mut accumulator = Operator::zeros(d);
        for shift in &shifts {
            let gap = shift.u().sub(&Operator::identity(d));
            accumulator = accumulator.add(&gap.adjoint().mul(&gap));
        }
        let kernel = null_space(accumulator.mat(), tol());
        assert_eq!(report.rank, kernel.len());
        assert!(report.rank >= 1, "the cyclic vector's mean is always fixed");
    }

    #[test]
    fn lifted_expectation_blocks_hold() {
        let (gns, action, shifts) = rotation_setup();
        let projection = invariant_projection(&shifts, tol()).projection;
        let checks = check_lifted_expectation(&gns, &action, &shifts, &projection, tol());
        assert_eq!(checks.mean_matches_algebra_mean.status, CheckStatus::Holds);
        assert_eq!(checks.block_identity.status, CheckStatus::Holds);
        assert_eq!(checks.off_blocks_vanish.status, CheckStatus::Holds);
        assert_eq!(checks.mean_invariant.status, CheckStatus::Holds);
    }

    #[test]
    fn trivial_group_compression_is_full_matrix_algebra() {
        let state = two_thirds_state();
        let action = GroupAction::new(
            FiniteGroup::cyclic(1),
            vec![Operator::identity(2)],
            tol(),
        )
        .unwrap();
        let family = classify_invariance(&state, &action, tol()).unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let shifts = shifts_for_all(&gns, &action, &family, tol()).unwrap();
        let projection = invariant_projection(&shifts, tol()).projection;
        let report =
            check_compressed_abelianness(&gns, &shifts, &projection, tol()).unwrap();
        assert!(!report.generated_compression_abelian);
        assert!(!report.mean_range_compression_abelian);
        assert!(report.agree);
        assert_eq!(report.verdict.status, CheckStatus::Holds);
    }

    #[test]
    fn rotation_compression_sides_agree() {
        let (gns, _, shifts) = rotation_setup();
        let projection = invariant_projection(&shifts, tol()).projection;
        let report =
            check_compressed_abelianness(&gns, &shifts, &projection, tol()).unwrap();
        assert!(report.agree, "{report:?}");
        assert_eq!(report.verdict.status, CheckStatus::Holds);
    }

    #[test]
    fn subgroup_chain_converges() {
        let (gns, action, shifts) = rotation_setup();
        let chain = vec![vec![0], vec![0, 2], vec![0, 1, 2, 3]];
        let report = subgroup_chain_limit(&gns, &action, &shifts, &chain, tol()).unwrap();
        assert_eq!(report.nested.status, CheckStatus::Holds);
        assert_eq!(report.monotone.status, CheckStatus::Holds);
        assert_eq!(report.final_identity.status, CheckStatus::Holds);
        assert!(report.stage_deviations[0] > 1e-3, "trivial stage must deviate");
        assert!(report.stage_deviations[2] < 1e-10);
        assert!(report.final_projection_gap < 1e-12);
    }

    #[test]
    fn eighth_rotation_chain_deviations_shrink() {
        // A state commuting with every rotation, so all eight shifts exist;
        // eigenvalues 0.7 and 0.3 keep the modular objects nontrivial.
        let density = Operator::from_rows(
            2,
            &[
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, -0.2),
                Complex64::new(0.0, 0.2),
                Complex64::new(0.5, 0.0),
            ],
        )
        .unwrap();
        let state = FaithfulState::new(density, tol()).unwrap();
        let action = rotation_action(8);
        let family = classify_invariance(&state, &action, tol()).unwrap();
        let gns = build_gns(&state, tol()).unwrap();
        let shifts = shifts_for_all(&gns, &action, &family, tol()).unwrap();
        let chain = action.group().cyclic_subgroup_chain().unwrap();
        let report = subgroup_chain_limit(&gns, &action, &shifts, &chain, tol()).unwrap();
        assert_eq!(report.monotone.status, CheckStatus::Holds);
        assert_eq!(report.final_identity.status, CheckStatus::Holds);
        for pair in report.stage_deviations.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn single_stage_chain_reduces_to_block_identity() {
        let (gns, action, shifts) = rotation_setup();
        let chain = vec![vec![0, 1, 2, 3]];
        let report = subgroup_chain_limit(&gns, &action, &shifts, &chain, tol()).unwrap();
        assert_eq!(report.final_identity.status, CheckStatus::Holds);
        assert!(report.stage_deviations[0] < 1e-10);
    }

    #[test]
    fn chain_errors_are_detected() {
        let (gns, action, shifts) = rotation_setup();
        let not_nested = vec![vec![0, 2], vec![0]];
        assert!(matches!(
            subgroup_chain_limit(&gns, &action, &shifts, &not_nested, tol()),
            Err(GnsError::ChainNotNested { stage: 0 })
        ));
        let not_subgroup = vec![vec![0, 1]];
        assert!(matches!(
            subgroup_chain_limit(&gns, &action, &shifts, &not_subgroup, tol()),
            Err(GnsError::Group(_))
        ));
    }
}
