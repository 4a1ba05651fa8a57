//! Concrete *-algebras inside M_n: generated subalgebras, commutants,
//! fixed-point algebras, and span bookkeeping.

use crate::linalg::{null_space, CMatrix, CVector, LinalgError, Operator, Tolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("empty generating set")]
    EmptyGeneratingSet,
    #[error("ambient dimension mismatch ({left} vs {right})")]
    AmbientMismatch { left: usize, right: usize },
    #[error("algebra generation did not stabilize within {0} rounds")]
    GenerationDiverged(usize),
    #[error("commutant verification failed (deviation {deviation:.3e} > {threshold:.3e})")]
    CommutantVerification { deviation: f64, threshold: f64 },
}

/// Hilbert-Schmidt-orthonormal basis of a subspace of M_n (usually a
/// *-subalgebra; nothing here enforces multiplicative closure).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraBasis {
    ambient_dim: usize,
    basis: Vec<Operator>,
}

impl AlgebraBasis {
    pub fn from_orthonormal(ambient_dim: usize, basis: Vec<Operator>) -> Self {
        Self { ambient_dim, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Operator] {
        &self.basis
    }

    /// Orthogonal projection of `x` onto the span.
    pub fn project(&self, x: &Operator) -> Operator {
        let mut acc = Operator::zeros(self.ambient_dim);
        for b in &self.basis {
            acc = acc.add(&b.scale(b.hs_inner(x)));
        }
        acc
    }

    /// Hilbert-Schmidt distance from `x` to the span.
    pub fn span_residual(&self, x: &Operator) -> f64 {
        x.sub(&self.project(x)).hs_norm()
    }

    /// Whether `x` lies in the span within `tol.abs + tol.rel * |x|_HS`.
    pub fn contains(&self, x: &Operator, tol: Tolerance) -> bool {
        self.span_residual(x) <= tol.threshold(x.hs_norm())
    }

    /// Whether every element of `other`'s basis lies in this span.
    pub fn contains_all(&self, other: &AlgebraBasis, tol: Tolerance) -> bool {
        other.basis.iter().all(|b| self.contains(b, tol))
    }

    /// Largest span residual over `other`'s basis.
    pub fn containment_residual(&self, other: &AlgebraBasis) -> f64 {
        other.basis.iter().map(|b| self.span_residual(b)).fold(0.0, f64::max)
    }
}

/// Residual threshold for accepting a new direction into a span.
fn rank_threshold(ambient_dim: usize, tol: Tolerance) -> f64 {
    tol.abs * (ambient_dim as f64).sqrt()
}

/// Two-pass modified Gram-Schmidt step: projects `x` against `basis` and
/// returns the normalized residual if it exceeds the threshold.
fn orthonormal_residual(basis: &[Operator], x: &Operator, threshold: f64) -> Option<Operator> {
    let mut r = x.clone();
    for _ in 0..2 {
        for b in basis {
            let coeff = b.hs_inner(&r);
            r = r.sub(&b.scale(coeff));
        }
    }
    let norm = r.hs_norm();
    if norm > threshold {
        Some(r.scale(Complex64::new(1.0 / norm, 0.0)))
    } else {
        None
    }
}

/// Orthonormalizes a list of matrices with the shared rank threshold.
pub fn orthonormalize(ambient_dim: usize, items: &[Operator], tol: Tolerance) -> Vec<Operator> {
    let threshold = rank_threshold(ambient_dim, tol);
    let mut basis: Vec<Operator> = Vec::new();
    for x in items {
        if let Some(b) = orthonormal_residual(&basis, x, threshold) {
            basis.push(b);
        }
    }
    basis
}

/// Unital *-algebra generated by `seeds`: starts from the identity, the seeds,
/// and their adjoints, then closes the span under products with the
/// generators until it stabilizes.
pub fn generate_algebra(seeds: &[Operator], tol: Tolerance) -> Result<AlgebraBasis, AlgebraError> {
    let first = seeds.first().ok_or(AlgebraError::EmptyGeneratingSet)?;
    let n = first.dim();
    for s in seeds {
        if s.dim() != n {
            return Err(AlgebraError::AmbientMismatch { left: n, right: s.dim() });
        }
    }
    let threshold = rank_threshold(n, tol);
    let mut generators: Vec<Operator> = Vec::new();
    for s in seeds {
        generators.push(s.clone());
        generators.push(s.adjoint());
    }

    let mut basis: Vec<Operator> = Vec::new();
    let mut fresh: Vec<Operator> = Vec::new();
    let mut seedlist = vec![Operator::identity(n)];
    seedlist.extend(generators.iter().cloned());
    for x in &seedlist {
        if let Some(b) = orthonormal_residual(&basis, x, threshold) {
            basis.push(b.clone());
            fresh.push(b);
        }
    }

    let max_rounds = 2 * n * n + 4;
    for _ in 0..max_rounds {
        if fresh.is_empty() || basis.len() == n * n {
            // The span of words in the generators is automatically closed
            // under products once a full round adds nothing new.
            return Ok(AlgebraBasis { ambient_dim: n, basis });
        }
        let mut next_fresh = Vec::new();
        for b in &fresh {
            for g in &generators {
                for cand in [b.mul(g), g.mul(b)] {
                    if let Some(nb) = orthonormal_residual(&basis, &cand, threshold) {
                        basis.push(nb.clone());
                        next_fresh.push(nb);
                    }
                }
            }
        }
        fresh = next_fresh;
    }
    if fresh.is_empty() || basis.len() == n * n {
        return Ok(AlgebraBasis { ambient_dim: n, basis });
    }
    Err(AlgebraError::GenerationDiverged(max_rounds))
}

/// Superoperator of left multiplication by `a` in row-major vectorization:
/// vec(a x) = (a kron I) vec(x).
pub fn left_mul_superop(a: &Operator) -> Operator {
    a.kronecker(&Operator::identity(a.dim()))
}

/// Superoperator of right multiplication: vec(x a) = (I kron a^T) vec(x).
pub fn right_mul_superop(a: &Operator) -> Operator {
    Operator::identity(a.dim()).kronecker(&a.transpose())
}

/// Row-major vectorization of a matrix.
pub fn vectorize(a: &Operator) -> CVector {
    let n = a.dim();
    CVector::from_fn(n * n, |k, _| a.entry(k / n, k % n))
}

/// Inverse of `vectorize`.
pub fn unvectorize(v: &CVector, dim: usize) -> Operator {
    assert_eq!(v.len(), dim * dim, "vector length must be dim^2");
    let mat = CMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]);
    Operator::new(mat).expect("entries are finite")
}

/// Commutant of a set of operators inside M_n: the joint null space of
/// x -> [x, b], computed by SVD. The input set is *-closed internally, so the
/// result is a unital *-algebra.
pub fn commutant(ops: &[Operator], tol: Tolerance) -> Result<AlgebraBasis, AlgebraError> {
    let first = ops.first().ok_or(AlgebraError::EmptyGeneratingSet)?;
    let n = first.dim();
    let mut constraints: Vec<Operator> = Vec::new();
    for b in ops {
        if b.dim() != n {
            return Err(AlgebraError::AmbientMismatch { left: n, right: b.dim() });
        }
        for op in [b.clone(), b.adjoint()] {
            // [x, op] = 0 in vectorized form: (I kron op^T - op kron I) vec(x) = 0.
            constraints.push(right_mul_superop(&op).sub(&left_mul_superop(&op)));
        }
    }
    let mut stacked = CMatrix::zeros(constraints.len() * n * n, n * n);
    for (k, cons) in constraints.iter().enumerate() {
        stacked.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(cons.mat());
    }
    let kernel = null_space(&stacked, tol);
    let mats: Vec<Operator> = kernel.iter().map(|v| unvectorize(v, n)).collect();
    let basis = orthonormalize(n, &mats, tol);

    // Defensive verification: every basis element must actually commute.
    let mut worst = 0.0_f64;
    for x in &basis {
        for b in ops {
            worst = worst.max(x.commutator(b).max_norm());
        }
    }
    let threshold = tol.threshold(ops.iter().map(|b| b.max_norm()).fold(1.0, f64::max));
    if worst > threshold {
        return Err(AlgebraError::CommutantVerification { deviation: worst, threshold });
    }
    Ok(AlgebraBasis { ambient_dim: n, basis })
}

/// Joint fixed space { x : L x = x for every L } of superoperators acting on
/// vectorized M_n, as an orthonormal basis of matrices.
pub fn joint_fixed_space(
    superops: &[Operator],
    dim: usize,
    tol: Tolerance,
) -> Result<AlgebraBasis, AlgebraError> {
    if superops.is_empty() {
        return Err(AlgebraError::EmptyGeneratingSet);
    }
    let d = dim * dim;
    let id = Operator::identity(d);
    let mut stacked = CMatrix::zeros(superops.len() * d, d);
    for (k, l) in superops.iter().enumerate() {
        if l.dim() != d {
            return Err(AlgebraError::AmbientMismatch { left: d, right: l.dim() });
        }
        stacked.view_mut((k * d, 0), (d, d)).copy_from(l.sub(&id).mat());
    }
    let kernel = null_space(&stacked, tol);
    let mats: Vec<Operator> = kernel.iter().map(|v| unvectorize(v, dim)).collect();
    Ok(AlgebraBasis { ambient_dim: dim, basis: orthonormalize(dim, &mats, tol) })
}

/// Largest pairwise commutator among basis elements, with the maximizing pair.
pub struct AbelianReport {
    pub abelian: bool,
    pub max_commutator: f64,
    pub threshold: f64,
    pub witness: Option<(usize, usize)>,
}

/// Tests whether the span is commutative by checking all basis pairs.
pub fn is_abelian(basis: &[Operator], tol: Tolerance) -> AbelianReport {
    let scale = basis.iter().map(|b| b.max_norm()).fold(1.0, f64::max);
    let threshold = tol.threshold(scale * scale);
    let mut max_commutator = 0.0_f64;
    let mut witness = None;
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            let c = basis[i].commutator(&basis[j]).max_norm();
            if c > max_commutator {
                max_commutator = c;
                witness = Some((i, j));
            }
        }
    }
    AbelianReport { abelian: max_commutator <= threshold, max_commutator, threshold, witness }
}

/// Dimension of the intersection of two spans, counted by principal angles
/// (singular values of A^* B close to 1).
pub fn intersection_dim(a: &AlgebraBasis, b: &AlgebraBasis, tol: Tolerance) -> usize {
    if a.dim() == 0 || b.dim() == 0 {
        return 0;
    }
    let d = a.ambient_dim * a.ambient_dim;
    let mut am = CMatrix::zeros(d, a.dim());
    for (k, x) in a.basis.iter().enumerate() {
        am.set_column(k, &vectorize(x));
    }
    let mut bm = CMatrix::zeros(d, b.dim());
    for (k, x) in b.basis.iter().enumerate() {
        bm.set_column(k, &vectorize(x));
    }
    let overlap = am.adjoint() * bm;
    let svd = nalgebra::linalg::SVD::new(overlap, false, false);
    let cutoff = 1.0 - tol.threshold(1.0).sqrt();
    svd.singular_values.iter().filter(|&&s| s > cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::haar_unitary;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn generate_full_matrix_algebra_from_units() {
        let seeds = vec![Operator::matrix_unit(2, 0, 1)];
        let alg = generate_algebra(&seeds, tol()).unwrap();
        // E_01 and its adjoint generate all of M_2.
        assert_eq!(alg.dim(), 4);
        assert!(alg.contains(&Operator::identity(2), tol()));
        assert!(alg.contains(&Operator::matrix_unit(2, 1, 0), tol()));
    }

    #[test]
    fn generate_diagonal_algebra() {
        let seeds = vec![Operator::diagonal(&[1.0, 2.0, 3.0])];
        let alg = generate_algebra(&seeds, tol()).unwrap();
        assert_eq!(alg.dim(), 3);
        assert!(alg.contains(&Operator::matrix_unit(3, 1, 1), tol()));
        assert!(!alg.contains(&Operator::matrix_unit(3, 0, 1), tol()));
    }

    #[test]
    fn generated_algebra_is_star_and_product_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(&mut rng, 3);
        let seeds = vec![Operator::diagonal(&[0.3, 0.3, 0.9]), u];
        let alg = generate_algebra(&seeds, tol()).unwrap();
        for a in alg.basis() {
            assert!(alg.contains(&a.adjoint(), tol()), "adjoint escaped span");
            for b in alg.basis() {
                assert!(alg.contains(&a.mul(b), tol()), "product escaped span");
            }
        }
    }

    #[test]
    fn commutant_of_diagonal_is_diagonal() {
        let d = Operator::diagonal(&[1.0, 2.0]);
        let comm = commutant(&[d], tol()).unwrap();
        assert_eq!(comm.dim(), 2);
        assert!(comm.contains(&Operator::matrix_unit(2, 0, 0), tol()));
        assert!(!comm.contains(&Operator::matrix_unit(2, 0, 1), tol()));
    }

    #[test]
    fn commutant_of_full_algebra_is_scalars() {
        let units: Vec<Operator> =
            (0..3).flat_map(|i| (0..3).map(move |j| Operator::matrix_unit(3, i, j))).collect();
        let comm = commutant(&units, tol()).unwrap();
        assert_eq!(comm.dim(), 1);
        assert!(comm.contains(&Operator::identity(3), tol()));
    }

    #[test]
    fn commutant_of_scalars_is_everything() {
        let comm = commutant(&[Operator::identity(3)], tol()).unwrap();
        assert_eq!(comm.dim(), 9);
    }

    // Property: double commutant of a generated algebra equals the algebra.
    #[test]
    fn bicommutant_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 2..=3 {
            let u = haar_unitary(&mut rng, n);
            let d = Operator::diagonal(&(0..n).map(|k| 0.5 + k as f64).collect::<Vec<_>>());
            let alg = generate_algebra(&[d, u], tol()).unwrap();
            let comm = commutant(alg.basis(), tol()).unwrap();
            let bicomm = commutant(comm.basis(), tol()).unwrap();
            assert_eq!(alg.dim(), bicomm.dim(), "n={n}");
            assert!(bicomm.contains_all(&alg, tol()));
            assert!(alg.contains_all(&bicomm, tol()));
        }
    }

    #[test]
    fn abelian_detection() {
        let diag = vec![Operator::matrix_unit(2, 0, 0), Operator::matrix_unit(2, 1, 1)];
        let rep = is_abelian(&diag, tol());
        assert!(rep.abelian);
        let all: Vec<Operator> =
            (0..2).flat_map(|i| (0..2).map(move |j| Operator::matrix_unit(2, i, j))).collect();
        let rep = is_abelian(&all, tol());
        assert!(!rep.abelian);
        assert!(rep.max_commutator > 0.5);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn joint_fixed_space_of_conjugations() {
        // Fixed points of conjugation by sigma_z on M_2 are the diagonals.
        let sz = Operator::diagonal(&[1.0, -1.0]);
        let l = sz.kronecker(&sz.conjugate());
        let fixed = joint_fixed_space(&[l], 2, tol()).unwrap();
        assert_eq!(fixed.dim(), 2);
        assert!(fixed.contains(&Operator::matrix_unit(2, 0, 0), tol()));
        assert!(!fixed.contains(&Operator::matrix_unit(2, 0, 1), tol()));
    }

    #[test]
    fn vectorization_round_trip_and_superops() {
        let a = Operator::from_rows(2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 2.0)])
            .unwrap();
        let x = Operator::from_rows(2, &[c(0.5, 0.0), c(0.0, 2.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert_eq!(unvectorize(&vectorize(&a), 2), a);
        let lhs = unvectorize(&(left_mul_superop(&a).mat() * vectorize(&x)), 2);
        assert_eq!(lhs, a.mul(&x));
        let rhs = unvectorize(&(right_mul_superop(&a).mat() * vectorize(&x)), 2);
        assert_eq!(rhs, x.mul(&a));
    }

    #[test]
    fn intersection_dims() {
        let diag = AlgebraBasis::from_orthonormal(
            2,
            vec![Operator::matrix_unit(2, 0, 0), Operator::matrix_unit(2, 1, 1)],
        );
        let scalars = AlgebraBasis::from_orthonormal(
            2,
            vec![Operator::identity(2).scale(c(1.0 / 2.0_f64.sqrt(), 0.0))],
        );
        assert_eq!(intersection_dim(&diag, &scalars, tol()), 1);
        assert_eq!(intersection_dim(&diag, &diag, tol()), 2);
    }

    #[test]
    fn empty_seeds_error() {
        assert!(matches!(generate_algebra(&[], tol()), Err(AlgebraError::EmptyGeneratingSet)));
        assert!(matches!(commutant(&[], tol()), Err(AlgebraError::EmptyGeneratingSet)));
    }
}
