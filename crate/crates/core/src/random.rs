//! Seeded random constructions for fuzzing and tests. All sampling is
//! deterministic given the caller's RNG state.

use crate::linalg::{CMatrix, Operator};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

/// Standard complex Gaussian via Box-Muller (variance 1 overall).
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let theta: f64 = rng.gen_range(0.0..TAU);
    let r = (-u.ln()).sqrt();
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// Matrix with iid complex Gaussian entries.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, dim: usize) -> Operator {
    let entries: Vec<Complex64> = (0..dim * dim).map(|_| complex_gaussian(rng)).collect();
    Operator::from_rows(dim, &entries).expect("gaussian entries are finite")
}

/// Matrix with iid entries uniform in the closed unit disc.
pub fn unit_disc_matrix<R: Rng>(rng: &mut R, dim: usize) -> Operator {
    let entries: Vec<Complex64> = (0..dim * dim)
        .map(|_| {
            let r = rng.gen_range(0.0..1.0_f64).sqrt();
            let theta = rng.gen_range(0.0..TAU);
            Complex64::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    Operator::from_rows(dim, &entries).expect("entries are finite")
}

/// Haar-distributed unitary via QR of a Gaussian matrix with phase fixing.
pub fn haar_unitary<R: Rng>(rng: &mut R, dim: usize) -> Operator {
    let g = gaussian_matrix(rng, dim);
    let qr = nalgebra::linalg::QR::new(g.mat().clone());
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, k)] *= phase.conj();
        }
    }
    Operator::new(q).expect("QR factor is finite")
}

/// Random faithful density: Wishart `W W^* / Tr` pushed away from the boundary
/// by mixing in `floor * I` and renormalizing, so every eigenvalue is at least
/// `floor / (1 + dim * floor)`.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, floor: f64) -> Operator {
    let w = gaussian_matrix(rng, dim);
    let ww = w.mul(&w.adjoint());
    let tr = ww.trace().re;
    let normalized = ww.scale(Complex64::new(1.0 / tr, 0.0));
    let mixed = normalized.add(&Operator::identity(dim).scale(Complex64::new(floor, 0.0)));
    mixed.scale(Complex64::new(1.0 / (1.0 + dim as f64 * floor), 0.0))
}

/// Random unitary with `u^order` a scalar, so conjugation by `u` has exact
/// order dividing `order`: `u = V diag(roots of unity) V^*` with Haar `V`.
pub fn random_root_unitary<R: Rng>(rng: &mut R, dim: usize, order: usize) -> Operator {
    let v = haar_unitary(rng, dim);
    let mut d = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        let j = rng.gen_range(0..order) as f64;
        let theta = TAU * j / order as f64;
        d[(k, k)] = Complex64::new(theta.cos(), theta.sin());
    }
    let mat = v.mat() * d * v.mat().adjoint();
    Operator::new(mat).expect("unitary entries are finite")
}

/// Random signed permutation matrix `u` with `u^order = I` exactly: disjoint
/// cycles of length dividing `order`, each cycle's sign product forced to +1.
pub fn signed_permutation<R: Rng>(rng: &mut R, dim: usize, order: usize) -> Operator {
    let divisors: Vec<usize> = (1..=order).filter(|d| order % d == 0).collect();
    let mut remaining: Vec<usize> = (0..dim).collect();
    let mut m = CMatrix::zeros(dim, dim);
    while !remaining.is_empty() {
        let allowed: Vec<usize> =
            divisors.iter().copied().filter(|&d| d <= remaining.len()).collect();
        let len = allowed[rng.gen_range(0..allowed.len())];
        let cycle: Vec<usize> = remaining.drain(..len).collect();
        let mut signs: Vec<f64> =
            (0..len).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let product: f64 = signs.iter().product();
        signs[len - 1] *= product; // force the cycle's sign product to +1
        for k in 0..len {
            m[(cycle[(k + 1) % len], cycle[k])] = Complex64::new(signs[k], 0.0);
        }
    }
    Operator::new(m).expect("permutation entries are finite")
}

/// Random diagonal density with eigenvalues at least `floor` after
/// normalization.
pub fn random_diagonal_density<R: Rng>(rng: &mut R, dim: usize, floor: f64) -> Operator {
    let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0_f64)).collect();
    let sum: f64 = raw.iter().sum();
    let scaled: Vec<f64> =
        raw.iter().map(|x| (x / sum + floor) / (1.0 + dim as f64 * floor)).collect();
    Operator::diagonal(&scaled)
}

/// Default eigenvalue floor for random densities.
pub const DENSITY_EIGENVALUE_FLOOR: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, Tolerance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=4 {
            let u = haar_unitary(&mut rng, dim);
            assert!(u.unitary_deviation() < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn random_density_is_faithful() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in 2..=4 {
            let rho = random_density(&mut rng, dim, DENSITY_EIGENVALUE_FLOOR);
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(rho.hermitian_deviation() < 1e-12);
            let eig = hermitian_eigen(&rho, Tolerance::default()).unwrap();
            assert!(eig.values[0] > 9e-4, "eigenvalue floor violated: {}", eig.values[0]);
        }
    }

    #[test]
    fn root_unitary_has_finite_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_root_unitary(&mut rng, 3, 4);
        assert!(u.unitary_deviation() < 1e-12);
        let u4 = u.mul(&u).mul(&u).mul(&u);
        let dev = u4.sub(&Operator::identity(3)).max_norm();
        assert!(dev < 1e-12, "u^4 deviates from identity by {dev}");
    }

    #[test]
    fn signed_permutation_power_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..16 {
            let u = signed_permutation(&mut rng, 4, 4);
            assert!(u.unitary_deviation() < 1e-14);
            let u4 = u.mul(&u).mul(&u).mul(&u);
            let dev = u4.sub(&Operator::identity(4)).max_norm();
            assert!(dev < 1e-14, "u^4 deviates from identity by {dev}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let ma = gaussian_matrix(&mut a, 3);
        let mb = gaussian_matrix(&mut b, 3);
        assert_eq!(ma, mb);
    }
}
