//! Dense complex matrices, Hermitian spectral calculus, and the shared
//! tolerance policy used by every comparison in this crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Complex matrix storage shared across the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Complex column vector, used for representation-space vectors.
pub type CVector = DVector<Complex64>;

/// Errors raised by matrix constructors and spectral operations.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry at ({row},{col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("dimension mismatch ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e} > {threshold:.3e})")]
    NotHermitian { deviation: f64, threshold: f64 },
    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.3e} <= {threshold:.3e})")]
    NotPositiveDefinite { eigenvalue: f64, threshold: f64 },
    #[error("matrix is not unitary (deviation {deviation:.3e} > {threshold:.3e})")]
    NotUnitary { deviation: f64, threshold: f64 },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
}

/// Absolute/relative tolerance pair; the effective threshold for comparing
/// quantities of scale `s` is `abs + rel * s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self, LinalgError> {
        if !(abs.is_finite() && rel.is_finite()) || abs <= 0.0 || rel < 0.0 {
            return Err(LinalgError::InvalidTolerance(format!(
                "abs must be finite and > 0, rel finite and >= 0 (got abs={abs}, rel={rel})"
            )));
        }
        Ok(Self { abs, rel })
    }

    /// Effective threshold for quantities of the given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

/// Outcome of an entrywise matrix comparison.
#[derive(Clone, Copy, Debug)]
pub struct CompareReport {
    pub within: bool,
    pub max_deviation: f64,
    pub threshold: f64,
    /// Entry at which the largest deviation occurred.
    pub location: (usize, usize),
}

/// Validated cached structure flags. `None` means "not checked".
#[derive(Clone, Copy, Debug, Default)]
pub struct Flags {
    pub hermitian: Option<bool>,
    pub positive_definite: Option<bool>,
    pub unitary: Option<bool>,
}

/// Square complex matrix with validated entries.
#[derive(Clone, Debug)]
pub struct Operator {
    mat: CMatrix,
    flags: Flags,
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl Operator {
    /// Wraps a square matrix with finite entries.
    pub fn new(mat: CMatrix) -> Result<Self, LinalgError> {
        if mat.nrows() != mat.ncols() {
            return Err(LinalgError::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                let z = mat[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self { mat, flags: Flags::default() })
    }

    /// Builds from a row-major slice of entries.
    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self, LinalgError> {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    /// Builds from a row-major slice of real entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        let v: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_rows(dim, &v)
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim, dim), flags: Flags::default() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim, dim), flags: Flags::default() }
    }

    /// Matrix unit E_ij (1 in row i, column j).
    pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, j)] = Complex64::new(1.0, 0.0);
        Self { mat: m, flags: Flags::default() }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (k, &x) in entries.iter().enumerate() {
            m[(k, k)] = Complex64::new(x, 0.0);
        }
        Self { mat: m, flags: Flags::default() }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint(), flags: self.flags }
    }

    pub fn transpose(&self) -> Self {
        Self { mat: self.mat.transpose(), flags: Flags::default() }
    }

    pub fn conjugate(&self) -> Self {
        Self { mat: self.mat.map(|z| z.conj()), flags: Flags::default() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { mat: self.mat.map(|z| z * c), flags: Flags::default() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: &self.mat + &other.mat, flags: Flags::default() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { mat: &self.mat - &other.mat, flags: Flags::default() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { mat: &self.mat * &other.mat, flags: Flags::default() }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().sum()
    }

    /// Largest entry modulus; the crate-wide operator comparison norm.
    pub fn max_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert-Schmidt inner product Tr(a^* b).
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        self.mat.iter().zip(other.mat.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Max-norm distance to the adjoint.
    pub fn hermitian_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).max_norm()
    }

    /// Max-norm of a^* a - 1.
    pub fn unitary_deviation(&self) -> f64 {
        self.adjoint().mul(self).sub(&Self::identity(self.dim())).max_norm()
    }

    /// Validates Hermiticity against the tolerance and caches the flag.
    pub fn ensure_hermitian(&mut self, tol: Tolerance) -> Result<(), LinalgError> {
        if self.flags.hermitian == Some(true) {
            return Ok(());
        }
        let deviation = self.hermitian_deviation();
        let threshold = tol.threshold(self.max_norm());
        if deviation > threshold {
            return Err(LinalgError::NotHermitian { deviation, threshold });
        }
        self.flags.hermitian = Some(true);
        Ok(())
    }

    /// Validates unitarity against the tolerance and caches the flag.
    pub fn ensure_unitary(&mut self, tol: Tolerance) -> Result<(), LinalgError> {
        if self.flags.unitary == Some(true) {
            return Ok(());
        }
        let deviation = self.unitary_deviation();
        let threshold = tol.threshold(1.0);
        if deviation > threshold {
            return Err(LinalgError::NotUnitary { deviation, threshold });
        }
        self.flags.unitary = Some(true);
        Ok(())
    }

    /// Kronecker product; used to lift algebra elements to representation space.
    pub fn kronecker(&self, other: &Self) -> Self {
        Self { mat: self.mat.kronecker(&other.mat), flags: Flags::default() }
    }
}

/// Entrywise comparison in the max norm with threshold
/// `abs + rel * max(|a|, |b|)`.
pub fn approx_equal(a: &Operator, b: &Operator, tol: Tolerance) -> Result<CompareReport, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let threshold = tol.threshold(a.max_norm().max(b.max_norm()));
    let mut max_deviation = 0.0;
    let mut location = (0, 0);
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            let d = (a.entry(i, j) - b.entry(i, j)).norm();
            if d > max_deviation {
                max_deviation = d;
                location = (i, j);
            }
        }
    }
    Ok(CompareReport { within: max_deviation <= threshold, max_deviation, threshold, location })
}

/// Eigendecomposition of a Hermitian matrix: `vectors * diag(values) * vectors^*`
/// with `values` ascending and `vectors` unitary.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Decomposes a Hermitian matrix, re-symmetrizing tolerance-sized asymmetry first.
pub fn hermitian_eigen(h: &Operator, tol: Tolerance) -> Result<HermitianEigen, LinalgError> {
    let deviation = h.hermitian_deviation();
    let threshold = tol.threshold(h.max_norm());
    if h.flags().hermitian != Some(true) && deviation > threshold {
        return Err(LinalgError::NotHermitian { deviation, threshold });
    }
    let sym = (h.mat() + h.mat().adjoint()).map(|z| z * 0.5);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let n = h.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok(HermitianEigen { values, vectors })
}

impl HermitianEigen {
    /// Rebuilds `vectors * diag(f(values)) * vectors^*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> Operator {
        let n = self.values.len();
        let mut d = CMatrix::zeros(n, n);
        for (k, &v) in self.values.iter().enumerate() {
            d[(k, k)] = f(v);
        }
        let mat = &self.vectors * d * self.vectors.adjoint();
        Operator { mat, flags: Flags::default() }
    }
}

/// Complex power `h^z = U diag(lambda^z) U^*` of a Hermitian positive-definite
/// matrix. Eigenvalues at or below the absolute tolerance abort with
/// `NotPositiveDefinite` rather than being clamped silently.
pub fn hermitian_power(h: &Operator, z: Complex64, tol: Tolerance) -> Result<Operator, LinalgError> {
    let eig = hermitian_eigen(h, tol)?;
    let floor = tol.abs;
    if let Some(&lo) = eig.values.first() {
        if lo <= floor {
            return Err(LinalgError::NotPositiveDefinite { eigenvalue: lo, threshold: floor });
        }
    }
    Ok(eig.map_spectrum(|lambda| (z * lambda.ln()).exp()))
}

/// Orthonormal basis (as columns) of the null space of `m`, detected by SVD
/// with threshold `tol.abs * sqrt(max(rows, cols)) * max(1, sigma_max)`.
pub fn null_space(m: &CMatrix, tol: Tolerance) -> Vec<CVector> {
    let rows = m.nrows();
    let cols = m.ncols();
    // The thin SVD only returns min(rows, cols) right singular vectors; pad
    // wide inputs with zero rows so V^T is a complete basis.
    let work = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = nalgebra::linalg::SVD::new(work, false, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol.abs * (rows.max(cols) as f64).sqrt() * sigma_max.max(1.0);
    let v_t = svd.v_t.expect("requested V^T");
    let mut basis = Vec::new();
    for k in 0..svd.singular_values.len() {
        if svd.singular_values[k] <= threshold {
            basis.push(v_t.row(k).adjoint());
        }
    }
    basis
}

/// Solves `m x = rhs` by LU with full pivoting.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
    let lu = nalgebra::linalg::FullPivLU::new(m.clone());
    lu.solve(rhs)
        .ok_or_else(|| LinalgError::SingularSystem(format!("{}x{} system", m.nrows(), m.ncols())))
}

// --- JSON schema -----------------------------------------------------------
//
// {"dim": n, "entries": [[[re, im], ...], ...]} with row-major entries.

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.dim();
        let entries: Vec<Vec<[f64; 2]>> = (0..n)
            .map(|i| (0..n).map(|j| [self.entry(i, j).re, self.entry(i, j).im]).collect())
            .collect();
        MatrixJson { dim: n, entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(deserializer)?;
        if raw.entries.len() != raw.dim {
            return Err(D::Error::custom(format!(
                "expected {} rows, found {}",
                raw.dim,
                raw.entries.len()
            )));
        }
        let mut flat = Vec::with_capacity(raw.dim * raw.dim);
        for (i, row) in raw.entries.iter().enumerate() {
            if row.len() != raw.dim {
                return Err(D::Error::custom(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    raw.dim
                )));
            }
            for &[re, im] in row {
                flat.push(Complex64::new(re, im));
            }
        }
        Operator::from_rows(raw.dim, &flat).map_err(D::Error::custom)
    }
}
