//! Dense complex matrix algebra used throughout the crate.
//!
//! Only diagonalizable matrices are supported. Eigendecompositions are
//! returned in a biorthogonal frame: right eigenvectors are the unit-norm
//! columns of `right`, left eigenvectors are the rows of `left = right⁻¹`, so
//! that `left * m * right` is diagonal and `⟨k|k'⟩ = δ_kk'`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative eigenvalue separation below which two eigenvalues are treated as
/// degenerate.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

/// Largest accepted condition number of a gauge matrix.
pub const DEFAULT_GAUGE_CONDITION_LIMIT: f64 = 1e12;

/// Relative width of a tie group when ordering eigenvalues.
const TIE_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpectralOrder {
    /// Descending modulus; ties broken by ascending argument in (−π, π].
    ByModulusDesc,
    /// Descending real part; ties broken by ascending imaginary part.
    ByRealPartDesc,
}

impl SpectralOrder {
    fn primary(self, z: Complex64) -> f64 {
        match self {
            SpectralOrder::ByModulusDesc => z.norm(),
            SpectralOrder::ByRealPartDesc => z.re,
        }
    }

    fn secondary(self, z: Complex64) -> f64 {
        match self {
            SpectralOrder::ByModulusDesc => principal_arg(z),
            SpectralOrder::ByRealPartDesc => z.im,
        }
    }
}

fn principal_arg(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Permutation that sorts `values` according to `order`.
///
/// Values whose primary keys differ by less than a small relative tolerance
/// form a tie group that is ordered by the secondary key, so conjugate pairs
/// come out in a reproducible order even when rounding splits their moduli.
pub fn sort_permutation(values: &[Complex64], order: SpectralOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        order
            .primary(values[b])
            .total_cmp(&order.primary(values[a]))
            .then(a.cmp(&b))
    });
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tie = TIE_TOL * scale;
    let mut start = 0;
    while start < idx.len() {
        let head = order.primary(values[idx[start]]);
        let mut end = start + 1;
        while end < idx.len() && head - order.primary(values[idx[end]]) <= tie {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| {
            order
                .secondary(values[a])
                .partial_cmp(&order.secondary(values[b]))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        start = end;
    }
    idx
}

/// Sorts a list of complex numbers in place according to `order`.
pub fn sort_spectrum(values: &mut Vec<Complex64>, order: SpectralOrder) {
    let perm = sort_permutation(values, order);
    *values = perm.into_iter().map(|i| values[i]).collect();
}

/// Smallest pairwise distance; `+∞` for fewer than two values.
pub fn min_pairwise_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    gap
}

fn spectral_radius(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronecker product with the block-of-`b` convention:
/// `kron(a, b)[i·rb + p, j·cb + q] = a[i, j] · b[p, q]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Thin singular value decomposition `m = u · diag(s) · v†`, with `s`
/// non-increasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Thin SVD backed by faer; nalgebra's complex SVD fails to converge to a
/// valid factorization on a few percent of small matrices.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Svd { u: ComplexMatrix::zeros(r, 0), singular_values: vec![], v: ComplexMatrix::zeros(c, 0) });
    }
    let fm = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm.thin_svd().map_err(|_| Error::NumericalFailure)?;
    let (fu, fv) = (dec.U(), dec.V());
    let k = r.min(c);
    let s = dec.S().column_vector();
    let singular_values: Vec<f64> = (0..k).map(|i| s[i].re).collect();
    if singular_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure);
    }
    Ok(Svd {
        u: ComplexMatrix::from_fn(r, k, |i, j| fu[(i, j)]),
        singular_values,
        v: ComplexMatrix::from_fn(c, k, |i, j| fv[(i, j)]),
    })
}

/// Moore–Penrose inverse; singular values at or below `rtol · σ₁` are dropped.
pub fn pseudo_inverse(m: &ComplexMatrix, rtol: f64) -> Result<ComplexMatrix> {
    let d = svd(m)?;
    let top = d.singular_values.first().copied().unwrap_or(0.0);
    let mut v = d.v;
    for (j, mut col) in v.column_iter_mut().enumerate() {
        let s = d.singular_values[j];
        let inv = if s > rtol * top && s > 0.0 { 1.0 / s } else { 0.0 };
        col *= Complex64::new(inv, 0.0);
    }
    Ok(v * d.u.adjoint())
}

/// 2-norm condition number, `+∞` for singular or empty matrices.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let Ok(d) = svd(m) else { return f64::INFINITY };
    match (d.singular_values.first(), d.singular_values.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

fn ensure_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn schur(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_finite(m, "matrix")?;
    Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .map(Schur::unpack)
        .ok_or(Error::NumericalFailure)
}

/// Eigenvalues of a square matrix, sorted by `order`, without any genericity
/// requirement.
pub fn eigenvalues(m: &ComplexMatrix, order: SpectralOrder) -> Result<Vec<Complex64>> {
    ensure_square(m, "eigenvalue input")?;
    let (_, t) = schur(m)?;
    let mut values: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_spectrum(&mut values, order);
    Ok(values)
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<Complex64>,
    /// Columns are the unit-norm right eigenvectors `|k⟩`.
    pub right: ComplexMatrix,
    /// Rows are the left eigenvectors `⟨k|`, with `left * right = 1`.
    pub left: ComplexMatrix,
    pub order: SpectralOrder,
    pub min_gap: f64,
    /// Condition number of the eigenvector matrix (≥ 1).
    pub condition_estimate: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn right_vector(&self, k: usize) -> ComplexMatrix {
        self.right.columns(k, 1).into_owned()
    }

    pub fn left_vector(&self, k: usize) -> ComplexMatrix {
        self.left.rows(k, 1).into_owned()
    }

    /// Rank-one projector `|k⟩⟨k|`.
    pub fn projector(&self, k: usize) -> ComplexMatrix {
        self.right_vector(k) * self.left_vector(k)
    }

    /// `Σ_k μ_k |k⟩⟨k|`.
    pub fn reassemble(&self) -> ComplexMatrix {
        let diag = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.right * diag * &self.left
    }

    /// Expresses `m` in the eigenbasis: entry `(k, l)` is `⟨k|m|l⟩`.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &self.left * m * &self.right
    }
}

/// Biorthogonal eigendecomposition with the default degeneracy tolerance.
pub fn eig(m: &ComplexMatrix, order: SpectralOrder) -> Result<SpectralDecomposition> {
    eig_with_tol(m, order, DEFAULT_DEGENERACY_TOL)
}

/// Biorthogonal eigendecomposition.
///
/// Fails with [`Error::DegenerateSpectrum`] when two eigenvalues are closer
/// than `tol_deg` times the spectral radius. A tolerance of zero disables the
/// check (eigenvectors of exactly repeated eigenvalues are then unreliable).
pub fn eig_with_tol(
    m: &ComplexMatrix,
    order: SpectralOrder,
    tol_deg: f64,
) -> Result<SpectralDecomposition> {
    ensure_square(m, "eigendecomposition input")?;
    let n = m.nrows();
    let (q, t) = schur(m)?;
    let raw: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let radius = spectral_radius(&raw);
    let min_gap = min_pairwise_gap(&raw);
    let threshold = tol_deg * radius;
    if tol_deg > 0.0 && min_gap < threshold.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSpectrum { min_gap, threshold });
    }

    // Eigenvectors of the triangular factor by back substitution.
    let floor = f64::EPSILON * radius.max(f64::MIN_POSITIVE);
    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < floor {
                denom = Complex64::new(floor, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let vecs = q * y;

    let perm = sort_permutation(&raw, order);
    let mut right = ComplexMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &src) in perm.iter().enumerate() {
        let v = vecs.column(src);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NumericalFailure);
        }
        right.set_column(col, &(v / Complex64::new(norm, 0.0)));
        eigenvalues.push(raw[src]);
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateSpectrum { min_gap, threshold })?;
    ensure_finite(&left, "left eigenvectors").map_err(|_| Error::NumericalFailure)?;
    let condition_estimate = condition_number(&right).max(1.0);
    Ok(SpectralDecomposition {
        eigenvalues,
        right,
        left,
        order,
        min_gap,
        condition_estimate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericityReport {
    pub diagonal_nondegenerate: bool,
    pub leading_unique: bool,
    pub min_gap: f64,
    /// Separation of the leading eigenvalue from the next one in the ordering
    /// key (modulus or real part).
    pub leading_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GenericityReport {
    pub fn from_eigenvalues(values: &[Complex64], order: SpectralOrder, tol: f64) -> Self {
        let mut sorted = values.to_vec();
        sort_spectrum(&mut sorted, order);
        let scale = spectral_radius(&sorted).max(f64::MIN_POSITIVE);
        let min_gap = min_pairwise_gap(&sorted);
        let leading_gap = if sorted.len() < 2 {
            f64::INFINITY
        } else {
            order.primary(sorted[0]) - order.primary(sorted[1])
        };
        let diagonal_nondegenerate = min_gap >= tol * scale;
        let leading_unique = leading_gap >= tol * scale;
        Self {
            diagonal_nondegenerate,
            leading_unique,
            min_gap,
            leading_gap,
            tolerance: tol,
            passed: diagonal_nondegenerate && leading_unique,
        }
    }
}

pub fn genericity_check(s: &SpectralDecomposition, tol: f64) -> GenericityReport {
    GenericityReport::from_eigenvalues(&s.eigenvalues, s.order, tol)
}

/// `x · m · x⁻¹` with the default conditioning limit.
pub fn similarity(m: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let inv = gauge_inverse(x, DEFAULT_GAUGE_CONDITION_LIMIT)?;
    similarity_with_inverse(m, x, &inv)
}

pub(crate) fn gauge_inverse(x: &ComplexMatrix, limit: f64) -> Result<ComplexMatrix> {
    ensure_square(x, "gauge matrix")?;
    let cond = condition_number(x);
    if !(cond <= limit) {
        return Err(Error::SingularGauge(cond));
    }
    x.clone().try_inverse().ok_or(Error::SingularGauge(cond))
}

pub(crate) fn similarity_with_inverse(
    m: &ComplexMatrix,
    x: &ComplexMatrix,
    x_inv: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if m.nrows() != x.nrows() || m.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix {}x{} vs gauge {}x{}",
            m.nrows(),
            m.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x * m * x_inv)
}

/// Hermitian matrix eigenvalues (ascending).
pub(crate) fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
