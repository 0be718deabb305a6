//! N-point correlation functions by direct contraction, their coefficient
//! (residue) tensors in the eigenbasis of the generator, and the analytic
//! Z / Laplace transforms built from those tensors.
//!
//! Conventions: operators are listed in site order `j_1, …, j_N` (`j_1` at
//! the origin). Gap `i` separates operators `i` and `i+1`: for lattice states
//! it is the number of sites strictly between them (adjacent sites have gap
//! 0), for cMPS it is the distance `τ_i = x_{i+1} − x_i`. The correlator is
//! `⟨1| M^[j_N] P(gap_{N−1}) ⋯ P(gap_1) M^[j_1] |1⟩` with `P(n) = Eⁿ` or
//! `P(τ) = e^{Tτ}`, and `|1⟩⟨1|` the stationary projector.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{ComplexMatrix, SpectralDecomposition, DEFAULT_DEGENERACY_TOL};
use crate::states::{SystemKind, TransferSystem};
use crate::tensor::{MultiIndex, Tensor};

const POLE_PROXIMITY: f64 = 1e-12;

/// Sampling grid of a correlation table, identical on every axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// Gaps `0..=n_max`.
    Discrete { n_max: usize },
    /// Distances `τ_m = (m + 1)·step` for `m = 0..points`.
    Continuous { step: f64, points: usize },
}

impl Window {
    pub fn kind(&self) -> SystemKind {
        match self {
            Window::Discrete { .. } => SystemKind::Discrete,
            Window::Continuous { .. } => SystemKind::Continuous,
        }
    }

    pub fn samples(&self) -> usize {
        match *self {
            Window::Discrete { n_max } => n_max + 1,
            Window::Continuous { points, .. } => points,
        }
    }

    /// Gap value at sample `m` (site count or distance).
    pub fn position(&self, m: usize) -> f64 {
        match *self {
            Window::Discrete { .. } => m as f64,
            Window::Continuous { step, .. } => (m + 1) as f64 * step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Window::Discrete { .. } => Ok(()),
            Window::Continuous { step, points } => {
                if !(step > 0.0 && step.is_finite()) || points == 0 {
                    Err(Error::InvalidGap(format!("continuous window needs step > 0 and points > 0, got {step}, {points}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Generalized Vandermonde matrix `V[m, k] = basis_k(position m)`:
    /// `μ_kⁿ` for lattice windows, `e^{λ_k τ_m}` for continuous ones.
    pub fn vandermonde(&self, poles: &[Complex64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.samples(), poles.len(), |m, k| mode_value(self.kind(), poles[k], self.position(m)))
    }
}

fn mode_value(kind: SystemKind, pole: Complex64, gap: f64) -> Complex64 {
    match kind {
        SystemKind::Discrete => pole.powi(gap as i32),
        SystemKind::Continuous => (pole * gap).exp(),
    }
}

/// Sampled N-point correlator over the `(N−1)`-dimensional gap grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub labels: Vec<String>,
    pub window: Window,
    pub values: Tensor,
}

impl CorrelationTable {
    pub fn new(labels: Vec<String>, window: Window, values: Tensor) -> Result<Self> {
        window.validate()?;
        if labels.len() < 2 {
            return Err(Error::ShapeMismatch("a correlation table needs at least two operators".into()));
        }
        let expected = vec![window.samples(); labels.len() - 1];
        if values.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch(format!("table shape {:?}, window implies {expected:?}", values.shape())));
        }
        if values.data().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("correlation table"));
        }
        Ok(Self { labels, window, values })
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn kind(&self) -> SystemKind {
        self.window.kind()
    }

    /// One-dimensional sample sequence of a two-point table.
    pub fn series(&self) -> Result<&[Complex64]> {
        if self.order() != 2 {
            return Err(Error::ShapeMismatch(format!("expected a two-point table, got order {}", self.order())));
        }
        Ok(self.values.data())
    }
}

/// Coefficients `c^(N)_j(k_1, …, k_{N−1})` of the multi-geometric /
/// multi-exponential expansion, axis `i` paired with gap `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueTensor {
    pub kind: SystemKind,
    pub labels: Vec<String>,
    pub spectrum: Vec<Complex64>,
    pub coefficients: Tensor,
}

impl ResidueTensor {
    pub fn new(kind: SystemKind, labels: Vec<String>, spectrum: Vec<Complex64>, coefficients: Tensor) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::ShapeMismatch("residue tensors need order ≥ 2".into()));
        }
        let expected = vec![spectrum.len(); labels.len() - 1];
        if coefficients.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient shape {:?}, expected {expected:?}",
                coefficients.shape()
            )));
        }
        Ok(Self { kind, labels, spectrum, coefficients })
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn poles(&self) -> usize {
        self.spectrum.len()
    }

    pub fn get(&self, k: &[usize]) -> Complex64 {
        self.coefficients.get(k)
    }

    fn contract(&self, weights: &[Vec<Complex64>]) -> Result<Complex64> {
        let mut t = self.coefficients.clone();
        for (axis, w) in weights.iter().enumerate().rev() {
            let row = ComplexMatrix::from_row_slice(1, w.len(), w);
            t = t.mode_product(axis, &row)?;
        }
        Ok(t.data()[0])
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if n != self.order() - 1 {
            return Err(Error::ShapeMismatch(format!("order {} needs {} arguments, got {n}", self.order(), self.order() - 1)));
        }
        Ok(())
    }

    /// `Σ_k c(k) Π_i basis_{k_i}(gap_i)`.
    pub fn evaluate(&self, gaps: &[f64]) -> Result<Complex64> {
        self.check_arity(gaps.len())?;
        let weights: Vec<Vec<Complex64>> = gaps
            .iter()
            .map(|&g| self.spectrum.iter().map(|&p| mode_value(self.kind, p, g)).collect())
            .collect();
        self.contract(&weights)
    }

    /// Full table over `window` obtained from the expansion.
    pub fn reassemble(&self, window: Window) -> Result<CorrelationTable> {
        if window.kind() != self.kind {
            return Err(Error::KindMismatch("window and residue tensor differ in kind".into()));
        }
        let v = window.vandermonde(&self.spectrum);
        let mut t = self.coefficients.clone();
        for axis in 0..t.rank() {
            t = t.mode_product(axis, &v)?;
        }
        CorrelationTable::new(self.labels.clone(), window, t)
    }
}

/// Caches the stationary vectors of a system for repeated contraction.
#[derive(Clone, Debug)]
pub struct Contractor<'a> {
    system: &'a TransferSystem,
    left: ComplexMatrix,
    right: ComplexMatrix,
    decomposition: SpectralDecomposition,
}

impl<'a> Contractor<'a> {
    pub fn new(system: &'a TransferSystem) -> Result<Self> {
        Self::with_tolerance(system, DEFAULT_DEGENERACY_TOL)
    }

    pub fn with_tolerance(system: &'a TransferSystem, tol_deg: f64) -> Result<Self> {
        let decomposition = system.decompose(tol_deg)?;
        Ok(Self {
            system,
            left: decomposition.left_vector(0),
            right: decomposition.right_vector(0),
            decomposition,
        })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    fn operators<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<&'a ComplexMatrix>> {
        if labels.len() < 2 {
            return Err(Error::ShapeMismatch("correlators need at least two operators".into()));
        }
        labels.iter().map(|l| self.system.operator(l.as_ref())).collect()
    }

    fn chain(&self, ops: &[&ComplexMatrix], props: &[&ComplexMatrix]) -> Complex64 {
        let mut v = ops[0] * &self.right;
        for (op, p) in ops[1..].iter().zip(props) {
            v = *op * (*p * v);
        }
        (&self.left * v)[(0, 0)]
    }

    fn expect_kind(&self, kind: SystemKind) -> Result<()> {
        if self.system.kind() != kind {
            return Err(Error::KindMismatch(format!(
                "system is {}, request is {}",
                self.system.kind().as_str(),
                kind.as_str()
            )));
        }
        Ok(())
    }

    /// Lattice correlator at integer gaps.
    pub fn npoint_discrete<S: AsRef<str>>(&self, labels: &[S], gaps: &[usize]) -> Result<Complex64> {
        self.expect_kind(SystemKind::Discrete)?;
        let ops = self.operators(labels)?;
        check_gap_count(labels.len(), gaps.len())?;
        let e = self.system.generator();
        let mut v = ops[0] * &self.right;
        for (op, &n) in ops[1..].iter().zip(gaps) {
            for _ in 0..n {
                v = e * v;
            }
            v = *op * v;
        }
        Ok((&self.left * v)[(0, 0)])
    }

    /// Continuum correlator at distances `τ_i ≥ 0`.
    pub fn npoint_continuous<S: AsRef<str>>(&self, labels: &[S], taus: &[f64]) -> Result<Complex64> {
        self.expect_kind(SystemKind::Continuous)?;
        let ops = self.operators(labels)?;
        check_gap_count(labels.len(), taus.len())?;
        let props = taus
            .iter()
            .map(|&tau| {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return Err(Error::InvalidGap(format!("distance must be finite and non-negative, got {tau}")));
                }
                Ok((self.system.generator() * Complex64::new(tau, 0.0)).exp())
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&ComplexMatrix> = props.iter().collect();
        Ok(self.chain(&ops, &refs))
    }

    /// Propagators `P(position m)` for every sample of `window`.
    fn propagators(&self, window: Window) -> Vec<ComplexMatrix> {
        let g = self.system.generator();
        match window {
            Window::Discrete { n_max } => {
                let mut out = Vec::with_capacity(n_max + 1);
                let mut p = ComplexMatrix::identity(g.nrows(), g.ncols());
                for _ in 0..=n_max {
                    let next = g * &p;
                    out.push(p);
                    p = next;
                }
                out
            }
            Window::Continuous { .. } => (0..window.samples())
                .map(|m| (g * Complex64::new(window.position(m), 0.0)).exp())
                .collect(),
        }
    }

    /// Samples the correlator on the full window grid. Cells are evaluated
    /// in parallel; each is written exactly once.
    pub fn table<S: AsRef<str>>(&self, labels: &[S], window: Window) -> Result<CorrelationTable> {
        window.validate()?;
        self.expect_kind(window.kind())?;
        let ops = self.operators(labels)?;
        let props = self.propagators(window);
        let shape = vec![window.samples(); labels.len() - 1];
        let cells: Vec<Vec<usize>> = MultiIndex::new(&shape).collect();
        let data: Vec<Complex64> = cells
            .par_iter()
            .map(|idx| {
                let p: Vec<&ComplexMatrix> = idx.iter().map(|&m| &props[m]).collect();
                self.chain(&ops, &p)
            })
            .collect();
        CorrelationTable::new(
            labels.iter().map(|l| l.as_ref().to_string()).collect(),
            window,
            Tensor::new(shape, data)?,
        )
    }

    /// Coefficient tensor from the eigenbasis matrix elements
    /// `⟨1|M^[j_N]|k_{N−1}⟩⟨k_{N−1}|⋯|k_1⟩⟨k_1|M^[j_1]|1⟩`.
    pub fn residue_tensor<S: AsRef<str>>(&self, labels: &[S]) -> Result<ResidueTensor> {
        let ops = self.operators(labels)?;
        let rotated: Vec<ComplexMatrix> = ops.iter().map(|m| self.decomposition.to_eigenbasis(m)).collect();
        let spectrum = self.decomposition.eigenvalues.clone();
        let n = spectrum.len();
        let shape = vec![n; labels.len() - 1];
        let coefficients = Tensor::from_fn(shape, |k| string_product(&rotated, k));
        ResidueTensor::new(
            self.system.kind(),
            labels.iter().map(|l| l.as_ref().to_string()).collect(),
            spectrum,
            coefficients,
        )
    }
}

/// `M_N[1, k_{N−1}] · M_{N−1}[k_{N−1}, k_{N−2}] ⋯ M_1[k_1, 1]` with the
/// matrices in site order and index 0 the stationary mode.
pub(crate) fn string_product(rotated: &[ComplexMatrix], k: &[usize]) -> Complex64 {
    let n = rotated.len();
    let mut acc = rotated[0][(k[0], 0)];
    for i in 1..n - 1 {
        acc *= rotated[i][(k[i], k[i - 1])];
    }
    acc * rotated[n - 1][(0, k[n - 2])]
}

fn check_gap_count(operators: usize, gaps: usize) -> Result<()> {
    if gaps + 1 != operators {
        return Err(Error::ShapeMismatch(format!("{operators} operators need {} gaps, got {gaps}", operators - 1)));
    }
    Ok(())
}

pub fn npoint_mps<S: AsRef<str>>(system: &TransferSystem, labels: &[S], gaps: &[usize]) -> Result<Complex64> {
    Contractor::new(system)?.npoint_discrete(labels, gaps)
}

pub fn npoint_cmps<S: AsRef<str>>(system: &TransferSystem, labels: &[S], taus: &[f64]) -> Result<Complex64> {
    Contractor::new(system)?.npoint_continuous(labels, taus)
}

pub fn build_table<S: AsRef<str>>(system: &TransferSystem, labels: &[S], window: Window) -> Result<CorrelationTable> {
    Contractor::new(system)?.table(labels, window)
}

pub fn residue_tensor<S: AsRef<str>>(system: &TransferSystem, labels: &[S]) -> Result<ResidueTensor> {
    Contractor::new(system)?.residue_tensor(labels)
}

fn check_kind(rt: &ResidueTensor, kind: SystemKind) -> Result<()> {
    if rt.kind != kind {
        return Err(Error::KindMismatch(format!("residue tensor is {}", rt.kind.as_str())));
    }
    Ok(())
}

/// `Σ_k c(k) / Π_i (1 − μ_{k_i} s_i)`.
pub fn z_transform_analytic(rt: &ResidueTensor, s: &[Complex64]) -> Result<Complex64> {
    check_kind(rt, SystemKind::Discrete)?;
    rt.check_arity(s.len())?;
    let weights = s
        .iter()
        .map(|&si| {
            rt.spectrum
                .iter()
                .map(|&mu| {
                    let denom = Complex64::new(1.0, 0.0) - mu * si;
                    if denom.norm() <= POLE_PROXIMITY * (1.0 + (mu * si).norm()) {
                        Err(Error::PoleProximity { distance: denom.norm() })
                    } else {
                        Ok(Complex64::new(1.0, 0.0) / denom)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    rt.contract(&weights)
}

/// `∫ d^{N−1}τ e^{−s·τ} C(τ) = Σ_k c(k) / Π_i (s_i − λ_{k_i})`.
pub fn laplace_analytic(rt: &ResidueTensor, s: &[Complex64]) -> Result<Complex64> {
    check_kind(rt, SystemKind::Continuous)?;
    rt.check_arity(s.len())?;
    let weights = s
        .iter()
        .map(|&si| {
            rt.spectrum
                .iter()
                .map(|&lambda| {
                    let denom = si - lambda;
                    if denom.norm() <= POLE_PROXIMITY * (1.0 + si.norm()) {
                        Err(Error::PoleProximity { distance: denom.norm() })
                    } else {
                        Ok(Complex64::new(1.0, 0.0) / denom)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    rt.contract(&weights)
}
