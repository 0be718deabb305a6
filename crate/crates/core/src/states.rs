//! Translation-invariant MPS and cMPS in the thermodynamic limit.
//!
//! A state enters correlation functions only through its transfer matrix `E`
//! (resp. Liouvillian `T`) and the operator matrices `M^[j]`, collected in a
//! [`TransferSystem`]. Gauge transforms act on that system.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{self, LindbladSpec};
use crate::error::{Error, Result};
use crate::spectral::{
    self, ensure_finite, kron, ComplexMatrix, GenericityReport, SpectralDecomposition, SpectralOrder,
};

const MAX_GENERATION_ATTEMPTS: usize = 100;
const ZERO_STATE_RADIUS: f64 = 1e-300;
const IMAGINARY_LEADING_TOL: f64 = 1e-10;

pub const IDENTITY_LABEL: &str = "identity";

#[derive(Clone, Debug, PartialEq)]
pub struct MpsState {
    tensors: Vec<ComplexMatrix>,
}

impl MpsState {
    pub fn new(tensors: Vec<ComplexMatrix>) -> Result<Self> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::DimensionMismatch("MPS needs at least one tensor".into()))?;
        let d = first.nrows();
        if d == 0 {
            return Err(Error::DimensionMismatch("bond dimension must be positive".into()));
        }
        for a in &tensors {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "all tensors must be {d}x{d}, found {}x{}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            ensure_finite(a, "MPS tensor")?;
        }
        Ok(Self { tensors })
    }

    pub fn bond_dim(&self) -> usize {
        self.tensors[0].nrows()
    }

    pub fn phys_dim(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[ComplexMatrix] {
        &self.tensors
    }

    /// `E = Σ_s A*[s] ⊗ A[s]`.
    pub fn transfer_matrix(&self) -> ComplexMatrix {
        let d2 = self.bond_dim().pow(2);
        self.tensors
            .iter()
            .fold(ComplexMatrix::zeros(d2, d2), |acc, a| acc + kron(&a.conjugate(), a))
    }

    /// `M = Σ_{m,n} A*[m] ⊗ A[n] ⟨m|O|n⟩`.
    pub fn operator_matrix(&self, op: &ComplexMatrix, label: &str) -> Result<OperatorMatrix> {
        let q = self.phys_dim();
        if op.nrows() != q || op.ncols() != q {
            return Err(Error::DimensionMismatch(format!(
                "operator must be {q}x{q}, got {}x{}",
                op.nrows(),
                op.ncols()
            )));
        }
        ensure_finite(op, "local operator")?;
        let d2 = self.bond_dim().pow(2);
        let mut m = ComplexMatrix::zeros(d2, d2);
        for (a, am) in self.tensors.iter().enumerate() {
            let conj = am.conjugate();
            for (b, an) in self.tensors.iter().enumerate() {
                let w = op[(a, b)];
                if w != Complex64::new(0.0, 0.0) {
                    m += kron(&conj, an) * w;
                }
            }
        }
        Ok(OperatorMatrix { label: label.to_string(), matrix: m, kind: OperatorKind::DiscreteLocalOp })
    }

    fn scaled(&self, factor: Complex64) -> Self {
        Self { tensors: self.tensors.iter().map(|a| a * factor).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmpsState {
    q: ComplexMatrix,
    r: ComplexMatrix,
}

impl CmpsState {
    pub fn new(q: ComplexMatrix, r: ComplexMatrix) -> Result<Self> {
        let d = q.nrows();
        if d == 0 || q.ncols() != d || r.nrows() != d || r.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Q and R must be square of equal size, got {}x{} and {}x{}",
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        ensure_finite(&q, "Q")?;
        ensure_finite(&r, "R")?;
        Ok(Self { q, r })
    }

    pub fn bond_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &ComplexMatrix {
        &self.q
    }

    pub fn r(&self) -> &ComplexMatrix {
        &self.r
    }

    /// `T = Q* ⊗ 1 + 1 ⊗ Q + R* ⊗ R`.
    pub fn liouvillian(&self) -> ComplexMatrix {
        let id = ComplexMatrix::identity(self.bond_dim(), self.bond_dim());
        kron(&self.q.conjugate(), &id) + kron(&id, &self.q) + kron(&self.r.conjugate(), &self.r)
    }

    pub fn operator_matrix(&self, kind: OperatorKind) -> Result<OperatorMatrix> {
        let id = ComplexMatrix::identity(self.bond_dim(), self.bond_dim());
        let matrix = match kind {
            OperatorKind::CmpsPsiDagger => kron(&self.r.conjugate(), &id),
            OperatorKind::CmpsPsi => kron(&id, &self.r),
            OperatorKind::CmpsDensity => kron(&self.r.conjugate(), &self.r),
            other => return Err(Error::UnknownKind(other.to_string())),
        };
        Ok(OperatorMatrix { label: kind.to_string(), matrix, kind })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    DiscreteLocalOp,
    CmpsPsiDagger,
    CmpsPsi,
    CmpsDensity,
    CmpsCustom,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::DiscreteLocalOp => "local",
            OperatorKind::CmpsPsiDagger => "psi_dagger",
            OperatorKind::CmpsPsi => "psi",
            OperatorKind::CmpsDensity => "density",
            OperatorKind::CmpsCustom => "custom",
        })
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(OperatorKind::DiscreteLocalOp),
            "psi_dagger" => Ok(OperatorKind::CmpsPsiDagger),
            "psi" => Ok(OperatorKind::CmpsPsi),
            "density" => Ok(OperatorKind::CmpsDensity),
            "custom" => Ok(OperatorKind::CmpsCustom),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub label: String,
    pub matrix: ComplexMatrix,
    pub kind: OperatorKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// Lattice MPS: generator is the transfer matrix `E`.
    Discrete,
    /// cMPS: generator is the Liouvillian `T`.
    Continuous,
}

impl SystemKind {
    pub fn spectral_order(self) -> SpectralOrder {
        match self {
            SystemKind::Discrete => SpectralOrder::ByModulusDesc,
            SystemKind::Continuous => SpectralOrder::ByRealPartDesc,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Discrete => "discrete",
            SystemKind::Continuous => "continuous",
        }
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" | "mps" => Ok(SystemKind::Discrete),
            "continuous" | "cmps" => Ok(SystemKind::Continuous),
            other => Err(Error::KindMismatch(format!("unknown system kind `{other}`"))),
        }
    }
}

/// Generator (`E` or `T`) together with labelled operator matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSystem {
    kind: SystemKind,
    generator: ComplexMatrix,
    operators: BTreeMap<String, ComplexMatrix>,
}

impl TransferSystem {
    pub fn new(
        kind: SystemKind,
        generator: ComplexMatrix,
        operators: BTreeMap<String, ComplexMatrix>,
    ) -> Result<Self> {
        let n = generator.nrows();
        if n == 0 || generator.ncols() != n {
            return Err(Error::DimensionMismatch("generator must be square".into()));
        }
        ensure_finite(&generator, "generator")?;
        for (label, m) in &operators {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "operator `{label}` is {}x{}, generator is {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            ensure_finite(m, "operator matrix")?;
        }
        Ok(Self { kind, generator, operators })
    }

    /// Builds the system of an MPS; the identity operator (`M = E`) is always
    /// present under [`IDENTITY_LABEL`].
    pub fn from_mps<'a>(
        state: &MpsState,
        ops: impl IntoIterator<Item = (&'a str, &'a ComplexMatrix)>,
    ) -> Result<Self> {
        let e = state.transfer_matrix();
        let mut operators = BTreeMap::new();
        operators.insert(IDENTITY_LABEL.to_string(), e.clone());
        for (label, op) in ops {
            operators.insert(label.to_string(), state.operator_matrix(op, label)?.matrix);
        }
        Self::new(SystemKind::Discrete, e, operators)
    }

    /// Builds the system of a cMPS with the field operators `psi_dagger`,
    /// `psi`, `density` and the unit insertion `identity`.
    pub fn from_cmps(state: &CmpsState) -> Result<Self> {
        let t = state.liouvillian();
        let mut operators = BTreeMap::new();
        operators.insert(IDENTITY_LABEL.to_string(), ComplexMatrix::identity(t.nrows(), t.ncols()));
        for kind in [OperatorKind::CmpsPsiDagger, OperatorKind::CmpsPsi, OperatorKind::CmpsDensity] {
            let op = state.operator_matrix(kind)?;
            operators.insert(op.label, op.matrix);
        }
        Self::new(SystemKind::Continuous, t, operators)
    }

    pub fn with_operator(mut self, label: &str, matrix: ComplexMatrix) -> Result<Self> {
        let n = self.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!("operator `{label}` has wrong size")));
        }
        ensure_finite(&matrix, "operator matrix")?;
        self.operators.insert(label.to_string(), matrix);
        Ok(self)
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    /// Auxiliary dimension `d²`.
    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn operators(&self) -> &BTreeMap<String, ComplexMatrix> {
        &self.operators
    }

    pub fn operator(&self, label: &str) -> Result<&ComplexMatrix> {
        self.operators.get(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn decompose(&self, tol_deg: f64) -> Result<SpectralDecomposition> {
        spectral::eig_with_tol(&self.generator, self.kind.spectral_order(), tol_deg)
    }

    /// Simultaneous conjugation `X · (·) · X⁻¹` of the generator and all
    /// operator matrices.
    pub fn gauge_transform(&self, x: &ComplexMatrix) -> Result<Self> {
        let inv = spectral::gauge_inverse(x, spectral::DEFAULT_GAUGE_CONDITION_LIMIT)?;
        let generator = spectral::similarity_with_inverse(&self.generator, x, &inv)?;
        let operators = self
            .operators
            .iter()
            .map(|(k, m)| Ok((k.clone(), spectral::similarity_with_inverse(m, x, &inv)?)))
            .collect::<Result<_>>()?;
        Ok(Self { kind: self.kind, generator, operators })
    }
}

/// Rescales every `A[s]` by `1/√μ₁` (principal branch) so that the leading
/// transfer-matrix eigenvalue becomes one.
pub fn normalize_mps(state: &MpsState) -> Result<MpsState> {
    let values = spectral::eigenvalues(&state.transfer_matrix(), SpectralOrder::ByModulusDesc)?;
    let leading = values[0];
    if leading.norm() < ZERO_STATE_RADIUS {
        return Err(Error::ZeroState(leading.norm()));
    }
    Ok(state.scaled(Complex64::new(1.0, 0.0) / leading.sqrt()))
}

/// Shifts `Q ↦ Q − (Re λ₁ / 2)·1` so that the leading Liouvillian eigenvalue
/// becomes zero. A leading eigenvalue with residual imaginary part cannot be
/// removed this way and is rejected.
pub fn normalize_cmps(state: &CmpsState) -> Result<CmpsState> {
    let s = spectral::eig(&state.liouvillian(), SpectralOrder::ByRealPartDesc)?;
    let leading = s.eigenvalues[0];
    let scale = 1f64.max(leading.norm());
    if leading.im.abs() > IMAGINARY_LEADING_TOL * scale {
        return Err(Error::ImaginaryLeading(leading.im));
    }
    let d = state.bond_dim();
    let shift = ComplexMatrix::identity(d, d) * Complex64::new(-0.5 * leading.re, 0.0);
    CmpsState::new(&state.q + shift, state.r.clone())
}

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix with i.i.d. standard complex Gaussian entries (unit variance).
pub fn ginibre(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

/// `(G + G†)/2` for a Ginibre `G`.
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Seeded random hermitian `n × n` operator, independent of the state streams.
pub fn random_hermitian_operator(seed: u64, n: usize) -> ComplexMatrix {
    random_hermitian(&mut seeded_rng(seed, 1 << 40), n)
}

fn generic_report(m: &ComplexMatrix, order: SpectralOrder) -> Result<GenericityReport> {
    let values = spectral::eigenvalues(m, order)?;
    Ok(GenericityReport::from_eigenvalues(&values, order, spectral::DEFAULT_DEGENERACY_TOL))
}

/// Normalized Ginibre MPS passing the genericity check. Non-generic draws are
/// redrawn from the next sub-stream of the same seed.
pub fn random_generic_mps(seed: u64, d: usize, q: usize) -> Result<MpsState> {
    if d == 0 || q < 2 {
        return Err(Error::DimensionMismatch(format!("need d ≥ 1 and q ≥ 2, got d={d}, q={q}")));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = seeded_rng(seed, attempt as u64);
        let raw = MpsState::new((0..q).map(|_| ginibre(&mut rng, d, d)).collect())?;
        let state = match normalize_mps(&raw) {
            Ok(s) => s,
            Err(Error::ZeroState(_)) => continue,
            Err(e) => return Err(e),
        };
        if generic_report(&state.transfer_matrix(), SpectralOrder::ByModulusDesc)?.passed {
            return Ok(state);
        }
    }
    Err(Error::GenericityFailure(MAX_GENERATION_ATTEMPTS))
}

/// Random Lindblad-form cMPS, `Q = iH − ½R†R`, passing the genericity check.
/// Returns the generating spec alongside the state.
pub fn random_generic_cmps_with_spec(seed: u64, d: usize) -> Result<(CmpsState, LindbladSpec)> {
    if d == 0 {
        return Err(Error::DimensionMismatch("bond dimension must be positive".into()));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = seeded_rng(seed, attempt as u64);
        let h = random_hermitian(&mut rng, d);
        let r = ginibre(&mut rng, d, d);
        let spec = LindbladSpec::new(h, vec![r])?;
        let raw = channel::q_from_hamiltonian(&spec)?;
        let state = match normalize_cmps(&raw) {
            Ok(s) => s,
            Err(Error::DegenerateSpectrum { .. }) | Err(Error::ImaginaryLeading(_)) => continue,
            Err(e) => return Err(e),
        };
        if generic_report(&state.liouvillian(), SpectralOrder::ByRealPartDesc)?.passed {
            return Ok((state, spec));
        }
    }
    Err(Error::GenericityFailure(MAX_GENERATION_ATTEMPTS))
}

pub fn random_generic_cmps(seed: u64, d: usize) -> Result<CmpsState> {
    random_generic_cmps_with_spec(seed, d).map(|(s, _)| s)
}

/// Pauli matrices `(σ_x, σ_y, σ_z)`.
pub fn pauli() -> [ComplexMatrix; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}
