//! Markovian quantum channels and their relation to cMPS.
//!
//! Density matrices are vectorized column-major, `|ρ⟩_{j·d+i} = ρ_{ij}`, which
//! is the convention under which the generator reads
//! `L = −iH*⊗1 + i1⊗H − ½Σ_j (R_jᵀR_j*⊗1 + 1⊗R_j†R_j − 2R_j*⊗R_j)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{self, ensure_finite, hermitian_eigenvalues, kron, ComplexMatrix, SpectralOrder};
use crate::states::CmpsState;

const HERMITICITY_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues within this (relative) distance of zero count as stationary.
const ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladSpec {
    hamiltonian: ComplexMatrix,
    jump_ops: Vec<ComplexMatrix>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: ComplexMatrix, jump_ops: Vec<ComplexMatrix>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d == 0 || hamiltonian.ncols() != d {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        ensure_finite(&hamiltonian, "Hamiltonian")?;
        for r in &jump_ops {
            if r.nrows() != d || r.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator is {}x{}, Hamiltonian is {d}x{d}",
                    r.nrows(),
                    r.ncols()
                )));
            }
            ensure_finite(r, "jump operator")?;
        }
        let deviation = (&hamiltonian - hamiltonian.adjoint()).norm();
        if deviation > HERMITICITY_TOL * hamiltonian.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NonHermitianH(deviation));
        }
        Ok(Self { hamiltonian, jump_ops })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> &[ComplexMatrix] {
        &self.jump_ops
    }
}

/// Generator of the channel family in vectorized form.
pub fn lindblad_generator(spec: &LindbladSpec) -> ComplexMatrix {
    let d = spec.dim();
    let id = ComplexMatrix::identity(d, d);
    let i = Complex64::new(0.0, 1.0);
    let h = &spec.hamiltonian;
    let mut l = kron(&h.conjugate(), &id) * (-i) + kron(&id, h) * i;
    for r in &spec.jump_ops {
        let rdr = r.adjoint() * r;
        let dissipator = kron(&rdr.transpose(), &id) + kron(&id, &rdr) - kron(&r.conjugate(), r) * Complex64::new(2.0, 0.0);
        l -= dissipator * Complex64::new(0.5, 0.0);
    }
    l
}

/// `Q = iH − ½R†R` for a single jump operator `R`.
pub fn q_from_hamiltonian(spec: &LindbladSpec) -> Result<CmpsState> {
    let [r] = spec.jump_ops.as_slice() else {
        return Err(Error::MultipleJumpOps(spec.jump_ops.len()));
    };
    let q = &spec.hamiltonian * Complex64::new(0.0, 1.0) - r.adjoint() * r * Complex64::new(0.5, 0.0);
    CmpsState::new(q, r.clone())
}

pub fn vectorize(rho: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(rho.len(), 1, rho.as_slice())
}

pub fn devectorize(v: &[Complex64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v)
}

/// `‖⟨1_vec| L‖`, zero for trace-preserving generators.
pub fn check_trace_preservation(l: &ComplexMatrix) -> f64 {
    let d = (l.nrows() as f64).sqrt().round() as usize;
    let id = vectorize(&ComplexMatrix::identity(d, d));
    (id.transpose() * l).norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryState {
    pub rho: ComplexMatrix,
    /// `−max Re λ` over the non-stationary eigenvalues.
    pub gap: f64,
}

/// Unique fixed point of a generic generator, hermitized and scaled to unit
/// trace.
pub fn stationary_state(l: &ComplexMatrix) -> Result<StationaryState> {
    let n = l.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || l.ncols() != n {
        return Err(Error::DimensionMismatch(format!("generator of size {n} is not d²×d²")));
    }
    let values = spectral::eigenvalues(l, SpectralOrder::ByRealPartDesc)?;
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let near_zero = values.iter().filter(|z| z.norm() <= ZERO_TOL * scale).count();
    if near_zero != 1 {
        return Err(Error::DegenerateZero(near_zero));
    }
    let gap = values
        .iter()
        .filter(|z| z.norm() > ZERO_TOL * scale)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);

    // Right null vector: singular vector of the smallest singular value.
    let svd = spectral::svd(l)?;
    let null = svd.v.column(svd.singular_values.len() - 1).into_owned();
    let raw = devectorize(null.as_slice(), d);
    let herm = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let trace = herm.trace();
    if trace.norm() < f64::EPSILON {
        return Err(Error::NonPositive(0.0));
    }
    let rho = herm / trace;
    let min_ev = hermitian_eigenvalues(&rho)[0];
    if min_ev < -POSITIVITY_TOL {
        return Err(Error::NonPositive(min_ev));
    }
    Ok(StationaryState { rho, gap })
}
