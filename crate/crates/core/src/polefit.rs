//! Pole and residue recovery from sampled correlation data, and the
//! p-number certificate of genericity.
//!
//! Poles come from a matrix pencil (shift-invariance of the Hankel signal
//! subspace); residues from a separable least-squares solve against the
//! generalized Vandermonde matrix of each axis.

use num_complex::Complex64;

use crate::correlators::{CorrelationTable, ResidueTensor, Window};
use crate::error::{Error, Result};
use crate::spectral::{self, eig_with_tol, min_pairwise_gap, sort_permutation, ComplexMatrix};
use crate::states::SystemKind;
use crate::tensor::Tensor;
use crate::Tolerances;

/// Modulus excess over one tolerated before lattice data count as unnormalized.
pub const INCONSISTENCY_TOL: f64 = 1e-6;
/// Phase margin from ±π below which continuum poles are branch-ambiguous.
pub const ALIASING_MARGIN: f64 = 0.1;
/// Minimum pairwise pole distance accepted by the residue fit.
pub const POLE_DISTINCTNESS: f64 = 1e-6;
/// Column-normalized Vandermonde condition number accepted by the residue fit.
pub const VANDERMONDE_CONDITION_LIMIT: f64 = 1e10;
/// Relative distance under which estimates from different tables are merged.
pub const MERGE_TOL: f64 = 1e-6;
/// Sample step of the pilot table used by [`choose_step`].
pub const PILOT_STEP: f64 = 0.05;

/// Smallest `n_max` (lattice) or point count minus one (continuum) accepted
/// for `d²` modes.
pub fn min_window(d: usize) -> usize {
    4 * d * d
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoleSet {
    pub kind: SystemKind,
    /// `μ` (lattice) or `λ` (continuum), in the spectral order of `kind`.
    pub poles: Vec<Complex64>,
    /// Per pole: relative pencil margin divided by the eigenvalue condition number.
    pub confidence: Vec<f64>,
    /// Index of the stationary pole (`|μ| = 1` or `λ = 0`) when visible.
    pub leading: Option<usize>,
    /// Fewer than `d²` modes were visible.
    pub rank_deficient: bool,
    pub requested: usize,
    /// Singular values of the stacked Hankel matrix, descending.
    pub singular_values: Vec<f64>,
    pub window: Window,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn min_confidence(&self) -> f64 {
        self.confidence.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Pencil {
    /// Shift eigenvalues `ρ_k`, unsorted.
    values: Vec<Complex64>,
    confidence: Vec<f64>,
    singular_values: Vec<f64>,
}

/// Matrix pencil on the sample columns of `signal` (rows = sample index).
fn pencil(signal: &ComplexMatrix, max_modes: usize, rank_tol: f64) -> Result<Pencil> {
    let samples = signal.nrows();
    // A basis of the column space carries the same Hankel signal subspace.
    let basis = if signal.ncols() > 1 {
        let svd = spectral::svd(signal)?;
        let u = svd.u;
        let top = svd.singular_values[0];
        let keep = svd
            .singular_values
            .iter()
            .take_while(|&&s| s > f64::EPSILON * top && s > 0.0)
            .count();
        let mut b = u.columns(0, keep).into_owned();
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= Complex64::new(svd.singular_values[j], 0.0);
        }
        b
    } else {
        signal.clone()
    };

    let rows = samples / 2;
    let width = samples - rows + 1;
    let mut hankel = ComplexMatrix::zeros(rows, width * basis.ncols().max(1));
    for (c, col) in basis.column_iter().enumerate() {
        for i in 0..rows {
            for j in 0..width {
                hankel[(i, c * width + j)] = col[i + j];
            }
        }
    }
    let svd = spectral::svd(&hankel)?;
    let singular_values = svd.singular_values;
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 || basis.ncols() == 0 {
        return Ok(Pencil { values: vec![], confidence: vec![], singular_values });
    }
    let rank = singular_values
        .iter()
        .take_while(|&&s| s > rank_tol * top)
        .count()
        .min(max_modes)
        .min(rows - 1);
    let us = svd.u.columns(0, rank);
    let up = us.rows(0, rows - 1).into_owned();
    let down = us.rows(1, rows - 1).into_owned();
    let phi = spectral::pseudo_inverse(&up, 0.0)? * down;
    let sd = eig_with_tol(&phi, spectral::SpectralOrder::ByModulusDesc, 0.0)?;
    let margin = singular_values[rank - 1] / top;
    let confidence = (0..rank)
        .map(|k| margin / (sd.left.row(k).norm() * sd.right.column(k).norm()).max(1.0))
        .collect();
    Ok(Pencil { values: sd.eigenvalues, confidence, singular_values })
}

fn finish(
    kind: SystemKind,
    pencil: Pencil,
    step: Option<f64>,
    requested: usize,
    window: Window,
) -> Result<PoleSet> {
    let mut poles = Vec::with_capacity(pencil.values.len());
    for &rho in &pencil.values {
        if rho.norm() > 1.0 + INCONSISTENCY_TOL {
            return Err(Error::Inconsistent(format!("recovered shift |{rho}| = {} exceeds one", rho.norm())));
        }
        match step {
            None => poles.push(rho),
            Some(dt) => {
                let phase = rho.arg();
                if phase.abs() >= std::f64::consts::PI - ALIASING_MARGIN {
                    return Err(Error::AliasingRisk { phase });
                }
                poles.push(rho.ln() / dt);
            }
        }
    }
    let perm = sort_permutation(&poles, kind.spectral_order());
    let poles: Vec<Complex64> = perm.iter().map(|&i| poles[i]).collect();
    let confidence: Vec<f64> = perm.iter().map(|&i| pencil.confidence[i]).collect();
    let leading = poles.first().and_then(|&z| {
        let off = match kind {
            SystemKind::Discrete => (z.norm() - 1.0).abs(),
            SystemKind::Continuous => z.norm() * step.unwrap_or(1.0),
        };
        (off <= INCONSISTENCY_TOL).then_some(0)
    });
    Ok(PoleSet {
        kind,
        rank_deficient: poles.len() < requested,
        poles,
        confidence,
        leading,
        requested,
        singular_values: pencil.singular_values,
        window,
    })
}

fn check_window(samples: usize, d: usize) -> Result<()> {
    let required = min_window(d) + 1;
    if d == 0 || samples < required {
        return Err(Error::WindowTooShort { samples, required });
    }
    Ok(())
}

/// Poles `μ_k` of a lattice sequence `C(0), …, C(n_max)` generated by at
/// most `d²` geometric modes.
pub fn extract_poles_discrete(samples: &[Complex64], d: usize) -> Result<PoleSet> {
    extract_poles_discrete_with(samples, d, Tolerances::default().rank)
}

pub fn extract_poles_discrete_with(samples: &[Complex64], d: usize, rank_tol: f64) -> Result<PoleSet> {
    check_window(samples.len(), d)?;
    let signal = ComplexMatrix::from_column_slice(samples.len(), 1, samples);
    let p = pencil(&signal, d * d, rank_tol)?;
    finish(SystemKind::Discrete, p, None, d * d, Window::Discrete { n_max: samples.len() - 1 })
}

/// Poles `λ_k` of a continuum sequence sampled at `τ_m = (m + 1)·step`.
pub fn extract_poles_continuous(samples: &[Complex64], step: f64, d: usize) -> Result<PoleSet> {
    extract_poles_continuous_with(samples, step, d, Tolerances::default().rank)
}

pub fn extract_poles_continuous_with(samples: &[Complex64], step: f64, d: usize, rank_tol: f64) -> Result<PoleSet> {
    let window = Window::Continuous { step, points: samples.len() };
    window.validate()?;
    check_window(samples.len(), d)?;
    let signal = ComplexMatrix::from_column_slice(samples.len(), 1, samples);
    let p = pencil(&signal, d * d, rank_tol)?;
    finish(SystemKind::Continuous, p, Some(step), d * d, window)
}

/// Poles visible anywhere in a table: the pencil runs on the columns of
/// every axis unfolding at once.
pub fn extract_poles_table(table: &CorrelationTable, d: usize, rank_tol: f64) -> Result<PoleSet> {
    check_window(table.window.samples(), d)?;
    let unfoldings: Vec<ComplexMatrix> = (0..table.values.rank()).map(|a| table.values.unfold(a)).collect();
    let cols: usize = unfoldings.iter().map(|u| u.ncols()).sum();
    let mut signal = ComplexMatrix::zeros(table.window.samples(), cols);
    let mut at = 0;
    for u in &unfoldings {
        signal.columns_mut(at, u.ncols()).copy_from(u);
        at += u.ncols();
    }
    let p = pencil(&signal, d * d, rank_tol)?;
    let step = match table.window {
        Window::Discrete { .. } => None,
        Window::Continuous { step, .. } => Some(step),
    };
    finish(table.kind(), p, step, d * d, table.window)
}

/// Pilot-based continuum step: `1 / max|λ|` from a pencil on samples taken
/// at [`PILOT_STEP`], so that `|Im λ|·step ≤ 1` for every recovered pole.
pub fn choose_step(pilot: &[Complex64], d: usize) -> Result<f64> {
    let poles = extract_poles_continuous(pilot, PILOT_STEP, d)?;
    let fastest = poles.poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(if fastest > 0.0 { 1.0 / fastest } else { PILOT_STEP })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidueFit {
    pub tensor: ResidueTensor,
    /// `max |table − reassembled| / max |table|`.
    pub residual: f64,
    /// Condition number of the column-normalized Vandermonde matrix.
    pub condition: f64,
    /// Indices with `|c| < tol · max |c|`.
    pub structural_zeros: Vec<Vec<usize>>,
}

pub fn extract_residues(table: &CorrelationTable, poles: &PoleSet) -> Result<ResidueFit> {
    if poles.kind != table.kind() {
        return Err(Error::KindMismatch("pole set and table differ in kind".into()));
    }
    fit_residues(table, &poles.poles, Tolerances::default().structural_zero)
}

/// Least-squares coefficients of `table` on the given poles, one
/// pseudo-inverse per axis.
pub fn fit_residues(table: &CorrelationTable, poles: &[Complex64], tol_zero: f64) -> Result<ResidueFit> {
    if poles.is_empty() {
        return Err(Error::ShapeMismatch("no poles to fit".into()));
    }
    let gap = min_pairwise_gap(poles);
    if gap <= POLE_DISTINCTNESS {
        return Err(Error::PolesNotDistinct(gap));
    }
    let samples = table.window.samples();
    if samples < poles.len() {
        return Err(Error::ShapeMismatch(format!("{samples} samples per axis cannot fit {} poles", poles.len())));
    }
    let v = table.window.vandermonde(poles);
    let norms: Vec<f64> = v.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let mut vn = v.clone();
    for (j, mut col) in vn.column_iter_mut().enumerate() {
        col /= Complex64::new(norms[j], 0.0);
    }
    let condition = spectral::condition_number(&vn);
    if !(condition <= VANDERMONDE_CONDITION_LIMIT) {
        return Err(Error::IllConditioned(condition));
    }
    let mut pinv = spectral::pseudo_inverse(&vn, 0.0)?;
    for (j, mut row) in pinv.row_iter_mut().enumerate() {
        row /= Complex64::new(norms[j], 0.0);
    }
    let mut c = table.values.clone();
    for axis in 0..c.rank() {
        c = c.mode_product(axis, &pinv)?;
    }
    let tensor = ResidueTensor::new(table.kind(), table.labels.clone(), poles.to_vec(), c)?;
    let refit = tensor.reassemble(table.window)?;
    let scale = table.values.max_abs();
    let diff = refit
        .values
        .data()
        .iter()
        .zip(table.values.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let residual = if scale > 0.0 { diff / scale } else { diff };
    let cut = tol_zero * tensor.coefficients.max_abs();
    let structural_zeros = tensor
        .coefficients
        .indices()
        .filter(|k| tensor.coefficients.get(k).norm() < cut || cut == 0.0)
        .collect();
    Ok(ResidueFit { tensor, residual, condition, structural_zeros })
}

/// A correlator exhibiting a pole: the table order and labels, the axis on
/// which the pole index sits, and the largest residue magnitude there.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub order: usize,
    pub labels: Vec<String>,
    pub axis: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PNumberCertificate {
    pub kind: SystemKind,
    pub bond_dim: usize,
    /// Number of gaps of the smallest correlator set witnessing all `d²`
    /// poles; `None` if the supplied tables never do.
    pub p: Option<usize>,
    /// Union of recovered poles in spectral order.
    pub poles: Vec<Complex64>,
    pub confidence: Vec<f64>,
    /// Selected witness per pole (lowest order, then largest magnitude).
    pub witnesses: Vec<Option<Witness>>,
    /// `d²` minus the number of witnessed poles.
    pub missing: usize,
}

impl PNumberCertificate {
    pub fn witnessed(&self) -> usize {
        self.witnesses.iter().filter(|w| w.is_some()).count()
    }

    /// Largest correlator order (point count) reconstruction may consult.
    pub fn order_bound(&self) -> Option<usize> {
        self.p.map(|p| 2 * (p + 1) - 1)
    }
}

fn nearest(poles: &[Complex64], z: Complex64) -> Option<usize> {
    poles
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - z).norm()))
        .filter(|&(_, dist)| dist <= MERGE_TOL * z.norm().max(1.0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

pub fn p_number(tables: &[CorrelationTable], d: usize) -> Result<PNumberCertificate> {
    p_number_with(tables, d, &Tolerances::default())
}

/// Smallest correlator order at which every pole is witnessed by a residue
/// above `tol.structural_zero · max|c|` on some axis of some table.
pub fn p_number_with(tables: &[CorrelationTable], d: usize, tol: &Tolerances) -> Result<PNumberCertificate> {
    let kind = tables
        .first()
        .map(CorrelationTable::kind)
        .ok_or_else(|| Error::ShapeMismatch("no tables supplied".into()))?;
    if tables.iter().any(|t| t.kind() != kind) {
        return Err(Error::KindMismatch("tables mix lattice and continuum data".into()));
    }
    let mut ordered: Vec<&CorrelationTable> = tables.iter().collect();
    ordered.sort_by_key(|t| t.order());

    let mut per_table = Vec::with_capacity(ordered.len());
    let mut union: Vec<Complex64> = Vec::new();
    let mut union_conf: Vec<f64> = Vec::new();
    for table in &ordered {
        let set = extract_poles_table(table, d, tol.rank)?;
        for (&z, &conf) in set.poles.iter().zip(&set.confidence) {
            match nearest(&union, z) {
                Some(i) if conf > union_conf[i] => {
                    union[i] = z;
                    union_conf[i] = conf;
                }
                Some(_) => {}
                None => {
                    union.push(z);
                    union_conf.push(conf);
                }
            }
        }
        per_table.push(set);
    }
    let perm = sort_permutation(&union, kind.spectral_order());
    let poles: Vec<Complex64> = perm.iter().map(|&i| union[i]).collect();
    let confidence: Vec<f64> = perm.iter().map(|&i| union_conf[i]).collect();

    let mut witnesses: Vec<Option<Witness>> = vec![None; poles.len()];
    let mut first_complete = None;
    for (table, set) in ordered.iter().zip(&per_table) {
        if !set.poles.is_empty() {
            let fit = fit_residues(table, &set.poles, tol.structural_zero)?;
            let c = &fit.tensor.coefficients;
            let cut = tol.structural_zero * c.max_abs();
            for (local, &z) in set.poles.iter().enumerate() {
                let Some(k) = nearest(&poles, z) else { continue };
                for axis in 0..c.rank() {
                    let magnitude = c
                        .indices()
                        .filter(|idx| idx[axis] == local)
                        .map(|idx| c.get(&idx).norm())
                        .fold(0.0, f64::max);
                    if magnitude <= cut || magnitude == 0.0 {
                        continue;
                    }
                    let better = match &witnesses[k] {
                        None => true,
                        Some(w) => w.order == table.order() && magnitude > w.magnitude,
                    };
                    if better {
                        witnesses[k] = Some(Witness {
                            order: table.order(),
                            labels: table.labels.clone(),
                            axis,
                            magnitude,
                        });
                    }
                }
            }
        }
        let seen = witnesses.iter().filter(|w| w.is_some()).count();
        if first_complete.is_none() && seen >= d * d {
            first_complete = Some(table.order());
        }
    }
    let witnessed = witnesses.iter().filter(|w| w.is_some()).count();
    Ok(PNumberCertificate {
        kind,
        bond_dim: d,
        p: first_complete.map(|order| order - 1),
        poles,
        confidence,
        witnesses,
        missing: (d * d).saturating_sub(witnessed),
    })
}

/// Uniform noise of amplitude `eps` on both components of every sample.
pub fn perturb(values: &Tensor, eps: f64, seed: u64) -> Tensor {
    use rand::Rng;
    let mut rng = crate::states::seeded_rng(seed, 1 << 41);
    let data = values
        .data()
        .iter()
        .map(|z| z + Complex64::new(rng.random_range(-eps..=eps), rng.random_range(-eps..=eps)))
        .collect();
    Tensor::new(values.shape().to_vec(), data).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{build_table, residue_tensor, Contractor};
    use crate::spectral::testing::c;
    use crate::states::{random_generic_cmps, random_generic_mps, random_hermitian_operator, TransferSystem};

    fn seq(n: usize, f: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn constant_sequence_has_the_unit_pole() {
        let set = extract_poles_discrete(&[c(1.0, 0.0); 5], 1).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set.poles[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(set.leading, Some(0));
        assert!(matches!(extract_poles_discrete(&[c(1.0, 0.0); 4], 1), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn two_modes_with_four_requested() {
        let s = seq(17, |n| c(2.0 * 0.5f64.powi(n as i32) + 1.0, 0.0));
        let set = extract_poles_discrete(&s, 2).unwrap();
        assert!(set.rank_deficient);
        assert_eq!(set.len(), 2);
        assert!((set.poles[0] - c(1.0, 0.0)).norm() < 1e-10);
        assert!((set.poles[1] - c(0.5, 0.0)).norm() < 1e-10);
        let growing = seq(17, |n| c(1.1f64.powi(n as i32), 0.0));
        assert!(matches!(extract_poles_discrete(&growing, 2), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn seeded_two_point_poles_match_spectrum() {
        let state = random_generic_mps(42, 2, 2).unwrap();
        let [sx, _, _] = crate::states::pauli();
        let sys = TransferSystem::from_mps(&state, [("x", &sx)]).unwrap();
        let table = build_table(&sys, &["x", "x"], Window::Discrete { n_max: 64 }).unwrap();
        let set = extract_poles_discrete(table.series().unwrap(), 2).unwrap();
        let exact = sys.decompose(1e-8).unwrap().eigenvalues;
        assert_eq!(set.len(), 4);
        for (a, b) in set.poles.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn continuum_examples() {
        let s = seq(20, |m| c((-(m as f64 + 1.0) * 0.1).exp(), 0.0));
        let set = extract_poles_continuous(&s, 0.1, 1).unwrap();
        assert!((set.poles[0] - c(-1.0, 0.0)).norm() < 1e-8);

        let lam = c(-1.0, -5.0);
        let f = |dt: f64| seq(17, move |m| c(1.0, 0.0) + (lam * ((m + 1) as f64 * dt)).exp());
        let ok = extract_poles_continuous(&f(0.5), 0.5, 2).unwrap();
        assert!((ok.poles[0]).norm() < 1e-8);
        assert!((ok.poles[1] - lam).norm() < 1e-8);
        assert!(matches!(extract_poles_continuous(&f(0.62), 0.62, 2), Err(Error::AliasingRisk { .. })));
    }

    #[test]
    fn seeded_lindblad_poles_with_pilot_step() {
        let sys = TransferSystem::from_cmps(&random_generic_cmps(5, 2).unwrap()).unwrap();
        let labels = ["density", "density"];
        let pilot = build_table(&sys, &labels, Window::Continuous { step: PILOT_STEP, points: 64 }).unwrap();
        let step = choose_step(pilot.series().unwrap(), 2).unwrap();
        let table = build_table(&sys, &labels, Window::Continuous { step, points: 64 }).unwrap();
        let set = extract_poles_continuous(table.series().unwrap(), step, 2).unwrap();
        let exact = sys.decompose(1e-8).unwrap().eigenvalues;
        assert_eq!(set.len(), 4);
        for (a, b) in set.poles.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn residue_examples() {
        let s = seq(9, |n| c(3.0 * 0.5f64.powi(n as i32) + 2.0, 0.0));
        let table = CorrelationTable::new(
            vec!["a".into(), "a".into()],
            Window::Discrete { n_max: 8 },
            Tensor::new(vec![9], s).unwrap(),
        )
        .unwrap();
        let fit = fit_residues(&table, &[c(1.0, 0.0), c(0.5, 0.0)], 1e-10).unwrap();
        assert!((fit.tensor.get(&[0]) - c(2.0, 0.0)).norm() < 1e-12);
        assert!((fit.tensor.get(&[1]) - c(3.0, 0.0)).norm() < 1e-12);
        assert!(fit.residual < 1e-14);

        let flat = CorrelationTable::new(
            vec!["a".into(), "a".into()],
            Window::Discrete { n_max: 4 },
            Tensor::new(vec![5], vec![c(0.7, 0.2); 5]).unwrap(),
        )
        .unwrap();
        let fit = fit_residues(&flat, &[c(1.0, 0.0)], 1e-10).unwrap();
        assert!((fit.tensor.get(&[0]) - c(0.7, 0.2)).norm() < 1e-14);

        assert!(matches!(
            fit_residues(&table, &[c(1.0, 0.0), c(1.0, 1e-9)], 1e-10),
            Err(Error::PolesNotDistinct(_))
        ));
    }

    #[test]
    fn seeded_three_point_residues_match_known_state() {
        let sys = TransferSystem::from_mps(&random_generic_mps(42, 2, 2).unwrap(), [("o", &random_hermitian_operator(42, 2))])
            .unwrap();
        let labels = ["o", "o", "o"];
        let table = build_table(&sys, &labels, Window::Discrete { n_max: 32 }).unwrap();
        let poles = extract_poles_table(&table, 2, 1e-10).unwrap();
        let fit = extract_residues(&table, &poles).unwrap();
        let exact = residue_tensor(&sys, &labels).unwrap();
        for k in exact.coefficients.indices() {
            let (a, b) = (fit.tensor.get(&k), exact.get(&k));
            assert!((a - b).norm() < 1e-8 * exact.coefficients.max_abs(), "{k:?}: {a} vs {b}");
        }
        assert!(fit.structural_zeros.is_empty());
    }

    fn generic_tables(seed: u64, d: usize) -> (TransferSystem, Vec<CorrelationTable>) {
        let sys = TransferSystem::from_mps(
            &random_generic_mps(seed, d, 2).unwrap(),
            [("o", &random_hermitian_operator(seed, 2))],
        )
        .unwrap();
        let w = Window::Discrete { n_max: 4 * d * d + 4 };
        let tables = vec![
            build_table(&sys, &["o", "o"], w).unwrap(),
            build_table(&sys, &["o", "o", "o"], w).unwrap(),
        ];
        (sys, tables)
    }

    #[test]
    fn generic_state_certifies_p_one() {
        let (_, tables) = generic_tables(42, 2);
        let cert = p_number(&tables[..1], 2).unwrap();
        assert_eq!(cert.p, Some(1));
        assert_eq!(cert.missing, 0);
        assert!(cert.witnesses.iter().all(|w| w.as_ref().unwrap().order == 2));
        assert_eq!(cert.order_bound(), Some(3));
    }

    #[test]
    fn one_dimensional_state_certifies_p_one() {
        let (_, tables) = generic_tables(3, 1);
        let cert = p_number(&tables, 1).unwrap();
        assert_eq!(cert.p, Some(1));
        assert_eq!(cert.poles.len(), 1);
    }

    #[test]
    fn identity_table_alone_leaves_p_infinite() {
        let (sys, _) = generic_tables(42, 2);
        let t = build_table(&sys, &["identity", "identity"], Window::Discrete { n_max: 20 }).unwrap();
        let cert = p_number(&[t], 2).unwrap();
        assert_eq!(cert.p, None);
        assert_eq!(cert.missing, 3);
    }

    /// Re-gauged operator whose eigenbasis element `⟨k*|M|1⟩` vanishes.
    #[test]
    fn zeroed_entry_gives_p_two() {
        let (sys, _) = generic_tables(42, 2);
        let con = Contractor::new(&sys).unwrap();
        let sd = con.decomposition();
        let mut m = sd.to_eigenbasis(sys.operator("o").unwrap());
        m[(2, 0)] = c(0.0, 0.0);
        let back = &sd.right * m * &sd.left;
        let target = sd.eigenvalues[2];
        drop(con);
        let sys = sys.with_operator("z", back).unwrap();
        let w = Window::Discrete { n_max: 20 };
        let t2 = build_table(&sys, &["z", "z"], w).unwrap();
        let t3 = build_table(&sys, &["z", "z", "z"], w).unwrap();
        let c2 = residue_tensor(&sys, &["z", "z"]).unwrap();
        assert!(c2.get(&[2]).norm() < 1e-12);
        let only2 = p_number(std::slice::from_ref(&t2), 2).unwrap();
        assert_eq!(only2.p, None);
        assert_eq!(only2.missing, 1);
        let cert = p_number(&[t2, t3], 2).unwrap();
        assert_eq!(cert.p, Some(2));
        let k = cert.poles.iter().position(|z| (z - target).norm() < 1e-6).unwrap();
        let w = cert.witnesses[k].as_ref().unwrap();
        assert_eq!((w.order, w.axis), (3, 1));
    }

    #[test]
    fn noise_moves_confident_poles_little() {
        let (sys, tables) = generic_tables(11, 2);
        let _ = sys;
        let clean = extract_poles_discrete(tables[0].series().unwrap(), 2).unwrap();
        let noisy_values = perturb(&tables[0].values, 1e-8, 11);
        let noisy = extract_poles_discrete(noisy_values.data(), 2).unwrap();
        if clean.min_confidence() > 1e-3 {
            for z in &clean.poles {
                let drift = noisy.poles.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
                assert!(drift < 1e-5);
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]

        #[test]
        fn adding_tables_never_increases_p(seed in 0u64..500, take in 1usize..3) {
            let (sys, mut tables) = generic_tables(seed, 2);
            let w = Window::Discrete { n_max: 20 };
            tables.push(build_table(&sys, &["identity", "identity"], w).unwrap());
            let sub = p_number(&tables[tables.len() - take..], 2).unwrap();
            let all = p_number(&tables, 2).unwrap();
            let rank = |p: Option<usize>| p.unwrap_or(usize::MAX);
            proptest::prop_assert!(rank(all.p) <= rank(sub.p));
        }
    }
}
