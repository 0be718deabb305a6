//! Reconstruction of a state functional from low-order correlation data and
//! prediction of every higher-order correlator from it.
//!
//! A coefficient of the N-point expansion is a closed string of eigenbasis
//! matrix elements
//!
//! ```text
//! c(k_1, …, k_{N−1}) = M^{j_N}_{1,k_{N−1}} · M^{j_{N−1}}_{k_{N−1},k_{N−2}} ⋯ M^{j_1}_{k_1,1}
//! ```
//!
//! (index `1` is the stationary mode, stored as index 0). Two routes lead from
//! low-order coefficients to arbitrary ones:
//!
//! * [`Representative`]: the matrices `M^j` themselves in the diagonal gauge
//!   `M^r_{1,k} = 1` (`k ≠ 1`), read off from two- and three-point residues.
//! * [`predict_coefficient`]: for each interior index `k_i`, a nonzero
//!   *witness* coefficient `c_w = L(k_i)·R(k_i)` is inserted as `1 = c_w/c_w`.
//!   Here `R(k)` is the part of the witness string to the right of `k`
//!   (`M_{k,⋆}⋯M_{⋆,1}`) and `L(k)` the part to its left (`M_{1,⋆}⋯M_{⋆,k}`).
//!   Regrouping the factors yields closed strings again, each a coefficient
//!   of order at most `2·(witness order) − 1`:
//!
//! ```text
//! c = [M^{j_N}_{1,k_{N−1}} R(k_{N−1})] · Π_i [L(k_{i+1}) M^{j_{i+1}}_{k_{i+1},k_i} R(k_i)] · [L(k_1) M^{j_1}_{k_1,1}]
//!     / Π_i c_w(k_i)
//! ```
//!
//! For two-point witnesses of a single operator this collapses to
//! `c^(N) = Π_{i=1}^{N−2} c^(3)(k_i, k_{i+1}) / Π_{i=2}^{N−2} c^(2)(k_i)`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::correlators::{string_product, CorrelationTable, ResidueTensor, Window};
use crate::error::{Error, Result};
use crate::polefit::{fit_residues, p_number_with, PNumberCertificate};
use crate::spectral::ComplexMatrix;
use crate::states::SystemKind;
use crate::tensor::Tensor;
use crate::Tolerances;

/// Gauge-fixed functional: spectrum plus eigenbasis operator matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Representative {
    pub kind: SystemKind,
    /// Poles in spectral order; index 0 is the stationary mode.
    pub spectrum: Vec<Complex64>,
    /// Label whose first row fixes the diagonal gauge.
    pub reference: String,
    pub matrices: BTreeMap<String, ComplexMatrix>,
}

impl Representative {
    pub fn new(
        kind: SystemKind,
        spectrum: Vec<Complex64>,
        reference: String,
        matrices: BTreeMap<String, ComplexMatrix>,
    ) -> Result<Self> {
        let n = spectrum.len();
        bond_dim_of(n)?;
        if !matrices.contains_key(&reference) {
            return Err(Error::UnknownLabel(reference));
        }
        if let Some((label, m)) = matrices.iter().find(|(_, m)| m.shape() != (n, n)) {
            return Err(Error::InconsistentShapes(format!("matrix {label} is {:?}, spectrum has {n} poles", m.shape())));
        }
        Ok(Self { kind, spectrum, reference, matrices })
    }

    pub fn bond_dim(&self) -> usize {
        bond_dim_of(self.spectrum.len()).expect("validated at construction")
    }

    pub fn matrix(&self, label: &str) -> Result<&ComplexMatrix> {
        self.matrices.get(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Coefficient tensor for operators `labels` in site order.
    pub fn residue_tensor<S: AsRef<str>>(&self, labels: &[S]) -> Result<ResidueTensor> {
        if labels.len() < 2 {
            return Err(Error::ShapeMismatch("residue tensors need order ≥ 2".into()));
        }
        let mats: Vec<ComplexMatrix> = labels.iter().map(|l| self.matrix(l.as_ref()).cloned()).collect::<Result<_>>()?;
        let n = self.spectrum.len();
        let coefficients = Tensor::from_fn(vec![n; labels.len() - 1], |k| string_product(&mats, k));
        ResidueTensor::new(
            self.kind,
            labels.iter().map(|l| l.as_ref().to_string()).collect(),
            self.spectrum.clone(),
            coefficients,
        )
    }

    pub fn predict_correlator<S: AsRef<str>>(&self, labels: &[S], gaps: &[f64]) -> Result<Complex64> {
        self.residue_tensor(labels)?.evaluate(gaps)
    }

    pub fn predict_table<S: AsRef<str>>(&self, labels: &[S], window: Window) -> Result<CorrelationTable> {
        self.residue_tensor(labels)?.reassemble(window)
    }

    /// Applies the residual gauge `M ↦ D M D⁻¹`, `D = diag(a)`.
    pub fn diagonal_gauge(&self, a: &[Complex64]) -> Result<Self> {
        if a.len() != self.spectrum.len() || a.iter().any(|z| z.norm() == 0.0) {
            return Err(Error::InconsistentShapes("gauge needs one nonzero factor per pole".into()));
        }
        let matrices = self
            .matrices
            .iter()
            .map(|(l, m)| (l.clone(), ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| a[i] * m[(i, j)] / a[j])))
            .collect();
        Ok(Self { matrices, ..self.clone() })
    }
}

fn bond_dim_of(poles: usize) -> Result<usize> {
    let d = (poles as f64).sqrt().round() as usize;
    if d == 0 || d * d != poles {
        return Err(Error::InconsistentShapes(format!("{poles} poles is not a square number")));
    }
    Ok(d)
}

fn check_compatible(a: &ResidueTensor, b: &ResidueTensor) -> Result<()> {
    if a.kind != b.kind {
        return Err(Error::KindMismatch("residue tensors differ in kind".into()));
    }
    if a.spectrum.len() != b.spectrum.len() {
        return Err(Error::InconsistentShapes(format!(
            "{} vs {} poles",
            a.spectrum.len(),
            b.spectrum.len()
        )));
    }
    let scale = a.spectrum.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if a.spectrum.iter().zip(&b.spectrum).any(|(x, y)| (x - y).norm() > 1e-9 * scale) {
        return Err(Error::InconsistentShapes("residue tensors use different spectra".into()));
    }
    Ok(())
}

fn expect_labels(t: &ResidueTensor, expected: &[&str]) -> Result<()> {
    if t.labels.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::InconsistentShapes(format!("expected labels {expected:?}, got {:?}", t.labels)));
    }
    Ok(())
}

/// Single-label reconstruction from `c^(2)` and `c^(3)` of one operator.
///
/// `M_{1,k} = 1` and `M_{k,1} = c^(2)(k)` for `k ≠ 1`; the interior is
/// `M_{a,b} = c^(3)(b, a) / c^(2)(b)` (index `b` on the first gap). The corner
/// `M_{1,1} = c^(3)(1,1)/c^(2)(1)` equals the one-point function and is not a
/// gauge degree of freedom.
pub fn reconstruct_representative(c2: &ResidueTensor, c3: &ResidueTensor, tol_zero: f64) -> Result<Representative> {
    if c2.order() != 2 || c3.order() != 3 {
        return Err(Error::InconsistentShapes(format!("expected orders 2 and 3, got {} and {}", c2.order(), c3.order())));
    }
    check_compatible(c2, c3)?;
    let r = c2.labels[0].clone();
    expect_labels(c2, &[&r, &r])?;
    expect_labels(c3, &[&r, &r, &r])?;
    let m = reference_matrix(c2, c3, tol_zero)?;
    Representative::new(c2.kind, c2.spectrum.clone(), r.clone(), BTreeMap::from([(r, m)]))
}

fn reference_matrix(c2: &ResidueTensor, c3: &ResidueTensor, tol_zero: f64) -> Result<ComplexMatrix> {
    let n = c2.poles();
    let cut = tol_zero * c2.coefficients.max_abs();
    if let Some(k) = (0..n).find(|&k| c2.get(&[k]).norm() <= cut || c2.get(&[k]).norm() == 0.0) {
        return Err(Error::ZeroCoefficient(k));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok(ComplexMatrix::from_fn(n, n, |a, b| match (a, b) {
        (0, 0) => c3.get(&[0, 0]) / c2.get(&[0]),
        (0, _) => one,
        (_, 0) => c2.get(&[a]),
        _ => c3.get(&[b, a]) / c2.get(&[b]),
    }))
}

/// Multi-label reconstruction. The reference label `r` fixes the gauge
/// through its own `c^(2)`, `c^(3)`; every other label `j` is read from the
/// mixed tensor with labels `(r, j, r)`:
/// `M^j_{k₂,k₁} = c_{(r,j,r)}(k₁, k₂) / (M^r_{1,k₂} M^r_{k₁,1})`.
pub fn reconstruct_multi(
    c2: &ResidueTensor,
    c3: &ResidueTensor,
    mixed: &[ResidueTensor],
    tol_zero: f64,
) -> Result<Representative> {
    let mut rep = reconstruct_representative(c2, c3, tol_zero)?;
    let r = rep.reference.clone();
    let mr = rep.matrix(&r)?.clone();
    let n = c2.poles();
    for t in mixed {
        check_compatible(c2, t)?;
        if t.order() != 3 || t.labels[0] != r || t.labels[2] != r {
            return Err(Error::InconsistentShapes(format!("mixed tensors need labels ({r}, j, {r}), got {:?}", t.labels)));
        }
        let m = ComplexMatrix::from_fn(n, n, |k2, k1| t.get(&[k1, k2]) / (mr[(0, k2)] * mr[(k1, 0)]));
        rep.matrices.insert(t.labels[1].clone(), m);
    }
    Ok(rep)
}

/// Outcome of the table-to-representative pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub representative: Representative,
    pub certificate: PNumberCertificate,
    /// Relative fit residual per input table (two-point, three-point, mixed…).
    pub residuals: Vec<f64>,
}

/// Certifies the tables, fits every table on the certified poles and
/// reconstructs. `two` and `three` hold the reference operator `r`; `mixed`
/// holds three-point tables with labels `(r, j, r)`.
pub fn reconstruct_from_tables(
    two: &CorrelationTable,
    three: &CorrelationTable,
    mixed: &[CorrelationTable],
    d: usize,
    tol: &Tolerances,
) -> Result<Reconstruction> {
    let certificate = p_number_with(&[two.clone(), three.clone()], d, tol)?;
    if certificate.p.is_none() || certificate.poles.len() != d * d {
        return Err(Error::InfinitePNumber(certificate.missing.max(1)));
    }
    let fit = |t: &CorrelationTable| fit_residues(t, &certificate.poles, tol.structural_zero);
    let c2 = fit(two)?;
    let c3 = fit(three)?;
    let mixed_fits = mixed.iter().map(fit).collect::<Result<Vec<_>>>()?;
    let residuals = [c2.residual, c3.residual]
        .into_iter()
        .chain(mixed_fits.iter().map(|f| f.residual))
        .collect();
    let mixed_tensors: Vec<ResidueTensor> = mixed_fits.into_iter().map(|f| f.tensor).collect();
    let representative = reconstruct_multi(&c2.tensor, &c3.tensor, &mixed_tensors, tol.structural_zero)?;
    Ok(Reconstruction { representative, certificate, residuals })
}

/// Low-order coefficient tensors keyed by their label tuple.
#[derive(Clone, Debug, Default)]
pub struct LowOrderData {
    tensors: BTreeMap<Vec<String>, ResidueTensor>,
}

impl LowOrderData {
    pub fn new(tensors: impl IntoIterator<Item = ResidueTensor>) -> Result<Self> {
        let mut data = Self::default();
        for t in tensors {
            data.insert(t)?;
        }
        Ok(data)
    }

    pub fn insert(&mut self, t: ResidueTensor) -> Result<()> {
        if let Some(first) = self.tensors.values().next() {
            check_compatible(first, &t)?;
        }
        self.tensors.insert(t.labels.clone(), t);
        Ok(())
    }

    pub fn get(&self, labels: &[String]) -> Result<&ResidueTensor> {
        self.tensors.get(labels).ok_or_else(|| Error::MissingTensor(labels.to_vec()))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &ResidueTensor> {
        self.tensors.values()
    }

    pub fn max_order(&self) -> usize {
        self.tensors.keys().map(Vec::len).max().unwrap_or(0)
    }

    fn reference(&self) -> Result<&ResidueTensor> {
        self.tensors.values().next().ok_or_else(|| Error::MissingTensor(vec![]))
    }
}

/// A nonzero coefficient exhibiting one pole: labels in site order, the
/// axis carrying the pole, and the full index tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessEntry {
    pub labels: Vec<String>,
    pub axis: usize,
    pub indices: Vec<usize>,
    pub value: Complex64,
}

impl WitnessEntry {
    pub fn order(&self) -> usize {
        self.labels.len()
    }

    /// Matrix elements `M^{w_{a+1}}_{k,⋆} ⋯ M^{w_1}_{⋆,1}` right of the pole.
    fn right(&self) -> Vec<Element> {
        self.elements()[..=self.axis].to_vec()
    }

    /// Matrix elements `M^{w_N}_{1,⋆} ⋯ M^{w_{a+2}}_{⋆,k}` left of the pole.
    fn left(&self) -> Vec<Element> {
        self.elements()[self.axis + 1..].to_vec()
    }

    /// Elements of the witness string, rightmost (site 1) first.
    fn elements(&self) -> Vec<Element> {
        let n = self.labels.len();
        (0..n)
            .map(|m| Element {
                label: self.labels[m].clone(),
                row: if m + 1 == n { 0 } else { self.indices[m] },
                col: if m == 0 { 0 } else { self.indices[m - 1] },
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Element {
    label: String,
    row: usize,
    col: usize,
}

/// One witness per pole.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessSet {
    pub entries: Vec<Option<WitnessEntry>>,
}

impl WitnessSet {
    /// Per pole: the lowest-order tensor with a coefficient above
    /// `tol_zero · max|c|` on the pole's index, then the largest such
    /// coefficient.
    pub fn select(low: &LowOrderData, tol_zero: f64) -> Result<Self> {
        let n = low.reference()?.poles();
        let mut entries: Vec<Option<WitnessEntry>> = vec![None; n];
        let mut ordered: Vec<&ResidueTensor> = low.tensors().collect();
        ordered.sort_by_key(|t| t.order());
        for t in ordered {
            let c = &t.coefficients;
            let cut = tol_zero * c.max_abs();
            for idx in c.indices() {
                let v = c.get(&idx);
                if v.norm() <= cut || v.norm() == 0.0 {
                    continue;
                }
                for (axis, &k) in idx.iter().enumerate() {
                    let better = match &entries[k] {
                        None => true,
                        Some(w) => w.order() == t.order() && v.norm() > w.value.norm(),
                    };
                    if better {
                        entries[k] = Some(WitnessEntry { labels: t.labels.clone(), axis, indices: idx.clone(), value: v });
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    /// Witnesses named by a certificate; within the certified slice the
    /// largest coefficient is used. Certificate poles are matched to the
    /// spectrum of `low` by proximity.
    pub fn from_certificate(cert: &PNumberCertificate, low: &LowOrderData) -> Result<Self> {
        let spectrum = &low.reference()?.spectrum;
        let mut entries: Vec<Option<WitnessEntry>> = vec![None; spectrum.len()];
        for (pole, w) in cert.poles.iter().zip(&cert.witnesses) {
            let Some(w) = w else { continue };
            let Some(k) = spectrum
                .iter()
                .position(|z| (z - pole).norm() <= crate::polefit::MERGE_TOL * pole.norm().max(1.0))
            else {
                continue;
            };
            let c = &low.get(&w.labels)?.coefficients;
            let best = c
                .indices()
                .filter(|idx| idx[w.axis] == k)
                .max_by(|a, b| c.get(a).norm().total_cmp(&c.get(b).norm()));
            if let Some(indices) = best {
                let value = c.get(&indices);
                entries[k] = Some(WitnessEntry { labels: w.labels.clone(), axis: w.axis, indices, value });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, k: usize) -> Result<&WitnessEntry> {
        match self.entries.get(k) {
            Some(Some(w)) if w.value.norm() > 0.0 => Ok(w),
            Some(Some(_)) => Err(Error::ZeroWitness(k)),
            _ => Err(Error::MissingWitness(k)),
        }
    }

    /// Highest correlator order the insertion formulas may consult.
    pub fn order_bound(&self) -> usize {
        let w = self.entries.iter().flatten().map(WitnessEntry::order).max().unwrap_or(1);
        2 * w - 1
    }
}

/// Reads a closed string (rightmost element first) as a tensor coefficient.
fn lookup(low: &LowOrderData, string: &[Element], bound: usize) -> Result<Complex64> {
    debug_assert!(string.windows(2).all(|p| p[1].col == p[0].row));
    debug_assert!(string[0].col == 0 && string[string.len() - 1].row == 0);
    if string.len() > bound {
        return Err(Error::InconsistentShapes(format!("string of order {} exceeds bound {bound}", string.len())));
    }
    let labels: Vec<String> = string.iter().map(|e| e.label.clone()).collect();
    let idx: Vec<usize> = string[..string.len() - 1].iter().map(|e| e.row).collect();
    Ok(low.get(&labels)?.get(&idx))
}

/// `c(k_1, …, k_{N−1})` for operators `labels` (site order) by identity
/// insertion with the given witnesses.
pub fn predict_coefficient<S: AsRef<str>>(
    low: &LowOrderData,
    witnesses: &WitnessSet,
    labels: &[S],
    k: &[usize],
) -> Result<Complex64> {
    let n = labels.len();
    if n < 2 || k.len() + 1 != n {
        return Err(Error::ShapeMismatch(format!("{n} operators need {} indices, got {}", n.saturating_sub(1), k.len())));
    }
    let bound = witnesses.order_bound();
    let label = |i: usize| labels[i].as_ref().to_string();
    let w: Vec<&WitnessEntry> = k.iter().map(|&ki| witnesses.get(ki)).collect::<Result<_>>()?;

    // Site 1: L(k_1) · M^{j_1}_{k_1,1}.
    let mut first = vec![Element { label: label(0), row: k[0], col: 0 }];
    first.extend(w[0].left());
    let mut value = lookup(low, &first, bound)?;

    // Interior sites: L(k_{i+1}) · M^{j_{i+1}}_{k_{i+1},k_i} · R(k_i).
    for i in 0..k.len() - 1 {
        let mut s = w[i].right();
        s.push(Element { label: label(i + 1), row: k[i + 1], col: k[i] });
        s.extend(w[i + 1].left());
        value *= lookup(low, &s, bound)?;
    }

    // Site N: M^{j_N}_{1,k_{N−1}} · R(k_{N−1}).
    let last = k.len() - 1;
    let mut s = w[last].right();
    s.push(Element { label: label(n - 1), row: 0, col: k[last] });
    value *= lookup(low, &s, bound)?;

    for wi in &w {
        value /= wi.value;
    }
    Ok(value)
}

/// `Π_{i=1}^{N−2} c^(3)(k_i, k_{i+1}) / Π_{i=2}^{N−2} c^(2)(k_i)` for a
/// single operator, `N ≥ 3`.
pub fn closed_form_coefficient(c2: &ResidueTensor, c3: &ResidueTensor, k: &[usize]) -> Result<Complex64> {
    if k.len() < 2 {
        return Err(Error::ShapeMismatch("the closed form needs N ≥ 3".into()));
    }
    let mut value = Complex64::new(1.0, 0.0);
    for pair in k.windows(2) {
        value *= c3.get(pair);
    }
    for &ki in &k[1..k.len() - 1] {
        let d = c2.get(&[ki]);
        if d.norm() == 0.0 {
            return Err(Error::ZeroWitness(ki));
        }
        value /= d;
    }
    Ok(value)
}

pub fn predict_residue_tensor<S: AsRef<str>>(
    low: &LowOrderData,
    witnesses: &WitnessSet,
    labels: &[S],
) -> Result<ResidueTensor> {
    let reference = low.reference()?;
    let n = reference.poles();
    let shape = vec![n; labels.len().saturating_sub(1)];
    let cells: Vec<Vec<usize>> = crate::tensor::MultiIndex::new(&shape).collect();
    let data = cells
        .iter()
        .map(|k| predict_coefficient(low, witnesses, labels, k))
        .collect::<Result<Vec<_>>>()?;
    ResidueTensor::new(
        reference.kind,
        labels.iter().map(|l| l.as_ref().to_string()).collect(),
        reference.spectrum.clone(),
        Tensor::new(shape, data)?,
    )
}

/// Correlator at the given gaps (site counts or distances) from low-order
/// data alone.
pub fn predict_correlator<S: AsRef<str>>(
    low: &LowOrderData,
    witnesses: &WitnessSet,
    labels: &[S],
    gaps: &[f64],
) -> Result<Complex64> {
    predict_residue_tensor(low, witnesses, labels)?.evaluate(gaps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableDeviation {
    pub labels: Vec<String>,
    pub max_abs: f64,
    /// `max_abs / max|reference|`.
    pub max_rel: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub tolerance: f64,
    pub tables: Vec<TableDeviation>,
    pub passed: bool,
}

/// Compares predicted against reference tables; a table passes when its
/// relative deviation is at most `tolerance`.
pub fn verify(rep: &Representative, reference: &[CorrelationTable], tolerance: f64) -> Result<VerificationReport> {
    let mut tables = Vec::with_capacity(reference.len());
    for t in reference {
        let predicted = rep.predict_table(&t.labels, t.window)?;
        let max_abs = predicted
            .values
            .data()
            .iter()
            .zip(t.values.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = t.values.max_abs();
        let max_rel = if scale > 0.0 { max_abs / scale } else { max_abs };
        tables.push(TableDeviation { labels: t.labels.clone(), max_abs, max_rel, passed: max_rel <= tolerance });
    }
    let passed = tables.iter().all(|t| t.passed);
    Ok(VerificationReport { tolerance, tables, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{build_table, residue_tensor, Contractor};
    use crate::spectral::testing::c;
    use crate::states::{pauli, random_generic_cmps, random_generic_mps, MpsState, TransferSystem};

    fn seed42() -> TransferSystem {
        let [sx, _, _] = pauli();
        TransferSystem::from_mps(&random_generic_mps(42, 2, 2).unwrap(), [("x", &sx)]).unwrap()
    }

    fn low_data(sys: &TransferSystem, label: &str) -> (ResidueTensor, ResidueTensor) {
        (
            residue_tensor(sys, &[label, label]).unwrap(),
            residue_tensor(sys, &[label, label, label]).unwrap(),
        )
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn scalar_state() {
        let a = ComplexMatrix::from_element(1, 1, c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let [sx, _, _] = pauli();
        let sys = TransferSystem::from_mps(&MpsState::new(vec![a.clone(), a]).unwrap(), [("x", &sx)]).unwrap();
        let (c2, c3) = low_data(&sys, "x");
        let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
        assert_eq!(rep.bond_dim(), 1);
        assert!((rep.matrix("x").unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        for n in 2..7 {
            let labels = vec!["x"; n];
            let gaps = vec![1.0; n - 1];
            assert!((rep.predict_correlator(&labels, &gaps).unwrap() - c(1.0, 0.0)).norm() < 1e-13);
        }
        let low = LowOrderData::new([c2, c3]).unwrap();
        let ws = WitnessSet::select(&low, 1e-10).unwrap();
        let c4 = predict_coefficient(&low, &ws, &["x"; 4], &[0, 0, 0]).unwrap();
        assert!((c4 - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn round_trip_on_seeded_state() {
        let sys = seed42();
        let (c2, c3) = low_data(&sys, "x");
        let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
        let m = rep.matrix("x").unwrap();
        for k in 1..4 {
            assert_eq!(m[(0, k)], c(1.0, 0.0));
        }
        for labels in [vec!["x"; 2], vec!["x"; 3]] {
            let w = Window::Discrete { n_max: 10 };
            let report = verify(&rep, &[build_table(&sys, &labels, w).unwrap()], 1e-9).unwrap();
            assert!(report.passed, "{report:?}");
        }
        let exact = residue_tensor(&sys, &["x"; 4]).unwrap();
        let predicted = rep.residue_tensor(&["x"; 4]).unwrap();
        let scale = exact.coefficients.max_abs();
        for k in exact.coefficients.indices() {
            assert!((exact.get(&k) - predicted.get(&k)).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn reconstruction_is_idempotent() {
        let (c2, c3) = low_data(&seed42(), "x");
        let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
        let again = reconstruct_representative(
            &rep.residue_tensor(&["x", "x"]).unwrap(),
            &rep.residue_tensor(&["x", "x", "x"]).unwrap(),
            1e-10,
        )
        .unwrap();
        let (a, b) = (rep.matrix("x").unwrap(), again.matrix("x").unwrap());
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn zero_two_point_coefficient_is_rejected() {
        let (mut c2, c3) = low_data(&seed42(), "x");
        c2.coefficients.set(&[2], c(0.0, 0.0));
        assert_eq!(reconstruct_representative(&c2, &c3, 1e-10), Err(Error::ZeroCoefficient(2)));
        let other = residue_tensor(&seed42(), &["identity", "identity"]).unwrap();
        assert!(matches!(reconstruct_representative(&other, &c3, 1e-10), Err(Error::InconsistentShapes(_))));
    }

    #[test]
    fn insertion_base_cases() {
        let (c2, c3) = low_data(&seed42(), "x");
        let low = LowOrderData::new([c2.clone(), c3.clone()]).unwrap();
        let ws = WitnessSet::select(&low, 1e-10).unwrap();
        assert_eq!(ws.order_bound(), 3);
        for k in c3.coefficients.indices() {
            let p = predict_coefficient(&low, &ws, &["x"; 3], &k).unwrap();
            assert!((p - c3.get(&k)).norm() < 1e-14 * c3.coefficients.max_abs().max(1.0));
        }
        for k in 0..4 {
            let p = predict_coefficient(&low, &ws, &["x"; 2], &[k]).unwrap();
            assert!(rel(p, c2.get(&[k])) < 1e-12);
        }
    }

    /// Brute force: `⟨1|M P_{k_4} M P_{k_3} M P_{k_2} M P_{k_1} M|1⟩` with
    /// rank-one projectors built from the original state.
    #[test]
    fn five_point_coefficients_match_projector_oracle() {
        let sys = seed42();
        let (c2, c3) = low_data(&sys, "x");
        let low = LowOrderData::new([c2.clone(), c3.clone()]).unwrap();
        let ws = WitnessSet::select(&low, 1e-10).unwrap();
        let con = Contractor::new(&sys).unwrap();
        let sd = con.decomposition();
        let m = sys.operator("x").unwrap();
        let projectors: Vec<ComplexMatrix> = (0..4).map(|k| sd.projector(k)).collect();
        let p0 = &projectors[0];
        for k in crate::tensor::MultiIndex::new(&[4, 4, 4, 4]) {
            let mut prod = m * p0;
            for &ki in &k {
                prod = m * &projectors[ki] * prod;
            }
            let brute = (p0 * prod).trace();
            let general = predict_coefficient(&low, &ws, &["x"; 5], &k).unwrap();
            let closed = closed_form_coefficient(&c2, &c3, &k).unwrap();
            assert!(rel(general, brute) < 1e-8, "{k:?}");
            assert!(rel(closed, brute) < 1e-8, "{k:?}");
        }
    }

    #[test]
    fn four_point_prediction_matches_contraction() {
        let sys = seed42();
        let (c2, c3) = low_data(&sys, "x");
        let low = LowOrderData::new([c2, c3]).unwrap();
        let ws = WitnessSet::select(&low, 1e-10).unwrap();
        let predicted = predict_correlator(&low, &ws, &["x"; 4], &[1.0, 0.0, 3.0]).unwrap();
        let direct = crate::correlators::npoint_mps(&sys, &["x"; 4], &[1, 0, 3]).unwrap();
        assert!((predicted - direct).norm() < 1e-8);
    }

    #[test]
    fn zeroed_entry_needs_three_point_witness() {
        let sys = seed42();
        let con = Contractor::new(&sys).unwrap();
        let sd = con.decomposition();
        let mut m = sd.to_eigenbasis(sys.operator("x").unwrap());
        m[(2, 0)] = c(0.0, 0.0);
        let z = &sd.right * m * &sd.left;
        let sys = sys.clone().with_operator("z", z).unwrap();
        let c2 = residue_tensor(&sys, &["z"; 2]).unwrap();
        let c3 = residue_tensor(&sys, &["z"; 3]).unwrap();
        let c4 = residue_tensor(&sys, &["z"; 4]).unwrap();
        let c5 = residue_tensor(&sys, &["z"; 5]).unwrap();
        assert!(matches!(reconstruct_representative(&c2, &c3, 1e-10), Err(Error::ZeroCoefficient(2))));

        let low = LowOrderData::new([c2, c3, c4]).unwrap();
        let ws = WitnessSet::select(&low, 1e-10).unwrap();
        let w = ws.get(2).unwrap();
        assert_eq!((w.order(), w.axis), (3, 1));
        assert_eq!(ws.order_bound(), 5);
        let low = LowOrderData::new(low.tensors().cloned().chain([c5.clone()])).unwrap();
        let exact = residue_tensor(&sys, &["z"; 6]).unwrap();
        let scale = exact.coefficients.max_abs();
        for k in exact.coefficients.indices() {
            let p = predict_coefficient(&low, &ws, &["z"; 6], &k).unwrap();
            assert!((p - exact.get(&k)).norm() < 1e-9 * scale, "{k:?}");
        }
    }

    #[test]
    fn multi_label_reconstruction() {
        let [sx, sy, sz] = pauli();
        let sys = TransferSystem::from_mps(&random_generic_mps(42, 2, 2).unwrap(), [("x", &sx), ("y", &sy), ("z", &sz)])
            .unwrap();
        let (c2, c3) = low_data(&sys, "x");
        let mixed: Vec<ResidueTensor> = ["y", "z"].iter().map(|j| residue_tensor(&sys, &["x", j, "x"]).unwrap()).collect();
        let rep = reconstruct_multi(&c2, &c3, &mixed, 1e-10).unwrap();
        for labels in [["z", "y", "x", "z"], ["y", "y", "z", "x"]] {
            let p = rep.predict_correlator(&labels, &[2.0, 0.0, 1.0]).unwrap();
            let d = crate::correlators::npoint_mps(&sys, &labels, &[2, 0, 1]).unwrap();
            assert!((p - d).norm() < 1e-10, "{labels:?}");
        }
        let low = LowOrderData::new(
            [c2, c3]
                .into_iter()
                .chain(mixed)
                .chain([["y", "x"], ["x", "y"], ["z", "x"], ["x", "z"]].iter().map(|l| residue_tensor(&sys, l).unwrap())),
        )
        .unwrap();
        // Witnesses drawn from the reference operator only.
        let reference = LowOrderData::new([low.get(&["x".into(), "x".into()]).unwrap().clone()]).unwrap();
        let ws = WitnessSet::select(&reference, 1e-10).unwrap();
        let labels = ["z", "y", "x", "z"];
        let predicted = predict_residue_tensor(&low, &ws, &labels).unwrap();
        let exact = residue_tensor(&sys, &labels).unwrap();
        for k in exact.coefficients.indices() {
            assert!((predicted.get(&k) - exact.get(&k)).norm() < 1e-10);
        }
    }

    #[test]
    fn cmps_prediction() {
        let sys = TransferSystem::from_cmps(&random_generic_cmps(9, 2).unwrap()).unwrap();
        let (c2, c3) = low_data(&sys, "density");
        let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
        let labels = ["density"; 4];
        let taus = [0.3, 1.1, 0.7];
        let p = rep.predict_correlator(&labels, &taus).unwrap();
        let d = crate::correlators::npoint_cmps(&sys, &labels, &taus).unwrap();
        assert!(rel(p, d) < 1e-9);
    }

    #[test]
    fn verification_controls() {
        let sys = seed42();
        let (c2, c3) = low_data(&sys, "x");
        let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
        let w = Window::Discrete { n_max: 8 };
        let own = build_table(&sys, &["x"; 4], w).unwrap();
        assert!(verify(&rep, &[own], 1e-7).unwrap().passed);
        let [sx, _, _] = pauli();
        let other = TransferSystem::from_mps(&random_generic_mps(43, 2, 2).unwrap(), [("x", &sx)]).unwrap();
        let foreign = build_table(&other, &["x"; 4], w).unwrap();
        let report = verify(&rep, &[foreign], 1e-7).unwrap();
        assert!(!report.passed);
        assert!(report.tables[0].max_rel > 1e-3);
    }

    #[test]
    fn pipeline_from_exact_tables() {
        let sys = seed42();
        let w = Window::Discrete { n_max: 64 };
        let t2 = build_table(&sys, &["x"; 2], w).unwrap();
        let t3 = build_table(&sys, &["x"; 3], w).unwrap();
        let out = reconstruct_from_tables(&t2, &t3, &[], 2, &Tolerances::default()).unwrap();
        assert_eq!(out.certificate.p, Some(1));
        assert!(out.residuals.iter().all(|&r| r < 1e-10));
        let labels = ["x"; 5];
        let p = out.representative.predict_correlator(&labels, &[1.0, 2.0, 0.0, 3.0]).unwrap();
        let d = crate::correlators::npoint_mps(&sys, &labels, &[1, 2, 0, 3]).unwrap();
        assert!(rel(p, d) < 1e-7);

        let id = build_table(&sys, &["identity"; 2], w).unwrap();
        let id3 = build_table(&sys, &["identity"; 3], w).unwrap();
        assert!(matches!(
            reconstruct_from_tables(&id, &id3, &[], 2, &Tolerances::default()),
            Err(Error::InfinitePNumber(3))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn residual_diagonal_gauge_is_invisible(re in proptest::collection::vec(0.2f64..3.0, 4), im in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let (c2, c3) = low_data(&seed42(), "x");
            let rep = reconstruct_representative(&c2, &c3, 1e-10).unwrap();
            let a: Vec<Complex64> = re.iter().zip(&im).map(|(&r, &i)| c(r, i)).collect();
            let gauged = rep.diagonal_gauge(&a).unwrap();
            for labels in [vec!["x"; 2], vec!["x"; 3]] {
                let x = rep.residue_tensor(&labels).unwrap();
                let y = gauged.residue_tensor(&labels).unwrap();
                for k in x.coefficients.indices() {
                    proptest::prop_assert!((x.get(&k) - y.get(&k)).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn general_insertion_equals_closed_form(seed in 0u64..200, k in proptest::collection::vec(0usize..4, 3..6)) {
            let [sx, _, _] = pauli();
            let sys = TransferSystem::from_mps(&random_generic_mps(seed, 2, 2).unwrap(), [("x", &sx)]).unwrap();
            let (c2, c3) = low_data(&sys, "x");
            proptest::prop_assume!(c2.coefficients.data().iter().all(|z| z.norm() > 1e-6));
            let low = LowOrderData::new([c2.clone(), c3.clone()]).unwrap();
            let ws = WitnessSet::select(&low, 1e-10).unwrap();
            let labels = vec!["x"; k.len() + 1];
            let general = predict_coefficient(&low, &ws, &labels, &k).unwrap();
            let closed = closed_form_coefficient(&c2, &c3, &k).unwrap();
            proptest::prop_assert!((general - closed).norm() <= 1e-10 * closed.norm().max(1e-12));
        }
    }
}
