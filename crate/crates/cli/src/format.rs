//! JSON artifact formats. Complex numbers are `[re, im]` pairs, matrices
//! row-major nested arrays, tensors a flat row-major array plus shape.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wick_mps::correlators::{CorrelationTable, ResidueTensor, Window};
use wick_mps::polefit::{PNumberCertificate, PoleSet, ResidueFit};
use wick_mps::states::SystemKind;
use wick_mps::tensor::Tensor;
use wick_mps::wick::{Representative, VerificationReport};
use wick_mps::{Complex64, ComplexMatrix};

use crate::CliError;

pub const SCHEMA: &str = "wick-mps/1";

pub type Matrix = Vec<Vec<Complex64>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_json(rows: &Matrix, what: &str) -> Result<ComplexMatrix, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Malformed(format!("{what}: matrix must be a non-empty rectangular array")));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Discrete,
    Continuous,
}

impl From<SystemKind> for Kind {
    fn from(k: SystemKind) -> Self {
        match k {
            SystemKind::Discrete => Kind::Discrete,
            SystemKind::Continuous => Kind::Continuous,
        }
    }
}

impl From<Kind> for SystemKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Discrete => SystemKind::Discrete,
            Kind::Continuous => SystemKind::Continuous,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case")]
pub enum WindowJson {
    Discrete { n_max: usize },
    Continuous { step: f64, points: usize },
}

impl From<Window> for WindowJson {
    fn from(w: Window) -> Self {
        match w {
            Window::Discrete { n_max } => WindowJson::Discrete { n_max },
            Window::Continuous { step, points } => WindowJson::Continuous { step, points },
        }
    }
}

impl From<WindowJson> for Window {
    fn from(w: WindowJson) -> Self {
        match w {
            WindowJson::Discrete { n_max } => Window::Discrete { n_max },
            WindowJson::Continuous { step, points } => Window::Continuous { step, points },
        }
    }
}

pub fn gap_convention(kind: SystemKind) -> &'static str {
    match kind {
        SystemKind::Discrete => "gap = site distance - 1",
        SystemKind::Continuous => "gap = distance x_{i+1} - x_i",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladJson {
    pub hamiltonian: Matrix,
    pub jump_ops: Vec<Matrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateBody {
    /// Physical operators are `q × q` matrices keyed by label.
    Mps { tensors: Vec<Matrix>, operators: BTreeMap<String, Matrix> },
    /// Operator labels are field kinds; the generating channel is embedded.
    Cmps { q: Matrix, r: Matrix, operators: Vec<String>, lindblad: LindbladJson },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub seed: u64,
    pub bond_dim: usize,
    #[serde(flatten)]
    pub body: StateBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityJson {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub bond_dim: usize,
    pub eigenvalues: Vec<Complex64>,
    pub min_gap: f64,
    pub leading_gap: f64,
    pub tolerance: f64,
    pub generic: bool,
    pub p_feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_preservation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub order: usize,
    pub labels: Vec<String>,
    pub gap_convention: String,
    pub window: WindowJson,
    pub shape: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl TableFile {
    pub fn from_table(t: &CorrelationTable) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "table".into(),
            kind: t.kind().into(),
            order: t.order(),
            labels: t.labels.clone(),
            gap_convention: gap_convention(t.kind()).into(),
            window: t.window.into(),
            shape: t.values.shape().to_vec(),
            values: t.values.data().to_vec(),
        }
    }

    pub fn to_table(&self) -> Result<CorrelationTable, CliError> {
        let window: Window = self.window.into();
        if SystemKind::from(self.kind) != window.kind() || self.order != self.labels.len() {
            return Err(CliError::Malformed("table kind, window and order disagree".into()));
        }
        let values = Tensor::new(self.shape.clone(), self.values.clone())?;
        Ok(CorrelationTable::new(self.labels.clone(), window, values)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolesFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub requested: usize,
    pub poles: Vec<Complex64>,
    pub confidence: Vec<f64>,
    pub leading: Option<usize>,
    pub rank_deficient: bool,
    pub singular_values: Vec<f64>,
    pub window: WindowJson,
}

impl PolesFile {
    pub fn from_set(p: &PoleSet) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "poles".into(),
            kind: p.kind.into(),
            requested: p.requested,
            poles: p.poles.clone(),
            confidence: p.confidence.clone(),
            leading: p.leading,
            rank_deficient: p.rank_deficient,
            singular_values: p.singular_values.clone(),
            window: p.window.into(),
        }
    }

    pub fn to_set(&self) -> PoleSet {
        PoleSet {
            kind: self.kind.into(),
            poles: self.poles.clone(),
            confidence: self.confidence.clone(),
            leading: self.leading,
            rank_deficient: self.rank_deficient,
            requested: self.requested,
            singular_values: self.singular_values.clone(),
            window: self.window.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResiduesFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub labels: Vec<String>,
    pub spectrum: Vec<Complex64>,
    pub shape: Vec<usize>,
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    pub condition: f64,
    pub structural_zeros: Vec<Vec<usize>>,
}

impl ResiduesFile {
    pub fn from_fit(f: &ResidueFit) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "residues".into(),
            kind: f.tensor.kind.into(),
            labels: f.tensor.labels.clone(),
            spectrum: f.tensor.spectrum.clone(),
            shape: f.tensor.coefficients.shape().to_vec(),
            coefficients: f.tensor.coefficients.data().to_vec(),
            residual: f.residual,
            condition: f.condition,
            structural_zeros: f.structural_zeros.clone(),
        }
    }

    pub fn to_tensor(&self) -> Result<ResidueTensor, CliError> {
        let c = Tensor::new(self.shape.clone(), self.coefficients.clone())?;
        Ok(ResidueTensor::new(self.kind.into(), self.labels.clone(), self.spectrum.clone(), c)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub pole: usize,
    pub order: usize,
    pub labels: Vec<String>,
    pub axis: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub bond_dim: usize,
    /// `null` when the supplied tables never witness all poles.
    pub p: Option<usize>,
    pub finite: bool,
    pub order_bound: Option<usize>,
    pub poles: Vec<Complex64>,
    pub confidence: Vec<f64>,
    pub witnesses: Vec<WitnessJson>,
    pub missing: usize,
}

impl CertificateFile {
    pub fn from_certificate(c: &PNumberCertificate) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "certificate".into(),
            kind: c.kind.into(),
            bond_dim: c.bond_dim,
            p: c.p,
            finite: c.p.is_some(),
            order_bound: c.order_bound(),
            poles: c.poles.clone(),
            confidence: c.confidence.clone(),
            witnesses: c
                .witnesses
                .iter()
                .enumerate()
                .filter_map(|(pole, w)| {
                    w.as_ref().map(|w| WitnessJson {
                        pole,
                        order: w.order,
                        labels: w.labels.clone(),
                        axis: w.axis,
                        magnitude: w.magnitude,
                    })
                })
                .collect(),
            missing: c.missing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub bond_dim: usize,
    pub reference: String,
    pub spectrum: Vec<Complex64>,
    pub matrices: BTreeMap<String, Matrix>,
    pub p: Option<usize>,
    pub fit_residuals: Vec<f64>,
}

impl RepresentativeFile {
    pub fn from_rep(rep: &Representative, p: Option<usize>, fit_residuals: Vec<f64>) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "representative".into(),
            kind: rep.kind.into(),
            bond_dim: rep.bond_dim(),
            reference: rep.reference.clone(),
            spectrum: rep.spectrum.clone(),
            matrices: rep.matrices.iter().map(|(l, m)| (l.clone(), matrix_to_json(m))).collect(),
            p,
            fit_residuals,
        }
    }

    pub fn to_rep(&self) -> Result<Representative, CliError> {
        let matrices = self
            .matrices
            .iter()
            .map(|(l, m)| Ok((l.clone(), matrix_from_json(m, l)?)))
            .collect::<Result<_, CliError>>()?;
        Ok(Representative::new(self.kind.into(), self.spectrum.clone(), self.reference.clone(), matrices)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub kind: Kind,
    pub labels: Vec<String>,
    pub gap_convention: String,
    pub gaps: Vec<f64>,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationJson {
    pub labels: Vec<String>,
    pub max_abs: f64,
    pub max_rel: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationFile {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub tolerance: f64,
    pub passed: bool,
    pub tables: Vec<DeviationJson>,
}

impl VerificationFile {
    pub fn from_report(r: &VerificationReport) -> Self {
        Self {
            schema: SCHEMA.into(),
            file_type: "verification".into(),
            tolerance: r.tolerance,
            passed: r.passed,
            tables: r
                .tables
                .iter()
                .map(|t| DeviationJson { labels: t.labels.clone(), max_abs: t.max_abs, max_rel: t.max_rel, passed: t.passed })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub schema: String,
    #[serde(rename = "type")]
    pub file_type: String,
    pub bond_dim: usize,
    /// `‖T(Q(H, R), R) − L(H, R)‖_max`.
    pub generator_deviation: f64,
    /// `‖⟨1_vec| L‖_max`.
    pub trace_preservation: f64,
    pub spectral_gap: f64,
    pub stationary_state: Matrix,
    pub hermiticity: f64,
    pub trace: Complex64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Fields every artifact carries; checked before full parsing.
#[derive(Deserialize)]
struct Header {
    schema: String,
    #[serde(rename = "type")]
    file_type: String,
}

pub fn parse<T: DeserializeOwned>(text: &str, expected_type: &str) -> Result<T, CliError> {
    let header: Header = serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))?;
    if header.schema != SCHEMA {
        return Err(CliError::Malformed(format!("unsupported schema `{}`", header.schema)));
    }
    if header.file_type != expected_type {
        return Err(CliError::Malformed(format!("expected a {expected_type} file, got `{}`", header.file_type)));
    }
    serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn read<T: DeserializeOwned>(path: &Path, expected_type: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, expected_type).map_err(|e| match e {
        CliError::Malformed(m) => CliError::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Serializes with `indent` spaces (0 = compact) and a trailing newline.
pub fn render<T: Serialize>(value: &T, indent: usize) -> Result<String, CliError> {
    let mut out = Vec::new();
    if indent == 0 {
        serde_json::to_writer(&mut out, value)
    } else {
        let pad = vec![b' '; indent];
        let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
        let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
        value.serialize(&mut ser)
    }
    .map_err(|e| CliError::Malformed(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn write<T: Serialize>(path: &Path, value: &T, indent: usize) -> Result<(), CliError> {
    std::fs::write(path, render(value, indent)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
