use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wick_mps::channel::{check_trace_preservation, lindblad_generator, q_from_hamiltonian, stationary_state, LindbladSpec};
use wick_mps::correlators::{Contractor, Window};
use wick_mps::polefit::{self, extract_poles_table, fit_residues, p_number_with, PILOT_STEP};
use wick_mps::spectral::GenericityReport;
use wick_mps::states::{
    pauli, random_generic_cmps_with_spec, random_generic_mps, random_hermitian_operator, CmpsState, MpsState,
    SystemKind, TransferSystem, IDENTITY_LABEL,
};
use wick_mps::wick::{reconstruct_from_tables, verify};
use wick_mps::{Complex64, ComplexMatrix, Tolerances};

use crate::format::{self, *};
use crate::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "wick-mps", version, about = "Correlation data pipeline for translation-invariant MPS and cMPS")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative eigenvalue separation treated as degenerate.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_deg: f64,
    /// Relative residue magnitude treated as a structural zero.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_zero: f64,
    /// Indentation of JSON output; 0 writes compact JSON.
    #[arg(long, global = true, default_value_t = 2)]
    pub json_indent: usize,
    /// Worker threads for table evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random generic state.
    Gen(GenArgs),
    /// Sample an N-point correlator on a gap grid.
    Correlate(CorrelateArgs),
    /// Compute the p-number certificate of a set of tables.
    Certify(CertifyArgs),
    /// Recover poles from a table.
    FitPoles(FitPolesArgs),
    /// Fit residues of a table on given poles.
    FitResidues(FitResiduesArgs),
    /// Build a representative from two- and three-point tables.
    Reconstruct(ReconstructArgs),
    /// Predict a correlator value or table from a representative.
    Predict(PredictArgs),
    /// Compare a representative against reference tables.
    Verify(VerifyArgs),
    /// Check the Lindblad correspondence of a cMPS state file.
    ChannelCheck(ChannelCheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    Mps,
    Cmps,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = StateKind::Mps)]
    pub kind: StateKind,
    /// Bond dimension.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Physical dimension (lattice states).
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// State file to write; the genericity report goes to standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// State file written by `gen`.
    #[arg(long)]
    pub state: PathBuf,
    /// Operator labels in site order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub labels: Vec<String>,
    /// Repeat a single label this many times.
    #[arg(long)]
    pub order: Option<usize>,
    /// Largest lattice gap (default 4d²).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Continuum step; chosen from a pilot table when absent.
    #[arg(long)]
    pub step: Option<f64>,
    /// Continuum points per axis.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Correlation table files.
    #[arg(long, num_args = 1.., required = true)]
    pub tables: Vec<PathBuf>,
    /// Bond dimension of the underlying state.
    #[arg(long)]
    pub d: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitPolesArgs {
    /// Correlation table file.
    #[arg(long)]
    pub table: PathBuf,
    /// Bond dimension of the underlying state.
    #[arg(long)]
    pub d: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitResiduesArgs {
    /// Correlation table file.
    #[arg(long)]
    pub table: PathBuf,
    /// Pole set file written by `fit-poles`.
    #[arg(long)]
    pub poles: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Two-point table of the reference operator.
    #[arg(long)]
    pub two_point: PathBuf,
    /// Three-point table of the reference operator.
    #[arg(long)]
    pub three_point: PathBuf,
    /// Three-point tables with labels (r, j, r) for further operators j.
    #[arg(long, num_args = 1..)]
    pub mixed: Vec<PathBuf>,
    /// Bond dimension of the underlying state.
    #[arg(long)]
    pub d: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Representative file written by `reconstruct`.
    #[arg(long)]
    pub rep: PathBuf,
    /// Operator labels in site order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub labels: Vec<String>,
    /// Gaps for a single value, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gaps: Vec<f64>,
    /// Lattice table up to this gap instead of a single value.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Continuum table step instead of a single value.
    #[arg(long)]
    pub step: Option<f64>,
    /// Continuum points per axis.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Representative file written by `reconstruct`.
    #[arg(long)]
    pub rep: PathBuf,
    /// Correlation table files.
    #[arg(long, num_args = 1.., required = true)]
    pub tables: Vec<PathBuf>,
    /// Largest accepted relative deviation.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChannelCheckArgs {
    /// State file written by `gen`.
    #[arg(long)]
    pub state: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Context {
    seed: u64,
    tol: Tolerances,
    indent: usize,
}

impl Context {
    fn emit<T: Serialize>(&self, out: &Option<PathBuf>, value: &T) -> Result<(), CliError> {
        match out {
            Some(path) => format::write(path, value, self.indent),
            None => {
                print!("{}", format::render(value, self.indent)?);
                Ok(())
            }
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    for (name, v) in [("--tol-deg", cli.tol_deg), ("--tol-zero", cli.tol_zero)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!("{name} must be positive, got {v}")));
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context {
        seed: cli.seed,
        tol: Tolerances { degeneracy: cli.tol_deg, structural_zero: cli.tol_zero, ..Tolerances::default() },
        indent: cli.json_indent,
    };
    match cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Correlate(a) => correlate(&ctx, a),
        Command::Certify(a) => certify(&ctx, a),
        Command::FitPoles(a) => fit_poles(&ctx, a),
        Command::FitResidues(a) => fit_residues_cmd(&ctx, a),
        Command::Reconstruct(a) => reconstruct(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Verify(a) => verify_cmd(&ctx, a),
        Command::ChannelCheck(a) => channel_check(&ctx, a),
    }
}

fn gen(ctx: &Context, a: GenArgs) -> Result<i32, CliError> {
    if a.d == 0 {
        return Err(CliError::Usage("--d must be at least 1".into()));
    }
    let (body, generator, order, trace) = match a.kind {
        StateKind::Mps => {
            if a.q < 2 {
                return Err(CliError::Usage("--q must be at least 2".into()));
            }
            let state = random_generic_mps(ctx.seed, a.d, a.q)?;
            let mut operators = BTreeMap::new();
            operators.insert(IDENTITY_LABEL.to_string(), matrix_to_json(&ComplexMatrix::identity(a.q, a.q)));
            if a.q == 2 {
                for (label, m) in ["sigma_x", "sigma_y", "sigma_z"].iter().zip(pauli()) {
                    operators.insert(label.to_string(), matrix_to_json(&m));
                }
            }
            operators.insert("o_rand".into(), matrix_to_json(&random_hermitian_operator(ctx.seed, a.q)));
            let body = StateBody::Mps { tensors: state.tensors().iter().map(matrix_to_json).collect(), operators };
            (body, state.transfer_matrix(), SystemKind::Discrete, None)
        }
        StateKind::Cmps => {
            let (state, spec) = random_generic_cmps_with_spec(ctx.seed, a.d)?;
            let trace = check_trace_preservation(&lindblad_generator(&spec));
            let body = StateBody::Cmps {
                q: matrix_to_json(state.q()),
                r: matrix_to_json(state.r()),
                operators: ["identity", "psi_dagger", "psi", "density"].map(String::from).to_vec(),
                lindblad: LindbladJson {
                    hamiltonian: matrix_to_json(spec.hamiltonian()),
                    jump_ops: spec.jump_ops().iter().map(matrix_to_json).collect(),
                },
            };
            (body, state.liouvillian(), SystemKind::Continuous, Some(trace))
        }
    };
    let file = StateFile { schema: SCHEMA.into(), file_type: "state".into(), seed: ctx.seed, bond_dim: a.d, body };
    format::write(&a.out, &file, ctx.indent)?;

    let values = wick_mps::spectral::eigenvalues(&generator, order.spectral_order())?;
    let report = GenericityReport::from_eigenvalues(&values, order.spectral_order(), ctx.tol.degeneracy);
    let json = GenericityJson {
        schema: SCHEMA.into(),
        file_type: "genericity".into(),
        kind: order.into(),
        bond_dim: a.d,
        eigenvalues: values,
        min_gap: report.min_gap,
        leading_gap: report.leading_gap,
        tolerance: report.tolerance,
        generic: report.passed,
        p_feasible: report.passed,
        trace_preservation: trace,
    };
    ctx.emit(&None, &json)?;
    Ok(if report.passed { exit::OK } else { exit::GENERATION })
}

fn load_state(path: &std::path::Path) -> Result<(StateFile, TransferSystem), CliError> {
    let file: StateFile = format::read(path, "state")?;
    let system = match &file.body {
        StateBody::Mps { tensors, operators } => {
            let tensors = tensors.iter().map(|t| matrix_from_json(t, "tensor")).collect::<Result<Vec<_>, _>>()?;
            let state = MpsState::new(tensors)?;
            let ops: Vec<(String, ComplexMatrix)> = operators
                .iter()
                .map(|(l, m)| Ok((l.clone(), matrix_from_json(m, l)?)))
                .collect::<Result<_, CliError>>()?;
            TransferSystem::from_mps(&state, ops.iter().map(|(l, m)| (l.as_str(), m)))?
        }
        StateBody::Cmps { q, r, .. } => {
            let state = CmpsState::new(matrix_from_json(q, "q")?, matrix_from_json(r, "r")?)?;
            TransferSystem::from_cmps(&state)?
        }
    };
    if system.dim() != file.bond_dim * file.bond_dim {
        return Err(CliError::Malformed(format!("{}: bond_dim disagrees with tensors", path.display())));
    }
    Ok((file, system))
}

fn expand_labels(labels: Vec<String>, order: Option<usize>) -> Result<Vec<String>, CliError> {
    match order {
        None => Ok(labels),
        Some(n) if labels.len() == 1 && n >= 2 => Ok(vec![labels[0].clone(); n]),
        Some(n) if labels.len() == n => Ok(labels),
        Some(n) => Err(CliError::Usage(format!("--order {n} needs one label or {n} labels, got {}", labels.len()))),
    }
}

fn correlate(ctx: &Context, a: CorrelateArgs) -> Result<i32, CliError> {
    let labels = expand_labels(a.labels, a.order)?;
    if labels.len() < 2 {
        return Err(CliError::Usage("a correlator needs at least two labels".into()));
    }
    let (file, system) = load_state(&a.state)?;
    let contractor = Contractor::with_tolerance(&system, ctx.tol.degeneracy)?;
    let window = match system.kind() {
        SystemKind::Discrete => Window::Discrete { n_max: a.n_max.unwrap_or(polefit::min_window(file.bond_dim)) },
        SystemKind::Continuous => {
            let step = match a.step {
                Some(s) => s,
                None => {
                    let points = a.points.max(polefit::min_window(file.bond_dim) + 1);
                    let pilot_labels = [labels[0].clone(), labels[labels.len() - 1].clone()];
                    let pilot = contractor.table(&pilot_labels, Window::Continuous { step: PILOT_STEP, points })?;
                    polefit::choose_step(pilot.series()?, file.bond_dim)?
                }
            };
            Window::Continuous { step, points: a.points }
        }
    };
    let table = contractor.table(&labels, window)?;
    ctx.emit(&a.out, &TableFile::from_table(&table))?;
    Ok(exit::OK)
}

fn load_table(path: &std::path::Path) -> Result<wick_mps::correlators::CorrelationTable, CliError> {
    let file: TableFile = format::read(path, "table")?;
    file.to_table()
}

fn certify(ctx: &Context, a: CertifyArgs) -> Result<i32, CliError> {
    let tables = a.tables.iter().map(|p| load_table(p)).collect::<Result<Vec<_>, _>>()?;
    let cert = p_number_with(&tables, a.d, &ctx.tol)?;
    ctx.emit(&a.out, &CertificateFile::from_certificate(&cert))?;
    Ok(if cert.p.is_some() { exit::OK } else { exit::INFINITE_P })
}

fn fit_poles(ctx: &Context, a: FitPolesArgs) -> Result<i32, CliError> {
    let table = load_table(&a.table)?;
    let set = extract_poles_table(&table, a.d, ctx.tol.rank)?;
    ctx.emit(&a.out, &PolesFile::from_set(&set))?;
    Ok(exit::OK)
}

fn fit_residues_cmd(ctx: &Context, a: FitResiduesArgs) -> Result<i32, CliError> {
    let table = load_table(&a.table)?;
    let poles: PolesFile = format::read(&a.poles, "poles")?;
    let set = poles.to_set();
    if set.kind != table.kind() {
        return Err(CliError::Malformed("pole set and table differ in kind".into()));
    }
    let fit = fit_residues(&table, &set.poles, ctx.tol.structural_zero)?;
    ctx.emit(&a.out, &ResiduesFile::from_fit(&fit))?;
    Ok(exit::OK)
}

fn reconstruct(ctx: &Context, a: ReconstructArgs) -> Result<i32, CliError> {
    let two = load_table(&a.two_point)?;
    let three = load_table(&a.three_point)?;
    let mixed = a.mixed.iter().map(|p| load_table(p)).collect::<Result<Vec<_>, _>>()?;
    let out = reconstruct_from_tables(&two, &three, &mixed, a.d, &ctx.tol)?;
    let file = RepresentativeFile::from_rep(&out.representative, out.certificate.p, out.residuals);
    ctx.emit(&a.out, &file)?;
    Ok(exit::OK)
}

fn predict(ctx: &Context, a: PredictArgs) -> Result<i32, CliError> {
    let rep_file: RepresentativeFile = format::read(&a.rep, "representative")?;
    let rep = rep_file.to_rep()?;
    let window = match (rep.kind, a.n_max, a.step) {
        (SystemKind::Discrete, Some(n_max), None) => Some(Window::Discrete { n_max }),
        (SystemKind::Continuous, None, Some(step)) => Some(Window::Continuous { step, points: a.points }),
        (_, None, None) => None,
        _ => return Err(CliError::Usage("--n-max applies to lattice data, --step to continuum data".into())),
    };
    if let Some(w) = window {
        let table = rep.predict_table(&a.labels, w)?;
        ctx.emit(&a.out, &TableFile::from_table(&table))?;
        return Ok(exit::OK);
    }
    if rep.kind == SystemKind::Discrete && a.gaps.iter().any(|g| g.fract() != 0.0 || *g < 0.0) {
        return Err(CliError::Usage("lattice gaps must be non-negative integers".into()));
    }
    let value: Complex64 = rep.predict_correlator(&a.labels, &a.gaps)?;
    let file = PredictionFile {
        schema: SCHEMA.into(),
        file_type: "prediction".into(),
        kind: rep.kind.into(),
        labels: a.labels,
        gap_convention: gap_convention(rep.kind).into(),
        gaps: a.gaps,
        value,
    };
    ctx.emit(&a.out, &file)?;
    Ok(exit::OK)
}

fn verify_cmd(ctx: &Context, a: VerifyArgs) -> Result<i32, CliError> {
    if !(a.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let rep_file: RepresentativeFile = format::read(&a.rep, "representative")?;
    let rep = rep_file.to_rep()?;
    let tables = a.tables.iter().map(|p| load_table(p)).collect::<Result<Vec<_>, _>>()?;
    let report = verify(&rep, &tables, a.tol)?;
    ctx.emit(&a.out, &VerificationFile::from_report(&report))?;
    Ok(if report.passed { exit::OK } else { exit::VERIFY_FAILED })
}

/// Thresholds of the channel correspondence checks.
const GENERATOR_TOL: f64 = 1e-13;
const TRACE_TOL: f64 = 1e-12;
const STATE_TOL: f64 = 1e-10;

fn channel_check(ctx: &Context, a: ChannelCheckArgs) -> Result<i32, CliError> {
    let file: StateFile = format::read(&a.state, "state")?;
    let StateBody::Cmps { lindblad, .. } = &file.body else {
        return Err(CliError::Usage("channel-check needs a cmps state file".into()));
    };
    let h = matrix_from_json(&lindblad.hamiltonian, "hamiltonian")?;
    let jumps = lindblad.jump_ops.iter().map(|m| matrix_from_json(m, "jump operator")).collect::<Result<Vec<_>, _>>()?;
    let spec = LindbladSpec::new(h, jumps)?;
    let l = lindblad_generator(&spec);
    let t = q_from_hamiltonian(&spec)?.liouvillian();
    let generator_deviation = (&t - &l).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let trace_preservation = check_trace_preservation(&l);
    let ss = stationary_state(&l)?;
    let rho = &ss.rho;
    let hermiticity = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let trace = rho.trace();
    let min_eigenvalue = rho.clone().symmetric_eigenvalues().min();
    let passed = generator_deviation <= GENERATOR_TOL
        && trace_preservation <= TRACE_TOL
        && hermiticity <= STATE_TOL
        && (trace - Complex64::new(1.0, 0.0)).norm() <= STATE_TOL
        && min_eigenvalue >= -STATE_TOL;
    let report = ChannelReport {
        schema: SCHEMA.into(),
        file_type: "channel_check".into(),
        bond_dim: spec.dim(),
        generator_deviation,
        trace_preservation,
        spectral_gap: ss.gap,
        stationary_state: matrix_to_json(rho),
        hermiticity,
        trace,
        min_eigenvalue,
        passed,
    };
    ctx.emit(&a.out, &report)?;
    Ok(if passed { exit::OK } else { exit::VERIFY_FAILED })
}
