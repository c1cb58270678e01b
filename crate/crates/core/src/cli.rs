//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (conditions, stability or
//! verification), 2 input error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::compensation::{attempt, run, CompensationError};
use crate::conditions::{
    check_all, check_extended_variant, check_reduced_variant, detect_variant, variant_holds, ConditionReport, Variant,
};
use crate::marginals::{marginal_m, marginal_n};
use crate::model::{resolve_model, ModelSource, WalkSpec, DEFAULT_EPS};
use crate::oracle::{compare, simulate, truncated_stationary, OracleGrid, OracleMethod, DEFAULT_FLOOR, MAX_EXACT_N};
use crate::queueing::{batch_geometric_measure, BatchGeometricParams};
use crate::scalar::{sig17, Scalar};
use crate::spectral::{curves_csv, sample_curves, Side};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Input(_) | CliError::Io(_) => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "quarterwalk",
    version,
    about = "Finite-compensation invariant measures for quarter-plane random walks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Report the solvability conditions.
    Check,
    /// Construct the invariant measure.
    Solve,
    /// Compare the measure against a brute-force oracle.
    Verify,
    /// Sample the K, H and V curves as CSV.
    Curves,
    /// Print both one-dimensional marginals.
    Marginals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Classic,
    Reduced,
    Extended,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Classic => Variant::Classic,
            VariantArg::Reduced => Variant::Reduced,
            VariantArg::Extended => Variant::Extended,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Model file, inline JSON, or `name:key=value,...`.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    #[arg(long, global = true, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Window W for CSV exports and residual checks.
    #[arg(long, global = true, default_value_t = 20)]
    pub window: usize,
    /// Truncation N for the oracle.
    #[arg(long, global = true, default_value_t = 60)]
    pub trunc: usize,
    /// Oracle method: solve, power or sim.
    #[arg(long, global = true, default_value = "solve")]
    pub method: OracleMethod,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Simulation length.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub steps: u64,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub burn_in: u64,
    /// Largest batch kept when checking the batch-arrival model.
    #[arg(long, global = true, default_value_t = 60)]
    pub arrival_cap: usize,
    /// Grid points per axis for `curves`.
    #[arg(long, global = true, default_value_t = 50)]
    pub resolution: usize,
    #[arg(long, global = true, value_enum)]
    pub start: Option<StartArg>,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    /// Print reports as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for CSV and text exports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Input(msg));
        if !(self.eps > 0.0 && self.eps < 1e-3) {
            return bad(format!("--eps must lie in (0, 1e-3), got {}", self.eps));
        }
        if self.window < 3 {
            return bad(format!("--window must be at least 3, got {}", self.window));
        }
        if self.trunc < 5 {
            return bad(format!("--trunc must be at least 5, got {}", self.trunc));
        }
        if self.resolution < 2 {
            return bad(format!("--resolution must be at least 2, got {}", self.resolution));
        }
        if self.steps <= self.burn_in {
            return bad(format!("--steps ({}) must exceed --burn-in ({})", self.steps, self.burn_in));
        }
        Ok(())
    }

    fn side(&self) -> Side {
        match self.start {
            Some(StartArg::Vertical) => Side::Vertical,
            _ => Side::Horizontal,
        }
    }

    fn write_output(&self, name: &str, contents: &str) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = &self.out else { return Ok(None) };
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        Ok(Some(path))
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &cli.config;
    cfg.validate()?;
    let arg = cfg.model.as_deref().ok_or_else(|| CliError::Input("--model is required".into()))?;
    let source = resolve_model(arg).map_err(|e| CliError::Input(e.to_string()))?;
    match source {
        ModelSource::Walk(spec) => {
            let spec = spec.with_eps(cfg.eps);
            for w in spec.warnings() {
                log::warn!("{w}");
            }
            match cfg.mode {
                ModeArg::Exact => dispatch(cli.command, &spec, cfg, out),
                ModeArg::Float => dispatch(cli.command, &spec.to_f64(cfg.eps), cfg, out),
            }
        }
        ModelSource::BatchGeometric(params) => match cfg.mode {
            ModeArg::Exact => batch(cli.command, &params, cfg, out),
            ModeArg::Float => {
                let p = BatchGeometricParams {
                    a: params.a.to_f64(),
                    lambda1: params.lambda1.to_f64(),
                    lambda2: params.lambda2.to_f64(),
                };
                batch(cli.command, &p, cfg, out)
            }
        },
    }
}

fn dispatch<S: Scalar>(
    command: Command,
    spec: &WalkSpec<S>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::Check => cmd_check(spec, cfg, out),
        Command::Solve => cmd_solve(spec, cfg, out),
        Command::Verify => cmd_verify(spec, cfg, out),
        Command::Curves => cmd_curves(spec, cfg, out),
        Command::Marginals => cmd_marginals(spec, cfg, out),
    }
}

pub fn cmd_check<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut reports = check_all(spec);
    reports.push(check_reduced_variant(spec));
    let wants_extended = spec.has_diagonals() || cfg.variant == Some(VariantArg::Extended);
    let mut notes = Vec::new();
    if wants_extended {
        match check_extended_variant(spec) {
            Ok(r) => reports.push(r),
            Err(e) => notes.push(e.to_string()),
        }
    }
    let detected = detect_variant(spec);
    let passes = match cfg.variant {
        Some(v) => variant_holds(spec, v.into()),
        None => detected.is_some(),
    };
    if cfg.json {
        let value = serde_json::json!({
            "reports": reports.iter().map(ConditionReport::to_json).collect::<Vec<_>>(),
            "notes": notes,
            "detected_variant": detected.map(|v| v.to_string()),
            "requested_variant": cfg.variant.map(|v| Variant::from(v).to_string()),
            "passes": passes,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&value).unwrap_or_default())?;
    } else {
        for r in &reports {
            writeln!(out, "{r}")?;
        }
        for n in &notes {
            writeln!(out, "note: {n}")?;
        }
        match detected {
            Some(v) => writeln!(out, "variant: {v}")?,
            None => writeln!(out, "variant: none")?,
        }
    }
    if passes {
        Ok(())
    } else {
        Err(CliError::Domain(match cfg.variant {
            Some(v) => format!("variant {} does not hold", Variant::from(v)),
            None => "no variant holds for this model".into(),
        }))
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn cmd_solve<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let side = cfg.side();
    match run(spec) {
        Ok(sol) => {
            writeln!(out, "variant: {}", sol.variant)?;
            writeln!(out, "rho1 = {}", sol.rho1)?;
            writeln!(out, "rho2 = {}", sol.rho2)?;
            writeln!(out, "pi(0,0) = {}", sol.measure.evaluate(0, 0))?;
            writeln!(out, "interior terms: {}", sol.measure.interior_terms.len())?;
            write!(out, "{}", sol.measure)?;
            write!(out, "{}", sol.trace(side))?;
            if let Some(p) = cfg.write_output("measure.csv", &sol.measure.to_csv(cfg.window))? {
                writeln!(out, "wrote {}", p.display())?;
            }
            if let Some(p) = cfg.write_output("terms.txt", &sol.measure.terms_text())? {
                writeln!(out, "wrote {}", p.display())?;
            }
            Ok(())
        }
        Err(e) => {
            writeln!(out, "failure: {e}")?;
            if !matches!(e, CompensationError::ConditionsUnmet(_) | CompensationError::NotErgodic { .. }) {
                let (trace, _) = attempt(spec, side);
                write!(out, "{trace}")?;
            }
            Err(domain(e))
        }
    }
}

fn oracle_grid<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig) -> Result<OracleGrid<f64>, CliError> {
    let grid = match cfg.method {
        OracleMethod::Simulation => simulate(spec, cfg.steps, cfg.burn_in, cfg.seed),
        OracleMethod::PowerIteration => truncated_stationary(&spec.to_f64(cfg.eps), cfg.trunc, cfg.method),
        OracleMethod::LinearSolve if S::EXACT && cfg.trunc > MAX_EXACT_N => {
            log::info!("N={} exceeds the exact solver's limit; solving in float", cfg.trunc);
            truncated_stationary(&spec.to_f64(cfg.eps), cfg.trunc, cfg.method)
        }
        OracleMethod::LinearSolve => truncated_stationary(spec, cfg.trunc, cfg.method).map(|g| g.to_f64()),
    };
    grid.map_err(domain)
}

pub fn cmd_verify<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sol = run(spec).map_err(|e| {
        let _ = writeln!(out, "failure: {e}");
        domain(e)
    })?;
    let grid = oracle_grid(spec, cfg)?;
    let cmp = compare(&sol.measure, &grid, DEFAULT_FLOOR).map_err(domain)?;
    let threshold = 10.0 * grid.tail_estimate;
    writeln!(out, "method: {}", grid.method)?;
    writeln!(out, "N = {}", grid.n)?;
    if let (Some(r), Some(i)) = (grid.residual, grid.iterations) {
        writeln!(out, "power residual = {r:.3e} after {i} iterations")?;
    }
    writeln!(out, "{cmp}")?;
    writeln!(out, "tail estimate = {:.3e}", grid.tail_estimate)?;
    if let Some(p) = cfg.write_output("oracle.csv", &grid.to_csv())? {
        writeln!(out, "wrote {}", p.display())?;
    }
    if cmp.max_abs_err <= threshold {
        writeln!(out, "verification: pass")?;
        Ok(())
    } else {
        writeln!(out, "verification: fail")?;
        Err(CliError::Domain(format!("max_abs_err {:.3e} exceeds {threshold:.3e}", cmp.max_abs_err)))
    }
}

pub fn cmd_curves<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let points = sample_curves(spec, cfg.resolution).map_err(|e| CliError::Input(e.to_string()))?;
    let csv = curves_csv(&points);
    match cfg.write_output("curves.csv", &csv)? {
        Some(p) => writeln!(out, "wrote {} ({} points)", p.display(), points.len())?,
        None => write!(out, "{csv}")?,
    }
    Ok(())
}

pub fn cmd_marginals<S: Scalar>(spec: &WalkSpec<S>, cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mm = marginal_m(spec).map_err(domain)?;
    let mn = marginal_n(spec).map_err(domain)?;
    writeln!(out, "m-marginal: p0 = {}, prefactor = {}, ratio = {}", mm.p0, mm.prefactor, mm.ratio)?;
    writeln!(out, "n-marginal: p0 = {}, prefactor = {}, ratio = {}", mn.p0, mn.prefactor, mn.ratio)?;
    let csv = marginals_csv(cfg.window, |k| mm.prob(k).to_f64(), |k| mn.prob(k).to_f64());
    if let Some(p) = cfg.write_output("marginals.csv", &csv)? {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn marginals_csv(window: usize, m: impl Fn(usize) -> f64, n: impl Fn(usize) -> f64) -> String {
    let mut csv = String::from("k,m_marginal,n_marginal\n");
    for k in 0..=window {
        csv.push_str(&format!("{k},{},{}\n", sig17(m(k)), sig17(n(k))));
    }
    csv
}

/// The batch-arrival model has a product measure but no nearest-neighbour
/// spec, so only some commands apply.
fn batch<S: Scalar>(
    command: Command,
    params: &BatchGeometricParams<S>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if matches!(command, Command::Check | Command::Curves) {
        return Err(CliError::Input(format!(
            "{} needs a nearest-neighbour walk; batch_geometric is not one",
            format!("{command:?}").to_lowercase()
        )));
    }
    let report = batch_geometric_measure(params, cfg.window, cfg.arrival_cap).map_err(domain)?;
    match command {
        Command::Solve | Command::Verify => {
            writeln!(out, "gamma = {}", report.gamma)?;
            writeln!(out, "delta = {}", report.delta)?;
            writeln!(out, "coeff = {}", report.coeff)?;
            writeln!(out, "max residual on W={} = {}", report.window, report.max_residual)?;
            writeln!(out, "tail bound (cap {}) = {:.3e}", report.arrival_cap, report.tail_bound.to_f64())?;
            if command == Command::Solve {
                let mut csv = String::from("m,n,pi\n");
                for m in 0..=cfg.window {
                    for n in 0..=cfg.window {
                        csv.push_str(&format!("{m},{n},{}\n", sig17(report.evaluate(m, n).to_f64())));
                    }
                }
                if let Some(p) = cfg.write_output("measure.csv", &csv)? {
                    writeln!(out, "wrote {}", p.display())?;
                }
                return Ok(());
            }
            let threshold = 10.0 * report.tail_bound.to_f64();
            if report.max_residual.to_f64() <= threshold {
                writeln!(out, "verification: pass")?;
                Ok(())
            } else {
                writeln!(out, "verification: fail")?;
                Err(CliError::Domain(format!("residual {} exceeds {threshold:.3e}", report.max_residual)))
            }
        }
        Command::Marginals => {
            let g = S::one() - report.gamma.clone();
            let d = S::one() - report.delta.clone();
            writeln!(out, "m-marginal: p0 = {g}, prefactor = {g}, ratio = {}", report.gamma)?;
            writeln!(out, "n-marginal: p0 = {d}, prefactor = {d}, ratio = {}", report.delta)?;
            let csv = marginals_csv(cfg.window, |k| report.marginal_m(k).to_f64(), |k| report.marginal_n(k).to_f64());
            if let Some(p) = cfg.write_output("marginals.csv", &csv)? {
                writeln!(out, "wrote {}", p.display())?;
            }
            Ok(())
        }
        Command::Check | Command::Curves => unreachable!("rejected above"),
    }
}

/// Convenience for tests and scripts: run a command line and capture stdout.
pub fn run_to_string<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => return (if e.use_stderr() { EXIT_INPUT } else { EXIT_OK }, e.to_string()),
    };
    let mut buf = Vec::new();
    let code = match execute(&cli, &mut buf) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            buf.extend_from_slice(format!("error: {e}\n").as_bytes());
            e.exit_code()
        }
    };
    (code, String::from_utf8_lossy(&buf).into_owned())
}
