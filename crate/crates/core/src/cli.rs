//! Command-line driver: `solve`, `converge`, `sandwich` and `decompose`.
//!
//! Settings come from an optional `--config` file of `key = value` lines
//! (keys are the long flag names, problem parameters are `param.<name>`),
//! overridden by flags. Data goes to `--out` or standard output, diagnostics
//! to standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::experiments::{
    parse_config_text, parse_real_list, run_convergence, run_sandwich, DomainSpec, ExperimentConfig,
    ExperimentError, Reference,
};
use crate::grid::{Grid, GridError};
use crate::linalg::Matrix;
use crate::problem::catalog::Params;
use crate::problem::ProblemError;
use crate::solver::{self, Method, SolverConfig, SolverError};
use crate::stencil::{decompose, generate_lambda};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "isaacs-fd", version, about = "Monotone finite-difference solver for Isaacs equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at one mesh size and write the grid function as CSV.
    Solve(RunArgs),
    /// Solve over an h list and write the error table with a fitted rate.
    Converge(RunArgs),
    /// Solve the K-truncated fused problems and write gap(K).
    Sandwich(RunArgs),
    /// Split a diffusion matrix over the direction set.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Catalog problem name (default poisson-ball).
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// ball, ellipsoid or interval.
    #[arg(long)]
    pub domain: Option<String>,
    /// Radius of a ball or interval domain (default 1).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated semi-axes of an ellipsoid.
    #[arg(long = "semi-axes")]
    pub semi_axes: Option<String>,
    /// Dimension of a ball domain (default 2).
    #[arg(long)]
    pub dims: Option<usize>,
    /// Single mesh size.
    #[arg(long)]
    pub h: Option<f64>,
    /// Comma-separated, strictly decreasing.
    #[arg(long = "h-list")]
    pub h_list: Option<String>,
    /// Max-norm bound of the direction set (default 1).
    #[arg(long = "lambda-m")]
    pub lambda_m: Option<i64>,
    /// jacobi, gauss-seidel or policy.
    #[arg(long)]
    pub method: Option<String>,
    /// Damping factor in (0, 1] of the pseudo-time step (default 1).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Residual tolerance (default 1e-9 times one plus the forcing sup-norm).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap (default 1000000).
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// exact or finest.
    #[arg(long)]
    pub reference: Option<String>,
    /// Comma-separated, strictly increasing truncation levels.
    #[arg(long = "k-list")]
    pub k_list: Option<String>,
    /// Ellipticity of the Pucci family (default: the problem's delta).
    #[arg(long = "delta-hat")]
    pub delta_hat: Option<f64>,
    /// Smallest acceptable coordinate-direction weight.
    #[arg(long = "delta1-min")]
    pub delta1_min: Option<f64>,
    /// Randomized comparison-principle trials run after `solve`.
    #[arg(long = "comparison-trials")]
    pub comparison_trials: Option<usize>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the randomized checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress the report on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Write 0 in the seconds column so reruns are byte-identical.
    #[arg(long = "no-timing")]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Rows separated by `;`, entries by `,`, e.g. "1,0.5;0.5,1".
    #[arg(long, conflicts_with = "matrix_file")]
    pub matrix: Option<String>,
    /// File with one matrix row per line.
    #[arg(long = "matrix-file")]
    pub matrix_file: Option<PathBuf>,
    /// Comma-separated drift vector (default zero).
    #[arg(long)]
    pub drift: Option<String>,
    /// Max-norm bound of the direction set.
    #[arg(long = "lambda-m", default_value_t = 1)]
    pub lambda_m: i64,
    /// Smallest acceptable coordinate-direction weight.
    #[arg(long = "delta1-min", default_value_t = solver::DEFAULT_DELTA1_MIN)]
    pub delta1_min: f64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Solver(s) => return s.into(),
            ExperimentError::OrderingViolation { .. } => EXIT_VIOLATION,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<&SolverError<f64>> for CliError {
    fn from(e: &SolverError<f64>) -> Self {
        let code = match e {
            SolverError::MaxIterExceeded(_) => EXIT_NOT_CONVERGED,
            SolverError::ComparisonViolation { .. } => EXIT_VIOLATION,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<SolverError<f64>> for CliError {
    fn from(e: SolverError<f64>) -> Self {
        (&e).into()
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        Self::config(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Converge(args) => cmd_converge(&args),
        Command::Sandwich(args) => cmd_sandwich(&args),
        Command::Decompose(args) => cmd_decompose(&args),
    }
}

const CONFIG_KEYS: [&str; 20] = [
    "problem",
    "domain",
    "radius",
    "semi-axes",
    "dims",
    "h",
    "h-list",
    "lambda-m",
    "method",
    "theta",
    "tol",
    "max-iter",
    "reference",
    "k-list",
    "delta-hat",
    "delta1-min",
    "comparison-trials",
    "out",
    "seed",
    "no-timing",
];

/// Fully merged settings for the run subcommands.
#[derive(Debug, Clone)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub k_list: Vec<f64>,
    pub comparison_trials: usize,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

fn merged_map(args: &RunArgs) -> Result<(BTreeMap<String, String>, Params), CliError> {
    let mut map = BTreeMap::new();
    let mut params = Params::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        for (key, value) in parse_config_text(&text)? {
            if let Some(name) = key.strip_prefix("param.") {
                params.0.insert(name.to_string(), value);
            } else if CONFIG_KEYS.contains(&key.as_str()) {
                map.insert(key, value);
            } else {
                return Err(CliError::config(format!("{}: unknown key '{key}'", path.display())));
            }
        }
    }
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    set("problem", args.problem.clone());
    set("domain", args.domain.clone());
    set("radius", args.radius.map(|v| v.to_string()));
    set("semi-axes", args.semi_axes.clone());
    set("dims", args.dims.map(|v| v.to_string()));
    set("h", args.h.map(|v| v.to_string()));
    set("h-list", args.h_list.clone());
    set("lambda-m", args.lambda_m.map(|v| v.to_string()));
    set("method", args.method.clone());
    set("theta", args.theta.map(|v| v.to_string()));
    set("tol", args.tol.map(|v| v.to_string()));
    set("max-iter", args.max_iter.map(|v| v.to_string()));
    set("reference", args.reference.clone());
    set("k-list", args.k_list.clone());
    set("delta-hat", args.delta_hat.map(|v| v.to_string()));
    set("delta1-min", args.delta1_min.map(|v| v.to_string()));
    set("comparison-trials", args.comparison_trials.map(|v| v.to_string()));
    set("out", args.out.as_ref().map(|p| p.display().to_string()));
    set("seed", args.seed.map(|v| v.to_string()));
    if args.no_timing {
        set("no-timing", Some("true".into()));
    }
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--param expects KEY=VALUE, got '{kv}'")))?;
        params.0.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((map, params))
}

fn parsed<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("{key}: cannot parse '{v}': {e}"))))
        .transpose()
}

/// Merges config file and flags into typed settings.
pub fn settings(args: &RunArgs) -> Result<Settings, CliError> {
    let (map, params) = merged_map(args)?;
    let defaults = ExperimentConfig::default();
    let radius = parsed::<f64>(&map, "radius")?.unwrap_or(1.0);
    let domain = match map.get("domain").map(String::as_str).unwrap_or("ball") {
        "ball" => DomainSpec::Ball { dims: parsed(&map, "dims")?.unwrap_or(2), radius },
        "interval" => DomainSpec::Interval { radius },
        "ellipsoid" => {
            let axes = map.get("semi-axes").ok_or_else(|| CliError::config("ellipsoid domain needs --semi-axes"))?;
            DomainSpec::Ellipsoid { semi_axes: parse_real_list(axes)? }
        }
        other => return Err(CliError::config(format!("unknown domain '{other}' (expected ball, ellipsoid or interval)"))),
    };
    let h_list = match (map.get("h-list"), parsed::<f64>(&map, "h")?) {
        (Some(list), _) => parse_real_list(list)?,
        (None, Some(h)) => vec![h],
        (None, None) => defaults.h_list.clone(),
    };
    let mut solver_cfg = SolverConfig::<f64>::default();
    if let Some(m) = map.get("method") {
        solver_cfg.method = m.parse::<Method>().map_err(CliError::config)?;
    }
    if let Some(theta) = parsed(&map, "theta")? {
        solver_cfg.theta = theta;
    }
    solver_cfg.tol = parsed(&map, "tol")?;
    solver_cfg.max_iter = parsed(&map, "max-iter")?;
    if let Some(d1) = parsed(&map, "delta1-min")? {
        solver_cfg.delta1_min = d1;
    }
    solver_cfg.validate().map_err(CliError::from)?;
    let reference = match map.get("reference") {
        Some(r) => r.parse::<Reference>().map_err(CliError::config)?,
        None => Reference::Exact,
    };
    let experiment = ExperimentConfig {
        problem: map.get("problem").cloned().unwrap_or(defaults.problem),
        params,
        domain,
        h_list,
        lambda_m: parsed(&map, "lambda-m")?.unwrap_or(1),
        solver: solver_cfg,
        reference,
        delta_hat: parsed(&map, "delta-hat")?,
        seed: parsed(&map, "seed")?.unwrap_or(0),
        record_timing: !parsed::<bool>(&map, "no-timing")?.unwrap_or(false),
    };
    let k_list = match map.get("k-list") {
        Some(list) => parse_real_list(list)?,
        None => vec![0.0, 1.0, 2.0, 4.0, 8.0],
    };
    Ok(Settings {
        experiment,
        k_list,
        comparison_trials: parsed(&map, "comparison-trials")?.unwrap_or(0),
        out: map.get("out").map(PathBuf::from),
        quiet: args.quiet,
    })
}

fn emit(out: Option<&Path>, data: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, data).map_err(|e| CliError::config(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(data.as_bytes()).map_err(|e| CliError::config(format!("stdout: {e}")))
        }
    }
}

fn cmd_solve(args: &RunArgs) -> Result<(), CliError> {
    let s = settings(args)?;
    let cfg = &s.experiment;
    let (shape, problem) = cfg.build_problem()?;
    let dirs = cfg.directions()?;
    let h = *cfg.h_list.first().ok_or_else(|| CliError::config("no mesh size given"))?;
    let grid = Arc::new(Grid::build(shape.to_domain(), h, dirs)?);
    let op = solver::assemble(&problem, &grid, cfg.solver.delta1_min)?;
    let outcome = solver::solve_operator(&op, &cfg.solver, None);
    let (v, report) = match &outcome {
        Ok(pair) => pair,
        Err(e) => e.partial().ok_or_else(|| CliError::from(e))?,
    };
    let seconds = if cfg.record_timing { report.wall_time.as_secs_f64() } else { 0.0 };
    let mut text = String::new();
    for (k, val) in [
        ("problem", problem.name().to_string()),
        ("method", report.method.to_string()),
        ("h", h.to_string()),
        ("n_grid", grid.len().to_string()),
        ("n_interior", grid.interior().len().to_string()),
        ("interior_components", grid.interior_components().to_string()),
        ("iterations", report.iterations.to_string()),
        ("inner_sweeps", report.inner_sweeps.to_string()),
        ("final_residual", format!("{:e}", report.final_residual)),
        ("tol", format!("{:e}", report.tol)),
        ("converged", report.converged.to_string()),
        ("policy_fallback", report.policy_fallback.to_string()),
        ("min_basis_floor", format!("{}", report.min_basis_floor)),
        ("wall_time_seconds", format!("{seconds:.6}")),
    ] {
        writeln!(text, "{k}={val}").unwrap();
    }
    emit(s.out.as_deref(), &v.to_csv_string())?;
    if let Some(out) = &s.out {
        let mut path = out.clone().into_os_string();
        path.push(".report");
        fs::write(&path, &text).map_err(|e| CliError::config(format!("{}: {e}", Path::new(&path).display())))?;
    }
    if !s.quiet {
        eprint!("{text}");
    }
    if let Err(e) = outcome {
        return Err(e.into());
    }
    if s.comparison_trials > 0 {
        let r = solver::check_comparison(&op, s.comparison_trials, &cfg.solver, cfg.seed)?;
        if !s.quiet {
            eprintln!(
                "comparison: {} trials passed, min increment {:e}, min nonnegative-forcing value {:e}",
                r.trials, r.min_increment, r.min_nonnegative_solution
            );
        }
    }
    Ok(())
}

fn cmd_converge(args: &RunArgs) -> Result<(), CliError> {
    let s = settings(args)?;
    let table = run_convergence(&s.experiment)?;
    emit(s.out.as_deref(), &table.to_csv())?;
    if !s.quiet {
        for r in &table.rows {
            eprintln!("h={} error={:e} iterations={} min_basis_floor={}", r.h, r.error, r.iterations, r.min_basis_floor);
        }
        match table.fit {
            Some((rate, resid)) => eprintln!("fitted_rate={rate:.4} fit_residual={resid:.4}"),
            None if table.exact_to_tolerance => eprintln!("exact to tolerance; no rate fitted"),
            None => eprintln!("fewer than three positive errors; no rate fitted"),
        }
    }
    Ok(())
}

fn cmd_sandwich(args: &RunArgs) -> Result<(), CliError> {
    let s = settings(args)?;
    let report = run_sandwich(&s.experiment, &s.k_list)?;
    emit(s.out.as_deref(), &report.to_csv())?;
    if !s.quiet {
        for r in &report.rows {
            eprintln!(
                "K={} gap={:e} upper_excess={:e} lower_deficit={:e} upper_inactive={} lower_inactive={}",
                r.k, r.sup_gap, r.upper_excess, r.lower_deficit, r.upper_inactive, r.lower_inactive
            );
        }
    }
    report.ensure_ordering()?;
    if !report.monotone_in_k {
        return Err(CliError { code: EXIT_VIOLATION, message: "fused solutions are not monotone in K".into() });
    }
    Ok(())
}

/// Rows separated by `;` or newlines, entries by `,` or whitespace.
pub fn parse_matrix(text: &str) -> Result<Matrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(|c| c == ';' || c == '\n')
        .map(str::trim)
        .filter(|r| !r.is_empty() && !r.starts_with('#'))
        .map(|r| {
            r.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| CliError::config(format!("bad matrix entry '{t}': {e}"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config("matrix must be square and nonempty"));
    }
    Ok(Matrix::from_rows(&rows))
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    let text = match (&args.matrix, &args.matrix_file) {
        (Some(m), _) => m.clone(),
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::config("decompose needs --matrix or --matrix-file")),
    };
    let a = parse_matrix(&text)?;
    let d = a.rows();
    if args.lambda_m < 1 {
        return Err(CliError::config("lambda-m must be at least 1"));
    }
    let b = match &args.drift {
        Some(s) => parse_real_list(s)?,
        None => vec![0.0; d],
    };
    let dirs = generate_lambda(d, args.lambda_m);
    let dec = decompose(&a, &b, &dirs, args.delta1_min).map_err(|e| CliError::config(e.to_string()))?;
    let mut out = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("l{i}")).collect();
    writeln!(out, "{},weight", header.join(",")).unwrap();
    for (w, l) in dec.second_order.iter().zip(dirs.half_set()) {
        let comps: Vec<String> = l.components().iter().map(i64::to_string).collect();
        writeln!(out, "{},{}", comps.join(","), w).unwrap();
    }
    if dec.first_order.iter().any(|&w| w != 0.0) {
        writeln!(out, "# drift").unwrap();
        for (w, l) in dec.first_order.iter().zip(dirs.directions()) {
            if *w != 0.0 {
                let comps: Vec<String> = l.components().iter().map(i64::to_string).collect();
                writeln!(out, "# {},{}", comps.join(","), w).unwrap();
            }
        }
    }
    writeln!(out, "# basis_floor={}", dec.basis_floor).unwrap();
    emit(None, &out)
}
