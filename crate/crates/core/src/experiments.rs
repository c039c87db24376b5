//! Convergence studies, rate fitting and the K-truncation sandwich run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::grid::{Ball, Ellipsoid, Grid, GridError, GridFunction};
use crate::problem::catalog::{self, Params, Shape};
use crate::problem::make_pucci;
use crate::problem::{fuse, FuseMode, IsaacsProblem, ProblemError};
use crate::solver::{self, SolverConfig, SolverError};
use crate::stencil::{generate_lambda, DirectionSet};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("finest-grid reference needs h values that are dyadic multiples of the smallest; {h} is not")]
    NonNestedGrids { h: f64 },
    #[error("rate fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("problem '{0}' carries no exact solution; use the finest-grid reference")]
    MissingExactSolution(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("ordering violated at K = {k}, point {point:?}: {what} by {amount:e}")]
    OrderingViolation { k: f64, point: Vec<f64>, what: &'static str, amount: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    Exact,
    Finest,
}

impl FromStr for Reference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Reference::Exact),
            "finest" => Ok(Reference::Finest),
            other => Err(format!("unknown reference '{other}' (expected exact or finest)")),
        }
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::Exact => "exact",
            Reference::Finest => "finest",
        })
    }
}

/// Domains centered at the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Ball { dims: usize, radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
    Interval { radius: f64 },
}

impl DomainSpec {
    pub fn shape(&self) -> Result<Shape<f64>, ExperimentError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            DomainSpec::Ball { dims, radius } if *dims >= 1 && positive(*radius) => {
                Ok(Shape::Ball(Ball::centered(*dims, *radius)))
            }
            DomainSpec::Interval { radius } if positive(*radius) => Ok(Shape::Ball(Ball::centered(1, *radius))),
            DomainSpec::Ellipsoid { semi_axes } if !semi_axes.is_empty() && semi_axes.iter().all(|&e| positive(e)) => {
                Ok(Shape::Ellipsoid(Ellipsoid::centered(semi_axes.clone())))
            }
            other => Err(ExperimentError::InvalidConfig(format!("invalid domain {other:?}"))),
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            DomainSpec::Ball { dims, .. } => *dims,
            DomainSpec::Ellipsoid { semi_axes } => semi_axes.len(),
            DomainSpec::Interval { .. } => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: String,
    pub params: Params,
    pub domain: DomainSpec,
    /// Strictly decreasing mesh sizes.
    pub h_list: Vec<f64>,
    /// Max-norm bound `m` of the direction set.
    pub lambda_m: i64,
    pub solver: SolverConfig<f64>,
    pub reference: Reference,
    /// Ellipticity constant of the Pucci family; `None` uses the problem's `δ`.
    pub delta_hat: Option<f64>,
    pub seed: u64,
    /// Zero the wall-time column so that output files are reproducible byte
    /// for byte.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "poisson-ball".into(),
            params: Params::new(),
            domain: DomainSpec::Ball { dims: 2, radius: 1.0 },
            h_list: vec![0.2, 0.1, 0.05, 0.025],
            lambda_m: 1,
            solver: SolverConfig::default(),
            reference: Reference::Exact,
            delta_hat: None,
            seed: 0,
            record_timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn build_problem(&self) -> Result<(Shape<f64>, Arc<IsaacsProblem<f64>>), ExperimentError> {
        let shape = self.domain.shape()?;
        let problem = catalog::build(&self.problem, &self.params, &shape)?;
        Ok((shape, Arc::new(problem)))
    }

    pub fn directions(&self) -> Result<Arc<DirectionSet>, ExperimentError> {
        if self.lambda_m < 1 {
            return Err(ExperimentError::InvalidConfig("lambda-m must be at least 1".into()));
        }
        Ok(Arc::new(generate_lambda(self.domain.dims(), self.lambda_m)))
    }

    fn check_h_list(&self, min_len: usize) -> Result<(), ExperimentError> {
        if self.h_list.len() < min_len {
            return Err(ExperimentError::InvalidConfig(format!("h list needs at least {min_len} entries")));
        }
        if self.h_list.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(ExperimentError::InvalidConfig("h values must be positive".into()));
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ExperimentError::InvalidConfig("h list must be strictly decreasing".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n_grid: usize,
    pub n_interior: usize,
    pub error: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub tol: f64,
    pub min_basis_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub problem: String,
    pub reference: Reference,
    /// Sorted by decreasing `h`.
    pub rows: Vec<ConvergenceRow>,
    /// `(β̂, fit residual)` when at least three rows have positive error.
    pub fit: Option<(f64, f64)>,
    /// Every error is within `10 · tol` of zero.
    pub exact_to_tolerance: bool,
}

impl ConvergenceTable {
    pub fn errors_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,n_grid,n_interior,error,iterations,seconds\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.16e},{},{:.6}", r.h, r.n_grid, r.n_interior, r.error, r.iterations, r.seconds)
                .unwrap();
        }
        match self.fit {
            Some((rate, resid)) => {
                writeln!(out, "# fitted_rate={rate:.12}").unwrap();
                writeln!(out, "# fit_residual={resid:.12}").unwrap();
            }
            None => {
                out.push_str("# fitted_rate=undefined\n# fit_residual=undefined\n");
            }
        }
        if self.exact_to_tolerance {
            out.push_str("# exact_to_tolerance=true\n");
        }
        out
    }
}

/// Ordinary least-squares slope of `log error` against `log h`, with the
/// largest absolute deviation of the fitted line.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64), ExperimentError> {
    if pairs.len() < 3 {
        return Err(ExperimentError::DegenerateFit(format!("{} points, need at least 3", pairs.len())));
    }
    if let Some(&(h, e)) = pairs.iter().find(|&&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(ExperimentError::DegenerateFit(format!("non-positive entry (h = {h}, error = {e})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::DegenerateFit("all h values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok((slope, resid))
}

/// `2^j` with `coarse = 2^j · fine`, if it exists.
fn dyadic_factor(coarse: f64, fine: f64) -> Option<i64> {
    let ratio = coarse / fine;
    let j = ratio.log2().round();
    ((ratio - j.exp2()).abs() <= 1e-9 * ratio && (0.0..=30.0).contains(&j)).then(|| j.exp2() as i64)
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable, ExperimentError> {
    cfg.check_h_list(2)?;
    let (shape, problem) = cfg.build_problem()?;
    let dirs = cfg.directions()?;
    let h_min = *cfg.h_list.last().unwrap();
    let factors: Vec<i64> = match cfg.reference {
        Reference::Exact => {
            if problem.exact_solution().is_none() {
                return Err(ExperimentError::MissingExactSolution(cfg.problem.clone()));
            }
            Vec::new()
        }
        Reference::Finest => cfg
            .h_list
            .iter()
            .map(|&h| dyadic_factor(h, h_min).ok_or(ExperimentError::NonNestedGrids { h }))
            .collect::<Result<_, _>>()?,
    };
    let domain = shape.to_domain();

    let mut solutions: Vec<GridFunction<f64>> = Vec::new();
    let mut rows = Vec::new();
    for &h in &cfg.h_list {
        let start = Instant::now();
        let grid = Arc::new(Grid::build(Arc::clone(&domain), h, Arc::clone(&dirs))?);
        let (v, report) = solver::solve(&problem, &grid, &cfg.solver)?;
        let seconds = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let error = match cfg.reference {
            Reference::Exact => {
                let exact = problem.exact_solution().unwrap();
                (0..grid.len()).map(|i| (v.values()[i] - exact.value(grid.point(i))).abs()).fold(0.0, f64::max)
            }
            Reference::Finest => f64::NAN,
        };
        rows.push(ConvergenceRow {
            h,
            n_grid: grid.len(),
            n_interior: grid.interior().len(),
            error,
            iterations: report.iterations,
            seconds,
            tol: report.tol,
            min_basis_floor: report.min_basis_floor,
        });
        solutions.push(v);
    }

    if cfg.reference == Reference::Finest {
        let fine = solutions.last().unwrap();
        let fine_grid = fine.grid();
        for (k, row) in rows.iter_mut().enumerate() {
            let coarse = &solutions[k];
            let scale = factors[k];
            let mut err: f64 = 0.0;
            for i in 0..coarse.grid().len() {
                let z: Vec<i64> = coarse.grid().lattice_coords(i).iter().map(|&c| c * scale).collect();
                // coarse boundary points lying outside the fine grid carry v = 0 on both sides
                let reference = fine_grid.index_of(&z).map_or(0.0, |j| fine.values()[j]);
                err = err.max((coarse.values()[i] - reference).abs());
            }
            row.error = err;
        }
    }

    let positive: Vec<(f64, f64)> = rows.iter().filter(|r| r.error > 0.0).map(|r| (r.h, r.error)).collect();
    let fit = if positive.len() >= 3 { Some(fit_rate(&positive)?) } else { None };
    let exact_to_tolerance = rows.iter().all(|r| r.error <= 10.0 * r.tol);
    Ok(ConvergenceTable {
        problem: problem.name().to_string(),
        reference: cfg.reference,
        rows,
        fit: if exact_to_tolerance { None } else { fit },
        exact_to_tolerance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichRow {
    pub k: f64,
    /// `sup over G_h of v^{+K} − v^{−K}`.
    pub sup_gap: f64,
    pub ordering_ok: bool,
    /// `sup |v^{+K} − v_h|` and `sup |v^{−K} − v_h|`.
    pub upper_excess: f64,
    pub lower_deficit: f64,
    /// The realizing maximizer (resp. minimizer) of the fused problem lies in
    /// the base control set at every interior point.
    pub upper_inactive: bool,
    pub lower_inactive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub k: f64,
    pub point: Vec<f64>,
    pub what: &'static str,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub h: f64,
    pub tol: f64,
    pub rows: Vec<SandwichRow>,
    /// `v^{+K}` nonincreasing and `v^{−K}` nondecreasing in `K`, to `10 · tol`.
    pub monotone_in_k: bool,
    pub first_violation: Option<Violation>,
}

impl SandwichReport {
    pub fn gap_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_gap <= w[0].sup_gap + 10.0 * self.tol)
    }

    pub fn ensure_ordering(&self) -> Result<(), ExperimentError> {
        match &self.first_violation {
            None => Ok(()),
            Some(v) => Err(ExperimentError::OrderingViolation {
                k: v.k,
                point: v.point.clone(),
                what: v.what,
                amount: v.amount,
            }),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,sup_gap,ordering_ok\n");
        for r in &self.rows {
            writeln!(out, "{},{:.16e},{}", r.k, r.sup_gap, r.ordering_ok).unwrap();
        }
        out
    }
}

/// Solves the base problem and its max- and min-fused truncations for each
/// `K` at the first mesh size of the config, and checks
/// `v^{−K} ≤ v_h ≤ v^{+K}` together with monotonicity in `K`.
pub fn run_sandwich(cfg: &ExperimentConfig, k_list: &[f64]) -> Result<SandwichReport, ExperimentError> {
    cfg.check_h_list(1)?;
    if k_list.is_empty() || k_list.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(ExperimentError::InvalidConfig("K list must be nonempty with finite K ≥ 0".into()));
    }
    if k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::InvalidConfig("K list must be strictly increasing".into()));
    }
    let (shape, problem) = cfg.build_problem()?;
    let dirs = cfg.directions()?;
    let h = cfg.h_list[0];
    let grid = Arc::new(Grid::build(shape.to_domain(), h, Arc::clone(&dirs))?);
    let pucci = Arc::new(make_pucci(cfg.delta_hat.unwrap_or_else(|| problem.delta()), &dirs));

    let base_op = solver::assemble(&problem, &grid, cfg.solver.delta1_min)?;
    let tol = cfg.solver.resolved_tol(base_op.forcing_sup());
    let scfg = SolverConfig { tol: Some(tol), ..cfg.solver.clone() };
    let (v, _) = solver::solve_operator(&base_op, &scfg, None)?;
    let slack = 10.0 * tol;

    let mut rows = Vec::new();
    let mut first_violation: Option<Violation> = None;
    let mut monotone_in_k = true;
    let mut prev: Option<(GridFunction<f64>, GridFunction<f64>)> = None;
    let record = |k: f64, i: usize, what: &'static str, amount: f64, slot: &mut Option<Violation>| {
        if slot.is_none() {
            *slot = Some(Violation { k, point: grid.point(i).to_vec(), what, amount });
        }
    };

    for &k in k_list {
        // the fused solutions are unique, so each solve starts from the
        // closest solution already computed
        let solve_fused = |mode, start: &[f64]| -> Result<(GridFunction<f64>, bool), ExperimentError> {
            let fused = fuse(Arc::clone(&problem), Arc::clone(&pucci), k, mode)?;
            let op = solver::assemble(fused.realized(), &grid, cfg.solver.delta1_min)?;
            let (w, _) = solver::solve_operator(&op, &scfg, Some(start))?;
            let inactive = (0..grid.interior().len()).all(|o| {
                let s = op.evaluate(o, w.values());
                fused.is_base_control(s.alpha, s.beta)
            });
            Ok((w, inactive))
        };
        let (upper_start, lower_start) = match &prev {
            Some((pu, pl)) => (pu.values(), pl.values()),
            None => (v.values(), v.values()),
        };
        let (upper, upper_inactive) = solve_fused(FuseMode::Max, upper_start)?;
        let (lower, lower_inactive) = solve_fused(FuseMode::Min, lower_start)?;

        let mut ordering_ok = true;
        let (mut gap, mut excess, mut deficit) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
        for i in 0..grid.len() {
            let (lo, mid, hi) = (lower.values()[i], v.values()[i], upper.values()[i]);
            gap = gap.max(hi - lo);
            excess = excess.max((hi - mid).abs());
            deficit = deficit.max((mid - lo).abs());
            if mid > hi + slack {
                ordering_ok = false;
                record(k, i, "v_h above v^{+K}", mid - hi, &mut first_violation);
            }
            if lo > mid + slack {
                ordering_ok = false;
                record(k, i, "v^{-K} above v_h", lo - mid, &mut first_violation);
            }
            if let Some((pu, pl)) = &prev {
                if hi > pu.values()[i] + slack || lo < pl.values()[i] - slack {
                    monotone_in_k = false;
                }
            }
        }
        rows.push(SandwichRow {
            k,
            sup_gap: gap,
            ordering_ok,
            upper_excess: excess,
            lower_deficit: deficit,
            upper_inactive,
            lower_inactive,
        });
        prev = Some((upper, lower));
    }
    Ok(SandwichReport { h, tol, rows, monotone_in_k, first_violation })
}

/// Parses flat `key = value` lines; `#` starts a comment and blank lines are
/// skipped. Later duplicates override earlier ones.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ExperimentError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ExperimentError::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ExperimentError::InvalidConfig(format!("line {}: empty key", n + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Comma-separated reals.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>, ExperimentError> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| ExperimentError::InvalidConfig(format!("bad number '{}': {e}", t.trim())))
        })
        .collect()
}
