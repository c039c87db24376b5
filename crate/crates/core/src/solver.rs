//! Solvers for `H_h[v_h] = 0` on `G_h^o` with `v_h = 0` on `∂_hG`.
//!
//! All methods iterate on the assembled [`DiscreteOperator`]. The damped
//! update `u ← u + τ H_h[u]` with `τ(x) = θ / max diagonal` is monotone and
//! nonexpansive for `θ ≤ 1`, which makes Jacobi and Gauss-Seidel sweeps
//! convergent; policy iteration freezes the realizing control pair at every
//! point and solves the resulting linear system by the same sweeps.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discrete_ops::{DiscreteOperator, OpsError};
use crate::grid::{Grid, GridFunction};
use crate::problem::IsaacsProblem;
use crate::scalar::Real;
use crate::stencil::DecompositionCache;

pub const DEFAULT_DELTA1_MIN: f64 = 1e-6;
pub const DEFAULT_SWEEP_CAP: usize = 1_000_000;
pub const DEFAULT_POLICY_CAP: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Jacobi,
    GaussSeidel,
    Policy,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Jacobi, Method::GaussSeidel, Method::Policy];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Jacobi => "jacobi",
            Method::GaussSeidel => "gauss-seidel",
            Method::Policy => "policy",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(Method::Jacobi),
            "gauss-seidel" | "gs" => Ok(Method::GaussSeidel),
            "policy" => Ok(Method::Policy),
            other => Err(format!("unknown method '{other}' (expected jacobi, gauss-seidel or policy)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub method: Method,
    /// Damping `θ ∈ (0, 1]`.
    pub theta: T,
    /// Residual target; `None` means `1e-9 · (1 + sup|f|)`.
    pub tol: Option<T>,
    /// Sweep cap for Jacobi and Gauss-Seidel, outer cap for policy
    /// iteration; `None` selects the per-method default.
    pub max_iter: Option<usize>,
    /// Cadence (in iterations) of the sampled residual history.
    pub report_every: usize,
    /// Smallest acceptable coordinate-direction weight in decompositions.
    pub delta1_min: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::GaussSeidel,
            theta: T::one(),
            tol: None,
            max_iter: None,
            report_every: 100,
            delta1_min: T::lit(DEFAULT_DELTA1_MIN),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError<T>> {
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return Err(SolverError::InvalidConfig(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if let Some(tol) = self.tol {
            if !(tol > T::zero()) {
                return Err(SolverError::InvalidConfig(format!("tol must be positive, got {tol}")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.report_every == 0 {
            return Err(SolverError::InvalidConfig("report_every must be at least 1".into()));
        }
        if !(self.delta1_min > T::zero()) {
            return Err(SolverError::InvalidConfig("delta1_min must be positive".into()));
        }
        Ok(())
    }

    /// The tolerance actually used for an operator with forcing bound `sup|f|`.
    pub fn resolved_tol(&self, forcing_sup: T) -> T {
        self.tol.unwrap_or_else(|| T::lit(1e-9) * (T::one() + forcing_sup))
    }

    pub fn resolved_max_iter(&self) -> usize {
        self.max_iter.unwrap_or(match self.method {
            Method::Policy => DEFAULT_POLICY_CAP,
            _ => DEFAULT_SWEEP_CAP,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport<T> {
    pub method: Method,
    /// Sweeps for Jacobi and Gauss-Seidel, outer iterations for policy.
    pub iterations: usize,
    /// Gauss-Seidel sweeps spent inside policy iteration's linear solves
    /// and any fallback.
    pub inner_sweeps: usize,
    pub final_residual: T,
    /// `(iteration, max |H_h[u]|)` sampled every `report_every` iterations
    /// and at termination.
    pub residual_history: Vec<(usize, T)>,
    /// `(iteration, max |τ H_h[u]|)`; recorded by Jacobi only.
    pub scaled_residual_history: Vec<(usize, T)>,
    pub wall_time: Duration,
    /// Smallest coordinate-direction weight over all decompositions used.
    pub min_basis_floor: T,
    pub converged: bool,
    pub tol: T,
    /// Largest `sup|u^k|` over all iterates.
    pub max_iterate_norm: T,
    /// Policy iteration revisited a control field and switched to sweeps.
    pub policy_fallback: bool,
}

#[derive(Debug, Error)]
pub enum SolverError<T: Real> {
    #[error("solver stopped after {} iterations with residual {} (tol {})", .0.1.iterations, .0.1.final_residual, .0.1.tol)]
    MaxIterExceeded(Box<(GridFunction<T>, SolverReport<T>)>),
    #[error("all diagonal coefficients vanish at interior point {point:?}")]
    DegenerateStencil { point: Vec<i64> },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error("comparison violated in trial {trial} at {point:?}: {what} short by {deficit}")]
    ComparisonViolation { trial: usize, point: Vec<T>, what: &'static str, deficit: T },
}

impl<T: Real> SolverError<T> {
    /// The best iterate when the iteration cap was hit.
    pub fn partial(&self) -> Option<&(GridFunction<T>, SolverReport<T>)> {
        match self {
            SolverError::MaxIterExceeded(b) => Some(b),
            _ => None,
        }
    }
}

/// Assembles `H_h` for `problem` on `grid` with a fresh decomposition cache.
pub fn assemble<T: Real>(
    problem: &IsaacsProblem<T>,
    grid: &Arc<Grid<T>>,
    delta1_min: T,
) -> Result<DiscreteOperator<T>, SolverError<T>> {
    let cache = DecompositionCache::new(Arc::clone(grid.directions()), delta1_min);
    Ok(DiscreteOperator::assemble(problem, grid, &cache)?)
}

/// Solves from `u⁰ ≡ 0`.
pub fn solve<T: Real>(
    problem: &IsaacsProblem<T>,
    grid: &Arc<Grid<T>>,
    config: &SolverConfig<T>,
) -> Result<(GridFunction<T>, SolverReport<T>), SolverError<T>> {
    config.validate()?;
    let op = assemble(problem, grid, config.delta1_min)?;
    solve_operator(&op, config, None)
}

/// Solves `H_h[v] = 0` for an assembled operator. `initial` supplies `u⁰`
/// (its boundary values are ignored and set to zero).
pub fn solve_operator<T: Real>(
    op: &DiscreteOperator<T>,
    config: &SolverConfig<T>,
    initial: Option<&[T]>,
) -> Result<(GridFunction<T>, SolverReport<T>), SolverError<T>> {
    config.validate()?;
    let start = Instant::now();
    let grid = op.grid();
    let mut u = vec![T::zero(); grid.len()];
    if let Some(init) = initial {
        assert_eq!(init.len(), grid.len(), "initial iterate must cover G_h");
        for &i in grid.interior() {
            u[i] = init[i];
        }
    }
    let tau = timesteps(op, config.theta)?;
    let tol = config.resolved_tol(op.forcing_sup());
    let mut report = SolverReport {
        method: config.method,
        iterations: 0,
        inner_sweeps: 0,
        final_residual: T::infinity(),
        residual_history: Vec::new(),
        scaled_residual_history: Vec::new(),
        wall_time: Duration::ZERO,
        min_basis_floor: op.min_basis_floor(),
        converged: false,
        tol,
        max_iterate_norm: sup_abs(&u),
        policy_fallback: false,
    };
    let cap = config.resolved_max_iter();
    match config.method {
        Method::Jacobi => jacobi(op, &tau, &mut u, tol, cap, config.report_every, &mut report),
        Method::GaussSeidel => {
            let out = gauss_seidel(op, &tau, &mut u, tol, cap, config.report_every);
            report.iterations = out.sweeps;
            report.final_residual = out.residual;
            report.residual_history = out.history;
            report.max_iterate_norm = report.max_iterate_norm.max(out.max_norm);
        }
        Method::Policy => policy(op, &tau, &mut u, tol, cap, config.report_every, &mut report),
    }
    report.converged = report.final_residual <= tol;
    report.wall_time = start.elapsed();
    let v = GridFunction::from_values(Arc::clone(grid), u);
    if report.converged {
        Ok((v, report))
    } else {
        Err(SolverError::MaxIterExceeded(Box::new((v, report))))
    }
}

/// `max over G_h^o of |H_h[v]|` evaluated directly from the problem.
pub fn residual<T: Real>(
    problem: &IsaacsProblem<T>,
    v: &GridFunction<T>,
    cache: &DecompositionCache<T>,
) -> Result<T, OpsError> {
    let mut r = T::zero();
    for &i in v.grid().interior() {
        r = r.max(crate::discrete_ops::apply_h_h(problem, v, i, cache)?.value.abs());
    }
    Ok(r)
}

fn timesteps<T: Real>(op: &DiscreteOperator<T>, theta: T) -> Result<Vec<T>, SolverError<T>> {
    let grid = op.grid();
    (0..grid.interior().len())
        .map(|o| {
            op.local_timestep(o, theta).ok_or_else(|| SolverError::DegenerateStencil {
                point: grid.lattice_coords(grid.interior()[o]).to_vec(),
            })
        })
        .collect()
}

fn sup_abs<T: Real>(u: &[T]) -> T {
    u.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn jacobi<T: Real>(
    op: &DiscreteOperator<T>,
    tau: &[T],
    u: &mut [T],
    tol: T,
    cap: usize,
    every: usize,
    report: &mut SolverReport<T>,
) {
    let interior = op.grid().interior();
    let mut update = vec![T::zero(); interior.len()];
    let mut k = 0;
    loop {
        let mut res = T::zero();
        let mut scaled = T::zero();
        for (o, slot) in update.iter_mut().enumerate() {
            let hv = op.evaluate(o, u).value;
            res = res.max(hv.abs());
            *slot = tau[o] * hv;
            scaled = scaled.max(slot.abs());
        }
        let done = res <= tol || k == cap;
        if done || k % every == 0 {
            report.residual_history.push((k, res));
            report.scaled_residual_history.push((k, scaled));
        }
        if done {
            report.iterations = k;
            report.final_residual = res;
            return;
        }
        for (o, &i) in interior.iter().enumerate() {
            u[i] = u[i] + update[o];
        }
        report.max_iterate_norm = report.max_iterate_norm.max(sup_abs(u));
        k += 1;
    }
}

struct SweepOutcome<T> {
    sweeps: usize,
    residual: T,
    history: Vec<(usize, T)>,
    max_norm: T,
}

/// In-place damped sweeps, alternating forward and reverse order. The
/// largest `|H_h|` seen during a sweep is a cheap stopping signal that is
/// confirmed with the true residual before returning.
fn gauss_seidel<T: Real>(
    op: &DiscreteOperator<T>,
    tau: &[T],
    u: &mut [T],
    tol: T,
    cap: usize,
    every: usize,
) -> SweepOutcome<T> {
    let interior = op.grid().interior();
    let n = interior.len();
    let mut history = Vec::new();
    let mut max_norm = sup_abs(u);
    let mut res = op.residual(u);
    history.push((0, res));
    let mut sweeps = 0;
    while res > tol && sweeps < cap {
        let mut seen = T::zero();
        for step in 0..n {
            let o = if sweeps % 2 == 0 { step } else { n - 1 - step };
            let i = interior[o];
            let hv = op.evaluate(o, u).value;
            seen = seen.max(hv.abs());
            u[i] = u[i] + tau[o] * hv;
            max_norm = max_norm.max(u[i].abs());
        }
        sweeps += 1;
        let sampled = sweeps % every == 0;
        if seen <= tol || sampled || sweeps == cap {
            res = op.residual(u);
            if sampled || res <= tol || sweeps == cap {
                history.push((sweeps, res));
            }
        }
    }
    if history.last().map(|h| h.0) != Some(sweeps) {
        history.push((sweeps, res));
    }
    SweepOutcome { sweeps, residual: res, history, max_norm }
}

fn policy<T: Real>(
    op: &DiscreteOperator<T>,
    tau: &[T],
    u: &mut [T],
    tol: T,
    cap: usize,
    every: usize,
    report: &mut SolverReport<T>,
) {
    let n = op.grid().interior().len();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut outer = 0;
    loop {
        let mut res = T::zero();
        let mut field = Vec::with_capacity(n);
        for o in 0..n {
            let s = op.evaluate(o, u);
            res = res.max(s.value.abs());
            field.push(s.alpha * op.n_b() + s.beta);
        }
        report.residual_history.push((outer, res));
        report.final_residual = res;
        report.iterations = outer;
        if res <= tol || outer == cap {
            return;
        }
        if !seen.insert(field.clone()) {
            report.policy_fallback = true;
            let out = gauss_seidel(op, tau, u, tol, DEFAULT_SWEEP_CAP, every);
            report.inner_sweeps += out.sweeps;
            report.final_residual = out.residual;
            report.max_iterate_norm = report.max_iterate_norm.max(out.max_norm);
            report.residual_history.push((outer, out.residual));
            return;
        }
        let frozen = op.frozen(&field);
        let inner_tol = T::lit(0.1) * tol;
        let out = gauss_seidel(&frozen, tau, u, inner_tol, DEFAULT_SWEEP_CAP, every);
        report.inner_sweeps += out.sweeps;
        report.max_iterate_norm = report.max_iterate_norm.max(out.max_norm);
        outer += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport<T> {
    pub trials: usize,
    /// `min over trials and G_h of v[f+g] − v[f]`.
    pub min_increment: T,
    /// `min over trials and G_h of v[f]` for nonnegative `f`.
    pub min_nonnegative_solution: T,
    pub tol: T,
}

/// Randomized check of the discrete comparison principle.
///
/// Each trial draws forcing `f^{αβ}(x) ∈ [−1, 1]` independently per point and
/// control pair and `g(x) ∈ [0, 1]` per point, solves with `f` and `f + g`,
/// and requires `v[f + g] ≥ v[f] − 2 tol`. It then draws `f^{αβ}(x) ∈ [0, 1]`
/// and requires `v[f] ≥ −2 tol`.
pub fn check_comparison<T: Real>(
    op: &DiscreteOperator<T>,
    trials: usize,
    config: &SolverConfig<T>,
    seed: u64,
) -> Result<ComparisonReport<T>, SolverError<T>> {
    if trials == 0 {
        return Err(SolverError::InvalidConfig("trials must be at least 1".into()));
    }
    let grid = op.grid();
    let n = grid.interior().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // forcing magnitudes stay ≤ 2, so one tolerance serves every solve
    let tol = config.tol.unwrap_or(T::lit(3e-9));
    let cfg = SolverConfig { tol: Some(tol), ..config.clone() };
    let mut report = ComparisonReport {
        trials,
        min_increment: T::infinity(),
        min_nonnegative_solution: T::infinity(),
        tol,
    };
    let witness = |i: usize| grid.point(i).to_vec();
    for trial in 0..trials {
        let f: Vec<T> = (0..n * op.n_pairs()).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect();
        let g: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(0.0..=1.0))).collect();
        let np = op.n_pairs();
        let base = op.with_forcing(|o, p| f[o * np + p]);
        let raised = op.with_forcing(|o, p| f[o * np + p] + g[o]);
        let (v, _) = solve_operator(&base, &cfg, None)?;
        let (w, _) = solve_operator(&raised, &cfg, None)?;
        for i in 0..grid.len() {
            let inc = w.values()[i] - v.values()[i];
            report.min_increment = report.min_increment.min(inc);
            if inc < -T::lit(2.0) * tol {
                return Err(SolverError::ComparisonViolation {
                    trial,
                    point: witness(i),
                    what: "v[f+g] - v[f]",
                    deficit: -inc,
                });
            }
        }
        let nonneg: Vec<T> = (0..n * np).map(|_| T::lit(rng.gen_range(0.0..=1.0))).collect();
        let (p, _) = solve_operator(&op.with_forcing(|o, q| nonneg[o * np + q]), &cfg, None)?;
        for (i, &val) in p.values().iter().enumerate() {
            report.min_nonnegative_solution = report.min_nonnegative_solution.min(val);
            if val < -T::lit(2.0) * tol {
                return Err(SolverError::ComparisonViolation {
                    trial,
                    point: witness(i),
                    what: "v[f >= 0]",
                    deficit: -val,
                });
            }
        }
    }
    Ok(report)
}

/// Uniform random values in `[−1, 1]` on `G_h^o`, zero on `∂_hG`.
pub fn random_iterate<T: Real>(grid: &Grid<T>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![T::zero(); grid.len()];
    for &i in grid.interior() {
        u[i] = T::lit(rng.gen_range(-1.0..=1.0));
    }
    u
}
