//! Finite differences `δ_{h,l}`, `Δ_{h,l}`, the linear operators `L_h^{αβ}`,
//! the sup-inf operator `H_h`, and their continuous counterparts.

mod assembly;

use std::sync::Arc;

use thiserror::Error;

use crate::fields::SmoothField;
use crate::grid::{restrict, Grid, GridError, GridFunction};
use crate::linalg::{dot, Matrix};
use crate::problem::IsaacsProblem;
use crate::scalar::Real;
use crate::stencil::{DecompositionCache, Direction, StencilError};

pub use assembly::DiscreteOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpsError {
    #[error("stencil escapes G_h at lattice point {point:?} along {direction:?}")]
    StencilEscape { point: Vec<i64>, direction: Vec<i64> },
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Pointwise jet `(u′₀, u′₁..u′_d, u″)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol<T> {
    pub u0: T,
    pub grad: Vec<T>,
    pub hess: Matrix<T>,
}

impl<T: Real> Symbol<T> {
    pub fn zero(d: usize) -> Self {
        Self { u0: T::zero(), grad: vec![T::zero(); d], hess: Matrix::zeros(d, d) }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-T::one())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { u0: self.u0 * s, grad: self.grad.iter().map(|&g| g * s).collect(), hess: self.hess.scale(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            u0: self.u0 + other.u0,
            grad: self.grad.iter().zip(&other.grad).map(|(&a, &b)| a + b).collect(),
            hess: self.hess.add(&other.hess),
        }
    }

    pub fn of_field(v: &dyn SmoothField<T>, x: &[T]) -> Self {
        Self { u0: v.value(x), grad: v.gradient(x), hess: v.hessian(x) }
    }
}

/// Value of a payoff table together with the realizing control pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupInf<T> {
    pub value: T,
    pub alpha: usize,
    pub beta: usize,
}

/// `max_α min_β value(α, β)`; ties go to the lowest index on both sides.
#[inline]
pub fn sup_inf_by<T: Real, F: FnMut(usize, usize) -> T>(n_a: usize, n_b: usize, mut value: F) -> SupInf<T> {
    let mut best = SupInf { value: T::neg_infinity(), alpha: 0, beta: 0 };
    for alpha in 0..n_a {
        let mut inner = value(alpha, 0);
        let mut inner_beta = 0;
        for beta in 1..n_b {
            let v = value(alpha, beta);
            if v < inner {
                inner = v;
                inner_beta = beta;
            }
        }
        if alpha == 0 || inner > best.value {
            best = SupInf { value: inner, alpha, beta: inner_beta };
        }
    }
    best
}

/// Sup-inf of a row-major `n_a × n_b` table.
pub fn sup_inf<T: Real>(table: &[T], n_a: usize, n_b: usize) -> SupInf<T> {
    assert_eq!(table.len(), n_a * n_b);
    sup_inf_by(n_a, n_b, |a, b| table[a * n_b + b])
}

/// `min_β max_α` of a row-major table.
pub fn inf_sup<T: Real>(table: &[T], n_a: usize, n_b: usize) -> T {
    (0..n_b)
        .map(|b| (0..n_a).map(|a| table[a * n_b + b]).fold(T::neg_infinity(), T::max))
        .fold(T::infinity(), T::min)
}

fn shifted<T: Real>(u: &GridFunction<T>, i: usize, l: &[i64]) -> Result<T, OpsError> {
    match u.grid().offset(i, l) {
        Some(j) => Ok(u.values()[j]),
        None => Err(OpsError::StencilEscape {
            point: u.grid().lattice_coords(i).to_vec(),
            direction: l.to_vec(),
        }),
    }
}

/// `(u(x + h l) − u(x)) / h`.
pub fn delta_h<T: Real>(u: &GridFunction<T>, i: usize, l: &Direction) -> Result<T, OpsError> {
    let fwd = shifted(u, i, l.components())?;
    Ok((fwd - u.values()[i]) / u.grid().h())
}

/// `(u(x + h l) − 2u(x) + u(x − h l)) / h²`.
pub fn delta2_h<T: Real>(u: &GridFunction<T>, i: usize, l: &Direction) -> Result<T, OpsError> {
    let fwd = shifted(u, i, l.components())?;
    let bwd = shifted(u, i, l.negated().components())?;
    let h = u.grid().h();
    Ok((fwd - T::lit(2.0) * u.values()[i] + bwd) / (h * h))
}

/// `L_h^{αβ} u(x) = Σ a_k Δ_{h,l_k} u + Σ b̄_k δ_{h,l_k} u − c u`, computed
/// directly from the difference quotients.
pub fn apply_l_h<T: Real>(
    problem: &IsaacsProblem<T>,
    alpha: usize,
    beta: usize,
    u: &GridFunction<T>,
    i: usize,
    cache: &DecompositionCache<T>,
) -> Result<T, OpsError> {
    let x = u.grid().point(i);
    let pc = problem.eval(alpha, beta, x);
    let dec = cache.get_or_compute(&pc.a, &pc.b)?;
    let dirs = cache.directions();
    let mut acc = -pc.c * u.values()[i];
    for (w, l) in dec.second_order.iter().zip(dirs.half_set()) {
        if *w != T::zero() {
            acc = acc + *w * delta2_h(u, i, l)?;
        }
    }
    for (w, l) in dec.first_order.iter().zip(dirs.directions()) {
        if *w != T::zero() {
            acc = acc + *w * delta_h(u, i, l)?;
        }
    }
    Ok(acc)
}

/// `H_h[u](x) = max_α min_β [L_h^{αβ} u(x) + f^{αβ}(x)]` with its argpair.
pub fn apply_h_h<T: Real>(
    problem: &IsaacsProblem<T>,
    u: &GridFunction<T>,
    i: usize,
    cache: &DecompositionCache<T>,
) -> Result<SupInf<T>, OpsError> {
    let x = u.grid().point(i);
    let mut table = Vec::with_capacity(problem.n_a() * problem.n_b());
    for alpha in 0..problem.n_a() {
        for beta in 0..problem.n_b() {
            let f = problem.eval(alpha, beta, x).f;
            table.push(apply_l_h(problem, alpha, beta, u, i, cache)? + f);
        }
    }
    Ok(sup_inf(&table, problem.n_a(), problem.n_b()))
}

/// `a : D²v + b · Dv − c v` at `x`.
pub fn apply_l_continuous<T: Real>(
    problem: &IsaacsProblem<T>,
    alpha: usize,
    beta: usize,
    v: &dyn SmoothField<T>,
    x: &[T],
) -> T {
    let pc = problem.eval(alpha, beta, x);
    pc.a.contract(&v.hessian(x)) + dot(&pc.b, &v.gradient(x)) - pc.c * v.value(x)
}

/// `max over G_h^o of |L^{αβ} v − L_h^{αβ} v|`.
pub fn consistency_gap<T: Real>(
    problem: &IsaacsProblem<T>,
    alpha: usize,
    beta: usize,
    v: &dyn SmoothField<T>,
    grid: &Arc<Grid<T>>,
    cache: &DecompositionCache<T>,
) -> Result<T, OpsError> {
    let u = restrict(|x| v.value(x), grid)?;
    let mut gap = T::zero();
    for &i in grid.interior() {
        let discrete = apply_l_h(problem, alpha, beta, &u, i, cache)?;
        let exact = apply_l_continuous(problem, alpha, beta, v, grid.point(i));
        gap = gap.max((discrete - exact).abs());
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FnField, Quadratic};
    use crate::grid::Ball;
    use crate::problem::catalog::{self, Params, Shape};
    use crate::stencil::generate_lambda;

    fn disk(h: f64, m: i64) -> Arc<Grid<f64>> {
        Arc::new(Grid::build(Arc::new(Ball::centered(2, 1.0)), h, Arc::new(generate_lambda(2, m))).unwrap())
    }

    fn interval(h: f64) -> Arc<Grid<f64>> {
        Arc::new(Grid::build(Arc::new(Ball::centered(1, 1.0)), h, Arc::new(generate_lambda(1, 1))).unwrap())
    }

    #[test]
    fn first_difference_examples() {
        let g = disk(0.1, 1);
        let lin = restrict(|x: &[f64]| 2.0 * x[0] - 3.0 * x[1], &g).unwrap();
        let c = GridFunction::constant(Arc::clone(&g), 4.0);
        for &i in g.interior().iter().step_by(17) {
            for l in g.directions().directions() {
                let expected = 2.0 * l.components()[0] as f64 - 3.0 * l.components()[1] as f64;
                assert!((delta_h(&lin, i, l).unwrap() - expected).abs() < 1e-12);
                assert_eq!(delta_h(&c, i, l).unwrap(), 0.0);
            }
        }
        let sq = restrict(|x: &[f64]| x[0] * x[0], &g).unwrap();
        let origin = g.index_of(&[0, 0]).unwrap();
        let e1 = &g.directions().half_set()[0];
        assert!((delta_h(&sq, origin, e1).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn second_difference_examples() {
        let g = disk(0.1, 2);
        let m = Matrix::from_f64_rows(&[&[1.0, 0.25], &[0.25, -2.0]]);
        let q = restrict(|x: &[f64]| x[0] * x[0] + 0.5 * x[0] * x[1] - 2.0 * x[1] * x[1], &g).unwrap();
        let lin = restrict(|x: &[f64]| x[0] - x[1], &g).unwrap();
        for &i in g.interior().iter().step_by(7) {
            for l in g.directions().half_set() {
                let lv: Vec<f64> = l.components().iter().map(|&c| c as f64).collect();
                let expected = 2.0 * dot(&lv, &m.mul_vec(&lv));
                assert!((delta2_h(&q, i, l).unwrap() - expected).abs() < 1e-10);
                assert!(delta2_h(&lin, i, l).unwrap().abs() < 1e-11);
            }
        }
        let g1 = interval(0.25);
        let quartic = restrict(|x: &[f64]| x[0].powi(4), &g1).unwrap();
        let origin = g1.index_of(&[0]).unwrap();
        let v = delta2_h(&quartic, origin, &g1.directions().half_set()[0]).unwrap();
        assert!((v - 2.0 * 0.25f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn boundary_point_escapes() {
        let g = interval(0.5);
        let u = GridFunction::zeros(Arc::clone(&g));
        let e = &g.directions().half_set()[0];
        assert!(matches!(delta_h(&u, 2, e), Err(OpsError::StencilEscape { .. })));
        assert!(matches!(delta2_h(&u, 0, e), Err(OpsError::StencilEscape { .. })));
    }

    #[test]
    fn payoff_table() {
        let r = sup_inf(&[3.0, 1.0, 2.0, 4.0], 2, 2);
        assert_eq!(r, SupInf { value: 2.0, alpha: 1, beta: 0 });
        assert_eq!(inf_sup(&[3.0, 1.0, 2.0, 4.0], 2, 2), 3.0);
        // ties resolve to the lowest indices
        assert_eq!(sup_inf(&[1.0, 1.0, 1.0, 1.0], 2, 2), SupInf { value: 1.0, alpha: 0, beta: 0 });
    }

    fn poisson(d: usize) -> IsaacsProblem<f64> {
        catalog::build("poisson-ball", &Params::new(), &Shape::Ball(Ball::centered(d, 1.0))).unwrap()
    }

    #[test]
    fn l_h_examples() {
        let g = disk(0.1, 1);
        let p = poisson(2);
        let cache = DecompositionCache::new(Arc::clone(g.directions()), 1e-8);
        let sq = restrict(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &g).unwrap();
        for &i in g.interior() {
            assert!((apply_l_h(&p, 0, 0, &sq, i, &cache).unwrap() - 4.0).abs() < 1e-10);
        }
        // H_h at u ≡ 0 reduces to the forcing
        let zero = GridFunction::zeros(Arc::clone(&g));
        let i = g.interior()[0];
        assert_eq!(apply_h_h(&p, &zero, i, &cache).unwrap().value, 1.0);
    }

    #[test]
    fn continuous_examples() {
        let p = poisson(2);
        let sq = Quadratic { m: Matrix::identity(2), p: vec![0.0, 0.0], c: 0.0 };
        assert!((apply_l_continuous(&p, 0, 0, &sq, &[0.2, 0.3]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn consistency_sin_1d() {
        let p = poisson(1);
        let v = FnField::<f64> {
            value: Arc::new(|x| x[0].sin()),
            gradient: Arc::new(|x| vec![x[0].cos()]),
            hessian: Arc::new(|x| Matrix::from_rows(&[vec![-x[0].sin()]])),
        };
        let mut prev = None;
        for h in [0.1, 0.05, 0.025] {
            let g = interval(h);
            let cache = DecompositionCache::new(Arc::clone(g.directions()), 1e-8);
            let gap = consistency_gap(&p, 0, 0, &v, &g, &cache).unwrap();
            // Taylor remainder: h²/12 max|v''''|
            assert!(gap <= h * h / 12.0 + 1e-12, "h={h}: {gap}");
            if let Some(pg) = prev {
                let ratio: f64 = pg / gap;
                assert!((3.5..=4.3).contains(&ratio), "{ratio}");
            }
            prev = Some(gap);
        }
    }
}
