use std::sync::Arc;

use super::{sup_inf_by, OpsError, SupInf};
use crate::grid::Grid;
use crate::problem::IsaacsProblem;
use crate::scalar::Real;
use crate::stencil::DecompositionCache;

/// `H_h` compiled to per-point, per-control-pair stencil rows.
///
/// Row `(o, p)` for interior ordinal `o` and pair `p = α·n_b + β` stores
/// `L_h^{αβ}u(x) + f^{αβ}(x) = diag · u(x) + Σ w_j u(x_j) + f` with every
/// off-center weight `w_j ≥ 0` and `diag = −Σ w_j − c ≤ 0`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator<T: Real> {
    grid: Arc<Grid<T>>,
    n_a: usize,
    n_b: usize,
    diag: Vec<T>,
    forcing: Vec<T>,
    row_start: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<T>,
    min_basis_floor: T,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn assemble(
        problem: &IsaacsProblem<T>,
        grid: &Arc<Grid<T>>,
        cache: &DecompositionCache<T>,
    ) -> Result<Self, OpsError> {
        let dirs = Arc::clone(cache.directions());
        assert_eq!(dirs.as_ref(), grid.directions().as_ref(), "grid and cache use different direction sets");
        let (n_a, n_b) = (problem.n_a(), problem.n_b());
        let npairs = n_a * n_b;
        let rows = grid.interior().len() * npairs;
        let h = grid.h();
        let h2 = h * h;
        let nh = dirs.half_set().len();

        let mut diag = Vec::with_capacity(rows);
        let mut forcing = Vec::with_capacity(rows);
        let mut row_start = Vec::with_capacity(rows + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        let mut min_basis_floor = T::infinity();
        let mut entries: Vec<(usize, T)> = Vec::new();
        row_start.push(0);

        for &i in grid.interior() {
            let x = grid.point(i);
            for alpha in 0..n_a {
                for beta in 0..n_b {
                    let pc = problem.eval(alpha, beta, x);
                    let dec = cache.get_or_compute(&pc.a, &pc.b)?;
                    min_basis_floor = min_basis_floor.min(dec.basis_floor);
                    entries.clear();
                    let mut center = -pc.c;
                    for (k, &a_k) in dec.second_order.iter().enumerate() {
                        if a_k != T::zero() {
                            let w = a_k / h2;
                            let fwd = grid.neighbor(i, k).expect("stencil closure");
                            let bwd = grid.neighbor(i, k + nh).expect("stencil closure");
                            entries.push((fwd, w));
                            entries.push((bwd, w));
                            center = center - w - w;
                        }
                    }
                    for (k, &b_k) in dec.first_order.iter().enumerate() {
                        if b_k != T::zero() {
                            let w = b_k / h;
                            entries.push((grid.neighbor(i, k).expect("stencil closure"), w));
                            center = center - w;
                        }
                    }
                    entries.sort_by_key(|e| e.0);
                    let mut last: Option<usize> = None;
                    for &(j, w) in entries.iter() {
                        if last == Some(j) {
                            let top = weights.len() - 1;
                            weights[top] = weights[top] + w;
                        } else {
                            neighbors.push(j);
                            weights.push(w);
                            last = Some(j);
                        }
                    }
                    diag.push(center);
                    forcing.push(pc.f);
                    row_start.push(neighbors.len());
                }
            }
        }
        Ok(Self {
            grid: Arc::clone(grid),
            n_a,
            n_b,
            diag,
            forcing,
            row_start,
            neighbors,
            weights,
            min_basis_floor,
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn n_pairs(&self) -> usize {
        self.n_a * self.n_b
    }

    /// Smallest coordinate-direction weight over all decompositions used.
    pub fn min_basis_floor(&self) -> T {
        self.min_basis_floor
    }

    #[inline]
    fn row(&self, ord: usize, pair: usize) -> usize {
        ord * self.n_pairs() + pair
    }

    /// `L_h^{αβ}u(x) + f^{αβ}(x)` at interior ordinal `ord`.
    #[inline]
    pub fn pair_value(&self, ord: usize, pair: usize, u: &[T]) -> T {
        let r = self.row(ord, pair);
        let i = self.grid.interior()[ord];
        let mut acc = self.diag[r] * u[i] + self.forcing[r];
        for e in self.row_start[r]..self.row_start[r + 1] {
            acc = acc + self.weights[e] * u[self.neighbors[e]];
        }
        acc
    }

    /// `H_h[u]` at interior ordinal `ord`, with the realizing pair.
    #[inline]
    pub fn evaluate(&self, ord: usize, u: &[T]) -> SupInf<T> {
        let nb = self.n_b;
        sup_inf_by(self.n_a, nb, |a, b| self.pair_value(ord, a * nb + b, u))
    }

    /// `max over G_h^o of |H_h[u]|`.
    pub fn residual(&self, u: &[T]) -> T {
        (0..self.grid.interior().len()).fold(T::zero(), |m, o| m.max(self.evaluate(o, u).value.abs()))
    }

    /// `−diag` of a row: `Σ 2a_k/h² + Σ b̄_k/h + c`.
    pub fn diagonal(&self, ord: usize, pair: usize) -> T {
        -self.diag[self.row(ord, pair)]
    }

    pub fn forcing(&self, ord: usize, pair: usize) -> T {
        self.forcing[self.row(ord, pair)]
    }

    /// Off-center `(G_h index, weight)` entries of a row.
    pub fn stencil(&self, ord: usize, pair: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row(ord, pair);
        (self.row_start[r]..self.row_start[r + 1]).map(move |e| (self.neighbors[e], self.weights[e]))
    }

    /// `θ / max_{α,β} (Σ 2a_k/h² + Σ b̄_k/h + c)`.
    pub fn local_timestep(&self, ord: usize, theta: T) -> Option<T> {
        let m = (0..self.n_pairs()).map(|p| self.diagonal(ord, p)).fold(T::zero(), T::max);
        (m > T::zero()).then(|| theta / m)
    }

    pub fn forcing_sup(&self) -> T {
        self.forcing.iter().fold(T::zero(), |m, f| m.max(f.abs()))
    }

    /// Copy with forcing replaced by `f(ordinal, pair)`.
    pub fn with_forcing<F: FnMut(usize, usize) -> T>(&self, mut f: F) -> Self {
        let mut out = self.clone();
        let np = self.n_pairs();
        for (r, v) in out.forcing.iter_mut().enumerate() {
            *v = f(r / np, r % np);
        }
        out
    }

    /// The linear operator obtained by freezing one pair per interior point.
    pub fn frozen(&self, policy: &[usize]) -> Self {
        assert_eq!(policy.len(), self.grid.interior().len());
        let mut diag = Vec::with_capacity(policy.len());
        let mut forcing = Vec::with_capacity(policy.len());
        let mut row_start = vec![0];
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        for (ord, &p) in policy.iter().enumerate() {
            let r = self.row(ord, p);
            diag.push(self.diag[r]);
            forcing.push(self.forcing[r]);
            neighbors.extend_from_slice(&self.neighbors[self.row_start[r]..self.row_start[r + 1]]);
            weights.extend_from_slice(&self.weights[self.row_start[r]..self.row_start[r + 1]]);
            row_start.push(neighbors.len());
        }
        Self {
            grid: Arc::clone(&self.grid),
            n_a: 1,
            n_b: 1,
            diag,
            forcing,
            row_start,
            neighbors,
            weights,
            min_basis_floor: self.min_basis_floor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_ops::apply_h_h;
    use crate::grid::{restrict, Ball, GridFunction};
    use crate::problem::catalog::{self, Params, Shape, NAMES};
    use crate::stencil::generate_lambda;

    #[test]
    fn assembled_operator_matches_difference_quotients() {
        let shape = Shape::Ball(Ball::centered(2, 1.0));
        let grid = Arc::new(Grid::build(shape.to_domain(), 0.1, Arc::new(generate_lambda(2, 1))).unwrap());
        let u = restrict(|x: &[f64]| (3.0 * x[0]).sin() * x[1] + x[0] * x[0], &grid).unwrap();
        for name in NAMES {
            let p = catalog::build::<f64>(name, &Params::new(), &shape).unwrap();
            let cache = DecompositionCache::new(Arc::clone(grid.directions()), 1e-8);
            let op = DiscreteOperator::assemble(&p, &grid, &cache).unwrap();
            assert!(op.min_basis_floor() > 0.0);
            for (ord, &i) in grid.interior().iter().enumerate() {
                let direct = apply_h_h(&p, &u, i, &cache).unwrap();
                let fast = op.evaluate(ord, u.values());
                assert!((direct.value - fast.value).abs() < 1e-10 * (1.0 + direct.value.abs()), "{name}");
                assert_eq!((direct.alpha, direct.beta), (fast.alpha, fast.beta));
                for p in 0..op.n_pairs() {
                    assert!(op.stencil(ord, p).all(|(_, w)| w >= 0.0));
                    let off: f64 = op.stencil(ord, p).map(|(_, w)| w).sum();
                    assert!(op.diagonal(ord, p) >= off - 1e-9);
                }
            }
        }
    }

    #[test]
    fn timestep_examples() {
        let shape = Shape::Ball(Ball::centered(1, 1.0));
        let p = catalog::build::<f64>("poisson-ball", &Params::new(), &shape).unwrap();
        let dirs = Arc::new(generate_lambda(1, 1));
        let tau = |h: f64| {
            let grid = Arc::new(Grid::build(shape.to_domain(), h, Arc::clone(&dirs)).unwrap());
            let cache = DecompositionCache::new(Arc::clone(&dirs), 1e-8);
            DiscreteOperator::assemble(&p, &grid, &cache).unwrap().local_timestep(0, 1.0).unwrap()
        };
        assert!((tau(0.5) - 0.125).abs() < 1e-15);
        assert!((tau(0.25) * 4.0 - tau(0.5)).abs() < 1e-15);
    }

    #[test]
    fn frozen_policy_rows() {
        let shape = Shape::Ball(Ball::centered(2, 1.0));
        let p = catalog::build::<f64>("isaacs-2x2", &Params::new(), &shape).unwrap();
        let grid = Arc::new(Grid::build(shape.to_domain(), 0.2, Arc::new(generate_lambda(2, 1))).unwrap());
        let cache = DecompositionCache::new(Arc::clone(grid.directions()), 1e-8);
        let op = DiscreteOperator::assemble(&p, &grid, &cache).unwrap();
        let policy: Vec<usize> = (0..grid.interior().len()).map(|o| o % 4).collect();
        let frozen = op.frozen(&policy);
        let u = GridFunction::constant(Arc::clone(&grid), 0.3);
        for (o, &pp) in policy.iter().enumerate() {
            assert_eq!(frozen.pair_value(o, 0, u.values()), op.pair_value(o, pp, u.values()));
        }
    }
}
