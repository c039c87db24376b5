//! Bounded domains, the lattice sets `G_h ⊃ G_h^o`, `∂_hG = G_h \ G_h^o`,
//! and grid functions over `G_h`.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::norm;
use crate::scalar::Real;
use crate::stencil::DirectionSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("empty interior: no lattice point at h = {h} keeps its stencil ball inside the domain")]
    EmptyInterior { h: f64 },
    #[error("invalid mesh size {0}")]
    InvalidMesh(f64),
    #[error("dimension mismatch: domain has {domain} dims, direction set has {directions}")]
    DimensionMismatch { domain: usize, directions: usize },
    #[error("stencil closure violated at lattice point {point:?}")]
    StencilClosure { point: Vec<i64> },
    #[error("lattice bounding box has {0} points, refusing to enumerate")]
    TooLarge(usize),
    #[error("non-finite value at lattice point {point:?}")]
    NonFiniteValue { point: Vec<i64> },
    #[error("grid functions live on different grids")]
    GridMismatch,
}

/// A bounded open set `G = {x : φ(x) < 0}`.
pub trait Domain<T: Real>: Send + Sync + fmt::Debug {
    fn dims(&self) -> usize;

    /// Level function `φ`; negative exactly inside the domain.
    fn level(&self, x: &[T]) -> T;

    fn contains(&self, x: &[T]) -> bool {
        self.level(x) < T::zero()
    }

    /// Whether the closed ball of radius `r` around `x` lies inside the open domain.
    fn contains_ball(&self, x: &[T], r: T) -> bool;

    /// Axis-aligned box containing the domain.
    fn bounding_box(&self) -> (Vec<T>, Vec<T>);
}

/// Euclidean ball; in one dimension this is the interval `(c − R, c + R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    pub fn new(center: Vec<T>, radius: T) -> Self {
        assert!(radius > T::zero(), "ball radius must be positive");
        Self { center, radius }
    }

    pub fn centered(dims: usize, radius: T) -> Self {
        Self::new(vec![T::zero(); dims], radius)
    }

    fn dist_center(&self, x: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(&self.center).map(|(&a, &c)| a - c).collect();
        norm(&diff)
    }
}

impl<T: Real> Domain<T> for Ball<T> {
    fn dims(&self) -> usize {
        self.center.len()
    }

    fn level(&self, x: &[T]) -> T {
        self.dist_center(x) - self.radius
    }

    fn contains_ball(&self, x: &[T], r: T) -> bool {
        self.dist_center(x) + r < self.radius
    }

    fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        (
            self.center.iter().map(|&c| c - self.radius).collect(),
            self.center.iter().map(|&c| c + self.radius).collect(),
        )
    }
}

/// Axis-aligned ellipsoid `Σ ((x_i − c_i)/e_i)² < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid<T> {
    pub center: Vec<T>,
    pub semi_axes: Vec<T>,
}

impl<T: Real> Ellipsoid<T> {
    pub fn new(center: Vec<T>, semi_axes: Vec<T>) -> Self {
        assert_eq!(center.len(), semi_axes.len());
        assert!(semi_axes.iter().all(|&e| e > T::zero()), "semi-axes must be positive");
        Self { center, semi_axes }
    }

    pub fn centered(semi_axes: Vec<T>) -> Self {
        Self::new(vec![T::zero(); semi_axes.len()], semi_axes)
    }

    /// Euclidean distance from an interior point to the surface.
    pub fn distance_to_surface(&self, x: &[T]) -> T {
        let y: Vec<T> = x.iter().zip(&self.center).map(|(&a, &c)| a - c).collect();
        let e2: Vec<T> = self.semi_axes.iter().map(|&e| e * e).collect();
        let emin2 = e2.iter().fold(T::infinity(), |m, &v| m.min(v));
        let g = |t: T| -> T {
            y.iter()
                .zip(&self.semi_axes)
                .zip(&e2)
                .map(|((&yi, &ei), &ei2)| {
                    let q = ei * yi / (ei2 + t);
                    q * q
                })
                .sum::<T>()
        };
        let on_min_axis_nonzero =
            y.iter().zip(&e2).any(|(&yi, &ei2)| ei2 == emin2 && yi != T::zero());
        let closest: Vec<T> = if on_min_axis_nonzero {
            // g decreases from +∞ at t = -emin² through g(0) < 1; bisect for g(t) = 1
            let mut lo = -emin2;
            let mut hi = T::zero();
            for _ in 0..200 {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) > T::one() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = (lo + hi) / T::lit(2.0);
            y.iter().zip(&e2).map(|(&yi, &ei2)| ei2 * yi / (ei2 + t)).collect()
        } else {
            // The point lies in the plane spanned by the non-minimal axes.
            let mut xs: Vec<T> = y
                .iter()
                .zip(&e2)
                .map(|(&yi, &ei2)| if ei2 == emin2 { T::zero() } else { ei2 * yi / (ei2 - emin2) })
                .collect();
            let used: T = xs
                .iter()
                .zip(&e2)
                .filter(|(_, &ei2)| ei2 != emin2)
                .map(|(&xi, &ei2)| xi * xi / ei2)
                .sum();
            if used <= T::one() {
                let k = e2.iter().position(|&v| v == emin2).expect("minimal axis");
                xs[k] = ((T::one() - used) * emin2).sqrt();
                xs
            } else {
                // unreachable for interior points in exact arithmetic; fall back to root search
                let mut lo = -emin2;
                let mut hi = T::zero();
                for _ in 0..200 {
                    let mid = (lo + hi) / T::lit(2.0);
                    if g(mid) > T::one() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = (lo + hi) / T::lit(2.0);
                y.iter().zip(&e2).map(|(&yi, &ei2)| ei2 * yi / (ei2 + t)).collect()
            }
        };
        let diff: Vec<T> = closest.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        norm(&diff)
    }
}

impl<T: Real> Domain<T> for Ellipsoid<T> {
    fn dims(&self) -> usize {
        self.center.len()
    }

    fn level(&self, x: &[T]) -> T {
        x.iter()
            .zip(&self.center)
            .zip(&self.semi_axes)
            .map(|((&xi, &ci), &ei)| {
                let q = (xi - ci) / ei;
                q * q
            })
            .sum::<T>()
            - T::one()
    }

    fn contains_ball(&self, x: &[T], r: T) -> bool {
        self.contains(x) && self.distance_to_surface(x) > r
    }

    fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        (
            self.center.iter().zip(&self.semi_axes).map(|(&c, &e)| c - e).collect(),
            self.center.iter().zip(&self.semi_axes).map(|(&c, &e)| c + e).collect(),
        )
    }
}

pub type LevelFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// General level-set domain. Ball containment is certified through a
/// Lipschitz bound `|∇φ| ≤ lipschitz`, so `dist(x, ∂G) ≥ −φ(x)/lipschitz`.
#[derive(Clone)]
pub struct LevelSetDomain<T> {
    pub level_fn: LevelFn<T>,
    pub lipschitz: T,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> fmt::Debug for LevelSetDomain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetDomain")
            .field("lipschitz", &self.lipschitz)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl<T: Real> Domain<T> for LevelSetDomain<T> {
    fn dims(&self) -> usize {
        self.lower.len()
    }

    fn level(&self, x: &[T]) -> T {
        (self.level_fn)(x)
    }

    fn contains_ball(&self, x: &[T], r: T) -> bool {
        let phi = self.level(x);
        phi < T::zero() && -phi / self.lipschitz > r
    }

    fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        (self.lower.clone(), self.upper.clone())
    }
}

/// Which part of `G_h` a reduction runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subset {
    All,
    Interior,
    Boundary,
}

const MAX_BOX_POINTS: usize = 50_000_000;

/// Lattice discretization of a domain for a fixed mesh size and direction set.
///
/// Points are stored in row-major lexicographic order of their integer
/// lattice coordinates (first coordinate slowest).
pub struct Grid<T: Real> {
    h: T,
    domain: Arc<dyn Domain<T>>,
    dirs: Arc<DirectionSet>,
    lattice: Vec<Vec<i64>>,
    points: Vec<Vec<T>>,
    interior_mask: Vec<bool>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    index: HashMap<Vec<i64>, usize>,
    // interior ordinal * |Λ| + k -> G_h index of p + h l_k
    neighbor_table: Vec<usize>,
    interior_ordinal: Vec<Option<usize>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("h", &self.h)
            .field("dims", &self.dims())
            .field("points", &self.points.len())
            .field("interior", &self.interior.len())
            .finish()
    }
}

impl<T: Real> Grid<T> {
    /// Enumerates `G_h` and classifies each point. A point is interior when the
    /// closed ball of radius `h·r_Λ` around it lies inside the domain; the
    /// radius is inflated by a relative 1e-12 so exact tangencies land on the
    /// boundary side irrespective of rounding.
    pub fn build(
        domain: Arc<dyn Domain<T>>,
        h: T,
        dirs: Arc<DirectionSet>,
    ) -> Result<Self, GridError> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(GridError::InvalidMesh(h.to_f64_lossy()));
        }
        let d = domain.dims();
        if d != dirs.dims() {
            return Err(GridError::DimensionMismatch { domain: d, directions: dirs.dims() });
        }
        let (lo, hi) = domain.bounding_box();
        let zlo: Vec<i64> = lo.iter().map(|&v| (v / h).floor().to_f64_lossy() as i64 - 1).collect();
        let zhi: Vec<i64> = hi.iter().map(|&v| (v / h).ceil().to_f64_lossy() as i64 + 1).collect();
        let extents: Vec<usize> = zlo.iter().zip(&zhi).map(|(&a, &b)| (b - a + 1) as usize).collect();
        let total = extents.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let total = match total {
            Some(t) if t <= MAX_BOX_POINTS => t,
            Some(t) => return Err(GridError::TooLarge(t)),
            None => return Err(GridError::TooLarge(usize::MAX)),
        };

        let r = h * T::lit(dirs.radius()) * T::lit(1.0 + 1e-12);
        let mut lattice = Vec::new();
        let mut points = Vec::new();
        let mut interior_mask = Vec::new();
        let mut z = zlo.clone();
        for _ in 0..total {
            let x: Vec<T> = z.iter().map(|&zi| T::from_int(zi) * h).collect();
            if domain.contains(&x) {
                interior_mask.push(domain.contains_ball(&x, r));
                lattice.push(z.clone());
                points.push(x);
            }
            // odometer increment, last coordinate fastest
            for i in (0..d).rev() {
                z[i] += 1;
                if z[i] <= zhi[i] {
                    break;
                }
                z[i] = zlo[i];
            }
        }

        let index: HashMap<Vec<i64>, usize> =
            lattice.iter().enumerate().map(|(i, z)| (z.clone(), i)).collect();
        let interior: Vec<usize> = (0..lattice.len()).filter(|&i| interior_mask[i]).collect();
        let boundary: Vec<usize> = (0..lattice.len()).filter(|&i| !interior_mask[i]).collect();
        if interior.is_empty() {
            return Err(GridError::EmptyInterior { h: h.to_f64_lossy() });
        }
        let mut interior_ordinal = vec![None; lattice.len()];
        let ndirs = dirs.directions().len();
        let mut neighbor_table = Vec::with_capacity(interior.len() * ndirs);
        for (ord, &i) in interior.iter().enumerate() {
            interior_ordinal[i] = Some(ord);
            for l in dirs.directions() {
                let zn: Vec<i64> = lattice[i].iter().zip(l.components()).map(|(a, b)| a + b).collect();
                match index.get(&zn) {
                    Some(&j) => neighbor_table.push(j),
                    None => return Err(GridError::StencilClosure { point: lattice[i].clone() }),
                }
            }
        }

        Ok(Self {
            h,
            domain,
            dirs,
            lattice,
            points,
            interior_mask,
            interior,
            boundary,
            index,
            neighbor_table,
            interior_ordinal,
        })
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn dims(&self) -> usize {
        self.dirs.dims()
    }

    pub fn domain(&self) -> &Arc<dyn Domain<T>> {
        &self.domain
    }

    pub fn directions(&self) -> &Arc<DirectionSet> {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn lattice_coords(&self, i: usize) -> &[i64] {
        &self.lattice[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }

    /// `G_h^o` indices in storage order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// `∂_hG` indices in storage order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.index.get(z).copied()
    }

    pub fn interior_ordinal(&self, i: usize) -> Option<usize> {
        self.interior_ordinal[i]
    }

    /// Index of `x_i + h·directions[k]`, if that lattice point lies in `G_h`.
    pub fn neighbor(&self, i: usize, k: usize) -> Option<usize> {
        if let Some(ord) = self.interior_ordinal[i] {
            return Some(self.neighbor_table[ord * self.dirs.directions().len() + k]);
        }
        let l = self.dirs.directions()[k].components();
        let zn: Vec<i64> = self.lattice[i].iter().zip(l).map(|(a, b)| a + b).collect();
        self.index_of(&zn)
    }

    /// Index of `x_i + h·l` for an arbitrary integer offset.
    pub fn offset(&self, i: usize, l: &[i64]) -> Option<usize> {
        let zn: Vec<i64> = self.lattice[i].iter().zip(l).map(|(a, b)| a + b).collect();
        self.index_of(&zn)
    }

    pub fn subset_indices(&self, subset: Subset) -> Vec<usize> {
        match subset {
            Subset::All => (0..self.len()).collect(),
            Subset::Interior => self.interior.clone(),
            Subset::Boundary => self.boundary.clone(),
        }
    }

    /// Connected components of `G_h^o` under coordinate-neighbor adjacency.
    pub fn interior_components(&self) -> usize {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &i in &self.interior {
            for k in 0..self.dims() {
                if let Some(j) = self.neighbor(i, k) {
                    if self.interior_mask[j] {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
        }
        let mut roots: Vec<usize> = self.interior.iter().map(|&i| find(&mut parent, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Whether two grids describe the same lattice set.
    pub fn same_lattice(&self, other: &Self) -> bool {
        self.h == other.h && self.lattice == other.lattice && self.interior_mask == other.interior_mask
    }
}

/// Real values over `G_h`.
#[derive(Clone)]
pub struct GridFunction<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> fmt::Debug for GridFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction").field("grid", &self.grid).field("values", &self.values).finish()
    }
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![T::zero(); n] }
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n] }
    }

    /// Wraps raw values; panics on length mismatch.
    pub fn from_values(grid: Arc<Grid<T>>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must equal |G_h|");
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sup_norm(&self, subset: Subset) -> T {
        self.grid
            .subset_indices(subset)
            .into_iter()
            .fold(T::zero(), |m, i| m.max(self.values[i].abs()))
    }

    /// Writes `x_1,...,x_d,value` rows in storage order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.grid.dims();
        let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain(["value".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> =
                self.grid.point(i).iter().map(|x| format!("{:.16e}", x.to_f64_lossy())).collect();
            row.push(format!("{:.16e}", v.to_f64_lossy()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Pointwise evaluation of `f` on `G_h`.
pub fn restrict<T: Real, F: Fn(&[T]) -> T>(
    f: F,
    grid: &Arc<Grid<T>>,
) -> Result<GridFunction<T>, GridError> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let v = f(grid.point(i));
        if !v.is_finite() {
            return Err(GridError::NonFiniteValue { point: grid.lattice_coords(i).to_vec() });
        }
        values.push(v);
    }
    Ok(GridFunction { grid: Arc::clone(grid), values })
}

/// `max |u − w|` over the chosen subset of `G_h`.
pub fn sup_diff<T: Real>(
    u: &GridFunction<T>,
    w: &GridFunction<T>,
    subset: Subset,
) -> Result<T, GridError> {
    if !Arc::ptr_eq(u.grid(), w.grid()) && !u.grid().same_lattice(w.grid()) {
        return Err(GridError::GridMismatch);
    }
    Ok(u.grid()
        .subset_indices(subset)
        .into_iter()
        .fold(T::zero(), |m, i| m.max((u.values[i] - w.values[i]).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::generate_lambda;

    fn interval_grid(h: f64) -> Arc<Grid<f64>> {
        Arc::new(
            Grid::build(Arc::new(Ball::centered(1, 1.0)), h, Arc::new(generate_lambda(1, 1))).unwrap(),
        )
    }

    fn disk_grid(h: f64, m: i64) -> Result<Grid<f64>, GridError> {
        Grid::build(Arc::new(Ball::centered(2, 1.0)), h, Arc::new(generate_lambda(2, m)))
    }

    #[test]
    fn interval_example() {
        let g = interval_grid(0.5);
        let xs: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0]).collect();
        assert_eq!(xs, vec![-0.5, 0.0, 0.5]);
        assert_eq!(g.interior(), &[1]);
        assert_eq!(g.boundary(), &[0, 2]);
    }

    #[test]
    fn disk_example() {
        let g = disk_grid(0.5, 1).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.interior().len(), 1);
        assert_eq!(g.point(g.interior()[0]), &[0.0, 0.0]);
        assert_eq!(g.boundary().len(), 8);
        // row-major lexicographic order
        assert_eq!(g.lattice_coords(0), &[-1, -1]);
        assert_eq!(g.lattice_coords(1), &[-1, 0]);
        assert_eq!(g.lattice_coords(8), &[1, 1]);
    }

    #[test]
    fn coarse_disk_is_empty() {
        assert_eq!(disk_grid(2.0, 1).unwrap_err(), GridError::EmptyInterior { h: 2.0 });
    }

    #[test]
    fn invalid_mesh() {
        assert!(matches!(disk_grid(0.0, 1), Err(GridError::InvalidMesh(_))));
        assert!(matches!(disk_grid(-1.0, 1), Err(GridError::InvalidMesh(_))));
    }

    #[test]
    fn partition_and_closure() {
        for &(h, m) in &[(0.3, 1), (0.1, 1), (0.1, 2), (0.07, 3)] {
            let g = disk_grid(h, m).unwrap();
            assert_eq!(g.interior().len() + g.boundary().len(), g.len());
            for i in 0..g.len() {
                assert!(g.domain().contains(g.point(i)));
            }
            for &i in g.interior() {
                for k in 0..g.directions().directions().len() {
                    let l = g.directions().directions()[k].components();
                    assert!(g.offset(i, l).is_some());
                    assert_eq!(g.neighbor(i, k), g.offset(i, l));
                }
            }
        }
    }

    #[test]
    fn refinement_quadruples() {
        let mut prev = disk_grid(0.25, 1).unwrap().len();
        for h in [0.125, 0.0625, 0.03125] {
            let n = disk_grid(h, 1).unwrap().len();
            assert!(n >= 4 * prev, "h={h}: {n} < 4*{prev}");
            prev = n;
        }
    }

    #[test]
    fn ellipsoid_distance_and_classification() {
        let e = Ellipsoid::centered(vec![2.0f64, 1.0]);
        assert!((e.distance_to_surface(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((e.distance_to_surface(&[1.0, 0.0]) - 6f64.sqrt() / 3.0).abs() < 1e-12);
        assert!((e.distance_to_surface(&[0.0, 0.5]) - 0.5).abs() < 1e-12);
        // brute-force distance check
        for &p in &[[0.3, 0.2], [1.5, 0.1], [-0.7, -0.6], [1.0, 0.0]] {
            let brute = (0..200_000)
                .map(|k| {
                    let th = k as f64 * std::f64::consts::TAU / 200_000.0;
                    ((2.0 * th.cos() - p[0]).powi(2) + (th.sin() - p[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((e.distance_to_surface(&p) - brute).abs() < 1e-6, "{p:?}");
        }
        let g = Grid::build(Arc::new(e), 0.1, Arc::new(generate_lambda(2, 1))).unwrap();
        assert_eq!(g.interior().len() + g.boundary().len(), g.len());
    }

    #[test]
    fn level_set_domain_is_conservative() {
        let ls = LevelSetDomain::<f64> {
            level_fn: Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0),
            lipschitz: 2.0,
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        let dirs = Arc::new(generate_lambda(2, 1));
        let g = Grid::build(Arc::new(ls), 0.1, Arc::clone(&dirs)).unwrap();
        let exact = disk_grid(0.1, 1).unwrap();
        assert_eq!(g.len(), exact.len());
        assert!(g.interior().len() <= exact.interior().len());
        assert!(g.interior().iter().all(|&i| exact.is_interior(i)));
    }

    #[test]
    fn restrict_and_sup_diff() {
        let g = interval_grid(0.5);
        let zero = restrict(|_: &[f64]| 0.0, &g).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let x1 = restrict(|x: &[f64]| x[0], &g).unwrap();
        assert_eq!(x1.values(), &[-0.5, 0.0, 0.5]);
        let mx1 = restrict(|x: &[f64]| -x[0], &g).unwrap();
        assert_eq!(sup_diff(&x1, &mx1, Subset::All).unwrap(), 1.0);
        assert_eq!(sup_diff(&x1, &mx1, Subset::Interior).unwrap(), 0.0);
        assert_eq!(sup_diff(&x1, &x1, Subset::All).unwrap(), 0.0);
        let one = GridFunction::constant(Arc::clone(&g), 1.0);
        assert_eq!(sup_diff(&one, &zero, Subset::Boundary).unwrap(), 1.0);

        let disk = Arc::new(disk_grid(0.5, 1).unwrap());
        let sq = restrict(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &disk).unwrap();
        let corner = disk.index_of(&[1, 1]).unwrap();
        assert_eq!(sq.values()[corner], 0.5);
        assert!(matches!(restrict(|_: &[f64]| f64::NAN, &disk), Err(GridError::NonFiniteValue { .. })));
        let other = GridFunction::zeros(Arc::clone(&disk));
        assert_eq!(sup_diff(&zero, &other, Subset::All), Err(GridError::GridMismatch));
    }

    #[test]
    fn csv_layout() {
        let g = interval_grid(0.5);
        let x1 = restrict(|x: &[f64]| x[0], &g).unwrap();
        let csv = x1.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x_1,value");
        assert_eq!(lines[1], "-5.0000000000000000e-1,-5.0000000000000000e-1");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn components_of_dumbbell() {
        // two disjoint disks inside one level set
        let ls = LevelSetDomain::<f64> {
            level_fn: Arc::new(|x: &[f64]| {
                let a = ((x[0] + 1.5).powi(2) + x[1] * x[1]).sqrt() - 1.0;
                let b = ((x[0] - 1.5).powi(2) + x[1] * x[1]).sqrt() - 1.0;
                a.min(b)
            }),
            lipschitz: 1.0,
            lower: vec![-2.5, -1.0],
            upper: vec![2.5, 1.0],
        };
        let g = Grid::build(Arc::new(ls), 0.1, Arc::new(generate_lambda(2, 1))).unwrap();
        assert_eq!(g.interior_components(), 2);
        assert_eq!(disk_grid(0.1, 1).unwrap().interior_components(), 1);
    }
}
