//! Integer direction sets and the splitting of `(a, b)` coefficient pairs into
//! nonnegative directional weights.
//!
//! A diffusion matrix `a` is written as `Σ_k a_k l_k l_kᵀ` over one
//! representative `l_k` of each `±l` pair, and a drift `b` as `Σ_k b̄_k l_k`
//! over the full signed set. Nonnegative weights make the resulting
//! finite-difference operator monotone for every mesh size.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use num_integer::Integer;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::simplex::{LinearProgram, LpSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    /// No nonnegative split exists over this direction set, or the best
    /// achievable coordinate-direction weight is below the requested floor.
    /// `achieved` is `None` when the program is infeasible.
    #[error("insufficient stencil: {} (required floor {required}; increase the direction-set max-norm)", describe_achieved(.achieved))]
    InsufficientStencil { achieved: Option<f64>, required: f64 },
    #[error("singular input: {0}")]
    SingularInput(String),
}

fn describe_achieved(achieved: &Option<f64>) -> String {
    match achieved {
        Some(t) => format!("best coordinate weight {t}"),
        None => "no nonnegative decomposition exists".to_string(),
    }
}

/// A primitive integer lattice direction: nonzero with coprime components.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction(Vec<i64>);

impl Direction {
    /// Returns `None` for the zero vector or non-primitive vectors.
    pub fn new(components: Vec<i64>) -> Option<Self> {
        let g = components.iter().fold(0i64, |g, &c| g.gcd(&c));
        (g == 1).then_some(Self(components))
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    pub fn norm(&self) -> f64 {
        (self.0.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }

    pub fn max_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Index `i` when this is `+e_i`.
    pub fn basis_index(&self) -> Option<usize> {
        let mut found = None;
        for (i, &c) in self.0.iter().enumerate() {
            match c {
                0 => {}
                1 if found.is_none() => found = Some(i),
                _ => return None,
            }
        }
        found
    }
}

/// The finite direction set `Λ`, closed under negation.
///
/// `half_set[i] = e_i` for `i < dims`; `directions` is `half_set` followed by
/// the negations in the same order, so `directions[k + half_set.len()] =
/// -directions[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    dims: usize,
    max_norm: i64,
    half_set: Vec<Direction>,
    directions: Vec<Direction>,
    radius: f64,
}

/// All primitive integer vectors with max-norm at most `m` in dimension `d`.
pub fn generate_lambda(d: usize, m: i64) -> DirectionSet {
    assert!(d >= 1 && m >= 1, "direction set needs d ≥ 1 and m ≥ 1");
    let side = (2 * m + 1) as usize;
    let total = side.pow(d as u32);
    let mut others = Vec::new();
    for code in 0..total {
        let mut rem = code;
        let mut z = vec![0i64; d];
        for zi in z.iter_mut().rev() {
            *zi = (rem % side) as i64 - m;
            rem /= side;
        }
        // one representative per ± pair: first nonzero component positive
        match z.iter().find(|&&c| c != 0) {
            Some(&c) if c > 0 => {}
            _ => continue,
        }
        if let Some(dir) = Direction::new(z) {
            if dir.basis_index().is_none() {
                others.push(dir);
            }
        }
    }
    others.sort_by(|a, b| a.max_norm().cmp(&b.max_norm()).then_with(|| a.cmp(b)));

    let mut half_set: Vec<Direction> = (0..d)
        .map(|i| {
            let mut e = vec![0; d];
            e[i] = 1;
            Direction(e)
        })
        .collect();
    half_set.extend(others);
    let directions: Vec<Direction> =
        half_set.iter().cloned().chain(half_set.iter().map(Direction::negated)).collect();
    let radius = directions.iter().map(Direction::norm).fold(0.0, f64::max);
    DirectionSet { dims: d, max_norm: m, half_set, directions, radius }
}

impl DirectionSet {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn max_norm(&self) -> i64 {
        self.max_norm
    }

    pub fn half_set(&self) -> &[Direction] {
        &self.half_set
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Euclidean radius of the smallest centered ball containing every direction.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Position in `directions` of `-directions[k]`.
    pub fn negation_index(&self, k: usize) -> usize {
        let n = self.half_set.len();
        if k < n {
            k + n
        } else {
            k - n
        }
    }
}

/// Directional weights realizing `(a, b)` over a [`DirectionSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<T> {
    /// `a_k ≥ 0`, indexed like `DirectionSet::half_set`.
    pub second_order: Vec<T>,
    /// `b̄_k ≥ 0`, indexed like `DirectionSet::directions`.
    pub first_order: Vec<T>,
    /// Smallest weight over the coordinate directions.
    pub basis_floor: T,
}

impl<T: Real> Decomposition<T> {
    /// `Σ a_k l_k l_kᵀ`.
    pub fn reassemble_diffusion(&self, dirs: &DirectionSet) -> Matrix<T> {
        let mut a = Matrix::zeros(dirs.dims(), dirs.dims());
        for (w, l) in self.second_order.iter().zip(dirs.half_set()) {
            if *w != T::zero() {
                a.add_scaled(*w, &Matrix::outer_int(l.components()));
            }
        }
        a
    }

    /// `Σ b̄_k l_k`.
    pub fn reassemble_drift(&self, dirs: &DirectionSet) -> Vec<T> {
        reassemble_drift(&self.first_order, dirs)
    }
}

pub fn reassemble_drift<T: Real>(weights: &[T], dirs: &DirectionSet) -> Vec<T> {
    let mut b = vec![T::zero(); dirs.dims()];
    for (w, l) in weights.iter().zip(dirs.directions()) {
        for (bi, &li) in b.iter_mut().zip(l.components()) {
            *bi = *bi + *w * T::from_int(li);
        }
    }
    b
}

/// Second-order weights and the achieved coordinate-direction floor.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionWeights<T> {
    pub weights: Vec<T>,
    pub basis_floor: T,
}

fn lp_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

/// Splits a symmetric matrix into nonnegative weights over `dirs.half_set()`,
/// maximizing the smallest coordinate-direction weight.
///
/// Solves `max t` subject to `Σ_k a_k l_k l_kᵀ = a`, `a_k ≥ 0`, `a_{e_i} ≥ t`.
/// Fails with [`StencilError::InsufficientStencil`] when infeasible or when the
/// optimum falls below `delta1_min`.
pub fn decompose_diffusion<T: Real>(
    a: &Matrix<T>,
    dirs: &DirectionSet,
    delta1_min: T,
) -> Result<DiffusionWeights<T>, StencilError> {
    let d = dirs.dims();
    if a.rows() != d || a.cols() != d {
        return Err(StencilError::SingularInput(format!(
            "expected a {d}x{d} matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(StencilError::SingularInput("matrix has non-finite entries".into()));
    }
    let sym_tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) * (T::one() + a.max_abs());
    if !a.is_symmetric(sym_tol) {
        return Err(StencilError::SingularInput("matrix is not symmetric".into()));
    }

    let nh = dirs.half_set().len();
    let nvars = nh + 1 + d;
    let t_var = nh;
    let mut lp = LinearProgram::new(nvars);
    let mut obj = vec![T::zero(); nvars];
    obj[t_var] = T::one();
    lp.set_objective(obj);
    for i in 0..d {
        for j in i..d {
            let mut row = vec![T::zero(); nvars];
            for (k, l) in dirs.half_set().iter().enumerate() {
                let c = l.components();
                row[k] = T::from_int(c[i] * c[j]);
            }
            let target = (a[(i, j)] + a[(j, i)]) / T::lit(2.0);
            lp.add_equality(row, target);
        }
    }
    for i in 0..d {
        // a_{e_i} - t - s_i = 0
        let mut row = vec![T::zero(); nvars];
        row[i] = T::one();
        row[t_var] = -T::one();
        row[nh + 1 + i] = -T::one();
        lp.add_equality(row, T::zero());
    }

    let required = delta1_min.to_f64_lossy();
    match lp.solve(lp_tolerance()) {
        LpSolution::Optimal { x, .. } => {
            let weights = x[..nh].to_vec();
            let basis_floor =
                weights[..d].iter().fold(T::infinity(), |m, &w| if w < m { w } else { m });
            if basis_floor < delta1_min {
                return Err(StencilError::InsufficientStencil {
                    achieved: Some(basis_floor.to_f64_lossy()),
                    required,
                });
            }
            Ok(DiffusionWeights { weights, basis_floor })
        }
        LpSolution::Infeasible | LpSolution::IterationLimit => {
            Err(StencilError::InsufficientStencil { achieved: None, required })
        }
        LpSolution::Unbounded => unreachable!("t is bounded by the diagonal of a"),
    }
}

/// Splits a drift over the signed coordinate directions:
/// `b̄_{+e_i} = max(b_i, 0)`, `b̄_{-e_i} = max(-b_i, 0)`.
pub fn split_drift<T: Real>(b: &[T], dirs: &DirectionSet) -> Vec<T> {
    assert_eq!(b.len(), dirs.dims(), "drift dimension mismatch");
    let nh = dirs.half_set().len();
    let mut w = vec![T::zero(); dirs.directions().len()];
    for (i, &bi) in b.iter().enumerate() {
        w[i] = bi.max(T::zero());
        w[nh + i] = (-bi).max(T::zero());
    }
    w
}

/// Full decomposition of a coefficient pair.
pub fn decompose<T: Real>(
    a: &Matrix<T>,
    b: &[T],
    dirs: &DirectionSet,
    delta1_min: T,
) -> Result<Decomposition<T>, StencilError> {
    if b.len() != dirs.dims() || b.iter().any(|x| !x.is_finite()) {
        return Err(StencilError::SingularInput("drift has wrong length or non-finite entries".into()));
    }
    let diff = decompose_diffusion(a, dirs, delta1_min)?;
    Ok(Decomposition {
        second_order: diff.weights,
        first_order: split_drift(b, dirs),
        basis_floor: diff.basis_floor,
    })
}

/// Memoized [`decompose`] keyed on coefficient values rounded to 12
/// significant digits. Shared across threads behind an `RwLock`.
#[derive(Debug)]
pub struct DecompositionCache<T> {
    dirs: Arc<DirectionSet>,
    delta1_min: T,
    entries: RwLock<HashMap<String, Arc<Decomposition<T>>>>,
}

impl<T: Real> DecompositionCache<T> {
    pub fn new(dirs: Arc<DirectionSet>, delta1_min: T) -> Self {
        Self { dirs, delta1_min, entries: RwLock::new(HashMap::new()) }
    }

    pub fn directions(&self) -> &Arc<DirectionSet> {
        &self.dirs
    }

    pub fn delta1_min(&self) -> T {
        self.delta1_min
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(a: &Matrix<T>, b: &[T]) -> String {
        let mut key = String::new();
        for v in a.as_slice().iter().chain(b) {
            let _ = write!(key, "{:.11e};", v.to_f64_lossy());
        }
        key
    }

    pub fn get_or_compute(
        &self,
        a: &Matrix<T>,
        b: &[T],
    ) -> Result<Arc<Decomposition<T>>, StencilError> {
        let key = Self::key(a, b);
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let dec = Arc::new(decompose(a, b, &self.dirs, self.delta1_min)?);
        self.entries
            .write()
            .expect("cache lock poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&dec));
        Ok(dec)
    }
}
