//! Isaacs problem instances, manufactured solutions, the Pucci-type majorant
//! family and the K-truncated fused problems.

pub mod catalog;
mod pucci;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discrete_ops::{sup_inf, Symbol};
use crate::fields::{MatrixField, ScalarField, SmoothField, VectorField};
use crate::grid::Domain;
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

pub use pucci::{make_pucci, PucciFamily, PucciMember};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("ellipticity violated for control pair ({alpha}, {beta}) at {point:?}: eigenvalue {eigenvalue} outside [{lo}, {hi}]")]
    EllipticityViolation { alpha: usize, beta: usize, point: Vec<f64>, eigenvalue: f64, lo: f64, hi: f64 },
    #[error("negative zeroth-order coefficient c = {value} for control pair ({alpha}, {beta}) at {point:?}")]
    NegativeC { alpha: usize, beta: usize, point: Vec<f64>, value: f64 },
    #[error("{what} = {value} exceeds 1/delta = {bound} for control pair ({alpha}, {beta}) at {point:?}")]
    BoundExceeded { what: &'static str, alpha: usize, beta: usize, point: Vec<f64>, value: f64, bound: f64 },
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("invalid parameter '{key}': {reason}")]
    InvalidParameter { key: String, reason: String },
}

/// Diffusion given directly or through a factor with `a = ½ σ σᵀ`.
#[derive(Clone)]
pub enum Diffusion<T> {
    Matrix(MatrixField<T>),
    Sigma(MatrixField<T>),
}

/// Coefficient fields for one control pair.
#[derive(Clone)]
pub struct Coefficients<T> {
    pub diffusion: Diffusion<T>,
    pub drift: VectorField<T>,
    pub zeroth: ScalarField<T>,
    pub forcing: ScalarField<T>,
}

/// Coefficients evaluated at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCoefficients<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub c: T,
    pub f: T,
}

impl<T: Real> PointCoefficients<T> {
    /// `a : u″ + b · u′ − c u′₀ + f`.
    pub fn apply(&self, symbol: &Symbol<T>) -> T {
        self.a.contract(&symbol.hess) + dot(&self.b, &symbol.grad) - self.c * symbol.u0 + self.f
    }
}

impl<T: Real> Coefficients<T> {
    pub fn eval(&self, x: &[T]) -> PointCoefficients<T> {
        let a = match &self.diffusion {
            Diffusion::Matrix(a) => a(x),
            Diffusion::Sigma(s) => {
                let s = s(x);
                s.matmul(&s.transpose()).scale(T::lit(0.5))
            }
        };
        PointCoefficients { a, b: (self.drift)(x), c: (self.zeroth)(x), f: (self.forcing)(x) }
    }
}

/// Unvalidated problem description; [`ProblemSpec::build`] checks it.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub dims: usize,
    pub delta: T,
    pub holder_gamma1: T,
    pub n_a: usize,
    pub n_b: usize,
    /// Row-major over `(α, β)`: entry `α · n_b + β`.
    pub coefficients: Vec<Coefficients<T>>,
    pub exact: Option<Arc<dyn SmoothField<T>>>,
}

/// A validated Isaacs problem with finite ordered control sets `A × B`.
#[derive(Clone)]
pub struct IsaacsProblem<T> {
    name: String,
    dims: usize,
    delta: T,
    holder_gamma1: T,
    n_a: usize,
    n_b: usize,
    coefficients: Vec<Coefficients<T>>,
    exact: Option<Arc<dyn SmoothField<T>>>,
}

impl<T: Real> fmt::Debug for IsaacsProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IsaacsProblem")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("delta", &self.delta)
            .field("controls", &(self.n_a, self.n_b))
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

const VALIDATION_SAMPLES: usize = 128;
const VALIDATION_TOL: f64 = 1e-8;

impl<T: Real> ProblemSpec<T> {
    /// Validates ellipticity and coefficient bounds on sampled domain points
    /// (at least 100 per control pair) and freezes the problem.
    pub fn build(self, domain: &dyn Domain<T>) -> Result<IsaacsProblem<T>, ProblemError> {
        if self.n_a == 0 || self.n_b == 0 {
            return Err(ProblemError::InvalidSpec("control sets must be nonempty".into()));
        }
        if self.coefficients.len() != self.n_a * self.n_b {
            return Err(ProblemError::InvalidSpec(format!(
                "expected {} coefficient records, got {}",
                self.n_a * self.n_b,
                self.coefficients.len()
            )));
        }
        if !(self.delta > T::zero() && self.delta <= T::one()) {
            return Err(ProblemError::InvalidSpec("delta must lie in (0, 1]".into()));
        }
        if domain.dims() != self.dims {
            return Err(ProblemError::InvalidSpec(format!(
                "problem has {} dims, domain has {}",
                self.dims,
                domain.dims()
            )));
        }
        let samples = sample_domain(domain, VALIDATION_SAMPLES);
        let tol = T::lit(VALIDATION_TOL);
        let lo = self.delta - tol;
        let hi = self.delta.recip() + tol;
        let bound = self.delta.recip();
        for (k, coeff) in self.coefficients.iter().enumerate() {
            let (alpha, beta) = (k / self.n_b, k % self.n_b);
            for x in &samples {
                let pc = coeff.eval(x);
                let point = || x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>();
                if pc.a.rows() != self.dims || !pc.a.is_square() || pc.b.len() != self.dims {
                    return Err(ProblemError::InvalidSpec("coefficient shape mismatch".into()));
                }
                if !pc.a.is_symmetric(tol) {
                    return Err(ProblemError::InvalidSpec(format!(
                        "diffusion of pair ({alpha}, {beta}) is not symmetric"
                    )));
                }
                for e in pc.a.symmetric_eigenvalues() {
                    if !(e >= lo && e <= hi) {
                        return Err(ProblemError::EllipticityViolation {
                            alpha,
                            beta,
                            point: point(),
                            eigenvalue: e.to_f64_lossy(),
                            lo: self.delta.to_f64_lossy(),
                            hi: bound.to_f64_lossy(),
                        });
                    }
                }
                if pc.c < T::zero() {
                    return Err(ProblemError::NegativeC { alpha, beta, point: point(), value: pc.c.to_f64_lossy() });
                }
                let checks = [("|b|", crate::linalg::norm(&pc.b)), ("|c|", pc.c.abs()), ("|f|", pc.f.abs())];
                for (what, value) in checks {
                    if !(value <= bound + tol) {
                        return Err(ProblemError::BoundExceeded {
                            what,
                            alpha,
                            beta,
                            point: point(),
                            value: value.to_f64_lossy(),
                            bound: bound.to_f64_lossy(),
                        });
                    }
                }
            }
        }
        Ok(IsaacsProblem {
            name: self.name,
            dims: self.dims,
            delta: self.delta,
            holder_gamma1: self.holder_gamma1,
            n_a: self.n_a,
            n_b: self.n_b,
            coefficients: self.coefficients,
            exact: self.exact,
        })
    }
}

/// Deterministic rejection sampling from the domain's bounding box.
fn sample_domain<T: Real>(domain: &dyn Domain<T>, count: usize) -> Vec<Vec<T>> {
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 1000 {
        attempts += 1;
        let x: Vec<T> = lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| a + (b - a) * T::lit(rng.gen::<f64>()))
            .collect();
        if domain.contains(&x) {
            out.push(x);
        }
    }
    out
}

impl<T: Real> IsaacsProblem<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn holder_gamma1(&self) -> T {
        self.holder_gamma1
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn coefficients(&self, alpha: usize, beta: usize) -> &Coefficients<T> {
        assert!(alpha < self.n_a && beta < self.n_b, "control index out of range");
        &self.coefficients[alpha * self.n_b + beta]
    }

    pub fn eval(&self, alpha: usize, beta: usize, x: &[T]) -> PointCoefficients<T> {
        self.coefficients(alpha, beta).eval(x)
    }

    pub fn exact_solution(&self) -> Option<&Arc<dyn SmoothField<T>>> {
        self.exact.as_ref()
    }

    pub fn with_exact_solution(mut self, exact: Arc<dyn SmoothField<T>>) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Replaces every forcing term, keeping the other coefficients.
    pub fn with_forcing<F>(&self, forcing: F) -> Self
    where
        F: Fn(usize, usize) -> ScalarField<T>,
    {
        let mut out = self.clone();
        for alpha in 0..self.n_a {
            for beta in 0..self.n_b {
                out.coefficients[alpha * self.n_b + beta].forcing = forcing(alpha, beta);
            }
        }
        out.exact = None;
        out
    }

    /// `sup_α inf_β [a:u″ + b·u′ − c u′₀ + f](x)`.
    pub fn hamiltonian(&self, symbol: &Symbol<T>, x: &[T]) -> T {
        let table: Vec<T> = (0..self.n_a)
            .flat_map(|a| (0..self.n_b).map(move |b| (a, b)))
            .map(|(a, b)| self.eval(a, b, x).apply(symbol))
            .collect();
        sup_inf(&table, self.n_a, self.n_b).value
    }
}

/// Rewrites every forcing term so that `v_exact` solves the continuous
/// equation with every control pair indifferent:
/// `f^{αβ} = −(a^{αβ} : D²v + b^{αβ} · Dv − c^{αβ} v)`.
pub fn manufacture<T: Real>(v_exact: Arc<dyn SmoothField<T>>, problem: &IsaacsProblem<T>) -> IsaacsProblem<T> {
    let mut out = problem.clone();
    for (k, coeff) in out.coefficients.iter_mut().enumerate() {
        let base = problem.coefficients[k].clone();
        let v = Arc::clone(&v_exact);
        coeff.forcing = Arc::new(move |x: &[T]| {
            let mut pc = base.eval(x);
            pc.f = T::zero();
            let symbol = Symbol { u0: v.value(x), grad: v.gradient(x), hess: v.hessian(x) };
            -pc.apply(&symbol)
        });
    }
    out.name = format!("manufactured({})", problem.name);
    out.exact = Some(v_exact);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuseMode {
    /// `max(H[u], P[u] − K)`: Pucci members join the maximizing controls.
    Max,
    /// `min(H[u], −P[−u] + K)`: Pucci members join the minimizing controls.
    Min,
}

/// A base problem combined with a Pucci family at truncation level `K`,
/// realized as an ordinary Isaacs problem over enlarged control sets.
#[derive(Clone, Debug)]
pub struct FusedProblem<T: Real> {
    pub base: Arc<IsaacsProblem<T>>,
    pub pucci: Arc<PucciFamily<T>>,
    pub k: T,
    pub mode: FuseMode,
    realized: IsaacsProblem<T>,
}

/// Builds the fused problem. For [`FuseMode::Max`] the maximizing set becomes
/// `A ⊔ A₂` with `f_K = f` on `A` and `−K` on `A₂`; for [`FuseMode::Min`] the
/// minimizing set becomes `B ⊔ B₂` with `f_K = f` on `B` and `+K` on `B₂`.
/// Pucci-indexed controls carry the member's constant `(a, b)` and `c = 0`.
pub fn fuse<T: Real>(
    problem: Arc<IsaacsProblem<T>>,
    pucci: Arc<PucciFamily<T>>,
    k: T,
    mode: FuseMode,
) -> Result<FusedProblem<T>, ProblemError> {
    if !(k >= T::zero()) {
        return Err(ProblemError::InvalidParameter { key: "K".into(), reason: "must be ≥ 0".into() });
    }
    if pucci.dims() != problem.dims() {
        return Err(ProblemError::InvalidSpec("Pucci family dimension mismatch".into()));
    }
    let members = pucci.members();
    let member_coeffs = |m: &PucciMember<T>, f: T| Coefficients {
        diffusion: Diffusion::Matrix(crate::fields::constant_matrix(m.a.clone())),
        drift: crate::fields::constant_vector(m.b.clone()),
        zeroth: crate::fields::constant_scalar(T::zero()),
        forcing: crate::fields::constant_scalar(f),
    };
    let (n_a, n_b) = (problem.n_a, problem.n_b);
    let mut realized = (*problem).clone();
    realized.exact = None;
    match mode {
        FuseMode::Max => {
            let mut coeffs = problem.coefficients.clone();
            for m in &members {
                for _beta in 0..n_b {
                    coeffs.push(member_coeffs(m, -k));
                }
            }
            realized.n_a = n_a + members.len();
            realized.coefficients = coeffs;
            realized.name = format!("max-fuse({}, K={})", problem.name, k);
        }
        FuseMode::Min => {
            let n_b2 = n_b + members.len();
            let mut coeffs = Vec::with_capacity(n_a * n_b2);
            for alpha in 0..n_a {
                coeffs.extend(problem.coefficients[alpha * n_b..(alpha + 1) * n_b].iter().cloned());
                coeffs.extend(members.iter().map(|m| member_coeffs(m, k)));
            }
            realized.n_b = n_b2;
            realized.coefficients = coeffs;
            realized.name = format!("min-fuse({}, K={})", problem.name, k);
        }
    }
    Ok(FusedProblem { base: problem, pucci, k, mode, realized })
}

impl<T: Real> FusedProblem<T> {
    /// The fused problem as an Isaacs problem over the enlarged control sets.
    pub fn realized(&self) -> &IsaacsProblem<T> {
        &self.realized
    }

    pub fn into_realized(self) -> IsaacsProblem<T> {
        self.realized
    }

    /// Whether a control index of the realized problem belongs to the base
    /// (`A₁` for max-fuse, `B₁` for min-fuse).
    pub fn is_base_control(&self, alpha: usize, beta: usize) -> bool {
        match self.mode {
            FuseMode::Max => alpha < self.base.n_a,
            FuseMode::Min => beta < self.base.n_b,
        }
    }

    /// The two-term formula evaluated directly:
    /// `max(H, P − K)` or `min(H, −P[−u] + K)`.
    pub fn direct_value(&self, symbol: &Symbol<T>, x: &[T]) -> T {
        let h = self.base.hamiltonian(symbol, x);
        match self.mode {
            FuseMode::Max => h.max(self.pucci.apply(symbol) - self.k),
            FuseMode::Min => h.min(-self.pucci.apply(&symbol.negated()) + self.k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{constant_matrix, constant_scalar, constant_vector, LevelProfile, Profile};
    use crate::grid::Ball;
    use crate::stencil::generate_lambda;

    fn simple(a: Matrix<f64>, delta: f64) -> Result<IsaacsProblem<f64>, ProblemError> {
        ProblemSpec {
            name: "t".into(),
            dims: 2,
            delta,
            holder_gamma1: 1.0,
            n_a: 1,
            n_b: 1,
            coefficients: vec![Coefficients {
                diffusion: Diffusion::Matrix(constant_matrix(a)),
                drift: constant_vector(vec![0.0, 0.0]),
                zeroth: constant_scalar(0.0),
                forcing: constant_scalar(1.0),
            }],
            exact: None,
        }
        .build(&Ball::centered(2, 1.0))
    }

    #[test]
    fn sigma_factor() {
        let s = Matrix::<f64>::identity(2).scale(2f64.sqrt());
        let p = ProblemSpec {
            name: "sigma".into(),
            dims: 2,
            delta: 0.5,
            holder_gamma1: 1.0,
            n_a: 1,
            n_b: 1,
            coefficients: vec![Coefficients {
                diffusion: Diffusion::Sigma(constant_matrix(s)),
                drift: constant_vector(vec![0.0, 0.0]),
                zeroth: constant_scalar(0.0),
                forcing: constant_scalar(0.0),
            }],
            exact: None,
        }
        .build(&Ball::centered(2, 1.0))
        .unwrap();
        for x in [[0.0, 0.0], [0.3, -0.5]] {
            assert!(p.eval(0, 0, &x).a.max_abs_diff(&Matrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn ellipticity_checks() {
        assert!(simple(Matrix::identity(2), 0.5).is_ok());
        let err = simple(Matrix::diagonal(&[0.1, 1.0]), 0.5).unwrap_err();
        assert!(matches!(err, ProblemError::EllipticityViolation { .. }), "{err}");
    }

    #[test]
    fn negative_c_rejected() {
        let err = ProblemSpec {
            name: "negc".into(),
            dims: 2,
            delta: 0.5,
            holder_gamma1: 1.0,
            n_a: 1,
            n_b: 1,
            coefficients: vec![Coefficients {
                diffusion: Diffusion::Matrix(constant_matrix(Matrix::identity(2))),
                drift: constant_vector(vec![0.0, 0.0]),
                zeroth: constant_scalar(-0.1),
                forcing: constant_scalar(0.0),
            }],
            exact: None,
        }
        .build(&Ball::centered(2, 1.0))
        .unwrap_err();
        assert!(matches!(err, ProblemError::NegativeC { .. }));
    }

    fn two_control() -> IsaacsProblem<f64> {
        let coeff = |a: Matrix<f64>| Coefficients {
            diffusion: Diffusion::Matrix(constant_matrix(a)),
            drift: constant_vector(vec![0.0, 0.0]),
            zeroth: constant_scalar(0.0),
            forcing: constant_scalar(0.0),
        };
        ProblemSpec {
            name: "two".into(),
            dims: 2,
            delta: 0.5,
            holder_gamma1: 1.0,
            n_a: 2,
            n_b: 1,
            coefficients: vec![coeff(Matrix::identity(2)), coeff(Matrix::diagonal(&[2.0, 0.5]))],
            exact: None,
        }
        .build(&Ball::centered(2, 1.0))
        .unwrap()
    }

    #[test]
    fn manufactured_forcing_matches_differentiation() {
        // v = (1 − |x|²)/2 has D²v = −I, Dv = −x, so f^α = tr(a^α)
        let v: Arc<dyn SmoothField<f64>> = Arc::new(LevelProfile {
            center: vec![0.0, 0.0],
            semi_axes: vec![1.0, 1.0],
            amplitude: 0.5,
            profile: Profile::Linear,
        });
        let p = manufacture(v, &two_control());
        for x in [[0.0, 0.0], [0.4, -0.2]] {
            assert!((p.eval(0, 0, &x).f - 2.0).abs() < 1e-14);
            assert!((p.eval(1, 0, &x).f - 2.5).abs() < 1e-14);
        }
        let zero: Arc<dyn SmoothField<f64>> = Arc::new(crate::fields::Quadratic {
            m: Matrix::zeros(2, 2),
            p: vec![0.0, 0.0],
            c: 0.0,
        });
        let p0 = manufacture(zero, &two_control());
        assert_eq!(p0.eval(1, 0, &[0.3, 0.3]).f, 0.0);
    }

    #[test]
    fn fused_values_at_zero_symbol() {
        let base = Arc::new(simple(Matrix::identity(2), 0.5).unwrap());
        let pucci = Arc::new(make_pucci(0.5, &generate_lambda(2, 1)));
        let zero = Symbol::zero(2);
        let x = [0.1, 0.2];
        for k in [0.0, 1.0, 5.0] {
            let max = fuse(Arc::clone(&base), Arc::clone(&pucci), k, FuseMode::Max).unwrap();
            assert_eq!(max.realized().hamiltonian(&zero, &x), 1.0);
            assert_eq!(max.direct_value(&zero, &x), 1.0);
            let min = fuse(Arc::clone(&base), Arc::clone(&pucci), 5.0, FuseMode::Min).unwrap();
            assert_eq!(min.realized().hamiltonian(&zero, &x), 1.0);
        }
        assert!(fuse(base, pucci, -1.0, FuseMode::Max).is_err());
    }
}
