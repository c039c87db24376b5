//! Built-in problem instances selected by name plus a `key = value` parameter map.
//!
//! | name                  | controls | notes                                            |
//! |-----------------------|----------|--------------------------------------------------|
//! | `poisson-ball`        | 1 × 1    | `a = I`, constant `f`; exact solution known      |
//! | `variable-linear`     | 1 × 1    | rotating anisotropic `a(x)`, small drift and `c` |
//! | `bellman-2`           | 2 × 1    | two diffusions, space-dependent forcing          |
//! | `isaacs-2x2`          | 2 × 2    | sup-inf differs from inf-sup                     |
//! | `manufactured-isaacs` | 2 × 2    | `isaacs-2x2` with forcing built from `v_exact`   |

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{manufacture, Coefficients, Diffusion, IsaacsProblem, ProblemError, ProblemSpec};
use crate::fields::{constant_matrix, constant_scalar, constant_vector, LevelProfile, Profile, SmoothField};
use crate::grid::{Ball, Domain, Ellipsoid};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const NAMES: [&str; 5] = ["poisson-ball", "variable-linear", "bellman-2", "isaacs-2x2", "manufactured-isaacs"];

/// The domain shapes the catalog knows closed-form solutions on.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape<T> {
    Ball(Ball<T>),
    Ellipsoid(Ellipsoid<T>),
}

impl<T: Real> Shape<T> {
    pub fn dims(&self) -> usize {
        match self {
            Shape::Ball(b) => b.center.len(),
            Shape::Ellipsoid(e) => e.center.len(),
        }
    }

    pub fn to_domain(&self) -> Arc<dyn Domain<T>> {
        match self {
            Shape::Ball(b) => Arc::new(b.clone()),
            Shape::Ellipsoid(e) => Arc::new(e.clone()),
        }
    }

    fn center(&self) -> Vec<T> {
        match self {
            Shape::Ball(b) => b.center.clone(),
            Shape::Ellipsoid(e) => e.center.clone(),
        }
    }

    fn semi_axes(&self) -> Vec<T> {
        match self {
            Shape::Ball(b) => vec![b.radius; b.center.len()],
            Shape::Ellipsoid(e) => e.semi_axes.clone(),
        }
    }

    /// `amplitude · g(s(x))`, zero on the boundary.
    pub fn level_profile(&self, amplitude: T, profile: Profile) -> LevelProfile<T> {
        LevelProfile { center: self.center(), semi_axes: self.semi_axes(), amplitude, profile }
    }
}

/// String parameters with typed accessors; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    fn real<T: Real>(&self, key: &str, default: f64) -> Result<T, ProblemError> {
        match self.0.get(key) {
            None => Ok(T::lit(default)),
            Some(s) => s.trim().parse::<f64>().map(T::lit).map_err(|e| ProblemError::InvalidParameter {
                key: key.to_string(),
                reason: e.to_string(),
            }),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<(), ProblemError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ProblemError::InvalidParameter {
                key: k.clone(),
                reason: format!("not recognized; expected one of {allowed:?}"),
            }),
            None => Ok(()),
        }
    }
}

fn constant<T: Real>(a: Matrix<T>, b: [f64; 2], c: f64, f: f64) -> Coefficients<T> {
    Coefficients {
        diffusion: Diffusion::Matrix(constant_matrix(a)),
        drift: constant_vector(b.iter().map(|&v| T::lit(v)).collect()),
        zeroth: constant_scalar(T::lit(c)),
        forcing: constant_scalar(T::lit(f)),
    }
}

fn require_2d<T: Real>(name: &str, shape: &Shape<T>) -> Result<(), ProblemError> {
    if shape.dims() == 2 {
        Ok(())
    } else {
        Err(ProblemError::InvalidSpec(format!("{name} is defined in two dimensions only")))
    }
}

/// The four constant-coefficient pairs of `isaacs-2x2`, forcing scaled by `scale`.
fn isaacs_pairs<T: Real>(scale: f64) -> Vec<Coefficients<T>> {
    vec![
        constant(Matrix::identity(2), [0.0, 0.0], 0.0, 1.0 * scale),
        constant(Matrix::from_f64_rows(&[&[1.5, 0.4], &[0.4, 1.0]]), [0.2, 0.0], 0.0, 0.6 * scale),
        constant(Matrix::from_f64_rows(&[&[0.8, -0.3], &[-0.3, 1.4]]), [0.0, -0.2], 0.2, 0.8 * scale),
        constant(Matrix::identity(2).scale(T::lit(1.2)), [0.0, 0.0], 0.0, 1.3 * scale),
    ]
}

pub fn build<T: Real>(name: &str, params: &Params, shape: &Shape<T>) -> Result<IsaacsProblem<T>, ProblemError> {
    let domain = shape.to_domain();
    let d = shape.dims();
    let delta: T = params.real("delta", 0.5)?;
    let spec = |n_a, n_b, coefficients, exact| ProblemSpec {
        name: name.to_string(),
        dims: d,
        delta,
        holder_gamma1: T::one(),
        n_a,
        n_b,
        coefficients,
        exact,
    };
    match name {
        "poisson-ball" => {
            params.only(&["delta", "f"])?;
            let f: T = params.real("f", 1.0)?;
            let coeff = Coefficients {
                diffusion: Diffusion::Matrix(constant_matrix(Matrix::identity(d))),
                drift: constant_vector(vec![T::zero(); d]),
                zeroth: constant_scalar(T::zero()),
                forcing: constant_scalar(f),
            };
            // Δv = −f for v = f (1 − s)/(2 Σ e_i⁻²)
            let inv: T = shape.semi_axes().iter().map(|&e| (e * e).recip()).sum();
            let exact: Arc<dyn SmoothField<T>> =
                Arc::new(shape.level_profile(f / (T::lit(2.0) * inv), Profile::Linear));
            spec(1, 1, vec![coeff], Some(exact)).build(domain.as_ref())
        }
        "variable-linear" => {
            params.only(&["delta", "f", "anisotropy"])?;
            require_2d(name, shape)?;
            let f: T = params.real("f", 1.0)?;
            let hi: T = params.real("anisotropy", 1.5)?;
            let lo = T::lit(0.75);
            let coeff = Coefficients {
                diffusion: Diffusion::Matrix(Arc::new(move |x: &[T]| {
                    let theta = T::lit(std::f64::consts::FRAC_PI_2) * (x[0] + x[1]);
                    let (s, c) = theta.sin_cos();
                    Matrix::from_rows(&[
                        vec![hi * c * c + lo * s * s, (hi - lo) * s * c],
                        vec![(hi - lo) * s * c, hi * s * s + lo * c * c],
                    ])
                })),
                drift: Arc::new(|x: &[T]| vec![T::lit(0.2) * x[1], T::lit(-0.2) * x[0]]),
                zeroth: Arc::new(|x: &[T]| T::lit(0.1) * (T::one() + x[0] * x[0])),
                forcing: constant_scalar(f),
            };
            spec(1, 1, vec![coeff], None).build(domain.as_ref())
        }
        "bellman-2" => {
            params.only(&["delta", "f"])?;
            require_2d(name, shape)?;
            let f: T = params.real("f", 1.0)?;
            let first = constant(Matrix::identity(2), [0.0, 0.0], 0.0, 1.0);
            let second = Coefficients {
                diffusion: Diffusion::Matrix(constant_matrix(Matrix::from_f64_rows(&[&[1.5, 0.4], &[0.4, 1.0]]))),
                drift: constant_vector(vec![T::zero(), T::lit(0.1)]),
                zeroth: constant_scalar(T::zero()),
                forcing: Arc::new(move |x: &[T]| f * (T::lit(0.8) + T::lit(0.4) * x[0])),
            };
            let first = Coefficients { forcing: constant_scalar(f), ..first };
            spec(2, 1, vec![first, second], None).build(domain.as_ref())
        }
        "isaacs-2x2" => {
            params.only(&["delta", "scale"])?;
            require_2d(name, shape)?;
            let scale = params.real::<f64>("scale", 1.0)?;
            spec(2, 2, isaacs_pairs(scale), None).build(domain.as_ref())
        }
        "manufactured-isaacs" => {
            params.only(&["delta", "amplitude", "profile"])?;
            require_2d(name, shape)?;
            let amplitude: T = params.real("amplitude", 0.1)?;
            let profile = match params.0.get("profile").map(String::as_str) {
                None | Some("cos") => Profile::Cosine,
                Some("poly") => Profile::Linear,
                Some(other) => {
                    return Err(ProblemError::InvalidParameter {
                        key: "profile".into(),
                        reason: format!("expected cos or poly, got '{other}'"),
                    })
                }
            };
            let base = spec(2, 2, isaacs_pairs(1.0), None).build(domain.as_ref())?;
            let exact: Arc<dyn SmoothField<T>> = Arc::new(shape.level_profile(amplitude, profile));
            let manufactured = manufacture(exact, &base);
            // re-validate the bounds on the rewritten forcing
            let spec = ProblemSpec {
                name: name.to_string(),
                dims: d,
                delta,
                holder_gamma1: T::one(),
                n_a: 2,
                n_b: 2,
                coefficients: (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| manufactured.coefficients(a, b).clone()).collect(),
                exact: manufactured.exact_solution().cloned(),
            };
            spec.build(domain.as_ref())
        }
        other => Err(ProblemError::UnknownProblem(other.to_string())),
    }
}
