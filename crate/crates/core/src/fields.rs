//! Callable coefficient fields and smooth test functions with derivatives.

use std::fmt;
use std::sync::Arc;

use crate::linalg::Matrix;
use crate::scalar::Real;

pub type ScalarField<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type MatrixField<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

pub fn constant_scalar<T: Real>(c: T) -> ScalarField<T> {
    Arc::new(move |_| c)
}

pub fn constant_vector<T: Real>(v: Vec<T>) -> VectorField<T> {
    Arc::new(move |_| v.clone())
}

pub fn constant_matrix<T: Real>(m: Matrix<T>) -> MatrixField<T> {
    Arc::new(move |_| m.clone())
}

/// A twice (or more) differentiable function supplying its value, gradient
/// and Hessian.
pub trait SmoothField<T: Real>: Send + Sync {
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T]) -> Vec<T>;
    fn hessian(&self, x: &[T]) -> Matrix<T>;
}

/// `xᵀ M x + ⟨p, x⟩ + c`.
#[derive(Clone, Debug)]
pub struct Quadratic<T: Real> {
    pub m: Matrix<T>,
    pub p: Vec<T>,
    pub c: T,
}

impl<T: Real> SmoothField<T> for Quadratic<T> {
    fn value(&self, x: &[T]) -> T {
        let mx = self.m.mul_vec(x);
        crate::linalg::dot(x, &mx) + crate::linalg::dot(&self.p, x) + self.c
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let sym = self.m.add(&self.m.transpose());
        sym.mul_vec(x).iter().zip(&self.p).map(|(&a, &b)| a + b).collect()
    }

    fn hessian(&self, _x: &[T]) -> Matrix<T> {
        self.m.add(&self.m.transpose())
    }
}

/// Field assembled from three closures.
#[derive(Clone)]
pub struct FnField<T: Real> {
    pub value: ScalarField<T>,
    pub gradient: VectorField<T>,
    pub hessian: MatrixField<T>,
}

impl<T: Real> fmt::Debug for FnField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnField")
    }
}

impl<T: Real> SmoothField<T> for FnField<T> {
    fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[T]) -> Matrix<T> {
        (self.hessian)(x)
    }
}

/// Profile `g` with `g(1) = 0`, composed with the normalized quadratic level
/// `s(x) = Σ ((x_i − c_i)/e_i)²` of a ball or ellipsoid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// `g(s) = cos(π s / 2)`
    Cosine,
    /// `g(s) = 1 − s`
    Linear,
}

/// `amplitude · g(s(x))`, vanishing on the boundary `s = 1`.
#[derive(Clone, Debug)]
pub struct LevelProfile<T: Real> {
    pub center: Vec<T>,
    pub semi_axes: Vec<T>,
    pub amplitude: T,
    pub profile: Profile,
}

impl<T: Real> LevelProfile<T> {
    fn s(&self, x: &[T]) -> T {
        x.iter()
            .zip(&self.center)
            .zip(&self.semi_axes)
            .map(|((&xi, &ci), &ei)| {
                let q = (xi - ci) / ei;
                q * q
            })
            .sum()
    }

    /// `(g, g', g'')` at `s`.
    fn g(&self, s: T) -> (T, T, T) {
        match self.profile {
            Profile::Cosine => {
                let k = T::lit(std::f64::consts::FRAC_PI_2);
                let (sn, cs) = (k * s).sin_cos();
                (cs, -k * sn, -k * k * cs)
            }
            Profile::Linear => (T::one() - s, -T::one(), T::zero()),
        }
    }

    fn ds(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.center)
            .zip(&self.semi_axes)
            .map(|((&xi, &ci), &ei)| T::lit(2.0) * (xi - ci) / (ei * ei))
            .collect()
    }
}

impl<T: Real> SmoothField<T> for LevelProfile<T> {
    fn value(&self, x: &[T]) -> T {
        self.amplitude * self.g(self.s(x)).0
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let (_, g1, _) = self.g(self.s(x));
        self.ds(x).into_iter().map(|v| self.amplitude * g1 * v).collect()
    }

    fn hessian(&self, x: &[T]) -> Matrix<T> {
        let (_, g1, g2) = self.g(self.s(x));
        let ds = self.ds(x);
        let d = x.len();
        let mut h = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut v = g2 * ds[i] * ds[j];
                if i == j {
                    v = v + g1 * T::lit(2.0) / (self.semi_axes[i] * self.semi_axes[i]);
                }
                h[(i, j)] = self.amplitude * v;
            }
        }
        h
    }
}
