use crate::discrete_ops::Symbol;
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;
use crate::stencil::DirectionSet;

/// Directions whose weights are toggled independently; beyond this the
/// remaining directions stay at the low weight (the all-high member is always
/// added) to keep the family size at most `2^8 + 1` matrices.
const MAX_TOGGLED: usize = 8;

/// One linear piece of the majorant: constant `(a, b)` with `c = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PucciMember<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
}

/// Convex, positively homogeneous extremal operator
/// `P(u) = max over (M, s) of [tr(M u″) + δ̂⁻¹ Σ s_i u′_i]`.
///
/// Each `M = Σ_{k ∈ half_set} w_k l_k l_kᵀ` with `w_k ∈ {δ̂/σ, δ̂⁻¹/σ}`, where
/// `Σ_k l_k l_kᵀ = σ I` over the half set. Every member therefore has
/// eigenvalues in `[δ̂, δ̂⁻¹]`, and the family contains `δ̂ I` and `δ̂⁻¹ I`.
/// `s` ranges over all `2^d` sign patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct PucciFamily<T> {
    delta_hat: T,
    matrix_set: Vec<Matrix<T>>,
    signs: Vec<Vec<T>>,
}

pub fn make_pucci<T: Real>(delta_hat: T, dirs: &DirectionSet) -> PucciFamily<T> {
    assert!(delta_hat > T::zero() && delta_hat <= T::one(), "delta_hat must lie in (0, 1]");
    let d = dirs.dims();
    let half = dirs.half_set();
    let sigma = T::lit(half.iter().map(|l| l.norm().powi(2)).sum::<f64>() / d as f64);
    let lo = delta_hat / sigma;
    let hi = delta_hat.recip() / sigma;
    let outers: Vec<Matrix<T>> = half.iter().map(|l| Matrix::outer_int(l.components())).collect();
    let toggled = half.len().min(MAX_TOGGLED);

    let mut matrix_set: Vec<Matrix<T>> = Vec::new();
    let mut push = |m: Matrix<T>| {
        if !matrix_set.iter().any(|e| e.max_abs_diff(&m) <= T::epsilon() * T::lit(64.0)) {
            matrix_set.push(m);
        }
    };
    for mask in 0u32..(1u32 << toggled) {
        let mut m = Matrix::zeros(d, d);
        for (k, outer) in outers.iter().enumerate() {
            let w = if k < toggled && mask & (1 << k) != 0 { hi } else { lo };
            m.add_scaled(w, outer);
        }
        push(m);
    }
    let mut all_hi = Matrix::zeros(d, d);
    for outer in &outers {
        all_hi.add_scaled(hi, outer);
    }
    push(all_hi);

    let signs = (0u32..(1u32 << d))
        .map(|mask| (0..d).map(|i| if mask & (1 << i) != 0 { -T::one() } else { T::one() }).collect())
        .collect();
    PucciFamily { delta_hat, matrix_set, signs }
}

impl<T: Real> PucciFamily<T> {
    pub fn delta_hat(&self) -> T {
        self.delta_hat
    }

    pub fn dims(&self) -> usize {
        self.signs.first().map_or(0, Vec::len)
    }

    pub fn matrix_set(&self) -> &[Matrix<T>] {
        &self.matrix_set
    }

    pub fn signs(&self) -> &[Vec<T>] {
        &self.signs
    }

    pub fn drift_bound(&self) -> T {
        self.delta_hat.recip()
    }

    /// Every `(matrix, sign pattern)` pair as constant coefficients.
    pub fn members(&self) -> Vec<PucciMember<T>> {
        let bound = self.drift_bound();
        self.matrix_set
            .iter()
            .flat_map(|m| {
                self.signs.iter().map(move |s| PucciMember {
                    a: m.clone(),
                    b: s.iter().map(|&si| si * bound).collect(),
                })
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.matrix_set.len() * self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P(u)`; `u′₀` does not enter since every member has `c = 0`.
    pub fn apply(&self, symbol: &Symbol<T>) -> T {
        let bound = self.drift_bound();
        let second = self
            .matrix_set
            .iter()
            .map(|m| m.contract(&symbol.hess))
            .fold(T::neg_infinity(), T::max);
        let first = self
            .signs
            .iter()
            .map(|s| dot(s, &symbol.grad) * bound)
            .fold(T::neg_infinity(), T::max);
        second + first
    }
}
