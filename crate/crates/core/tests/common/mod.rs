#![allow(dead_code)]

use std::sync::Arc;

use isaacs_fd::fields::{constant_matrix, constant_scalar, constant_vector};
use isaacs_fd::grid::{Ball, Grid};
use isaacs_fd::linalg::Matrix;
use isaacs_fd::problem::{Coefficients, Diffusion, IsaacsProblem, ProblemSpec};
use isaacs_fd::stencil::generate_lambda;
use rand::Rng;
use rand_distr::StandardNormal;

/// `Q diag(λ) Qᵀ` with `Q` from Gram-Schmidt on a Gaussian matrix and
/// `λ` log-uniform in `[δ, 1/δ]`.
pub fn random_s_delta<R: Rng>(rng: &mut R, d: usize, delta: f64) -> Matrix<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    let (lo, hi) = (delta.ln(), (1.0 / delta).ln());
    let lambda: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..=hi).exp()).collect();
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = (0..d).map(|k| q[k][i] * lambda[k] * q[k][j]).sum();
        }
    }
    // exact symmetry
    let t = a.transpose();
    a.add(&t).scale(0.5)
}

/// Singleton-control problem with constant coefficients on the unit ball.
pub fn constant_problem(a: Matrix<f64>, b: Vec<f64>, c: f64, f: f64, delta: f64) -> IsaacsProblem<f64> {
    let d = a.rows();
    ProblemSpec {
        name: "constant".into(),
        dims: d,
        delta,
        holder_gamma1: 1.0,
        n_a: 1,
        n_b: 1,
        coefficients: vec![Coefficients {
            diffusion: Diffusion::Matrix(constant_matrix(a)),
            drift: constant_vector(b),
            zeroth: constant_scalar(c),
            forcing: constant_scalar(f),
        }],
        exact: None,
    }
    .build(&Ball::centered(d, 1.0))
    .expect("valid constant problem")
}

pub fn ball_grid(d: usize, h: f64, m: i64) -> Arc<Grid<f64>> {
    Arc::new(Grid::build(Arc::new(Ball::centered(d, 1.0)), h, Arc::new(generate_lambda(d, m))).unwrap())
}

/// Thomas algorithm for `sub_i x_{i−1} + diag_i x_i + sup_i x_{i+1} = rhs_i`.
pub fn tridiagonal_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
