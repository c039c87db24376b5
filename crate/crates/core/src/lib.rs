//! Monotone finite-difference schemes for Isaacs equations
//! `sup_α inf_β [a:u″ + b·u′ − c u + f] = 0` on bounded domains with zero
//! Dirichlet data, together with solvers and convergence experiments.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod cli;
pub mod discrete_ops;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod linalg;
pub mod problem;
pub mod scalar;
pub mod simplex;
pub mod solver;
pub mod stencil;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type Problem64 = problem::IsaacsProblem<f64>;
pub type Decomposition64 = stencil::Decomposition<f64>;
pub type DecompositionCache64 = stencil::DecompositionCache<f64>;
pub type DiscreteOperator64 = discrete_ops::DiscreteOperator<f64>;
