//! Finite-volume solvers for the linear multiple-fragmentation equation
//!
//! ```text
//! ∂f/∂t (x, t) = ∫_x^R b(x, y) S(y) f(y, t) dy − S(x) f(x, t),   x ∈ (0, R]
//! ```
//!
//! together with its adjoint and an adjoint-based gradient descent that
//! reconstructs the initial size distribution from a prescribed final state.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `fraginv` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adjoint;
pub mod benchmarks;
pub mod error;
pub mod forward;
pub mod grid;
pub mod kernels;
pub mod optimizer;
pub mod quadrature;

pub use adjoint::{
    adjoint_step_backward, run_adjoint, transpose_adjoint_gradient, AdjointOperator, AdjointTable,
    AdjointVector, Integration,
};
pub use benchmarks::{
    exact_test1, exact_test2, initial_guess, linf_error, project, run_benchmark, BenchmarkCase,
    BenchmarkId, BenchmarkOverrides, BenchmarkRun, Projection,
};
pub use error::{Error, Result};
pub use forward::{
    fvs_step, moment, run_forward, wfvs_step, ForwardDiagnostics, ForwardOperator, FragmentTable,
    Scheme, StateVector, Trajectory, WeightPair,
};
pub use grid::{Grid, TimeGrid};
pub use kernels::{
    weighted_selection_daughter_integral, weighted_selection_daughter_quadrature,
    DaughterDistribution, SelectionFunction,
};
pub use optimizer::{
    adjoint_gradient, discrete_cost, discrete_inner_product, gradient_descent, normalize_direction,
    taylor_test, GradientKind, InverseProblem, IterationRecord, OptimizerConfig, RunReport,
    TaylorReport, TaylorRow,
};
