//! Discrete cost, adjoint gradients, fixed-step gradient descent on the
//! initial datum, and the Taylor remainder test.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::adjoint::AdjointOperator;
use crate::error::{check_len, invalid, Error, Result};
use crate::forward::{run_with_operator, ForwardOperator, Scheme, Trajectory};
use crate::grid::{Grid, TimeGrid};
use crate::kernels::{DaughterDistribution, SelectionFunction};

/// `J_Δx = ½ Σ (f_i − f*_i)² Δx_i`.
pub fn discrete_cost(final_state: &[f64], target: &[f64], grid: &Grid) -> Result<f64> {
    check_len(grid.len(), final_state.len())?;
    check_len(grid.len(), target.len())?;
    Ok(0.5
        * final_state
            .iter()
            .zip(target)
            .zip(grid.widths())
            .map(|((f, t), dx)| (f - t) * (f - t) * dx)
            .sum::<f64>())
}

/// `⟨u, v⟩_Δx = Σ u_i v_i Δx_i`.
pub fn discrete_inner_product(u: &[f64], v: &[f64], grid: &Grid) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), v.len())?;
    Ok(u.iter().zip(v).zip(grid.widths()).map(|((a, b), dx)| a * b * dx).sum())
}

/// Rescales `d` to unit length in `⟨·,·⟩_Δx`.
pub fn normalize_direction(d: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let norm = libm::sqrt(discrete_inner_product(d, d, grid)?);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("direction must be finite and nonzero".into()));
    }
    Ok(d.iter().map(|v| v / norm).collect())
}

/// Which adjoint produces the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientKind {
    /// Discretised continuous adjoint equation.
    #[default]
    Continuous,
    /// Exact transpose of the discrete forward scheme.
    Transpose,
}

impl GradientKind {
    pub fn name(&self) -> &'static str {
        match self {
            GradientKind::Continuous => "continuous",
            GradientKind::Transpose => "transpose",
        }
    }
}

impl core::str::FromStr for GradientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Self::Continuous),
            "transpose" => Ok(Self::Transpose),
            _ => Err(Error::InvalidArgument(alloc::format!(
                "unknown gradient kind `{s}` (expected continuous or transpose)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Constant step `ε_0`.
    pub step: f64,
    /// Number of updates `K`.
    pub max_iters: usize,
    /// Zero out negative entries after each update.
    pub clip_nonnegative: bool,
    pub gradient: GradientKind,
    /// Stop once `J_Δx` falls below this value.
    pub stop_below: Option<f64>,
}

impl OptimizerConfig {
    pub fn new(step: f64, max_iters: usize) -> Result<Self> {
        let cfg = Self {
            step,
            max_iters,
            clip_nonnegative: false,
            gradient: GradientKind::Continuous,
            stop_below: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(invalid("step", "learning rate must be finite and positive"));
        }
        if let Some(v) = self.stop_below {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid("stop_below", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// A fully specified reconstruction problem with its step operators
/// assembled once.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    grid: Grid,
    time: TimeGrid,
    scheme: Scheme,
    target: Vec<f64>,
    forward: ForwardOperator,
    adjoint: AdjointOperator,
}

impl InverseProblem {
    pub fn new(
        grid: Grid,
        time: TimeGrid,
        selection: SelectionFunction,
        daughter: DaughterDistribution,
        scheme: Scheme,
        target: Vec<f64>,
    ) -> Result<Self> {
        check_len(grid.len(), target.len())?;
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("target must be finite".into()));
        }
        let forward = ForwardOperator::new(&grid, &selection, &daughter, scheme)?;
        let adjoint = AdjointOperator::new(&grid, &selection, &daughter)?;
        Ok(Self {
            grid,
            time,
            scheme,
            target,
            forward,
            adjoint,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn forward_operator(&self) -> &ForwardOperator {
        &self.forward
    }

    /// `f(T)` for initial datum `f0`.
    pub fn final_state(&self, f0: &[f64]) -> Result<Vec<f64>> {
        self.forward.propagate(f0, &self.time)
    }

    pub fn trajectory(&self, f0: &[f64]) -> Result<Trajectory> {
        check_len(self.grid.len(), f0.len())?;
        run_with_operator(&self.forward, &self.time, f0)
    }

    pub fn cost(&self, f0: &[f64]) -> Result<f64> {
        discrete_cost(&self.final_state(f0)?, &self.target, &self.grid)
    }

    /// Gradient representative `g` with `dJ[d] = ⟨g, d⟩_Δx`.
    pub fn gradient(&self, f0: &[f64], kind: GradientKind) -> Result<Vec<f64>> {
        let residual = self.residual(&self.final_state(f0)?);
        self.gradient_from_residual(&residual, kind)
    }

    /// Gradient from a precomputed terminal residual `f(T) − f*`.
    pub fn gradient_from_residual(&self, residual: &[f64], kind: GradientKind) -> Result<Vec<f64>> {
        match kind {
            GradientKind::Continuous => self.adjoint.propagate(residual, &self.time),
            GradientKind::Transpose => self.forward.propagate_transpose(residual, &self.time),
        }
    }

    fn residual(&self, final_state: &[f64]) -> Vec<f64> {
        final_state.iter().zip(&self.target).map(|(f, t)| f - t).collect()
    }
}

/// Continuous-adjoint gradient: forward run, terminal `φ(T) = f(T) − f*`,
/// backward run, `g = φ(0)` (not multiplied by `Δx`).
pub fn adjoint_gradient(problem: &InverseProblem, f0: &[f64]) -> Result<Vec<f64>> {
    problem.gradient(f0, GradientKind::Continuous)
}

/// Metrics of one iterate `f0^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `J_Δx(f0^k)`.
    pub cost: f64,
    /// `E(f*) = max_i |f_i(T) − f*_i|`.
    pub target_error: f64,
    /// `E(f0) = max_i |f0^k_i − f0_exact,i|`, when the exact datum is known.
    pub initial_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Records for iterates `0..=iterations`.
    pub history: Vec<IterationRecord>,
    /// Final iterate `f0^K`.
    pub reconstruction: Vec<f64>,
    /// `f(T)` of the final iterate.
    pub final_state: Vec<f64>,
    /// Number of updates applied.
    pub iterations: usize,
}

impl RunReport {
    pub fn last(&self) -> &IterationRecord {
        &self.history[self.history.len() - 1]
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fixed-step descent `f0^{k+1} = f0^k − ε_0 g^k`.
pub fn gradient_descent(
    config: &OptimizerConfig,
    problem: &InverseProblem,
    initial_guess: &[f64],
    exact_initial: Option<&[f64]>,
) -> Result<RunReport> {
    config.validate()?;
    let size = problem.grid().len();
    check_len(size, initial_guess.len())?;
    if let Some(exact) = exact_initial {
        check_len(size, exact.len())?;
    }
    let fail = |iteration: usize| move |e: Error| Error::Descent {
        iteration,
        source: Box::new(e),
    };

    let mut f0 = initial_guess.to_vec();
    let mut history = Vec::with_capacity(config.max_iters + 1);
    let mut iteration = 0;
    loop {
        let final_state = problem.final_state(&f0).map_err(fail(iteration))?;
        let residual = problem.residual(&final_state);
        let record = IterationRecord {
            iteration,
            cost: discrete_cost(&final_state, problem.target(), problem.grid())?,
            target_error: residual.iter().fold(0.0, |m, r| f64::max(m, r.abs())),
            initial_error: exact_initial.map(|e| linf(&f0, e)),
        };
        history.push(record);
        let converged = config.stop_below.is_some_and(|tol| record.cost < tol);
        if iteration == config.max_iters || converged {
            return Ok(RunReport {
                history,
                reconstruction: f0,
                final_state,
                iterations: iteration,
            });
        }
        let grad = problem
            .gradient_from_residual(&residual, config.gradient)
            .map_err(fail(iteration))?;
        for (v, g) in f0.iter_mut().zip(&grad) {
            *v -= config.step * g;
            if config.clip_nonnegative && *v < 0.0 {
                *v = 0.0;
            }
        }
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(fail(iteration)(Error::Blowup { step: 0 }));
        }
        iteration += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub eta: f64,
    /// `|J(f0 + η d) − J(f0) − η ⟨∇J, d⟩_Δx|`.
    pub remainder: f64,
    /// `remainder / η²`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorReport {
    /// Rows in descending `η`.
    pub rows: Vec<TaylorRow>,
    /// `⟨∇J(f0), d⟩_Δx`.
    pub directional_derivative: f64,
}

/// Taylor remainder test along a `⟨·,·⟩_Δx`-normalised direction.
pub fn taylor_test(
    problem: &InverseProblem,
    f0: &[f64],
    direction: &[f64],
    etas: &[f64],
    kind: GradientKind,
) -> Result<TaylorReport> {
    let grid = problem.grid();
    check_len(grid.len(), f0.len())?;
    check_len(grid.len(), direction.len())?;
    if etas.is_empty() {
        return Err(Error::InvalidArgument("need at least one perturbation size".into()));
    }
    if etas.iter().any(|e| !e.is_finite() || *e <= 0.0) {
        return Err(invalid("eta", "perturbation sizes must be finite and positive"));
    }
    let norm = discrete_inner_product(direction, direction, grid)?;
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(alloc::format!(
            "direction must have unit Δx-norm (squared norm {norm})"
        )));
    }
    let base = problem.cost(f0)?;
    let grad = problem.gradient(f0, kind)?;
    let slope = discrete_inner_product(&grad, direction, grid)?;

    let mut sorted = etas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(sorted.len());
    let mut shifted = vec![0.0; f0.len()];
    for eta in sorted {
        for ((s, f), d) in shifted.iter_mut().zip(f0).zip(direction) {
            *s = f + eta * d;
        }
        let remainder = (problem.cost(&shifted)? - base - eta * slope).abs();
        rows.push(TaylorRow {
            eta,
            remainder,
            ratio: remainder / (eta * eta),
        });
    }
    Ok(TaylorReport {
        rows,
        directional_derivative: slope,
    })
}
