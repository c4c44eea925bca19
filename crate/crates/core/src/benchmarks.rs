//! Analytic benchmark cases with known exact solutions and the experiment
//! runner that reconstructs their initial datum.
//!
//! * Test 1: `S(x) = x`, `b = 2/y`, `f(x,t) = (1 + t/s)² e^{−x(s+t)}`.
//! * Test 2: `S(x) = x²`, `b = 2/y`, `f(x,t) = (1 + 2t(1+x)) e^{−t x² − x}`.
//!
//! Both start from `f0(x) = e^{−s x}` (`s = 1` for test 2).

use alloc::vec::Vec;

use crate::error::{check_len, invalid, Result};
use crate::forward::Scheme;
use crate::grid::{Grid, TimeGrid};
use crate::kernels::{DaughterDistribution, SelectionFunction};
use crate::optimizer::{gradient_descent, GradientKind, InverseProblem, OptimizerConfig, RunReport};
use crate::quadrature::gauss_legendre8;

/// Exact solution of test 1.
pub fn exact_test1(x: f64, t: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid("s", "shape parameter must be finite and positive"));
    }
    if !(x >= 0.0) || !(t >= 0.0) {
        return Err(invalid("x", "size and time must be nonnegative"));
    }
    let g = 1.0 + t / s;
    Ok(g * g * libm::exp(-x * (s + t)))
}

/// Exact solution of test 2.
pub fn exact_test2(x: f64, t: f64) -> f64 {
    (1.0 + 2.0 * t * (1.0 + x)) * libm::exp(-t * x * x - x)
}

/// First-iterate guess `x e^{−100 x^100}`: close to `x` below 0.95, zero beyond 1.
pub fn initial_guess(x: f64) -> f64 {
    x * libm::exp(-100.0 * libm::pow(x, 100.0))
}

/// `max_i |a_i − b_i|`.
pub fn linf_error(approx: &[f64], exact: &[f64]) -> Result<f64> {
    check_len(exact.len(), approx.len())?;
    Ok(approx
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// How a pointwise function is turned into cell values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Value at the cell centre.
    #[default]
    Pointwise,
    /// Cell average by 8-point Gauss–Legendre.
    CellAverage,
}

impl Projection {
    pub fn name(&self) -> &'static str {
        match self {
            Projection::Pointwise => "pointwise",
            Projection::CellAverage => "cell_average",
        }
    }
}

impl core::str::FromStr for Projection {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(Self::Pointwise),
            "cell_average" => Ok(Self::CellAverage),
            _ => Err(crate::error::Error::InvalidArgument(alloc::format!(
                "unknown projection `{s}` (expected pointwise or cell_average)"
            ))),
        }
    }
}

pub fn project<F: Fn(f64) -> f64>(grid: &Grid, f: F, projection: Projection) -> Vec<f64> {
    match projection {
        Projection::Pointwise => grid.centers().iter().map(|&x| f(x)).collect(),
        Projection::CellAverage => (0..grid.len())
            .map(|i| gauss_legendre8(&f, grid.lower(i), grid.upper(i)) / grid.widths()[i])
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    Test1,
    Test2,
}

impl BenchmarkId {
    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkId::Test1 => "test1",
            BenchmarkId::Test2 => "test2",
        }
    }
}

impl core::str::FromStr for BenchmarkId {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(Self::Test1),
            "test2" => Ok(Self::Test2),
            _ => Err(crate::error::Error::InvalidArgument(alloc::format!(
                "unknown benchmark `{s}` (expected test1 or test2)"
            ))),
        }
    }
}

/// Default run parameters of a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkDefaults {
    pub length: f64,
    pub cells: usize,
    pub ratio: f64,
    pub final_time: f64,
    pub steps: usize,
    pub step: f64,
    pub fvs_iters: usize,
    pub wfvs_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkCase {
    pub id: BenchmarkId,
    /// Shape parameter `s` of test 1 (test 2 uses 1).
    pub shape: f64,
}

impl BenchmarkCase {
    pub fn test1() -> Self {
        Self {
            id: BenchmarkId::Test1,
            shape: 1.0,
        }
    }

    pub fn test1_with_shape(shape: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(invalid("s", "shape parameter must be finite and positive"));
        }
        Ok(Self {
            id: BenchmarkId::Test1,
            shape,
        })
    }

    pub fn test2() -> Self {
        Self {
            id: BenchmarkId::Test2,
            shape: 1.0,
        }
    }

    pub fn from_id(id: BenchmarkId) -> Self {
        match id {
            BenchmarkId::Test1 => Self::test1(),
            BenchmarkId::Test2 => Self::test2(),
        }
    }

    pub fn selection(&self) -> SelectionFunction {
        match self.id {
            BenchmarkId::Test1 => SelectionFunction::linear(),
            BenchmarkId::Test2 => SelectionFunction::quadratic(),
        }
    }

    pub fn daughter(&self) -> DaughterDistribution {
        DaughterDistribution::PowerLawBinary
    }

    /// Exact solution `f(x, t)` for `x, t ≥ 0`.
    pub fn exact(&self, x: f64, t: f64) -> f64 {
        match self.id {
            BenchmarkId::Test1 => {
                let g = 1.0 + t / self.shape;
                g * g * libm::exp(-x * (self.shape + t))
            }
            BenchmarkId::Test2 => exact_test2(x, t),
        }
    }

    /// Exact initial datum `e^{−s x}`.
    pub fn initial(&self, x: f64) -> f64 {
        self.exact(x, 0.0)
    }

    pub fn defaults(&self) -> BenchmarkDefaults {
        match self.id {
            BenchmarkId::Test1 => BenchmarkDefaults {
                length: 5.0,
                cells: 35,
                ratio: 1.4,
                final_time: 2.0,
                steps: 20,
                step: 0.002,
                fvs_iters: 50,
                wfvs_iters: 50,
            },
            BenchmarkId::Test2 => BenchmarkDefaults {
                length: 5.0,
                cells: 25,
                ratio: 1.4,
                final_time: 2.0,
                steps: 20,
                step: 0.0015,
                fvs_iters: 150,
                wfvs_iters: 15,
            },
        }
    }

    pub fn default_iters(&self, scheme: Scheme) -> usize {
        let d = self.defaults();
        match scheme {
            Scheme::Fvs => d.fvs_iters,
            Scheme::Wfvs => d.wfvs_iters,
        }
    }
}

/// Optional replacements for a benchmark's default parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BenchmarkOverrides {
    pub length: Option<f64>,
    pub cells: Option<usize>,
    pub ratio: Option<f64>,
    pub first_edge: Option<f64>,
    pub final_time: Option<f64>,
    pub steps: Option<usize>,
    pub substeps: Option<usize>,
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub gradient: Option<GradientKind>,
    pub clip_nonnegative: Option<bool>,
    pub projection: Option<Projection>,
}

/// Everything a benchmark reconstruction produced.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub case: BenchmarkCase,
    pub scheme: Scheme,
    pub grid: Grid,
    pub time: TimeGrid,
    pub config: OptimizerConfig,
    /// Exact `f(·, T)` projected on the grid.
    pub target: Vec<f64>,
    /// Exact `f(·, 0)` projected on the grid.
    pub exact_initial: Vec<f64>,
    pub guess: Vec<f64>,
    pub report: RunReport,
}

impl BenchmarkRun {
    pub fn target_error(&self) -> f64 {
        self.report.last().target_error
    }

    pub fn initial_error(&self) -> f64 {
        self.report.last().initial_error.unwrap_or(f64::NAN)
    }
}

/// Grid, time grid, optimizer configuration and inverse problem for a case.
pub fn benchmark_problem(
    case: &BenchmarkCase,
    scheme: Scheme,
    overrides: &BenchmarkOverrides,
) -> Result<(InverseProblem, OptimizerConfig, Projection)> {
    let d = case.defaults();
    let length = overrides.length.unwrap_or(d.length);
    let cells = overrides.cells.unwrap_or(d.cells);
    let grid = match overrides.first_edge {
        Some(edge) => Grid::geometric_from_first_edge(length, cells, edge)?,
        None => Grid::geometric(length, cells, overrides.ratio.unwrap_or(d.ratio))?,
    };
    let final_time = overrides.final_time.unwrap_or(d.final_time);
    let steps = overrides.steps.unwrap_or(d.steps);
    let time = if steps == 0 {
        TimeGrid::frozen(final_time)?
    } else {
        TimeGrid::new(final_time, steps)?.with_substeps(overrides.substeps.unwrap_or(1))?
    };
    let mut config = OptimizerConfig::new(
        overrides.step.unwrap_or(d.step),
        overrides.max_iters.unwrap_or_else(|| case.default_iters(scheme)),
    )?;
    config.gradient = overrides.gradient.unwrap_or_default();
    config.clip_nonnegative = overrides.clip_nonnegative.unwrap_or(false);
    let projection = overrides.projection.unwrap_or_default();
    let target = project(&grid, |x| case.exact(x, final_time), projection);
    let problem = InverseProblem::new(grid, time, case.selection(), case.daughter(), scheme, target)?;
    Ok((problem, config, projection))
}

/// Reconstructs the initial datum of `case` from its exact final state,
/// starting from [`initial_guess`].
pub fn run_benchmark(case: &BenchmarkCase, scheme: Scheme, overrides: &BenchmarkOverrides) -> Result<BenchmarkRun> {
    let (problem, config, projection) = benchmark_problem(case, scheme, overrides)?;
    let grid = problem.grid().clone();
    let exact_initial = project(&grid, |x| case.initial(x), projection);
    let guess = project(&grid, initial_guess, Projection::Pointwise);
    let report = gradient_descent(&config, &problem, &guess, Some(&exact_initial))?;
    Ok(BenchmarkRun {
        case: *case,
        scheme,
        time: *problem.time(),
        target: problem.target().to_vec(),
        grid,
        config,
        exact_initial,
        guess,
        report,
    })
}
