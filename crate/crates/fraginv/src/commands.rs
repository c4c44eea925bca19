//! The `forward`, `invert`, `taylor` and `bench` commands.

use std::path::{Path, PathBuf};
use std::thread;

use fraginv_core::{
    gradient_descent, initial_guess, moment, normalize_direction, project, run_benchmark,
    run_forward, taylor_test, BenchmarkCase, BenchmarkOverrides, BenchmarkRun, ForwardOperator, Grid,
    InverseProblem, OptimizerConfig, Projection, RunReport, Scheme, TaylorReport, TimeGrid, Trajectory,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::config::{BuiltinGuess, ConfigError, GuessSource, RunConfig, TargetSource};
use crate::output::{fmt_f64, Bundle, Header};

pub const DEFAULT_OUT_DIR: &str = "out";
pub const OUT_ENV: &str = "FRAGINV_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(fraginv_core::Error),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CommandError {
    /// 2 for usage and configuration problems, 3 for numerical blow-up,
    /// 1 for I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Usage(_) | CommandError::Config(_) => 2,
            CommandError::Numerical(_) => 3,
            CommandError::Io(_) => 1,
        }
    }
}

impl From<fraginv_core::Error> for CommandError {
    fn from(e: fraginv_core::Error) -> Self {
        if e.is_blowup() {
            CommandError::Numerical(e)
        } else {
            CommandError::Config(ConfigError::single("run", e.to_string()))
        }
    }
}

pub type CmdResult<T> = Result<T, CommandError>;

/// `--out`, then `$FRAGINV_OUT`, then `output_dir` from the config, then `out`.
pub fn output_root(flag: Option<&Path>, env: Option<&str>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn header(config: &RunConfig) -> Header {
    Header {
        fingerprint: config.fingerprint(),
        grid: config.grid_summary(),
    }
}

fn warn_if_unstable(time: &TimeGrid, op: &ForwardOperator) {
    let number = time.substep_dt() * op.max_selection();
    if number > 1.0 {
        log::warn!("dt * max S = {number:.3} exceeds 1; explicit Euler may produce negative densities");
    }
}

/// Runs `body`, discarding everything it wrote if it fails.
fn transactional<T>(body: impl FnOnce(&mut Bundle) -> CmdResult<T>) -> CmdResult<(T, Bundle)> {
    let mut bundle = Bundle::new();
    match body(&mut bundle) {
        Ok(v) => Ok((v, bundle)),
        Err(e) => {
            bundle.discard();
            Err(e)
        }
    }
}

fn target_values(config: &RunConfig, grid: &Grid) -> CmdResult<Vec<f64>> {
    match &config.target {
        TargetSource::Benchmark { case, projection } => {
            let t = config.time.final_time;
            Ok(project(grid, |x| case.exact(x, t), *projection))
        }
        TargetSource::Csv(path) => crate::output::read_profile(path, grid)
            .map_err(|e| ConfigError::single("target.csv", format!("{e:#}")).into()),
    }
}

/// Exact initial datum, when the configuration describes a benchmark with
/// its own kernels.
fn exact_initial(config: &RunConfig, grid: &Grid) -> Option<Vec<f64>> {
    let (case, projection) = config.benchmark()?;
    (config.selection == case.selection() && config.daughter == case.daughter())
        .then(|| project(grid, |x| case.initial(x), projection))
}

fn guess_values(config: &RunConfig, grid: &Grid, default: BuiltinGuess) -> CmdResult<Vec<f64>> {
    let source = config.initial_guess.clone().unwrap_or(GuessSource::Builtin(default));
    match source {
        GuessSource::Builtin(BuiltinGuess::Ramp) => Ok(project(grid, initial_guess, Projection::Pointwise)),
        GuessSource::Builtin(BuiltinGuess::Zero) => Ok(vec![0.0; grid.len()]),
        GuessSource::Builtin(BuiltinGuess::Exact) => match config.benchmark() {
            Some((case, projection)) => Ok(project(grid, |x| case.initial(x), projection)),
            None => Err(ConfigError::single("initial_guess", "no exact initial datum for a CSV target").into()),
        },
        GuessSource::Csv(path) => crate::output::read_profile(&path, grid)
            .map_err(|e| ConfigError::single("initial_guess.csv", format!("{e:#}")).into()),
    }
}

fn inverse_problem(config: &RunConfig) -> CmdResult<InverseProblem> {
    let grid = config.grid();
    let target = target_values(config, &grid)?;
    let problem = InverseProblem::new(
        grid,
        config.time_grid(),
        config.selection,
        config.daughter,
        config.scheme,
        target,
    )?;
    warn_if_unstable(problem.time(), problem.forward_operator());
    Ok(problem)
}

fn optimizer_config(config: &RunConfig) -> CmdResult<OptimizerConfig> {
    let o = &config.optimizer;
    let bench = config.benchmark().map(|(case, _)| case);
    let step = match (o.eps0, bench) {
        (Some(v), _) => v,
        (None, Some(case)) => case.defaults().step,
        (None, None) => return Err(ConfigError::single("optimizer.eps0", "required when the target is a CSV file").into()),
    };
    let iters = match (o.max_iters, bench) {
        (Some(k), _) => k,
        (None, Some(case)) => case.default_iters(config.scheme),
        (None, None) => {
            return Err(ConfigError::single("optimizer.max_iters", "required when the target is a CSV file").into())
        }
    };
    let mut oc = OptimizerConfig::new(step, iters)?;
    oc.clip_nonnegative = o.clip_nonnegative;
    oc.gradient = o.gradient_kind;
    oc.stop_below = o.stop_when_j_below;
    Ok(oc)
}

/// Forward run from the configured initial datum (the exact one by default).
pub fn cmd_forward(config: &RunConfig, out: &Path) -> CmdResult<(Trajectory, Bundle)> {
    let grid = config.grid();
    let time = config.time_grid();
    let f0 = guess_values(config, &grid, BuiltinGuess::Exact)?;
    transactional(|bundle| {
        let traj = run_forward(&grid, &time, &config.selection, &config.daughter, config.scheme, &f0)?;
        if !traj.diagnostics.is_stable() {
            log::warn!(
                "dt * max S = {:.3} exceeds 1; minimum density {:.3e}",
                traj.diagnostics.stability_number,
                traj.diagnostics.min_value
            );
        }
        let h = header(config);
        let last = &traj.last().values;
        bundle.write_table(
            &out.join("solution.csv"),
            &h,
            &["x_center", "dx", "f_initial", "f_final"],
            (0..grid.len()).map(|i| vec![grid.centers()[i], grid.widths()[i], f0[i], last[i]]),
        )?;
        let mut rows = Vec::with_capacity(traj.states.len());
        for s in &traj.states {
            let m = |p| moment(&s.values, &grid, p);
            rows.push(vec![s.time, m(0.0)?, m(1.0)?, m(2.0)?]);
        }
        bundle.write_table(&out.join("moments.csv"), &h, &["t", "M0", "M1", "M2"], rows)?;
        Ok(traj)
    })
}

fn write_inversion(
    bundle: &mut Bundle,
    dir: &Path,
    h: &Header,
    grid: &Grid,
    target: &[f64],
    exact: Option<&[f64]>,
    report: &RunReport,
) -> anyhow::Result<()> {
    bundle.write_table(
        &dir.join("history.csv"),
        h,
        &["iter", "J", "E_target", "E_init"],
        report.history.iter().map(|r| {
            vec![
                r.iteration as f64,
                r.cost,
                r.target_error,
                r.initial_error.unwrap_or(f64::NAN),
            ]
        }),
    )?;
    bundle.write_table(
        &dir.join("reconstruction.csv"),
        h,
        &["x_center", "f0_exact_if_known", "f0_reconstructed"],
        (0..grid.len()).map(|i| {
            vec![
                grid.centers()[i],
                exact.map_or(f64::NAN, |e| e[i]),
                report.reconstruction[i],
            ]
        }),
    )?;
    bundle.write_table(
        &dir.join("final_state.csv"),
        h,
        &["x_center", "f_target", "f_final"],
        (0..grid.len()).map(|i| vec![grid.centers()[i], target[i], report.final_state[i]]),
    )
}

/// Gradient-descent reconstruction of the initial datum.
pub fn cmd_invert(config: &RunConfig, out: &Path) -> CmdResult<(RunReport, Bundle)> {
    let problem = inverse_problem(config)?;
    let oc = optimizer_config(config)?;
    let grid = problem.grid().clone();
    let guess = guess_values(config, &grid, BuiltinGuess::Ramp)?;
    let exact = exact_initial(config, &grid);
    transactional(|bundle| {
        let report = gradient_descent(&oc, &problem, &guess, exact.as_deref())?;
        let last = report.last();
        log::info!(
            "{} iterations: J = {:.6e}, E(f*) = {:.6e}",
            report.iterations,
            last.cost,
            last.target_error
        );
        write_inversion(bundle, out, &header(config), &grid, problem.target(), exact.as_deref(), &report)?;
        Ok(report)
    })
}

/// Seeded Gaussian direction with unit `Δx`-norm.
pub fn random_direction(grid: &Grid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize_direction(&raw, grid).expect("a Gaussian sample is nonzero")
}

/// Taylor remainder table at the configured initial guess.
pub fn cmd_taylor(config: &RunConfig, out: &Path) -> CmdResult<(TaylorReport, Bundle)> {
    let problem = inverse_problem(config)?;
    let grid = problem.grid().clone();
    let f0 = guess_values(config, &grid, BuiltinGuess::Ramp)?;
    let direction = random_direction(&grid, config.optimizer.seed);
    transactional(|bundle| {
        let report = taylor_test(
            &problem,
            &f0,
            &direction,
            &config.taylor_etas,
            config.optimizer.gradient_kind,
        )?;
        bundle.write_table(
            &out.join("taylor.csv"),
            &header(config),
            &["eta", "remainder", "ratio"],
            report.rows.iter().map(|r| vec![r.eta, r.remainder, r.ratio]),
        )?;
        Ok(report)
    })
}

fn bench_header(run: &BenchmarkRun) -> Header {
    let digest = Sha256::digest(
        format!(
            "{:?}",
            (run.case, run.scheme, run.time, run.config, run.grid.edges())
        )
        .as_bytes(),
    );
    Header {
        fingerprint: hex::encode(digest),
        grid: format!(
            "R={} I={} T={} N={} substeps={} scheme={} case={}",
            run.grid.length(),
            run.grid.len(),
            run.time.final_time(),
            run.time.steps(),
            run.time.substeps(),
            run.scheme.name(),
            run.case.id.name()
        ),
    }
}

/// Summary of one or more benchmark runs.
pub fn bench_report(runs: &[BenchmarkRun]) -> String {
    let mut s = String::new();
    if let Some(first) = runs.first() {
        s.push_str(&format!("benchmark {} (s = {})\n", first.case.id.name(), first.case.shape));
    }
    s.push_str("scheme iterations J E_target E_init\n");
    for run in runs {
        let last = run.report.last();
        s.push_str(&format!(
            "{} {} {} {} {}\n",
            run.scheme.name(),
            run.report.iterations,
            fmt_f64(last.cost),
            fmt_f64(last.target_error),
            fmt_f64(run.initial_error())
        ));
    }
    s
}

/// Built-in benchmark with its default parameters. Several schemes run on
/// separate threads; the bundle goes to `out/<case>/<scheme>/`.
pub fn cmd_bench(case: BenchmarkCase, schemes: &[Scheme], out: &Path) -> CmdResult<(Vec<BenchmarkRun>, Bundle)> {
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = schemes
            .iter()
            .map(|&scheme| scope.spawn(move || run_benchmark(&case, scheme, &BenchmarkOverrides::default())))
            .collect();
        handles.into_iter().map(|h| h.join().expect("benchmark thread panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let case_dir = out.join(case.id.name());
    transactional(|bundle| {
        for run in &runs {
            let exact = Some(run.exact_initial.as_slice());
            let dir = case_dir.join(run.scheme.name());
            write_inversion(bundle, &dir, &bench_header(run), &run.grid, &run.target, exact, &run.report)?;
            log::info!(
                "{} {}: J = {:.6e}, E(f*) = {:.6e}, E(f0) = {:.6e}",
                case.id.name(),
                run.scheme.name(),
                run.report.last().cost,
                run.target_error(),
                run.initial_error()
            );
        }
        bundle.write_text(&case_dir.join("report.txt"), &bench_report(&runs))?;
        Ok(runs)
    })
}
