//! TOML run configuration.
//!
//! Parsing happens in two stages: `serde` maps the file onto [`RawConfig`],
//! whose fields are all optional, and [`RawConfig::validate`] checks every
//! field, collecting all problems (each tagged with its key path) before
//! returning a [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fraginv_core::{
    BenchmarkCase, BenchmarkId, DaughterDistribution, GradientKind, Grid, Projection, Scheme,
    SelectionFunction, TimeGrid,
};
use serde::Deserialize;
use sha2::{Digest, Sha256};

pub const DEFAULT_ETAS: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const DEFAULT_SEED: u64 = 42;

/// One validation problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// Dotted key path such as `time.steps`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration:\n{}", format_issues(.0))]
    Invalid(Vec<Issue>),
}

fn format_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n")
}

impl ConfigError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }

    pub(crate) fn single(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid(vec![Issue {
            key: key.into(),
            message: message.into(),
        }])
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub domain: Option<RawDomain>,
    pub time: Option<RawTime>,
    pub kernel: Option<RawKernel>,
    pub scheme: Option<String>,
    pub optimizer: Option<RawOptimizer>,
    pub target: Option<RawTarget>,
    pub initial_guess: Option<RawGuess>,
    pub taylor: Option<RawTaylor>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDomain {
    #[serde(alias = "R")]
    pub length: Option<f64>,
    #[serde(alias = "I")]
    pub cells: Option<i64>,
    pub ratio: Option<f64>,
    pub first_edge: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTime {
    #[serde(rename = "final", alias = "T")]
    pub final_time: Option<f64>,
    #[serde(alias = "N")]
    pub steps: Option<i64>,
    pub substeps: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKernel {
    pub selection: Option<RawSelection>,
    pub daughter: Option<RawDaughter>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSelection {
    pub kind: Option<String>,
    #[serde(alias = "S0")]
    pub coefficient: Option<f64>,
    #[serde(alias = "alpha")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDaughter {
    pub kind: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptimizer {
    pub eps0: Option<f64>,
    pub max_iters: Option<i64>,
    pub clip_nonnegative: Option<bool>,
    pub gradient_kind: Option<String>,
    #[serde(rename = "stop_when_J_below")]
    pub stop_when_j_below: Option<f64>,
    pub seed: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTarget {
    pub benchmark: Option<String>,
    pub s: Option<f64>,
    pub projection: Option<String>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGuess {
    pub builtin: Option<String>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTaylor {
    pub etas: Option<Vec<f64>>,
}

/// Where the final-time target comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    Benchmark { case: BenchmarkCase, projection: Projection },
    Csv(PathBuf),
}

/// Built-in initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinGuess {
    /// `x e^{−100 x^100}`.
    Ramp,
    /// Exact initial datum of the benchmark target.
    Exact,
    Zero,
}

impl FromStr for BuiltinGuess {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ramp" => Ok(Self::Ramp),
            "exact" => Ok(Self::Exact),
            "zero" => Ok(Self::Zero),
            _ => Err(format!("unknown builtin `{s}` (expected ramp, exact or zero)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuessSource {
    Builtin(BuiltinGuess),
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig {
    pub length: f64,
    pub cells: usize,
    pub ratio: f64,
    pub first_edge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub final_time: f64,
    pub steps: usize,
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Falls back to the benchmark default when absent.
    pub eps0: Option<f64>,
    pub max_iters: Option<usize>,
    pub clip_nonnegative: bool,
    pub gradient_kind: GradientKind,
    pub stop_when_j_below: Option<f64>,
    pub seed: u64,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub time: TimeConfig,
    pub selection: SelectionFunction,
    pub daughter: DaughterDistribution,
    pub scheme: Scheme,
    pub optimizer: OptimizerSettings,
    pub target: TargetSource,
    /// `None` means the command-specific default.
    pub initial_guess: Option<GuessSource>,
    pub taylor_etas: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Reads and validates a configuration file. Relative CSV paths are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    raw.validate(base)
}

#[derive(Default)]
struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Issue {
            key: key.into(),
            message: message.into(),
        });
    }

    fn required<T: Copy>(&mut self, key: &str, value: Option<T>) -> Option<T> {
        if value.is_none() {
            self.push(key, "missing required key");
        }
        value
    }

    fn positive(&mut self, key: &str, value: Option<f64>) -> Option<f64> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Some(v),
            Some(v) => {
                self.push(key, format!("must be finite and positive (got {v})"));
                None
            }
            None => None,
        }
    }

    fn count(&mut self, key: &str, value: Option<i64>, min: i64) -> Option<usize> {
        match value {
            Some(v) if v >= min => Some(v as usize),
            Some(v) => {
                self.push(key, format!("must be an integer >= {min} (got {v})"));
                None
            }
            None => None,
        }
    }

    fn parse<T: FromStr>(&mut self, key: &str, value: Option<&str>) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        match value.map(str::parse::<T>) {
            Some(Ok(v)) => Some(v),
            Some(Err(e)) => {
                self.push(key, e.to_string());
                None
            }
            None => None,
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RawConfig {
    pub fn validate(self, base: &Path) -> Result<RunConfig, ConfigError> {
        let mut is = Issues::default();

        let d = self.domain.unwrap_or_default();
        let length = is.required("domain.length", d.length);
        let length = is.positive("domain.length", length);
        let cells = is.required("domain.cells", d.cells);
        let cells = is.count("domain.cells", cells, 1);
        let first_edge = is.positive("domain.first_edge", d.first_edge);
        let ratio = match d.ratio {
            Some(r) if !(r.is_finite() && r > 1.0) => {
                is.push("domain.ratio", format!("ratio must exceed 1 (got {r})"));
                None
            }
            Some(r) => Some(r),
            None if d.first_edge.is_none() => {
                is.push("domain.ratio", "missing required key (or give domain.first_edge)");
                None
            }
            None => None,
        };
        let mut grid = None;
        if let (Some(length), Some(cells)) = (length, cells) {
            let built = match (first_edge, ratio) {
                (Some(edge), _) => Some(Grid::geometric_from_first_edge(length, cells, edge)),
                (None, Some(r)) => Some(Grid::geometric(length, cells, r)),
                (None, None) => None,
            };
            match built {
                Some(Ok(g)) => grid = Some(g),
                Some(Err(e)) => is.push("domain", e.to_string()),
                None => {}
            }
        }

        let t = self.time.unwrap_or_default();
        let final_time = is.required("time.final", t.final_time);
        let final_time = is.positive("time.final", final_time);
        let steps = is.required("time.steps", t.steps);
        let steps = is.count("time.steps", steps, 0);
        let substeps = is.count("time.substeps", t.substeps, 1).or(Some(1));

        let target_raw = self.target.unwrap_or_default();
        let benchmark: Option<BenchmarkId> = is.parse("target.benchmark", target_raw.benchmark.as_deref());
        let projection: Option<Projection> = is.parse("target.projection", target_raw.projection.as_deref());
        let shape = is.positive("target.s", target_raw.s);
        let target = match (&target_raw.benchmark, &target_raw.csv) {
            (Some(_), Some(_)) => {
                is.push("target", "give either target.benchmark or target.csv, not both");
                None
            }
            (None, None) => {
                is.push("target", "missing target.benchmark or target.csv");
                None
            }
            (None, Some(p)) => {
                if target_raw.s.is_some() {
                    is.push("target.s", "only valid with target.benchmark");
                }
                Some(TargetSource::Csv(resolve(base, p)))
            }
            (Some(_), None) => match benchmark {
                Some(BenchmarkId::Test1) => match target_raw.s {
                    None => Some(BenchmarkCase::test1()),
                    Some(_) => shape.and_then(|s| BenchmarkCase::test1_with_shape(s).ok()),
                },
                Some(BenchmarkId::Test2) => {
                    if target_raw.s.is_some_and(|s| s != 1.0) {
                        is.push("target.s", "test2 has no shape parameter");
                        None
                    } else {
                        Some(BenchmarkCase::test2())
                    }
                }
                None => None,
            }
            .map(|case| TargetSource::Benchmark {
                case,
                projection: projection.unwrap_or_default(),
            }),
        };

        let k = self.kernel.unwrap_or_default();
        let selection = match k.selection {
            Some(sel) => parse_selection(&mut is, sel),
            None => match &target {
                Some(TargetSource::Benchmark { case, .. }) => Some(case.selection()),
                Some(TargetSource::Csv(_)) => {
                    is.push("kernel.selection", "required when the target is a CSV file");
                    None
                }
                None => None,
            },
        };
        let daughter = match k.daughter.and_then(|d| d.kind).as_deref() {
            None | Some("power_law_binary") | Some("binary") => Some(DaughterDistribution::PowerLawBinary),
            Some(other) => {
                is.push(
                    "kernel.daughter.kind",
                    format!("unknown daughter distribution `{other}` (expected power_law_binary)"),
                );
                None
            }
        };

        let scheme: Option<Scheme> = is.parse("scheme", self.scheme.as_deref().or(Some("fvs")));

        let o = self.optimizer.unwrap_or_default();
        let eps0 = is.positive("optimizer.eps0", o.eps0);
        let max_iters = is.count("optimizer.max_iters", o.max_iters, 0);
        let gradient_kind: Option<GradientKind> =
            is.parse("optimizer.gradient_kind", o.gradient_kind.as_deref().or(Some("continuous")));
        let stop = match o.stop_when_j_below {
            Some(v) if !(v.is_finite() && v >= 0.0) => {
                is.push("optimizer.stop_when_J_below", format!("must be finite and nonnegative (got {v})"));
                None
            }
            v => v,
        };
        let seed = match o.seed {
            Some(s) if s < 0 => {
                is.push("optimizer.seed", "must be nonnegative");
                DEFAULT_SEED
            }
            Some(s) => s as u64,
            None => DEFAULT_SEED,
        };

        let initial_guess = match self.initial_guess {
            None => None,
            Some(RawGuess { builtin: Some(_), csv: Some(_) }) => {
                is.push("initial_guess", "give either initial_guess.builtin or initial_guess.csv, not both");
                None
            }
            Some(RawGuess { builtin: None, csv: None }) => None,
            Some(RawGuess { csv: Some(p), .. }) => Some(GuessSource::Csv(resolve(base, &p))),
            Some(RawGuess { builtin: Some(b), .. }) => {
                let b: Option<BuiltinGuess> = is.parse("initial_guess.builtin", Some(&b));
                if b == Some(BuiltinGuess::Exact) && !matches!(target, Some(TargetSource::Benchmark { .. })) {
                    is.push("initial_guess.builtin", "`exact` needs a benchmark target");
                }
                b.map(GuessSource::Builtin)
            }
        };

        let etas = self.taylor.and_then(|t| t.etas).unwrap_or_else(|| DEFAULT_ETAS.to_vec());
        if etas.is_empty() {
            is.push("taylor.etas", "need at least one perturbation size");
        }
        for (i, e) in etas.iter().enumerate() {
            if !(e.is_finite() && *e > 0.0) {
                is.push(&format!("taylor.etas[{i}]"), format!("must be finite and positive (got {e})"));
            }
        }

        if !is.0.is_empty() {
            return Err(ConfigError::Invalid(is.0));
        }
        let grid = grid.expect("validated");
        Ok(RunConfig {
            domain: DomainConfig {
                length: grid.length(),
                cells: grid.len(),
                ratio: ratio.unwrap_or_else(|| ratio_of(&grid)),
                first_edge,
            },
            time: TimeConfig {
                final_time: final_time.expect("validated"),
                steps: steps.expect("validated"),
                substeps: substeps.expect("validated"),
            },
            selection: selection.expect("validated"),
            daughter: daughter.expect("validated"),
            scheme: scheme.expect("validated"),
            optimizer: OptimizerSettings {
                eps0,
                max_iters,
                clip_nonnegative: o.clip_nonnegative.unwrap_or(false),
                gradient_kind: gradient_kind.expect("validated"),
                stop_when_j_below: stop,
                seed,
            },
            target: target.expect("validated"),
            initial_guess,
            taylor_etas: etas,
            output_dir: self.output_dir,
        })
    }
}

/// Ratio implied by a grid built from its first edge.
fn ratio_of(grid: &Grid) -> f64 {
    let w = grid.widths();
    if w.len() >= 3 {
        w[2] / w[1]
    } else {
        f64::NAN
    }
}

fn parse_selection(is: &mut Issues, sel: RawSelection) -> Option<SelectionFunction> {
    match sel.kind.as_deref().unwrap_or("power") {
        "linear" => Some(SelectionFunction::linear()),
        "quadratic" => Some(SelectionFunction::quadratic()),
        "power" => {
            let c = is.required("kernel.selection.coefficient", sel.coefficient);
            let a = is.required("kernel.selection.exponent", sel.exponent);
            match SelectionFunction::power(c?, a?) {
                Ok(s) => Some(s),
                Err(e) => {
                    is.push("kernel.selection", e.to_string());
                    None
                }
            }
        }
        other => {
            is.push(
                "kernel.selection.kind",
                format!("unknown selection `{other}` (expected power, linear or quadratic)"),
            );
            None
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        let d = &self.domain;
        match d.first_edge {
            Some(edge) => Grid::geometric_from_first_edge(d.length, d.cells, edge),
            None => Grid::geometric(d.length, d.cells, d.ratio),
        }
        .expect("grid validated at parse time")
    }

    pub fn time_grid(&self) -> TimeGrid {
        let t = &self.time;
        if t.steps == 0 {
            TimeGrid::frozen(t.final_time)
        } else {
            TimeGrid::new(t.final_time, t.steps).and_then(|g| g.with_substeps(t.substeps))
        }
        .expect("time grid validated at parse time")
    }

    pub fn benchmark(&self) -> Option<(BenchmarkCase, Projection)> {
        match &self.target {
            TargetSource::Benchmark { case, projection } => Some((*case, *projection)),
            TargetSource::Csv(_) => None,
        }
    }

    /// SHA-256 over every setting that influences numerical output.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        hex::encode(Sha256::digest(format!("{canonical:?}").as_bytes()))
    }

    /// Grid description for CSV headers.
    pub fn grid_summary(&self) -> String {
        let d = &self.domain;
        let t = &self.time;
        let mut s = format!(
            "R={} I={} ratio={} T={} N={} substeps={} scheme={}",
            d.length,
            d.cells,
            d.ratio,
            t.final_time,
            t.steps,
            t.substeps,
            self.scheme.name()
        );
        if let Some(edge) = d.first_edge {
            s.push_str(&format!(" first_edge={edge}"));
        }
        s
    }
}
