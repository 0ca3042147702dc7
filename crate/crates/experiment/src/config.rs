//! Experiment configuration: a TOML file, `key=value` overrides and
//! validation with field-level messages.

use std::path::{Path, PathBuf};

use homfluct::random_fields::ConductanceLaw;
use homfluct::solver::SolveConfig;
use homfluct::stats::test_function::{default_tensor_amplitude, default_vector_amplitude};
use homfluct::stats::{ProfileKind, TestFunction};
use homfluct::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ExperimentError};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_ENV: &str = "HOMFLUCT_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Verify,
    Rve,
    Gk,
    Clt,
    Pathwise,
    Normality,
    Moments,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Verify => "verify",
            StudyKind::Rve => "rve",
            StudyKind::Gk => "gk",
            StudyKind::Clt => "clt",
            StudyKind::Pathwise => "pathwise",
            StudyKind::Normality => "normality",
            StudyKind::Moments => "moments",
        }
    }
}

/// Which matrix plays the role of `ā` inside the commutator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceMode {
    /// Symmetrized mean of a pilot RVE run on side `factor × max side`.
    Pilot {
        #[serde(default = "default_pilot_factor")]
        factor: usize,
        #[serde(default = "default_pilot_realizations")]
        realizations: usize,
    },
    /// `ā_L` of each realization.
    PerRealization,
    Fixed { matrix: Vec<Vec<f64>> },
}

fn default_pilot_factor() -> usize {
    2
}

fn default_pilot_realizations() -> usize {
    16
}

impl Default for ReferenceMode {
    fn default() -> Self {
        ReferenceMode::Pilot { factor: default_pilot_factor(), realizations: default_pilot_realizations() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub kind: ProfileKind,
    /// Defaults to the box midpoint.
    pub center: Option<Vec<f64>>,
    pub width: f64,
    /// Amplitude of `F`; defaults to `e_1 ⊗ e_1`.
    pub tensor: Option<Vec<Vec<f64>>>,
    /// Amplitudes of `f` and `g`; default `e_1`.
    pub f: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
}

impl Default for TestFunctionConfig {
    fn default() -> Self {
        Self { kind: ProfileKind::GaussianBump, center: None, width: 0.125, tensor: None, f: None, g: None }
    }
}

/// Resolved test functions for a given dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctions {
    pub profile: TestFunction,
    pub tensor: Matrix<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl TestFunctionConfig {
    pub fn resolve(&self, dim: usize) -> Result<TestFunctions, ConfigError> {
        let center = self.center.clone().unwrap_or_else(|| vec![0.5; dim]);
        if center.len() != dim {
            return Err(ConfigError::new("test_function.center", format!("needs {dim} coordinates")));
        }
        let profile = TestFunction::new(self.kind, center, self.width)
            .map_err(|e| ConfigError::new("test_function", e.to_string()))?;
        profile.check_support().map_err(|e| ConfigError::new("test_function.width", e.to_string()))?;
        let tensor = match &self.tensor {
            None => default_tensor_amplitude(dim),
            Some(rows) => matrix_from_rows(rows, dim).map_err(|m| ConfigError::new("test_function.tensor", m))?,
        };
        let vector = |v: &Option<Vec<f64>>, field: &str| match v {
            None => Ok(default_vector_amplitude(dim)),
            Some(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
            Some(_) => Err(ConfigError::new(field, format!("needs {dim} finite entries"))),
        };
        Ok(TestFunctions {
            profile,
            tensor,
            f: vector(&self.f, "test_function.f")?,
            g: vector(&self.g, "test_function.g")?,
        })
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Matrix<f64>, String> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(format!("needs a {dim}x{dim} matrix"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err("entries must be finite".into());
    }
    Matrix::from_row_major(dim, rows.concat()).map_err(|e| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub dim: usize,
    /// Torus sides `L`. For `gk` these are the window sizes; the torus side
    /// is `2L`.
    pub sides: Vec<usize>,
    /// Alternative to `sides`, `ε = 1/L`; takes precedence when non-empty.
    pub epsilons: Vec<f64>,
    pub realizations: usize,
    pub law: ConductanceLaw,
    pub master_seed: u64,
    pub solver: SolveConfig,
    pub test_function: TestFunctionConfig,
    pub reference: ReferenceMode,
    pub output_dir: PathBuf,
    /// Defaults to the available parallelism.
    pub workers: Option<usize>,
    pub cache: bool,
    pub bootstrap_resamples: usize,
    /// Number of `(realization, edge)` pairs for the vertical-derivative check.
    pub verify_pairs: usize,
    /// Rerun the coarsest `ε` on a doubled box and flag moves larger than
    /// one error bar.
    pub doubling_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            study: StudyKind::Verify,
            dim: 2,
            sides: vec![16],
            epsilons: Vec::new(),
            realizations: 100,
            law: ConductanceLaw::default(),
            master_seed: 1,
            solver: SolveConfig::default(),
            test_function: TestFunctionConfig::default(),
            reference: ReferenceMode::default(),
            output_dir: PathBuf::from("homfluct-out"),
            workers: None,
            cache: true,
            bootstrap_resamples: 1000,
            verify_pairs: 20,
            doubling_check: true,
        }
    }
}

impl ExperimentConfig {
    pub fn for_study(study: StudyKind) -> Self {
        Self { study, ..Self::default() }
    }

    /// Parses TOML text, applies `key=value` overrides (dotted keys, values in
    /// TOML syntax, bare words taken as strings) and validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ExperimentError> {
        let file: toml::Table = toml::from_str(text).map_err(|e| ConfigError::new("<file>", e.to_string()))?;
        // Start from the defaults so a partial table such as `[law] p = 0.3`
        // keeps the other default fields.
        let mut table = toml::Table::try_from(Self::default()).expect("defaults serialize");
        merge(&mut table, file);
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("<config>", e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ExperimentError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The lattice sides studied, derived from `epsilons` when given.
    pub fn resolved_sides(&self) -> Result<Vec<usize>, ConfigError> {
        if self.epsilons.is_empty() {
            return Ok(self.sides.clone());
        }
        self.epsilons
            .iter()
            .map(|&e| {
                let n = (1.0 / e).round();
                if !(e > 0.0 && e < 1.0) || ((1.0 / e) - n).abs() > 1e-9 * n {
                    Err(ConfigError::new("epsilons", format!("{e} is not 1/n for an integer n ≥ 2")))
                } else {
                    Ok(n as usize)
                }
            })
            .collect()
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    /// The configuration as echoed into output artifacts. Execution-only
    /// settings (worker count, output location, cache switch) are left out so
    /// that they cannot change any output byte.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("workers");
            obj.remove("output_dir");
            obj.remove("cache");
        }
        v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.dim;
        if !(1..=4).contains(&d) {
            return Err(ConfigError::new("dim", format!("must be between 1 and 4, got {d}")));
        }
        let sides = self.resolved_sides()?;
        if sides.is_empty() {
            return Err(ConfigError::new("sides", "at least one side is required"));
        }
        let min_side = if self.study == StudyKind::Gk { 1 } else { 2 };
        if let Some(&s) = sides.iter().find(|&&s| s < min_side) {
            return Err(ConfigError::new("sides", format!("side {s} is below {min_side}")));
        }
        let mut sorted = sides.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sides.len() {
            return Err(ConfigError::new("sides", "sides must be distinct"));
        }
        let largest = sides.iter().max().copied().unwrap_or(0) * if self.study == StudyKind::Gk { 2 } else { 1 };
        if (largest as f64).powi(d as i32) > 4.0e8 {
            return Err(ConfigError::new("sides", format!("a side-{largest} torus in d={d} is too large")));
        }
        let min_n = match self.study {
            StudyKind::Verify => 1,
            StudyKind::Rve => 3,
            StudyKind::Normality => homfluct::stats::normality::MIN_SAMPLES,
            _ => 2,
        };
        if self.realizations < min_n {
            return Err(ConfigError::new(
                "realizations",
                format!("{} needs at least {min_n}, got {}", self.study.name(), self.realizations),
            ));
        }
        self.law.validate().map_err(|e| ConfigError::new("law", e.to_string()))?;
        self.solver.validate().map_err(|e| ConfigError::new("solver", e.to_string()))?;
        self.test_function.resolve(d)?;
        match &self.reference {
            ReferenceMode::Pilot { factor, realizations } => {
                if *factor < 1 {
                    return Err(ConfigError::new("reference.factor", "must be at least 1"));
                }
                if *realizations < 3 {
                    return Err(ConfigError::new("reference.realizations", "must be at least 3"));
                }
            }
            ReferenceMode::PerRealization => {
                if self.study == StudyKind::Gk {
                    return Err(ConfigError::new(
                        "reference.mode",
                        "the Green-Kubo window needs a reference fixed across realizations",
                    ));
                }
            }
            ReferenceMode::Fixed { matrix } => {
                let m = matrix_from_rows(matrix, d).map_err(|m| ConfigError::new("reference.matrix", m))?;
                if m.asymmetry() > 1e-12 || !m.is_positive_definite() {
                    return Err(ConfigError::new("reference.matrix", "must be symmetric positive definite"));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        if self.bootstrap_resamples < 2 {
            return Err(ConfigError::new("bootstrap_resamples", "must be at least 2"));
        }
        Ok(())
    }

    pub fn fixed_reference(&self) -> Option<Matrix<f64>> {
        match &self.reference {
            ReferenceMode::Fixed { matrix } => matrix_from_rows(matrix, self.dim).ok(),
            _ => None,
        }
    }
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), ConfigError> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| ConfigError::new("--set", format!("expected key=value, got {ov:?}")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new("--set", format!("malformed key {key:?}")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(key, format!("{part} is not a table")))?;
    }
    let last = parts[parts.len() - 1];
    if TAGS.contains(&last) && node.get(last) != Some(&value) {
        // Switching variant: the old variant's fields no longer apply.
        node.clear();
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Keys that select an enum variant inside a table.
const TAGS: [&str; 2] = ["kind", "mode"];

/// Recursive overlay of `over` onto `base`. A table that names a different
/// variant than the base replaces it outright.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let switches = TAGS.iter().any(|t| o.get(*t).is_some_and(|v| b.get(*t) != Some(v)));
                if switches {
                    *b = o;
                } else {
                    merge(b, o);
                }
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
