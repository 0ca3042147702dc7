//! Study artifacts: `study.csv`, `summary.json` and `run.log`.

use std::io::Write;
use std::path::{Path, PathBuf};

use homfluct::solver::{Backend, SolveReport};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

/// `git describe` of the build.
pub const GIT_DESCRIBE: &str = env!("HOMFLUCT_GIT_DESCRIBE");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn set_header(&mut self, header: Vec<String>) {
        self.header = header;
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// CSV text preceded by a `#` line echoing the configuration.
    pub fn to_csv(&self, echo: &serde_json::Value) -> Result<Vec<u8>> {
        let mut out = format!("# config: {echo}\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new().flexible(false).from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

/// One `run.log` line: a single linear solve or a failed realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogEntry {
    pub study: String,
    pub parameter: usize,
    pub realization: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<usize>,
    pub iterations: usize,
    pub relative_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    pub converged: bool,
}

impl LogEntry {
    pub fn solve(study: &str, parameter: usize, realization: u64, solve: usize, report: &SolveReport) -> Self {
        Self {
            study: study.into(),
            parameter,
            realization,
            solve: Some(solve),
            iterations: report.iterations,
            relative_residual: report.relative_residual,
            backend: Some(report.backend),
            converged: true,
        }
    }

    pub fn failed(study: &str, parameter: usize, realization: u64, iterations: usize, residual: f64) -> Self {
        Self {
            study: study.into(),
            parameter,
            realization,
            solve: None,
            iterations,
            relative_residual: residual,
            backend: None,
            converged: false,
        }
    }
}

/// Directory name embedding the study, dimension, sides or `ε`, `N`, law and
/// build.
pub fn artifact_name(cfg: &ExperimentConfig) -> String {
    let sides = cfg.resolved_sides().unwrap_or_default();
    let joined = sides.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-");
    let param = if cfg.epsilons.is_empty() { format!("L{joined}") } else { format!("eps1over{joined}") };
    let sanitize = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect::<String>();
    format!(
        "{}_d{}_{}_N{}_{}_{}",
        cfg.study.name(),
        cfg.dim,
        param,
        cfg.realizations,
        sanitize(&cfg.law.tag()),
        sanitize(GIT_DESCRIBE)
    )
}

pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn write(
        root: &Path,
        cfg: &ExperimentConfig,
        table: &Table,
        summary: &impl Serialize,
        log: &[LogEntry],
    ) -> Result<Self> {
        let dir = root.join(artifact_name(cfg));
        std::fs::create_dir_all(&dir)?;
        let echo = cfg.echo();
        std::fs::write(dir.join("study.csv"), table.to_csv(&echo)?)?;

        #[derive(Serialize)]
        struct Summary<'a, S> {
            study: &'static str,
            build: &'static str,
            master_seed: u64,
            config: &'a serde_json::Value,
            results: &'a S,
        }
        let body = serde_json::to_string_pretty(&Summary {
            study: cfg.study.name(),
            build: GIT_DESCRIBE,
            master_seed: cfg.master_seed,
            config: &echo,
            results: summary,
        })?;
        std::fs::write(dir.join("summary.json"), body + "\n")?;

        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("run.log"))?);
        writeln!(f, "{}", serde_json::json!({ "config": echo }))?;
        for e in log {
            writeln!(f, "{}", serde_json::to_string(e)?)?;
        }
        f.flush()?;
        Ok(Self { dir })
    }
}
