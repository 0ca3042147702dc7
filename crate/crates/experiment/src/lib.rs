//! Reproducible experiment runner for the `homfluct` studies.
//!
//! A study is described by an [`ExperimentConfig`]; [`run_study`] validates
//! it, computes (or reloads) per-realization records on a worker pool, reduces
//! them in realization order and writes `study.csv`, `summary.json` and
//! `run.log`.

pub mod cache;
pub mod config;
pub mod error;
pub mod output;
pub mod records;
pub mod studies;
pub mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ReferenceMode, StudyKind, TestFunctionConfig, OUTPUT_ENV};
pub use error::{ConfigError, ExperimentError, Result};

use cache::RealizationStore;
use output::{Artifacts, Table};
use records::Sampler;
use studies::{FunctionalSummary, GkSummary, MomentSummary, NormalitySummary, RveSummary};
use verify::VerifyReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudySummary {
    Verify(VerifyReport),
    Rve(RveSummary),
    Gk(GkSummary),
    Clt(FunctionalSummary),
    Pathwise(FunctionalSummary),
    Normality(NormalitySummary),
    Moments(MomentSummary),
}

#[derive(Clone, Debug)]
pub struct StudyOutcome {
    pub summary: StudySummary,
    pub dir: PathBuf,
}

impl StudyOutcome {
    /// `false` only for a verify run with a failing check.
    pub fn passed(&self) -> bool {
        match &self.summary {
            StudySummary::Verify(v) => v.passed,
            _ => true,
        }
    }
}

/// Validates `cfg`, runs the study and writes its artifacts under
/// `cfg.output_dir`.
pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers())
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let store = RealizationStore::new(cfg.cache.then(|| cfg.output_dir.join("cache")));
    let sampler = Sampler { store: &store, law: &cfg.law, solver: &cfg.solver, master_seed: cfg.master_seed };
    let mut table = Table::default();
    let mut log = Vec::new();
    let summary = pool.install(|| -> Result<StudySummary> {
        Ok(match cfg.study {
            StudyKind::Verify => StudySummary::Verify(verify::run_verify(cfg, &mut table)?),
            StudyKind::Rve => StudySummary::Rve(studies::run_rve(cfg, &sampler, &mut table, &mut log)?),
            StudyKind::Gk => StudySummary::Gk(studies::run_gk(cfg, &sampler, &mut table, &mut log)?),
            StudyKind::Clt => StudySummary::Clt(studies::run_functionals(cfg, &sampler, &mut table, &mut log)?),
            StudyKind::Pathwise => {
                StudySummary::Pathwise(studies::run_functionals(cfg, &sampler, &mut table, &mut log)?)
            }
            StudyKind::Normality => {
                StudySummary::Normality(studies::run_normality(cfg, &sampler, &mut table, &mut log)?)
            }
            StudyKind::Moments => StudySummary::Moments(studies::run_moments(cfg, &sampler, &mut table, &mut log)?),
        })
    })?;
    let artifacts = Artifacts::write(&cfg.output_dir, cfg, &table, &summary, &log)?;
    Ok(StudyOutcome { summary, dir: artifacts.dir })
}
