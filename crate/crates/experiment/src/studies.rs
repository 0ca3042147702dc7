//! The sweep studies: statistics over realizations for each parameter value.

use homfluct::lattice::TorusGrid;
use homfluct::random_fields::StreamPurpose;
use homfluct::stats::{
    combine_records, delta_bootstrap, normality_metrics, scaling_fit, BootstrapInterval, Correction,
    FluctuationTensor, GreenKuboRecord, RveEstimate, ScalingFit, ScalingPoint,
};
use homfluct::Matrix;
use serde::{Deserialize, Serialize};

use crate::cache::Outcome;
use crate::config::{ExperimentConfig, ReferenceMode};
use crate::error::Result;
use crate::output::{LogEntry, Table};
use crate::records::{AbarRecord, FunctionalRecord, HasReports, MomentRecord, Sampler};

/// Mean and variance of a scalar sample, with the standard error of each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

impl SampleMoments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        if n < 2 {
            return Self { n, mean: xs.first().copied().unwrap_or(f64::NAN), mean_se: f64::NAN, variance: f64::NAN, variance_se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / nf;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let variance = m2 * nf / (nf - 1.0);
        let variance_se = if n > 3 {
            ((m4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0).sqrt()
        } else {
            f64::NAN
        };
        Self { n, mean, mean_se: (variance / nf).sqrt(), variance, variance_se }
    }

    /// `sqrt(variance)` and its delta-method error.
    pub fn l2_norm(&self) -> (f64, f64) {
        let s = self.variance.sqrt();
        let se = if s > 0.0 { self.variance_se / (2.0 * s) } else { 0.0 };
        (s, se)
    }
}

fn split<R: Clone>(outcomes: &[Outcome<R>]) -> (Vec<R>, Vec<u64>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (r, o) in outcomes.iter().enumerate() {
        match o {
            Outcome::Ok(v) => ok.push(v.clone()),
            Outcome::Failed { .. } => failed.push(r as u64),
        }
    }
    (ok, failed)
}

fn log_outcomes<R: HasReports>(log: &mut Vec<LogEntry>, kind: &str, parameter: usize, outcomes: &[Outcome<R>]) {
    for (r, o) in outcomes.iter().enumerate() {
        match o {
            Outcome::Ok(rec) => {
                for (k, report) in rec.reports().iter().enumerate() {
                    log.push(LogEntry::solve(kind, parameter, r as u64, k, report));
                }
            }
            Outcome::Failed { iterations, residual } => {
                log.push(LogEntry::failed(kind, parameter, r as u64, *iterations, *residual));
            }
        }
    }
}

fn matrix_entries(m: &Matrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

fn matrix_headers(prefix: &str, d: usize) -> Vec<String> {
    (0..d).flat_map(|i| (0..d).map(move |j| format!("{prefix}_{}{}", i + 1, j + 1))).collect()
}

/// Reference matrix used inside the commutator for a study, with the pilot
/// estimate when one was run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub mode: String,
    pub matrix: Option<Matrix<f64>>,
    pub pilot: Option<PilotInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotInfo {
    pub side: usize,
    pub n: usize,
    pub abar: Matrix<f64>,
    pub abar_se: Matrix<f64>,
}

pub fn resolve_reference(
    cfg: &ExperimentConfig,
    sampler: &Sampler<'_>,
    max_side: usize,
    log: &mut Vec<LogEntry>,
) -> Result<ReferenceInfo> {
    Ok(match &cfg.reference {
        ReferenceMode::Fixed { .. } => ReferenceInfo {
            mode: "fixed".into(),
            matrix: cfg.fixed_reference(),
            pilot: None,
        },
        ReferenceMode::PerRealization => ReferenceInfo { mode: "per_realization".into(), matrix: None, pilot: None },
        ReferenceMode::Pilot { factor, realizations } => {
            let side = factor * max_side;
            let grid = TorusGrid::new(cfg.dim, side)?;
            let outcomes = sampler.abar(grid, *realizations as u64, StreamPurpose::Pilot)?;
            log_outcomes(log, "pilot", side, &outcomes);
            let (ok, _) = split(&outcomes);
            let samples: Vec<_> = ok.into_iter().map(|r| r.abar).collect();
            let est = RveEstimate::from_samples(side, &samples)?;
            ReferenceInfo {
                mode: "pilot".into(),
                matrix: Some(est.abar.symmetrized()),
                pilot: Some(PilotInfo { side, n: est.n, abar: est.abar, abar_se: est.abar_se }),
            }
        }
    })
}

// ---------------------------------------------------------------- rve

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RveLevel {
    pub side: usize,
    pub n: usize,
    pub failed: Vec<u64>,
    pub abar: Matrix<f64>,
    pub abar_se: Matrix<f64>,
    pub q: FluctuationTensor,
    pub q_se: FluctuationTensor,
    /// Frobenius norm of `Var(ā_L) = Q_{L,N} / L^d`.
    pub var_norm: f64,
    pub var_norm_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystematicStep {
    pub side: usize,
    pub next_side: usize,
    /// `|Q_{L,N} - Q_{2L,N}|` on the `1111` component.
    pub diff: f64,
    pub diff_se: f64,
    /// `diff / log^{d/2} L`.
    pub scaled_diff: f64,
    /// Whether twice the statistical error exceeds the difference.
    pub swamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RveSummary {
    pub levels: Vec<RveLevel>,
    /// Log-log fit of `‖Var ā_L‖` against `L`.
    pub variance_fit: Option<ScalingFit>,
    pub systematic: Vec<SystematicStep>,
    /// Ratios of successive `scaled_diff`.
    pub systematic_ratios: Vec<f64>,
}

pub fn rve_level(side: usize, records: &[AbarRecord], failed: Vec<u64>) -> Result<RveLevel> {
    let samples: Vec<_> = records.iter().map(|r| r.abar.clone()).collect();
    let est = RveEstimate::from_samples(side, &samples)?;
    let dim = est.dim;
    let vol = (side as f64).powi(dim as i32);
    Ok(RveLevel {
        side,
        n: est.n,
        failed,
        var_norm: est.q.frobenius_norm() / vol,
        var_norm_se: est.q_norm_se / vol,
        abar: est.abar,
        abar_se: est.abar_se,
        q: est.q,
        q_se: est.q_se,
    })
}

pub fn run_rve(cfg: &ExperimentConfig, sampler: &Sampler<'_>, table: &mut Table, log: &mut Vec<LogEntry>) -> Result<RveSummary> {
    let d = cfg.dim;
    let sides = cfg.resolved_sides()?;
    table.set_header(["parameter", "realization", "status"].into_iter().map(String::from).chain(matrix_headers("abar", d)).collect());
    let mut levels = Vec::new();
    for &side in &sides {
        let grid = TorusGrid::new(d, side)?;
        let outcomes = sampler.abar(grid, cfg.realizations as u64, StreamPurpose::Field)?;
        log_outcomes(log, "rve", side, &outcomes);
        abar_rows(table, side, &outcomes);
        let (ok, failed) = split(&outcomes);
        levels.push(rve_level(side, &ok, failed)?);
    }
    Ok(rve_summary(d, levels))
}

fn abar_rows(table: &mut Table, side: usize, outcomes: &[Outcome<AbarRecord>]) {
    let d = match outcomes.iter().find_map(|o| o.ok()) {
        Some(r) => r.abar.dim(),
        None => return,
    };
    for (r, o) in outcomes.iter().enumerate() {
        let mut row = vec![side.to_string(), r.to_string()];
        match o {
            Outcome::Ok(rec) => {
                row.push("ok".into());
                row.extend(matrix_entries(&rec.abar).iter().map(|v| v.to_string()));
            }
            Outcome::Failed { .. } => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), d * d));
            }
        }
        table.push(row);
    }
}

pub fn rve_summary(dim: usize, levels: Vec<RveLevel>) -> RveSummary {
    let points: Vec<_> = levels
        .iter()
        .map(|l| ScalingPoint { parameter: l.side as f64, statistic: l.var_norm, error: l.var_norm_se })
        .collect();
    let variance_fit = scaling_fit(&points, Correction::None, 0.95).ok();
    let mut systematic = Vec::new();
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.side != 2 * a.side {
            continue;
        }
        let diff = (a.q.get(0, 0, 0, 0) - b.q.get(0, 0, 0, 0)).abs();
        let diff_se = a.q_se.get(0, 0, 0, 0).hypot(b.q_se.get(0, 0, 0, 0));
        let scaled_diff = diff / (a.side as f64).ln().powf(dim as f64 / 2.0);
        systematic.push(SystematicStep {
            side: a.side,
            next_side: b.side,
            diff,
            diff_se,
            scaled_diff,
            swamped: 2.0 * diff_se > diff,
        });
    }
    let systematic_ratios = systematic
        .windows(2)
        .filter(|w| w[1].side == 2 * w[0].side)
        .map(|w| w[1].scaled_diff / w[0].scaled_diff)
        .collect();
    RveSummary { levels, variance_fit, systematic, systematic_ratios }
}

// ---------------------------------------------------------------- normality

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityLevel {
    pub side: usize,
    pub n: usize,
    pub failed: Vec<u64>,
    pub kolmogorov: f64,
    pub wasserstein1: f64,
    /// `K + W`.
    pub delta: f64,
    pub delta_ci: BootstrapInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalitySummary {
    pub levels: Vec<NormalityLevel>,
    /// Whether `δ` decreases strictly from each side to the next.
    pub decreasing: bool,
}

pub fn run_normality(cfg: &ExperimentConfig, sampler: &Sampler<'_>, table: &mut Table, log: &mut Vec<LogEntry>) -> Result<NormalitySummary> {
    let d = cfg.dim;
    table.set_header(["parameter", "realization", "status"].into_iter().map(String::from).chain(matrix_headers("abar", d)).collect());
    let mut levels = Vec::new();
    for side in cfg.resolved_sides()? {
        let grid = TorusGrid::new(d, side)?;
        let outcomes = sampler.abar(grid, cfg.realizations as u64, StreamPurpose::Field)?;
        log_outcomes(log, "normality", side, &outcomes);
        abar_rows(table, side, &outcomes);
        let (ok, failed) = split(&outcomes);
        let raw: Vec<f64> = ok.iter().map(|r| r.abar[(0, 0)]).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let scale = (side as f64).powf(d as f64 / 2.0);
        let samples: Vec<f64> = raw.iter().map(|v| scale * (v - mean)).collect();
        let m = normality_metrics(&samples)?;
        let seed = cfg.master_seed ^ (side as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let ci = delta_bootstrap(&samples, cfg.bootstrap_resamples, 0.95, seed)?;
        levels.push(NormalityLevel {
            side,
            n: m.n,
            failed,
            kolmogorov: m.kolmogorov,
            wasserstein1: m.wasserstein1,
            delta: m.delta(),
            delta_ci: ci,
        });
    }
    let decreasing = levels.windows(2).all(|w| w[1].delta < w[0].delta);
    Ok(NormalitySummary { levels, decreasing })
}

// ---------------------------------------------------------------- gk

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkLevel {
    pub window: usize,
    pub torus_side: usize,
    pub n: usize,
    pub failed: Vec<u64>,
    pub q: FluctuationTensor,
    pub q_se: FluctuationTensor,
    /// RVE estimate from the same realizations on the `2L` torus.
    pub rve_same_torus: RveLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkSummary {
    pub reference: ReferenceInfo,
    pub levels: Vec<GkLevel>,
}

pub fn run_gk(cfg: &ExperimentConfig, sampler: &Sampler<'_>, table: &mut Table, log: &mut Vec<LogEntry>) -> Result<GkSummary> {
    let d = cfg.dim;
    let windows = cfg.resolved_sides()?;
    let max_torus = 2 * windows.iter().copied().max().unwrap_or(1);
    let reference = resolve_reference(cfg, sampler, max_torus, log)?;
    let refm = reference.matrix.clone().expect("validated: fixed reference");
    table.set_header(
        ["parameter", "realization", "status"]
            .into_iter()
            .map(String::from)
            .chain(matrix_headers("abar", d))
            .chain(matrix_headers("mean_xi", d))
            .collect(),
    );
    let mut levels = Vec::new();
    for &window in &windows {
        let grid = TorusGrid::new(d, 2 * window)?;
        let outcomes = sampler.green_kubo(grid, window, &refm, cfg.realizations as u64)?;
        log_outcomes(log, "gk", window, &outcomes);
        for (r, o) in outcomes.iter().enumerate() {
            let mut row = vec![window.to_string(), r.to_string()];
            match o {
                Outcome::Ok(rec) => {
                    row.push("ok".into());
                    row.extend(matrix_entries(&rec.abar).iter().map(|v| v.to_string()));
                    row.extend(rec.means.iter().map(|v| v.to_string()));
                }
                Outcome::Failed { .. } => {
                    row.push("failed".into());
                    row.extend(std::iter::repeat_n(String::new(), 2 * d * d));
                }
            }
            table.push(row);
        }
        let (ok, failed) = split(&outcomes);
        let records: Vec<_> =
            ok.iter().map(|r| GreenKuboRecord { raw: r.raw.clone(), means: r.means.clone() }).collect();
        let est = combine_records(&grid, window, &records)?;
        let abars: Vec<_> = ok.iter().map(|r| AbarRecord { abar: r.abar.clone(), reports: Vec::new() }).collect();
        levels.push(GkLevel {
            window,
            torus_side: 2 * window,
            n: est.n,
            failed: failed.clone(),
            q: est.q,
            q_se: est.q_se,
            rve_same_torus: rve_level(2 * window, &abars, failed)?,
        });
    }
    Ok(GkSummary { reference, levels })
}

// ---------------------------------------------------------------- clt / pathwise

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalLevel {
    pub side: usize,
    pub epsilon: f64,
    pub n: usize,
    pub failed: Vec<u64>,
    pub j0: SampleMoments,
    pub j1: SampleMoments,
    pub j2: SampleMoments,
    pub i1: SampleMoments,
    pub i2: SampleMoments,
    pub e0: SampleMoments,
    /// Sample `L²` norm of the centered `E0` and its error.
    pub e0_l2: f64,
    pub e0_l2_se: f64,
    pub max_pathwise_discrepancy: f64,
}

impl FunctionalLevel {
    fn from_records(side: usize, ok: &[FunctionalRecord], failed: Vec<u64>) -> Self {
        let col = |f: &dyn Fn(&FunctionalRecord) -> f64| SampleMoments::of(&ok.iter().map(f).collect::<Vec<_>>());
        let e0 = col(&|r| r.e0());
        let (e0_l2, e0_l2_se) = e0.l2_norm();
        Self {
            side,
            epsilon: 1.0 / side as f64,
            n: ok.len(),
            failed,
            j0: col(&|r| r.j0),
            j1: col(&|r| r.j1),
            j2: col(&|r| r.j2),
            i1: col(&|r| r.i1),
            i2: col(&|r| r.i2),
            e0,
            e0_l2,
            e0_l2_se,
            max_pathwise_discrepancy: ok.iter().map(|r| r.pathwise_discrepancy()).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub side: usize,
    pub doubled_side: usize,
    pub j0_variance: (f64, f64),
    pub j0_variance_doubled: (f64, f64),
    pub e0_l2: (f64, f64),
    pub e0_l2_doubled: (f64, f64),
    /// Set when either statistic moves by more than one combined error bar.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSummary {
    pub reference: ReferenceInfo,
    pub levels: Vec<FunctionalLevel>,
    /// `Var J0` at each `ε` divided by its value at the previous `ε`.
    pub j0_variance_ratios: Vec<f64>,
    /// Fit of the `E0` norm against `ε` with `μ_d(1/ε)^{1/2}` divided out.
    pub e0_fit: Option<ScalingFit>,
    pub doubling: Option<DoublingCheck>,
}

pub fn run_functionals(cfg: &ExperimentConfig, sampler: &Sampler<'_>, table: &mut Table, log: &mut Vec<LogEntry>) -> Result<FunctionalSummary> {
    let d = cfg.dim;
    let sides = cfg.resolved_sides()?;
    let tests = cfg.test_function.resolve(d)?;
    let max_side = sides.iter().copied().max().unwrap_or(1);
    let reference = resolve_reference(cfg, sampler, max_side, log)?;
    let refm = reference.matrix.as_ref();
    table.set_header(
        [
            "parameter", "box", "realization", "status", "j0", "j1", "j2", "i1", "i2", "e0_raw", "e0_flux",
            "e0_commutator", "pathwise_discrepancy",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    );
    let mut run_level = |side: usize, doubled: bool, log: &mut Vec<LogEntry>| -> Result<FunctionalLevel> {
        let grid = TorusGrid::new(d, side)?;
        let outcomes = sampler.functionals(grid, &tests, refm, doubled, cfg.realizations as u64)?;
        log_outcomes(log, cfg.study.name(), side, &outcomes);
        for (r, o) in outcomes.iter().enumerate() {
            let mut row = vec![side.to_string(), if doubled { "2" } else { "1" }.to_string(), r.to_string()];
            match o {
                Outcome::Ok(rec) => {
                    row.push("ok".into());
                    row.extend(
                        [rec.j0, rec.j1, rec.j2, rec.i1, rec.i2, rec.e0(), rec.e0_flux, rec.e0_commutator, rec.pathwise_discrepancy()]
                            .iter()
                            .map(|v| v.to_string()),
                    );
                }
                Outcome::Failed { .. } => {
                    row.push("failed".into());
                    row.extend(std::iter::repeat_n(String::new(), 9));
                }
            }
            table.push(row);
        }
        let (ok, failed) = split(&outcomes);
        Ok(FunctionalLevel::from_records(side, &ok, failed))
    };
    let mut levels = Vec::new();
    for &side in &sides {
        levels.push(run_level(side, false, log)?);
    }
    let doubling = if cfg.doubling_check {
        let base = &levels[0];
        let doubled = run_level(2 * base.side, true, log)?;
        let moved = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() > a.1.hypot(b.1);
        let j0v = (base.j0.variance, base.j0.variance_se);
        let j0d = (doubled.j0.variance, doubled.j0.variance_se);
        let e0 = (base.e0_l2, base.e0_l2_se);
        let e0d = (doubled.e0_l2, doubled.e0_l2_se);
        Some(DoublingCheck {
            side: base.side,
            doubled_side: doubled.side,
            j0_variance: j0v,
            j0_variance_doubled: j0d,
            e0_l2: e0,
            e0_l2_doubled: e0d,
            flagged: moved(j0v, j0d) || moved(e0, e0d),
        })
    } else {
        None
    };
    let j0_variance_ratios = levels.windows(2).map(|w| w[1].j0.variance / w[0].j0.variance).collect();
    let points: Vec<_> = levels
        .iter()
        .map(|l| ScalingPoint { parameter: l.epsilon, statistic: l.e0_l2, error: l.e0_l2_se })
        .collect();
    let e0_fit = scaling_fit(&points, Correction::MuDInverse { dim: d, power: 0.5 }, 0.95).ok();
    Ok(FunctionalSummary { reference, levels, j0_variance_ratios, e0_fit, doubling })
}

// ---------------------------------------------------------------- moments

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentLevel {
    pub side: usize,
    pub n: usize,
    pub failed: Vec<u64>,
    pub phi_sq: SampleMoments,
    pub grad_sq: SampleMoments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub levels: Vec<MomentLevel>,
    /// Fit of `E[φ²]` against `L` with `μ_d(L)` divided out.
    pub phi_fit: Option<ScalingFit>,
    /// `E|∇φ|²` at the largest side divided by its value at each side.
    pub gradient_ratios: Vec<(usize, f64)>,
}

pub fn run_moments(cfg: &ExperimentConfig, sampler: &Sampler<'_>, table: &mut Table, log: &mut Vec<LogEntry>) -> Result<MomentSummary> {
    let d = cfg.dim;
    table.set_header(["parameter", "realization", "status", "phi_sq", "grad_sq"].into_iter().map(String::from).collect());
    let mut levels = Vec::new();
    for side in cfg.resolved_sides()? {
        let grid = TorusGrid::new(d, side)?;
        let outcomes: Vec<Outcome<MomentRecord>> = sampler.moments(grid, cfg.realizations as u64)?;
        log_outcomes(log, "moments", side, &outcomes);
        for (r, o) in outcomes.iter().enumerate() {
            let mut row = vec![side.to_string(), r.to_string()];
            match o {
                Outcome::Ok(rec) => row.extend(["ok".to_string(), rec.phi_sq.to_string(), rec.grad_sq.to_string()]),
                Outcome::Failed { .. } => row.extend(["failed".to_string(), String::new(), String::new()]),
            }
            table.push(row);
        }
        let (ok, failed) = split(&outcomes);
        levels.push(MomentLevel {
            side,
            n: ok.len(),
            failed,
            phi_sq: SampleMoments::of(&ok.iter().map(|r| r.phi_sq).collect::<Vec<_>>()),
            grad_sq: SampleMoments::of(&ok.iter().map(|r| r.grad_sq).collect::<Vec<_>>()),
        });
    }
    let points: Vec<_> = levels
        .iter()
        .map(|l| ScalingPoint { parameter: l.side as f64, statistic: l.phi_sq.mean, error: l.phi_sq.mean_se })
        .collect();
    let phi_fit = scaling_fit(&points, Correction::MuD { dim: d, power: 1.0 }, 0.95).ok();
    let gradient_ratios = match levels.iter().max_by_key(|l| l.side) {
        Some(top) => levels.iter().map(|l| (l.side, top.grad_sq.mean / l.grad_sq.mean)).collect(),
        None => Vec::new(),
    };
    Ok(MomentSummary { levels, phi_fit, gradient_ratios })
}
