//! Log-log power-law fits with optional logarithmic corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// `μ_d(r)`: `r` for `d = 1`, `log(2 + r)` for `d = 2`, `1` for `d > 2`.
pub fn mu_d(dim: usize, r: f64) -> f64 {
    match dim {
        1 => r,
        2 => (2.0 + r).ln(),
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub parameter: f64,
    pub statistic: f64,
    /// One-standard-error Monte Carlo uncertainty of `statistic`.
    pub error: f64,
}

/// Factor divided out of the statistic before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    None,
    /// `μ_d(x)^power`.
    MuD { dim: usize, power: f64 },
    /// `μ_d(1/x)^power`, for parameters given as `ε`.
    MuDInverse { dim: usize, power: f64 },
    /// `log(x)^power`.
    LogPower { power: f64 },
}

impl Correction {
    pub fn factor(&self, x: f64) -> f64 {
        match *self {
            Correction::None => 1.0,
            Correction::MuD { dim, power } => mu_d(dim, x).powf(power),
            Correction::MuDInverse { dim, power } => mu_d(dim, 1.0 / x).powf(power),
            Correction::LogPower { power } => x.ln().powf(power),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Two-sided interval for the slope.
    pub slope_ci: (f64, f64),
    pub level: f64,
    pub reduced_chi2: f64,
    pub weighted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: String,
    pub points: Vec<ScalingPoint>,
    pub correction: Correction,
    pub fit: Option<ScalingFit>,
}

impl StudyResult {
    pub fn new(study: impl Into<String>, points: Vec<ScalingPoint>, correction: Correction) -> Result<Self> {
        let fit = scaling_fit(&points, correction, 0.95)?;
        Ok(Self { study: study.into(), points, correction, fit: Some(fit) })
    }
}

/// Fits `log(y / c(x)) = intercept + slope · log x`.
///
/// Points are weighted by the inverse squared relative error unless some
/// error is zero. Standard errors are inflated by `sqrt(χ²_red)` when the
/// scatter exceeds the quoted errors.
pub fn scaling_fit(points: &[ScalingPoint], correction: Correction, level: f64) -> Result<ScalingFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientPoints { required: 3, got: n });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput("confidence level must lie in (0, 1)".into()));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut rel = Vec::with_capacity(n);
    for p in points {
        let c = correction.factor(p.parameter);
        if !(p.parameter > 0.0 && p.statistic > 0.0 && c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "log-log fit needs positive parameter, statistic and correction, got {p:?}"
            )));
        }
        if !(p.error >= 0.0) {
            return Err(Error::InvalidInput(format!("negative error in {p:?}")));
        }
        xs.push(p.parameter.ln());
        ys.push((p.statistic / c).ln());
        rel.push(p.error / p.statistic);
    }
    let weighted = rel.iter().all(|&r| r > 0.0);
    let w: Vec<f64> = if weighted { rel.iter().map(|r| 1.0 / (r * r)).collect() } else { vec![1.0; n] };

    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(&xs).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let xm = sx / sw;
    let ym = sy / sw;
    let sxx: f64 = w.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("fit needs at least two distinct parameters".into()));
    }
    let sxy: f64 = w.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = w
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (n - 2) as f64;
    let reduced_chi2 = chi2 / dof;
    let scale = if weighted { reduced_chi2.max(1.0) } else { reduced_chi2 };
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + xm * xm / sxx)).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok(ScalingFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        slope_ci: (slope - t * slope_se, slope + t * slope_se),
        level,
        reduced_chi2,
        weighted,
    })
}
