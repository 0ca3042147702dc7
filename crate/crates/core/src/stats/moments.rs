//! Empirical moments of the corrector and its gradient.
//!
//! By stationarity `E[φ(z)²]` does not depend on `z`, so each realization
//! contributes its spatial average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correctors::solve_corrector;
use crate::error::{Error, Result};
use crate::lattice::{forward_gradient, TorusGrid};
use crate::random_fields::{sample_field, ConductanceLaw, SeedSpec, StreamPurpose};
use crate::solver::{SolveConfig, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    /// `⨍ φ_i²`.
    pub phi_sq: f64,
    /// `⨍ |∇φ_i|²`.
    pub grad_sq: f64,
    pub report: SolveReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub side: usize,
    pub n: usize,
    pub phi_sq: f64,
    pub phi_sq_se: f64,
    pub grad_sq: f64,
    pub grad_sq_se: f64,
}

/// Moments of `φ_direction` for one realization.
pub fn corrector_moments(
    grid: TorusGrid,
    law: &ConductanceLaw,
    seed: SeedSpec,
    direction: usize,
    cfg: &SolveConfig,
) -> Result<MomentSample> {
    let a = sample_field::<f64>(grid, law, seed);
    let (phi, report) = solve_corrector(&a, direction, cfg)?;
    let n = grid.node_count() as f64;
    let phi_sq = phi.values().iter().map(|v| v * v).sum::<f64>() / n;
    let grad = forward_gradient(&phi);
    let grad_sq = grad.values().iter().map(|v| v * v).sum::<f64>() / n;
    Ok(MomentSample { phi_sq, grad_sq, report })
}

pub fn combine_moments(side: usize, samples: &[MomentSample]) -> Result<MomentEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let nf = n as f64;
    let mean_se = |f: &dyn Fn(&MomentSample) -> f64| {
        let m = samples.iter().map(f).sum::<f64>() / nf;
        let v = samples.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / (nf - 1.0);
        (m, (v / nf).sqrt())
    };
    let (phi_sq, phi_sq_se) = mean_se(&|s| s.phi_sq);
    let (grad_sq, grad_sq_se) = mean_se(&|s| s.grad_sq);
    Ok(MomentEstimate { side, n, phi_sq, phi_sq_se, grad_sq, grad_sq_se })
}

pub fn moment_estimate(
    dim: usize,
    side: usize,
    n: usize,
    law: &ConductanceLaw,
    master_seed: u64,
    cfg: &SolveConfig,
) -> Result<MomentEstimate> {
    let grid = TorusGrid::new(dim, side)?;
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|r| corrector_moments(grid, law, SeedSpec::new(master_seed, r, StreamPurpose::Field), 0, cfg))
        .collect::<Result<Vec<_>>>()?;
    combine_moments(side, &samples)
}
