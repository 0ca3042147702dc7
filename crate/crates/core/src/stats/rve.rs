//! Representative-volume-element estimators of `ā` and of the fluctuation
//! tensor `Q`.
//!
//! `Q_{L,N} = L^d/(N-1) Σ_n (ā^{(n)} - ā_{L,N})* ⊗ (ā^{(n)} - ā_{L,N})*`, i.e.
//! `Q_ijkl = L^d/(N-1) Σ_n δ_n,ji δ_n,lk`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correctors::CorrectorPack;
use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::matrix::Matrix;
use crate::random_fields::{sample_field, ConductanceLaw, SeedSpec, StreamPurpose};
use crate::solver::SolveConfig;

/// A `d⁴` tensor indexed `(i, j, k, l)`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationTensor {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FluctuationTensor {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim.pow(4)] }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let d = self.dim;
        ((i * d + j) * d + k) * d + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    /// `max |Q_ijkl - Q_klij|`.
    pub fn pair_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        worst = worst.max((self.get(i, j, k, l) - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue of `Q` as a quadratic form on `d × d` matrices.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.dim * self.dim;
        let mat = nalgebra::DMatrix::from_row_slice(m, m, &self.data);
        let sym = (&mat + mat.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    fn from_second_moment(dim: usize, second: &[f64]) -> Self {
        Self { dim, data: second.to_vec() }
    }
}

/// Sample statistics over `N` realizations of `ā_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RveEstimate {
    pub dim: usize,
    pub side: usize,
    /// Realized sample size.
    pub n: usize,
    pub abar: Matrix<f64>,
    /// Jackknife standard error of each entry of `ā_{L,N}`.
    pub abar_se: Matrix<f64>,
    pub q: FluctuationTensor,
    /// Jackknife standard error of each entry of `Q_{L,N}`.
    pub q_se: FluctuationTensor,
    /// Jackknife standard error of the Frobenius norm of `Q_{L,N}`.
    pub q_norm_se: f64,
    pub master_seed: Option<u64>,
    /// Realization indices that failed to converge and were dropped.
    pub failed: Vec<u64>,
}

/// Maps `ā` to the vector `x` with `x[i*d + j] = ā_ji`, so that
/// `Q_ijkl = L^d Cov(x_ij, x_kl)`.
fn transposed_entries(m: &Matrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl RveEstimate {
    /// Estimates from already computed `ā_L^{(n)}`. Needs `N ≥ 3` for the
    /// jackknife.
    pub fn from_samples(side: usize, samples: &[Matrix<f64>]) -> Result<Self> {
        let n = samples.len();
        if n < 3 {
            return Err(Error::InsufficientSamples { required: 3, got: n });
        }
        let dim = samples[0].dim();
        if samples.iter().any(|m| m.dim() != dim) {
            return Err(Error::InvalidInput("samples have mixed dimensions".into()));
        }
        let m = dim * dim;
        let volume = (side as f64).powi(dim as i32);
        let xs: Vec<Vec<f64>> = samples.iter().map(transposed_entries).collect();
        let nf = n as f64;

        let mut mean = vec![0.0; m];
        for x in &xs {
            for (s, v) in mean.iter_mut().zip(x) {
                *s += v;
            }
        }
        mean.iter_mut().for_each(|s| *s /= nf);
        // Centering first keeps the running sums well conditioned.
        let centered: Vec<Vec<f64>> =
            xs.iter().map(|x| x.iter().zip(&mean).map(|(v, mu)| v - mu).collect()).collect();
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![0.0; m * m];
        for c in &centered {
            for p in 0..m {
                s1[p] += c[p];
                for q in 0..m {
                    s2[p * m + q] += c[p] * c[q];
                }
            }
        }
        let q_full: Vec<f64> = s2.iter().map(|v| volume * v / (nf - 1.0)).collect();

        // Leave-one-out replicates.
        let mut q_loo_sum = vec![0.0; m * m];
        let mut q_loo_sq = vec![0.0; m * m];
        let mut mean_loo_sum = vec![0.0; m];
        let mut mean_loo_sq = vec![0.0; m];
        let (mut norm_loo_sum, mut norm_loo_sq) = (0.0, 0.0);
        for c in &centered {
            let mut norm_sq = 0.0;
            for p in 0..m {
                let mp = (s1[p] - c[p]) / (nf - 1.0);
                mean_loo_sum[p] += mp;
                mean_loo_sq[p] += mp * mp;
                for q in 0..m {
                    let r1p = s1[p] - c[p];
                    let r1q = s1[q] - c[q];
                    let r2 = s2[p * m + q] - c[p] * c[q];
                    let v = volume * (r2 - r1p * r1q / (nf - 1.0)) / (nf - 2.0);
                    q_loo_sum[p * m + q] += v;
                    q_loo_sq[p * m + q] += v * v;
                    norm_sq += v * v;
                }
            }
            norm_loo_sum += norm_sq.sqrt();
            norm_loo_sq += norm_sq;
        }
        let jackknife = |sum: f64, sq: f64| -> f64 {
            let avg = sum / nf;
            ((nf - 1.0) / nf * (sq - nf * avg * avg)).max(0.0).sqrt()
        };
        let q_se: Vec<f64> = q_loo_sum.iter().zip(&q_loo_sq).map(|(&s, &q)| jackknife(s, q)).collect();
        let mean_se: Vec<f64> =
            mean_loo_sum.iter().zip(&mean_loo_sq).map(|(&s, &q)| jackknife(s, q)).collect();

        let untranspose = |v: &[f64]| Matrix::from_row_major(dim, v.to_vec()).map(|m| m.transpose());
        Ok(Self {
            dim,
            side,
            n,
            abar: untranspose(&mean)?,
            abar_se: untranspose(&mean_se)?,
            q: FluctuationTensor::from_second_moment(dim, &q_full),
            q_se: FluctuationTensor::from_second_moment(dim, &q_se),
            q_norm_se: jackknife(norm_loo_sum, norm_loo_sq),
            master_seed: None,
            failed: Vec::new(),
        })
    }

    /// `Var(ā_L)` as the tensor `Q_{L,N} / L^d`.
    pub fn variance(&self) -> FluctuationTensor {
        self.q.scaled((self.side as f64).powi(-(self.dim as i32)))
    }
}

/// `Q` from spatial means of commutators, `L^d/(N-1) Σ_n ⨍Ξ^{(n)} ⊗ ⨍Ξ^{(n)}`.
/// With `ā_ref = ā_{L,N}` this coincides with the RVE formula.
pub fn q_from_commutator_means(side: usize, means: &[Matrix<f64>]) -> Result<FluctuationTensor> {
    let n = means.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let dim = means[0].dim();
    let m = dim * dim;
    let volume = (side as f64).powi(dim as i32);
    let mut out = vec![0.0; m * m];
    for xi in means {
        let x = xi.as_slice();
        for p in 0..m {
            for q in 0..m {
                out[p * m + q] += x[p] * x[q];
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= volume / (n as f64 - 1.0));
    Ok(FluctuationTensor::from_second_moment(dim, &out))
}

/// `ā_L` for realization `index` drawn with `purpose`; `None` on
/// non-convergence.
pub fn realization_abar(
    grid: TorusGrid,
    law: &ConductanceLaw,
    seed: SeedSpec,
    cfg: &SolveConfig,
) -> Result<Matrix<f64>> {
    let a = sample_field::<f64>(grid, law, seed);
    Ok(CorrectorPack::build(&a, cfg, false)?.abar)
}

/// Runs `n` independent corrector pipelines on `[0, side)^dim` and returns the
/// RVE statistics. Realizations run in parallel; the reduction is in
/// realization order.
pub fn rve_estimate(
    dim: usize,
    side: usize,
    n: usize,
    law: &ConductanceLaw,
    master_seed: u64,
    cfg: &SolveConfig,
) -> Result<RveEstimate> {
    rve_estimate_with_purpose(dim, side, n, law, master_seed, StreamPurpose::Field, cfg)
}

pub fn rve_estimate_with_purpose(
    dim: usize,
    side: usize,
    n: usize,
    law: &ConductanceLaw,
    master_seed: u64,
    purpose: StreamPurpose,
    cfg: &SolveConfig,
) -> Result<RveEstimate> {
    law.validate()?;
    cfg.validate()?;
    let grid = TorusGrid::new(dim, side)?;
    let results: Vec<Result<Matrix<f64>>> = (0..n as u64)
        .into_par_iter()
        .map(|r| realization_abar(grid, law, SeedSpec::new(master_seed, r, purpose), cfg))
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut failed = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(m) => samples.push(m),
            Err(Error::NonConvergence { .. }) => failed.push(r as u64),
            Err(e) => return Err(e),
        }
    }
    let mut est = RveEstimate::from_samples(side, &samples)?;
    est.master_seed = Some(master_seed);
    est.failed = failed;
    Ok(est)
}

/// Reference matrix for the commutator: the symmetrized mean of a pilot RVE
/// run on an independent stream.
pub fn pilot_reference(
    dim: usize,
    side: usize,
    n: usize,
    law: &ConductanceLaw,
    master_seed: u64,
    cfg: &SolveConfig,
) -> Result<Matrix<f64>> {
    let est = rve_estimate_with_purpose(dim, side, n, law, master_seed, StreamPurpose::Pilot, cfg)?;
    Ok(est.abar.symmetrized())
}
