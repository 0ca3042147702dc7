//! Windowed Green-Kubo estimator of the fluctuation tensor,
//! `Σ_{x} w_L(x) Cov(Ξ_ij(x), Ξ_kl(0))` with the overlap weight
//! `w_L(x) = |Q_L ∩ (x + Q_L)| / |Q_L| = Π_k (1 - |x_k|/L)_+`.
//!
//! Each realization lives on a torus of side at least `2L`. Stationarity is
//! used by averaging the base point over the torus; the spatial correlations
//! are computed with FFTs.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::correctors::CommutatorField;
use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::solver::NdFft;
use crate::stats::rve::FluctuationTensor;

/// `w_L` evaluated at minimum-image displacements of `grid`.
pub fn overlap_weight(grid: &TorusGrid, window: usize) -> Vec<f64> {
    let side = grid.side() as i64;
    let l = window as f64;
    (0..grid.node_count())
        .map(|x| {
            (0..grid.dim())
                .map(|k| {
                    let mut c = grid.coordinate(x, k) as i64;
                    if c > side / 2 {
                        c -= side;
                    }
                    (1.0 - c.abs() as f64 / l).max(0.0)
                })
                .product()
        })
        .collect()
}

/// Per-realization sufficient statistics: the weighted, base-point averaged
/// raw cross-correlations `R_ijkl` and the spatial means `m_ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboRecord {
    pub raw: Vec<f64>,
    pub means: Vec<f64>,
}

/// Reusable per-grid FFT setup.
pub struct GreenKuboWindow {
    grid: TorusGrid,
    window: usize,
    weight_hat: Vec<f64>,
    fft: NdFft<f64>,
}

impl GreenKuboWindow {
    pub fn new(grid: TorusGrid, window: usize) -> Result<Self> {
        if window == 0 || 2 * window > grid.side() {
            return Err(Error::InvalidInput(format!(
                "window {window} needs a torus side of at least {}, got {}",
                2 * window.max(1),
                grid.side()
            )));
        }
        let fft = NdFft::new(grid);
        let mut w: Vec<Complex<f64>> =
            overlap_weight(&grid, window).into_iter().map(|v| Complex::new(v, 0.0)).collect();
        fft.forward(&mut w);
        let weight_hat = w.into_iter().map(|c| c.re).collect();
        Ok(Self { grid, window, weight_hat, fft })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn record(&self, xi: &CommutatorField<f64>) -> Result<GreenKuboRecord> {
        self.grid.check_same(xi.grid())?;
        let d = self.grid.dim();
        let m = d * d;
        let n = self.grid.node_count();
        let volume = n as f64;
        let mut spectra = Vec::with_capacity(m);
        let mut means = Vec::with_capacity(m);
        for i in 0..d {
            for j in 0..d {
                let comp = xi.field.entry(i, j);
                means.push(comp.mean());
                let mut buf: Vec<Complex<f64>> =
                    comp.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
                self.fft.forward(&mut buf);
                spectra.push(buf);
            }
        }
        let mut raw = vec![0.0; m * m];
        for p in 0..m {
            for q in p..m {
                let s: f64 = (0..n)
                    .map(|t| self.weight_hat[t] * (spectra[p][t] * spectra[q][t].conj()).re)
                    .sum();
                let v = s / (volume * volume);
                raw[p * m + q] = v;
                raw[q * m + p] = v;
            }
        }
        Ok(GreenKuboRecord { raw, means })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboEstimate {
    pub window: usize,
    pub side: usize,
    pub n: usize,
    pub q: FluctuationTensor,
    pub q_se: FluctuationTensor,
}

/// Combines records in the given order. The unknown mean of `Ξ` is replaced
/// by the grand sample mean, and the resulting `O(1/N)` bias is removed.
pub fn combine_records(
    grid: &TorusGrid,
    window: usize,
    records: &[GreenKuboRecord],
) -> Result<GreenKuboEstimate> {
    let n = records.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let d = grid.dim();
    let m = d * d;
    let nf = n as f64;
    let wsum = (window as f64).powi(d as i32);
    let mut mu = vec![0.0; m];
    for r in records {
        for (s, v) in mu.iter_mut().zip(&r.means) {
            *s += v / nf;
        }
    }
    let mut q = vec![0.0; m * m];
    let mut se = vec![0.0; m * m];
    for p in 0..m {
        for s in 0..m {
            let g: Vec<f64> = records
                .iter()
                .map(|r| {
                    r.raw[p * m + s]
                        - wsum * (mu[s] * r.means[p] + mu[p] * r.means[s] - mu[p] * mu[s])
                })
                .collect();
            let gbar = g.iter().sum::<f64>() / nf;
            let gvar = g.iter().map(|v| (v - gbar).powi(2)).sum::<f64>() / (nf - 1.0);
            let cov = records
                .iter()
                .map(|r| (r.means[p] - mu[p]) * (r.means[s] - mu[s]))
                .sum::<f64>()
                / (nf - 1.0);
            q[p * m + s] = gbar + wsum * cov / nf;
            se[p * m + s] = (gvar / nf).sqrt();
        }
    }
    Ok(GreenKuboEstimate {
        window,
        side: grid.side(),
        n,
        q: FluctuationTensor { dim: d, data: q },
        q_se: FluctuationTensor { dim: d, data: se },
    })
}

/// Green-Kubo window estimate from commutator realizations on a common torus.
pub fn green_kubo_window(xis: &[CommutatorField<f64>], window: usize) -> Result<GreenKuboEstimate> {
    if xis.len() < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: xis.len() });
    }
    let grid = *xis[0].grid();
    let gk = GreenKuboWindow::new(grid, window)?;
    let records = xis.iter().map(|xi| gk.record(xi)).collect::<Result<Vec<_>>>()?;
    combine_records(&grid, window, &records)
}
