//! Sampling of iid conductance fields.
//!
//! Every edge draw is a pure function of `(master_seed, purpose, realization,
//! grid shape, edge index)`: the first four are hashed into a ChaCha8 key and
//! the edge index selects the ChaCha stream. Fields therefore reproduce
//! bit-for-bit regardless of iteration order or thread schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{EdgeField, TorusGrid};
use crate::scalar::Real;

/// Law of a single conductance; all supports lie in `[λ, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConductanceLaw {
    /// `hi` with probability `p`, `lo` otherwise.
    TwoPoint { lo: f64, hi: f64, p: f64 },
    /// Uniform on `[λ, 1]`.
    Uniform { lambda: f64 },
    /// `λ + (1 - λ) X` with `X ~ Beta(α, β)`.
    ScaledBeta { alpha: f64, beta: f64, lambda: f64 },
}

impl Default for ConductanceLaw {
    fn default() -> Self {
        ConductanceLaw::TwoPoint { lo: 0.5, hi: 1.0, p: 0.5 }
    }
}

impl ConductanceLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, p } => {
                if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                    return bad(format!("two_point needs 0 < lo <= hi <= 1, got lo={lo}, hi={hi}"));
                }
                if !(p > 0.0 && p < 1.0) {
                    return bad(format!("two_point needs 0 < p < 1, got {p}"));
                }
            }
            ConductanceLaw::Uniform { lambda } => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return bad(format!("uniform needs lambda in (0, 1], got {lambda}"));
                }
            }
            ConductanceLaw::ScaledBeta { alpha, beta, lambda } => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return bad(format!("scaled_beta needs lambda in (0, 1], got {lambda}"));
                }
                if !(alpha > 0.0 && beta > 0.0) {
                    return bad(format!("scaled_beta needs positive shape parameters, got {alpha}, {beta}"));
                }
            }
        }
        Ok(())
    }

    /// Ellipticity constant: lower end of the support.
    pub fn lambda(&self) -> f64 {
        match *self {
            ConductanceLaw::TwoPoint { lo, .. } => lo,
            ConductanceLaw::Uniform { lambda } | ConductanceLaw::ScaledBeta { lambda, .. } => lambda,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, .. } => lo == hi,
            ConductanceLaw::Uniform { lambda } => lambda == 1.0,
            ConductanceLaw::ScaledBeta { lambda, .. } => lambda == 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, p } => p * hi + (1.0 - p) * lo,
            ConductanceLaw::Uniform { lambda } => 0.5 * (1.0 + lambda),
            ConductanceLaw::ScaledBeta { alpha, beta, lambda } => {
                lambda + (1.0 - lambda) * alpha / (alpha + beta)
            }
        }
    }

    /// `E[1/a]` and `Var(1/a)`, where closed forms are available.
    pub fn inverse_moments(&self) -> Option<(f64, f64)> {
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, p } => {
                let m = p / hi + (1.0 - p) / lo;
                let m2 = p / (hi * hi) + (1.0 - p) / (lo * lo);
                Some((m, m2 - m * m))
            }
            ConductanceLaw::Uniform { lambda } if lambda < 1.0 => {
                let w = 1.0 - lambda;
                let m = -lambda.ln() / w;
                let m2 = (1.0 / lambda - 1.0) / w;
                Some((m, m2 - m * m))
            }
            ConductanceLaw::Uniform { .. } => Some((1.0, 0.0)),
            ConductanceLaw::ScaledBeta { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, p } => {
                if rng.random::<f64>() < p {
                    hi
                } else {
                    lo
                }
            }
            ConductanceLaw::Uniform { lambda } => lambda + (1.0 - lambda) * rng.random::<f64>(),
            ConductanceLaw::ScaledBeta { alpha, beta, lambda } => {
                let x: f64 = Beta::new(alpha, beta).expect("validated shape").sample(rng);
                lambda + (1.0 - lambda) * x
            }
        }
    }

    /// Short tag for file names, e.g. `two_point-0.5-1-0.5`.
    pub fn tag(&self) -> String {
        match *self {
            ConductanceLaw::TwoPoint { lo, hi, p } => format!("two_point-{lo}-{hi}-{p}"),
            ConductanceLaw::Uniform { lambda } => format!("uniform-{lambda}"),
            ConductanceLaw::ScaledBeta { alpha, beta, lambda } => {
                format!("scaled_beta-{alpha}-{beta}-{lambda}")
            }
        }
    }
}

/// What a random stream is used for; distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamPurpose {
    Field,
    Resample,
    Pilot,
    Bootstrap,
    Other(u32),
}

impl StreamPurpose {
    fn code(self) -> u64 {
        match self {
            StreamPurpose::Field => 1,
            StreamPurpose::Resample => 2,
            StreamPurpose::Pilot => 3,
            StreamPurpose::Bootstrap => 4,
            StreamPurpose::Other(k) => 1 << 32 | k as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub realization: u64,
    pub purpose: StreamPurpose,
}

impl SeedSpec {
    pub fn new(master_seed: u64, realization: u64, purpose: StreamPurpose) -> Self {
        Self { master_seed, realization, purpose }
    }

    /// Generator for this seed on a given grid; select an edge with
    /// `set_stream(edge_index)`.
    pub fn rng(&self, grid: &TorusGrid) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"homfluct/seed/v1");
        for word in [
            self.master_seed,
            self.purpose.code(),
            self.realization,
            grid.dim() as u64,
            grid.side() as u64,
        ] {
            h.update(word.to_le_bytes());
        }
        let key: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(key)
    }

    /// Generator dedicated to one edge.
    pub fn edge_rng(&self, grid: &TorusGrid, edge: usize) -> ChaCha8Rng {
        let mut rng = self.rng(grid);
        rng.set_stream(edge as u64);
        rng
    }
}

/// Samples an iid conductance field. Edge `(z, z + e_i)` has linear index
/// `z * d + i` and draws from its own stream.
pub fn sample_field<T: Real>(grid: TorusGrid, law: &ConductanceLaw, seed: SeedSpec) -> EdgeField<T> {
    let base = seed.rng(&grid);
    let values = (0..grid.edge_count())
        .map(|e| {
            let mut rng = base.clone();
            rng.set_stream(e as u64);
            rng.set_word_pos(0);
            T::from_f64_lossy(law.sample(&mut rng))
        })
        .collect();
    EdgeField::from_values(grid, values).expect("edge count")
}

/// Edge `b = (z_b, z_b + e_b)` with its old and resampled conductance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePerturbation {
    pub node: usize,
    pub axis: usize,
    pub old_value: f64,
    pub new_value: f64,
}

impl EdgePerturbation {
    /// `Δ_b a = a - a^b`: supported on the single edge `b`.
    pub fn delta_field<T: Real>(&self, grid: TorusGrid) -> EdgeField<T> {
        let mut d = EdgeField::zeros(grid);
        d.set(self.node, self.axis, T::from_f64_lossy(self.old_value - self.new_value));
        d
    }
}

/// Returns `a^b`, equal to `a` except on edge `(node, axis)` where the value is
/// an independent draw from `law`.
pub fn resample_edge<T: Real>(
    a: &EdgeField<T>,
    node: usize,
    axis: usize,
    law: &ConductanceLaw,
    seed: SeedSpec,
) -> Result<(EdgeField<T>, EdgePerturbation)> {
    let grid = *a.grid();
    if node >= grid.node_count() || axis >= grid.dim() {
        return Err(Error::InvalidInput(format!(
            "edge ({node}, {axis}) is not on the grid"
        )));
    }
    let edge = node * grid.dim() + axis;
    let mut rng = seed.edge_rng(&grid, edge);
    let new_value = T::from_f64_lossy(law.sample(&mut rng));
    let mut ab = a.clone();
    let old = a.get(node, axis);
    ab.set(node, axis, new_value);
    Ok((
        ab,
        EdgePerturbation {
            node,
            axis,
            old_value: old.as_f64(),
            new_value: new_value.as_f64(),
        },
    ))
}
