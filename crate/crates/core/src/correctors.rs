//! Correctors, fluxes, flux correctors and the homogenization commutator for
//! one periodic realization.
//!
//! Index conventions: `ā_L[(j, i)] = ⨍ a_j (∇_j φ_i + δ_ij)`, so column `i` of
//! `ā_L` is the mean flux of `x_i + φ_i`. The flux `q_i = a(∇φ_i + e_i) - ā_L e_i`
//! is an edge field, and the flux corrector satisfies
//! `Σ_k ∇*_k σ_ijk = q_ij` with `σ_ijk = -σ_ikj`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{forward_gradient, EdgeField, MatrixField, NodeField, TorusGrid};
use crate::matrix::Matrix;
use crate::random_fields::{resample_edge, ConductanceLaw, EdgePerturbation, SeedSpec};
use crate::scalar::Real;
use crate::solver::{ConstantSolver, SolveConfig, SolveReport, VariableSolver};

/// `σ_ijk` for all `i, j, k`, stored as `d³` node fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxCorrector<T> {
    dim: usize,
    entries: Vec<NodeField<T>>,
}

impl<T: Real> FluxCorrector<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &NodeField<T> {
        &self.entries[(i * self.dim + j) * self.dim + k]
    }

    /// `(∇*·σ_i)_j = Σ_k ∇*_k σ_ijk` as an edge field.
    pub fn divergence(&self, i: usize) -> EdgeField<T> {
        let d = self.dim;
        let grid = *self.entries[0].grid();
        let mut out = EdgeField::zeros(grid);
        for j in 0..d {
            for k in 0..d {
                let s = self.get(i, j, k).values();
                for x in 0..grid.node_count() {
                    let v = out.get(x, j) + s[x] - s[grid.backward(x, k)];
                    out.set(x, j, v);
                }
            }
        }
        out
    }

    /// `max |σ_ijk + σ_ikj|` over all entries and nodes.
    pub fn skew_defect(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max(self.get(i, j, k).add(self.get(i, k, j)).max_abs());
                }
            }
        }
        worst
    }
}

/// Output of the corrector pipeline for one conductance field.
#[derive(Clone, Debug)]
pub struct CorrectorPack<T> {
    pub a: EdgeField<T>,
    /// `φ_{L,i}`, mean zero.
    pub correctors: Vec<NodeField<T>>,
    /// `q_i = a(∇φ_i + e_i) - ā_L e_i`.
    pub fluxes: Vec<EdgeField<T>>,
    pub flux_corrector: Option<FluxCorrector<T>>,
    pub abar: Matrix<T>,
    pub reports: Vec<SolveReport>,
    pub seed: Option<SeedSpec>,
}

/// JSON companion of a saved pack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackSidecar {
    pub dim: usize,
    pub side: usize,
    pub abar: Matrix<f64>,
    pub reports: Vec<SolveReport>,
    pub seed: Option<SeedSpec>,
    pub has_flux_corrector: bool,
}

impl<T: Real> CorrectorPack<T> {
    /// Solves the `d` corrector equations and, if requested, the flux
    /// corrector equations.
    pub fn build(a: &EdgeField<T>, cfg: &SolveConfig, with_flux_corrector: bool) -> Result<Self> {
        let d = a.grid().dim();
        let solver = VariableSolver::new(a, cfg)?;
        let mut correctors = Vec::with_capacity(d);
        let mut reports = Vec::new();
        for i in 0..d {
            let (phi, report) = solver.solve(&corrector_rhs(a, i))?;
            correctors.push(phi);
            reports.push(report);
        }
        let abar = homogenized_coefficient(a, &correctors);
        let fluxes = fluxes(a, &correctors, &abar);
        let flux_corrector = if with_flux_corrector {
            let (sigma, sigma_reports) = flux_corrector_from_fluxes(&fluxes, cfg)?;
            reports.extend(sigma_reports);
            Some(sigma)
        } else {
            None
        };
        Ok(Self {
            a: a.clone(),
            correctors,
            fluxes,
            flux_corrector,
            abar,
            reports,
            seed: None,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.a.grid()
    }

    /// `∇φ_i + e_i`.
    pub fn shifted_gradient(&self, i: usize) -> EdgeField<T> {
        let mut g = forward_gradient(&self.correctors[i]);
        for x in 0..self.grid().node_count() {
            g.set(x, i, g.get(x, i) + T::one());
        }
        g
    }

    pub fn commutator(&self, reference: &Matrix<T>) -> CommutatorField<T> {
        commutator(&self.a, &self.correctors, reference)
    }

    pub fn sidecar(&self) -> PackSidecar {
        PackSidecar {
            dim: self.grid().dim(),
            side: self.grid().side(),
            abar: self.abar.to_f64(),
            reports: self.reports.clone(),
            seed: self.seed,
            has_flux_corrector: self.flux_corrector.is_some(),
        }
    }

    /// Writes `a.bin`, `phi_<i>.bin`, `sigma_<i><j><k>.bin` (for `j < k`) in the
    /// lattice binary format and `pack.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let write = |name: String, f: &dyn Fn(&mut std::fs::File) -> Result<()>| -> Result<()> {
            let mut file = std::fs::File::create(dir.join(name))?;
            f(&mut file)
        };
        write("a.bin".into(), &|w| self.a.to_f64().write_binary(w))?;
        for (i, phi) in self.correctors.iter().enumerate() {
            write(format!("phi_{i}.bin"), &|w| phi.to_f64().write_binary(w))?;
        }
        if let Some(sigma) = &self.flux_corrector {
            let d = sigma.dim();
            for i in 0..d {
                for j in 0..d {
                    for k in j + 1..d {
                        write(format!("sigma_{i}{j}{k}.bin"), &|w| {
                            sigma.get(i, j, k).to_f64().write_binary(w)
                        })?;
                    }
                }
            }
        }
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::File::create(dir.join("pack.json"))?.write_all(json.as_bytes())?;
        Ok(())
    }
}

/// `a e_i` as an edge field: the right-hand side `h` for the corrector
/// equation `-∇*·a∇φ_i = ∇*·(a e_i)`.
fn corrector_rhs<T: Real>(a: &EdgeField<T>, i: usize) -> EdgeField<T> {
    let grid = *a.grid();
    let mut h = EdgeField::zeros(grid);
    for x in 0..grid.node_count() {
        h.set(x, i, a.get(x, i));
    }
    h
}

/// Mean-zero solution of `-∇*·a(∇φ_i + e_i) = 0`.
pub fn solve_corrector<T: Real>(
    a: &EdgeField<T>,
    i: usize,
    cfg: &SolveConfig,
) -> Result<(NodeField<T>, SolveReport)> {
    if i >= a.grid().dim() {
        return Err(Error::InvalidInput(format!("direction {i} out of range")));
    }
    VariableSolver::new(a, cfg)?.solve(&corrector_rhs(a, i))
}

/// `ā_L[(j, i)] = ⨍ a_j (∇_j φ_i + δ_ij)`.
pub fn homogenized_coefficient<T: Real>(a: &EdgeField<T>, correctors: &[NodeField<T>]) -> Matrix<T> {
    let grid = *a.grid();
    let d = grid.dim();
    let n = T::from_usize(grid.node_count()).unwrap();
    let mut abar = Matrix::zeros(d);
    for (i, phi) in correctors.iter().enumerate() {
        let p = phi.values();
        for j in 0..d {
            let delta = if i == j { T::one() } else { T::zero() };
            let mut acc = T::zero();
            for x in 0..grid.node_count() {
                acc += a.get(x, j) * (p[grid.forward(x, j)] - p[x] + delta);
            }
            abar[(j, i)] = acc / n;
        }
    }
    abar
}

/// `q_i = a(∇φ_i + e_i) - ā e_i` for each direction.
pub fn fluxes<T: Real>(a: &EdgeField<T>, correctors: &[NodeField<T>], abar: &Matrix<T>) -> Vec<EdgeField<T>> {
    let grid = *a.grid();
    let d = grid.dim();
    correctors
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let p = phi.values();
            let mut q = EdgeField::zeros(grid);
            for x in 0..grid.node_count() {
                for j in 0..d {
                    let delta = if i == j { T::one() } else { T::zero() };
                    q.set(x, j, a.get(x, j) * (p[grid.forward(x, j)] - p[x] + delta) - abar[(j, i)]);
                }
            }
            q
        })
        .collect()
}

/// Right-hand side in divergence form for `-Δσ_ijk = ∇_j q_ik - ∇_k q_ij`,
/// using `∇_j f = ∇*_j f(· + e_j)`.
fn flux_corrector_rhs<T: Real>(q: &EdgeField<T>, j: usize, k: usize) -> EdgeField<T> {
    let grid = *q.grid();
    let mut h = EdgeField::zeros(grid);
    for x in 0..grid.node_count() {
        h.set(x, j, h.get(x, j) + q.get(grid.forward(x, j), k));
        h.set(x, k, h.get(x, k) - q.get(grid.forward(x, k), j));
    }
    h
}

/// Solves for the single entry `σ_ijk` from the flux `q_i`.
pub fn solve_flux_corrector_entry<T: Real>(
    solver: &ConstantSolver<T>,
    q_i: &EdgeField<T>,
    j: usize,
    k: usize,
) -> Result<(NodeField<T>, SolveReport)> {
    solver.solve(&flux_corrector_rhs(q_i, j, k))
}

fn flux_corrector_from_fluxes<T: Real>(
    fluxes: &[EdgeField<T>],
    cfg: &SolveConfig,
) -> Result<(FluxCorrector<T>, Vec<SolveReport>)> {
    let grid = *fluxes[0].grid();
    let d = grid.dim();
    let laplace = ConstantSolver::new(grid, &Matrix::identity(d), cfg)?;
    let mut entries = vec![NodeField::zeros(grid); d * d * d];
    let mut reports = Vec::new();
    for (i, q) in fluxes.iter().enumerate() {
        for j in 0..d {
            for k in j + 1..d {
                let (s, report) = solve_flux_corrector_entry(&laplace, q, j, k)?;
                entries[(i * d + k) * d + j] = s.scale(-T::one());
                entries[(i * d + j) * d + k] = s;
                reports.push(report);
            }
        }
    }
    Ok((FluxCorrector { dim: d, entries }, reports))
}

/// Flux corrector `σ` for a solved corrector set; only `j < k` is solved and
/// the rest is filled by skew symmetry.
pub fn solve_flux_corrector<T: Real>(
    a: &EdgeField<T>,
    correctors: &[NodeField<T>],
    abar: &Matrix<T>,
    cfg: &SolveConfig,
) -> Result<FluxCorrector<T>> {
    let q = fluxes(a, correctors, abar);
    Ok(flux_corrector_from_fluxes(&q, cfg)?.0)
}

/// `Ξ_ij = a_j(∇_jφ_i + δ_ij) - (ā_ref(∇φ_i + e_i))_j`, stored at `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutatorField<T> {
    pub field: MatrixField<T>,
    pub reference: Matrix<T>,
}

impl<T: Real> CommutatorField<T> {
    pub fn grid(&self) -> &TorusGrid {
        self.field.grid()
    }

    /// `⨍ Ξ`, indexed like the field: entry `(i, j)` is `(ā_L - ā_ref)_ji`.
    pub fn mean(&self) -> Matrix<T> {
        self.field.mean()
    }
}

pub fn commutator<T: Real>(
    a: &EdgeField<T>,
    correctors: &[NodeField<T>],
    reference: &Matrix<T>,
) -> CommutatorField<T> {
    let grid = *a.grid();
    let d = grid.dim();
    let mut field = MatrixField::zeros(grid);
    let mut g = vec![T::zero(); d];
    for (i, phi) in correctors.iter().enumerate() {
        let p = phi.values();
        for x in 0..grid.node_count() {
            for (k, gk) in g.iter_mut().enumerate() {
                *gk = p[grid.forward(x, k)] - p[x] + if k == i { T::one() } else { T::zero() };
            }
            for j in 0..d {
                let mut v = a.get(x, j) * g[j];
                for k in 0..d {
                    v -= reference[(j, k)] * g[k];
                }
                field.set(x, i, j, v);
            }
        }
    }
    CommutatorField { field, reference: reference.clone() }
}

/// Result of comparing `Δ_bΞ` computed directly with the four-term
/// representation formula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerticalDerivativeCheck {
    pub perturbation: EdgePerturbation,
    pub max_discrepancy: f64,
    /// `max |Δ_bΞ|` from the direct computation, for scale.
    pub max_direct: f64,
    /// Whether the first term vanishes away from `z_b`.
    pub first_term_local: bool,
}

/// Resamples edge `(node, axis)` and compares `Δ_bΞ_ij = Ξ_ij(a) - Ξ_ij(a^b)`,
/// both taken with `ā_ref = ā_L(a)`, against
///
/// `(∇φ_j + e_j)·Δ_b a(∇φ_i^b + e_i)`
/// `- ∇*_k(φ_j(· + e_k) e_k·Δ_b a(∇φ_i^b + e_i))`
/// `- ∇*_k(φ_j(· + e_k) a_k ∇_kΔ_bφ_i)`
/// `- ∇_k(σ_jkl(· - e_k) ∇_lΔ_bφ_i)`.
pub fn vertical_derivative_check<T: Real>(
    a: &EdgeField<T>,
    node: usize,
    axis: usize,
    law: &ConductanceLaw,
    seed: SeedSpec,
    cfg: &SolveConfig,
) -> Result<VerticalDerivativeCheck> {
    let grid = *a.grid();
    let d = grid.dim();
    let n = grid.node_count();
    let (ab, perturbation) = resample_edge(a, node, axis, law, seed)?;
    let pack = CorrectorPack::build(a, cfg, true)?;
    let pack_b = CorrectorPack::build(&ab, cfg, false)?;
    let sigma = pack.flux_corrector.as_ref().expect("flux corrector requested");
    let reference = &pack.abar;
    let direct = pack.commutator(reference).field.sub(&pack_b.commutator(reference).field);

    let delta_a = perturbation.delta_field::<T>(grid);
    let mut worst = T::zero();
    let mut first_term_local = true;
    for i in 0..d {
        let gb = pack_b.shifted_gradient(i);
        let dphi = pack.correctors[i].sub(&pack_b.correctors[i]);
        let grad_dphi = forward_gradient(&dphi);
        // Δ_b a (∇φ_i^b + e_i), supported on edge b.
        let dflux = gb.mul_diagonal(&delta_a);
        for j in 0..d {
            let phi_j = pack.correctors[j].values();
            let gj = pack.shifted_gradient(j);
            let mut formula = vec![T::zero(); n];
            for x in 0..n {
                let mut t1 = T::zero();
                for k in 0..d {
                    t1 += gj.get(x, k) * dflux.get(x, k);
                }
                if x != node && t1 != T::zero() {
                    first_term_local = false;
                }
                formula[x] += t1;
            }
            // -∇*_k(φ_j(·+e_k) [Δ_b a(∇φ_i^b+e_i) + a ∇Δ_bφ_i]_k)
            for k in 0..d {
                let w = |y: usize| {
                    phi_j[grid.forward(y, k)] * (dflux.get(y, k) + a.get(y, k) * grad_dphi.get(y, k))
                };
                for x in 0..n {
                    formula[x] -= w(x) - w(grid.backward(x, k));
                }
            }
            // -∇_k(Σ_l σ_jkl(·-e_k) ∇_lΔ_bφ_i)
            for k in 0..d {
                let s = |y: usize| {
                    let back = grid.backward(y, k);
                    (0..d).map(|l| sigma.get(j, k, l).values()[back] * grad_dphi.get(y, l)).sum::<T>()
                };
                for x in 0..n {
                    formula[x] -= s(grid.forward(x, k)) - s(x);
                }
            }
            for x in 0..n {
                worst = worst.max((direct.get(x, i, j) - formula[x]).abs());
            }
        }
    }
    Ok(VerticalDerivativeCheck {
        perturbation,
        max_discrepancy: worst.as_f64(),
        max_direct: direct.max_abs().as_f64(),
        first_term_local,
    })
}
