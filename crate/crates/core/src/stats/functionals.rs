//! Fluctuation functionals as Riemann sums on the lattice.
//!
//! With `ε = 1/n` on a torus of side `n`, the node `x` represents the
//! continuum point `ε x`. Then
//!
//! * `J0(F) = ε^{d/2} Σ_x F(εx) : Ξ(x)`,
//! * `J1(F) = ε^{d/2} Σ_x F_ij(εx) ∇_jφ_i(x)`,
//! * `J2(F) = ε^{d/2} Σ_x F_ij(εx) (a_j(∇_jφ_i + δ_ij) - ā_ref,ji)(x)`,
//!
//! and with `U`, `Ũ`, `Ṽ` the mean-zero solutions of `-∇*·a∇U = ∇*·(εf_ε)`,
//! `-∇*·ā∇Ũ = ∇*·(εf_ε)` and `-∇*·ā∇Ṽ = ∇*·(εg_ε)`,
//!
//! * `I1 = ε^{d/2-1} Σ g_ε·∇U` and `I2 = ε^{d/2-1} Σ g_ε·a∇U` (uncentered),
//! * `E0 = ε^{d/2-1} Σ g_ε·(a - ā)∇U - ε^{d/2-1} Σ g_ε,j Ξ_ij ∇_iŨ` (uncentered).
//!
//! On the torus the pathwise identity `ε Σ g_ε·∇(U - Ũ) = Σ ∇Ṽ·(a - ā)∇U` is
//! exact for every symmetric `ā`; both sides are reported multiplied by
//! `ε^{d/2-2}`.

use serde::{Deserialize, Serialize};

use crate::correctors::{CommutatorField, CorrectorPack};
use crate::error::Result;
use crate::lattice::{forward_gradient, EdgeField, MatrixField, NodeField, TorusGrid};
use crate::matrix::Matrix;
use crate::solver::{ConstantSolver, SolveConfig, SolveReport, VariableSolver};
use crate::stats::test_function::TestFunction;

/// `ε` for a torus of side `n`.
pub fn epsilon(grid: &TorusGrid) -> f64 {
    1.0 / grid.side() as f64
}

fn power_of_eps(grid: &TorusGrid, exponent: f64) -> f64 {
    epsilon(grid).powf(exponent)
}

/// `J0` against an already discretized test tensor.
pub fn j0(xi: &CommutatorField<f64>, f: &MatrixField<f64>) -> f64 {
    let g = xi.grid();
    power_of_eps(g, g.dim() as f64 / 2.0) * f.contract(&xi.field)
}

/// `J0(F)` for `F = ζ A`.
pub fn j0_functional(xi: &CommutatorField<f64>, profile: &TestFunction, amplitude: &Matrix<f64>) -> Result<f64> {
    Ok(j0(xi, &profile.tensor(*xi.grid(), amplitude)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorFunctionals {
    pub j1: f64,
    pub j2: f64,
}

/// `J1` and `J2` against an already discretized test tensor.
pub fn corrector_functionals_discrete(
    pack: &CorrectorPack<f64>,
    f: &MatrixField<f64>,
    reference: &Matrix<f64>,
) -> CorrectorFunctionals {
    let grid = *pack.grid();
    let d = grid.dim();
    let scale = power_of_eps(&grid, d as f64 / 2.0);
    let (mut j1, mut j2) = (0.0, 0.0);
    for i in 0..d {
        let grad = forward_gradient(&pack.correctors[i]);
        for x in 0..grid.node_count() {
            for j in 0..d {
                let fij = f.get(x, i, j);
                if fij == 0.0 {
                    continue;
                }
                let gj = grad.get(x, j);
                let delta = if i == j { 1.0 } else { 0.0 };
                j1 += fij * gj;
                j2 += fij * (pack.a.get(x, j) * (gj + delta) - reference[(j, i)]);
            }
        }
    }
    CorrectorFunctionals { j1: scale * j1, j2: scale * j2 }
}

pub fn corrector_functionals(
    pack: &CorrectorPack<f64>,
    profile: &TestFunction,
    amplitude: &Matrix<f64>,
    reference: &Matrix<f64>,
) -> Result<CorrectorFunctionals> {
    let f = profile.tensor(*pack.grid(), amplitude)?;
    Ok(corrector_functionals_discrete(pack, &f, reference))
}

/// Uncentered solution functionals for one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFunctionals {
    pub i1: f64,
    pub i2: f64,
    /// `ε^{d/2-1} Σ g_ε·(a - ā)∇U`.
    pub e0_flux: f64,
    /// `ε^{d/2-1} Σ g_ε,j Ξ_ij ∇_iŨ`.
    pub e0_commutator: f64,
    pub pathwise_lhs: f64,
    pub pathwise_rhs: f64,
    /// `ε^{d/2-2} Σ |∇Ṽ·(a - ā)∇U| + ε^{d/2-1} Σ |g_ε·∇U|`, a scale for the
    /// pathwise discrepancy.
    pub pathwise_scale: f64,
    pub report: SolveReport,
}

impl SolutionFunctionals {
    /// `E0` before centering.
    pub fn e0_raw(&self) -> f64 {
        self.e0_flux - self.e0_commutator
    }

    pub fn pathwise_discrepancy(&self) -> f64 {
        (self.pathwise_lhs - self.pathwise_rhs).abs() / self.pathwise_scale.max(f64::MIN_POSITIVE)
    }
}

/// Deterministic part of the solution functionals: the discretized data and
/// the constant-coefficient solutions, shared by all realizations.
#[derive(Clone, Debug)]
pub struct SolutionProblem {
    pub reference: Matrix<f64>,
    /// `ε f_ε` as an edge field.
    pub rhs: EdgeField<f64>,
    pub g: EdgeField<f64>,
    pub u_tilde: NodeField<f64>,
    pub v_tilde: NodeField<f64>,
    grad_u_tilde: EdgeField<f64>,
    grad_v_tilde: EdgeField<f64>,
    cfg: SolveConfig,
}

impl SolutionProblem {
    pub fn new(
        grid: TorusGrid,
        f: &EdgeField<f64>,
        g: &EdgeField<f64>,
        reference: &Matrix<f64>,
        cfg: &SolveConfig,
    ) -> Result<Self> {
        grid.check_same(f.grid())?;
        grid.check_same(g.grid())?;
        let eps = epsilon(&grid);
        let constant = ConstantSolver::new(grid, reference, cfg)?;
        let rhs = f.scale(eps);
        let (u_tilde, _) = constant.solve(&rhs)?;
        let (v_tilde, _) = constant.solve(&g.scale(eps))?;
        Ok(Self {
            reference: constant.matrix().clone(),
            grad_u_tilde: forward_gradient(&u_tilde),
            grad_v_tilde: forward_gradient(&v_tilde),
            rhs,
            g: g.clone(),
            u_tilde,
            v_tilde,
            cfg: *cfg,
        })
    }

    /// Builds the problem from test functions `f = ζ_f v_f`, `g = ζ_g v_g`.
    pub fn from_tests(
        grid: TorusGrid,
        f: (&TestFunction, &[f64]),
        g: (&TestFunction, &[f64]),
        reference: &Matrix<f64>,
        cfg: &SolveConfig,
    ) -> Result<Self> {
        let fd = f.0.vector(grid, f.1)?;
        let gd = g.0.vector(grid, g.1)?;
        Self::new(grid, &fd, &gd, reference, cfg)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.rhs.grid()
    }

    pub fn reference(&self) -> &Matrix<f64> {
        &self.reference
    }

    /// Solves for `U` on the realization `a` and evaluates all functionals;
    /// `xi` must be the commutator of `a` taken with the same reference.
    pub fn evaluate(&self, a: &EdgeField<f64>, xi: &CommutatorField<f64>) -> Result<SolutionFunctionals> {
        let grid = *self.grid();
        grid.check_same(a.grid())?;
        let d = grid.dim();
        let eps = epsilon(&grid);
        let s1 = power_of_eps(&grid, d as f64 / 2.0 - 1.0);
        let s2 = s1 / eps;
        let (u, report) = VariableSolver::new(a, &self.cfg)?.solve(&self.rhs)?;
        let gu = forward_gradient(&u);
        let abar = &self.reference;

        let (mut i1, mut i2, mut flux, mut comm) = (0.0, 0.0, 0.0, 0.0);
        let (mut lhs, mut rhs, mut scale_r, mut scale_l) = (0.0, 0.0, 0.0, 0.0);
        let mut abar_gu = vec![0.0; d];
        for x in 0..grid.node_count() {
            for (j, v) in abar_gu.iter_mut().enumerate() {
                *v = (0..d).map(|k| abar[(j, k)] * gu.get(x, k)).sum();
            }
            for j in 0..d {
                let gj = self.g.get(x, j);
                let guj = gu.get(x, j);
                let a_gu = a.get(x, j) * guj;
                i1 += gj * guj;
                i2 += gj * a_gu;
                flux += gj * (a_gu - abar_gu[j]);
                for i in 0..d {
                    comm += gj * xi.field.get(x, i, j) * self.grad_u_tilde.get(x, i);
                }
                lhs += gj * (guj - self.grad_u_tilde.get(x, j));
                let r = self.grad_v_tilde.get(x, j) * (a_gu - abar_gu[j]);
                rhs += r;
                scale_r += r.abs();
                scale_l += (gj * guj).abs();
            }
        }
        Ok(SolutionFunctionals {
            i1: s1 * i1,
            i2: s1 * i2,
            e0_flux: s1 * flux,
            e0_commutator: s1 * comm,
            pathwise_lhs: s1 * lhs,
            pathwise_rhs: s2 * rhs,
            pathwise_scale: s2 * scale_r + s1 * scale_l,
            report,
        })
    }
}

/// Convenience wrapper: builds the problem, the correctors of `a` and the
/// commutator with `reference`, then evaluates.
pub fn solution_functionals(
    a: &EdgeField<f64>,
    f: &EdgeField<f64>,
    g: &EdgeField<f64>,
    reference: &Matrix<f64>,
    cfg: &SolveConfig,
) -> Result<SolutionFunctionals> {
    let problem = SolutionProblem::new(*a.grid(), f, g, reference, cfg)?;
    let pack = CorrectorPack::build(a, cfg, false)?;
    problem.evaluate(a, &pack.commutator(problem.reference()))
}
