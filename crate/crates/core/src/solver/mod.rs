//! Linear solvers for `-∇*·a∇u = ∇*·h` on the torus.
//!
//! Solutions are always returned in the mean-zero gauge. Variable-coefficient
//! problems use preconditioned CG; constant-coefficient problems are solved
//! either by Fourier diagonalization or by CG on the constant stencil.

mod cg;
mod projection;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{apply_operator_into, divergence_into, EdgeField, NodeField, TorusGrid};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub use projection::{helmholtz_project, leray_project, Projector};
pub use spectral::{NdFft, SpectralSolver};

use cg::Preconditioner;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    /// Exact inverse of the operator with the direction-wise mean conductance.
    ConstantCoefficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantBackend {
    Spectral,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Relative residual target `‖b - A u‖ / ‖b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: PreconditionerKind,
    pub constant_backend: ConstantBackend,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
            preconditioner: PreconditionerKind::ConstantCoefficient,
            constant_backend: ConstantBackend::Spectral,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        // Zero is allowed: the iteration then runs until stagnation and
        // reports NonConvergence with its best iterate.
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "solver tolerance must be non-negative, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Cg,
    CgJacobi,
    CgSpectral,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub backend: Backend,
}

/// Variable-coefficient solver bound to one conductance field, so repeated
/// solves (one per corrector direction) share the preconditioner setup.
pub struct VariableSolver<'a, T: Real> {
    a: &'a EdgeField<T>,
    cfg: SolveConfig,
    spectral: Option<SpectralSolver<T>>,
    jacobi: Option<Vec<T>>,
}

impl<'a, T: Real> VariableSolver<'a, T> {
    pub fn new(a: &'a EdgeField<T>, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = *a.grid();
        let d = grid.dim();
        let (spectral, jacobi) = match cfg.preconditioner {
            PreconditionerKind::None => (None, None),
            PreconditionerKind::Jacobi => {
                let mut diag = vec![T::zero(); grid.node_count()];
                for x in 0..grid.node_count() {
                    for k in 0..d {
                        let c = a.get(x, k);
                        diag[x] += c;
                        diag[grid.forward(x, k)] += c;
                    }
                }
                (None, Some(diag.into_iter().map(|v| T::one() / v).collect()))
            }
            PreconditionerKind::ConstantCoefficient => {
                let means = a.component_means();
                (Some(SpectralSolver::new(grid, &Matrix::diagonal(&means))?), None)
            }
        };
        Ok(Self { a, cfg: *cfg, spectral, jacobi })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.a.grid()
    }

    fn backend(&self) -> Backend {
        match self.cfg.preconditioner {
            PreconditionerKind::None => Backend::Cg,
            PreconditionerKind::Jacobi => Backend::CgJacobi,
            PreconditionerKind::ConstantCoefficient => Backend::CgSpectral,
        }
    }

    /// Solves `-∇*·a∇u = b` for a node right-hand side `b` (mean ignored).
    pub fn solve_node_rhs(
        &self,
        b: &[T],
        initial: Option<&[T]>,
    ) -> Result<(NodeField<T>, SolveReport)> {
        let grid = *self.grid();
        let precond = match (&self.spectral, &self.jacobi) {
            (Some(s), _) => Preconditioner::Spectral(s),
            (None, Some(j)) => Preconditioner::Jacobi(j.clone()),
            (None, None) => Preconditioner::Identity,
        };
        let a = self.a.values();
        let outcome = cg::solve(
            |u, out| apply_operator_into(a, u, &grid, out),
            &precond,
            b,
            initial,
            self.cfg.tolerance,
            self.cfg.max_iterations,
        )?;
        let report = SolveReport {
            iterations: outcome.iterations,
            relative_residual: outcome.relative_residual,
            backend: self.backend(),
        };
        Ok((NodeField::from_values(grid, outcome.solution)?, report))
    }

    /// Solves `-∇*·a∇u = ∇*·h`.
    pub fn solve(&self, h: &EdgeField<T>) -> Result<(NodeField<T>, SolveReport)> {
        self.solve_with_guess(h, None)
    }

    pub fn solve_with_guess(
        &self,
        h: &EdgeField<T>,
        initial: Option<&NodeField<T>>,
    ) -> Result<(NodeField<T>, SolveReport)> {
        self.grid().check_same(h.grid())?;
        let mut b = vec![T::zero(); self.grid().node_count()];
        divergence_into(h.values(), self.grid(), &mut b);
        self.solve_node_rhs(&b, initial.map(|u| u.values()))
    }
}

/// Mean-zero solution of `-∇*·a∇u = ∇*·h`.
pub fn solve_variable<T: Real>(
    a: &EdgeField<T>,
    h: &EdgeField<T>,
    cfg: &SolveConfig,
) -> Result<(NodeField<T>, SolveReport)> {
    a.grid().check_same(h.grid())?;
    VariableSolver::new(a, cfg)?.solve(h)
}

/// Constant-coefficient solver for a fixed symmetric positive definite `ā`.
pub struct ConstantSolver<T: Real> {
    grid: TorusGrid,
    abar: Matrix<T>,
    cfg: SolveConfig,
    spectral: SpectralSolver<T>,
}

impl<T: Real> ConstantSolver<T> {
    pub fn new(grid: TorusGrid, abar: &Matrix<T>, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let scale = abar.max_abs();
        let slack = T::from_f64_lossy(1e-8) * scale.max(T::one());
        if abar.asymmetry() > slack {
            return Err(Error::InvalidInput(
                "constant coefficient matrix must be symmetric".into(),
            ));
        }
        let abar = abar.symmetrized();
        let spectral = SpectralSolver::new(grid, &abar)?;
        Ok(Self { grid, abar, cfg: *cfg, spectral })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.abar
    }

    /// `-∇*·ā∇u` with the full (possibly off-diagonal) matrix.
    pub fn apply(&self, u: &[T], out: &mut [T]) {
        let g = &self.grid;
        let d = g.dim();
        let mut flux = vec![T::zero(); g.edge_count()];
        let mut grad = vec![T::zero(); d];
        for x in 0..g.node_count() {
            for (k, gk) in grad.iter_mut().enumerate() {
                *gk = u[g.forward(x, k)] - u[x];
            }
            for j in 0..d {
                let mut acc = T::zero();
                for k in 0..d {
                    acc += self.abar[(j, k)] * grad[k];
                }
                flux[x * d + j] = acc;
            }
        }
        divergence_into(&flux, g, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    }

    /// Solves `-∇*·ā∇u = ∇*·h` with the configured backend.
    pub fn solve(&self, h: &EdgeField<T>) -> Result<(NodeField<T>, SolveReport)> {
        self.grid.check_same(h.grid())?;
        let n = self.grid.node_count();
        match self.cfg.constant_backend {
            ConstantBackend::Spectral => {
                let mut u = vec![T::zero(); n];
                self.spectral.solve_divergence_form(h.values(), &mut u);
                let report = SolveReport {
                    iterations: 0,
                    relative_residual: self.residual_of(&u, h),
                    backend: Backend::Spectral,
                };
                Ok((NodeField::from_values(self.grid, u)?, report))
            }
            ConstantBackend::Iterative => {
                let mut b = vec![T::zero(); n];
                divergence_into(h.values(), &self.grid, &mut b);
                let precond = match self.cfg.preconditioner {
                    PreconditionerKind::None => Preconditioner::Identity,
                    PreconditionerKind::Jacobi => {
                        let diag: T = (0..self.grid.dim()).map(|k| self.abar[(k, k)]).sum::<T>()
                            * T::from_f64_lossy(2.0);
                        Preconditioner::Jacobi(vec![T::one() / diag; n])
                    }
                    PreconditionerKind::ConstantCoefficient => {
                        Preconditioner::Spectral(&self.spectral)
                    }
                };
                let outcome = cg::solve(
                    |u, out| self.apply(u, out),
                    &precond,
                    &b,
                    None,
                    self.cfg.tolerance,
                    self.cfg.max_iterations,
                )?;
                let backend = match self.cfg.preconditioner {
                    PreconditionerKind::None => Backend::Cg,
                    PreconditionerKind::Jacobi => Backend::CgJacobi,
                    PreconditionerKind::ConstantCoefficient => Backend::CgSpectral,
                };
                let report = SolveReport {
                    iterations: outcome.iterations,
                    relative_residual: outcome.relative_residual,
                    backend,
                };
                Ok((NodeField::from_values(self.grid, outcome.solution)?, report))
            }
        }
    }

    fn residual_of(&self, u: &[T], h: &EdgeField<T>) -> f64 {
        let n = self.grid.node_count();
        let mut b = vec![T::zero(); n];
        divergence_into(h.values(), &self.grid, &mut b);
        let mut au = vec![T::zero(); n];
        self.apply(u, &mut au);
        let bn: T = b.iter().map(|&v| v * v).sum::<T>().sqrt();
        if bn == T::zero() {
            return 0.0;
        }
        let rn: T = b.iter().zip(&au).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt();
        (rn / bn).as_f64()
    }
}

/// Mean-zero solution of `-∇*·ā∇u = ∇*·h` for a constant SPD matrix `ā`.
pub fn solve_constant<T: Real>(
    abar: &Matrix<T>,
    h: &EdgeField<T>,
    cfg: &SolveConfig,
) -> Result<NodeField<T>> {
    Ok(ConstantSolver::new(*h.grid(), abar, cfg)?.solve(h)?.0)
}

