//! Discrete Helmholtz and Leray projections for a constant matrix `ā`.
//!
//! `P̄_H F = ∇w` with `∇*·ā∇w = ∇*·F`, and `P̄_L F = F - P̄_H(āF)`. For the
//! symmetric matrices used here the adjoint projections coincide with these.

use crate::error::Result;
use crate::lattice::{forward_gradient, EdgeField, TorusGrid};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::solver::{ConstantSolver, SolveConfig};

/// Reusable projector: one spectral setup, many projections.
pub struct Projector<T: Real> {
    solver: ConstantSolver<T>,
}

impl<T: Real> Projector<T> {
    pub fn new(grid: TorusGrid, abar: &Matrix<T>, cfg: &SolveConfig) -> Result<Self> {
        Ok(Self { solver: ConstantSolver::new(grid, abar, cfg)? })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        self.solver.matrix()
    }

    pub fn helmholtz(&self, f: &EdgeField<T>) -> Result<EdgeField<T>> {
        // -∇*·ā∇u = ∇*·F gives u = -w.
        let (u, _) = self.solver.solve(f)?;
        Ok(forward_gradient(&u).scale(-T::one()))
    }

    pub fn leray(&self, f: &EdgeField<T>) -> Result<EdgeField<T>> {
        let h = self.helmholtz(&f.mul_matrix(self.matrix()))?;
        Ok(f.sub(&h))
    }
}

/// `P̄_H F`.
pub fn helmholtz_project<T: Real>(
    abar: &Matrix<T>,
    f: &EdgeField<T>,
    cfg: &SolveConfig,
) -> Result<EdgeField<T>> {
    Projector::new(*f.grid(), abar, cfg)?.helmholtz(f)
}

/// `P̄_L F = F - P̄_H(āF)`.
pub fn leray_project<T: Real>(
    abar: &Matrix<T>,
    f: &EdgeField<T>,
    cfg: &SolveConfig,
) -> Result<EdgeField<T>> {
    Projector::new(*f.grid(), abar, cfg)?.leray(f)
}
