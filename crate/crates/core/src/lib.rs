//! Numerical laboratory for fluctuations in discrete stochastic homogenization.
//!
//! The crate works on the periodic lattice `Z^d_L` with iid random conductances
//! and provides
//!
//! * [`lattice`]: torus geometry, field containers and the discrete calculus
//!   (`∇`, `∇*·`, `-∇*·a∇`);
//! * [`random_fields`]: counter-based sampling of conductance fields and
//!   single-edge resampling;
//! * [`solver`]: CG and spectral solvers for `-∇*·a∇u = ∇*·h` on the torus, plus
//!   Helmholtz and Leray projections;
//! * [`correctors`]: correctors, fluxes, flux correctors, the homogenized matrix
//!   and the homogenization commutator;
//! * [`stats`]: fluctuation functionals, RVE and Green-Kubo estimators of the
//!   fluctuation tensor, normality metrics and log-log scaling fits.
//!
//! The lattice, solver and corrector layers are generic over the scalar type.
//! Statistics are computed in `f64`. The aliases at the crate root fix the
//! scalar to `f64`, which is what the experiment runner uses.

pub mod correctors;
pub mod error;
pub mod lattice;
pub mod matrix;
pub mod random_fields;
pub mod scalar;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::TorusGrid;
pub use matrix::Matrix;
pub use scalar::{Real, Scalar};

pub type NodeField = lattice::NodeField<f64>;
pub type EdgeField = lattice::EdgeField<f64>;
pub type MatrixField = lattice::MatrixField<f64>;
pub type CoefMatrix = matrix::Matrix<f64>;
pub type CorrectorPack = correctors::CorrectorPack<f64>;
pub type CommutatorField = correctors::CommutatorField<f64>;
pub type FluxCorrector = correctors::FluxCorrector<f64>;

pub type NodeField32 = lattice::NodeField<f32>;
pub type EdgeField32 = lattice::EdgeField<f32>;
pub type CorrectorPack32 = correctors::CorrectorPack<f32>;
