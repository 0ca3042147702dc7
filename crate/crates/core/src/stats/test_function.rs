//! Smooth test functions on the unit box, sampled at `ε x` for lattice nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{EdgeField, MatrixField, NodeField, TorusGrid};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `exp(-|y|²/(2w²))`.
    GaussianBump,
    /// `Π_k ψ(y_k/(4w))` with `ψ(t) = exp(1 - 1/(1 - t²))` on `|t| < 1`.
    TensorBump,
    /// `(y_1/w) exp(-|y|²/(2w²))`.
    Dipole,
    /// Identically one on the whole box. Only meant for identity checks.
    Constant,
}

/// Scalar profile `ζ` of a test function; `y` is the minimum-image
/// displacement from `center` on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: ProfileKind,
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestFunction {
    pub fn new(kind: ProfileKind, center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidInput(format!("width must be positive, got {width}")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("center must be a finite point".into()));
        }
        Ok(Self { kind, center, width })
    }

    /// Gaussian bump of width 1/8 at the box midpoint.
    pub fn default_bump(dim: usize) -> Self {
        Self { kind: ProfileKind::GaussianBump, center: vec![0.5; dim], width: 0.125 }
    }

    /// Radius of the effective support, `4w`; `None` for the constant profile.
    pub fn support_radius(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Constant => None,
            _ => Some(4.0 * self.width),
        }
    }

    pub fn check_support(&self) -> Result<()> {
        match self.support_radius() {
            Some(radius) if radius > 0.5 => Err(Error::SupportOverflow { radius }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let w = self.width;
        let y: Vec<f64> = point
            .iter()
            .zip(&self.center)
            .map(|(p, c)| {
                let t = (p - c).rem_euclid(1.0);
                if t >= 0.5 { t - 1.0 } else { t }
            })
            .collect();
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match self.kind {
            ProfileKind::GaussianBump => (-r2 / (2.0 * w * w)).exp(),
            ProfileKind::Dipole => y[0] / w * (-r2 / (2.0 * w * w)).exp(),
            ProfileKind::TensorBump => y
                .iter()
                .map(|v| {
                    let t = v / (4.0 * w);
                    if t.abs() < 1.0 { (1.0 - 1.0 / (1.0 - t * t)).exp() } else { 0.0 }
                })
                .product(),
            ProfileKind::Constant => 1.0,
        }
    }

    /// `ζ(ε x)` with `ε = 1/side`.
    pub fn sample(&self, grid: TorusGrid) -> Result<NodeField<f64>> {
        if self.center.len() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "test function center has dimension {}, grid has {}",
                self.center.len(),
                grid.dim()
            )));
        }
        self.check_support()?;
        Ok(NodeField::sample(grid, 1.0 / grid.side() as f64, |p| self.eval(p)))
    }

    /// `F(ε x) = ζ(ε x) A`.
    pub fn tensor(&self, grid: TorusGrid, amplitude: &Matrix<f64>) -> Result<MatrixField<f64>> {
        let d = grid.dim();
        if amplitude.dim() != d {
            return Err(Error::InvalidInput("amplitude matrix has the wrong dimension".into()));
        }
        let z = self.sample(grid)?;
        let mut out = MatrixField::zeros(grid);
        for x in 0..grid.node_count() {
            for i in 0..d {
                for j in 0..d {
                    out.set(x, i, j, z.get(x) * amplitude[(i, j)]);
                }
            }
        }
        Ok(out)
    }

    /// `f(ε x) = ζ(ε x) v`.
    pub fn vector(&self, grid: TorusGrid, amplitude: &[f64]) -> Result<EdgeField<f64>> {
        let d = grid.dim();
        if amplitude.len() != d {
            return Err(Error::InvalidInput("amplitude vector has the wrong dimension".into()));
        }
        let z = self.sample(grid)?;
        let mut out = EdgeField::zeros(grid);
        for x in 0..grid.node_count() {
            for (k, &v) in amplitude.iter().enumerate() {
                out.set(x, k, z.get(x) * v);
            }
        }
        Ok(out)
    }
}

/// `e_1 ⊗ e_1`.
pub fn default_tensor_amplitude(dim: usize) -> Matrix<f64> {
    let mut m = Matrix::zeros(dim);
    m[(0, 0)] = 1.0;
    m
}

/// `e_1`.
pub fn default_vector_amplitude(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    v
}
