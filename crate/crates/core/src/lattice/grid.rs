use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic lattice `Z^d_L = (Z / L Z)^d`.
///
/// Nodes are indexed row-major over `[0, L)^d`: the last coordinate varies
/// fastest, so the stride of axis `k` is `L^(d-1-k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    side: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if side < 2 {
            return Err(Error::InvalidInput("side must be at least 2".into()));
        }
        side.checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidInput(format!("{side}^{dim} nodes overflow")))?;
        Ok(Self { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn node_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() * self.dim
    }

    /// Index distance between neighbors along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    #[inline]
    pub fn coordinate(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.side
    }

    pub fn coords(&self, node: usize) -> Vec<usize> {
        (0..self.dim).map(|k| self.coordinate(node, k)).collect()
    }

    /// Node index of a point; coordinates are reduced modulo `L`.
    pub fn index(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        let side = self.side as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(side) as usize)
    }

    /// `x + e_axis` with periodic wrap.
    #[inline]
    pub fn forward(&self, node: usize, axis: usize) -> usize {
        let s = self.stride(axis);
        if (node / s) % self.side == self.side - 1 {
            node + s - self.side * s
        } else {
            node + s
        }
    }

    /// `x - e_axis` with periodic wrap.
    #[inline]
    pub fn backward(&self, node: usize, axis: usize) -> usize {
        let s = self.stride(axis);
        if (node / s) % self.side == 0 {
            node + self.side * s - s
        } else {
            node - s
        }
    }

    /// `x + shift` for an arbitrary lattice vector.
    pub fn translate(&self, node: usize, shift: &[i64]) -> usize {
        let side = self.side as i64;
        (0..self.dim).fold(0usize, |acc, k| {
            let c = self.coordinate(node, k) as i64 + shift[k];
            acc * self.side + c.rem_euclid(side) as usize
        })
    }

    /// Node containing the continuum point `y ∈ R^d` (lattice units) under the
    /// piecewise-constant extension `v|_{x + [-1/2, 1/2)^d} = v(x)`.
    pub fn node_at(&self, y: &[f64]) -> usize {
        let c: Vec<i64> = y.iter().map(|&t| (t + 0.5).floor() as i64).collect();
        self.index(&c)
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}
