use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::matrix::Matrix;
use crate::scalar::{Real, Scalar};

/// One scalar value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField<T> {
    grid: TorusGrid,
    values: Vec<T>,
}

/// `d` values per node; value `i` at node `x` lives on the edge `(x, x + e_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField<T> {
    grid: TorusGrid,
    values: Vec<T>,
}

/// `d × d` values per node, entry `(i, j)` stored at `x * d * d + i * d + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField<T> {
    grid: TorusGrid,
    values: Vec<T>,
}

macro_rules! field_common {
    ($name:ident, $per_node:expr) => {
        impl<T: Scalar> $name<T> {
            pub fn zeros(grid: TorusGrid) -> Self {
                Self::constant(grid, T::zero())
            }

            pub fn constant(grid: TorusGrid, value: T) -> Self {
                let per_node: fn(&TorusGrid) -> usize = $per_node;
                Self {
                    values: vec![value; grid.node_count() * per_node(&grid)],
                    grid,
                }
            }

            pub fn from_values(grid: TorusGrid, values: Vec<T>) -> Result<Self> {
                let per_node: fn(&TorusGrid) -> usize = $per_node;
                let expected = grid.node_count() * per_node(&grid);
                if values.len() != expected {
                    return Err(Error::GridMismatch(format!(
                        "{} expects {expected} values, got {}",
                        stringify!($name),
                        values.len()
                    )));
                }
                Ok(Self { grid, values })
            }

            pub fn grid(&self) -> &TorusGrid {
                &self.grid
            }

            /// Values stored per node.
            pub fn components(&self) -> usize {
                let per_node: fn(&TorusGrid) -> usize = $per_node;
                per_node(&self.grid)
            }

            pub fn values(&self) -> &[T] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [T] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<T> {
                self.values
            }

            pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> $name<U> {
                $name {
                    grid: self.grid,
                    values: self.values.iter().map(|&v| f(v)).collect(),
                }
            }

            pub fn add(&self, other: &Self) -> Self {
                self.zip_with(other, |a, b| a + b)
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.zip_with(other, |a, b| a - b)
            }

            pub fn scale(&self, s: T) -> Self {
                self.map(|v| v * s)
            }

            pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
                assert_eq!(self.grid, other.grid, "fields live on different grids");
                Self {
                    grid: self.grid,
                    values: self
                        .values
                        .iter()
                        .zip(&other.values)
                        .map(|(&a, &b)| f(a, b))
                        .collect(),
                }
            }

            /// Euclidean inner product of the flat value arrays.
            pub fn dot(&self, other: &Self) -> T {
                assert_eq!(self.grid, other.grid, "fields live on different grids");
                let mut acc = T::zero();
                for (&a, &b) in self.values.iter().zip(&other.values) {
                    acc += a * b;
                }
                acc
            }

            /// Shifts the field by a lattice vector: `out(x + shift) = self(x)`.
            pub fn translated(&self, shift: &[i64]) -> Self {
                let m = self.components();
                let mut values = self.values.clone();
                for node in 0..self.grid.node_count() {
                    let target = self.grid.translate(node, shift);
                    values[target * m..(target + 1) * m]
                        .copy_from_slice(&self.values[node * m..(node + 1) * m]);
                }
                Self { grid: self.grid, values }
            }
        }

        impl<T: Real> $name<T> {
            pub fn norm(&self) -> T {
                self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
            }

            pub fn max_abs(&self) -> T {
                self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }

            pub fn to_f64(&self) -> $name<f64> {
                $name {
                    grid: self.grid,
                    values: self.values.iter().map(|v| v.as_f64()).collect(),
                }
            }
        }
    };
}

field_common!(NodeField, |_g| 1);
field_common!(EdgeField, |g| g.dim());
field_common!(MatrixField, |g| g.dim() * g.dim());

impl<T: Scalar> NodeField<T> {
    #[inline]
    pub fn get(&self, node: usize) -> T {
        self.values[node]
    }

    #[inline]
    pub fn set(&mut self, node: usize, value: T) {
        self.values[node] = value;
    }

    pub fn sum(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.values {
            acc += v;
        }
        acc
    }
}

impl<T: Real> NodeField<T> {
    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.values.len()).unwrap()
    }

    /// Subtracts the mean in place (mean-zero gauge on the torus).
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }

    /// Samples a continuum function at the lattice points scaled by `spacing`.
    pub fn sample(grid: TorusGrid, spacing: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut point = vec![0.0; grid.dim()];
        let values = (0..grid.node_count())
            .map(|n| {
                for (k, p) in point.iter_mut().enumerate() {
                    *p = spacing * grid.coordinate(n, k) as f64;
                }
                T::from_f64_lossy(f(&point))
            })
            .collect();
        Self { grid, values }
    }
}

impl<T: Scalar> EdgeField<T> {
    #[inline]
    pub fn get(&self, node: usize, axis: usize) -> T {
        self.values[node * self.grid.dim() + axis]
    }

    #[inline]
    pub fn set(&mut self, node: usize, axis: usize, value: T) {
        let d = self.grid.dim();
        self.values[node * d + axis] = value;
    }

    /// Component `axis` as a node field.
    pub fn component(&self, axis: usize) -> NodeField<T> {
        let d = self.grid.dim();
        NodeField {
            grid: self.grid,
            values: (0..self.grid.node_count()).map(|n| self.values[n * d + axis]).collect(),
        }
    }

    pub fn from_components(components: &[NodeField<T>]) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?
            .grid();
        if components.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "need {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        let mut out = Self::zeros(grid);
        for (k, c) in components.iter().enumerate() {
            grid.check_same(c.grid())?;
            for n in 0..grid.node_count() {
                out.set(n, k, c.get(n));
            }
        }
        Ok(out)
    }

    /// Pointwise product with a constant matrix: `(M F)(x) = M F(x)`.
    pub fn mul_matrix(&self, m: &Matrix<T>) -> Self {
        let d = self.grid.dim();
        assert_eq!(m.dim(), d);
        let mut out = Self::zeros(self.grid);
        for n in 0..self.grid.node_count() {
            let v = m.mul_vec(&self.values[n * d..(n + 1) * d]);
            out.values[n * d..(n + 1) * d].copy_from_slice(&v);
        }
        out
    }

    /// Pointwise product with a diagonal coefficient field `a`.
    pub fn mul_diagonal(&self, a: &EdgeField<T>) -> Self {
        self.zip_with(a, |f, c| f * c)
    }

    /// Sum of each component.
    pub fn component_sums(&self) -> Vec<T> {
        let d = self.grid.dim();
        let mut sums = vec![T::zero(); d];
        for chunk in self.values.chunks_exact(d) {
            for (s, &v) in sums.iter_mut().zip(chunk) {
                *s += v;
            }
        }
        sums
    }
}

impl<T: Real> EdgeField<T> {
    pub fn component_means(&self) -> Vec<T> {
        let n = T::from_usize(self.grid.node_count()).unwrap();
        self.component_sums().into_iter().map(|s| s / n).collect()
    }
}

impl<T: Scalar> MatrixField<T> {
    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> T {
        let d = self.grid.dim();
        self.values[node * d * d + i * d + j]
    }

    #[inline]
    pub fn set(&mut self, node: usize, i: usize, j: usize, value: T) {
        let d = self.grid.dim();
        self.values[node * d * d + i * d + j] = value;
    }

    /// Entry `(i, j)` as a node field.
    pub fn entry(&self, i: usize, j: usize) -> NodeField<T> {
        NodeField {
            grid: self.grid,
            values: (0..self.grid.node_count()).map(|n| self.get(n, i, j)).collect(),
        }
    }

    /// Row `i` as an edge field: `x ↦ (M_{i1}(x), …, M_{id}(x))`.
    pub fn row(&self, i: usize) -> EdgeField<T> {
        let d = self.grid.dim();
        let mut out = EdgeField::zeros(self.grid);
        for n in 0..self.grid.node_count() {
            for j in 0..d {
                out.set(n, j, self.get(n, i, j));
            }
        }
        out
    }

    pub fn from_rows(rows: &[EdgeField<T>]) -> Result<Self> {
        let grid = *rows
            .first()
            .ok_or_else(|| Error::InvalidInput("no rows".into()))?
            .grid();
        let d = grid.dim();
        if rows.len() != d {
            return Err(Error::GridMismatch(format!("need {d} rows, got {}", rows.len())));
        }
        let mut out = Self::zeros(grid);
        for (i, r) in rows.iter().enumerate() {
            grid.check_same(r.grid())?;
            for n in 0..grid.node_count() {
                for j in 0..d {
                    out.set(n, i, j, r.get(n, j));
                }
            }
        }
        Ok(out)
    }

    /// `Σ_x F(x) : M(x)`.
    pub fn contract(&self, other: &Self) -> T {
        self.dot(other)
    }
}

impl<T: Real> MatrixField<T> {
    /// Spatial mean as a `d × d` matrix.
    pub fn mean(&self) -> Matrix<T> {
        let d = self.grid.dim();
        let mut m = Matrix::<T>::zeros(d);
        for n in 0..self.grid.node_count() {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += self.get(n, i, j);
                }
            }
        }
        let count = T::from_usize(self.grid.node_count()).unwrap();
        m.map(|v| v / count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_is_checked() {
        let g = TorusGrid::new(2, 3).unwrap();
        assert!(NodeField::from_values(g, vec![0.0; 9]).is_ok());
        assert!(NodeField::from_values(g, vec![0.0; 8]).is_err());
        assert!(EdgeField::from_values(g, vec![0.0; 18]).is_ok());
        assert!(MatrixField::from_values(g, vec![0.0; 35]).is_err());
    }

    #[test]
    fn mean_is_exact_for_integers_as_floats() {
        let g = TorusGrid::new(1, 4).unwrap();
        let mut u = NodeField::from_values(g, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(u.mean(), 3.0);
        u.remove_mean();
        assert_eq!(u.sum(), 0.0);
    }

    #[test]
    fn rows_and_components_roundtrip() {
        let g = TorusGrid::new(2, 3).unwrap();
        let m = MatrixField::from_values(g, (0..36).map(f64::from).collect()).unwrap();
        let rows: Vec<_> = (0..2).map(|i| m.row(i)).collect();
        assert_eq!(MatrixField::from_rows(&rows).unwrap(), m);
        let e = rows[1].clone();
        let comps: Vec<_> = (0..2).map(|k| e.component(k)).collect();
        assert_eq!(EdgeField::from_components(&comps).unwrap(), e);
    }
}
