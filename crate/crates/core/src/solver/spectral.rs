//! Fourier diagonalization of constant-coefficient operators on the torus.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::matrix::Matrix;
use crate::scalar::Real;

/// In-place d-dimensional FFT by successive 1-D transforms along each axis.
pub struct NdFft<T: Real> {
    grid: TorusGrid,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> NdFft<T> {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.side()),
            inverse: planner.plan_fft_inverse(grid.side()),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Unnormalized forward transform, `û(θ) = Σ_x u(x) e^{-iθ·x}`.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/L^d` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.inverse);
        let scale = T::one() / T::from_usize(self.grid.node_count()).unwrap();
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }

    fn run(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let side = self.grid.side();
        let n = self.grid.node_count();
        let mut line = vec![Complex::new(T::zero(), T::zero()); side];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        for axis in 0..self.grid.dim() {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(side) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * side;
            for start in (0..n).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (m, v) in line.iter_mut().enumerate() {
                        *v = data[base + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, v) in line.iter().enumerate() {
                        data[base + m * stride] = *v;
                    }
                }
            }
        }
    }

    /// `e^{iθ_k} - 1` for every node frequency and axis, node-major.
    pub fn difference_symbols(&self) -> Vec<Complex<T>> {
        let g = self.grid;
        let d = g.dim();
        let two_pi = T::from_f64_lossy(std::f64::consts::TAU);
        let side = T::from_usize(g.side()).unwrap();
        let mut out = Vec::with_capacity(g.edge_count());
        for node in 0..g.node_count() {
            for k in 0..d {
                let theta = two_pi * T::from_usize(g.coordinate(node, k)).unwrap() / side;
                out.push(Complex::new(theta.cos() - T::one(), theta.sin()));
            }
        }
        out
    }
}

/// Exact solver for `-∇*·ā∇u = b` with a constant symmetric positive
/// definite matrix `ā`, in the mean-zero gauge.
///
/// The symbol is `S(θ) = Σ_jk ā_jk conj(w_j) w_k` with `w_k = e^{iθ_k} - 1`.
pub struct SpectralSolver<T: Real> {
    fft: NdFft<T>,
    inverse_symbol: Vec<T>,
    diff: Vec<Complex<T>>,
}

impl<T: Real> SpectralSolver<T> {
    pub fn new(grid: TorusGrid, abar: &Matrix<T>) -> Result<Self> {
        if abar.dim() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "coefficient matrix is {}x{}, grid dimension is {}",
                abar.dim(),
                abar.dim(),
                grid.dim()
            )));
        }
        if !abar.is_positive_definite() {
            return Err(Error::SingularSymbol);
        }
        let sym = abar.symmetrized();
        let fft = NdFft::new(grid);
        let diff = fft.difference_symbols();
        let d = grid.dim();
        let inverse_symbol = (0..grid.node_count())
            .map(|node| {
                if node == 0 {
                    return T::zero();
                }
                let w = &diff[node * d..(node + 1) * d];
                let mut s = Complex::new(T::zero(), T::zero());
                for j in 0..d {
                    for k in 0..d {
                        s = s + w[j].conj() * w[k] * sym[(j, k)];
                    }
                }
                T::one() / s.re
            })
            .collect();
        Ok(Self { fft, inverse_symbol, diff })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.fft.grid()
    }

    /// Solves for node right-hand side `b`; the mean of `b` is ignored.
    pub fn solve_into(&self, b: &[T], out: &mut [T]) {
        let mut buf: Vec<Complex<T>> = b.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.forward(&mut buf);
        for (v, &s) in buf.iter_mut().zip(&self.inverse_symbol) {
            *v = *v * s;
        }
        self.fft.inverse(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o = v.re;
        }
    }

    /// Solves `-∇*·ā∇u = ∇*·h` directly from the edge field `h`, computing the
    /// divergence in Fourier space: `∇*_j ↔ -conj(w_j)`.
    pub fn solve_divergence_form(&self, h: &[T], out: &mut [T]) {
        let g = *self.grid();
        let d = g.dim();
        let n = g.node_count();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..d {
            for (x, v) in buf.iter_mut().enumerate() {
                *v = Complex::new(h[x * d + j], T::zero());
            }
            self.fft.forward(&mut buf);
            for x in 0..n {
                acc[x] = acc[x] - self.diff[x * d + j].conj() * buf[x];
            }
        }
        for (v, &s) in acc.iter_mut().zip(&self.inverse_symbol) {
            *v = *v * s;
        }
        self.fft.inverse(&mut acc);
        for (o, v) in out.iter_mut().zip(&acc) {
            *o = v.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip_and_delta() {
        let g = TorusGrid::new(3, 4).unwrap();
        let fft = NdFft::<f64>::new(g);
        let orig: Vec<Complex<f64>> =
            (0..64).map(|i| Complex::new((i as f64 * 0.37).sin(), 0.0)).collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
        let mut delta = vec![Complex::new(0.0, 0.0); 64];
        delta[0] = Complex::new(1.0, 0.0);
        fft.forward(&mut delta);
        assert!(delta.iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn plane_wave_matches_direct_dft() {
        let g = TorusGrid::new(2, 6).unwrap();
        let fft = NdFft::<f64>::new(g);
        let mut data: Vec<Complex<f64>> = (0..36)
            .map(|n| {
                let (x0, x1) = (g.coordinate(n, 0) as f64, g.coordinate(n, 1) as f64);
                Complex::new(0.0, std::f64::consts::TAU * (x0 + 2.0 * x1) / 6.0).exp()
            })
            .collect();
        fft.forward(&mut data);
        let peak = g.index(&[1, 2]);
        for (n, v) in data.iter().enumerate() {
            let expected = if n == peak { 36.0 } else { 0.0 };
            assert!((v.re - expected).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let g = TorusGrid::new(2, 4).unwrap();
        let bad = Matrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(SpectralSolver::<f64>::new(g, &bad), Err(Error::SingularSymbol)));
    }
}
