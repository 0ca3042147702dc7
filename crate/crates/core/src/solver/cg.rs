//! Preconditioned conjugate gradients on the mean-zero subspace.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::spectral::SpectralSolver;

pub(crate) enum Preconditioner<'a, T: Real> {
    Identity,
    /// Inverse diagonal of the operator.
    Jacobi(Vec<T>),
    Spectral(&'a SpectralSolver<T>),
}

impl<T: Real> Preconditioner<'_, T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((z, &r), &w) in z.iter_mut().zip(r).zip(inv) {
                    *z = r * w;
                }
            }
            Preconditioner::Spectral(s) => s.solve_into(r, z),
        }
        remove_mean(z);
    }
}

pub(crate) struct CgOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn remove_mean<T: Real>(v: &mut [T]) {
    let m = v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap();
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Solves `A x = b` for a symmetric operator that is positive definite on
/// mean-zero fields. The returned solution has mean zero.
///
/// The iteration stops when the true residual satisfies
/// `‖b - A x‖ ≤ tol ‖b‖`; the recursive residual is only used to decide when
/// to check.
pub(crate) fn solve<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    precond: &Preconditioner<'_, T>,
    b: &[T],
    initial: Option<&[T]>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<CgOutcome<T>> {
    let n = b.len();
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let b_norm = dot(&rhs, &rhs).sqrt();
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            solution: vec![T::zero(); n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let tol = T::from_f64_lossy(tolerance);

    let mut x = match initial {
        Some(x0) => {
            let mut x = x0.to_vec();
            remove_mean(&mut x);
            x
        }
        None => vec![T::zero(); n],
    };
    let mut ax = vec![T::zero(); n];
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];

    let true_residual = |x: &[T], ax: &mut [T], r: &mut [T]| -> T {
        apply(x, ax);
        for i in 0..n {
            r[i] = rhs[i] - ax[i];
        }
        remove_mean(r);
        dot(r, r).sqrt() / b_norm
    };

    let mut iterations = 0usize;
    let mut rel = true_residual(&x, &mut ax, &mut r);
    let mut best = (rel, x.clone());
    loop {
        if rel <= tol {
            return Ok(CgOutcome {
                solution: x,
                iterations,
                relative_residual: rel.as_f64(),
            });
        }
        if iterations >= max_iterations {
            break;
        }
        // (Re)start from the true residual.
        precond.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iterations {
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            let recursive = dot(&r, &r).sqrt() / b_norm;
            if recursive <= tol {
                break;
            }
            precond.apply(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        remove_mean(&mut x);
        let previous = rel;
        rel = true_residual(&x, &mut ax, &mut r);
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel > tol && rel >= previous * T::from_f64_lossy(0.999) {
            // No progress across a restart: stagnation at working precision.
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations,
        residual: best.0.as_f64(),
        best: best.1.iter().map(|v| v.as_f64()).collect(),
    })
}
