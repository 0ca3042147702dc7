//! Discrete differential calculus on the torus.
//!
//! Sign conventions: `(∇u)_i(x) = u(x+e_i) - u(x)` and
//! `(∇*·F)(x) = Σ_i F_i(x) - F_i(x-e_i)`, so that summation by parts reads
//! `Σ_x ∇u(x)·F(x) = -Σ_x u(x) (∇*·F)(x)`; `-∇*·` is the adjoint of `∇`.

use crate::lattice::{EdgeField, NodeField};
use crate::scalar::Scalar;

/// Forward discrete gradient.
pub fn forward_gradient<T: Scalar>(u: &NodeField<T>) -> EdgeField<T> {
    let grid = *u.grid();
    let d = grid.dim();
    let vals = u.values();
    let mut out = vec![T::zero(); grid.edge_count()];
    for x in 0..grid.node_count() {
        for k in 0..d {
            out[x * d + k] = vals[grid.forward(x, k)] - vals[x];
        }
    }
    EdgeField::from_values(grid, out).expect("edge field length")
}

/// Backward discrete divergence `∇*·F`.
pub fn backward_divergence<T: Scalar>(f: &EdgeField<T>) -> NodeField<T> {
    let grid = *f.grid();
    let mut out = vec![T::zero(); grid.node_count()];
    divergence_into(f.values(), &grid, &mut out);
    NodeField::from_values(grid, out).expect("node field length")
}

pub(crate) fn divergence_into<T: Scalar>(
    f: &[T],
    grid: &crate::lattice::TorusGrid,
    out: &mut [T],
) {
    let d = grid.dim();
    out.iter_mut().for_each(|v| *v = T::zero());
    for x in 0..grid.node_count() {
        for k in 0..d {
            let v = f[x * d + k];
            out[x] += v;
            out[grid.forward(x, k)] -= v;
        }
    }
}

/// `-∇*·a∇u` for a diagonal conductance field `a`, i.e.
/// `Σ_{z∼x} a(x,z) (u(x) - u(z))`.
pub fn apply_operator<T: Scalar>(a: &EdgeField<T>, u: &NodeField<T>) -> NodeField<T> {
    let grid = *u.grid();
    assert_eq!(&grid, a.grid(), "coefficient and field on different grids");
    let mut out = vec![T::zero(); grid.node_count()];
    apply_operator_into(a.values(), u.values(), &grid, &mut out);
    NodeField::from_values(grid, out).expect("node field length")
}

pub(crate) fn apply_operator_into<T: Scalar>(
    a: &[T],
    u: &[T],
    grid: &crate::lattice::TorusGrid,
    out: &mut [T],
) {
    let d = grid.dim();
    out.iter_mut().for_each(|v| *v = T::zero());
    for x in 0..grid.node_count() {
        let ux = u[x];
        for k in 0..d {
            let y = grid.forward(x, k);
            let flux = a[x * d + k] * (ux - u[y]);
            out[x] += flux;
            out[y] -= flux;
        }
    }
}

/// `u(· + e_axis)`.
pub fn shift_forward<T: Scalar>(u: &NodeField<T>, axis: usize) -> NodeField<T> {
    let grid = *u.grid();
    let vals = u.values();
    let out = (0..grid.node_count()).map(|x| vals[grid.forward(x, axis)]).collect();
    NodeField::from_values(grid, out).expect("node field length")
}

/// `u(· - e_axis)`.
pub fn shift_backward<T: Scalar>(u: &NodeField<T>, axis: usize) -> NodeField<T> {
    let grid = *u.grid();
    let vals = u.values();
    let out = (0..grid.node_count()).map(|x| vals[grid.backward(x, axis)]).collect();
    NodeField::from_values(grid, out).expect("node field length")
}

/// Single-direction forward difference `∇_axis u`.
pub fn forward_difference<T: Scalar>(u: &NodeField<T>, axis: usize) -> NodeField<T> {
    let grid = *u.grid();
    let vals = u.values();
    let out = (0..grid.node_count())
        .map(|x| vals[grid.forward(x, axis)] - vals[x])
        .collect();
    NodeField::from_values(grid, out).expect("node field length")
}

/// Single-direction backward difference `∇*_axis u = u(x) - u(x - e_axis)`.
pub fn backward_difference<T: Scalar>(u: &NodeField<T>, axis: usize) -> NodeField<T> {
    let grid = *u.grid();
    let vals = u.values();
    let out = (0..grid.node_count())
        .map(|x| vals[x] - vals[grid.backward(x, axis)])
        .collect();
    NodeField::from_values(grid, out).expect("node field length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusGrid;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i64>;

    fn grid(d: usize, l: usize) -> TorusGrid {
        TorusGrid::new(d, l).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid(3, 3);
        let u = NodeField::constant(g, 2.5);
        assert!(forward_gradient(&u).values().iter().all(|&v| v == 0.0));
        let f = EdgeField::constant(g, -1.25);
        assert!(backward_divergence(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_hand_values() {
        let g = grid(1, 3);
        let u = NodeField::from_values(g, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(forward_gradient(&u).values(), &[1.0, -1.0, 0.0]);

        let g = grid(1, 4);
        let a = EdgeField::constant(g, 1.0);
        let u = NodeField::from_values(g, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(apply_operator(&a, &u).values(), &[2.0, -1.0, 0.0, -1.0]);
    }

    /// Componentwise brute force of `Σ ∇u·F` and `Σ u ∇*·F` straight from
    /// coordinates, in exact rational arithmetic.
    #[test]
    fn summation_by_parts_exact_on_3d_grid() {
        let g = grid(3, 3);
        let n = g.node_count();
        let u_vals: Vec<Q> = (0..n).map(|i| Q::new((i * 7 % 11) as i64 - 5, 3)).collect();
        let f_vals: Vec<Q> = (0..n * 3).map(|i| Q::new((i * 5 % 13) as i64 - 6, 7)).collect();
        let u = NodeField::from_values(g, u_vals.clone()).unwrap();
        let f = EdgeField::from_values(g, f_vals.clone()).unwrap();

        let at = |c: [i64; 3]| g.index(&c);
        let mut lhs = Q::from_integer(0);
        let mut rhs = Q::from_integer(0);
        for x0 in 0..3i64 {
            for x1 in 0..3i64 {
                for x2 in 0..3i64 {
                    let c = [x0, x1, x2];
                    let x = at(c);
                    for k in 0..3 {
                        let mut up = c;
                        up[k] += 1;
                        let mut down = c;
                        down[k] -= 1;
                        lhs += (u_vals[at(up)] - u_vals[x]) * f_vals[x * 3 + k];
                        rhs += u_vals[x] * (f_vals[x * 3 + k] - f_vals[at(down) * 3 + k]);
                    }
                }
            }
        }
        assert_eq!(lhs, -rhs);
        assert_eq!(forward_gradient(&u).dot(&f), lhs);
        assert_eq!(u.dot(&backward_divergence(&f)), rhs);
        assert_eq!(backward_divergence(&f).sum(), Q::from_integer(0));
    }

    #[test]
    fn operator_is_minus_divergence_of_flux_exactly() {
        let g = grid(2, 4);
        let n = g.node_count();
        let a = EdgeField::from_values(g, (0..2 * n).map(|i| Q::new(1 + (i % 3) as i64, 3)).collect())
            .unwrap();
        let u = NodeField::from_values(g, (0..n).map(|i| Q::from_integer((i * i % 7) as i64)).collect())
            .unwrap();
        let direct = apply_operator(&a, &u);
        let composed = backward_divergence(&forward_gradient(&u).mul_diagonal(&a))
            .map(|v| -v);
        assert_eq!(direct, composed);
    }

    fn field_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, len)
    }

    proptest! {
        #[test]
        fn summation_by_parts_in_floating_point(
            u in field_strategy(64), f in field_strategy(128)
        ) {
            let g = grid(2, 8);
            let u = NodeField::from_values(g, u).unwrap();
            let f = EdgeField::from_values(g, f).unwrap();
            let lhs = forward_gradient(&u).dot(&f);
            let rhs = -u.dot(&backward_divergence(&f));
            let scale = forward_gradient(&u).norm() * f.norm() + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            prop_assert!(backward_divergence(&f).sum().abs() < 1e-12);
        }

        #[test]
        fn operator_symmetric_and_coercive(
            u in field_strategy(64), v in field_strategy(64), raw in proptest::collection::vec(0.5f64..1.0, 128)
        ) {
            let g = grid(2, 8);
            let a = EdgeField::from_values(g, raw).unwrap();
            let u = NodeField::from_values(g, u).unwrap();
            let v = NodeField::from_values(g, v).unwrap();
            let auv = apply_operator(&a, &u).dot(&v);
            let uav = u.dot(&apply_operator(&a, &v));
            prop_assert!((auv - uav).abs() < 1e-12);
            let energy = u.dot(&apply_operator(&a, &u));
            let grad = forward_gradient(&u);
            prop_assert!(energy >= 0.5 * grad.dot(&grad) - 1e-12);
        }

        #[test]
        fn translation_equivariance(
            u in field_strategy(27), raw in proptest::collection::vec(0.5f64..1.0, 81),
            s0 in -3i64..3, s1 in -3i64..3, s2 in -3i64..3
        ) {
            let g = grid(3, 3);
            let u = NodeField::from_values(g, u).unwrap();
            let a = EdgeField::from_values(g, raw).unwrap();
            let shift = [s0, s1, s2];
            prop_assert_eq!(
                forward_gradient(&u.translated(&shift)),
                forward_gradient(&u).translated(&shift)
            );
            // Accumulation order changes with the shift, so allow rounding.
            let lhs = apply_operator(&a.translated(&shift), &u.translated(&shift));
            let rhs = apply_operator(&a, &u).translated(&shift);
            prop_assert!(lhs.sub(&rhs).max_abs() < 1e-14);
        }

        #[test]
        fn gradient_is_linear(u in field_strategy(16), v in field_strategy(16)) {
            let g = grid(2, 4);
            let u = NodeField::from_values(g, u).unwrap();
            let v = NodeField::from_values(g, v).unwrap();
            let lhs = forward_gradient(&u.add(&v));
            let rhs = forward_gradient(&u).add(&forward_gradient(&v));
            prop_assert!(lhs.sub(&rhs).max_abs() < 1e-14);
        }
    }

    #[test]
    fn single_direction_differences_match_full_operators() {
        let g = grid(2, 5);
        let u = NodeField::<f64>::sample(g, 0.2, |p| (p[0] * 3.0).sin() + p[1] * p[1]);
        let grad = forward_gradient(&u);
        for k in 0..2 {
            assert_eq!(forward_difference(&u, k), grad.component(k));
            let back = backward_difference(&u, k);
            let manual = u.sub(&shift_backward(&u, k));
            assert_eq!(back, manual);
            assert_eq!(shift_backward(&shift_forward(&u, k), k), u);
        }
    }
}
