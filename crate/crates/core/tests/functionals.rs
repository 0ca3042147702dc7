use homfluct::correctors::CorrectorPack;
use homfluct::lattice::{EdgeField, MatrixField, TorusGrid};
use homfluct::random_fields::{sample_field, ConductanceLaw, SeedSpec, StreamPurpose};
use homfluct::solver::{Projector, SolveConfig};
use homfluct::stats::{
    corrector_functionals, corrector_functionals_discrete, j0, j0_functional, solution_functionals,
    ProfileKind, SolutionProblem, TestFunction,
};
use homfluct::{Error, Matrix};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn field(d: usize, l: usize, seed: u64) -> EdgeField<f64> {
    let g = TorusGrid::new(d, l).unwrap();
    sample_field::<f64>(g, &ConductanceLaw::default(), SeedSpec::new(seed, 0, StreamPurpose::Field))
}

fn random_tensor(grid: TorusGrid, seed: u64) -> MatrixField<f64> {
    let d = grid.dim();
    let n = grid.node_count() * d * d;
    let vals = (0..n).map(|k| ((k as f64 + 1.0) * (seed as f64 * 0.731 + 0.17)).sin()).collect();
    MatrixField::from_values(grid, vals).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn zero_commutator_gives_zero() {
    let g = TorusGrid::new(2, 16).unwrap();
    let a = EdgeField::constant(g, 0.6);
    let pack = CorrectorPack::build(&a, &SolveConfig::default(), false).unwrap();
    let xi = pack.commutator(&Matrix::scaled_identity(2, 0.6));
    let bump = TestFunction::default_bump(2);
    let amp = Matrix::from_row_major(2, vec![1.0, 0.3, -0.2, 0.5]).unwrap();
    assert_eq!(j0_functional(&xi, &bump, &amp).unwrap(), 0.0);
    let cf = corrector_functionals(&pack, &bump, &amp, &pack.abar).unwrap();
    assert!(cf.j1.abs() < 1e-14 && cf.j2.abs() < 1e-14);
}

#[test]
fn constant_test_function_annihilates_centered_commutator() {
    let a = field(2, 16, 3);
    let pack = CorrectorPack::build(&a, &SolveConfig::default(), false).unwrap();
    let xi = pack.commutator(&pack.abar);
    let whole = TestFunction::new(ProfileKind::Constant, vec![0.5, 0.5], 1.0).unwrap();
    let amp = Matrix::from_row_major(2, vec![0.7, -1.1, 0.4, 2.0]).unwrap();
    let v = j0_functional(&xi, &whole, &amp).unwrap();
    assert!(v.abs() < 100.0 * TOL, "{v}");
}

#[test]
fn wide_support_is_rejected() {
    let a = field(2, 16, 3);
    let pack = CorrectorPack::build(&a, &SolveConfig::default(), false).unwrap();
    let xi = pack.commutator(&pack.abar);
    let wide = TestFunction::new(ProfileKind::GaussianBump, vec![0.5, 0.5], 0.2).unwrap();
    assert!(matches!(
        j0_functional(&xi, &wide, &Matrix::identity(2)),
        Err(Error::SupportOverflow { .. })
    ));
}

#[test]
fn helmholtz_and_leray_identities_hold_per_realization() {
    let cfg = SolveConfig::default();
    for seed in 0..3 {
        let a = field(2, 24, 40 + seed);
        let pack = CorrectorPack::build(&a, &cfg, false).unwrap();
        let reference = pack.abar.symmetrized();
        let xi = pack.commutator(&reference);
        let grid = *a.grid();
        let f = random_tensor(grid, seed + 1);
        let projector = Projector::new(grid, &reference, &cfg).unwrap();
        let rows_h: Vec<_> = (0..2).map(|i| projector.helmholtz(&f.row(i)).unwrap()).collect();
        let rows_l: Vec<_> = (0..2).map(|i| projector.leray(&f.row(i)).unwrap()).collect();
        let ph = MatrixField::from_rows(&rows_h).unwrap();
        let pl = MatrixField::from_rows(&rows_l).unwrap();
        let cf = corrector_functionals_discrete(&pack, &f, &reference);
        let scale = 1.0 + cf.j1.abs() + cf.j2.abs();
        assert!((cf.j1 + j0(&xi, &ph)).abs() < 100.0 * TOL * scale, "{} vs {}", cf.j1, -j0(&xi, &ph));
        assert!((cf.j2 - j0(&xi, &pl)).abs() < 100.0 * TOL * scale, "{} vs {}", cf.j2, j0(&xi, &pl));
    }
}

#[test]
fn pathwise_identity_holds_per_realization() {
    let cfg = SolveConfig::default();
    let bump = TestFunction::default_bump(2);
    let dipole = TestFunction::new(ProfileKind::Dipole, vec![0.45, 0.55], 0.1).unwrap();
    for seed in 0..4 {
        let a = field(2, 32, 70 + seed);
        let pack = CorrectorPack::build(&a, &cfg, false).unwrap();
        let reference = if seed % 2 == 0 { pack.abar.symmetrized() } else { Matrix::scaled_identity(2, 0.72) };
        let problem = SolutionProblem::from_tests(
            *a.grid(),
            (&bump, &[1.0, 0.0]),
            (&dipole, &[0.3, 1.0]),
            &reference,
            &cfg,
        )
        .unwrap();
        let s = problem.evaluate(&a, &pack.commutator(problem.reference())).unwrap();
        assert!(s.pathwise_discrepancy() < 100.0 * TOL, "{}", s.pathwise_discrepancy());
        assert!(s.i1.is_finite() && s.i2.is_finite() && s.e0_raw().is_finite());
    }
}

#[test]
fn homogeneous_medium_has_no_expansion_error() {
    let g = TorusGrid::new(2, 32).unwrap();
    let a = EdgeField::constant(g, 0.8);
    let bump = TestFunction::default_bump(2);
    let f = bump.vector(g, &[1.0, 0.0]).unwrap();
    let s = solution_functionals(&a, &f, &f, &Matrix::scaled_identity(2, 0.8), &SolveConfig::default()).unwrap();
    assert!(s.e0_flux.abs() < 1e-12 && s.e0_commutator.abs() < 1e-12);
    assert!(s.pathwise_lhs.abs() < 1e-9);
    assert!(s.i1 < 0.0);
    assert!(close(s.i2, 0.8 * s.i1, 1e-12));
}

#[test]
fn one_dimensional_i1_matches_closed_form() {
    let cfg = SolveConfig::default();
    for (l, seed) in [(16usize, 1u64), (40, 2)] {
        let a = field(1, l, seed);
        let g = *a.grid();
        let eps = 1.0 / l as f64;
        let bump = TestFunction::default_bump(1);
        let dip = TestFunction::new(ProfileKind::Dipole, vec![0.4], 0.09).unwrap();
        let f = bump.vector(g, &[1.0]).unwrap();
        let gg = dip.vector(g, &[1.0]).unwrap();
        let s = solution_functionals(&a, &f, &gg, &Matrix::identity(1), &cfg).unwrap();

        // a ∇U + ε f is constant along the ring.
        let av = a.values();
        let fv = f.values();
        let inv: f64 = av.iter().map(|v| 1.0 / v).sum();
        let c = eps * fv.iter().zip(av).map(|(f, a)| f / a).sum::<f64>() / inv;
        let i1: f64 = (0..l).map(|x| gg.values()[x] * (c - eps * fv[x]) / av[x]).sum::<f64>() * eps.powf(-0.5);
        assert!(close(s.i1, i1, 1e-9), "{} vs {}", s.i1, i1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn functionals_are_linear(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let cfg = SolveConfig::default();
        let a = field(2, 12, seed);
        let grid = *a.grid();
        let pack = CorrectorPack::build(&a, &cfg, false).unwrap();
        let reference = pack.abar.symmetrized();
        let xi = pack.commutator(&reference);
        let f = random_tensor(grid, seed + 7);
        let h = random_tensor(grid, seed + 11);
        let comb = f.scale(alpha).add(&h);
        let lin = |x: f64, y: f64, z: f64| close(x, alpha * y + z, 1e-12);
        prop_assert!(lin(j0(&xi, &comb), j0(&xi, &f), j0(&xi, &h)));
        let (cc, cf, ch) = (
            corrector_functionals_discrete(&pack, &comb, &reference),
            corrector_functionals_discrete(&pack, &f, &reference),
            corrector_functionals_discrete(&pack, &h, &reference),
        );
        prop_assert!(lin(cc.j1, cf.j1, ch.j1));
        prop_assert!(lin(cc.j2, cf.j2, ch.j2));

        let fv = EdgeField::from_values(grid, (0..grid.edge_count()).map(|k| (k as f64 * 0.37 + seed as f64).cos()).collect()).unwrap();
        let gv = EdgeField::from_values(grid, (0..grid.edge_count()).map(|k| (k as f64 * 0.11).sin()).collect()).unwrap();
        let p1 = SolutionProblem::new(grid, &fv, &gv, &reference, &cfg).unwrap();
        let p2 = SolutionProblem::new(grid, &fv, &gv.scale(alpha).add(&fv), &reference, &cfg).unwrap();
        let p3 = SolutionProblem::new(grid, &fv, &fv, &reference, &cfg).unwrap();
        let (s1, s2, s3) = (p1.evaluate(&a, &xi).unwrap(), p2.evaluate(&a, &xi).unwrap(), p3.evaluate(&a, &xi).unwrap());
        prop_assert!(lin(s2.i1, s1.i1, s3.i1));
        prop_assert!(lin(s2.i2, s1.i2, s3.i2));
        prop_assert!(lin(s2.e0_raw(), s1.e0_raw(), s3.e0_raw()));
    }
}
