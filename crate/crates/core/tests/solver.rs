use homfluct::lattice::{apply_operator, backward_divergence, forward_gradient, EdgeField, NodeField, TorusGrid};
use homfluct::random_fields::{sample_field, ConductanceLaw, SeedSpec, StreamPurpose};
use homfluct::solver::{
    helmholtz_project, leray_project, solve_constant, solve_variable, ConstantBackend,
    PreconditionerKind, Projector, SolveConfig, VariableSolver,
};
use homfluct::{Error, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn random_edge(grid: TorusGrid, seed: u64) -> EdgeField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..grid.edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    EdgeField::from_values(grid, vals).unwrap()
}

fn random_node(grid: TorusGrid, seed: u64) -> NodeField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    NodeField::from_values(grid, vals).unwrap()
}

fn conductances(grid: TorusGrid, seed: u64) -> EdgeField<f64> {
    sample_field(grid, &ConductanceLaw::default(), SeedSpec::new(seed, 0, StreamPurpose::Field))
}

fn residual(a: &EdgeField<f64>, h: &EdgeField<f64>, u: &NodeField<f64>) -> f64 {
    let b = backward_divergence(h);
    apply_operator(a, u).sub(&b).norm() / b.norm()
}

fn rel_diff(x: &NodeField<f64>, y: &NodeField<f64>) -> f64 {
    x.sub(y).norm() / y.norm().max(f64::MIN_POSITIVE)
}

#[test]
fn zero_data_gives_zero_solution() {
    let g = TorusGrid::new(2, 8).unwrap();
    let a = conductances(g, 1);
    let (u, report) = solve_variable(&a, &EdgeField::zeros(g), &SolveConfig::default()).unwrap();
    assert!(u.values().iter().all(|&v| v == 0.0));
    assert_eq!(report.iterations, 0);
    let u = solve_constant(&Matrix::<f64>::identity(2), &EdgeField::zeros(g), &SolveConfig::default()).unwrap();
    assert!(u.values().iter().all(|&v| v == 0.0));
}

#[test]
fn variable_solver_meets_contract_for_each_preconditioner() {
    let g = TorusGrid::new(2, 32).unwrap();
    let a = conductances(g, 2);
    let h = random_edge(g, 3);
    for kind in [PreconditionerKind::None, PreconditionerKind::Jacobi, PreconditionerKind::ConstantCoefficient] {
        let cfg = SolveConfig { preconditioner: kind, ..SolveConfig::default() };
        let (u, report) = solve_variable(&a, &h, &cfg).unwrap();
        assert!(report.relative_residual <= TOL);
        assert!(residual(&a, &h, &u) <= TOL * 1.01);
        assert!(u.mean().abs() < 1e-14);
    }
}

#[test]
fn spectral_preconditioner_is_fast() {
    let g = TorusGrid::new(2, 64).unwrap();
    let a = conductances(g, 4);
    let (_, report) = solve_variable(&a, &random_edge(g, 5), &SolveConfig::default()).unwrap();
    // Condition number is at most 1/λ = 2 for the default law.
    assert!(report.iterations < 40, "{} iterations", report.iterations);
}

#[test]
fn unit_coefficient_matches_spectral_backend_on_single_frequency() {
    let g = TorusGrid::new(2, 16).unwrap();
    let h0 = NodeField::<f64>::sample(g, 1.0 / 16.0, |p| (std::f64::consts::TAU * (p[0] + 2.0 * p[1])).cos());
    let h = EdgeField::from_components(&[h0.clone(), h0.scale(0.5)]).unwrap();
    let a = EdgeField::constant(g, 1.0);
    let (u, _) = solve_variable(&a, &h, &SolveConfig::default()).unwrap();
    let spectral = solve_constant(&Matrix::identity(2), &h, &SolveConfig::default()).unwrap();
    assert!(rel_diff(&u, &spectral) <= 1e-9);
}

#[test]
fn one_dimensional_flux_oracle() {
    // In d = 1 the equation says a∇u + h is constant, with the constant fixed
    // by periodicity: c = Σ(h/a) / Σ(1/a).
    let g = TorusGrid::new(1, 40).unwrap();
    let a = conductances(g, 6);
    let h = random_edge(g, 7);
    let (u, _) = solve_variable(&a, &h, &SolveConfig::default()).unwrap();
    let (av, hv) = (a.values(), h.values());
    let c = av.iter().zip(hv).map(|(a, h)| h / a).sum::<f64>() / av.iter().map(|a| 1.0 / a).sum::<f64>();
    let mut oracle = vec![0.0; 40];
    for x in 0..39 {
        oracle[x + 1] = oracle[x] + (c - hv[x]) / av[x];
    }
    let mut oracle = NodeField::from_values(g, oracle).unwrap();
    oracle.remove_mean();
    assert!(rel_diff(&u, &oracle) <= 1e-9);
}

#[test]
fn constant_backends_agree_with_off_diagonal_matrix() {
    let g = TorusGrid::new(3, 8).unwrap();
    let abar = Matrix::from_row_major(3, vec![0.8, 0.1, 0.0, 0.1, 0.7, -0.05, 0.0, -0.05, 0.9]).unwrap();
    let h = random_edge(g, 8);
    let spectral = solve_constant(&abar, &h, &SolveConfig::default()).unwrap();
    for kind in [PreconditionerKind::None, PreconditionerKind::Jacobi] {
        let cfg = SolveConfig {
            constant_backend: ConstantBackend::Iterative,
            preconditioner: kind,
            ..SolveConfig::default()
        };
        let iterative = solve_constant(&abar, &h, &cfg).unwrap();
        assert!(rel_diff(&iterative, &spectral) <= 10.0 * TOL);
    }
}

#[test]
fn constant_solver_rejects_bad_matrices() {
    let g = TorusGrid::new(2, 4).unwrap();
    let h = random_edge(g, 9);
    let indefinite = Matrix::from_row_major(2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
    assert!(matches!(solve_constant(&indefinite, &h, &SolveConfig::default()), Err(Error::SingularSymbol)));
    let skew = Matrix::from_row_major(2, vec![1.0, 0.5, -0.5, 1.0]).unwrap();
    assert!(matches!(solve_constant(&skew, &h, &SolveConfig::default()), Err(Error::InvalidInput(_))));
    assert!(matches!(helmholtz_project(&indefinite, &h, &SolveConfig::default()), Err(Error::SingularSymbol)));
}

#[test]
fn invalid_config_is_rejected() {
    let g = TorusGrid::new(2, 4).unwrap();
    let a = conductances(g, 10);
    let bad = SolveConfig { tolerance: -1e-8, ..SolveConfig::default() };
    assert!(matches!(solve_variable(&a, &a, &bad), Err(Error::InvalidInput(_))));
    let bad = SolveConfig { max_iterations: 0, ..SolveConfig::default() };
    assert!(matches!(solve_variable(&a, &a, &bad), Err(Error::InvalidInput(_))));
}

#[test]
fn zero_tolerance_stops_at_stagnation() {
    let g = TorusGrid::new(2, 8).unwrap();
    let a = conductances(g, 10);
    let cfg = SolveConfig { tolerance: 0.0, ..SolveConfig::default() };
    match solve_variable(&a, &random_edge(g, 3), &cfg) {
        Err(Error::NonConvergence { residual, .. }) => assert!(residual < 1e-12),
        other => panic!("expected NonConvergence, got {other:?}"),
    }
}

#[test]
fn non_convergence_reports_best_iterate() {
    let g = TorusGrid::new(2, 32).unwrap();
    let a = conductances(g, 11);
    let cfg = SolveConfig { max_iterations: 2, preconditioner: PreconditionerKind::None, ..SolveConfig::default() };
    match solve_variable(&a, &random_edge(g, 12), &cfg) {
        Err(Error::NonConvergence { iterations, residual, best }) => {
            assert!(iterations <= 2);
            assert!(residual < 1.0 && residual > TOL);
            assert_eq!(best.len(), g.node_count());
        }
        other => panic!("expected NonConvergence, got {other:?}"),
    }
}

#[test]
fn uniqueness_from_different_initial_guesses() {
    let g = TorusGrid::new(2, 24).unwrap();
    let a = conductances(g, 13);
    let h = random_edge(g, 14);
    let solver = VariableSolver::new(&a, &SolveConfig::default()).unwrap();
    let (u0, _) = solver.solve(&h).unwrap();
    let (u1, _) = solver.solve_with_guess(&h, Some(&random_node(g, 15).scale(100.0))).unwrap();
    assert!(u0.sub(&u1).max_abs() <= 10.0 * TOL * u0.max_abs());
}

#[test]
fn energy_identity() {
    let g = TorusGrid::new(2, 24).unwrap();
    let a = conductances(g, 16);
    let h = random_edge(g, 17);
    let (u, _) = solve_variable(&a, &h, &SolveConfig::default()).unwrap();
    let grad = forward_gradient(&u);
    let energy = grad.dot(&grad.mul_diagonal(&a));
    let source = -grad.dot(&h);
    assert!((energy - source).abs() <= 10.0 * TOL * energy.abs().max(grad.norm() * h.norm()));
}

#[test]
fn translation_equivariance_of_constant_solve() {
    let g = TorusGrid::new(2, 12).unwrap();
    let h = random_edge(g, 18);
    let abar = Matrix::from_row_major(2, vec![0.7, 0.1, 0.1, 0.6]).unwrap();
    let shift = [3, -5];
    let u = solve_constant(&abar, &h, &SolveConfig::default()).unwrap();
    let us = solve_constant(&abar, &h.translated(&shift), &SolveConfig::default()).unwrap();
    assert!(us.sub(&u.translated(&shift)).max_abs() < 1e-12);
}

#[test]
fn float32_solver_reaches_single_precision_target() {
    let g = TorusGrid::new(2, 16).unwrap();
    let a = conductances(g, 19).map(|v| v as f32);
    let h = random_edge(g, 20).map(|v| v as f32);
    let cfg = SolveConfig { tolerance: 1e-5, ..SolveConfig::default() };
    let (u, report) = solve_variable(&a, &h, &cfg).unwrap();
    assert!(report.relative_residual <= 1e-5);
    let (u64_, _) = solve_variable(&a.to_f64(), &h.to_f64(), &SolveConfig::default()).unwrap();
    assert!(rel_diff(&u.to_f64(), &u64_) < 1e-4);
}

fn projector_matrix() -> Matrix<f64> {
    Matrix::from_row_major(2, vec![0.72, 0.04, 0.04, 0.65]).unwrap()
}

#[test]
fn helmholtz_reproduces_gradient_fields() {
    let g = TorusGrid::new(2, 16).unwrap();
    let abar = projector_matrix();
    let grad = forward_gradient(&random_node(g, 21));
    let p = helmholtz_project(&abar, &grad.mul_matrix(&abar), &SolveConfig::default()).unwrap();
    assert!(p.sub(&grad).max_abs() <= 10.0 * TOL * grad.max_abs());
}

#[test]
fn leray_output_is_divergence_free_and_decomposition_holds() {
    let g = TorusGrid::new(2, 16).unwrap();
    let abar = projector_matrix();
    let f = random_edge(g, 22);
    let proj = Projector::new(g, &abar, &SolveConfig::default()).unwrap();
    let pl = proj.leray(&f).unwrap();
    let div = backward_divergence(&pl.mul_matrix(&abar));
    assert!(div.max_abs() <= 10.0 * TOL * f.max_abs());
    let ph = proj.helmholtz(&f.mul_matrix(&abar)).unwrap();
    assert!(ph.add(&pl).sub(&f).max_abs() <= 1e-14);
    let direct = leray_project(&abar, &f, &SolveConfig::default()).unwrap();
    assert_eq!(direct, pl);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn helmholtz_is_idempotent_under_abar_pairing(seed in any::<u64>()) {
        let g = TorusGrid::new(2, 8).unwrap();
        let abar = projector_matrix();
        let f = random_edge(g, seed);
        let proj = Projector::new(g, &abar, &SolveConfig::default()).unwrap();
        let once = proj.helmholtz(&f).unwrap();
        let twice = proj.helmholtz(&once.mul_matrix(&abar)).unwrap();
        prop_assert!(twice.sub(&once).max_abs() <= 10.0 * TOL * f.max_abs());
    }

    #[test]
    fn backends_agree_on_random_data(seed in any::<u64>()) {
        let g = TorusGrid::new(2, 8).unwrap();
        let h = random_edge(g, seed);
        let abar = projector_matrix();
        let spectral = solve_constant(&abar, &h, &SolveConfig::default()).unwrap();
        let cfg = SolveConfig { constant_backend: ConstantBackend::Iterative, ..SolveConfig::default() };
        let iterative = solve_constant(&abar, &h, &cfg).unwrap();
        prop_assert!(rel_diff(&iterative, &spectral) <= 10.0 * TOL);
    }

    #[test]
    fn solution_is_linear_in_data(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let g = TorusGrid::new(2, 8).unwrap();
        let a = conductances(g, seed);
        let h1 = random_edge(g, seed ^ 1);
        let h2 = random_edge(g, seed ^ 2);
        let cfg = SolveConfig { tolerance: 1e-13, ..SolveConfig::default() };
        let (u1, _) = solve_variable(&a, &h1, &cfg).unwrap();
        let (u2, _) = solve_variable(&a, &h2, &cfg).unwrap();
        let (u, _) = solve_variable(&a, &h1.scale(alpha).add(&h2), &cfg).unwrap();
        let combo = u1.scale(alpha).add(&u2);
        prop_assert!(u.sub(&combo).max_abs() <= 1e-10 * (1.0 + combo.max_abs()));
    }
}
