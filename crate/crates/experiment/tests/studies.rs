use std::fs;
use std::path::Path;

use homfluct::random_fields::ConductanceLaw;
use homfluct_experiment::{run_study, ExperimentConfig, StudyKind, StudySummary};

fn config(study: StudyKind, dim: usize, sides: &[usize], n: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        study,
        dim,
        sides: sides.to_vec(),
        realizations: n,
        output_dir: out.to_path_buf(),
        bootstrap_resamples: 50,
        ..ExperimentConfig::default()
    }
}

fn csv(cfg: &ExperimentConfig) -> Vec<u8> {
    let outcome = run_study(cfg).unwrap();
    fs::read(outcome.dir.join("study.csv")).unwrap()
}

#[test]
fn verify_passes_in_each_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    for (d, side) in [(1, 32), (2, 8), (3, 4)] {
        let outcome = run_study(&config(StudyKind::Verify, d, &[side], 1, tmp.path())).unwrap();
        let StudySummary::Verify(report) = &outcome.summary else { panic!("wrong summary") };
        for c in &report.checks {
            assert!(c.passed, "d={d}: {} discrepancy {:e} over {:e}", c.name, c.discrepancy, c.threshold);
        }
        assert_eq!(report.check("d1_harmonic_mean").is_some(), d == 1);
        assert!(report.check("vertical_derivative").is_some());
        assert!(outcome.passed());
    }
}

#[test]
fn verify_with_zero_tolerance_reports_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(StudyKind::Verify, 2, &[8], 1, tmp.path());
    cfg.solver.tolerance = 0.0;
    cfg.solver.max_iterations = 200;
    let outcome = run_study(&cfg).unwrap();
    assert!(!outcome.passed());
    let StudySummary::Verify(report) = &outcome.summary else { panic!("wrong summary") };
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| c.discrepancy > c.threshold));
    // Lattice identities do not involve the solver.
    assert!(report.check("summation_by_parts").unwrap().passed);
}

#[test]
fn clt_with_degenerate_law_has_zero_variances() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(StudyKind::Clt, 2, &[16, 32], 8, tmp.path());
    cfg.law = ConductanceLaw::TwoPoint { lo: 0.7, hi: 0.7, p: 0.5 };
    let StudySummary::Clt(s) = run_study(&cfg).unwrap().summary else { panic!("wrong summary") };
    for l in &s.levels {
        for m in [&l.j0, &l.j1, &l.j2, &l.i1, &l.i2, &l.e0] {
            assert!(m.variance.abs() < 1e-24, "variance {}", m.variance);
        }
        assert!(l.e0_l2 < 1e-12);
    }
}

/// Exact mean and `L Var` of the d=1 harmonic mean for `a ∈ {1/2, 1}` with
/// equal weights: `1/a = 1 + B` with `B` Bernoulli(1/2), so `ā_L = 1 / (1 + K/L)`
/// with `K ~ Bin(L, 1/2)`.
fn d1_finite_size(side: usize) -> (f64, f64) {
    let l = side as f64;
    let mut pmf = 0.5f64.powi(side as i32);
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in 0..=side {
        let a = 1.0 / (1.0 + k as f64 / l);
        m1 += pmf * a;
        m2 += pmf * a * a;
        pmf *= (side - k) as f64 / (k + 1) as f64;
    }
    (m1, l * (m2 - m1 * m1))
}

#[test]
fn rve_matches_exact_d1_law() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(StudyKind::Rve, 1, &[16, 32, 64], 10_000, tmp.path());
    let StudySummary::Rve(s) = run_study(&cfg).unwrap().summary else { panic!("wrong summary") };
    let mut bias = Vec::new();
    for l in &s.levels {
        let (mean, q_exact) = d1_finite_size(l.side);
        let q = l.q.get(0, 0, 0, 0);
        assert!((l.abar[(0, 0)] - mean).abs() <= 3.0 * l.abar_se[(0, 0)], "L={}", l.side);
        assert!((q - q_exact).abs() <= 3.0 * l.q_se.get(0, 0, 0, 0), "L={} Q={q} exact {q_exact}", l.side);
        bias.push(q_exact - 4.0 / 81.0);
    }
    // The finite-size values approach 2/3 and 4/81 at rate 1/L.
    let first_order = 2.0 / 3.0 + 0.25 / (512.0 * 1.5f64.powi(3));
    assert!((d1_finite_size(512).0 - first_order).abs() < 1e-6);
    for w in bias.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 0.02);
    }
}

#[test]
fn worker_count_and_cache_do_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for study in [StudyKind::Rve, StudyKind::Gk, StudyKind::Pathwise, StudyKind::Moments] {
        let base = config(study, 2, &[8], 24, &tmp.path().join(study.name()));
        let a = csv(&base);
        let b = csv(&ExperimentConfig { workers: Some(3), cache: false, output_dir: tmp.path().join("other"), ..base.clone() });
        // Second run on the first directory reads everything from the cache.
        let c = csv(&base);
        assert_eq!(a, b, "{}", study.name());
        assert_eq!(a, c, "{}", study.name());
    }
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let cfg = config(StudyKind::Rve, 2, &[8, 16], 40, &full);
    let reference = csv(&cfg);

    let cut = tmp.path().join("cut");
    let cfg_cut = ExperimentConfig { output_dir: cut.clone(), ..cfg.clone() };
    csv(&cfg_cut);
    // Simulate an interruption: keep a prefix of each store and tear the last line.
    for entry in fs::read_dir(cut.join("cache")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let keep = lines.len() / 3;
        let mut truncated = lines[..keep].join("\n");
        truncated.push('\n');
        truncated.push_str(&lines[keep][..lines[keep].len() / 2]);
        fs::write(&path, truncated).unwrap();
    }
    let resumed = csv(&cfg_cut);
    assert_eq!(reference, resumed);
    // And the repaired store is complete and parseable.
    assert_eq!(csv(&cfg_cut), reference);
}

#[test]
fn artifacts_echo_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(StudyKind::Normality, 2, &[4, 8], 100, tmp.path());
    let outcome = run_study(&cfg).unwrap();
    let echo = serde_json::to_string(&cfg.echo()).unwrap();

    let study = fs::read_to_string(outcome.dir.join("study.csv")).unwrap();
    let first = study.lines().next().unwrap();
    assert_eq!(first, format!("# config: {echo}"));
    assert_eq!(study.lines().count(), 2 + 2 * 100);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outcome.dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["study"], "normality");
    assert_eq!(summary["config"], cfg.echo());
    assert_eq!(summary["results"]["levels"].as_array().unwrap().len(), 2);

    let log = fs::read_to_string(outcome.dir.join("run.log")).unwrap();
    let mut lines = log.lines();
    let head: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(head["config"], cfg.echo());
    let solves: Vec<serde_json::Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    // Two corrector directions per realization and side.
    assert_eq!(solves.len(), 2 * 2 * 100);
    assert!(solves.iter().all(|s| s["converged"] == true));
}

#[test]
fn invalid_config_fails_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { dim: 9, ..config(StudyKind::Rve, 2, &[8], 10, tmp.path()) };
    assert!(run_study(&cfg).is_err());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}
