use homfluct::random_fields::ConductanceLaw;
use homfluct_experiment::{ExperimentConfig, ExperimentError, ReferenceMode, StudyKind};

fn parse(text: &str, overrides: &[&str]) -> Result<ExperimentConfig, ExperimentError> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml_with_overrides(text, &overrides)
}

fn field_of(cfg: &ExperimentConfig) -> String {
    cfg.validate().expect_err("config should be rejected").field
}

#[test]
fn toml_file_and_overrides_compose() {
    let text = r#"
        study = "rve"
        dim = 2
        sides = [8, 16]
        realizations = 50

        [law]
        kind = "uniform"
        lambda = 0.25

        [solver]
        tolerance = 1e-9
    "#;
    let cfg = parse(text, &["sides=[4, 8, 16]", "solver.max_iterations=77", "reference.mode=per_realization"]).unwrap();
    assert_eq!(cfg.study, StudyKind::Rve);
    assert_eq!(cfg.sides, vec![4, 8, 16]);
    assert_eq!(cfg.law, ConductanceLaw::Uniform { lambda: 0.25 });
    assert_eq!(cfg.solver.tolerance, 1e-9);
    assert_eq!(cfg.solver.max_iterations, 77);
    assert_eq!(cfg.reference, ReferenceMode::PerRealization);
    assert_eq!(cfg.realizations, 50);
    cfg.validate().unwrap();
}

#[test]
fn empty_config_gives_defaults() {
    let cfg = parse("", &[]).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.law, ConductanceLaw::TwoPoint { lo: 0.5, hi: 1.0, p: 0.5 });
    assert_eq!(cfg.solver.tolerance, 1e-10);
    cfg.validate().unwrap();
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = parse("", &["study=clt", "epsilons=[0.0625, 0.03125]", "law.p=0.3", "test_function.width=0.1"]).unwrap();
    let again = parse(&cfg.to_toml(), &[]).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn malformed_input_is_rejected() {
    assert!(parse("not toml at all [", &[]).is_err());
    assert!(parse("", &["no_equals_sign"]).is_err());
    assert!(parse("", &["unknown_key=3"]).is_err());
    assert!(parse("", &["solver.bogus=1"]).is_err());
}

#[test]
fn validation_names_the_offending_field() {
    let base = ExperimentConfig::for_study(StudyKind::Rve);
    assert_eq!(field_of(&ExperimentConfig { dim: 0, ..base.clone() }), "dim");
    assert_eq!(field_of(&ExperimentConfig { sides: vec![], ..base.clone() }), "sides");
    assert_eq!(field_of(&ExperimentConfig { sides: vec![8, 8], ..base.clone() }), "sides");
    assert_eq!(field_of(&ExperimentConfig { sides: vec![1], ..base.clone() }), "sides");
    assert_eq!(field_of(&ExperimentConfig { epsilons: vec![0.3], ..base.clone() }), "epsilons");
    assert_eq!(field_of(&ExperimentConfig { realizations: 2, ..base.clone() }), "realizations");
    assert_eq!(
        field_of(&ExperimentConfig { law: ConductanceLaw::TwoPoint { lo: 0.5, hi: 1.5, p: 0.5 }, ..base.clone() }),
        "law"
    );
    let mut solver = base.solver;
    solver.tolerance = -1.0;
    assert_eq!(field_of(&ExperimentConfig { solver, ..base.clone() }), "solver");
    let mut tf = base.test_function.clone();
    tf.width = 0.3;
    assert_eq!(field_of(&ExperimentConfig { test_function: tf, ..base.clone() }), "test_function.width");
    assert_eq!(field_of(&ExperimentConfig { workers: Some(0), ..base.clone() }), "workers");
    let fixed = ReferenceMode::Fixed { matrix: vec![vec![1.0, 2.0], vec![2.0, 1.0]] };
    assert_eq!(field_of(&ExperimentConfig { reference: fixed, ..base.clone() }), "reference.matrix");
    let gk = ExperimentConfig { reference: ReferenceMode::PerRealization, ..ExperimentConfig::for_study(StudyKind::Gk) };
    assert_eq!(field_of(&gk), "reference.mode");
    let normality = ExperimentConfig { realizations: 50, ..ExperimentConfig::for_study(StudyKind::Normality) };
    assert_eq!(field_of(&normality), "realizations");
}

#[test]
fn epsilons_take_precedence_over_sides() {
    let cfg = parse("", &["sides=[8]", "epsilons=[0.0625, 0.03125]"]).unwrap();
    assert_eq!(cfg.resolved_sides().unwrap(), vec![16, 32]);
}

#[test]
fn echo_leaves_out_execution_settings() {
    let a = ExperimentConfig::default();
    let b = ExperimentConfig { workers: Some(7), cache: false, output_dir: "/elsewhere".into(), ..a.clone() };
    assert_eq!(a.echo(), b.echo());
    let c = ExperimentConfig { master_seed: 2, ..a.clone() };
    assert_ne!(a.echo(), c.echo());
}

#[test]
fn partial_tables_keep_defaults_and_variants_switch_cleanly() {
    let cfg = parse("[law]\np = 0.25\n", &[]).unwrap();
    assert_eq!(cfg.law, ConductanceLaw::TwoPoint { lo: 0.5, hi: 1.0, p: 0.25 });
    let cfg = parse("", &["law.kind=uniform", "law.lambda=0.3"]).unwrap();
    assert_eq!(cfg.law, ConductanceLaw::Uniform { lambda: 0.3 });
    let cfg = parse("", &["reference.mode=fixed", "reference.matrix=[[1.0, 0.0], [0.0, 2.0]]"]).unwrap();
    assert_eq!(cfg.reference, ReferenceMode::Fixed { matrix: vec![vec![1.0, 0.0], vec![0.0, 2.0]] });
    cfg.validate().unwrap();
    let cfg = parse("[reference]\nfactor = 4\n", &[]).unwrap();
    assert_eq!(cfg.reference, ReferenceMode::Pilot { factor: 4, realizations: 16 });
    // A field that does not belong to the selected variant is still an error.
    assert!(parse("[law]\nlambda = 0.3\n", &[]).is_err());
}
