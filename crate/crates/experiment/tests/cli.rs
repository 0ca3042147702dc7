use std::path::Path;
use std::process::{Command, Output};

fn homfluct(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_homfluct"));
    cmd.args(args).env_remove("HOMFLUCT_OUT");
    if let Some(dir) = env_out {
        cmd.env("HOMFLUCT_OUT", dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_exits_zero_and_lists_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = homfluct(&["verify", "--set", "sides=[8]", "--out", out], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().starts_with(out));
    assert!(text.contains("summation_by_parts"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn forced_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = homfluct(
        &["verify", "--set", "sides=[8]", "--set", "solver.tolerance=0", "--out", tmp.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_errors_exit_two_with_the_field() {
    let o = homfluct(&["rve", "--set", "dim=0"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`dim`"));
    let o = homfluct(&["rve", "--config", "/nonexistent/cfg.toml"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = homfluct(&["nonsense"], None);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, format!("sides = [4]\nrealizations = 5\noutput_dir = {:?}\n", tmp.path().join("file"))).unwrap();
    let c = cfg.to_str().unwrap();

    let o = homfluct(&["rve", "--config", c], None);
    assert!(stdout(&o).starts_with(tmp.path().join("file").to_str().unwrap()));
    let o = homfluct(&["rve", "--config", c], Some(&env_dir));
    assert!(stdout(&o).starts_with(env_dir.to_str().unwrap()));
    let o = homfluct(&["rve", "--config", c, "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(stdout(&o).starts_with(flag_dir.to_str().unwrap()));
}

#[test]
fn seed_and_workers_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, workers: &str, sub: &str| {
        let dir = tmp.path().join(sub);
        let o = homfluct(
            &["rve", "--set", "sides=[4]", "--set", "realizations=10", "--seed", seed, "--workers", workers, "--out", dir.to_str().unwrap()],
            None,
        );
        assert_eq!(o.status.code(), Some(0));
        let artifact = stdout(&o).lines().next().unwrap().to_string();
        std::fs::read(Path::new(&artifact).join("study.csv")).unwrap()
    };
    let a = run("5", "1", "a");
    let b = run("5", "2", "b");
    let c = run("6", "1", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
