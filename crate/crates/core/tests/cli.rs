use std::path::Path;
use std::process::{Command, Output};

fn ipolicy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipolicy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const BASE: &str = r#"
name = "cli"
model = "point_mass"
seed = 2
workspace = { lo = [-5.0, -5.0], hi = [5.0, 5.0] }
goal = { center = [0.0, 0.0], radius = 1.0 }
"#;

#[test]
fn validate_prints_resolved_config() {
    let o = ipolicy(&["validate", "--preset", "pointmass_fig2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = ipolicy::config::ScenarioConfig::from_toml(&text).unwrap();
    assert!(cfg.schedule.b.is_some());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ipolicy(&["validate", "--preset", "nope"])), 2);

    let unknown = write(dir.path(), "unknown.toml", &format!("{BASE}\nspeed = 3\n"));
    assert_eq!(code(&ipolicy(&["validate", "--config", &unknown])), 2);

    let blocked = format!(
        "{BASE}\nobstacles = [{{ kind = \"circle\", center = [3.0, 3.0], radius = 1.0 }}]\n[rollout]\nstarts = [[3.0, 3.0]]\n"
    );
    let blocked = write(dir.path(), "blocked.toml", &blocked);
    let out = dir.path().join("o");
    let o = ipolicy(&["run", "--config", &blocked, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let car = ipolicy(&["compare", "--preset", "dubins_fig5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&car), 2);
}

#[test]
fn missing_file_exits_with_1() {
    assert_eq!(code(&ipolicy(&["validate", "--config", "/nonexistent/x.toml"])), 1);
}

#[test]
fn exhausted_parking_budget_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}\nobstacles = [\n  {{ kind = \"rect\", lo = [2.5, -5.0], hi = [3.0, -2.5] }},\n  {{ kind = \"rect\", lo = [2.5, -3.0], hi = [5.0, -2.5] }},\n]\n[rollout]\nstarts = [[4.5, -4.5]]\n"
    );
    let cfg = write(dir.path(), "pocket.toml", &text);
    let out = dir.path().join("park");
    let o = ipolicy(&["park", "--config", &cfg, "--max-samples", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let result = std::fs::read_to_string(out.join("result.csv")).unwrap();
    assert!(result.lines().nth(1).unwrap().starts_with("budget_exhausted,"));
}

#[test]
fn run_is_reproducible_without_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(tag);
        let o = ipolicy(&[
            "run",
            "--preset",
            "pointmass_fig2",
            "--seed",
            "3",
            "--max-samples",
            "150",
            "--no-wall-clock",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        logs.push((
            std::fs::read(out.join("iterations.csv")).unwrap(),
            std::fs::read(out.join("rmse.csv")).unwrap(),
            std::fs::read(out.join("values/values_000129.csv")).unwrap(),
        ));
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn compare_single_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{BASE}\n[vi]\nmax_iterations = 40\n[checkpoints]\nevery = 20\n[evaluation]\nseeds = [1, 2]\noracle_resolution = 0.1\n"),
    );
    let out = dir.path().join("cmp");
    let o = ipolicy(&[
        "compare",
        "--config",
        &cfg,
        "--methods",
        "ipolicy",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("rmse_ipolicy_seed1.csv").exists());
    assert!(out.join("rmse_ipolicy_seed2.csv").exists());
    assert!(out.join("aggregate.csv").exists());
    assert!(!out.join("comparison.csv").exists());
}
