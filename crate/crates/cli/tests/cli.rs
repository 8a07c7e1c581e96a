use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qkd_milp::{export_lp_format, parse_lp_format, solve_milp, Rational, SolverParams};

fn instance(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name)
}

fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn qkdplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdplan")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_prints_the_plan() {
    let path = instance("cost_structure.toml");
    let o = qkdplan(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("status=optimal\n"));
    assert!(text.contains("total=299250\n"));
    assert!(text.contains("route.1=1>2>4[fiber,fiber]\n"));
}

#[test]
fn infeasible_instance_exits_with_two() {
    let doc = r#"
[[nodes]]
id = 0
layer = "ground"

[[nodes]]
id = 1
layer = "ground"

[[links]]
from = 0
to = 1
medium = "fiber"
distance_km = 10
caps = { qkd_reserved_max = 1, qkd_ondemand_max = 1 }

[[requests]]
id = 1
source = 0
destination = 1
demand_kbps = [1]
"#;
    let path = scratch("infeasible.toml");
    std::fs::write(&path, doc).unwrap();
    let o = qkdplan(&["solve", "--instance", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let text = stdout(&o);
    assert!(text.contains("status=infeasible\n"));
    assert!(text.contains("diagnosis_family=demand-qkd\n"));
}

#[test]
fn time_limit_exits_with_three() {
    let path = instance("nsfnet_sagin.toml");
    let o = qkdplan(&["solve", "--instance", path.to_str().unwrap(), "--time-limit-s", "0.001"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("status=limit_reached\n"));
}

#[test]
fn usage_errors_exit_with_64() {
    let path = instance("cost_structure.toml");
    let p = path.to_str().unwrap();
    for args in [
        vec!["solve"],
        vec!["frobnicate", "--instance", p],
        vec!["solve", "--instance", p, "--threads", "0"],
        vec!["solve", "--instance", p, "--node-limit", "0"],
        vec!["solve", "--instance", p, "--time-limit-s", "-1"],
        vec!["sweep-demand", "--instance", p, "--grid", "1,x"],
        vec!["sweep-demand", "--instance", p, "--grid", "3,2"],
        vec!["sweep-reservation", "--instance", p, "--grid", "1.5"],
    ] {
        let o = qkdplan(&args);
        assert_eq!(code(&o), 64, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn help_exits_cleanly() {
    let o = qkdplan(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("sweep-reservation"));
}

#[test]
fn unreadable_instance_exits_with_one() {
    let o = qkdplan(&["validate", "--instance", "/nonexistent/instance.toml"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("qkdplan: "));
}

#[test]
fn validate_reports_model_size() {
    let path = instance("cost_structure.toml");
    let o = qkdplan(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("nodes=4\nlinks=10\nrequests=1\nscenarios=4\n"), "{text}");
}

#[test]
fn exported_model_solves_to_the_same_optimum() {
    let path = instance("cost_structure.toml");
    let out = scratch("cost_structure.lp");
    let o = qkdplan(&["export-lp", "--instance", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let model = parse_lp_format::<Rational>(&text).unwrap();
    assert_eq!(export_lp_format(&model), text);
    let r = solve_milp(&model, &SolverParams::default()).unwrap();
    assert_eq!(r.objective, Some(Rational::from_integer(299250.into())));
}

#[test]
fn sweep_writes_csv() {
    let path = instance("cost_structure.toml");
    let out = scratch("reservation.csv");
    let o = qkdplan(&[
        "sweep-reservation",
        "--instance",
        path.to_str().unwrap(),
        "--grid",
        "0,60",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# sweep=reservation schema=1");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0,optimal,"));
    assert!(lines[3].starts_with("60,optimal,"));
}

#[test]
fn seed_overrides_sampling() {
    let base = std::fs::read_to_string(instance("cost_structure.toml")).unwrap();
    let doc = base.replace("weather = [\"clear\", \"cloudy\"]", "weather = [\"clear\", \"cloudy\"]\nmode = \"sample\"\nsamples = 3\nseed = 1");
    assert_ne!(doc, base);
    let path = scratch("sampled.toml");
    std::fs::write(&path, doc).unwrap();
    let p = path.to_str().unwrap();
    let export = |seed: &str| stdout(&qkdplan(&["export-lp", "--instance", p, "--seed", seed]));
    let document_seed = stdout(&qkdplan(&["export-lp", "--instance", p]));
    assert_eq!(export("1"), document_seed);
    assert_eq!(export("5"), export("5"));
    assert_ne!(export("5"), document_seed);
}
