use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contactforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const CONTACT_FILE: &str = r#"
name = "file_scenario"
[chart]
coords = ["q", "p", "z"]
[tensors.eta]
kind = "one-form"
components = { q = "-p", z = "1" }
[tensors.wrong]
kind = "vector"
components = { q = "1" }
[structures.C]
type = "contact"
form = "eta"
[[tasks]]
name = "volume"
kind = "contact"
structure = "C"
[[tasks]]
name = "field"
kind = "hamiltonian_field"
structure = "C"
hamiltonian = "p - z"
expected = "wrong"
"#;

#[test]
fn builtin_commands_pass() {
    for scenario in ["poisson_example", "contact_example"] {
        for cmd in ["check-structure", "recursion", "involution", "integrable", "symplectize", "nogo-report", "flow"] {
            let o = run(&[cmd, scenario, "--samples", "16"]);
            assert_eq!(code(&o), 0, "{cmd} {scenario}\n{}", stdout(&o));
            assert!(stdout(&o).contains("status pass"), "{}", stdout(&o));
        }
    }
}

#[test]
fn check_structure_on_the_contact_example_reports_reeb_volume_and_jacobi() {
    let o = run(&["check-structure", "contact_example"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for check in ["contact_volume", "reeb_field", "reeb_conditions", "is_jacobi"] {
        assert!(out.contains(check), "{check} missing\n{out}");
    }
}

#[test]
fn nogo_report_on_the_poisson_example_states_why_there_is_no_contradiction() {
    let o = run(&["nogo-report", "poisson_example"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("lambda1_degree=0"), "{out}");
    assert!(out.contains("eigen_degrees=[1]"), "{out}");
    assert!(out.contains("euler_residual=0.000e0"), "{out}");
    assert!(out.contains("clause 1 fails"), "{out}");
}

#[test]
fn failing_check_exits_with_one_and_names_the_worst_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, CONTACT_FILE).unwrap();
    let json = dir.path().join("r.json");
    let o = run(&["all", path.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let v = read_json(&json);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["exit_code"], 1);
    let field = &v["tasks"][1];
    assert_eq!(field["status"], "fail");
    assert!(field["checks"][0]["worst_point"].is_array());
    assert_eq!(v["tasks"][0]["status"], "pass");
}

#[test]
fn inconsistency_exits_with_two() {
    let o = run(&["nogo-report", "poisson_example", "--tol", "eigen_homogeneity=0"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("[INCONSISTENT] nogo"));
}

#[test]
fn usage_and_scenario_errors_exit_with_three() {
    assert_eq!(code(&run(&["frobnicate", "contact_example"])), 3);
    assert_eq!(code(&run(&["all"])), 3);
    assert_eq!(code(&run(&["all", "no_such_scenario"])), 3);
    assert_eq!(code(&run(&["all", "contact_example", "--tol", "jacobi"])), 3);
    assert_eq!(code(&run(&["all", "contact_example", "--tol", "bogus=1"])), 3);
    assert_eq!(code(&run(&["recursion", "contact_example", "--csv", "x.csv"])), 3);
    assert_eq!(code(&run(&["all", "contact_example", "--samples", "0"])), 3);
    let o = bin()
        .args(["all", "contact_example"])
        .env("CONTACTFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn structural_errors_carry_file_locations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = "name = \"b\"\n[chart]\ncoords = [\"x\", \"y\", \"z\"]\n\n[tensors.L]\nkind = \"bivector\"\ncomponents = { \"1,1\" = \"x\" }\n";
    std::fs::write(&path, text).unwrap();
    let o = run(&["all", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("AntisymmetryViolation"), "{err}");
    assert!(err.contains("bad.toml:5:"), "{err}");

    std::fs::write(&path, "name = \"b\"\n[chart]\ncoords = [\"x\"]\n[fields]\nf = \"x +* 2\"\n").unwrap();
    let err = stderr(&run(&["all", path.to_str().unwrap()]));
    assert!(err.contains("ParseError") && err.contains("bad.toml:"), "{err}");
}

#[test]
fn every_task_appears_exactly_once() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = run(&["flow", "poisson_example", "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = read_json(&json);
    let text = contactforge_cli::builtin::source("poisson_example").unwrap();
    let declared = text.matches("[[tasks]]").count();
    let tasks = v["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), declared);
    let mut names: Vec<&str> = tasks.iter().map(|t| t["name"].as_str().unwrap()).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), declared);
    let skipped = tasks.iter().filter(|t| t["status"] == "skipped").count();
    assert_eq!(skipped, declared - 1);
}

#[test]
fn json_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run_with = |threads: &str, path: &Path| {
        let o = bin()
            .args(["all", "contact_example", "--seed", "11", "--samples", "24", "--json"])
            .arg(path)
            .env("CONTACTFORGE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stdout(&o));
    };
    run_with("1", &a);
    run_with("3", &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 11);
    assert!(!std::fs::read_to_string(&a).unwrap().contains("elapsed"));
}

#[test]
fn flow_writes_csv_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let o = run(&["flow", "contact_example", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q,p,z"));
    assert_eq!(lines.next(), Some("0,0,1,1"));
    assert_eq!(text.lines().count(), 1002);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[2] - std::f64::consts::E).abs() < 1e-8);
}

#[test]
fn scenario_file_takes_precedence_over_builtin_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("contact_example");
    std::fs::write(&path, CONTACT_FILE).unwrap();
    let o = run(&["check-structure", path.to_str().unwrap()]);
    assert!(stdout(&o).contains("scenario file_scenario"), "{}", stdout(&o));
}
