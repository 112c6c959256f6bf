use std::path::Path;
use std::process::{Command, Output};

fn solve(scenario: &str, dir: &Path) -> Output {
    let file = dir.join("scenario.toml");
    std::fs::write(&file, scenario).unwrap();
    Command::new(env!("CARGO_BIN_EXE_solve"))
        .arg(&file)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--threads")
        .arg("2")
        .output()
        .unwrap()
}

#[test]
fn minimal_linear_scenario_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = solve(
        "mode = \"linear\"\n[mesh]\nkind = \"sphere\"\nlevel = 1\n[evaluation]\npoints = [[0.0, 0.1, 0.2]]\n",
        dir.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let out = dir.path().join("out");
    for name in ["resolved.toml", "report.txt", "timings.txt", "fields.csv", "densities.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let resolved = std::fs::read_to_string(out.join("resolved.toml")).unwrap();
    assert!(resolved.contains("alpha = 1.0") && resolved.contains("mu = 1.0"));
    let fields = std::fs::read_to_string(out.join("fields.csv")).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next(), Some("x,y,z,domain,u1,u2,u3,pi"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3], "interior");
    assert!(row[4..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("status") && report.contains("complete"));
}

#[test]
fn negative_alpha_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let run = solve("mode = \"linear\"\n[params]\nalpha = -1.0\n", dir.path());
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("params.alpha"));
}

#[test]
fn indefinite_interface_matrix_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = solve(
        "mode = \"linear\"\n[params]\ncoupling = [[1.0, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 1.0]]\n",
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("positivity condition"));
}

#[test]
fn missing_mesh_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = solve("mode = \"linear\"\n[mesh]\nkind = \"file\"\npath = \"absent.off\"\n", dir.path());
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("mesh.path"));
}

#[test]
fn stalled_iteration_exits_with_convergence_status() {
    let dir = tempfile::tempdir().unwrap();
    let run = solve(
        "mode = \"nonlinear\"\n\
         [mesh]\nkind = \"sphere\"\nlevel = 1\n\
         [params]\nk = 1.0\nbeta = 1.0\n\
         [data]\nvelocity_jump = { constant = [50.0, 0.0, 0.0] }\n\
         [grid]\nspacing = 0.4\n\
         [nonlinear]\nmax_iters = 3\nsmallness = false\n",
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
    let out = dir.path().join("out");
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("incomplete"));
}
