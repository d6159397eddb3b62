use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodge-dtn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_writes_a_readable_mesh() {
    let o = run(&["gen", "annulus2d", "--resolution", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let data = hodge_dtn::io::parse_mesh(&stdout(&o)).unwrap();
    assert_eq!(data.build().unwrap().euler_characteristic(), 0);
}

#[test]
fn oracle_passes() {
    let o = run(&["oracle", "8", "2.0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn oracle_rejects_bad_length() {
    assert_eq!(run(&["oracle", "4", "-1"]).status.code(), Some(2));
}

#[test]
fn analyze_generator_report() {
    let o = run(&["analyze", "disk2d", "--resolution", "3", "--identities", "--no-timings"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["oracles"]["betti_matches"], true);
    assert!(v["oracles"]["disk_dtn"].is_object());
    assert!(!v["identities"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_writes_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["analyze", "annulus2d", "--resolution", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["topology"]["dim_ker_phi"], serde_json::json!([1, 1]));
}

#[test]
fn non_manifold_mesh_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fin.mesh");
    // Three triangles on one edge.
    std::fs::write(
        &path,
        "dim 2\nvertices 5\n0 0\n1 0\n0 1\n0 -1\n1 1\ncells 3\n0 1 2\n0 1 3\n0 1 4\n",
    )
    .unwrap();
    let o = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh"));
}

#[test]
fn malformed_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mesh");
    std::fs::write(&path, "dim 2\nvertices 1\nzero 0\n").unwrap();
    assert_eq!(run(&["analyze", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "no-such-file.mesh"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "klein"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "disk2d", "--degrees", "3..1"]).status.code(), Some(2));
}

#[test]
fn export_shapes_and_unknown_operator() {
    let o = run(&["export", "annulus2d", "Phi0", "--resolution", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let a = hodge_dtn::io::parse_matrix(&stdout(&o)).unwrap();
    assert_eq!(a.nrows(), a.ncols());
    let o = run(&["export", "annulus2d", "Psi1", "--resolution", "2"]);
    let psi = hodge_dtn::io::parse_matrix(&stdout(&o)).unwrap();
    assert_eq!(psi.nrows(), a.nrows());
    assert_eq!(run(&["export", "annulus2d", "Nope1", "--resolution", "2"]).status.code(), Some(2));
    assert_eq!(run(&["export", "annulus2d", "Psi0", "--resolution", "2"]).status.code(), Some(2));
}
