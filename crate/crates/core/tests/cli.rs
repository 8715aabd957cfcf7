use std::process::Command;

fn ddr(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ddr")).args(args).env("DDR_THREADS", "2").output().expect("run ddr");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn dofs_table_triangle() {
    let (code, out) = ddr(&["dofs", "table", "--shape", "triangle", "--k", "1"]);
    assert_eq!(code, 0);
    let row = out.lines().find(|l| l.starts_with("triangle")).unwrap();
    assert!(row.contains("15/14"), "{row}");
}

#[test]
fn exactness_exit_code() {
    let (code, out) = ddr(&["verify", "exactness", "--family", "cartesian", "--n", "2", "--k", "0"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("PASS"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ddr(&["verify", "exactness", "--family", "circle"]).0, 2);
    assert_eq!(ddr(&["dofs", "table", "--shape", "circle"]).0, 2);
    assert_eq!(ddr(&["convergence", "--family", "cartesian", "--n", "0"]).0, 2);
    assert_eq!(ddr(&[]).0, 2);
}

#[test]
fn failed_assertion_exits_1() {
    // an impossible tolerance turns the commutation check into a failure
    let (code, _) = ddr(&["verify", "commutation", "--family", "cartesian", "--n", "2", "--suite", "trigonometric", "--tolerance", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn convergence_writes_csv_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let (code, _) = ddr(&["convergence", "--family", "cartesian", "--k", "0", "--n", "4,8,16,32", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "MeshSize,ErrUL2,ErrURotRot,ErrPL2,ErrPGrad");
    assert_eq!(lines.len(), 5);
    let rates = std::fs::read_to_string(out.with_extension("rates")).unwrap();
    assert_eq!(rates.lines().count(), 4);
}

#[test]
fn mesh_gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hex.mesh");
    let p = path.to_str().unwrap();
    assert_eq!(ddr(&["mesh", "gen", "--family", "hexagonal", "--n", "3", "--out", p]).0, 0);
    let (code, out) = ddr(&["solve", "--mesh", p, "--k", "1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("ErrUL2="));
}
