use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weaksym")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn field(line: &str, i: usize) -> f64 {
    line.split(',').nth(i).unwrap().parse().unwrap()
}

#[test]
fn convergence_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "c.json", r#"{"case":"deformed_square","p":2,"h":[0.5,0.25]}"#);
    let o = run(&["convergence", "--config", &c, "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("h,dof,err_sigma_hdiv"));
    for (row, want) in rows[1..].iter().zip([8.4378696, 2.3346271]) {
        let got = field(row, 2);
        assert!((got - want).abs() / want < 0.01, "{got} vs {want}");
    }
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["{nope", r#"{"case":"deformed_square","p":2,"h":[0.5],"typo":1}"#, r#"{"case":"moon","p":2,"h":[0.5]}"#] {
        let c = config(dir.path(), "m.json", text);
        assert_eq!(code(&run(&["convergence", "--config", &c], dir.path())), 1, "{text}");
    }
}

#[test]
fn infinite_lambda_without_identity_in_stress_space_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "r.json", r#"{"case":"ring3d","p":2,"r":0,"h":[1.0],"material":{"lambda":"inf","mu":1}}"#);
    let o = run(&["convergence", "--config", &c], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("identity"));
}

#[test]
fn cook_trajectory_and_zero_load() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "k.json", r#"{"p":2,"meshes":[1,4]}"#);
    assert_eq!(code(&run(&["cook", "--config", &c, "--out", "a"], dir.path())), 0);
    let csv = std::fs::read_to_string(dir.path().join("a/cook_p2.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(field(rows[0], 2) > 20.0);
    assert!(field(rows[1], 2) < field(rows[0], 2));

    let c = config(dir.path(), "z.json", r#"{"p":2,"meshes":[2],"bc":{"traction":[0,0]}}"#);
    assert_eq!(code(&run(&["cook", "--config", &c, "--out", "z"], dir.path())), 0);
    let csv = std::fs::read_to_string(dir.path().join("z/cook_p2.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!((field(row, 1), field(row, 2)), (0.0, 0.0));
}

#[test]
fn verify_passes_with_both_space_choices() {
    let dir = tempfile::tempdir().unwrap();
    for (out, extra) in [("s", None), ("n", Some("--naive-spaces"))] {
        let mut args = vec!["verify", "--out", out, "--seed", "7"];
        args.extend(extra);
        let o = run(&args, dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(out).join("verification.json")).unwrap()).unwrap();
        assert_eq!(json["seed"], 7);
        assert!(json["entries"].as_array().unwrap().iter().all(|e| e["pass"] == true));
    }
}

#[test]
fn unknown_probe_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "p.json", r#"{"probes":["commutativity","bogus"]}"#);
    assert_eq!(code(&run(&["verify", "--config", &c], dir.path())), 1);
}

#[test]
fn export_vtk_writes_structured_grid() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "v.json", r#"{"case":"deformed_square","p":2,"h":[0.5],"lattice":6}"#);
    assert_eq!(code(&run(&["export-vtk", "--config", &c, "--out", "v"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("v/fields_patch0.vtk")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[3], "DATASET STRUCTURED_GRID");
    assert_eq!(lines[4], "DIMENSIONS 6 6 1");
    assert_eq!(lines[5], "POINTS 36 double");
    assert!(text.contains("POINT_DATA 36"));
}

#[test]
fn infsup_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "i.json", r#"{"p":2,"h":[0.5,0.25]}"#);
    assert_eq!(code(&run(&["infsup", "--config", &c, "--out", "i"], dir.path())), 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("i/infsup.json")).unwrap()).unwrap();
    assert_eq!(json["values"].as_array().unwrap().len(), 2);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "c.json", r#"{"case":"deformed_square","p":2,"h":[0.5,0.25]}"#);
    for out in ["x", "y"] {
        assert_eq!(code(&run(&["convergence", "--config", &c, "--out", out], dir.path())), 0);
        assert_eq!(code(&run(&["verify", "--out", out, "--seed", "3"], dir.path())), 0);
    }
    for file in ["convergence.csv", "verification.json"] {
        let a = std::fs::read(dir.path().join("x").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("y").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("file"), "").unwrap();
    let c = config(dir.path(), "c.json", r#"{"case":"deformed_square","p":2,"h":[0.5]}"#);
    assert_eq!(code(&run(&["convergence", "--config", &c, "--out", "file/sub"], dir.path())), 4);
}
