use std::path::Path;
use std::process::{Command, Output};

use hyperlabel::correspondence::MapSpec;
use hyperlabel::degree::LabeledTriangulation;

fn hyperlabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperlabel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_map(dir: &Path, name: &str, spec: &MapSpec) -> String {
    let p = dir.join(name);
    std::fs::write(&p, spec.to_json().unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "pennies.json", &MapSpec::matching_pennies());
    let report = dir.path().join("out.json");
    let o = hyperlabel(&[
        "solve", "--map", &map, "--tol", "1e-6", "--max-depth", "10", "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let p: Vec<f64> = serde_json::from_value(v["point"].clone()).unwrap();
    assert!((p[0] - 0.5).abs() < 2e-3 && (p[1] - 0.5).abs() < 2e-3);
    assert_eq!(v["face_mode"], "equality");
    assert_eq!(v["config"]["tolerance"], 1e-6);
    for key in ["status", "residual", "depth_trace"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn dcn_prints_witness() {
    let o = hyperlabel(&["dcn", "--d", "3", "--set", "+++,++-"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("dcn=true witness=(+,+,0)"));
    let o = hyperlabel(&["dcn", "--d", "2", "--set", "++,--"]);
    assert!(stdout(&o).starts_with("dcn=false"));
    let o = hyperlabel(&["dcn", "--d", "2", "--set", "+++"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("set"));
}

#[test]
fn degree_and_sperner_on_triangle_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("tri.json");
    std::fs::write(&p, LabeledTriangulation::triangle_grid(4).unwrap().to_json()).unwrap();
    let o = hyperlabel(&["degree", "--labeling", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1");
    let o = hyperlabel(&["sperner", "--labeling", p.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("sperner_valid=true completely_labeled=1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = hyperlabel(&["solve", "--map", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let mut spec = MapSpec::catalog("contraction").unwrap();
    spec.dimension = 3;
    let mismatch = write_map(dir.path(), "mismatch.json", &spec);
    let o = hyperlabel(&["solve", "--map", &mismatch]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));

    let o = hyperlabel(&["solve", "--map", "/nonexistent/map.json"]);
    assert_eq!(o.status.code(), Some(2));

    let ok = write_map(dir.path(), "c.json", &MapSpec::catalog("contraction").unwrap());
    let o = hyperlabel(&["solve", "--map", &ok, "--face-mode", "strict"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hyperlabel(&["solve", "--map", &ok, "--initial-res", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial_resolution"));
}

#[test]
fn dumped_grid_recount_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "c.json", &MapSpec::catalog("contraction").unwrap());
    let csv_path = dir.path().join("g.csv");
    let o = hyperlabel(&["label", "--map", &map, "--initial-res", "9", "--dump-grid", csv_path.to_str().unwrap()]);
    assert!(o.status.success());

    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["i1", "i2", "x1", "x2", "s1", "s2", "is_fixed", "residual"]
    );
    let mut labels = std::collections::HashMap::new();
    for row in rdr.records() {
        let row = row.unwrap();
        let key = (row[0].parse::<usize>().unwrap(), row[1].parse::<usize>().unwrap());
        labels.insert(key, (&row[6] == "0").then(|| format!("{} {}", &row[4], &row[5])));
    }
    let mut complete = 0;
    for i in 0..9 {
        for j in 0..9 {
            let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
            let seen: Option<std::collections::BTreeSet<_>> =
                corners.iter().map(|k| labels[k].clone()).collect();
            if seen.is_some_and(|s| s.len() == 4) {
                complete += 1;
            }
        }
    }

    let report = dir.path().join("r.json");
    let o = hyperlabel(&["solve", "--map", &map, "--initial-res", "9", "--report", report.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["depth_trace"][0]["complete_cells"], complete);
    assert!(stdout(&o).starts_with("status=fixed_point_found"));
}

#[test]
fn game_emits_spec_and_report() {
    let o = hyperlabel(&["game", "--game", "matching-pennies", "--max-depth", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["map"]["kind"], "bimatrix");
    assert_eq!(v["report"]["status"], "fixed_point_found");

    let o = hyperlabel(&["game", "--A", "1,0,0,1", "--B", "1,0,0,1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["map"]["bimatrix"]["A"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));

    let o = hyperlabel(&["game", "--A", "1,0,0", "--B", "1,0,0,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hyperlabel(&["game"]);
    assert_eq!(o.status.code(), Some(2));
}
