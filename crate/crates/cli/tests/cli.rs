use std::fs;
use std::process::{Command, Output};

use tempfile::TempDir;

const SPACE: &str = r#"{"points":["a","b","c","d"],"dist":[["0","1/16","1/2","1"],["1/16","0","7/16","15/16"],["1/2","7/16","0","1/2"],["1","15/16","1/2","0"]]}"#;
const W: &str = r#"{"breakpoints":[["0","0"],["1/16","1/4"],["1","1"]],"s0":"4"}"#;
const W_SEG: &str = r#"{"breakpoints":[["0","0"],["1/2","3/2"],["2","2"]],"s0":"3"}"#;

fn dir() -> TempDir {
    tempfile::tempdir().unwrap()
}

fn cfq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let tmp = dir();
    let d = tmp.path();
    let good = d.join("good.json");
    fs::write(&good, SPACE).unwrap();
    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"points":["a","b","c"],"dist":[["0","1","5"],["1","0","1"],["5","1","0"]]}"#).unwrap();
    assert_eq!(cfq(&["validate", good.to_str().unwrap()]).status.code(), Some(0));
    let o = cfq(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Triangle"));
    assert_eq!(cfq(&["validate", d.join("none.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cfq(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn segment_dot_and_csv() {
    let tmp = dir();
    let d = tmp.path();
    let o = cfq(&["build", "segment", "--d", "1/2", "--distortion", W_SEG, "--samples", "0", "--format", "dot"]);
    assert!(o.status.success());
    let dot = stdout(&o);
    assert_eq!(dot.matches("style=solid").count(), 2);
    assert_eq!(dot.matches("style=dashed").count(), 1);

    let seg = d.join("seg.json");
    let o = cfq(&["build", "segment", "--d", "2/4", "--distortion", W_SEG, "--samples", "0"]);
    fs::write(&seg, stdout(&o)).unwrap();
    assert!(stdout(&o).contains("\"g\": \"1/2\""));
    let csv = stdout(&cfq(&["export", seg.to_str().unwrap(), "--format", "csv", "--stages", "1"]));
    assert!(csv.starts_with("stage,p,q,value\n"));
    assert!(csv.contains("1,x,y,1/2\n"));
    assert!(csv.contains("1,x,t0/u,0\n"));
}

#[test]
fn theorem_b_index_two() {
    let tmp = dir();
    let d = tmp.path();
    let sp = d.join("m.json");
    fs::write(&sp, SPACE).unwrap();
    let out = d.join("y.json");
    let o = cfq(&[
        "build", "theorem-b", sp.to_str().unwrap(), "--alpha", "2", "--eps", "1/4", "--stages", "5", "--samples", "0",
        "--distortion", W, "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = stdout(&cfq(&["cf", out.to_str().unwrap(), "--format", "text"]));
    assert!(t.starts_with("curve-flat index 2\n"), "{t}");
}

#[test]
fn outputs_are_byte_stable() {
    let a = cfq(&["verify", "bending", "--instances", "5", "--seed", "9"]);
    let b = cfq(&["verify", "bending", "--instances", "5", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_writes_json_and_csv() {
    let tmp = dir();
    let d = tmp.path();
    let rep = d.join("report.json");
    let o = cfq(&["verify", "theorem-a", "--instances", "4", "--out", rep.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(json[0]["suite"], "theorem-a");
    assert_eq!(json[0]["failed"], 0);
    let csv = fs::read_to_string(rep.with_extension("csv")).unwrap();
    assert!(csv.starts_with("suite,instance,property,passed\n"));
    assert_eq!(cfq(&["verify", "nope"]).status.code(), Some(2));
}

#[test]
fn bend_and_attach() {
    let tmp = dir();
    let d = tmp.path();
    let sp = d.join("m.json");
    fs::write(&sp, SPACE).unwrap();
    let tr = d.join("t.json");
    fs::write(&tr, r#"[{"x":0,"y":3,"a":"1/4"}]"#).unwrap();
    let o = cfq(&["bend", sp.to_str().unwrap(), "--triples", tr.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["dist"][0][3], "1/4");
    let seq = cfq(&["bend", sp.to_str().unwrap(), "--triples", tr.to_str().unwrap(), "--sequential"]);
    assert_eq!(seq.stdout, o.stdout);

    let th = d.join("th.json");
    fs::write(
        &th,
        r#"[{"anchors":[0],"body":{"points":["p","q"],"dist":[["0","2"],["2","0"]]},"boundary":[0]}]"#,
    )
    .unwrap();
    let o = cfq(&["attach", "--frame", sp.to_str().unwrap(), "--threads", th.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["points"][4], "t0/q");
    assert_eq!(v["dist"][4][3], "3");
}

#[test]
fn lipq_report() {
    let tmp = dir();
    let d = tmp.path();
    let map = d.join("map.json");
    fs::write(
        &map,
        r#"{
  "source": {"points":["A","B","C"],"dist":[["0","2","2"],["2","0","2"],["2","2","0"]]},
  "target": {"points":["u","v"],"dist":[["0","1"],["1","0"]]},
  "pairs": [["A","u"],["B","u"],["C","v"]]
}"#,
    )
    .unwrap();
    let o = cfq(&["lipq", "--map", map.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["lip"], "1/2");
    assert_eq!(v["report"]["colip"], "2");
    assert_eq!(v["report"]["product"], "1");
    let t = stdout(&cfq(&["lipq", "--map", map.to_str().unwrap(), "--format", "text"]));
    assert!(t.contains("colip 2"));
}
