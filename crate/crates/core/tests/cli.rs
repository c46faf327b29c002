use std::process::{Command, Output};

use dpsoa::harness::RunConfig;
use dpsoa::record::RunRecord;

fn dpsoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpsoa")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ldim_prints_dimension() {
    let o = dpsoa(&["ldim", "--class", "thresholds:8"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "3\n");
    assert_eq!(stdout(&dpsoa(&["ldim", "--class", "full:5"])), "5\n");
}

#[test]
fn ldim_reads_class_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("class.txt");
    std::fs::write(&path, "3 4\n000\n100\n110\n111\n").unwrap();
    let o = dpsoa(&["ldim", "--class", path.to_str().unwrap()]);
    assert_eq!(stdout(&o), "2\n", "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn params_prints_exact_values() {
    let o = dpsoa(&["params", "--d", "1", "--T", "1000", "--epsilon", "1", "--delta", "0.01"]);
    assert!(o.status.success());
    let s = stdout(&o);
    // η = 2^−82/20, c = 80/η
    assert!(s.contains("k1 = 20\n"));
    assert!(s.contains("eta = 1/96714065569170333976494080\n"));
    assert!(s.contains("c = 7737125245533626718119526400\n"));
    assert!(s.lines().any(|l| l.starts_with("k2 = ")));
}

#[test]
fn usage_errors_exit_2() {
    let missing_k2 = dpsoa(&["dpsoa-run", "--class", "points:4", "--T", "10", "--k1", "4", "--eta", "0.5", "--c", "2"]);
    assert_eq!(missing_k2.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_k2.stderr).contains("--k2"));
    assert_eq!(dpsoa(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dpsoa(&["ldim", "--class", "points:3", "--bogus"]).status.code(), Some(2));
    assert_eq!(dpsoa(&["audit", "--mechanism", "coin-flip"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    assert_eq!(dpsoa(&["ldim", "--class", "spheres:3"]).status.code(), Some(1));
    let theory = dpsoa(&["dpsoa-run", "--class", "points:4", "--T", "10", "--params", "theory"]);
    assert_eq!(theory.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&theory.stderr).contains("not runnable"));
    let adaptive = dpsoa(&[
        "dpsoa-run", "--class", "points:4", "--T", "10", "--adversary", "disagree", "--k1", "2", "--k2", "4", "--eta", "0.5", "--c", "2",
    ]);
    assert_eq!(adaptive.status.code(), Some(1));
    let few = dpsoa(&["audit", "--mechanism", "laplace-count", "--trials", "500"]);
    assert_eq!(few.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&few.stderr).contains("insufficient trials"));
}

#[test]
fn dpsoa_run_writes_transcripts_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = dpsoa(&[
        "dpsoa-run", "--class", "points:8", "--T", "100", "--k1", "4", "--k2", "16", "--eta", "0.5", "--c", "2", "--seed", "3",
        "--trials", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("runs 2"));
    for i in 0..2 {
        let text = std::fs::read_to_string(dir.path().join(format!("run.{i}.csv"))).unwrap();
        let rec = RunRecord::read_csv(text.as_bytes(), 0).unwrap();
        assert_eq!(rec.len(), 100);
        assert!(rec.rounds.iter().all(|r| r.mistake == (r.y != r.yhat) as u8));
    }
    let config = RunConfig::from_json(&std::fs::read_to_string(dir.path().join("run.csv.config")).unwrap()).unwrap();
    assert_eq!(config.seed, 3);
    assert_eq!(config.algorithm.unwrap().k2, 16);
    let summary = std::fs::read_to_string(dir.path().join("run.csv.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let curve = std::fs::read_to_string(dir.path().join("run.csv.curve.csv")).unwrap();
    assert!(curve.lines().any(|l| l.starts_with("64,")));
}

#[test]
fn adaptive_run_adds_instance_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = dpsoa(&[
        "adaptive-run", "--class", "points:4", "--adversary", "mistake-tree", "--T", "12", "--k1", "2", "--k2", "8", "--eta", "0.5",
        "--c", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,x,y,yhat,mistake,pertinent_size,counter,hist_call,while_iters,instance_seed"
    );
}

#[test]
fn hist_demo_and_audit_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo.csv");
    let o = dpsoa(&["hist-demo", "--k", "1000", "--T", "50", "--out", demo.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&demo).unwrap().starts_with("t,published,hist_call,counter,freq_current,freq_previous,aborted\n"));
    assert!(dir.path().join("demo.csv.config").exists());

    let buckets = dir.path().join("audit.csv");
    let o = dpsoa(&["audit", "--mechanism", "laplace-count", "--epsilon", "0.5", "--trials", "20000", "--out", buckets.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("pass"));
    assert_eq!(std::fs::read_to_string(&buckets).unwrap().lines().count(), 3);
}
