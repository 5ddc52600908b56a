use std::path::Path;

use reebsim::reeb::GraphDocument;
use reebsim_cli::{run, ExperimentConfig};

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn args<'a>(cmd: &'a str, config: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["reebsim", cmd, "--config", config, "--out", out];
    v.extend_from_slice(extra);
    v
}

const H2: &str = r#"
seed = 7
[field]
name = "doublewell1d"
cells = [256, 256]
[coeffs]
mc_samples = 50000
[sde]
epsilon = 1e-2
n_traj = 40
[limit]
n_runs = 200
observable_samples = 200
"#;

#[test]
fn missing_field_name_is_a_config_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "seed = 2\n[field]\nc = 0.1\n");
    assert_eq!(run(args("reeb", &cfg, out.to_str().unwrap(), &[])), 2);
    assert!(!out.exists());
    let err = ExperimentConfig::from_toml("seed = 2\n[field]\nc = 0.1\n").unwrap_err();
    assert!(err.to_string().contains("name"), "{err}");
}

#[test]
fn invalid_values_are_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in [
        "[field]\nname = \"sep4d\"\n[sde]\nepsilon = -1.0\n",
        "[field]\nname = \"sep4d\"\n[graphdiff]\ndeltas = []\n",
        "[field]\nname = \"sep4d\"\n[perturbation]\ndrift = \"spiral\"\n",
        "[field]\nname = \"sep4d\"\nbogus = 1\n",
        "[field]\nname = \"harmonic\"\ndim = 3\n",
    ] {
        let cfg = write_config(dir.path(), body);
        assert_eq!(run(args("verify", &cfg, out.to_str().unwrap(), &[])), 2, "{body}");
        assert!(!out.exists());
    }
    assert_eq!(run(["reebsim", "verify"]), 2);
    assert_eq!(run(["reebsim", "frobnicate"]), 2);
}

#[test]
fn reeb_writes_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), H2);
    assert_eq!(run(args("reeb", &cfg, out.to_str().unwrap(), &[])), 0);
    let doc: GraphDocument = serde_json::from_str(&std::fs::read_to_string(out.join("reeb.json")).unwrap()).unwrap();
    assert_eq!(doc.vertices.len(), 3);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("experiment,quantity,value,reference,provenance,tolerance_kind,tolerance,pass\n"));
    assert_eq!(report.lines().count(), 4);
    assert!(!report.contains(",false"));
}

#[test]
fn coeffs_writes_tables_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), H2);
    assert_eq!(run(args("coeffs", &cfg, out.to_str().unwrap(), &[])), 0);
    for e in 0..3 {
        let csv = std::fs::read_to_string(out.join(format!("coeffs_{e}.csv"))).unwrap();
        assert!(csv.starts_with("edge,z,volume"));
    }
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("gluing.json")).unwrap()).unwrap();
    assert_eq!(side["classifications"].as_array().unwrap().len(), 3);
}

#[test]
fn branch_writes_exit_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), H2);
    let code = run(args("branch", &cfg, out.to_str().unwrap(), &[]));
    assert!(code == 0 || code == 1, "{code}");
    let exits: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("exits.json")).unwrap()).unwrap();
    assert_eq!(exits["n"], 40);
}

#[test]
fn limit_outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), H2);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        assert_eq!(run(args("limit", &cfg, out.to_str().unwrap(), &["--threads", threads])), 0);
        let read = |n: &str| std::fs::read(out.join(n)).unwrap();
        files.push((read("report.csv"), read("limit_dist.json"), read("paths_limit.csv")));
    }
    assert_eq!(files[0], files[1]);
    let dist: serde_json::Value = serde_json::from_slice(&files[0].1).unwrap();
    assert_eq!(dist["targets"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), H2);
    let mut paths = Vec::new();
    for seed in ["7", "8"] {
        let out = dir.path().join(format!("s{seed}"));
        run(args("limit", &cfg, out.to_str().unwrap(), &["--seed", seed]));
        paths.push(std::fs::read(out.join("limit_dist.json")).unwrap());
    }
    // tables are re-sampled under a new seed
    assert_ne!(paths[0], paths[1]);
}
