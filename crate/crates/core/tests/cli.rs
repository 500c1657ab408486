use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fidelity_audit::runner::read_plot_csv;

const SMALL: &str = r#"
name = "cli_small"
seeds = [0, 1, 2, 3, 4]
max_test_points = 30

[dataset]
synthetic = "linear"
n = 400

[blackbox]
family = "logistic"
tune = false

[[explainers]]
kind = "lime"
n_perturbations = 300

[[explainers]]
kind = "tree"

[simulation]
group_accuracy = [0.9, 0.8]
n_per_group = 500
runs = 3
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fidelity-audit"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stdout: {}", String::from_utf8_lossy(&out.stdout));
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

#[test]
fn audit_then_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("audit");
    let o = run(bin().args(["--threads", "1", "audit", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert!(o.status.success());
    for f in ["report.json", "summary.csv", "fidelity_long.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("lime") && stdout.contains("tree"));

    let plots = dir.path().join("plots");
    let o = run(bin()
        .args(["plot-data", "--bundle"])
        .arg(out.join("report.json"))
        .arg("--out")
        .arg(&plots));
    assert!(o.status.success());
    let text = std::fs::read_to_string(plots.join("fidelity_long.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "dataset,blackbox,explainer,metric,group,seed,value"
    );
    let rows = read_plot_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2 * 30);
    for name in ["lime", "tree"] {
        assert_eq!(rows.iter().filter(|r| r.explainer == name).count(), 30);
    }
    assert!(rows.iter().all(|r| r.dataset == "linear" && r.blackbox == "logistic"));
    assert_eq!(text, std::fs::read_to_string(out.join("fidelity_long.csv")).unwrap());
}

#[test]
fn invalid_config_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "[dataset]\nsynthetic = \"linear\"\nunknown_key = 1\n");
    let o = run(bin().args(["audit", "--config"]).arg(&bad));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = run(bin().args(["audit", "--config"]).arg(dir.path().join("missing.toml")));
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = run(bin()
        .args(["sweep", "--param", "sigma", "--values", "abc", "--config"])
        .arg(&cfg));
    assert!(!o.status.success());

    let only_tree = SMALL.replace("kind = \"lime\"\nn_perturbations = 300", "kind = \"tree\"\nname = \"tree_b\"");
    let cfg = write_config(dir.path(), "trees.toml", &only_tree);
    let o = run(bin()
        .args(["sweep", "--param", "k", "--values", "1,2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("never")));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_audit_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("seeds = [0, 1, 2, 3, 4]", "seeds = [0]");
    let cfg = write_config(dir.path(), "small.toml", &text);
    let out = dir.path().join("sweep");
    let o = run(bin()
        .args(["sweep", "--param", "k", "--values", "1,3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success());
    assert!(out.join("k_1/report.json").is_file());
    assert!(out.join("k_3/report.json").is_file());
    let mut r = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["param", "param_value", "explainer", "metric", "seed", "quantity", "estimate"]
    );
    let values: Vec<String> = r.records().map(|rec| rec.unwrap()[1].to_string()).collect();
    assert!(values.contains(&"1.0".to_string()) && values.contains(&"3.0".to_string()));
}

#[test]
fn simulate_and_probe_write_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("sim");
    let o = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert!(o.status.success());
    let records = std::fs::read_to_string(out.join("sim_records.csv")).unwrap();
    // default deltas 0, .05, .10, .15; 3 runs; 2 groups
    assert_eq!(records.lines().count(), 1 + 4 * 3 * 2);
    assert!(out.join("sim_summary.csv").is_file());
    assert!(String::from_utf8_lossy(&o.stdout).contains("delta"));

    let out = dir.path().join("probe");
    let o = run(bin().args(["probe", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
    assert_eq!(v["probe"]["auroc"].as_array().unwrap().len(), 2);

    let no_sim = SMALL.split("[simulation]").next().unwrap();
    let cfg = write_config(dir.path(), "nosim.toml", no_sim);
    let o = run(bin().args(["simulate", "--config"]).arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
}
