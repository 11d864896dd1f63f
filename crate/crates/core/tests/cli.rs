use std::path::Path;
use std::process::{Command, Output};

use graphon_infer::graphon::read_prior_csv;
use graphon_infer::harness::read_results_csv;
use graphon_infer::matrix_io::{load_matrix, save_matrix};
use graphon_infer::{laplacian, spectrum, Graph, SpectralTemplates};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphon-infer"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_and_degree_fn() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.edges");
    let o = cli(&[
        "sample",
        "--graphon",
        "max_decay:0.8",
        "--n",
        "30",
        "--seed",
        "4",
        "--out",
        p(&edges),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&edges).unwrap().lines().count() > 10);

    let prior = dir.path().join("d.csv");
    let o = cli(&["degree-fn", "--graph", p(&edges), "--grid", "30", "--out", p(&prior)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_prior_csv(std::fs::File::open(&prior).unwrap()).unwrap();
    assert_eq!(d.len(), 30);

    let o = cli(&[
        "degree-fn",
        "--graphon",
        r#"{"family": "quadratic_sum", "gamma": 0.7}"#,
        "--grid",
        "4",
    ]);
    assert_eq!(code(&o), 0);
    let d = read_prior_csv(o.stdout.as_slice()).unwrap();
    assert!((d.values()[0] - (0.35 / 64.0 + 0.7 / 6.0 + 0.3)).abs() < 1e-12);
}

#[test]
fn infer_writes_solution_pair() {
    let dir = tempfile::tempdir().unwrap();
    let g = Graph::path(4);
    let t = SpectralTemplates::exact(&spectrum(&laplacian(&g)).unwrap());
    let vt = dir.path().join("v.bin");
    save_matrix(t.vectors(), &vt).unwrap();
    let out = dir.path().join("sol");
    let o = cli(&["infer", "--templates", p(&vt), "--epsilon", "1e-3", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let l = load_matrix(&out.join("solution.bin")).unwrap();
    assert!((l.trace() - 4.0).abs() < 1e-4);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert_eq!(json["n"], 4);
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "convergence", "graphon": {"family": "quadratic_sum", "gamma": 0.7},
            "sizes": [8, 12], "betas": [3.0], "epsilons": [1e-3], "eta": 0, "trials": 2, "tuning_trials": 1}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = cli(&[
        "experiment",
        "convergence",
        "--config",
        p(&cfg),
        "--out",
        p(&out),
        "--seed",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "results.csv",
        "summary.json",
        "timing.csv",
        "config.json",
        "tuning.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let rows = read_results_csv(std::fs::File::open(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "convergence", "sizes": []}"#).unwrap();
    let o = cli(&["experiment", "convergence", "--config", p(&bad), "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);

    let o = cli(&["experiment", "nonsense", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);

    let missing = dir.path().join("none.edges");
    let o = cli(&["fetch-dataset", "--check", "--path", p(&missing)]);
    assert_eq!(code(&o), 3);

    let small = dir.path().join("small.edges");
    std::fs::write(&small, "1 2\n2 3\n").unwrap();
    let o = cli(&["fetch-dataset", "--check", "--path", p(&small)]);
    assert_eq!(code(&o), 3);
}
