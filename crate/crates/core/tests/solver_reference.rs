use std::path::PathBuf;

use graphon_infer::graphon::PriorSource;
use graphon_infer::solver::SolveStatus;
use graphon_infer::{build_problem, solve, verify_kkt, DegreePrior, SolverConfig, SpectralTemplates, TemplateSource};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Deserialize)]
struct Instance {
    n: usize,
    templates: Vec<Vec<f64>>,
    prior: Option<Vec<f64>>,
    beta: f64,
    epsilon: f64,
    eta: usize,
    objective: f64,
}

fn load(name: &str) -> Vec<Instance> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn problem(inst: &Instance) -> graphon_infer::RecoveryProblem {
    let v = DMatrix::from_fn(inst.n, inst.n, |i, j| inst.templates[i][j]);
    let t = SpectralTemplates::new(v, TemplateSource::External).unwrap();
    let prior = inst
        .prior
        .clone()
        .map(|d| DegreePrior::new(d, PriorSource::External).unwrap());
    build_problem(t, prior, inst.beta, inst.epsilon, inst.eta).unwrap()
}

#[test]
fn hard_instances_match_reference_objective() {
    let cfg = SolverConfig {
        tolerance: 1e-9,
        max_iters: 200_000,
        ..Default::default()
    };
    for (k, inst) in load("reference_hard.json").iter().enumerate() {
        let p = problem(inst);
        let s = solve(&p, &cfg).unwrap();
        let rel = (s.objective - inst.objective).abs() / inst.objective.abs().max(1.0);
        let report = verify_kkt(&p, &s);
        eprintln!(
            "hard[{k}] n={} beta={} obj={:.8} ref={:.8} rel={rel:.2e} iters={} status={:?} flags={:?}",
            inst.n, inst.beta, s.objective, inst.objective, s.iterations, s.status, report.flags
        );
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(rel <= 1e-5, "instance {k}: relative objective error {rel:e}");
        assert!(report.max_constraint_violation() <= 1e-6, "instance {k}: {report:?}");
    }
}
