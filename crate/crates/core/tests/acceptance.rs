//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria run sequentially inside a single test so the reported runtimes
//! are not distorted by other tests competing for cores. The report is
//! written to stderr directly, so it appears in plain `cargo test` output.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use graphon_infer::graphon::{degree_function_with, DegreeMethod, PriorSource};
use graphon_infer::graphs::{laplacian, recovery_error, Graph, LaplacianMatrix};
use graphon_infer::harness::{
    emit_results, find_cell, run_experiment, spectral_gap_samples, summarize, CellSummary, ExperimentConfig,
    ExperimentKind, Method, SignalCount,
};
use graphon_infer::signals::{exact_covariance, generate_signals, sample_covariance, ConsensusFilter};
use graphon_infer::solver::SolveStatus;
use graphon_infer::{
    build_problem, sample_graph, solve, spectrum, verify_kkt, DegreePrior, Graphon, SolverConfig, SpectralTemplates,
    TemplateSource,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

const JOBS: usize = 1;

/// Report lines go straight to stderr so they show up without `--nocapture`.
fn say(line: String) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Report {
    lines: Vec<(usize, &'static str, Verdict, Duration)>,
}

impl Report {
    fn run(&mut self, id: usize, name: &'static str, budget: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let mut v = f();
        let elapsed = start.elapsed();
        if elapsed > budget {
            v.pass = false;
            v.detail += &format!(
                "; runtime {:.1}s exceeds {:.0}s",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            );
        }
        say(format!(
            "[{}] criterion {id}: {name} ({:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        ));
        self.lines.push((id, name, v, elapsed));
    }
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

// ---------------------------------------------------------------- criterion 1

#[derive(Deserialize)]
struct Fixture {
    n: usize,
    templates: Vec<Vec<f64>>,
    prior: Option<Vec<f64>>,
    beta: f64,
    epsilon: f64,
    eta: usize,
    objective: f64,
}

fn solver_oracle() -> Verdict {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference_exact.json");
    let fixtures: Vec<Fixture> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let cfg = SolverConfig {
        tolerance: 1e-8,
        max_iters: 200_000,
        ..Default::default()
    };
    let (mut worst_rel, mut worst_viol, mut bad) = (0.0f64, 0.0f64, Vec::new());
    for (k, f) in fixtures.iter().enumerate() {
        let v = DMatrix::from_fn(f.n, f.n, |i, j| f.templates[i][j]);
        let t = SpectralTemplates::new(v, TemplateSource::External).unwrap();
        let prior = f
            .prior
            .clone()
            .map(|d| DegreePrior::new(d, PriorSource::External).unwrap());
        let p = build_problem(t, prior, f.beta, f.epsilon, f.eta).unwrap();
        let s = solve(&p, &cfg).unwrap();
        let rel = (s.objective - f.objective).abs() / f.objective.abs().max(1e-12);
        let viol = verify_kkt(&p, &s).max_constraint_violation();
        worst_rel = worst_rel.max(rel);
        worst_viol = worst_viol.max(viol);
        if s.status != SolveStatus::Optimal || rel > 1e-5 || viol > 1e-6 {
            bad.push(k);
        }
    }
    Verdict::new(
        bad.is_empty() && fixtures.len() == 25,
        format!(
            "{} instances, max rel objective gap {worst_rel:.1e}, max constraint violation {worst_viol:.1e}, failing {bad:?}",
            fixtures.len()
        ),
    )
}

// ------------------------------------------------------------ trend helpers

fn cell(summary: &[CellSummary], method: Method, n: usize, m: Option<SignalCount>, sigma: Option<f64>) -> (f64, f64) {
    let c = find_cell(summary, method, n, m, sigma).unwrap_or_else(|| panic!("missing cell {method} n={n} m={m:?}"));
    (c.mean.unwrap_or(f64::INFINITY), c.sem().unwrap_or(f64::INFINITY))
}

fn pooled(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Count adjacent pairs of `(mean, sem)` that increase, and how many of those
/// increases exceed one pooled standard error.
fn increases(seq: &[(f64, f64)]) -> (usize, usize) {
    let mut any = 0;
    let mut large = 0;
    for w in seq.windows(2) {
        if w[1].0 > w[0].0 {
            any += 1;
            if w[1].0 - w[0].0 > pooled(w[0].1, w[1].1) {
                large += 1;
            }
        }
    }
    (any, large)
}

fn fmt_means(seq: &[(f64, f64)]) -> String {
    seq.iter().map(|(m, _)| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- criterion 2

fn convergence() -> Verdict {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Convergence);
    let out = run_experiment(&cfg, JOBS).unwrap();
    let s = summarize(&out.results);
    let mut ok = true;
    let mut parts = Vec::new();
    for &n in &cfg.sizes {
        let t = cell(&s, Method::TrueGraphon, n, None, None);
        let a = cell(&s, Method::AlternateGraphon, n, None, None);
        let b = cell(&s, Method::NoPrior, n, None, None);
        let order = t.0 <= a.0 && a.0 <= b.0;
        let strict = n < 40 || (a.0 - t.0 >= pooled(t.1, a.1) && b.0 - a.0 >= pooled(a.1, b.1));
        ok &= order && strict;
        parts.push(format!("n={n}: {:.4}/{:.4}/{:.4}", t.0, a.0, b.0));
    }
    Verdict::new(ok, format!("true/alternate/none means {}", parts.join(", ")))
}

// ---------------------------------------------------------------- criterion 3

fn noisy_templates() -> Verdict {
    let cfg = ExperimentConfig::default_for(ExperimentKind::NoisyTemplates);
    let out = run_experiment(&cfg, JOBS).unwrap();
    let s = summarize(&out.results);
    let n = cfg.sizes[0];
    let ms: Vec<_> = cfg
        .signal_counts
        .iter()
        .map(|&m| Some(SignalCount::Finite(m)))
        .collect();
    let t: Vec<_> = ms.iter().map(|&m| cell(&s, Method::TrueGraphon, n, m, None)).collect();
    let b: Vec<_> = ms.iter().map(|&m| cell(&s, Method::NoPrior, n, m, None)).collect();
    let decreasing = t.windows(2).all(|w| w[1].0 < w[0].0);
    let below = t.iter().zip(&b).all(|(t, b)| b.0 - t.0 >= pooled(t.1, b.1));
    Verdict::new(
        decreasing && below,
        format!(
            "m={:?}: true {} | none {}",
            cfg.signal_counts,
            fmt_means(&t),
            fmt_means(&b)
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn subgraph_prior() -> Verdict {
    let cfg = ExperimentConfig::default_for(ExperimentKind::SubgraphPrior);
    let out = run_experiment(&cfg, JOBS).unwrap();
    let s = summarize(&out.results);
    let n = cfg.sizes[0];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut adjacent_violations = 0;
    for &count in &cfg.signal_counts {
        let m = Some(SignalCount::Finite(count));
        let seq: Vec<_> = cfg
            .subgraph_sizes
            .iter()
            .map(|&n0| cell(&s, Method::Subgraph { n0 }, n, m, None))
            .collect();
        let (any, large) = increases(&seq);
        adjacent_violations += any;
        ok &= large == 0;
        parts.push(format!("m={count}: {}", fmt_means(&seq)));
    }
    ok &= adjacent_violations <= 1;
    let m_max = Some(SignalCount::Finite(*cfg.signal_counts.iter().max().unwrap()));
    let exact = cell(&s, Method::TrueGraphon, n, m_max, None).0;
    let envelope = cfg
        .subgraph_sizes
        .iter()
        .all(|&n0| exact <= cell(&s, Method::Subgraph { n0 }, n, m_max, None).0);
    ok &= envelope;
    Verdict::new(
        ok,
        format!(
            "n0={:?}; {}; exact d_W at largest m {exact:.4}; {adjacent_violations} adjacent increase(s)",
            cfg.subgraph_sizes,
            parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn macaque_path() -> PathBuf {
    std::env::var_os("GRAPHON_INFER_MACAQUE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/macaque.edges"))
}

fn dataset_denoise() -> Verdict {
    let path = macaque_path();
    if !path.exists() {
        return Verdict::new(
            false,
            format!(
                "dataset not available at {} (set GRAPHON_INFER_MACAQUE); criterion not evaluated",
                path.display()
            ),
        );
    }
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::DatasetDenoise);
    cfg.dataset = Some(path);
    let out = match run_experiment(&cfg, JOBS) {
        Ok(o) => o,
        Err(e) => return Verdict::new(false, format!("run failed: {e}")),
    };
    let check = out.dataset.unwrap();
    let s = summarize(&out.results);
    let n = check.nodes;
    let mut violations = 0;
    let mut large = 0;
    let mut parts = Vec::new();
    for &sigma in &cfg.noise_levels {
        let seq: Vec<_> = cfg
            .subgraph_sizes
            .iter()
            .map(|&n0| cell(&s, Method::Subgraph { n0 }, n, None, Some(sigma)))
            .collect();
        let (a, l) = increases(&seq);
        violations += a;
        large += l;
        parts.push(format!("sigma={sigma}: {}", fmt_means(&seq)));
    }
    for &n0 in &cfg.subgraph_sizes {
        let seq: Vec<_> = cfg
            .noise_levels
            .iter()
            .map(|&sigma| {
                let (m, e) = cell(&s, Method::Subgraph { n0 }, n, None, Some(sigma));
                (-m, e)
            })
            .collect();
        let (a, l) = increases(&seq);
        violations += a;
        large += l;
    }
    Verdict::new(
        check.matches_macaque() && violations <= 1 && large == 0,
        format!(
            "{} nodes / {} edges; {}; {violations} monotonicity violation(s)",
            check.nodes,
            check.edges,
            parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn spectral_concentration() -> Verdict {
    let w = Graphon::quadratic_sum(0.7).unwrap();
    let sizes = [50, 100, 200, 400];
    let samples = spectral_gap_samples(&w, &sizes, 20, 2024).unwrap();
    let medians: Vec<f64> = samples
        .into_iter()
        .map(|(_, mut g)| {
            g.sort_by(f64::total_cmp);
            0.5 * (g[9] + g[10])
        })
        .collect();
    Verdict::new(
        medians.windows(2).all(|w| w[1] < w[0]),
        format!(
            "median ||mu - d||_2 over n={sizes:?}: {}",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn random_laplacian(rng: &mut ChaCha8Rng) -> LaplacianMatrix {
    let n = rng.random_range(2..25);
    let density: f64 = rng.random();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.01..5.0)));
            }
        }
    }
    laplacian(&Graph::from_weighted_edges(n, edges).unwrap())
}

fn determinism_hash(dir: &std::path::Path) -> String {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::NoisyTemplates);
    cfg.sizes = vec![16];
    cfg.signal_counts = vec![200, 2000];
    cfg.trials = 4;
    cfg.tuning_trials = 2;
    cfg.master_seed = 77;
    let out = run_experiment(&cfg, JOBS).unwrap();
    emit_results(&out.results, dir).unwrap();
    let bytes = std::fs::read(dir.join("results.csv")).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unit_properties() -> Verdict {
    let mut failures = Vec::new();

    let graphons = [
        Graphon::constant(0.3).unwrap(),
        Graphon::quadratic_sum(0.7).unwrap(),
        Graphon::max_decay(0.8).unwrap(),
        Graphon::step(vec![vec![0.9, 0.2, 0.1], vec![0.2, 0.6, 0.3], vec![0.1, 0.3, 0.5]]).unwrap(),
    ];
    let mut quad_gap = 0.0f64;
    for w in &graphons {
        let closed = degree_function_with(w, 101, DegreeMethod::ClosedForm).unwrap();
        let quad = degree_function_with(w, 101, DegreeMethod::Quadrature).unwrap();
        for (a, b) in closed.values().iter().zip(quad.values()) {
            quad_gap = quad_gap.max((a - b).abs());
        }
    }
    if quad_gap > 1e-8 {
        failures.push(format!("quadrature gap {quad_gap:e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut l11_gap = 0.0f64;
    let mut scale_gap = 0.0f64;
    for _ in 0..100 {
        let l = random_laplacian(&mut rng);
        l11_gap = l11_gap.max((l.l11_norm() - 2.0 * l.trace()).abs() / (1.0 + l.l11_norm()));
        let other = random_laplacian(&mut rng);
        if other.n() == l.n() && l.frobenius_norm() > 0.0 && other.frobenius_norm() > 0.0 {
            let c = rng.random_range(1e-3..1e3);
            let scaled = LaplacianMatrix::new(l.matrix() * c).unwrap();
            let e1 = recovery_error(&l, &other).unwrap();
            let e2 = recovery_error(&scaled, &other).unwrap();
            scale_gap = scale_gap.max((e1 - e2).abs());
        }
        if l.frobenius_norm() > 0.0 {
            let c = rng.random_range(1e-3..1e3);
            let scaled = LaplacianMatrix::new(l.matrix() * c).unwrap();
            scale_gap = scale_gap.max(recovery_error(&scaled, &l).unwrap());
        }
    }
    if l11_gap > 1e-12 {
        failures.push(format!("l11 identity gap {l11_gap:e}"));
    }
    if scale_gap > 1e-12 {
        failures.push(format!("scale invariance gap {scale_gap:e}"));
    }

    let g = sample_graph(&Graphon::quadratic_sum(0.7).unwrap(), 30, 5).unwrap();
    let l = laplacian(&g);
    let f = ConsensusFilter::single_step(spectrum(&l).unwrap().lambda_max(), 0.9).unwrap();
    let truth = exact_covariance(&f, &l).unwrap();
    let cov_err: Vec<f64> = [100, 1_000, 10_000]
        .iter()
        .map(|&m| {
            (0..5u64)
                .map(|s| {
                    let c = sample_covariance(&generate_signals(&f, &l, m, 100 + s).unwrap()).unwrap();
                    (&c - &truth).norm() / truth.norm()
                })
                .sum::<f64>()
                / 5.0
        })
        .collect();
    if !cov_err.windows(2).all(|w| w[1] < w[0]) {
        failures.push(format!("covariance error not decreasing: {cov_err:?}"));
    }

    let tmp = tempfile::tempdir().unwrap();
    let h1 = determinism_hash(&tmp.path().join("a"));
    let h2 = determinism_hash(&tmp.path().join("b"));
    if h1 != h2 {
        failures.push(format!("CSV hashes differ: {h1} vs {h2}"));
    }

    Verdict::new(
        failures.is_empty(),
        format!(
            "quadrature {quad_gap:.1e}, l11 {l11_gap:.1e}, scale {scale_gap:.1e}, cov err {}, csv sha256 {}{}",
            cov_err
                .iter()
                .map(|e| format!("{e:.3}"))
                .collect::<Vec<_>>()
                .join(" > "),
            &h1[..16],
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    )
}

#[test]
fn acceptance() {
    say(String::new());
    let mut report = Report { lines: Vec::new() };
    report.run(
        1,
        "solver matches reference conic solver",
        Duration::from_secs(30),
        solver_oracle,
    );
    report.run(2, "error vs graph size ordering", minutes(10), convergence);
    report.run(3, "noisy templates trend", minutes(15), noisy_templates);
    report.run(4, "subgraph degree prior trend", minutes(30), subgraph_prior);
    report.run(5, "macaque denoising trend", minutes(20), dataset_denoise);
    report.run(
        6,
        "spectrum concentrates on degree function",
        minutes(2),
        spectral_concentration,
    );
    report.run(
        7,
        "unit and property suites, byte determinism",
        minutes(5),
        unit_properties,
    );

    let passed = report.lines.iter().filter(|l| l.2.pass).count();
    say(format!("acceptance: {passed}/{} criteria passed", report.lines.len()));

    // Criterion 5 needs an external dataset that is not shipped; its line
    // above reports FAIL when the file is absent, but only a present dataset
    // can make the run fail.
    let dataset_present = macaque_path().exists();
    let hard_failures: Vec<_> = report
        .lines
        .iter()
        .filter(|l| !l.2.pass && (l.0 != 5 || dataset_present))
        .map(|l| l.0)
        .collect();
    assert!(hard_failures.is_empty(), "failed criteria: {hard_failures:?}");
}
