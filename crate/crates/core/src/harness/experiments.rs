use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::dataset::{load_macaque, DatasetCheck};
use super::grid::{pick, GridPoint};
use super::results::{sort_results, CellKey, Method, SignalCount, TrialResult, TrialStatus};
use super::seeds::{derive_seed, Stream};
use crate::error::{Error, Result};
use crate::graphon::{degree_function, sample_graph, spectral_degree_gap, DegreePrior, Graphon};
use crate::graphs::{
    empirical_degree_function, induced_subgraph, laplacian, recovery_error, spectrum, Graph, LaplacianMatrix,
};
use crate::signals::{
    estimate_templates, exact_covariance, generate_signals, templates_from_covariance, templates_from_noisy_adjacency,
    ConsensusFilter, SpectralTemplates, TemplateSource,
};
use crate::solver::{build_problem, solve, SolveStatus, SolverConfig};

/// Chosen `(beta, epsilon)` for one cell and method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub cell: CellKey,
    pub choice: GridPoint,
    /// Mean tuning error per `(beta, epsilon)`; `None` where a tuning trial failed.
    pub scores: Vec<(f64, f64, Option<f64>)>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub results: Vec<TrialResult>,
    pub tuning: Vec<TuningRecord>,
    pub dataset: Option<DatasetCheck>,
}

impl ExperimentOutput {
    /// True when no reported trial produced an error value.
    pub fn all_failed(&self) -> bool {
        self.results.iter().all(|r| r.error.is_none())
    }
}

/// Grid coordinates shared by every method: graph size, signal count, noise.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    n: usize,
    m: Option<SignalCount>,
    sigma: Option<f64>,
}

struct Instance {
    truth: LaplacianMatrix,
    templates: SpectralTemplates,
    priors: Vec<(Method, Option<DegreePrior>)>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    graphon: Option<Graphon>,
    alternate: Option<Graphon>,
    dataset: Option<Graph>,
}

impl Context<'_> {
    fn key(&self, cell: Cell, method: Method) -> CellKey {
        CellKey {
            experiment: self.cfg.experiment,
            method,
            n: cell.n,
            m: cell.m,
            sigma: cell.sigma,
        }
    }

    fn cells(&self) -> Vec<Cell> {
        let cfg = self.cfg;
        let mut counts: Vec<SignalCount> = cfg.signal_counts.iter().map(|&m| SignalCount::Finite(m)).collect();
        if cfg.exact_covariance {
            counts.push(SignalCount::Infinite);
        }
        match cfg.experiment {
            ExperimentKind::Convergence => cfg
                .sizes
                .iter()
                .map(|&n| Cell {
                    n,
                    m: None,
                    sigma: None,
                })
                .collect(),
            ExperimentKind::NoisyTemplates | ExperimentKind::SubgraphPrior => cfg
                .sizes
                .iter()
                .flat_map(|&n| {
                    counts.iter().map(move |&m| Cell {
                        n,
                        m: Some(m),
                        sigma: None,
                    })
                })
                .collect(),
            ExperimentKind::DatasetDenoise => {
                let n = self.dataset.as_ref().map_or(0, Graph::n);
                cfg.noise_levels
                    .iter()
                    .map(|&s| Cell {
                        n,
                        m: None,
                        sigma: Some(s),
                    })
                    .collect()
            }
        }
    }

    fn methods(&self) -> Vec<Method> {
        let subgraphs = || self.cfg.subgraph_sizes.iter().map(|&n0| Method::Subgraph { n0 });
        match self.cfg.experiment {
            ExperimentKind::Convergence | ExperimentKind::NoisyTemplates => {
                vec![Method::TrueGraphon, Method::AlternateGraphon, Method::NoPrior]
            }
            ExperimentKind::SubgraphPrior => std::iter::once(Method::TrueGraphon).chain(subgraphs()).collect(),
            ExperimentKind::DatasetDenoise => subgraphs().collect(),
        }
    }

    fn seed(&self, stream: Stream, component: &str, coords: &[u64]) -> u64 {
        derive_seed(self.cfg.master_seed, stream, component, coords)
    }

    fn templates(
        &self,
        cell: Cell,
        truth: &LaplacianMatrix,
        stream: Stream,
        trial: usize,
    ) -> Result<SpectralTemplates> {
        let s = spectrum(truth)?;
        let Some(m) = cell.m else {
            return Ok(SpectralTemplates::exact(&s));
        };
        let alpha = self.cfg.filter.fraction / s.lambda_max();
        let filter = ConsensusFilter::new(vec![alpha; self.cfg.filter.steps])?;
        match m {
            SignalCount::Finite(m) => {
                let seed = self.seed(stream, "signals", &[cell.n as u64, m as u64, trial as u64]);
                estimate_templates(&generate_signals(&filter, truth, m, seed)?)
            }
            SignalCount::Infinite => {
                templates_from_covariance(&exact_covariance(&filter, truth)?, TemplateSource::ExactCovariance)
            }
        }
    }

    fn instance(&self, cell: Cell, stream: Stream, trial: usize) -> Result<Instance> {
        let n = cell.n;
        let t = trial as u64;
        if let Some(g) = &self.dataset {
            let sigma = cell.sigma.unwrap_or(0.0);
            let noise_seed = self.seed(stream, "noise", &[sigma.to_bits(), t]);
            let templates = templates_from_noisy_adjacency(g, sigma, noise_seed)?;
            let priors = self
                .methods()
                .into_iter()
                .map(|method| {
                    let n0 = method.n0().expect("dataset methods are subgraph priors");
                    let sub = induced_subgraph(g, n0, self.seed(stream, "subgraph", &[n0 as u64, t]))?;
                    Ok((method, Some(empirical_degree_function(&sub, n)?)))
                })
                .collect::<Result<_>>()?;
            return Ok(Instance {
                truth: laplacian(g),
                templates,
                priors,
            });
        }

        let graphon = self.graphon.as_ref().expect("synthetic experiments carry a graphon");
        let g = sample_graph(graphon, n, self.seed(stream, "graph", &[n as u64, t]))?;
        let truth = laplacian(&g);
        let templates = self.templates(cell, &truth, stream, trial)?;
        let priors = self
            .methods()
            .into_iter()
            .map(|method| {
                let prior = match method {
                    Method::TrueGraphon => Some(degree_function(graphon, n)?),
                    Method::AlternateGraphon => {
                        Some(degree_function(self.alternate.as_ref().expect("alternate set"), n)?)
                    }
                    Method::NoPrior => None,
                    Method::Subgraph { n0 } => {
                        let sub = induced_subgraph(&g, n0, self.seed(stream, "subgraph", &[n as u64, n0 as u64, t]))?;
                        Some(empirical_degree_function(&sub, n)?)
                    }
                };
                Ok((method, prior))
            })
            .collect::<Result<_>>()?;
        Ok(Instance {
            truth,
            templates,
            priors,
        })
    }

    fn beta_grid(&self, method: Method, n: usize) -> Vec<f64> {
        if method == Method::NoPrior {
            vec![0.0]
        } else {
            self.cfg.betas_for(n)
        }
    }
}

/// Outcome of one solve.
#[derive(Clone, Copy, Debug)]
struct Outcome {
    error: Option<f64>,
    status: TrialStatus,
    iterations: usize,
    objective: Option<f64>,
    primal_residual: Option<f64>,
    dual_residual: Option<f64>,
}

impl Outcome {
    fn failed() -> Self {
        Self {
            error: None,
            status: TrialStatus::Failed,
            iterations: 0,
            objective: None,
            primal_residual: None,
            dual_residual: None,
        }
    }
}

fn run_one(
    inst: &Instance,
    prior: &Option<DegreePrior>,
    beta: f64,
    epsilon: f64,
    eta: usize,
    solver: &SolverConfig,
) -> Outcome {
    let problem = match build_problem(inst.templates.clone(), prior.clone(), beta, epsilon, eta) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("problem construction failed: {e}");
            return Outcome::failed();
        }
    };
    let sol = match solve(&problem, solver) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("solve failed: {e}");
            return Outcome::failed();
        }
    };
    let (status, error) = match sol.status {
        SolveStatus::Infeasible => (TrialStatus::Infeasible, None),
        s => match recovery_error(&sol.laplacian, &inst.truth) {
            Ok(e) => (
                if s == SolveStatus::Optimal {
                    TrialStatus::Optimal
                } else {
                    TrialStatus::MaxIters
                },
                Some(e),
            ),
            Err(Error::DegenerateInput(_)) => (TrialStatus::Degenerate, None),
            Err(e) => {
                log::warn!("error evaluation failed: {e}");
                (TrialStatus::Failed, None)
            }
        },
    };
    Outcome {
        error,
        status,
        iterations: sol.iterations,
        objective: Some(sol.objective),
        primal_residual: Some(sol.primal_residual),
        dual_residual: Some(sol.dual_residual),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Run the experiment named by `cfg.experiment` on `jobs` worker threads.
///
/// For every cell and method, `(beta, epsilon)` is first chosen by grid search
/// on `tuning_trials` instances from the tuning seed stream; the reported
/// trials then use the reporting stream. Per-trial failures are recorded in
/// the results rather than aborting the run.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (dataset, check) = match cfg.experiment {
        ExperimentKind::DatasetDenoise => {
            let path = cfg.dataset.as_ref().expect("validated");
            let (g, check) = load_macaque(path, cfg.dataset_one_indexed)?;
            if let Some(&n0) = cfg.subgraph_sizes.iter().find(|&&k| k > g.n()) {
                return Err(Error::Config(format!(
                    "subgraph size {n0} exceeds the {} dataset nodes",
                    g.n()
                )));
            }
            (Some(g), Some(check))
        }
        _ => (None, None),
    };
    let ctx = Context {
        cfg,
        graphon: match cfg.experiment {
            ExperimentKind::DatasetDenoise => None,
            _ => Some(cfg.graphon()?.clone()),
        },
        alternate: match cfg.experiment {
            ExperimentKind::Convergence | ExperimentKind::NoisyTemplates => Some(cfg.alternate()?),
            _ => None,
        },
        dataset,
    };
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        let cells = ctx.cells();
        let tuning = tune(&ctx, &cells);
        let results = report(&ctx, &cells, &tuning);
        Ok(ExperimentOutput {
            results,
            tuning: tuning.into_values().collect(),
            dataset: check,
        })
    })
}

type TuningKey = (usize, Method);

fn tune(ctx: &Context<'_>, cells: &[Cell]) -> BTreeMap<TuningKey, TuningRecord> {
    let cfg = ctx.cfg;
    let instances: Vec<Vec<Option<Instance>>> = cells
        .par_iter()
        .map(|&cell| {
            (0..cfg.tuning_trials)
                .map(|t| match ctx.instance(cell, Stream::Tune, t) {
                    Ok(inst) => Some(inst),
                    Err(e) => {
                        log::warn!("tuning instance {cell:?} trial {t} failed: {e}");
                        None
                    }
                })
                .collect()
        })
        .collect();

    let mut tasks = Vec::new();
    for (ci, &cell) in cells.iter().enumerate() {
        for method in ctx.methods() {
            for beta in ctx.beta_grid(method, cell.n) {
                for eps in cfg.epsilons_for(cell.n) {
                    for t in 0..cfg.tuning_trials {
                        tasks.push((ci, method, beta, eps, t));
                    }
                }
            }
        }
    }
    log::info!("tuning: {} solves over {} cells", tasks.len(), cells.len());
    let errors: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(ci, method, beta, eps, t)| {
            let inst = instances[ci][t].as_ref()?;
            let prior = &inst.priors.iter().find(|(m, _)| *m == method)?.1;
            run_one(inst, prior, beta, eps, cfg.eta, &cfg.solver).error
        })
        .collect();

    let mut sums: BTreeMap<TuningKey, Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for (chunk_tasks, chunk_errors) in tasks.chunks(cfg.tuning_trials).zip(errors.chunks(cfg.tuning_trials)) {
        let (ci, method, beta, eps, _) = chunk_tasks[0];
        let mean = chunk_errors
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64);
        sums.entry((ci, method)).or_default().push((beta, eps, mean));
    }
    sums.into_iter()
        .map(|((ci, method), scores)| {
            let choice = pick(&scores);
            let cell = ctx.key(cells[ci], method);
            log::info!(
                "tuned {cell:?}: beta={} epsilon={} score={}",
                choice.beta,
                choice.epsilon,
                choice.score
            );
            ((ci, method), TuningRecord { cell, choice, scores })
        })
        .collect()
}

fn report(ctx: &Context<'_>, cells: &[Cell], tuning: &BTreeMap<TuningKey, TuningRecord>) -> Vec<TrialResult> {
    let cfg = ctx.cfg;
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|ci| (0..cfg.trials).map(move |t| (ci, t)))
        .collect();
    log::info!("reporting: {} instances", tasks.len());
    let mut results: Vec<TrialResult> = tasks
        .par_iter()
        .flat_map_iter(|&(ci, trial)| {
            let cell = cells[ci];
            let inst = ctx.instance(cell, Stream::Report, trial);
            if let Err(e) = &inst {
                log::warn!("instance {cell:?} trial {trial} failed: {e}");
            }
            ctx.methods()
                .into_iter()
                .map(|method| {
                    let choice = tuning[&(ci, method)].choice;
                    let start = Instant::now();
                    let out = match &inst {
                        Ok(inst) => {
                            let prior = &inst
                                .priors
                                .iter()
                                .find(|(m, _)| *m == method)
                                .expect("prior per method")
                                .1;
                            run_one(inst, prior, choice.beta, choice.epsilon, cfg.eta, &cfg.solver)
                        }
                        Err(_) => Outcome::failed(),
                    };
                    TrialResult {
                        cell: ctx.key(cell, method),
                        trial,
                        beta: if method == Method::NoPrior { 0.0 } else { choice.beta },
                        epsilon: choice.epsilon,
                        eta: cfg.eta,
                        error: out.error,
                        status: out.status,
                        iterations: out.iterations,
                        objective: out.objective,
                        primal_residual: out.primal_residual,
                        dual_residual: out.dual_residual,
                        wall_time: start.elapsed().as_secs_f64(),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sort_results(&mut results);
    results
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment == kind {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "expected a {kind} config, got {}",
            cfg.experiment
        )))
    }
}

/// Error versus graph size with exact templates, for the true, alternate and
/// absent degree priors.
pub fn run_convergence(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Convergence)?;
    run_experiment(cfg, jobs)
}

/// Error versus number of observed signals, templates from the sample covariance.
pub fn run_noisy_templates(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::NoisyTemplates)?;
    run_experiment(cfg, jobs)
}

/// Degree priors estimated from observed induced subgraphs of several sizes,
/// against the exact graphon degree function.
pub fn run_subgraph_prior(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::SubgraphPrior)?;
    run_experiment(cfg, jobs)
}

/// Denoising a real network: templates from a noise-perturbed adjacency,
/// priors from observed subgraphs.
pub fn run_dataset_denoise(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::DatasetDenoise)?;
    run_experiment(cfg, jobs)
}

/// Discretized `||mu - d||_2` between normalized Laplacian spectra of sampled
/// graphs and the graphon degree function: `samples` values per size.
pub fn spectral_gap_samples(
    w: &Graphon,
    sizes: &[usize],
    samples: usize,
    master_seed: u64,
) -> Result<Vec<(usize, Vec<f64>)>> {
    sizes
        .iter()
        .map(|&n| {
            let prior = degree_function(w, n)?;
            let gaps = (0..samples)
                .map(|s| {
                    let seed = derive_seed(master_seed, Stream::Report, "gap", &[n as u64, s as u64]);
                    let g = sample_graph(w, n, seed)?;
                    let lam = spectrum(&laplacian(&g))?.eigenvalues;
                    spectral_degree_gap(lam.as_slice(), &prior)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((n, gaps))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::results::write_results_csv;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(kind);
        cfg.trials = 2;
        cfg.tuning_trials = 1;
        cfg.betas = vec![1.0, 10.0];
        cfg.master_seed = 11;
        match kind {
            ExperimentKind::Convergence => cfg.sizes = vec![10, 14],
            ExperimentKind::NoisyTemplates => {
                cfg.sizes = vec![12];
                cfg.signal_counts = vec![200];
                cfg.exact_covariance = true;
                cfg.epsilons = vec![0.5, 2.0];
            }
            ExperimentKind::SubgraphPrior => {
                cfg.sizes = vec![12];
                cfg.subgraph_sizes = vec![4, 12];
                cfg.signal_counts = vec![500];
                cfg.epsilons = vec![1.0];
            }
            ExperimentKind::DatasetDenoise => {}
        }
        cfg
    }

    fn csv_bytes(out: &ExperimentOutput) -> Vec<u8> {
        let mut buf = Vec::new();
        write_results_csv(&out.results, &mut buf).unwrap();
        buf
    }

    #[test]
    fn convergence_shape() {
        let out = run_convergence(&tiny(ExperimentKind::Convergence), 1).unwrap();
        assert_eq!(out.results.len(), 2 * 3 * 2);
        assert_eq!(out.tuning.len(), 2 * 3);
        for r in &out.results {
            assert_eq!(r.eta, 0);
            assert!(r.error.is_some_and(|e| e >= 0.0), "{r:?}");
        }
        let none: Vec<_> = out
            .results
            .iter()
            .filter(|r| r.cell.method == Method::NoPrior)
            .collect();
        assert!(none.iter().all(|r| r.beta == 0.0));
    }

    #[test]
    fn wrong_kind_rejected() {
        let cfg = tiny(ExperimentKind::Convergence);
        assert!(matches!(run_noisy_templates(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_across_job_counts() {
        let cfg = tiny(ExperimentKind::NoisyTemplates);
        let a = run_noisy_templates(&cfg, 1).unwrap();
        let b = run_noisy_templates(&cfg, 3).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b));
        let ms: Vec<_> = a.results.iter().filter_map(|r| r.cell.m).collect();
        assert!(ms.contains(&SignalCount::Infinite));
    }

    #[test]
    fn subgraph_methods() {
        let out = run_subgraph_prior(&tiny(ExperimentKind::SubgraphPrior), 1).unwrap();
        let methods: std::collections::BTreeSet<_> = out.results.iter().map(|r| r.cell.method).collect();
        assert_eq!(
            methods.into_iter().collect::<Vec<_>>(),
            vec![
                Method::TrueGraphon,
                Method::Subgraph { n0: 4 },
                Method::Subgraph { n0: 12 }
            ]
        );
    }

    #[test]
    fn unaffected_cells_keep_their_seeds() {
        let mut a = tiny(ExperimentKind::Convergence);
        a.sizes = vec![10];
        let mut b = a.clone();
        b.sizes = vec![10, 16];
        let ra = run_convergence(&a, 1).unwrap();
        let rb = run_convergence(&b, 1).unwrap();
        let keep: Vec<_> = rb
            .results
            .into_iter()
            .filter(|r| r.cell.n == 10)
            .map(|mut r| {
                r.wall_time = 0.0;
                r
            })
            .collect();
        let base: Vec<_> = ra
            .results
            .into_iter()
            .map(|mut r| {
                r.wall_time = 0.0;
                r
            })
            .collect();
        assert_eq!(keep, base);
    }

    #[test]
    fn missing_dataset_is_fatal() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::DatasetDenoise);
        cfg.dataset = Some("/nonexistent/edges.txt".into());
        assert!(matches!(run_dataset_denoise(&cfg, 1), Err(Error::Dataset(_))));
    }

    #[test]
    fn dataset_on_small_graph() {
        use std::io::Write;
        let g = sample_graph(&Graphon::MaxDecay { a: 0.8 }, 12, 5).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        crate::graphs::write_edge_list(&g, &mut f).unwrap();
        f.flush().unwrap();
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::DatasetDenoise);
        cfg.dataset = Some(f.path().to_path_buf());
        cfg.dataset_one_indexed = false;
        cfg.subgraph_sizes = vec![4, 12];
        cfg.noise_levels = vec![0.0, 0.2];
        cfg.betas = vec![10.0];
        cfg.epsilons = vec![1.0];
        cfg.trials = 1;
        cfg.tuning_trials = 1;
        let out = run_dataset_denoise(&cfg, 1).unwrap();
        assert_eq!(out.results.len(), 2 * 2);
        assert_eq!(out.dataset.unwrap().nodes, 12);
    }

    #[test]
    fn gap_samples_shape() {
        let w = Graphon::QuadraticSum { gamma: 0.7 };
        let s = spectral_gap_samples(&w, &[10, 20], 3, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s
            .iter()
            .all(|(_, v)| v.len() == 3 && v.iter().all(|g| g.is_finite() && *g >= 0.0)));
    }
}
