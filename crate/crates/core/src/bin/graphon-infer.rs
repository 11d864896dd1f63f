use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphon_infer::graphon::{degree_function, read_prior_csv, sample_graph, write_prior_csv, Graphon};
use graphon_infer::graphs::{empirical_degree_function, read_edge_list, write_edge_list, EdgeListOptions};
use graphon_infer::harness::{self, emit_results, ExperimentConfig, ExperimentKind, MACAQUE_EDGES, MACAQUE_NODES};
use graphon_infer::matrix_io::load_matrix;
use graphon_infer::signals::{SpectralTemplates, TemplateSource};
use graphon_infer::solver::{build_problem, solve, SolveStatus, SolverConfig};
use graphon_infer::Error;

#[derive(Parser)]
#[command(
    name = "graphon-infer",
    version,
    about = "Laplacian inference with graphon degree priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph from a graphon and write it as an edge list.
    Sample {
        /// Graphon as inline JSON, a JSON file, or `family:param`
        /// (e.g. `quadratic_sum:0.7`, `max_decay:0.8`, `constant:0.5`).
        #[arg(long)]
        graphon: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a degree prior (`x,d` CSV) from a graphon or an observed graph.
    DegreeFn {
        #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
        graphon: Option<String>,
        /// Edge list of an observed graph.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        one_indexed: bool,
        /// Number of grid points (the size of the graph to be inferred).
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer a Laplacian from spectral templates and an optional degree prior.
    Infer {
        /// Binary matrix whose columns are the templates, ascending.
        #[arg(long)]
        templates: PathBuf,
        /// Degree prior CSV; without it the trace-anchored baseline is solved.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        eta: usize,
        /// Solver settings as JSON.
        #[arg(long)]
        solver: Option<PathBuf>,
        /// Output directory for `solution.json` and `solution.bin`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the experiments and write CSV/JSON results.
    Experiment {
        /// convergence, noisy_templates, subgraph_prior or dataset_denoise.
        name: String,
        /// JSON config; the experiment's defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Validate the local macaque edge list.
    FetchDataset {
        #[arg(long)]
        check: bool,
        #[arg(long, default_value = "data/macaque.edges")]
        path: PathBuf,
        /// Node ids start at 0 rather than 1.
        #[arg(long)]
        zero_indexed: bool,
    },
}

enum Failure {
    Lib(Error),
    AllInfeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn parse_graphon(arg: &str) -> Result<Graphon, Error> {
    let arg = arg.trim();
    let text = if arg.starts_with('{') {
        arg.to_string()
    } else if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?
    } else {
        let (family, param) = arg
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("cannot parse graphon {arg:?}")))?;
        let v: f64 = param
            .parse()
            .map_err(|e| Error::Config(format!("graphon parameter {param:?}: {e}")))?;
        return match family {
            "constant" => Graphon::constant(v),
            "quadratic_sum" => Graphon::quadratic_sum(v),
            "max_decay" => Graphon::max_decay(v),
            other => Err(Error::Config(format!("unknown graphon family {other:?}"))),
        };
    };
    let g: Graphon = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    g.validated()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sample { graphon, n, seed, out } => {
            let g = sample_graph(&parse_graphon(&graphon)?, n, seed)?;
            let mut w = output(out.as_deref())?;
            write_edge_list(&g, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(out.unwrap_or_else(|| "<stdout>".into()), e))?;
        }
        Command::DegreeFn {
            graphon,
            graph,
            one_indexed,
            grid,
            out,
        } => {
            let prior = match (graphon, graph) {
                (Some(arg), _) => degree_function(&parse_graphon(&arg)?, grid)?,
                (None, Some(path)) => {
                    let opts = EdgeListOptions {
                        one_indexed,
                        ..Default::default()
                    };
                    empirical_degree_function(&read_edge_list(&path, opts)?, grid)?
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            write_prior_csv(&prior, output(out.as_deref())?)?;
        }
        Command::Infer {
            templates,
            prior,
            beta,
            epsilon,
            eta,
            solver,
            out,
        } => {
            let vectors = load_matrix(&templates)?;
            let templates = SpectralTemplates::new(vectors, TemplateSource::External)?;
            let prior = match prior {
                Some(p) => Some(read_prior_csv(File::open(&p).map_err(|e| Error::io(&p, e))?)?),
                None => None,
            };
            let cfg = match solver {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str::<SolverConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => SolverConfig::default(),
            };
            let problem = build_problem(templates, prior, beta, epsilon, eta)?;
            let sol = solve(&problem, &cfg)?;
            let record = sol.save(&out, "solution")?;
            eprintln!(
                "status {:?}, objective {:.6}, {} iterations",
                record.status, record.objective, record.iterations
            );
            if sol.status == SolveStatus::Infeasible {
                return Err(Failure::AllInfeasible("problem is infeasible".into()));
            }
        }
        Command::Experiment {
            name,
            config,
            out,
            seed,
            jobs,
            trials,
        } => {
            let kind =
                ExperimentKind::parse(&name).ok_or_else(|| Error::Config(format!("unknown experiment {name:?}")))?;
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default_for(kind),
            };
            if cfg.experiment != kind {
                return Err(Error::Config(format!("config is for {}, not {kind}", cfg.experiment)).into());
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let result = harness::run_experiment(&cfg, jobs)?;
            emit_results(&result.results, &out)?;
            write_json(&out.join("config.json"), &cfg)?;
            write_json(&out.join("tuning.json"), &result.tuning)?;
            eprintln!("{} trials written to {}", result.results.len(), out.display());
            if result.all_failed() {
                return Err(Failure::AllInfeasible("no cell produced a usable estimate".into()));
            }
        }
        Command::FetchDataset {
            check,
            path,
            zero_indexed,
        } => {
            if !check {
                println!(
                    "Automatic download is not supported. Place the Rhesus macaque cortical \
                     network ({MACAQUE_NODES} regions, {MACAQUE_EDGES} undirected edges) as a \
                     whitespace-separated edge list at {} and rerun with --check.",
                    path.display()
                );
                return Ok(());
            }
            let (_, found) = harness::load_macaque(&path, !zero_indexed)?;
            if !found.matches_macaque() {
                return Err(Error::Dataset(format!(
                    "{}: expected {MACAQUE_NODES} nodes / {MACAQUE_EDGES} edges, found {} / {}",
                    path.display(),
                    found.nodes,
                    found.edges
                ))
                .into());
            }
            println!("{}: {} nodes, {} edges", path.display(), found.nodes, found.edges);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::AllInfeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Dataset(_) => 3,
                _ => 1,
            })
        }
    }
}
