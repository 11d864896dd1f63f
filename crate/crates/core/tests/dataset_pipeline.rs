//! The macaque pipeline run end to end on a synthetic stand-in with the same
//! node count, written in the same 1-indexed edge-list format.

use std::io::Write;

use graphon_infer::harness::{find_cell, run_dataset_denoise, summarize, ExperimentConfig, ExperimentKind, Method};
use graphon_infer::{sample_graph, Graphon};

#[test]
fn synthetic_connectome_runs_through_the_denoising_experiment() {
    let g = sample_graph(&Graphon::max_decay(0.8).unwrap(), 91, 17).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "% synthetic stand-in").unwrap();
    let a = g.adjacency();
    for i in 0..91 {
        for j in (i + 1)..91 {
            if a[(i, j)] > 0.0 {
                writeln!(f, "{} {}", i + 1, j + 1).unwrap();
            }
        }
    }
    f.flush().unwrap();

    let mut cfg = ExperimentConfig::default_for(ExperimentKind::DatasetDenoise);
    cfg.dataset = Some(f.path().to_path_buf());
    cfg.subgraph_sizes = vec![9, 91];
    cfg.noise_levels = vec![0.05, 0.4];
    cfg.betas = vec![10f64.powf(0.5)];
    cfg.epsilons = vec![4.0, 16.0];
    cfg.trials = 3;
    cfg.tuning_trials = 1;
    let out = run_dataset_denoise(&cfg, 1).unwrap();

    let check = out.dataset.unwrap();
    assert_eq!(check.nodes, 91);
    assert_eq!(check.edges, g.edge_count());
    assert_eq!(out.results.len(), 2 * 2 * 3);

    let s = summarize(&out.results);
    let mean = |n0, sigma| {
        find_cell(&s, Method::Subgraph { n0 }, 91, None, Some(sigma))
            .and_then(|c| c.mean)
            .unwrap()
    };
    assert!(mean(91, 0.4) > mean(91, 0.05));
    assert!(mean(9, 0.4) > mean(9, 0.05));
}
