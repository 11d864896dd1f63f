use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::Graphon;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    NoisyTemplates,
    SubgraphPrior,
    DatasetDenoise,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Convergence,
        ExperimentKind::NoisyTemplates,
        ExperimentKind::SubgraphPrior,
        ExperimentKind::DatasetDenoise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::NoisyTemplates => "noisy_templates",
            ExperimentKind::SubgraphPrior => "subgraph_prior",
            ExperimentKind::DatasetDenoise => "dataset_denoise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s.replace('-', "_"))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the entries of `epsilons` are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonScale {
    /// Used as given.
    #[default]
    Absolute,
    /// Multiplied by the graph size `n`.
    PerNode,
}

/// How the entries of `betas` are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaScale {
    /// Used as given.
    Absolute,
    /// Multiplied by `n^2`. The l1 term grows like `n^2` while the penalty
    /// sum does not, so the same grid then fits every graph size.
    #[default]
    NodesSquared,
}

/// Consensus filter `prod_k (I - alpha L)` with `steps` identical factors and
/// `alpha = fraction / lambda_max(L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub steps: usize,
    pub fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            steps: 1,
            fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Generating graphon for the synthetic experiments.
    #[serde(default)]
    pub graphon: Option<Graphon>,
    /// Graphon for the mismatched-prior method. Defaults to the quadratic-sum
    /// graphon with the roles of `gamma` and `1 - gamma` swapped.
    #[serde(default)]
    pub alternate_graphon: Option<Graphon>,
    /// Edge list for the dataset experiment.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Whether dataset node ids start at 1.
    #[serde(default = "default_true")]
    pub dataset_one_indexed: bool,
    /// Graph sizes `n`.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Observed subgraph sizes `n0`.
    #[serde(default)]
    pub subgraph_sizes: Vec<usize>,
    /// Numbers of observed signals `m`.
    #[serde(default)]
    pub signal_counts: Vec<usize>,
    /// Add a cell whose templates come from the exact signal covariance.
    #[serde(default)]
    pub exact_covariance: bool,
    /// Adjacency noise levels `sigma`.
    #[serde(default)]
    pub noise_levels: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub beta_scale: BetaScale,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub epsilon_scale: EpsilonScale,
    #[serde(default)]
    pub eta: usize,
    pub trials: usize,
    /// Trials per grid point when tuning `(beta, epsilon)`, drawn from a
    /// separate seed stream.
    #[serde(default = "default_tuning_trials")]
    pub tuning_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default = "experiment_solver")]
    pub solver: SolverConfig,
}

fn default_true() -> bool {
    true
}

fn default_tuning_trials() -> usize {
    3
}

fn experiment_solver() -> SolverConfig {
    SolverConfig {
        tolerance: 1e-4,
        max_iters: 20_000,
        ..SolverConfig::default()
    }
}

/// `10^(k/2)` for `k` in `lo..=hi`.
fn half_decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}

impl ExperimentConfig {
    /// Defaults reproducing each experiment at full scale.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            graphon: None,
            alternate_graphon: None,
            dataset: None,
            dataset_one_indexed: true,
            sizes: Vec::new(),
            subgraph_sizes: Vec::new(),
            signal_counts: Vec::new(),
            exact_covariance: false,
            noise_levels: Vec::new(),
            betas: half_decades(0, 6),
            beta_scale: BetaScale::NodesSquared,
            epsilons: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            epsilon_scale: EpsilonScale::Absolute,
            eta: 2,
            trials: 20,
            tuning_trials: default_tuning_trials(),
            master_seed: 0,
            filter: FilterConfig::default(),
            solver: experiment_solver(),
        };
        match kind {
            ExperimentKind::Convergence => Self {
                graphon: Some(Graphon::QuadraticSum { gamma: 0.7 }),
                sizes: vec![20, 40, 60, 80, 100],
                epsilons: vec![1e-4],
                epsilon_scale: EpsilonScale::PerNode,
                eta: 0,
                ..base
            },
            ExperimentKind::NoisyTemplates => Self {
                graphon: Some(Graphon::QuadraticSum { gamma: 0.7 }),
                sizes: vec![40],
                signal_counts: vec![100, 1_000, 10_000],
                ..base
            },
            ExperimentKind::SubgraphPrior => Self {
                graphon: Some(Graphon::MaxDecay { a: 0.8 }),
                sizes: vec![100],
                subgraph_sizes: vec![10, 30, 50, 70, 90],
                signal_counts: vec![100, 1_000, 10_000],
                betas: (4..=8).map(|k| 10f64.powf(k as f64 / 8.0)).collect(),
                epsilons: vec![4.0, 8.0, 16.0, 32.0, 64.0],
                tuning_trials: 4,
                ..base
            },
            ExperimentKind::DatasetDenoise => Self {
                dataset: Some(PathBuf::from("data/macaque.edges")),
                subgraph_sizes: vec![9, 18, 45, 91],
                noise_levels: vec![0.05, 0.1, 0.2, 0.4],
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The generating graphon; required by every synthetic experiment.
    pub fn graphon(&self) -> Result<&Graphon> {
        self.graphon
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} needs a graphon", self.experiment)))
    }

    pub fn alternate(&self) -> Result<Graphon> {
        if let Some(g) = &self.alternate_graphon {
            return Ok(g.clone());
        }
        match self.graphon()? {
            Graphon::QuadraticSum { gamma } => Graphon::quadratic_sum_swapped(*gamma),
            other => Err(Error::Config(format!(
                "no default alternate for graphon {other:?}; set alternate_graphon"
            ))),
        }
    }

    /// Solver `beta` grid for graphs of size `n`.
    pub fn betas_for(&self, n: usize) -> Vec<f64> {
        match self.beta_scale {
            BetaScale::Absolute => self.betas.clone(),
            BetaScale::NodesSquared => self.betas.iter().map(|b| b * (n * n) as f64).collect(),
        }
    }

    /// Epsilon grid for graphs of size `n`.
    pub fn epsilons_for(&self, n: usize) -> Vec<f64> {
        match self.epsilon_scale {
            EpsilonScale::Absolute => self.epsilons.clone(),
            EpsilonScale::PerNode => self.epsilons.iter().map(|e| e * n as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.tuning_trials == 0 {
            return bad("tuning_trials must be >= 1".into());
        }
        if self.betas.is_empty() || self.epsilons.is_empty() {
            return bad("beta and epsilon grids must be nonempty".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return bad(format!("beta grid value {b} must be finite and >= 0"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("epsilon grid value {e} must be finite and > 0"));
        }
        if let Some(s) = self.noise_levels.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return bad(format!("noise level {s} must be finite and >= 0"));
        }
        if !(self.filter.steps >= 1 && self.filter.fraction > 0.0 && self.filter.fraction <= 1.0) {
            return bad(format!(
                "filter needs steps >= 1 and fraction in (0, 1], got {:?}",
                self.filter
            ));
        }
        self.solver.validate()?;
        if let Some(g) = &self.graphon {
            g.clone().validated().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(g) = &self.alternate_graphon {
            g.clone().validated().map_err(|e| Error::Config(e.to_string()))?;
        }

        let needs = |name: &str, empty: bool| {
            if empty {
                Err(Error::Config(format!(
                    "{} needs a nonempty {name} grid",
                    self.experiment
                )))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            ExperimentKind::Convergence => {
                needs("sizes", self.sizes.is_empty())?;
                self.alternate()?;
            }
            ExperimentKind::NoisyTemplates => {
                needs("sizes", self.sizes.is_empty())?;
                needs("signal_counts", self.signal_counts.is_empty() && !self.exact_covariance)?;
                self.alternate()?;
            }
            ExperimentKind::SubgraphPrior => {
                needs("sizes", self.sizes.is_empty())?;
                needs("subgraph_sizes", self.subgraph_sizes.is_empty())?;
                needs("signal_counts", self.signal_counts.is_empty() && !self.exact_covariance)?;
                self.graphon()?;
                if let Some(&n0) = self.subgraph_sizes.iter().find(|&&k| k == 0) {
                    return bad(format!("subgraph size {n0} must be >= 1"));
                }
            }
            ExperimentKind::DatasetDenoise => {
                needs("subgraph_sizes", self.subgraph_sizes.is_empty())?;
                needs("noise_levels", self.noise_levels.is_empty())?;
                if self.dataset.is_none() {
                    return bad("dataset_denoise needs a dataset path".into());
                }
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::Convergence | ExperimentKind::NoisyTemplates | ExperimentKind::SubgraphPrior
        ) {
            if let Some(&n) = self.sizes.iter().find(|&&n| n < 2 || self.eta > n - 2) {
                return bad(format!("graph size {n} too small for eta = {}", self.eta));
            }
            if let Some(&n0) = self.subgraph_sizes.iter().find(|&&k| self.sizes.iter().any(|&n| k > n)) {
                return bad(format!("subgraph size {n0} exceeds a graph size"));
            }
        }
        if self.signal_counts.contains(&0) {
            return bad("signal counts must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::default_for(kind).validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::default_for(ExperimentKind::SubgraphPrior);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "convergence", "graphon": {"family": "quadratic_sum", "gamma": 0.7},
                "sizes": [10], "betas": [1.0], "epsilons": [0.01], "trials": 2}"#,
        )
        .unwrap();
        assert_eq!(cfg.tuning_trials, 3);
        assert_eq!(cfg.solver.tolerance, 1e-4);
        assert_eq!(cfg.alternate().unwrap(), Graphon::quadratic_sum_swapped(0.7).unwrap());
    }

    #[test]
    fn rejects_empty_grids() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Convergence);
        cfg.betas.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Convergence);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::NoisyTemplates);
        cfg.signal_counts.clear();
        assert!(cfg.validate().is_err());
        cfg.exact_covariance = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn per_node_scaling() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Convergence);
        assert_eq!(cfg.epsilons_for(50), vec![1e-4 * 50.0]);
        cfg.betas = vec![2.0];
        assert_eq!(cfg.betas_for(10), vec![200.0]);
        cfg.beta_scale = BetaScale::Absolute;
        assert_eq!(cfg.betas_for(10), vec![2.0]);
    }

    #[test]
    fn kind_names() {
        assert_eq!(
            ExperimentKind::parse("noisy-templates"),
            Some(ExperimentKind::NoisyTemplates)
        );
        assert_eq!(ExperimentKind::parse("nope"), None);
        assert_eq!(
            serde_json::to_string(&ExperimentKind::DatasetDenoise).unwrap(),
            "\"dataset_denoise\""
        );
    }
}
