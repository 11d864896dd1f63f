//! The Laplacian recovery program.
//!
//! Minimize `||L||_{1,1} + (beta/n) sum_i (lambda_i/n - d_i)^2` over a valid
//! Laplacian `L` and a spectrum `lambda`, subject to
//!
//! - `||L - sum_i lambda_i v_i v_i^T||_F <= epsilon` for the templates `v_i`,
//! - `L` in the Laplacian cone (symmetric, nonpositive off-diagonal, `L 1 = 0`),
//! - `lambda_1 = 0`, `lambda_i >= 0`,
//! - `lambda_i <= lambda_{i+1+eta}` for `i` in `1..=n-1-eta`,
//! - `tr(L) = n` when `beta = 0`, which rules out the trivial `L = 0`.
//!
//! The `1/n` factor in the penalty is the midpoint-rule weight of the
//! continuous `||mu - d||_2^2`, with `mu(x) = lambda_{floor(nx)+1} / n`.

mod admm;
mod kkt;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::DegreePrior;
use crate::graphs::LaplacianMatrix;
use crate::signals::SpectralTemplates;

pub use kkt::{verify_kkt, KktFlag, KktReport};

/// Distance used in the template constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Frobenius,
}

#[derive(Clone, Debug)]
pub struct RecoveryProblem {
    templates: SpectralTemplates,
    degree_prior: Option<DegreePrior>,
    beta: f64,
    epsilon: f64,
    eta: usize,
    distance: Distance,
}

/// Validate and assemble a recovery problem. Without a prior, `beta` is forced
/// to zero.
pub fn build_problem(
    templates: SpectralTemplates,
    degree_prior: Option<DegreePrior>,
    beta: f64,
    epsilon: f64,
    eta: usize,
) -> Result<RecoveryProblem> {
    let n = templates.n();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 nodes, got {n}")));
    }
    if let Some(prior) = &degree_prior {
        if prior.len() != n {
            return Err(Error::invalid(format!(
                "degree prior has {} grid points, templates have {n} nodes",
                prior.len()
            )));
        }
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    if eta > n - 2 {
        return Err(Error::invalid(format!("eta = {eta} exceeds n - 2 = {}", n - 2)));
    }
    let beta = if degree_prior.is_some() { beta } else { 0.0 };
    Ok(RecoveryProblem {
        templates,
        degree_prior,
        beta,
        epsilon,
        eta,
        distance: Distance::Frobenius,
    })
}

impl RecoveryProblem {
    pub fn n(&self) -> usize {
        self.templates.n()
    }

    pub fn templates(&self) -> &SpectralTemplates {
        &self.templates
    }

    pub fn degree_prior(&self) -> Option<&DegreePrior> {
        self.degree_prior.as_ref()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    /// The trace anchor `tr(L) = n` is active exactly when there is no penalty.
    pub fn has_trace_anchor(&self) -> bool {
        self.beta == 0.0
    }

    /// Shrinkage penalty `(1/n) sum_i (lambda_i/n - d_i)^2`, without `beta`.
    pub fn penalty(&self, lambda: &DVector<f64>) -> f64 {
        let n = self.n() as f64;
        match &self.degree_prior {
            Some(prior) => {
                lambda
                    .iter()
                    .zip(prior.values())
                    .map(|(l, d)| (l / n - d).powi(2))
                    .sum::<f64>()
                    / n
            }
            None => 0.0,
        }
    }

    /// Objective value at `(L, lambda)`.
    pub fn objective(&self, l: &DMatrix<f64>, lambda: &DVector<f64>) -> f64 {
        let l11: f64 = l.iter().map(|v| v.abs()).sum();
        l11 + self.beta * self.penalty(lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop once both normalized residuals fall below this.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Relaxation parameter in (0, 2).
    pub over_relaxation: f64,
    /// Initial ADMM step size.
    pub penalty_rho: f64,
    /// Rescale `penalty_rho` from the residual balance.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iters: 50_000,
            over_relaxation: 1.6,
            penalty_rho: 0.1,
            adaptive_rho: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return Err(Error::Config(format!(
                "over_relaxation must lie in (0, 2), got {}",
                self.over_relaxation
            )));
        }
        if !(self.penalty_rho > 0.0 && self.penalty_rho.is_finite()) {
            return Err(Error::Config(format!(
                "penalty_rho must be > 0, got {}",
                self.penalty_rho
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

/// Multipliers for each constraint block, in the sign convention
/// `P x + q + A^T y = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Duals {
    /// Template ball constraint, as a symmetric matrix.
    pub template: DMatrix<f64>,
    /// Edge weights `w >= 0`.
    pub weights: DVector<f64>,
    /// `lambda_1 = 0`, `lambda_i >= 0`.
    pub spectrum: DVector<f64>,
    /// Slack ordering `lambda_{i+1+eta} - lambda_i >= 0`.
    pub ordering: DVector<f64>,
    /// Trace anchor, zero when inactive.
    pub anchor: f64,
}

#[derive(Clone, Debug)]
pub struct RecoverySolution {
    pub laplacian: LaplacianMatrix,
    pub spectrum: DVector<f64>,
    pub objective: f64,
    /// `||A x - z||_inf / (1 + max(||A x||_inf, ||z||_inf))`.
    pub primal_residual: f64,
    /// `||P x + q + A^T y||_inf / (1 + max(||P x||_inf, ||A^T y||_inf, ||q||_inf))`.
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Tolerance the solve was run at.
    pub tolerance: f64,
    pub duals: Option<Duals>,
}

/// Serializable summary of a [`RecoverySolution`]; the Laplacian itself is
/// stored separately as a binary matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub n: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub spectrum: Vec<f64>,
    /// File name of the Laplacian matrix, relative to the record.
    pub laplacian: String,
}

impl RecoverySolution {
    /// Write `<stem>.json` and `<stem>.bin` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<SolutionRecord> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let matrix_name = format!("{stem}.bin");
        crate::matrix_io::save_matrix(self.laplacian.matrix(), &dir.join(&matrix_name))?;
        let record = SolutionRecord {
            n: self.laplacian.n(),
            status: self.status,
            objective: self.objective,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            iterations: self.iterations,
            tolerance: self.tolerance,
            spectrum: self.spectrum.iter().copied().collect(),
            laplacian: matrix_name,
        };
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&record)? + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(record)
    }
}

/// Solve a recovery problem with the operator-splitting method.
pub fn solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<RecoverySolution> {
    cfg.validate()?;
    Ok(admm::Admm::new(p, cfg).run())
}
