use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{RecoveryProblem, RecoverySolution};
use crate::graphs::ConeViolation;

/// Independent audit of a returned solution.
#[derive(Clone, Debug, Serialize)]
pub struct KktReport {
    /// Objective recomputed from `(L, lambda)`.
    pub objective: f64,
    /// `|objective - reported objective|`.
    pub objective_mismatch: f64,
    /// `| ||L||_{1,1} - 2 tr(L) |`.
    pub l11_trace_gap: f64,
    pub cone: ConeViolationReport,
    /// `max(0, ||L - V diag(lambda) V^T||_F - epsilon)`.
    pub template_violation: f64,
    /// `max(|lambda_1|, max_i -lambda_i)`.
    pub spectrum_violation: f64,
    /// `max_i lambda_i - lambda_{i+1+eta}`, floored at zero.
    pub ordering_violation: f64,
    /// `|tr(L) - n|` when the trace anchor is active.
    pub anchor_violation: f64,
    /// Primal minus dual objective, when multipliers are available.
    pub duality_gap: Option<f64>,
    /// Threshold used for the flags: ten times the solve tolerance, scaled.
    pub threshold: f64,
    pub flags: Vec<KktFlag>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConeViolationReport {
    pub asymmetry: f64,
    pub row_sum: f64,
    pub positive_off_diagonal: f64,
    pub negative_diagonal: f64,
}

impl From<ConeViolation> for ConeViolationReport {
    fn from(v: ConeViolation) -> Self {
        Self {
            asymmetry: v.asymmetry,
            row_sum: v.row_sum,
            positive_off_diagonal: v.positive_off_diagonal,
            negative_diagonal: v.negative_diagonal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KktFlag {
    Objective,
    L11Identity,
    LaplacianCone,
    Template,
    Spectrum,
    Ordering,
    Anchor,
    DualityGap,
}

impl KktReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn has(&self, flag: KktFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Largest primal constraint violation.
    pub fn max_constraint_violation(&self) -> f64 {
        [
            self.cone.asymmetry,
            self.cone.row_sum,
            self.cone.positive_off_diagonal,
            self.cone.negative_diagonal,
            self.template_violation,
            self.spectrum_violation,
            self.ordering_violation,
            self.anchor_violation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn synthesize(v: &DMatrix<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= lambda[k];
    }
    scaled * v.transpose()
}

/// Recompute the objective and every constraint of `p` at `s`, and estimate
/// the duality gap from the returned multipliers. Anything above ten times the
/// solve tolerance (scaled by the problem's magnitude) is flagged.
pub fn verify_kkt(p: &RecoveryProblem, s: &RecoverySolution) -> KktReport {
    let n = p.n();
    let l = s.laplacian.matrix();
    let lambda = &s.spectrum;
    let v = p.templates().vectors();

    let objective = p.objective(l, lambda);
    let trace = l.trace();
    let l11: f64 = l.iter().map(|x| x.abs()).sum();
    let cone = s.laplacian.membership_violation();
    let template_gap = (l - synthesize(v, lambda)).norm();
    let template_violation = (template_gap - p.epsilon()).max(0.0);
    let spectrum_violation = lambda[0].abs().max(lambda.iter().map(|x| -x).fold(0.0, f64::max));
    let eta = p.eta();
    let ordering_violation = (0..n.saturating_sub(1 + eta))
        .map(|i| lambda[i] - lambda[i + 1 + eta])
        .fold(0.0, f64::max);
    let anchor_violation = if p.has_trace_anchor() {
        (trace - n as f64).abs()
    } else {
        0.0
    };

    let duality_gap = s.duals.as_ref().map(|d| {
        // gap = x^T P x + q^T x + support_C(y); one-sided rows contribute only
        // through stationarity, which the residual already covers.
        let nf = n as f64;
        let quad = 2.0 * p.beta() / (nf * nf * nf);
        let lin = match p.degree_prior() {
            Some(prior) if p.beta() > 0.0 => lambda
                .iter()
                .zip(prior.values())
                .map(|(l, d)| -2.0 * p.beta() * d / (nf * nf) * l)
                .sum::<f64>(),
            _ => 0.0,
        };
        let support = p.epsilon() * d.template.norm() + if p.has_trace_anchor() { nf * d.anchor } else { 0.0 };
        quad * lambda.norm_squared() + 2.0 * trace + lin + support
    });

    let scale = 1.0 + l.amax().max(lambda.amax());
    let threshold = 10.0 * s.tolerance * scale;
    let mut flags = Vec::new();
    if (objective - s.objective).abs() > threshold * (1.0 + objective.abs()) {
        flags.push(KktFlag::Objective);
    }
    if (l11 - 2.0 * trace).abs() > 1e-9 * (1.0 + l11) {
        flags.push(KktFlag::L11Identity);
    }
    if cone.max() > threshold {
        flags.push(KktFlag::LaplacianCone);
    }
    if template_violation > threshold * (n as f64) {
        flags.push(KktFlag::Template);
    }
    if spectrum_violation > threshold {
        flags.push(KktFlag::Spectrum);
    }
    if ordering_violation > threshold {
        flags.push(KktFlag::Ordering);
    }
    if anchor_violation > threshold * (n as f64) {
        flags.push(KktFlag::Anchor);
    }
    if let Some(gap) = duality_gap {
        if gap.abs() > threshold * (1.0 + objective.abs()) {
            flags.push(KktFlag::DualityGap);
        }
    }

    KktReport {
        objective,
        objective_mismatch: (objective - s.objective).abs(),
        l11_trace_gap: (l11 - 2.0 * trace).abs(),
        cone: cone.into(),
        template_violation,
        spectrum_violation,
        ordering_violation,
        anchor_violation,
        duality_gap,
        threshold,
        flags,
    }
}
