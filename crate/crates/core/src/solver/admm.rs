//! OSQP-style ADMM for the recovery program.
//!
//! Variables are the edge weights `w` (one per node pair, `L = B w` with
//! `B w = sum_e w_e (e_i - e_j)(e_i - e_j)^T`) and the spectrum `lambda`, so
//! cone membership of `L` reduces to `w >= 0`. Constraints are stacked as
//! `A x in C` with blocks
//!
//! | block    | `A x`                              | set                      |
//! |----------|------------------------------------|--------------------------|
//! | template | `B w - V diag(lambda) V^T`         | Frobenius ball, radius eps |
//! | weights  | `w`                                | `[0, inf)`               |
//! | spectrum | `lambda`                           | `{0} x [0, inf)^(n-1)`   |
//! | ordering | `lambda_{i+1+eta} - lambda_i`      | `[0, inf)`               |
//! | anchor   | `2 1^T w` (= tr L)                 | `{n}`                    |
//!
//! The x-update solves `(P + sigma I + A^T R A) x = r`. With orthonormal
//! templates, `B^T B = 2I + N^T N` (`N` the unsigned incidence matrix of the
//! complete graph), so the weight block is identity plus rank `n` and the
//! whole system reduces to two `n x n` Cholesky factors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Duals, RecoveryProblem, RecoverySolution, SolveStatus, SolverConfig};
use crate::graphs::LaplacianMatrix;

const SIGMA: f64 = 1e-6;
const EQ_RHO_SCALE: f64 = 1e3;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;
const ADAPT_FACTOR: f64 = 5.0;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const INFEASIBILITY_TOL: f64 = 1e-5;

/// One value per constraint block.
#[derive(Clone, Debug)]
struct Blocks {
    template: DMatrix<f64>,
    weights: DVector<f64>,
    spectrum: DVector<f64>,
    ordering: DVector<f64>,
    anchor: f64,
}

impl Blocks {
    fn zeros(n: usize, p: usize, n_order: usize) -> Self {
        Self {
            template: DMatrix::zeros(n, n),
            weights: DVector::zeros(p),
            spectrum: DVector::zeros(n),
            ordering: DVector::zeros(n_order),
            anchor: 0.0,
        }
    }

    /// `a * self + b * other`.
    fn combine(&self, a: f64, other: &Blocks, b: f64) -> Blocks {
        Blocks {
            template: &self.template * a + &other.template * b,
            weights: &self.weights * a + &other.weights * b,
            spectrum: &self.spectrum * a + &other.spectrum * b,
            ordering: &self.ordering * a + &other.ordering * b,
            anchor: self.anchor * a + other.anchor * b,
        }
    }

    fn norm_inf(&self) -> f64 {
        self.template
            .amax()
            .max(self.weights.amax())
            .max(self.spectrum.amax())
            .max(if self.ordering.is_empty() {
                0.0
            } else {
                self.ordering.amax()
            })
            .max(self.anchor.abs())
    }
}

/// Factorization of the x-update system for one step size.
struct Factor {
    rho: f64,
    /// `sigma + 2 rho + rho`, the identity part of the weight block.
    diag: f64,
    /// `a M^{-1} + N N^T`, used by the Woodbury solve of the weight block.
    woodbury: Cholesky<f64, Dyn>,
    /// `K_ww^{-1} C`.
    kww_inv_c: DMatrix<f64>,
    /// Schur complement on the spectrum block.
    schur: Cholesky<f64, Dyn>,
}

pub(super) struct Admm<'a> {
    problem: &'a RecoveryProblem,
    cfg: &'a SolverConfig,
    n: usize,
    eta: usize,
    n_order: usize,
    edges: Vec<(usize, usize)>,
    templates: &'a DMatrix<f64>,
    /// `C[e, k] = (v_k[i] - v_k[j])^2 = <E_e, v_k v_k^T>`.
    coupling: DMatrix<f64>,
    /// Diagonal of `P` on the spectrum block.
    quad: f64,
    lin_w: f64,
    lin_lambda: DVector<f64>,
    anchor: bool,
}

impl<'a> Admm<'a> {
    pub(super) fn new(problem: &'a RecoveryProblem, cfg: &'a SolverConfig) -> Self {
        let n = problem.n();
        let eta = problem.eta();
        let templates = problem.templates().vectors();
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let coupling = DMatrix::from_fn(edges.len(), n, |e, k| {
            let (i, j) = edges[e];
            (templates[(i, k)] - templates[(j, k)]).powi(2)
        });
        let nf = n as f64;
        let beta = problem.beta();
        let lin_lambda = match problem.degree_prior() {
            Some(prior) if beta > 0.0 => {
                DVector::from_iterator(n, prior.values().iter().map(|d| -2.0 * beta * d / (nf * nf)))
            }
            _ => DVector::zeros(n),
        };
        Self {
            problem,
            cfg,
            n,
            eta,
            n_order: n - 1 - eta,
            edges,
            templates,
            coupling,
            quad: 2.0 * beta / (nf * nf * nf),
            // ||L||_{1,1} = 4 sum_e w_e on the cone.
            lin_w: 4.0,
            lin_lambda,
            anchor: problem.has_trace_anchor(),
        }
    }

    fn p(&self) -> usize {
        self.edges.len()
    }

    fn rho_spectrum(&self, rho: f64) -> DVector<f64> {
        let mut r = DVector::from_element(self.n, rho);
        r[0] = EQ_RHO_SCALE * rho;
        r
    }

    fn rho_anchor(&self, rho: f64) -> f64 {
        if self.anchor {
            EQ_RHO_SCALE * rho
        } else {
            0.0
        }
    }

    /// `L = B w`.
    fn laplacian_of(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let we = w[e];
            l[(i, j)] -= we;
            l[(j, i)] -= we;
            l[(i, i)] += we;
            l[(j, j)] += we;
        }
        l
    }

    /// `V diag(lambda) V^T`.
    fn synthesize(&self, lambda: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.templates.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= lambda[k];
        }
        scaled * self.templates.transpose()
    }

    fn apply_a(&self, w: &DVector<f64>, lambda: &DVector<f64>) -> Blocks {
        let template = self.laplacian_of(w) - self.synthesize(lambda);
        let ordering = DVector::from_fn(self.n_order, |r, _| lambda[r + 1 + self.eta] - lambda[r]);
        Blocks {
            template,
            weights: w.clone(),
            spectrum: lambda.clone(),
            ordering,
            anchor: if self.anchor { 2.0 * w.sum() } else { 0.0 },
        }
    }

    fn apply_at(&self, y: &Blocks) -> (DVector<f64>, DVector<f64>) {
        let s = &y.template;
        let mut gw = DVector::from_fn(self.p(), |e, _| {
            let (i, j) = self.edges[e];
            s[(i, i)] + s[(j, j)] - s[(i, j)] - s[(j, i)]
        });
        gw += &y.weights;
        if self.anchor {
            gw.add_scalar_mut(2.0 * y.anchor);
        }
        let sv = s * self.templates;
        let mut gl = DVector::from_fn(self.n, |k, _| -self.templates.column(k).dot(&sv.column(k)));
        gl += &y.spectrum;
        for r in 0..self.n_order {
            gl[r + 1 + self.eta] += y.ordering[r];
            gl[r] -= y.ordering[r];
        }
        (gw, gl)
    }

    fn project(&self, v: &mut Blocks) {
        let eps = self.problem.epsilon();
        let norm = v.template.norm();
        if norm > eps {
            v.template *= eps / norm;
        }
        v.weights.apply(|x| *x = x.max(0.0));
        v.spectrum.apply(|x| *x = x.max(0.0));
        v.spectrum[0] = 0.0;
        v.ordering.apply(|x| *x = x.max(0.0));
        v.anchor = if self.anchor { self.n as f64 } else { 0.0 };
    }

    /// `(N r)_i = sum_{e ∋ i} r_e`.
    fn incidence(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            out[i] += r[e];
            out[j] += r[e];
        }
        out
    }

    fn incidence_t(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.p(), |e, _| {
            let (i, j) = self.edges[e];
            u[i] + u[j]
        })
    }

    fn factor(&self, rho: f64) -> Factor {
        let n = self.n;
        let nf = n as f64;
        let rho_t = self.rho_anchor(rho);
        let diag = SIGMA + 2.0 * rho + rho;
        // M = rho I + rho_t J; M^{-1} = (I - rho_t / (rho + n rho_t) J) / rho.
        let j_coef = rho_t / (rho + nf * rho_t);
        let mut woodbury = DMatrix::from_element(n, n, -diag * j_coef / rho);
        for i in 0..n {
            woodbury[(i, i)] += diag / rho;
        }
        // N N^T = (n - 2) I + J for the complete edge set.
        woodbury.add_scalar_mut(1.0);
        for i in 0..n {
            woodbury[(i, i)] += nf - 2.0;
        }
        let woodbury = Cholesky::new(woodbury).expect("Woodbury core is positive definite");

        // G = K_ww^{-1} C = (C - N^T Q^{-1} N C) / a, column by column.
        let mut kww_inv_c = self.coupling.clone();
        for k in 0..n {
            let col = self.coupling.column(k).into_owned();
            let solved = self.kww_solve_with(&woodbury, diag, &col);
            kww_inv_c.set_column(k, &solved);
        }

        let mut schur = -(self.coupling.transpose() * &kww_inv_c) * (rho * rho);
        let rho_l = self.rho_spectrum(rho);
        for i in 0..n {
            schur[(i, i)] += self.quad + SIGMA + rho + rho_l[i];
        }
        for r in 0..self.n_order {
            let a = r;
            let b = r + 1 + self.eta;
            schur[(a, a)] += rho;
            schur[(b, b)] += rho;
            schur[(a, b)] -= rho;
            schur[(b, a)] -= rho;
        }
        let schur =
            Cholesky::new((&schur + schur.transpose()) * 0.5).expect("Schur complement of a positive definite system");
        Factor {
            rho,
            diag,
            woodbury,
            kww_inv_c,
            schur,
        }
    }

    fn kww_solve_with(&self, woodbury: &Cholesky<f64, Dyn>, diag: f64, r: &DVector<f64>) -> DVector<f64> {
        let nr = self.incidence(r);
        let inner = woodbury.solve(&nr);
        (r - self.incidence_t(&inner)) / diag
    }

    fn solve_kkt(&self, f: &Factor, rw: &DVector<f64>, rl: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let t = self.kww_solve_with(&f.woodbury, f.diag, rw);
        let rhs = rl + self.coupling.tr_mul(&t) * f.rho;
        let lambda = f.schur.solve(&rhs);
        let w = t + &f.kww_inv_c * &lambda * f.rho;
        (w, lambda)
    }

    fn rho_blocks(&self, rho: f64) -> (f64, DVector<f64>, f64) {
        (rho, self.rho_spectrum(rho), self.rho_anchor(rho))
    }

    /// `R v` with the per-block step sizes.
    fn scale_r(&self, rho: f64, v: &Blocks) -> Blocks {
        let (r, rl, rt) = self.rho_blocks(rho);
        Blocks {
            template: &v.template * r,
            weights: &v.weights * r,
            spectrum: v.spectrum.component_mul(&rl),
            ordering: &v.ordering * r,
            anchor: v.anchor * rt,
        }
    }

    fn scale_r_inv(&self, rho: f64, v: &Blocks) -> Blocks {
        let (r, rl, rt) = self.rho_blocks(rho);
        Blocks {
            template: &v.template / r,
            weights: &v.weights / r,
            spectrum: v.spectrum.component_div(&rl),
            ordering: &v.ordering / r,
            anchor: if rt > 0.0 { v.anchor / rt } else { 0.0 },
        }
    }

    /// Support function of the constraint set, restricted to directions that
    /// can certify infeasibility.
    fn infeasibility_certificate(&self, dy: &Blocks) -> bool {
        let scale = dy.norm_inf();
        if scale <= 0.0 {
            return false;
        }
        let tol = INFEASIBILITY_TOL * scale;
        // One-sided rows need nonpositive multipliers.
        let one_sided_ok = dy.weights.iter().all(|&v| v <= tol)
            && dy.spectrum.iter().skip(1).all(|&v| v <= tol)
            && dy.ordering.iter().all(|&v| v <= tol);
        if !one_sided_ok {
            return false;
        }
        let support =
            self.problem.epsilon() * dy.template.norm() + if self.anchor { self.n as f64 * dy.anchor } else { 0.0 };
        if support >= -tol {
            return false;
        }
        let (gw, gl) = self.apply_at(dy);
        gw.amax().max(gl.amax()) <= tol
    }

    pub(super) fn run(&self) -> RecoverySolution {
        let n = self.n;
        let p = self.p();
        let alpha = self.cfg.over_relaxation;
        let tol = self.cfg.tolerance;
        let q_w = DVector::from_element(p, self.lin_w);
        let q_norm = self.lin_w.max(self.lin_lambda.amax());

        let mut rho = self.cfg.penalty_rho;
        let mut factor = self.factor(rho);

        let mut w = DVector::zeros(p);
        let mut lambda = DVector::zeros(n);
        let mut ax = Blocks::zeros(n, p, self.n_order);
        let mut z = Blocks::zeros(n, p, self.n_order);
        let mut y = Blocks::zeros(n, p, self.n_order);

        let mut best: Option<(f64, Snapshot)> = None;
        let mut status = SolveStatus::MaxIters;
        let mut iterations = self.cfg.max_iters;
        let mut last = (f64::INFINITY, f64::INFINITY);

        for k in 1..=self.cfg.max_iters {
            // x-update.
            let rz_minus_y = self.scale_r(rho, &z).combine(1.0, &y, -1.0);
            let (atw, atl) = self.apply_at(&rz_minus_y);
            let rw = &w * SIGMA - &q_w + atw;
            let rl = &lambda * SIGMA - &self.lin_lambda + atl;
            let (w_tilde, l_tilde) = self.solve_kkt(&factor, &rw, &rl);
            let ax_tilde = self.apply_a(&w_tilde, &l_tilde);

            w = &w_tilde * alpha + &w * (1.0 - alpha);
            lambda = &l_tilde * alpha + &lambda * (1.0 - alpha);
            ax = ax_tilde.combine(alpha, &ax, 1.0 - alpha);

            // z- and y-updates.
            let relaxed = ax_tilde.combine(alpha, &z, 1.0 - alpha);
            let mut z_new = relaxed.combine(1.0, &self.scale_r_inv(rho, &y), 1.0);
            self.project(&mut z_new);
            let dy = self.scale_r(rho, &relaxed.combine(1.0, &z_new, -1.0));
            let y_new = y.combine(1.0, &dy, 1.0);
            z = z_new;
            y = y_new;

            if k % CHECK_EVERY != 0 && k != self.cfg.max_iters {
                continue;
            }

            let (atyw, atyl) = self.apply_at(&y);
            let prim_raw = ax.combine(1.0, &z, -1.0).norm_inf();
            let px_l = &lambda * self.quad;
            let dual_w = &q_w + &atyw;
            let dual_l = &px_l + &self.lin_lambda + &atyl;
            let dual_raw = dual_w.amax().max(dual_l.amax());
            let prim_scale = ax.norm_inf().max(z.norm_inf());
            let dual_scale = px_l.amax().max(atyw.amax().max(atyl.amax())).max(q_norm);
            let prim = prim_raw / (1.0 + prim_scale);
            let dual = dual_raw / (1.0 + dual_scale);
            last = (prim, dual);

            let merit = prim.max(dual);
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((
                    merit,
                    Snapshot {
                        w: w.clone(),
                        lambda: lambda.clone(),
                        y: y.clone(),
                        prim,
                        dual,
                    },
                ));
            }

            if prim <= tol && dual <= tol {
                status = SolveStatus::Optimal;
                iterations = k;
                break;
            }

            if self.infeasibility_certificate(&dy) {
                status = SolveStatus::Infeasible;
                iterations = k;
                break;
            }

            if self.cfg.adaptive_rho && k % ADAPT_EVERY == 0 {
                let ratio = (prim_raw / prim_scale.max(1e-30)) / (dual_raw / dual_scale.max(1e-30));
                let proposed = (rho * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
                if proposed.is_finite() && (proposed > ADAPT_FACTOR * rho || proposed < rho / ADAPT_FACTOR) {
                    rho = proposed;
                    factor = self.factor(rho);
                }
            }
        }

        let (w_out, l_out, y_out, prim, dual) = match (status, best) {
            (SolveStatus::MaxIters, Some((_, snap))) => (snap.w, snap.lambda, snap.y, snap.prim, snap.dual),
            _ => (w, lambda, y, last.0, last.1),
        };
        self.finish(w_out, l_out, y_out, prim, dual, iterations, status)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        mut w: DVector<f64>,
        mut lambda: DVector<f64>,
        y: Blocks,
        prim: f64,
        dual: f64,
        iterations: usize,
        status: SolveStatus,
    ) -> RecoverySolution {
        w.apply(|x| *x = x.max(0.0));
        lambda.apply(|x| *x = x.max(0.0));
        lambda[0] = 0.0;
        let l = self.laplacian_of(&w);
        let objective = self.problem.objective(&l, &lambda);
        RecoverySolution {
            laplacian: LaplacianMatrix::new_unchecked(l),
            spectrum: lambda,
            objective,
            primal_residual: prim,
            dual_residual: dual,
            iterations,
            status,
            tolerance: self.cfg.tolerance,
            duals: Some(Duals {
                template: y.template,
                weights: y.weights,
                spectrum: y.spectrum,
                ordering: y.ordering,
                anchor: y.anchor,
            }),
        }
    }
}

struct Snapshot {
    w: DVector<f64>,
    lambda: DVector<f64>,
    y: Blocks,
    prim: f64,
    dual: f64,
}
