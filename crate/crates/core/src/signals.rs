//! Consensus-filtered graph signals and spectral template estimation.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{laplacian, perturb_adjacency, spectrum, Graph, LaplacianMatrix, Spectrum};
use crate::linalg;

/// Relative slack on the `alpha_k <= 1 / lambda_max` check.
const COEFF_SLACK: f64 = 1e-12;

/// `H(L) = prod_k (I - alpha_k L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusFilter {
    coefficients: Vec<f64>,
}

impl ConsensusFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidFilter("filter order must be at least 1".into()));
        }
        if let Some(a) = coefficients.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidFilter(format!("coefficient {a} is not positive")));
        }
        Ok(Self { coefficients })
    }

    /// Single step `I - alpha L` with `alpha = fraction / lambda_max`.
    pub fn single_step(lambda_max: f64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidFilter(format!("step fraction {fraction} outside (0, 1]")));
        }
        let alpha = if lambda_max > 0.0 {
            fraction / lambda_max
        } else {
            fraction
        };
        Self::new(vec![alpha])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Scalar response `h(lambda) = prod_k (1 - alpha_k lambda)`.
    pub fn response(&self, lambda: f64) -> f64 {
        self.coefficients.iter().map(|a| 1.0 - a * lambda).product()
    }

    /// Every coefficient must satisfy `alpha_k <= 1 / lambda_max`, otherwise
    /// `h` is no longer nonnegative and nonincreasing on the spectrum.
    pub fn check_against(&self, lambda_max: f64) -> Result<()> {
        for &a in &self.coefficients {
            if a * lambda_max > 1.0 + COEFF_SLACK {
                return Err(Error::InvalidFilter(format!(
                    "coefficient {a} exceeds 1/lambda_max = {}",
                    1.0 / lambda_max
                )));
            }
        }
        Ok(())
    }

    fn apply_in_place(&self, l: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        for &a in &self.coefficients {
            let ly = l * &*y;
            *y -= ly * a;
        }
    }
}

fn lambda_max(l: &LaplacianMatrix) -> Result<f64> {
    linalg::ensure_square(l.matrix(), "Laplacian")?;
    if l.n() == 0 {
        return Ok(0.0);
    }
    let asym = linalg::max_asymmetry(l.matrix());
    if asym > 1e-9 * l.matrix().amax().max(1.0) {
        return Err(Error::invalid("Laplacian is not symmetric"));
    }
    let sym = (l.matrix() + l.matrix().transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max))
}

/// `prod_k (I - alpha_k L) w` by successive matrix-vector products.
pub fn apply_filter(f: &ConsensusFilter, l: &LaplacianMatrix, w: &DVector<f64>) -> Result<DVector<f64>> {
    if w.len() != l.n() {
        return Err(Error::invalid(format!(
            "signal has {} entries, graph has {}",
            w.len(),
            l.n()
        )));
    }
    f.check_against(lambda_max(l)?)?;
    let mut y = DMatrix::from_column_slice(w.len(), 1, w.as_slice());
    f.apply_in_place(l.matrix(), &mut y);
    Ok(y.column(0).into_owned())
}

/// `m` signals `H(L) w` with `w ~ N(0, I)`, one per column.
pub fn generate_signals(f: &ConsensusFilter, l: &LaplacianMatrix, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::invalid("need at least one signal"));
    }
    f.check_against(lambda_max(l)?)?;
    let n = l.n();
    let mut rng = linalg::rng(seed);
    // Column-major fill: each signal's inputs are drawn consecutively.
    let mut y = DMatrix::from_iterator(n, m, (0..n * m).map(|_| StandardNormal.sample(&mut rng)));
    f.apply_in_place(l.matrix(), &mut y);
    Ok(y)
}

/// `C_y = H^2(L) = V diag(h(lambda)^2) V^T`.
pub fn exact_covariance(f: &ConsensusFilter, l: &LaplacianMatrix) -> Result<DMatrix<f64>> {
    let s = spectrum(l)?;
    f.check_against(s.lambda_max())?;
    Ok(s.reconstruct_with(|lam| f.response(lam).powi(2)))
}

/// Sample covariance `Y Y^T / m` of zero-mean signals.
pub fn sample_covariance(signals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = signals.ncols();
    if m == 0 {
        return Err(Error::invalid("need at least one signal"));
    }
    Ok(signals * signals.transpose() / m as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateSource {
    Exact,
    SampleCovariance { m: usize },
    ExactCovariance,
    NoisyAdjacency { sigma: f64 },
    External,
}

/// Orthonormal basis whose column `i` approximates the eigenvector of the
/// `i`-th smallest Laplacian eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTemplates {
    vectors: DMatrix<f64>,
    source: TemplateSource,
}

impl SpectralTemplates {
    pub fn new(vectors: DMatrix<f64>, source: TemplateSource) -> Result<Self> {
        linalg::ensure_square(&vectors, "template matrix")?;
        let defect = linalg::orthonormality_defect(&vectors);
        if defect > 1e-8 {
            return Err(Error::invalid(format!(
                "templates are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { vectors, source })
    }

    /// Eigenvectors of a known spectrum.
    pub fn exact(s: &Spectrum) -> Self {
        Self {
            vectors: s.eigenvectors.clone(),
            source: TemplateSource::Exact,
        }
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn source(&self) -> TemplateSource {
        self.source
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Rows permuted so row `perm[i]` is the old row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        crate::graphs::check_permutation(perm, n)?;
        let mut v = DMatrix::zeros(n, n);
        for (i, &p) in perm.iter().enumerate() {
            v.set_row(p, &self.vectors.row(i));
        }
        Ok(Self {
            vectors: v,
            source: self.source,
        })
    }

    /// `min_{s = +-1} ||v_hat_i - s v_i||_2` per column.
    pub fn alignment_errors(&self, truth: &DMatrix<f64>) -> Vec<f64> {
        self.vectors
            .column_iter()
            .zip(truth.column_iter())
            .map(|(a, b)| (a - b).norm().min((a + b).norm()))
            .collect()
    }
}

/// Templates from a covariance matrix: eigenvectors ordered by descending
/// covariance eigenvalue, which matches ascending Laplacian eigenvalues when
/// the filter response is nonincreasing. Ties keep the eigensolver's order.
pub fn templates_from_covariance(cov: &DMatrix<f64>, source: TemplateSource) -> Result<SpectralTemplates> {
    let (values, vectors) = linalg::symmetric_eigen_ascending(cov)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &vectors.column(src));
    }
    linalg::canonicalize_signs(&mut out);
    Ok(SpectralTemplates { vectors: out, source })
}

/// Templates from the sample covariance of zero-mean signals (columns).
pub fn estimate_templates(signals: &DMatrix<f64>) -> Result<SpectralTemplates> {
    let cov = sample_covariance(signals)?;
    templates_from_covariance(&cov, TemplateSource::SampleCovariance { m: signals.ncols() })
}

/// Eigenvectors, ascending, of the Laplacian of a noise-perturbed adjacency.
pub fn templates_from_noisy_adjacency(g: &Graph, sigma: f64, seed: u64) -> Result<SpectralTemplates> {
    let noisy = perturb_adjacency(g, sigma, seed)?;
    let s = spectrum(&laplacian(&noisy))?;
    Ok(SpectralTemplates {
        vectors: s.eigenvectors,
        source: TemplateSource::NoisyAdjacency { sigma },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use approx::assert_relative_eq;

    #[test]
    fn identity_on_empty_graph() {
        let l = laplacian(&Graph::empty(4));
        let f = ConsensusFilter::new(vec![0.3, 0.7]).unwrap();
        let w = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(apply_filter(&f, &l, &w).unwrap(), w);
        let sig = generate_signals(&f, &l, 3, 5).unwrap();
        let raw = generate_signals(&ConsensusFilter::new(vec![1.0]).unwrap(), &l, 3, 5).unwrap();
        assert_eq!(sig, raw);
        assert_eq!(exact_covariance(&f, &l).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn constant_signal_is_fixed() {
        let g = Graph::path(5);
        let l = laplacian(&g);
        let f = ConsensusFilter::single_step(spectrum(&l).unwrap().lambda_max(), 0.9).unwrap();
        let ones = DVector::from_element(5, 1.0);
        let y = apply_filter(&f, &l, &ones).unwrap();
        assert!((y - ones).amax() < 1e-14);
    }

    #[test]
    fn rejects_large_coefficient() {
        let l = laplacian(&Graph::complete(3));
        let f = ConsensusFilter::new(vec![0.5]).unwrap();
        let w = DVector::from_element(3, 1.0);
        assert!(matches!(apply_filter(&f, &l, &w), Err(Error::InvalidFilter(_))));
        assert!(matches!(generate_signals(&f, &l, 2, 0), Err(Error::InvalidFilter(_))));
        assert!(matches!(exact_covariance(&f, &l), Err(Error::InvalidFilter(_))));
        assert!(ConsensusFilter::new(vec![]).is_err());
        assert!(ConsensusFilter::new(vec![-0.1]).is_err());
    }

    #[test]
    fn k3_covariance_eigenvalues() {
        let l = laplacian(&Graph::complete(3));
        let f = ConsensusFilter::new(vec![0.2]).unwrap();
        let c = exact_covariance(&f, &l).unwrap();
        let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], 0.16, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 0.16, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn templates_from_exact_k3_covariance() {
        let l = laplacian(&Graph::complete(3));
        let f = ConsensusFilter::new(vec![0.2]).unwrap();
        let t = templates_from_covariance(&exact_covariance(&f, &l).unwrap(), TemplateSource::ExactCovariance).unwrap();
        let v1 = t.vectors().column(0);
        for i in 0..3 {
            assert_relative_eq!(v1[i], 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        }
        assert!(linalg::orthonormality_defect(t.vectors()) < 1e-12);
    }

    #[test]
    fn noiseless_adjacency_templates_are_exact() {
        let g = Graph::complete(3);
        let t = templates_from_noisy_adjacency(&g, 0.0, 7).unwrap();
        let s = spectrum(&laplacian(&g)).unwrap();
        assert_eq!(t.vectors(), &s.eigenvectors);
        let v1 = t.vectors().column(0);
        assert!((v1[0] - v1[1]).abs() < 1e-12 && (v1[1] - v1[2]).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_templates_are_orthonormal() {
        let l = laplacian(&Graph::path(10));
        let f = ConsensusFilter::single_step(spectrum(&l).unwrap().lambda_max(), 0.9).unwrap();
        let y = generate_signals(&f, &l, 3, 11).unwrap();
        let t = estimate_templates(&y).unwrap();
        assert!(linalg::orthonormality_defect(t.vectors()) < 1e-8);
        assert_eq!(t.source(), TemplateSource::SampleCovariance { m: 3 });
    }
}
