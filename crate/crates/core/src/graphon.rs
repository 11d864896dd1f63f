//! Graphon models: kernels, graph sampling and degree functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::linalg;

/// Absolute tolerance for the quadrature path of [`degree_function`].
pub const QUADRATURE_TOL: f64 = 1e-9;

/// A symmetric kernel `W: [0,1]^2 -> [0,1]` from the closed-form registry.
///
/// Serialized with a `family` tag, e.g. `{"family": "quadratic_sum", "gamma": 0.7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Graphon {
    /// `W(x, y) = p` (Erdos-Renyi).
    Constant { p: f64 },
    /// `W(x, y) = gamma/2 (x^2 + y^2) + (1 - gamma)`.
    QuadraticSum { gamma: f64 },
    /// `W(x, y) = 1 - a max(x, y)`.
    MaxDecay { a: f64 },
    /// Block-constant kernel over `k` equal-width blocks.
    Step { matrix: Vec<Vec<f64>> },
}

/// How [`degree_function_with`] evaluates `d(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeMethod {
    ClosedForm,
    Quadrature,
}

impl Graphon {
    pub fn constant(p: f64) -> Result<Self> {
        Self::Constant { p }.validated()
    }

    pub fn quadratic_sum(gamma: f64) -> Result<Self> {
        Self::QuadraticSum { gamma }.validated()
    }

    /// The "alternate" kernel `(1-gamma)/2 (x^2 + y^2) + gamma`, which is the
    /// quadratic-sum family with `gamma` replaced by `1 - gamma`.
    pub fn quadratic_sum_swapped(gamma: f64) -> Result<Self> {
        Self::QuadraticSum { gamma: 1.0 - gamma }.validated()
    }

    pub fn max_decay(a: f64) -> Result<Self> {
        Self::MaxDecay { a }.validated()
    }

    pub fn step(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::Step { matrix }.validated()
    }

    /// Check parameter ranges. Deserialized values should go through this.
    pub fn validated(self) -> Result<Self> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        match &self {
            Graphon::Constant { p } => unit("p", *p)?,
            Graphon::QuadraticSum { gamma } => unit("gamma", *gamma)?,
            Graphon::MaxDecay { a } => unit("a", *a)?,
            Graphon::Step { matrix } => {
                let k = matrix.len();
                if k == 0 {
                    return Err(Error::invalid("step graphon needs at least one block"));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::invalid(format!(
                            "step graphon matrix must be square, row {i} has {} entries",
                            row.len()
                        )));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        unit("step probability", v)?;
                        if v != matrix[j][i] {
                            return Err(Error::invalid(format!(
                                "step graphon matrix is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        match self {
            Graphon::Constant { p } => *p,
            Graphon::QuadraticSum { gamma } => 0.5 * gamma * (x * x + y * y) + (1.0 - gamma),
            Graphon::MaxDecay { a } => 1.0 - a * x.max(y),
            Graphon::Step { matrix } => {
                let k = matrix.len();
                matrix[block_of(x, k)][block_of(y, k)]
            }
        }
    }

    /// `d(x) = int_0^1 W(x, y) dy` in closed form.
    pub fn closed_form_degree(&self, x: f64) -> Option<f64> {
        let d = match self {
            Graphon::Constant { p } => *p,
            Graphon::QuadraticSum { gamma } => 0.5 * gamma * x * x + gamma / 6.0 + 1.0 - gamma,
            // Split at y = x: int_0^x (1 - a x) dy + int_x^1 (1 - a y) dy.
            Graphon::MaxDecay { a } => 1.0 - 0.5 * a * (1.0 + x * x),
            Graphon::Step { matrix } => {
                let k = matrix.len();
                let row = &matrix[block_of(x, k)];
                row.iter().sum::<f64>() / k as f64
            }
        };
        Some(d)
    }

    /// `d(x)` by adaptive Simpson quadrature over `y`, split at the kernel's
    /// non-smooth points.
    pub fn quadrature_degree(&self, x: f64) -> f64 {
        let mut cuts = vec![0.0];
        cuts.extend(self.breakpoints(x));
        cuts.push(1.0);
        let pieces = (cuts.len() - 1) as f64;
        cuts.windows(2)
            .map(|w| adaptive_simpson(&|y| self.kernel(x, y), w[0], w[1], QUADRATURE_TOL / pieces))
            .sum()
    }

    /// Interior points in `y` where `W(x, .)` may be non-smooth.
    fn breakpoints(&self, x: f64) -> Vec<f64> {
        match self {
            Graphon::MaxDecay { .. } if x > 0.0 && x < 1.0 => vec![x],
            Graphon::Step { matrix } => {
                let k = matrix.len();
                (1..k).map(|b| b as f64 / k as f64).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn block_of(t: f64, k: usize) -> usize {
    ((t * k as f64).floor() as usize).min(k - 1)
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Where a [`DegreePrior`] came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSource {
    Graphon { graphon: Graphon },
    Subgraph { n0: usize },
    External,
}

/// A degree function sampled at the midpoints `(i - 1/2) / grid`, sorted
/// ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreePrior {
    values: Vec<f64>,
    source: PriorSource,
}

impl DegreePrior {
    /// Wrap externally supplied values; they are sorted ascending.
    pub fn new(mut values: Vec<f64>, source: PriorSource) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("degree prior needs at least one value"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("degree prior value {v} is not finite")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, source })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source(&self) -> &PriorSource {
        &self.source
    }

    /// Midpoint grid coordinates matching [`values`](Self::values).
    pub fn grid(&self) -> Vec<f64> {
        midpoints(self.values.len())
    }
}

pub(crate) fn midpoints(grid: usize) -> Vec<f64> {
    (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect()
}

/// Write a prior as `x,d` CSV rows on its midpoint grid.
pub fn write_prior_csv(prior: &DegreePrior, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "d"])?;
    for (x, d) in prior.grid().iter().zip(prior.values()) {
        w.write_record([x.to_string(), d.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<prior csv>", e))?;
    Ok(())
}

/// Read the `d` column of an `x,d` CSV. The `x` column is ignored; values are
/// re-sorted onto the midpoint grid.
pub fn read_prior_csv(input: impl std::io::Read) -> Result<DegreePrior> {
    let mut r = csv::Reader::from_reader(input);
    let col = r
        .headers()?
        .iter()
        .position(|h| h.trim() == "d")
        .ok_or_else(|| Error::Parse {
            path: "<prior csv>".into(),
            line: 1,
            msg: "missing column `d`".into(),
        })?;
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("").trim();
        let v = field.parse::<f64>().map_err(|e| Error::Parse {
            path: "<prior csv>".into(),
            line: i + 2,
            msg: format!("{field:?}: {e}"),
        })?;
        values.push(v);
    }
    DegreePrior::new(values, PriorSource::External)
}

/// Latent positions drawn while sampling a graph. Diagnostic only.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDraw {
    pub latents: Vec<f64>,
    pub seed: u64,
}

/// Sample an `n`-node simple graph: i.i.d. uniform latents, then each edge
/// `{i, j}` independently with probability `W(z_i, z_j)`.
pub fn sample_graph(w: &Graphon, n: usize, seed: u64) -> Result<Graph> {
    sample_graph_with_latents(w, n, seed).map(|(g, _)| g)
}

pub fn sample_graph_with_latents(w: &Graphon, n: usize, seed: u64) -> Result<(Graph, LatentDraw)> {
    if n < 2 {
        return Err(Error::invalid(format!("graph size must be at least 2, got {n}")));
    }
    let mut rng = linalg::rng(seed);
    let latents: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = w.kernel(latents[i], latents[j]);
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    Ok((graph, LatentDraw { latents, seed }))
}

/// Degree function on a `grid`-point midpoint grid, closed form when available.
pub fn degree_function(w: &Graphon, grid: usize) -> Result<DegreePrior> {
    let method = if w.closed_form_degree(0.5).is_some() {
        DegreeMethod::ClosedForm
    } else {
        DegreeMethod::Quadrature
    };
    degree_function_with(w, grid, method)
}

pub fn degree_function_with(w: &Graphon, grid: usize, method: DegreeMethod) -> Result<DegreePrior> {
    if grid == 0 {
        return Err(Error::invalid("degree grid must have at least one point"));
    }
    let values = midpoints(grid)
        .into_iter()
        .map(|x| match method {
            DegreeMethod::ClosedForm => w.closed_form_degree(x).unwrap_or_else(|| w.quadrature_degree(x)),
            DegreeMethod::Quadrature => w.quadrature_degree(x),
        })
        .collect();
    DegreePrior::new(values, PriorSource::Graphon { graphon: w.clone() })
}

/// Discretized `||mu - d||_2` between the normalized ascending Laplacian
/// spectrum `mu(x) = lambda_{floor(nx)+1} / n` and a degree prior on the same
/// `n`-point grid.
pub fn spectral_degree_gap(eigenvalues: &[f64], prior: &DegreePrior) -> Result<f64> {
    let n = eigenvalues.len();
    if prior.len() != n {
        return Err(Error::invalid(format!(
            "prior has {} points but spectrum has {n}",
            prior.len()
        )));
    }
    let nf = n as f64;
    let sq: f64 = eigenvalues
        .iter()
        .zip(prior.values())
        .map(|(l, d)| (l / nf - d).powi(2))
        .sum();
    Ok((sq / nf).sqrt())
}
