//! Graphs, Laplacians, spectra and the recovery error metric.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graphon::{midpoints, DegreePrior, PriorSource};
use crate::linalg;

/// Undirected graph stored as a dense symmetric adjacency matrix with zero
/// diagonal. Entries are 0/1 for sampled graphs; real values are allowed for
/// weighted and noise-perturbed graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_square(&adjacency, "adjacency")?;
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        if adjacency.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("adjacency has non-finite entries"));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("adjacency has a self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::invalid(format!("adjacency is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Unweighted graph from an edge list; duplicates are merged, self-loops rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_weighted_edges(n, edges.iter().map(|&(u, v)| (u, v, 1.0)))
    }

    pub fn from_weighted_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut a = DMatrix::zeros(n, n);
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            a[(u, v)] = w;
            a[(v, u)] = w;
        }
        Ok(Self { adjacency: a })
    }

    pub fn complete(n: usize) -> Self {
        let mut a = DMatrix::from_element(n, n, 1.0);
        a.fill_diagonal(0.0);
        Self { adjacency: a }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(n, n),
        }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    /// Node 0 is the hub.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges).expect("star edges are valid")
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_iter().map(|r| r.sum()).collect()
    }

    /// Number of node pairs `i < j` with a nonzero adjacency entry.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0.0)
            .count()
    }

    /// Relabel nodes: node `perm[i]` of the result is node `i` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        check_permutation(perm, n)?;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        Ok(Self { adjacency: a })
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::invalid(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::invalid("not a permutation"));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Symmetric matrix with nonpositive off-diagonals and zero row sums.
///
/// [`laplacian`] builds one from any [`Graph`]; for noise-perturbed graphs with
/// negative weights the off-diagonal sign condition does not hold, and the
/// result is only meant as a source of eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix {
    matrix: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// Validates membership in the Laplacian cone at the tolerances of
    /// [`membership_violation`](Self::membership_violation).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_square(&matrix, "Laplacian")?;
        let l = Self { matrix };
        let v = l.membership_violation();
        if !v.within_tolerance(l.n()) {
            return Err(Error::invalid(format!("matrix is not a valid Laplacian: {v:?}")));
        }
        Ok(l)
    }

    /// Wrap without checking cone membership.
    pub fn new_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Element-wise l1 norm `||L||_{1,1}`.
    pub fn l11_norm(&self) -> f64 {
        self.matrix.iter().map(|v| v.abs()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn membership_violation(&self) -> ConeViolation {
        let m = &self.matrix;
        let n = m.nrows();
        let mut v = ConeViolation {
            asymmetry: linalg::max_asymmetry(m),
            ..Default::default()
        };
        for i in 0..n {
            v.row_sum = v.row_sum.max(m.row(i).sum().abs());
            v.negative_diagonal = v.negative_diagonal.max(-m[(i, i)]);
            for j in 0..n {
                if i != j {
                    v.positive_off_diagonal = v.positive_off_diagonal.max(m[(i, j)]);
                }
            }
        }
        v
    }

    /// Adjacency implied by the off-diagonal entries.
    pub fn to_graph(&self) -> Result<Graph> {
        let mut a = -self.matrix.clone();
        a.fill_diagonal(0.0);
        Graph::from_adjacency((&a + a.transpose()) * 0.5)
    }
}

/// Worst-case departures from the Laplacian cone; all zero for a valid member.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConeViolation {
    pub asymmetry: f64,
    pub row_sum: f64,
    pub positive_off_diagonal: f64,
    pub negative_diagonal: f64,
}

impl ConeViolation {
    /// `|row sum| <= 1e-9 n`, off-diagonals `<= 1e-9`, diagonal `>= -1e-9`.
    pub fn within_tolerance(&self, n: usize) -> bool {
        self.asymmetry <= 1e-9
            && self.row_sum <= 1e-9 * n.max(1) as f64
            && self.positive_off_diagonal <= 1e-9
            && self.negative_diagonal <= 1e-9
    }

    pub fn max(&self) -> f64 {
        self.asymmetry
            .max(self.row_sum)
            .max(self.positive_off_diagonal)
            .max(self.negative_diagonal)
    }
}

/// Ascending eigenvalues with paired orthonormal eigenvectors (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// `L = D - A` with `D = diag(A 1)`.
pub fn laplacian(g: &Graph) -> LaplacianMatrix {
    let mut l = -g.adjacency.clone();
    for (i, d) in g.degrees().into_iter().enumerate() {
        l[(i, i)] = d;
    }
    LaplacianMatrix { matrix: l }
}

/// Symmetric eigendecomposition, ascending, with the largest-magnitude entry of
/// every eigenvector positive (ties to the lowest index).
pub fn spectrum(l: &LaplacianMatrix) -> Result<Spectrum> {
    let (eigenvalues, eigenvectors) = linalg::symmetric_eigen_ascending(&l.matrix)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Induced subgraph on a uniformly chosen `n0`-subset of nodes.
pub fn induced_subgraph(g: &Graph, n0: usize, seed: u64) -> Result<Graph> {
    induced_subgraph_with_nodes(g, n0, seed).map(|(sub, _)| sub)
}

/// Like [`induced_subgraph`], also returning the chosen node ids (ascending).
pub fn induced_subgraph_with_nodes(g: &Graph, n0: usize, seed: u64) -> Result<(Graph, Vec<usize>)> {
    let n = g.n();
    if n0 == 0 || n0 > n {
        return Err(Error::invalid(format!("subgraph size {n0} outside 1..={n}")));
    }
    let mut rng = linalg::rng(seed);
    let mut nodes = index::sample(&mut rng, n, n0).into_vec();
    nodes.sort_unstable();
    let a = DMatrix::from_fn(n0, n0, |i, j| g.adjacency[(nodes[i], nodes[j])]);
    Ok((Graph { adjacency: a }, nodes))
}

/// Step-function degree estimate from an observed graph: sorted degrees over
/// `n0`, read off at `grid` midpoints.
pub fn empirical_degree_function(g0: &Graph, grid: usize) -> Result<DegreePrior> {
    if grid == 0 {
        return Err(Error::invalid("degree grid must have at least one point"));
    }
    let n0 = g0.n();
    let mut degrees = g0.degrees();
    degrees.sort_by(f64::total_cmp);
    let values = midpoints(grid)
        .into_iter()
        .map(|x| {
            let idx = ((n0 as f64 * x).floor() as usize).min(n0 - 1);
            degrees[idx] / n0 as f64
        })
        .collect();
    DegreePrior::new(values, PriorSource::Subgraph { n0 })
}

/// `|| est/||est||_F - truth/||truth||_F ||_F`.
pub fn recovery_error(est: &LaplacianMatrix, truth: &LaplacianMatrix) -> Result<f64> {
    normalized_distance(&est.matrix, &truth.matrix)
}

pub(crate) fn normalized_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::DegenerateInput(
            "recovery error needs two nonzero finite matrices".into(),
        ));
    }
    Ok((a / na - b / nb).norm())
}

/// Add symmetric Gaussian noise `E_ij = E_ji ~ N(0, sigma^2)` to the
/// off-diagonal adjacency entries. The result is not clipped.
pub fn perturb_adjacency(g: &Graph, sigma: f64, seed: u64) -> Result<Graph> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {sigma}")));
    }
    let mut a = g.adjacency.clone();
    if sigma == 0.0 {
        return Ok(Graph { adjacency: a });
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = linalg::rng(seed);
    let n = g.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let e = noise.sample(&mut rng);
            a[(i, j)] += e;
            a[(j, i)] += e;
        }
    }
    Ok(Graph { adjacency: a })
}

/// Options for [`read_edge_list`].
#[derive(Clone, Copy, Debug, Default)]
pub struct EdgeListOptions {
    /// Node ids start at 1 instead of 0.
    pub one_indexed: bool,
    /// Keep the third column as the edge weight instead of binarizing.
    pub weighted: bool,
    /// Minimum node count; isolated trailing nodes are otherwise invisible.
    pub num_nodes: Option<usize>,
}

/// Read a whitespace-separated `u v [weight]` edge list.
///
/// Lines starting with `#` or `%` are comments; a `# nodes: N` comment sets the
/// node count. Edges are symmetrized (an edge listed in either direction is
/// present) and self-loops dropped. When both directions carry different
/// weights the larger one is kept.
pub fn read_edge_list(path: &Path, opts: EdgeListOptions) -> Result<Graph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(std::io::BufReader::new(file), &path.display().to_string(), opts)
}

pub fn parse_edge_list(reader: impl BufRead, origin: &str, opts: EdgeListOptions) -> Result<Graph> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut n = opts.num_nodes.unwrap_or(0);
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#').or_else(|| trimmed.strip_prefix('%')) {
            if let Some(count) = comment.trim().strip_prefix("nodes:") {
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad node count {count:?}")))?;
                n = n.max(count);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(parse_err(lineno, format!("expected `u v [weight]`, got {trimmed:?}")));
        }
        let id = |s: &str| -> Result<usize> {
            let raw: usize = s.parse().map_err(|_| parse_err(lineno, format!("bad node id {s:?}")))?;
            if opts.one_indexed {
                raw.checked_sub(1)
                    .ok_or_else(|| parse_err(lineno, "node id 0 in a one-indexed file".into()))
            } else {
                Ok(raw)
            }
        };
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        let w = if opts.weighted {
            match fields.get(2) {
                Some(s) => s
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("bad weight {s:?}")))?,
                None => 1.0,
            }
        } else {
            1.0
        };
        n = n.max(u + 1).max(v + 1);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        let entry = weights.entry(key).or_insert(w);
        *entry = entry.max(w);
    }
    if n == 0 {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 0,
            msg: "edge list is empty".into(),
        });
    }
    Graph::from_weighted_edges(n, weights.into_iter().map(|((u, v), w)| (u, v, w)))
}

/// Write `u v` lines (0-indexed) with a `# nodes: N` header. Non-unit weights
/// are written as a third column.
pub fn write_edge_list(g: &Graph, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# nodes: {}", g.n())?;
    let n = g.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = g.adjacency[(i, j)];
            if w == 1.0 {
                writeln!(out, "{i} {j}")?;
            } else if w != 0.0 {
                writeln!(out, "{i} {j} {w}")?;
            }
        }
    }
    Ok(())
}
