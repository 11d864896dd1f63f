use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use crate::error::{Error, Result};

/// Which degree prior a trial was solved with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    TrueGraphon,
    AlternateGraphon,
    NoPrior,
    Subgraph { n0: usize },
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::TrueGraphon => "true_graphon",
            Method::AlternateGraphon => "alternate_graphon",
            Method::NoPrior => "no_prior",
            Method::Subgraph { .. } => "subgraph",
        }
    }

    pub fn n0(self) -> Option<usize> {
        match self {
            Method::Subgraph { n0 } => Some(n0),
            _ => None,
        }
    }

    fn from_columns(tag: &str, n0: Option<usize>) -> Option<Self> {
        match (tag, n0) {
            ("true_graphon", None) => Some(Method::TrueGraphon),
            ("alternate_graphon", None) => Some(Method::AlternateGraphon),
            ("no_prior", None) => Some(Method::NoPrior),
            ("subgraph", Some(n0)) => Some(Method::Subgraph { n0 }),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Subgraph { n0 } => write!(f, "subgraph({n0})"),
            other => f.write_str(other.tag()),
        }
    }
}

/// Number of signals behind a set of templates; `Infinite` means the exact
/// covariance was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalCount {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SignalCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalCount::Finite(m) => write!(f, "{m}"),
            SignalCount::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SignalCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "inf" {
            Ok(SignalCount::Infinite)
        } else {
            s.parse()
                .map(SignalCount::Finite)
                .map_err(|e| format!("bad signal count {s:?}: {e}"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Optimal,
    MaxIters,
    Infeasible,
    /// The solver returned `L = 0`, for which the error is undefined.
    Degenerate,
    /// Instance construction or the solve itself errored.
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Optimal => "optimal",
            TrialStatus::MaxIters => "max_iters",
            TrialStatus::Infeasible => "infeasible",
            TrialStatus::Degenerate => "degenerate",
            TrialStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            TrialStatus::Optimal,
            TrialStatus::MaxIters,
            TrialStatus::Infeasible,
            TrialStatus::Degenerate,
            TrialStatus::Failed,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

/// Position of a trial in the experiment grid, minus the trial index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub experiment: ExperimentKind,
    pub method: Method,
    pub n: usize,
    pub m: Option<SignalCount>,
    pub sigma: Option<f64>,
}

impl CellKey {
    fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.method.cmp(&other.method))
            .then(self.n.cmp(&other.n))
            .then(self.m.cmp(&other.m))
            .then(match (self.sigma, other.sigma) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                (a, b) => a.is_some().cmp(&b.is_some()),
            })
    }

    fn same(&self, other: &Self) -> bool {
        self.cmp_key(other).is_eq()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub cell: CellKey,
    pub trial: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub eta: usize,
    /// Normalized Frobenius distance to the true Laplacian; absent when the
    /// solve did not produce a usable estimate.
    pub error: Option<f64>,
    pub status: TrialStatus,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    /// Seconds. Not written to the results CSV.
    pub wall_time: f64,
}

/// Sort into the canonical emission order.
pub fn sort_results(results: &mut [TrialResult]) {
    results.sort_by(|a, b| a.cell.cmp_key(&b.cell).then(a.trial.cmp(&b.trial)));
}

pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "method",
    "n",
    "m",
    "n0",
    "sigma",
    "trial",
    "beta",
    "epsilon",
    "eta",
    "status",
    "error",
    "iterations",
    "objective",
    "primal_residual",
    "dual_residual",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn key_fields(r: &TrialResult) -> [String; 7] {
    [
        r.cell.experiment.to_string(),
        r.cell.method.tag().to_string(),
        r.cell.n.to_string(),
        opt(r.cell.m),
        opt(r.cell.method.n0()),
        opt(r.cell.sigma),
        r.trial.to_string(),
    ]
}

/// Write the results CSV (canonical order, no timing columns).
pub fn write_results_csv(results: &[TrialResult], out: impl std::io::Write) -> Result<()> {
    let mut sorted = results.to_vec();
    sort_results(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &sorted {
        let mut row: Vec<String> = key_fields(r).into();
        row.extend([
            r.beta.to_string(),
            r.epsilon.to_string(),
            r.eta.to_string(),
            r.status.as_str().to_string(),
            opt(r.error),
            r.iterations.to_string(),
            opt(r.objective),
            opt(r.primal_residual),
            opt(r.dual_residual),
        ]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Parse a results CSV written by [`write_results_csv`]. Wall times are zero.
pub fn read_results_csv(input: impl std::io::Read) -> Result<Vec<TrialResult>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse {
            path: "<csv>".into(),
            line: 1,
            msg: format!("unexpected header {headers:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse {
            path: "<csv>".into(),
            line,
            msg,
        };
        let field = |k: usize| rec.get(k).unwrap_or("");
        fn num<T: FromStr>(s: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            s.parse().map_err(|e| format!("{s:?}: {e}"))
        }
        fn maybe<T: FromStr>(s: &str) -> std::result::Result<Option<T>, String>
        where
            T::Err: fmt::Display,
        {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        let experiment =
            ExperimentKind::parse(field(0)).ok_or_else(|| bad(format!("unknown experiment {:?}", field(0))))?;
        let n0 = maybe::<usize>(field(4)).map_err(bad)?;
        let method = Method::from_columns(field(1), n0).ok_or_else(|| bad(format!("bad method {:?}", field(1))))?;
        let m = if field(3).is_empty() {
            None
        } else {
            Some(field(3).parse().map_err(bad)?)
        };
        out.push(TrialResult {
            cell: CellKey {
                experiment,
                method,
                n: num(field(2)).map_err(bad)?,
                m,
                sigma: maybe(field(5)).map_err(bad)?,
            },
            trial: num(field(6)).map_err(bad)?,
            beta: num(field(7)).map_err(bad)?,
            epsilon: num(field(8)).map_err(bad)?,
            eta: num(field(9)).map_err(bad)?,
            status: TrialStatus::parse(field(10)).ok_or_else(|| bad(format!("bad status {:?}", field(10))))?,
            error: maybe(field(11)).map_err(bad)?,
            iterations: num(field(12)).map_err(bad)?,
            objective: maybe(field(13)).map_err(bad)?,
            primal_residual: maybe(field(14)).map_err(bad)?,
            dual_residual: maybe(field(15)).map_err(bad)?,
            wall_time: 0.0,
        });
    }
    Ok(out)
}

/// Per-cell aggregate over the trials that produced an error value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub cell: CellKey,
    pub n0: Option<usize>,
    pub beta: f64,
    pub epsilon: f64,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (`count - 1` denominator).
    pub std: Option<f64>,
}

impl CellSummary {
    /// Standard error of the mean.
    pub fn sem(&self) -> Option<f64> {
        self.std.map(|s| s / (self.count as f64).sqrt())
    }
}

pub fn summarize(results: &[TrialResult]) -> Vec<CellSummary> {
    let mut sorted = results.to_vec();
    sort_results(&mut sorted);
    let mut out: Vec<CellSummary> = Vec::new();
    let mut errors: Vec<Vec<f64>> = Vec::new();
    for r in &sorted {
        let start_new = out.last().is_none_or(|s| !s.cell.same(&r.cell));
        if start_new {
            out.push(CellSummary {
                cell: r.cell,
                n0: r.cell.method.n0(),
                beta: r.beta,
                epsilon: r.epsilon,
                count: 0,
                failures: 0,
                mean: None,
                std: None,
            });
            errors.push(Vec::new());
        }
        let s = out.last_mut().expect("pushed above");
        match r.error {
            Some(e) => {
                s.count += 1;
                errors.last_mut().expect("pushed above").push(e);
            }
            None => s.failures += 1,
        }
    }
    for (s, e) in out.iter_mut().zip(&errors) {
        if e.is_empty() {
            continue;
        }
        let k = e.len() as f64;
        let mean = e.iter().sum::<f64>() / k;
        s.mean = Some(mean);
        s.std = Some(if e.len() > 1 {
            (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        });
    }
    out
}

/// Find the summary for one cell.
pub fn find_cell(
    summary: &[CellSummary],
    method: Method,
    n: usize,
    m: Option<SignalCount>,
    sigma: Option<f64>,
) -> Option<&CellSummary> {
    summary
        .iter()
        .find(|s| s.cell.method == method && s.cell.n == n && s.cell.m == m && s.cell.sigma == sigma)
}

/// Write `results.csv`, `summary.json` and `timing.csv` into `dir`.
///
/// `results.csv` and `summary.json` depend only on the configuration and
/// seed; wall times live in `timing.csv`.
pub fn emit_results(results: &[TrialResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("results.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_results_csv(results, std::io::BufWriter::new(file)).map_err(|e| with_path(e, &path))?;

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summarize(results))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

    let path = dir.join("timing.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut sorted = results.to_vec();
    sort_results(&mut sorted);
    w.write_record(CSV_COLUMNS[..7].iter().chain(&["wall_time_secs"]))
        .map_err(|e| with_path(e.into(), &path))?;
    for r in &sorted {
        let mut row: Vec<String> = key_fields(r).into();
        row.push(format!("{:.6}", r.wall_time));
        w.write_record(&row).map_err(|e| with_path(e.into(), &path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Csv(c) => Error::io(path, std::io::Error::other(c.to_string())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, n: usize, trial: usize, error: Option<f64>) -> TrialResult {
        TrialResult {
            cell: CellKey {
                experiment: ExperimentKind::NoisyTemplates,
                method,
                n,
                m: Some(SignalCount::Finite(100)),
                sigma: None,
            },
            trial,
            beta: 1000.0,
            epsilon: 0.5,
            eta: 2,
            error,
            status: if error.is_some() {
                TrialStatus::Optimal
            } else {
                TrialStatus::Infeasible
            },
            iterations: 120,
            objective: Some(81.25),
            primal_residual: Some(3.5e-5),
            dual_residual: Some(1.25e-7),
            wall_time: 0.5,
        }
    }

    #[test]
    fn empty_set_is_header_only() {
        let mut buf = Vec::new();
        write_results_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![
            row(Method::NoPrior, 40, 1, Some(0.25)),
            row(Method::TrueGraphon, 40, 0, Some(0.1 + 0.2)),
            row(Method::Subgraph { n0: 30 }, 40, 0, None),
        ];
        rows[2].cell.m = Some(SignalCount::Infinite);
        rows[2].cell.sigma = Some(0.05);
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let mut back = read_results_csv(buf.as_slice()).unwrap();
        for r in &mut rows {
            r.wall_time = 0.0;
        }
        sort_results(&mut rows);
        back.iter_mut().for_each(|r| r.wall_time = 0.0);
        assert_eq!(back, rows);
    }

    #[test]
    fn summary_means() {
        let rows = vec![
            row(Method::TrueGraphon, 40, 0, Some(0.1)),
            row(Method::TrueGraphon, 40, 1, Some(0.2)),
            row(Method::TrueGraphon, 40, 2, Some(0.6)),
            row(Method::NoPrior, 40, 0, None),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        let t = find_cell(&s, Method::TrueGraphon, 40, Some(SignalCount::Finite(100)), None).unwrap();
        assert_eq!(t.count, 3);
        assert!((t.mean.unwrap() - 0.3).abs() < 1e-15);
        // Sample std of {0.1, 0.2, 0.6}: sqrt(0.14 / 2).
        assert!((t.std.unwrap() - 0.07f64.sqrt()).abs() < 1e-15);
        let b = find_cell(&s, Method::NoPrior, 40, Some(SignalCount::Finite(100)), None).unwrap();
        assert_eq!((b.count, b.failures, b.mean), (0, 1, None));
    }

    #[test]
    fn emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(Method::TrueGraphon, 40, 0, Some(0.1))];
        emit_results(&rows, dir.path()).unwrap();
        for f in ["results.csv", "summary.json", "timing.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let back = read_results_csv(std::fs::File::open(dir.path().join("results.csv")).unwrap()).unwrap();
        assert_eq!(back.len(), 1);
    }

    #[test]
    fn unwritable_path_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = emit_results(&[], &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
