use serde::{Deserialize, Serialize};

/// Winner of a `(beta, epsilon)` search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub epsilon: f64,
    /// Mean tuning error; infinite when no grid point produced a usable score.
    pub score: f64,
}

/// Exhaustive search over `betas x epsilons` minimizing `objective`.
///
/// `objective` returns `None` (or a non-finite value) for points that failed.
/// Ties go to the smaller `beta`, then the smaller `epsilon`. If every point
/// fails, the smallest pair is returned with an infinite score.
pub fn grid_search(betas: &[f64], epsilons: &[f64], mut objective: impl FnMut(f64, f64) -> Option<f64>) -> GridPoint {
    let scores: Vec<(f64, f64, Option<f64>)> = sorted(betas)
        .into_iter()
        .flat_map(|b| sorted(epsilons).into_iter().map(move |e| (b, e)))
        .map(|(b, e)| (b, e, objective(b, e)))
        .collect();
    pick(&scores)
}

/// Choose from precomputed `(beta, epsilon, score)` triples with the same
/// tie-breaking as [`grid_search`].
pub fn pick(scores: &[(f64, f64, Option<f64>)]) -> GridPoint {
    let mut ordered: Vec<_> = scores.to_vec();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best: Option<GridPoint> = None;
    for &(beta, epsilon, score) in &ordered {
        let Some(score) = score.filter(|s| s.is_finite()) else {
            continue;
        };
        if best.is_none_or(|b| score < b.score) {
            best = Some(GridPoint { beta, epsilon, score });
        }
    }
    best.unwrap_or_else(|| {
        let (beta, epsilon, _) = ordered.first().copied().unwrap_or((0.0, 0.0, None));
        GridPoint {
            beta,
            epsilon,
            score: f64::INFINITY,
        }
    })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
