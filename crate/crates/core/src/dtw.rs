//! Dynamic time warping with an absolute-difference local cost and the
//! symmetric `{(1,0), (0,1), (1,1)}` step pattern, without slope weights or
//! path-length normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{GaugeSeries, ObservationWindow, ScenarioDatabase};

/// Cumulative cost and (optionally) the optimal alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub distance: f64,
    /// 0-based `(i, j)` index pairs from `(0, 0)` to `(n-1, m-1)`.
    pub path: Option<Vec<(usize, usize)>>,
}

/// How per-gauge distances are combined into one scenario distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "gauge")]
pub enum GaugeAggregation {
    #[default]
    Sum,
    Mean,
    /// Only the given gauge.
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DtwConfig {
    /// Sakoe–Chiba half-width; `None` runs the exact DP.
    pub band: Option<usize>,
    pub aggregation: GaugeAggregation,
}

fn within_band(i: usize, j: usize, width: Option<usize>) -> bool {
    width.is_none_or(|w| i.abs_diff(j) <= w)
}

fn effective_band(band: Option<usize>, n: usize, m: usize) -> Option<usize> {
    band.map(|w| w.max(n.abs_diff(m)))
}

/// DTW distance between two series.
pub fn dtw_distance(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64> {
    check_nonempty(a, b)?;
    let w = effective_band(band, a.len(), b.len());
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut cur = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for (i, &x) in a.iter().enumerate() {
        cur[0] = f64::INFINITY;
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if within_band(i, j, w) {
                (x - y).abs() + prev[j].min(prev[j + 1]).min(cur[j])
            } else {
                f64::INFINITY
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len()])
}

/// DTW distance with the warping path recovered from the full cost matrix.
pub fn dtw_with_path(a: &[f64], b: &[f64], band: Option<usize>) -> Result<DtwResult> {
    check_nonempty(a, b)?;
    let (n, m) = (a.len(), b.len());
    let w = effective_band(band, n, m);
    let stride = m + 1;
    let mut d = vec![f64::INFINITY; (n + 1) * stride];
    d[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            if within_band(i - 1, j - 1, w) {
                let best = d[(i - 1) * stride + j - 1]
                    .min(d[(i - 1) * stride + j])
                    .min(d[i * stride + j - 1]);
                d[i * stride + j] = (a[i - 1] - b[j - 1]).abs() + best;
            }
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n, m);
    while (i, j) != (1, 1) {
        let diag = d[(i - 1) * stride + j - 1];
        let up = d[(i - 1) * stride + j];
        let left = d[i * stride + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i - 1, j - 1));
    }
    path.reverse();
    Ok(DtwResult {
        distance: d[n * stride + m],
        path: Some(path),
    })
}

/// `dtw(a[..k], b[..k])` for every `k` in `prefixes`, from a single DP sweep.
///
/// The cumulative cost at `(k, k)` depends only on cells with both indices at
/// most `k`, so every prefix distance is read off the diagonal of one matrix.
pub fn dtw_prefix_distances(
    a: &[f64],
    b: &[f64],
    prefixes: &[usize],
    band: Option<usize>,
) -> Result<Vec<f64>> {
    let longest = prefixes.iter().copied().max().unwrap_or(0);
    if prefixes.contains(&0) {
        return Err(Error::Argument("empty prefix".into()));
    }
    if a.len() < longest || b.len() < longest {
        return Err(Error::InsufficientData(format!(
            "prefix of {longest} samples from series of {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut diagonal = vec![0.0; longest + 1];
    let mut prev = vec![f64::INFINITY; longest + 1];
    let mut cur = vec![f64::INFINITY; longest + 1];
    prev[0] = 0.0;
    for i in 0..longest {
        cur[0] = f64::INFINITY;
        let (lo, hi) = match band {
            Some(w) => (i.saturating_sub(w), (i + w).min(longest - 1)),
            None => (0, longest - 1),
        };
        for c in cur.iter_mut().take(lo + 1).skip(1) {
            *c = f64::INFINITY;
        }
        let x = a[i];
        for j in lo..=hi {
            cur[j + 1] = (x - b[j]).abs() + prev[j].min(prev[j + 1]).min(cur[j]);
        }
        for c in cur.iter_mut().skip(hi + 2) {
            *c = f64::INFINITY;
        }
        diagonal[i + 1] = cur[i + 1];
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prefixes.iter().map(|&k| diagonal[k]).collect())
}

fn check_nonempty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("DTW of an empty series".into()));
    }
    Ok(())
}

fn aggregate(per_gauge: impl Iterator<Item = f64>, n_gauges: usize, how: GaugeAggregation) -> f64 {
    let total: f64 = per_gauge.sum();
    match how {
        GaugeAggregation::Mean => total / n_gauges as f64,
        GaugeAggregation::Sum | GaugeAggregation::Single(_) => total,
    }
}

fn selected_gauges(n: usize, how: GaugeAggregation) -> Result<std::ops::Range<usize>> {
    match how {
        GaugeAggregation::Single(g) if g >= n => Err(Error::Argument(format!(
            "gauge {g} out of range for {n} gauges"
        ))),
        GaugeAggregation::Single(g) => Ok(g..g + 1),
        _ => Ok(0..n),
    }
}

/// Scenario distance over the first `steps` samples of every gauge, for several window lengths at once.
pub fn multi_gauge_dtw_prefixes(
    chi: &[GaugeSeries],
    other: &[GaugeSeries],
    steps: &[usize],
    cfg: &DtwConfig,
) -> Result<Vec<f64>> {
    if chi.len() != other.len() {
        return Err(Error::shape(
            format!("{} gauges", chi.len()),
            format!("{} gauges", other.len()),
        ));
    }
    let gauges = selected_gauges(chi.len(), cfg.aggregation)?;
    let mut totals = vec![0.0; steps.len()];
    for g in gauges.clone() {
        let d = dtw_prefix_distances(&chi[g].samples, &other[g].samples, steps, cfg.band)?;
        for (t, v) in totals.iter_mut().zip(d) {
            *t += v;
        }
    }
    Ok(totals
        .into_iter()
        .map(|t| aggregate(std::iter::once(t), gauges.len(), cfg.aggregation))
        .collect())
}

/// Scenario distance over the observation window `[t_1, t_obs]`.
pub fn multi_gauge_dtw(
    chi: &[GaugeSeries],
    other: &[GaugeSeries],
    window: &ObservationWindow,
    cfg: &DtwConfig,
) -> Result<f64> {
    let steps = window.step_count();
    if steps == 0 {
        return Err(Error::Argument("observation window shorter than one sampling period".into()));
    }
    Ok(multi_gauge_dtw_prefixes(chi, other, &[steps], cfg)?[0])
}

/// Picks the lowest distance, breaking ties by the lowest scenario id.
pub fn argmin_by_id(distances: &[f64], ids: &[u64]) -> Option<usize> {
    (0..distances.len()).min_by(|&a, &b| {
        distances[a]
            .total_cmp(&distances[b])
            .then(ids[a].cmp(&ids[b]))
    })
}

/// Position in `db` of the scenario nearest to `chi` in DTW distance.
pub fn shortest_dtw_scenario(
    db: &ScenarioDatabase,
    chi: &[GaugeSeries],
    window: &ObservationWindow,
    cfg: &DtwConfig,
) -> Result<usize> {
    if db.is_empty() {
        return Err(Error::Argument("empty database".into()));
    }
    let distances = scenario_distances(db, chi, &[window.step_count()], cfg)?;
    let column: Vec<f64> = distances.iter().map(|d| d[0]).collect();
    let ids: Vec<u64> = db.scenarios().iter().map(|s| s.scenario_id).collect();
    Ok(argmin_by_id(&column, &ids).expect("non-empty database"))
}

/// `distances[j][w]`: distance from `chi` to scenario `j` over `steps[w]` samples.
pub fn scenario_distances(
    db: &ScenarioDatabase,
    chi: &[GaugeSeries],
    steps: &[usize],
    cfg: &DtwConfig,
) -> Result<Vec<Vec<f64>>> {
    let one = |s: &crate::scenario::ScenarioRecord| multi_gauge_dtw_prefixes(chi, &s.waveforms, steps, cfg);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        db.scenarios().par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        db.scenarios().iter().map(one).collect()
    }
}
