//! Risk-index forecasts from a posterior or a DTW ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::PosteriorState;
use crate::dtw::{self, DtwConfig};
use crate::error::{Error, Result};
use crate::scenario::{GaugeSeries, InundationGrid, ObservationWindow, ScenarioDatabase, ScenarioRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MostProbable,
    WeightedMean,
    ShortestDtw,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MostProbable, Method::WeightedMean, Method::ShortestDtw];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MostProbable => "most-probable",
            Method::WeightedMean => "weighted-mean",
            Method::ShortestDtw => "shortest-dtw",
        }
    }

    /// Whether the method consumes a Bayesian posterior.
    pub fn is_bayesian(&self) -> bool {
        !matches!(self, Method::ShortestDtw)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most-probable" => Ok(Method::MostProbable),
            "weighted-mean" => Ok(Method::WeightedMean),
            "shortest-dtw" => Ok(Method::ShortestDtw),
            other => Err(Error::Argument(format!(
                "unknown method {other:?} (expected most-probable, weighted-mean or shortest-dtw)"
            ))),
        }
    }
}

/// Forecast of the three risk indices for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub method: Method,
    pub t_obs: f64,
    pub target_gauge: usize,
    /// Peak wave height at the target gauge (m).
    pub eta_max_pred: f64,
    /// Peak inundation depth over the grid (m).
    pub h_max_pred: f64,
    pub inundation_pred: InundationGrid,
    /// Selected scenario; absent for superposition.
    pub chosen_id: Option<u64>,
}

/// JSON-friendly view of a [`Prediction`]; the grid itself is stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub method: Method,
    pub t_obs: f64,
    pub target_gauge: usize,
    pub eta_max_pred: f64,
    pub h_max_pred: f64,
    pub chosen_id: Option<u64>,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

impl Prediction {
    pub fn summary(&self) -> PredictionSummary {
        PredictionSummary {
            method: self.method,
            t_obs: self.t_obs,
            target_gauge: self.target_gauge,
            eta_max_pred: self.eta_max_pred,
            h_max_pred: self.h_max_pred,
            chosen_id: self.chosen_id,
            grid_nx: self.inundation_pred.nx(),
            grid_ny: self.inundation_pred.ny(),
        }
    }
}

fn check_target(db: &ScenarioDatabase, target_gauge: usize) -> Result<()> {
    if target_gauge >= db.n_gauges() {
        return Err(Error::Argument(format!(
            "target gauge {target_gauge} out of range for {} gauges",
            db.n_gauges()
        )));
    }
    Ok(())
}

fn check_posterior(posterior: &PosteriorState, db: &ScenarioDatabase) -> Result<()> {
    if posterior.len() != db.len() {
        return Err(Error::shape(
            format!("{} scenarios", db.len()),
            format!("posterior over {}", posterior.len()),
        ));
    }
    Ok(())
}

/// Copies the indices of `record` verbatim.
pub fn from_scenario(
    method: Method,
    record: &ScenarioRecord,
    t_obs: f64,
    target_gauge: usize,
) -> Prediction {
    Prediction {
        method,
        t_obs,
        target_gauge,
        eta_max_pred: record.eta_max_per_gauge[target_gauge],
        h_max_pred: record.h_max,
        inundation_pred: record.inundation.clone(),
        chosen_id: Some(record.scenario_id),
    }
}

/// Position of the most probable scenario; ties go to the lowest scenario id.
pub fn most_probable_index(posterior: &PosteriorState, db: &ScenarioDatabase) -> usize {
    let probs = posterior.probs();
    let mut best = 0;
    for j in 1..probs.len() {
        let better = probs[j] > probs[best]
            || (probs[j] == probs[best]
                && db.scenarios()[j].scenario_id < db.scenarios()[best].scenario_id);
        if better {
            best = j;
        }
    }
    best
}

/// Indices of the posterior argmax scenario.
pub fn most_probable(
    posterior: &PosteriorState,
    db: &ScenarioDatabase,
    target_gauge: usize,
    t_obs: f64,
) -> Result<Prediction> {
    check_target(db, target_gauge)?;
    check_posterior(posterior, db)?;
    let j = most_probable_index(posterior, db);
    Ok(from_scenario(Method::MostProbable, &db.scenarios()[j], t_obs, target_gauge))
}

/// Probability-weighted superposition of every scenario's indices.
///
/// Each result is clamped into the `[min, max]` hull of the supporting
/// scenarios so float rounding of `Σ p_j ≈ 1` cannot leave it.
pub fn weighted_mean(
    posterior: &PosteriorState,
    db: &ScenarioDatabase,
    target_gauge: usize,
    t_obs: f64,
) -> Result<Prediction> {
    check_target(db, target_gauge)?;
    check_posterior(posterior, db)?;
    let grid = db.grid();
    let n_cells = grid.nx * grid.ny;

    let mut eta = Hull::default();
    let mut h = Hull::default();
    let mut cells = vec![Hull::default(); n_cells];
    for (s, &p) in db.scenarios().iter().zip(posterior.probs()) {
        if p == 0.0 {
            continue;
        }
        eta.add(p, s.eta_max_per_gauge[target_gauge]);
        h.add(p, s.h_max);
        for (c, &d) in cells.iter_mut().zip(s.inundation.depths()) {
            c.add(p, d);
        }
    }
    let depths = cells.iter().map(|c| c.value().max(0.0)).collect();
    Ok(Prediction {
        method: Method::WeightedMean,
        t_obs,
        target_gauge,
        eta_max_pred: eta.value(),
        h_max_pred: h.value(),
        inundation_pred: InundationGrid::new(grid.nx, grid.ny, depths)?,
        chosen_id: None,
    })
}

#[derive(Debug, Clone, Copy)]
struct Hull {
    sum: f64,
    lo: f64,
    hi: f64,
}

impl Default for Hull {
    fn default() -> Self {
        Hull {
            sum: 0.0,
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }
}

impl Hull {
    fn add(&mut self, p: f64, x: f64) {
        self.sum += p * x;
        self.lo = self.lo.min(x);
        self.hi = self.hi.max(x);
    }

    fn value(&self) -> f64 {
        if self.lo > self.hi {
            0.0
        } else {
            self.sum.clamp(self.lo, self.hi)
        }
    }
}

/// Indices of the scenario closest to the observation in DTW distance.
pub fn shortest_dtw(
    db: &ScenarioDatabase,
    observed: &[GaugeSeries],
    window: &ObservationWindow,
    cfg: &DtwConfig,
    target_gauge: usize,
) -> Result<Prediction> {
    check_target(db, target_gauge)?;
    let j = dtw::shortest_dtw_scenario(db, observed, window, cfg)?;
    Ok(from_scenario(Method::ShortestDtw, &db.scenarios()[j], window.t_obs(), target_gauge))
}
