//! Domain types for the precomputed scenario database.
//!
//! A scenario couples offshore gauge waveforms (uniformly sampled at `dt`,
//! first sample at `t = dt`) with the onshore maximum-inundation grid that the
//! same event produced. Risk indices (`eta_max_per_gauge`, `h_max`) are cached
//! on the record and can always be recomputed from the raw data.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling period in seconds (0.2 Hz).
pub const DEFAULT_DT: f64 = 5.0;
/// Default waveform horizon in seconds (4 h).
pub const DEFAULT_HORIZON: f64 = 4.0 * 3600.0;

/// Wave heights (meters) recorded at one gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSeries {
    pub gauge_id: usize,
    pub samples: Vec<f64>,
}

impl GaugeSeries {
    pub fn new(gauge_id: usize, samples: Vec<f64>) -> Self {
        GaugeSeries { gauge_id, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest sample, or 0 for an empty series.
    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0)
    }
}

/// Maximum inundation depth (meters) over an `nx × ny` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InundationGrid {
    nx: usize,
    ny: usize,
    depths: Vec<f64>,
}

impl InundationGrid {
    pub fn new(nx: usize, ny: usize, depths: Vec<f64>) -> Result<Self> {
        if depths.len() != nx * ny {
            return Err(Error::shape(
                format!("{nx}x{ny} = {} cells", nx * ny),
                format!("{} cells", depths.len()),
            ));
        }
        if let Some(bad) = depths.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::Data(format!(
                "inundation depth must be finite and non-negative, found {bad}"
            )));
        }
        Ok(InundationGrid { nx, ny, depths })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        InundationGrid {
            nx,
            ny,
            depths: vec![0.0; nx * ny],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.depths[ix * self.ny + iy]
    }

    /// Largest depth on the grid (0 for an all-dry grid).
    pub fn max_depth(&self) -> f64 {
        self.depths.iter().copied().fold(0.0, f64::max)
    }
}

/// One precomputed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    pub scenario_id: u64,
    pub waveforms: Vec<GaugeSeries>,
    pub inundation: InundationGrid,
    pub eta_max_per_gauge: Vec<f64>,
    pub h_max: f64,
}

impl ScenarioRecord {
    /// Builds a record and derives its risk indices from the raw data.
    pub fn new(
        scenario_id: u64,
        waveforms: Vec<GaugeSeries>,
        inundation: InundationGrid,
    ) -> Result<Self> {
        recompute_risk_indices(ScenarioRecord {
            scenario_id,
            waveforms,
            inundation,
            eta_max_per_gauge: Vec::new(),
            h_max: 0.0,
        })
    }

    pub fn n_gauges(&self) -> usize {
        self.waveforms.len()
    }

    pub fn n_steps(&self) -> usize {
        self.waveforms.first().map_or(0, GaugeSeries::len)
    }

    /// Gauge vector at time index `step` (0-based, i.e. `t = (step + 1)·dt`).
    pub fn snapshot(&self, step: usize) -> Vec<f64> {
        self.waveforms.iter().map(|g| g.samples[step]).collect()
    }
}

/// Recomputes `eta_max_per_gauge` and `h_max` from the waveforms and grid.
pub fn recompute_risk_indices(mut record: ScenarioRecord) -> Result<ScenarioRecord> {
    for (g, series) in record.waveforms.iter().enumerate() {
        if series.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::DataCorruption {
                scenario_id: record.scenario_id,
                gauge_id: g,
            });
        }
    }
    record.eta_max_per_gauge = record.waveforms.iter().map(GaugeSeries::max).collect();
    record.h_max = record.inundation.max_depth();
    Ok(record)
}

/// Labeled grid geometry. Purely descriptive; no projection math is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 2],
    #[serde(default)]
    pub label: String,
}

fn unit_spacing() -> [f64; 2] {
    [1.0, 1.0]
}

impl GridGeometry {
    pub fn new(nx: usize, ny: usize) -> Self {
        GridGeometry {
            nx,
            ny,
            origin: [0.0, 0.0],
            spacing: unit_spacing(),
            label: String::new(),
        }
    }
}

/// A validated corpus of scenarios sharing gauge count, time axis and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDatabase {
    scenarios: Vec<ScenarioRecord>,
    n_gauges: usize,
    n_steps: usize,
    dt: f64,
    grid: GridGeometry,
}

impl ScenarioDatabase {
    pub fn new(
        scenarios: Vec<ScenarioRecord>,
        n_gauges: usize,
        n_steps: usize,
        dt: f64,
        grid: GridGeometry,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let mut seen = HashSet::with_capacity(scenarios.len());
        for s in &scenarios {
            if !seen.insert(s.scenario_id) {
                return Err(Error::Inconsistent(format!(
                    "duplicate scenario id {}",
                    s.scenario_id
                )));
            }
            if s.waveforms.len() != n_gauges {
                return Err(Error::Inconsistent(format!(
                    "scenario {} has {} gauges, expected {n_gauges}",
                    s.scenario_id,
                    s.waveforms.len()
                )));
            }
            if let Some(g) = s.waveforms.iter().find(|g| g.len() != n_steps) {
                return Err(Error::Inconsistent(format!(
                    "scenario {} gauge {} has {} samples, expected {n_steps}",
                    s.scenario_id,
                    g.gauge_id,
                    g.len()
                )));
            }
            if s.inundation.shape() != (grid.nx, grid.ny) {
                return Err(Error::Inconsistent(format!(
                    "scenario {} grid is {:?}, expected ({}, {})",
                    s.scenario_id,
                    s.inundation.shape(),
                    grid.nx,
                    grid.ny
                )));
            }
        }
        Ok(ScenarioDatabase {
            scenarios,
            n_gauges,
            n_steps,
            dt,
            grid,
        })
    }

    pub fn scenarios(&self) -> &[ScenarioRecord] {
        &self.scenarios
    }

    pub fn into_scenarios(self) -> Vec<ScenarioRecord> {
        self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn n_gauges(&self) -> usize {
        self.n_gauges
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn get(&self, scenario_id: u64) -> Option<&ScenarioRecord> {
        self.scenarios.iter().find(|s| s.scenario_id == scenario_id)
    }

    /// Same geometry, with the scenarios at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> ScenarioDatabase {
        ScenarioDatabase {
            scenarios: indices.iter().map(|&i| self.scenarios[i].clone()).collect(),
            n_gauges: self.n_gauges,
            n_steps: self.n_steps,
            dt: self.dt,
            grid: self.grid.clone(),
        }
    }

    /// Same geometry, different scenario list. Validated like [`ScenarioDatabase::new`].
    pub fn with_scenarios(&self, scenarios: Vec<ScenarioRecord>) -> Result<ScenarioDatabase> {
        ScenarioDatabase::new(
            scenarios,
            self.n_gauges,
            self.n_steps,
            self.dt,
            self.grid.clone(),
        )
    }
}

/// How much of the waveform is consumed before issuing a forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationWindow {
    t_obs: f64,
    dt: f64,
}

impl ObservationWindow {
    /// `horizon` is `N_t·dt` of the database the window is applied to.
    pub fn new(t_obs: f64, dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if !(t_obs > 0.0 && t_obs <= horizon + 1e-9 * horizon.abs()) {
            return Err(Error::Config(format!(
                "observation window {t_obs} s outside (0, {horizon}] s"
            )));
        }
        Ok(ObservationWindow { t_obs, dt })
    }

    pub fn for_database(t_obs: f64, db: &ScenarioDatabase) -> Result<Self> {
        Self::new(t_obs, db.dt(), db.horizon())
    }

    pub fn t_obs(&self) -> f64 {
        self.t_obs
    }

    /// `floor(t_obs / dt)`, guarded against representation error of exact multiples.
    pub fn step_count(&self) -> usize {
        ((self.t_obs / self.dt) + 1e-9).floor() as usize
    }
}

/// Linear interpolation of irregular `(time, value)` samples onto `t = dt, 2dt, …, horizon`.
pub fn resample_series(
    gauge_id: usize,
    raw: &[(f64, f64)],
    dt: f64,
    horizon: f64,
) -> Result<GaugeSeries> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::Argument(format!(
            "dt and horizon must be positive (dt={dt}, horizon={horizon})"
        )));
    }
    if raw.is_empty() {
        return Err(Error::InsufficientData("no raw samples".into()));
    }
    if raw.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::Data(format!("gauge {gauge_id} has non-finite raw samples")));
    }
    if raw.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Argument(format!(
            "gauge {gauge_id}: raw times must be strictly increasing"
        )));
    }
    let n = (horizon / dt + 1e-9).floor() as usize;
    let (t_first, t_last) = (raw[0].0, raw[raw.len() - 1].0);
    let tol = 1e-9 * horizon;
    if t_first > dt + tol || t_last < n as f64 * dt - tol {
        return Err(Error::InsufficientData(format!(
            "gauge {gauge_id}: raw data covers [{t_first}, {t_last}] s, need [{dt}, {}] s",
            n as f64 * dt
        )));
    }

    let mut samples = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 1..=n {
        let t = k as f64 * dt;
        while seg + 1 < raw.len() && raw[seg + 1].0 <= t {
            seg += 1;
        }
        let (t0, v0) = raw[seg];
        let value = if t == t0 || seg + 1 == raw.len() {
            v0
        } else {
            let (t1, v1) = raw[seg + 1];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        };
        samples.push(value);
    }
    Ok(GaugeSeries::new(gauge_id, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(waves: Vec<Vec<f64>>, grid: InundationGrid) -> ScenarioRecord {
        let waveforms = waves
            .into_iter()
            .enumerate()
            .map(|(g, s)| GaugeSeries::new(g, s))
            .collect();
        ScenarioRecord::new(0, waveforms, grid).unwrap()
    }

    #[test]
    fn eta_max_of_single_gauge() {
        let r = record(vec![vec![0.0, 1.5, 0.3]], InundationGrid::zeros(1, 1));
        assert_eq!(r.eta_max_per_gauge, vec![1.5]);
    }

    #[test]
    fn dry_grid_has_zero_h_max() {
        let r = record(vec![vec![0.1]], InundationGrid::zeros(3, 4));
        assert_eq!(r.h_max, 0.0);
    }

    #[test]
    fn h_max_of_two_by_two() {
        let grid = InundationGrid::new(2, 2, vec![0.2, 1.1, 0.9, 0.0]).unwrap();
        let r = record(vec![vec![0.0]], grid);
        assert_eq!(r.h_max, 1.1);
    }

    #[test]
    fn non_finite_sample_names_scenario_and_gauge() {
        let mut r = record(vec![vec![0.0], vec![0.0]], InundationGrid::zeros(1, 1));
        r.scenario_id = 7;
        r.waveforms[1].samples[0] = f64::NAN;
        match recompute_risk_indices(r) {
            Err(Error::DataCorruption {
                scenario_id: 7,
                gauge_id: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_depth_rejected() {
        assert!(InundationGrid::new(1, 2, vec![0.0, -0.5]).is_err());
    }

    #[test]
    fn resample_two_points() {
        let s = resample_series(0, &[(0.0, 0.0), (10.0, 2.0)], 5.0, 10.0).unwrap();
        assert_eq!(s.samples, vec![1.0, 2.0]);
    }

    #[test]
    fn resample_uniform_is_identity() {
        let raw: Vec<(f64, f64)> = (1..=50)
            .map(|k| (k as f64 * 5.0, (k as f64 * 0.37).sin()))
            .collect();
        let s = resample_series(3, &raw, 5.0, 250.0).unwrap();
        let expected: Vec<f64> = raw.iter().map(|p| p.1).collect();
        assert_eq!(s.samples, expected);
        assert_eq!(s.gauge_id, 3);
    }

    #[test]
    fn four_hour_horizon_at_five_seconds() {
        let raw = vec![(0.0, 0.0), (DEFAULT_HORIZON, 1.0)];
        let s = resample_series(0, &raw, DEFAULT_DT, DEFAULT_HORIZON).unwrap();
        assert_eq!(s.len(), 2880);
    }

    #[test]
    fn short_raw_span_is_insufficient() {
        let err = resample_series(0, &[(0.0, 0.0), (8.0, 1.0)], 5.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn window_step_count() {
        let w = ObservationWindow::new(60.0, 5.0, 3600.0).unwrap();
        assert_eq!(w.step_count(), 12);
        let w = ObservationWindow::new(7.0, 5.0, 3600.0).unwrap();
        assert_eq!(w.step_count(), 1);
        assert!(ObservationWindow::new(0.0, 5.0, 3600.0).is_err());
        assert!(ObservationWindow::new(3605.0, 5.0, 3600.0).is_err());
    }

    #[test]
    fn database_rejects_duplicate_ids() {
        let r = record(vec![vec![0.0, 1.0]], InundationGrid::zeros(1, 1));
        let err =
            ScenarioDatabase::new(vec![r.clone(), r], 1, 2, 5.0, GridGeometry::new(1, 1)).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
    }

    #[test]
    fn database_rejects_ragged_series() {
        let a = record(vec![vec![0.0, 1.0]], InundationGrid::zeros(1, 1));
        let mut b = record(vec![vec![0.0, 1.0, 2.0]], InundationGrid::zeros(1, 1));
        b.scenario_id = 1;
        assert!(ScenarioDatabase::new(vec![a, b], 1, 2, 5.0, GridGeometry::new(1, 1)).is_err());
    }
}
