//! Cross-validated evaluation of the three forecast methods.

mod arrival;
mod report;
mod split;
mod sweep;

pub use arrival::{detect_arrival, local_maxima, prominence, ArrivalInfo, PeakConfig};
pub use report::{
    box_table, read_report_csv, write_boxstats_csv, write_report_csv, write_scatter_csv, BoxRow, ScatterKind,
};
pub use split::{filter_scenarios, kfold_split, Fold};
pub use sweep::{run_sweep, CaseGrid, FoldSummary, SweepReport, SweepRow};

use serde::{Deserialize, Serialize};

use crate::bayes::{CovariancePolicy, DEFAULT_SCALE};
use crate::detect::Method;
use crate::dtw::DtwConfig;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_WET_THRESHOLD;
use crate::pod::ModeRule;

/// Observation windows (s): 1–6, 8, 10, 12 and 15 minutes.
pub const DEFAULT_WINDOWS: [f64; 10] = [60.0, 120.0, 180.0, 240.0, 300.0, 360.0, 480.0, 600.0, 720.0, 900.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Observation windows `t_obs` (s).
    pub windows: Vec<f64>,
    pub folds: usize,
    /// Seed for the fold shuffle and the observation noise.
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Target gauge `n′`; the last (nearest-shore) gauge when unset.
    pub target_gauge: Option<usize>,
    /// Scenarios peaking below this height (m) at the target gauge are dropped.
    pub amplitude_threshold: f64,
    /// Also run the DTW method on the whole waveform.
    pub full_history: bool,
    /// Standard deviation (m) of Gaussian noise added to the observed test waveforms.
    pub noise_sigma: f64,
    pub mode_rule: ModeRule,
    pub likelihood_scale: f64,
    pub covariance_policy: CovariancePolicy,
    pub wet_threshold: f64,
    pub dtw: DtwConfig,
    pub peak: PeakConfig,
    /// Keep every predicted inundation grid in the report.
    pub keep_grids: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            windows: DEFAULT_WINDOWS.to_vec(),
            folds: 5,
            seed: 0,
            methods: Method::ALL.to_vec(),
            target_gauge: None,
            amplitude_threshold: 0.01,
            full_history: false,
            noise_sigma: 0.05,
            mode_rule: ModeRule::default(),
            likelihood_scale: DEFAULT_SCALE,
            covariance_policy: CovariancePolicy::default(),
            wet_threshold: DEFAULT_WET_THRESHOLD,
            dtw: DtwConfig::default(),
            peak: PeakConfig::default(),
            keep_grids: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::Config("no observation windows".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}
