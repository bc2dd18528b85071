//! First-peak arrival detection.
//!
//! Local maxima and topographic prominence follow the usual `find_peaks`
//! conventions: a flat top counts once (at its middle sample) and only when
//! the signal drops on both sides; prominence is the peak height minus the
//! higher of the two lowest points reached before meeting higher ground on
//! either side.

use serde::{Deserialize, Serialize};

use crate::scenario::GaugeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    /// Minimum prominence (m).
    pub prominence: f64,
    /// Minimum peak height (m).
    pub min_height: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            prominence: 0.05,
            min_height: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalInfo {
    /// Time of the first qualifying peak (s); sample `k` sits at `(k + 1)·dt`.
    pub t_arrv: f64,
    pub peak_height: f64,
}

/// Indices of local maxima, plateaus reported at their midpoint.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    if x.len() < 3 {
        return peaks;
    }
    let last = x.len() - 1;
    let mut i = 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

/// Topographic prominence of the sample at `peak`.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// First peak meeting both the height and prominence thresholds.
pub fn detect_arrival(series: &GaugeSeries, dt: f64, cfg: &PeakConfig) -> Option<ArrivalInfo> {
    let x = &series.samples;
    local_maxima(x)
        .into_iter()
        .find(|&p| x[p] >= cfg.min_height && prominence(x, p) >= cfg.prominence)
        .map(|p| ArrivalInfo {
            t_arrv: (p + 1) as f64 * dt,
            peak_height: x[p],
        })
}
