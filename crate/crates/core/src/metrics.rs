//! Error metrics, wet/dry grid classification and box-plot statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::InundationGrid;

/// A cell is inundated when its depth exceeds this many meters.
pub const DEFAULT_WET_THRESHOLD: f64 = 0.01;

pub fn absolute_error(pred: f64, truth: f64) -> f64 {
    (pred - truth).abs()
}

/// Confusion counts over grid cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BinaryCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `TP / (TP + FN)`; 1 when the truth has no wet cells.
    pub fn tpr(&self) -> f64 {
        let wet = self.tp + self.fn_;
        if wet == 0 {
            1.0
        } else {
            self.tp as f64 / wet as f64
        }
    }

    /// `FP / (FP + TN)`; 0 when the truth has no dry cells.
    pub fn fpr(&self) -> f64 {
        let dry = self.fp + self.tn;
        if dry == 0 {
            0.0
        } else {
            self.fp as f64 / dry as f64
        }
    }
}

/// `(TPR, FPR)` of a set of counts.
pub fn tpr_fpr(counts: &BinaryCounts) -> (f64, f64) {
    (counts.tpr(), counts.fpr())
}

/// Tallies wet/dry agreement between a predicted and a true depth grid.
pub fn classify_inundation(
    pred: &InundationGrid,
    truth: &InundationGrid,
    wet_threshold: f64,
) -> Result<BinaryCounts> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(
            format!("{:?}", truth.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    let mut c = BinaryCounts::default();
    for (&p, &t) in pred.depths().iter().zip(truth.depths()) {
        match (p > wet_threshold, t > wet_threshold) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Five-number summary plus mean and IQR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between closest ranks (R type 7) of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(samples: &[f64]) -> Result<BoxStats> {
    if samples.is_empty() {
        return Err(Error::Argument("box statistics of an empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(BoxStats {
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 1.0;
    const D: f64 = 0.0;

    fn grid(v: &[f64]) -> InundationGrid {
        InundationGrid::new(2, 2, v.to_vec()).unwrap()
    }

    #[test]
    fn absolute_error_cases() {
        assert_eq!(absolute_error(3.0, 3.0), 0.0);
        assert_eq!(absolute_error(2.5, 4.0), 1.5);
        assert_eq!(absolute_error(4.0, 2.5), 1.5);
    }

    #[test]
    fn identical_grids_have_no_errors() {
        let g = grid(&[W, D, W, W]);
        let c = classify_inundation(&g, &g, DEFAULT_WET_THRESHOLD).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(tpr_fpr(&c), (1.0, 0.0));
    }

    #[test]
    fn all_wet_prediction_of_dry_truth() {
        let c = classify_inundation(&grid(&[W; 4]), &grid(&[D; 4]), DEFAULT_WET_THRESHOLD).unwrap();
        assert_eq!(c, BinaryCounts { tp: 0, tn: 0, fp: 4, fn_: 0 });
        // no wet truth cells: TPR defined as 1
        assert_eq!(c.tpr(), 1.0);
    }

    #[test]
    fn hand_enumerated_two_by_two() {
        let pred = grid(&[W, D, W, W]);
        let truth = grid(&[W, W, D, W]);
        let c = classify_inundation(&pred, &truth, DEFAULT_WET_THRESHOLD).unwrap();
        assert_eq!(c, BinaryCounts { tp: 2, tn: 0, fp: 1, fn_: 1 });
        let (tpr, fpr) = tpr_fpr(&c);
        assert_eq!(tpr, 2.0 / 3.0);
        assert_eq!(fpr, 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let other = InundationGrid::zeros(1, 4);
        assert!(classify_inundation(&grid(&[D; 4]), &other, 0.01).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let c = classify_inundation(&grid(&[0.01; 4]), &grid(&[0.02; 4]), 0.01).unwrap();
        assert_eq!(c.fn_, 4);
    }

    #[test]
    fn box_of_one_to_four() {
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(b.median, 2.5);
        assert_eq!(b.q1, 1.75);
        assert_eq!(b.q3, 3.25);
        assert_eq!(b.iqr, 1.5);
        assert_eq!(b.mean, 2.5);
        assert_eq!((b.min, b.max), (1.0, 4.0));
    }

    #[test]
    fn constant_sample() {
        let b = box_stats(&[0.7; 5]).unwrap();
        assert_eq!(b.iqr, 0.0);
        assert_eq!(b.min, b.max);
    }

    #[test]
    fn empty_sample() {
        assert!(box_stats(&[]).is_err());
    }
}
