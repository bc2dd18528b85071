//! Proper orthogonal decomposition of multi-gauge waveforms.
//!
//! The data matrix `X` stacks every gauge snapshot of every training scenario
//! as a column (`N_g × (N_t·N_s)`, scenario-major then time). Its left singular
//! vectors are obtained from the small `N_g × N_g` Gram matrix `X·Xᵀ`, whose
//! eigenvalues `λ_j` are the squared singular values. No mean-centering is
//! applied.
//!
//! ```text
//! X ≈ Φ_r A,        c(r) = Σ_{j≤r} λ_j / Σ_j λ_j,        α̃ = Φ_r† η
//! ```

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ScenarioDatabase, ScenarioRecord};

/// Default cumulative-contribution threshold for choosing `r`.
pub const DEFAULT_THRESHOLD: f64 = 0.9;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// How many modes to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeRule {
    /// Exactly `r` modes.
    Fixed(usize),
    /// Smallest `r` with `c(r) ≥ θ`.
    Threshold(f64),
}

impl Default for ModeRule {
    fn default() -> Self {
        ModeRule::Threshold(DEFAULT_THRESHOLD)
    }
}

/// Truncated spatial modes and their spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    pseudoinverse: DMatrix<f64>,
    contribution: Vec<f64>,
}

impl PodBasis {
    /// Reassembles a basis from stored parts; the pseudoinverse is recomputed.
    pub fn from_parts(modes: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        let r = modes.ncols();
        if r == 0 || r > eigenvalues.len() {
            return Err(Error::Inconsistent(format!(
                "{r} modes for a spectrum of length {}",
                eigenvalues.len()
            )));
        }
        let contribution = contribution_table(&eigenvalues)?;
        let pseudoinverse = pseudoinverse(&modes);
        Ok(PodBasis {
            modes,
            eigenvalues,
            pseudoinverse,
            contribution,
        })
    }

    /// Retained mode count `r`.
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn n_gauges(&self) -> usize {
        self.modes.nrows()
    }

    /// `N_g × r` mode matrix `Φ_r`.
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    /// Full spectrum `λ` (squared singular values, descending).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Spectrum restricted to the retained modes.
    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.rank()]
    }

    /// `r × N_g` Moore–Penrose inverse of `Φ_r`.
    pub fn pseudoinverse(&self) -> &DMatrix<f64> {
        &self.pseudoinverse
    }

    /// `c(1), …, c(len λ)`.
    pub fn contribution(&self) -> &[f64] {
        &self.contribution
    }

    /// Reduced coordinates of a single gauge snapshot.
    pub fn project(&self, snapshot: &[f64]) -> Result<DVector<f64>> {
        if snapshot.len() != self.n_gauges() {
            return Err(Error::shape(
                format!("{} gauges", self.n_gauges()),
                format!("{} gauges", snapshot.len()),
            ));
        }
        if snapshot.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("snapshot contains NaN or infinity".into()));
        }
        Ok(&self.pseudoinverse * DVector::from_column_slice(snapshot))
    }

    /// `Φ_r α`.
    pub fn reconstruct(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.modes * coefficients
    }

    /// Stable fingerprint of the modes and spectrum.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.modes.nrows().hash(&mut h);
        self.modes.ncols().hash(&mut h);
        for v in self.modes.iter().chain(self.eigenvalues.iter()) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Builds `X` with column `j·N_t + t` holding scenario `j`'s snapshot at step `t`.
pub fn assemble_matrix(db: &ScenarioDatabase) -> Result<DMatrix<f64>> {
    if db.is_empty() {
        return Err(Error::Degenerate("empty database".into()));
    }
    let (n_g, n_t) = (db.n_gauges(), db.n_steps());
    let mut x = DMatrix::zeros(n_g, n_t * db.len());
    for (j, s) in db.scenarios().iter().enumerate() {
        check_record_shape(s, n_g, n_t)?;
        for (g, series) in s.waveforms.iter().enumerate() {
            for (t, &v) in series.samples.iter().enumerate() {
                x[(g, j * n_t + t)] = v;
            }
        }
    }
    Ok(x)
}

fn check_record_shape(s: &ScenarioRecord, n_g: usize, n_t: usize) -> Result<()> {
    if s.n_gauges() != n_g || s.waveforms.iter().any(|w| w.len() != n_t) {
        return Err(Error::Inconsistent(format!(
            "scenario {} does not match the {n_g}×{n_t} waveform shape",
            s.scenario_id
        )));
    }
    Ok(())
}

/// Scenario waveforms as an `N_g × N_t` matrix.
pub fn waveform_block(s: &ScenarioRecord) -> DMatrix<f64> {
    let n_t = s.n_steps();
    DMatrix::from_fn(s.n_gauges(), n_t, |g, t| s.waveforms[g].samples[t])
}

/// Truncated POD of an explicit data matrix.
pub fn compute_basis(x: &DMatrix<f64>, rule: ModeRule) -> Result<PodBasis> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("data matrix contains NaN or infinity".into()));
    }
    let gram = x * x.transpose();
    basis_from_gram(gram, x.ncols(), rule)
}

/// Same result as `compute_basis(&assemble_matrix(db)?, rule)` without
/// materializing `X`: the Gram matrix is accumulated scenario by scenario.
pub fn compute_basis_from_database(db: &ScenarioDatabase, rule: ModeRule) -> Result<PodBasis> {
    if db.is_empty() {
        return Err(Error::Degenerate("empty database".into()));
    }
    let (n_g, n_t) = (db.n_gauges(), db.n_steps());
    let mut gram = DMatrix::zeros(n_g, n_g);
    for s in db.scenarios() {
        check_record_shape(s, n_g, n_t)?;
        let w = waveform_block(s);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "scenario {} contains NaN or infinity",
                s.scenario_id
            )));
        }
        gram.gemm(1.0, &w, &w.transpose(), 1.0);
    }
    basis_from_gram(gram, n_t * db.len(), rule)
}

fn basis_from_gram(gram: DMatrix<f64>, n_cols: usize, rule: ModeRule) -> Result<PodBasis> {
    let n_g = gram.nrows();
    if n_g == 0 || n_cols == 0 {
        return Err(Error::Degenerate("empty data matrix".into()));
    }
    if gram.trace() <= 0.0 {
        return Err(Error::Degenerate("data matrix is identically zero".into()));
    }

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n_g).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let n_lambda = n_g.min(n_cols);
    // Rounding can leave the null-space eigenvalues marginally negative.
    let eigenvalues: Vec<f64> = order[..n_lambda]
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let contribution = contribution_table(&eigenvalues)?;

    let r = match rule {
        ModeRule::Fixed(r) => {
            if r == 0 || r > n_lambda {
                return Err(Error::Config(format!(
                    "fixed mode count {r} outside 1..={n_lambda}"
                )));
            }
            r
        }
        ModeRule::Threshold(theta) => {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::Config(format!("threshold {theta} outside (0, 1]")));
            }
            contribution.iter().position(|&c| c >= theta).unwrap_or(n_lambda - 1) + 1
        }
    };

    let mut modes = DMatrix::zeros(n_g, r);
    for (k, &i) in order[..r].iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // Sign convention: largest-magnitude entry positive.
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        modes.set_column(k, &v);
    }

    let pseudoinverse = pseudoinverse(&modes);
    Ok(PodBasis {
        modes,
        eigenvalues,
        pseudoinverse,
        contribution,
    })
}

fn contribution_table(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("spectrum has no energy".into()));
    }
    let mut acc = 0.0;
    let mut c: Vec<f64> = eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = 1.0;
    }
    Ok(c)
}

/// Moore–Penrose inverse of a mode matrix.
///
/// Orthonormal columns give `Φᵀ` directly; anything else goes through an SVD
/// with singular values below `1e-12·σ_max` treated as zero.
pub fn pseudoinverse(modes: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = modes.transpose() * modes;
    let identity = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
    if (gram - identity).amax() <= ORTHONORMAL_TOL {
        return modes.transpose();
    }
    let svd = modes.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    svd.pseudo_inverse(1e-12 * sigma_max)
        .expect("both factors were requested")
}

/// Reduced coordinates `α_j` (`r × N_t`) of every scenario in a database.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    ids: Vec<u64>,
    alphas: Vec<DMatrix<f64>>,
    rank: usize,
    n_steps: usize,
}

impl CoefficientSet {
    pub fn from_parts(ids: Vec<u64>, alphas: Vec<DMatrix<f64>>) -> Result<Self> {
        if ids.len() != alphas.len() || alphas.is_empty() {
            return Err(Error::Inconsistent(format!(
                "{} ids for {} coefficient matrices",
                ids.len(),
                alphas.len()
            )));
        }
        let (rank, n_steps) = alphas[0].shape();
        if alphas.iter().any(|a| a.shape() != (rank, n_steps)) {
            return Err(Error::Inconsistent("ragged coefficient matrices".into()));
        }
        Ok(CoefficientSet {
            ids,
            alphas,
            rank,
            n_steps,
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// `r × N_t` matrix for the scenario at position `j`.
    pub fn matrix(&self, j: usize) -> &DMatrix<f64> {
        &self.alphas[j]
    }

    /// `α_j^(t)` for the scenario at position `j`, time index `step`.
    pub fn at(&self, j: usize, step: usize) -> &[f64] {
        &self.alphas[j].as_slice()[step * self.rank..(step + 1) * self.rank]
    }
}

/// Projects every snapshot of every scenario in `db` onto `basis`.
pub fn extract_coefficients(basis: &PodBasis, db: &ScenarioDatabase) -> Result<CoefficientSet> {
    if db.n_gauges() != basis.n_gauges() {
        return Err(Error::shape(
            format!("{} gauges", basis.n_gauges()),
            format!("{} gauges", db.n_gauges()),
        ));
    }
    let project = |s: &ScenarioRecord| -> Result<DMatrix<f64>> {
        let w = waveform_block(s);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "scenario {} contains NaN or infinity",
                s.scenario_id
            )));
        }
        Ok(basis.pseudoinverse() * w)
    };

    #[cfg(feature = "parallel")]
    let alphas: Result<Vec<_>> = {
        use rayon::prelude::*;
        db.scenarios().par_iter().map(project).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let alphas: Result<Vec<_>> = db.scenarios().iter().map(project).collect();

    let ids = db.scenarios().iter().map(|s| s.scenario_id).collect();
    CoefficientSet::from_parts(ids, alphas?)
}
