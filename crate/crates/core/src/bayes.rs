//! Sequential Bayesian posterior over database scenarios.
//!
//! At each observation step the observed gauge snapshot is projected onto the
//! POD basis and compared with every scenario's stored coefficients at the same
//! time index through a diagonal Mahalanobis distance:
//!
//! ```text
//! Δ_j  = sqrt( Σ_l (α_{j,l} − α̃_l)² / p_l ),      p_l = 0.1 · sqrt(σ_l)
//! L_j  = (2π)^{-r/2} · det(P)^{-1/2} · exp(−Δ_j² / 2)
//! P_j ← L_j · P_j / Σ_i L_i · P_i
//! ```
//!
//! `σ_l` defaults to the POD eigenvalue of mode `l`. All probability
//! arithmetic runs in log space with a max-shift before exponentiation, since
//! the Gaussian underflows for moderate distances.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::{CoefficientSet, PodBasis};
use crate::scenario::GaugeSeries;

/// Factor in `P = 0.1·Σ^{1/2}`.
pub const DEFAULT_SCALE: f64 = 0.1;

/// What plays the role of `Σ` when building the covariance diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariancePolicy {
    /// `σ_l = λ_l`.
    #[default]
    Eigenvalues,
    /// `σ_l = λ_l / Σ_k λ_k`.
    NormalizedEigenvalues,
}

/// Diagonal Gaussian likelihood in coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    covariance_diag: Vec<f64>,
    log_normalizer: f64,
}

impl LikelihoodModel {
    pub fn new(covariance_diag: Vec<f64>) -> Result<Self> {
        if covariance_diag.is_empty() {
            return Err(Error::Model("empty covariance".into()));
        }
        if let Some(p) = covariance_diag.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::Model(format!(
                "covariance entries must be positive and finite, found {p}"
            )));
        }
        let r = covariance_diag.len() as f64;
        let log_det: f64 = covariance_diag.iter().map(|p| p.ln()).sum();
        let log_normalizer = -0.5 * r * std::f64::consts::TAU.ln() - 0.5 * log_det;
        Ok(LikelihoodModel {
            covariance_diag,
            log_normalizer,
        })
    }

    /// `p_l = scale · sqrt(σ_l)` for the retained modes of `basis`.
    pub fn from_basis(basis: &PodBasis, scale: f64, policy: CovariancePolicy) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Model(format!("scale must be positive, got {scale}")));
        }
        let total: f64 = basis.eigenvalues().iter().sum();
        let diag = basis
            .retained_eigenvalues()
            .iter()
            .map(|&l| match policy {
                CovariancePolicy::Eigenvalues => scale * l.sqrt(),
                CovariancePolicy::NormalizedEigenvalues => scale * (l / total).sqrt(),
            })
            .collect();
        Self::new(diag)
    }

    pub fn rank(&self) -> usize {
        self.covariance_diag.len()
    }

    pub fn covariance_diag(&self) -> &[f64] {
        &self.covariance_diag
    }

    /// `ln[(2π)^{-r/2} det(P)^{-1/2}]`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }
}

/// Diagonal Mahalanobis distance between two coefficient vectors.
pub fn mahalanobis(a: &[f64], b: &[f64], model: &LikelihoodModel) -> Result<f64> {
    if a.len() != model.rank() || b.len() != model.rank() {
        return Err(Error::shape(
            format!("{} coefficients", model.rank()),
            format!("{} and {}", a.len(), b.len()),
        ));
    }
    Ok(squared_distance(a, b, &model.covariance_diag).sqrt())
}

fn squared_distance(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(p)
        .map(|((x, y), p)| (x - y) * (x - y) / p)
        .sum()
}

/// `ln L` for a distance `Δ`.
pub fn log_likelihood(delta: f64, model: &LikelihoodModel) -> f64 {
    model.log_normalizer - 0.5 * delta * delta
}

/// Gaussian likelihood of a distance `Δ`; evaluated through [`log_likelihood`].
pub fn likelihood(delta: f64, model: &LikelihoodModel) -> f64 {
    log_likelihood(delta, model).exp()
}

/// Result of a single posterior update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Updated,
    /// Every supported scenario had zero likelihood; the prior was kept.
    KeptPrior,
}

/// Probability over the scenarios of a [`CoefficientSet`], in its order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    log_probs: Vec<f64>,
    probs: Vec<f64>,
    step: usize,
    history: Option<Vec<Vec<f64>>>,
}

impl PosteriorState {
    pub fn uniform(n: usize) -> Self {
        let p = 1.0 / n as f64;
        PosteriorState {
            log_probs: vec![p.ln(); n],
            probs: vec![p; n],
            step: 0,
            history: None,
        }
    }

    /// Normalizes an arbitrary non-negative prior.
    pub fn from_prior(prior: &[f64]) -> Result<Self> {
        if prior.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Argument("prior must be finite and non-negative".into()));
        }
        let total: f64 = prior.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Argument("prior has no mass".into()));
        }
        let mut state = PosteriorState {
            log_probs: prior.iter().map(|p| p.ln()).collect(),
            probs: Vec::new(),
            step: 0,
            history: None,
        };
        state.normalize_logs();
        Ok(state)
    }

    /// Keeps a copy of the probabilities after every update.
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    fn normalize_logs(&mut self) {
        let max = self.log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = self.log_probs.iter().map(|l| (l - max).exp()).collect();
        let log_total = max + shifted.iter().sum::<f64>().ln();
        for l in &mut self.log_probs {
            *l -= log_total;
        }
        self.probs = self.log_probs.iter().map(|l| l.exp()).collect();
        let total: f64 = self.probs.iter().sum();
        for p in &mut self.probs {
            *p /= total;
        }
    }

    /// Multiplies by `exp(log_likelihoods)` and renormalizes.
    pub fn apply_log_likelihoods(&mut self, log_likelihoods: &[f64]) -> Result<UpdateOutcome> {
        if log_likelihoods.len() != self.len() {
            return Err(Error::shape(
                format!("{} likelihoods", self.len()),
                log_likelihoods.len(),
            ));
        }
        let candidate: Vec<f64> = self
            .log_probs
            .iter()
            .zip(log_likelihoods)
            .map(|(lp, ll)| {
                if *lp == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    lp + ll
                }
            })
            .collect();

        let outcome = if candidate.iter().all(|v| !(v.is_finite())) {
            warn!(
                "posterior update at step {} has no finite likelihood; keeping the prior",
                self.step + 1
            );
            UpdateOutcome::KeptPrior
        } else {
            self.log_probs = candidate;
            self.normalize_logs();
            UpdateOutcome::Updated
        };
        self.step += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(self.probs.clone());
        }
        Ok(outcome)
    }

    /// One step: likelihood of `observed` against every scenario's `α_j^(step)`.
    pub fn update(
        &mut self,
        observed: &[f64],
        coeffs: &CoefficientSet,
        step: usize,
        model: &LikelihoodModel,
    ) -> Result<UpdateOutcome> {
        if coeffs.len() != self.len() {
            return Err(Error::shape(
                format!("{} scenarios", self.len()),
                format!("{} coefficient sets", coeffs.len()),
            ));
        }
        if step >= coeffs.n_steps() {
            return Err(Error::Argument(format!(
                "step {step} beyond the {}-step horizon",
                coeffs.n_steps()
            )));
        }
        if observed.len() != model.rank() || coeffs.rank() != model.rank() {
            return Err(Error::shape(
                format!("{} coefficients", model.rank()),
                format!("observed {}, stored {}", observed.len(), coeffs.rank()),
            ));
        }
        let log_l: Vec<f64> = (0..coeffs.len())
            .map(|j| {
                let d2 = squared_distance(coeffs.at(j, step), observed, model.covariance_diag());
                model.log_normalizer() - 0.5 * d2
            })
            .collect();
        self.apply_log_likelihoods(&log_l)
    }

    /// Position of the largest probability; the first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = j;
            }
        }
        best
    }
}

fn check_observation(observed: &[GaugeSeries], basis: &PodBasis, steps: usize) -> Result<()> {
    if observed.len() != basis.n_gauges() {
        return Err(Error::shape(
            format!("{} gauges", basis.n_gauges()),
            format!("{} gauges", observed.len()),
        ));
    }
    if steps == 0 {
        return Err(Error::Argument(
            "observation window shorter than one sampling period".into(),
        ));
    }
    if let Some(g) = observed.iter().find(|g| g.len() < steps) {
        return Err(Error::InsufficientData(format!(
            "gauge {} has {} samples, window needs {steps}",
            g.gauge_id,
            g.len()
        )));
    }
    Ok(())
}

/// Runs `steps` updates (project → distance → likelihood → update) from `prior`.
pub fn run_sequence(
    coeffs: &CoefficientSet,
    basis: &PodBasis,
    observed: &[GaugeSeries],
    steps: usize,
    model: &LikelihoodModel,
    prior: PosteriorState,
) -> Result<PosteriorState> {
    let mut snapshots = run_sequence_checkpoints(coeffs, basis, observed, &[steps], model, prior)?;
    Ok(snapshots.pop().expect("one checkpoint requested"))
}

/// Like [`run_sequence`], returning a copy of the posterior after each step count in
/// `checkpoints` (ascending order not required; output follows input order).
pub fn run_sequence_checkpoints(
    coeffs: &CoefficientSet,
    basis: &PodBasis,
    observed: &[GaugeSeries],
    checkpoints: &[usize],
    model: &LikelihoodModel,
    prior: PosteriorState,
) -> Result<Vec<PosteriorState>> {
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    if checkpoints.contains(&0) {
        return Err(Error::Argument(
            "observation window shorter than one sampling period".into(),
        ));
    }
    check_observation(observed, basis, last)?;

    let mut state = prior;
    let mut out: Vec<Option<PosteriorState>> = vec![None; checkpoints.len()];
    let mut snapshot = vec![0.0; observed.len()];
    for step in 0..last {
        for (v, g) in snapshot.iter_mut().zip(observed) {
            *v = g.samples[step];
        }
        let alpha: DVector<f64> = basis.project(&snapshot)?;
        state.update(alpha.as_slice(), coeffs, step, model)?;
        for (slot, &c) in out.iter_mut().zip(checkpoints) {
            if c == step + 1 {
                *slot = Some(state.clone());
            }
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every checkpoint reached")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn model(diag: &[f64]) -> LikelihoodModel {
        LikelihoodModel::new(diag.to_vec()).unwrap()
    }

    #[test]
    fn distance_to_self_is_zero() {
        let m = model(&[1.0, 2.0, 3.0]);
        assert_eq!(mahalanobis(&[1.0, -2.0, 0.5], &[1.0, -2.0, 0.5], &m).unwrap(), 0.0);
    }

    #[test]
    fn distance_hand_case() {
        let m = model(&[4.0]);
        assert_eq!(mahalanobis(&[2.0], &[0.0], &m).unwrap(), 1.0);
    }

    #[test]
    fn distance_matches_quadratic_form() {
        let m = model(&[0.3, 1.7, 2.2, 0.9, 5.0]);
        let a = [0.4, -1.2, 3.3, 0.0, 2.1];
        let b = [1.1, 0.2, -0.7, 0.5, 2.0];
        let p_inv = DMatrix::from_diagonal(&DVector::from_vec(
            m.covariance_diag().iter().map(|p| 1.0 / p).collect(),
        ));
        let d = DVector::from_column_slice(&a) - DVector::from_column_slice(&b);
        let oracle = (d.transpose() * p_inv * &d)[(0, 0)].sqrt();
        let got = mahalanobis(&a, &b, &m).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert_eq!(got, mahalanobis(&b, &a, &m).unwrap());
    }

    #[test]
    fn nonpositive_covariance_rejected() {
        assert!(matches!(LikelihoodModel::new(vec![1.0, 0.0]), Err(Error::Model(_))));
        assert!(LikelihoodModel::new(vec![-1.0]).is_err());
    }

    #[test]
    fn standard_normal_peak() {
        let l = likelihood(0.0, &model(&[1.0]));
        assert!((l - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn likelihood_decreases_with_distance() {
        let m = model(&[0.5, 2.0]);
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let l = likelihood(k as f64, &m);
            assert!(l <= prev);
            prev = l;
        }
        assert_eq!(likelihood(1e3, &m), 0.0);
    }

    #[test]
    fn log_space_matches_direct_evaluation() {
        let m = model(&[0.7, 1.3, 2.9]);
        let det: f64 = m.covariance_diag().iter().product();
        for k in 0..=300 {
            let delta = k as f64 * 0.1;
            let direct = (std::f64::consts::TAU.powi(3) * det).sqrt().recip() * (-0.5 * delta * delta).exp();
            let got = likelihood(delta, &m);
            assert!((got - direct).abs() <= 1e-10 * direct, "delta {delta}");
        }
    }

    #[test]
    fn dominant_scenario_takes_all_mass() {
        let mut s = PosteriorState::uniform(4);
        s.apply_log_likelihoods(&[-1e6, 0.0, -1e6, f64::NEG_INFINITY]).unwrap();
        assert!((s.probs()[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.argmax(), 1);
    }

    #[test]
    fn equal_likelihoods_leave_prior() {
        let mut s = PosteriorState::from_prior(&[0.1, 0.2, 0.7]).unwrap();
        let before = s.probs().to_vec();
        s.apply_log_likelihoods(&[-3.5; 3]).unwrap();
        for (a, b) in s.probs().iter().zip(&before) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_prior_stays_zero() {
        let mut s = PosteriorState::from_prior(&[0.0, 1.0, 1.0]).unwrap();
        s.apply_log_likelihoods(&[100.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.probs()[0], 0.0);
    }

    #[test]
    fn degenerate_step_keeps_prior() {
        let mut s = PosteriorState::from_prior(&[0.25, 0.75]).unwrap().with_history();
        let before = s.probs().to_vec();
        assert!((before[1] - 0.75).abs() < 1e-15);
        let outcome = s.apply_log_likelihoods(&[f64::NEG_INFINITY; 2]).unwrap();
        assert_eq!(outcome, UpdateOutcome::KeptPrior);
        assert_eq!(s.probs(), &before[..]);
        assert_eq!(s.step(), 1);
        assert_eq!(s.history().unwrap().len(), 1);
    }

    #[test]
    fn two_scenarios_two_steps_hand_oracle() {
        let m = model(&[2.0]);
        let coeffs = CoefficientSet::from_parts(
            vec![0, 1],
            vec![
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
                DMatrix::from_row_slice(1, 2, &[1.0, 3.0]),
            ],
        )
        .unwrap();
        let obs = [[0.5], [2.0]];
        let mut s = PosteriorState::from_prior(&[0.3, 0.7]).unwrap();
        for (t, o) in obs.iter().enumerate() {
            s.update(o, &coeffs, t, &m).unwrap();
        }
        // L ∝ exp(-d²/(2p)), p = 2
        let l = |d: f64| (-d * d / 4.0).exp();
        let u0 = 0.3 * l(0.5) * l(1.0);
        let u1 = 0.7 * l(0.5) * l(1.0);
        assert!((s.probs()[0] - u0 / (u0 + u1)).abs() < 1e-12);
        assert!((s.probs()[1] - u1 / (u0 + u1)).abs() < 1e-12);
    }

    #[test]
    fn zero_step_window_rejected() {
        let basis = PodBasis::from_parts(DMatrix::identity(1, 1), vec![1.0]).unwrap();
        let coeffs =
            CoefficientSet::from_parts(vec![0], vec![DMatrix::zeros(1, 3)]).unwrap();
        let obs = vec![GaugeSeries::new(0, vec![0.0; 3])];
        let err = run_sequence(&coeffs, &basis, &obs, 0, &model(&[1.0]), PosteriorState::uniform(1));
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
