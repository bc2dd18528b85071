//! Browser front end over a small synthetic database.
//!
//! [`Session`] is the plain Rust API (also used by the tests); [`Demo`] wraps it
//! for JavaScript and hands results over as JSON strings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use tsunami_detect::bayes::{run_sequence, LikelihoodModel, PosteriorState, DEFAULT_SCALE};
use tsunami_detect::detect::{self, Method, Prediction};
use tsunami_detect::dtw::DtwConfig;
use tsunami_detect::metrics::{classify_inundation, DEFAULT_WET_THRESHOLD};
use tsunami_detect::pod::{
    compute_basis_from_database, extract_coefficients, CoefficientSet, ModeRule, PodBasis,
};
use tsunami_detect::scenario::{GaugeSeries, ObservationWindow, ScenarioDatabase, ScenarioRecord};
use tsunami_detect::synth::{generate_database, GenConfig};
use tsunami_detect::{Error, Result};

/// Every fifth generated scenario is held out as a test event.
const HOLDOUT_EVERY: usize = 5;
const TRACE_LEN: usize = 5;

#[derive(Debug, Serialize)]
pub struct Contribution {
    pub curve: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Smallest `r` with `c(r) ≥ θ`.
    pub rank: usize,
    /// Modes kept by the session's likelihood model.
    pub model_rank: usize,
}

#[derive(Debug, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub eta_max: f64,
    pub h_max: f64,
    pub chosen_id: Option<u64>,
    pub tpr: f64,
    pub fpr: f64,
    pub depths: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub scenario_id: u64,
    /// Posterior probability after each step.
    pub probs: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Forecast {
    pub scenario_id: u64,
    pub t_obs: f64,
    pub dt: f64,
    pub steps: usize,
    pub target_gauge: usize,
    /// Noisy target-gauge record over the window.
    pub observed: Vec<f64>,
    /// Clean target-gauge record over the whole horizon.
    pub truth_series: Vec<f64>,
    pub eta_max: f64,
    pub h_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub truth_depths: Vec<f64>,
    pub methods: Vec<MethodResult>,
    /// Most probable scenarios at the end of the window.
    pub trace: Vec<Trace>,
}

pub struct Session {
    train: ScenarioDatabase,
    test: Vec<ScenarioRecord>,
    basis: PodBasis,
    coeffs: CoefficientSet,
    model: LikelihoodModel,
}

impl Session {
    pub fn new(seed: u64, n_scenarios: usize, n_steps: usize) -> Result<Self> {
        let cfg = GenConfig {
            seed,
            n_scenarios,
            n_steps,
            ..GenConfig::default()
        };
        let db = generate_database(&cfg)?;
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
            (0..db.len()).partition(|j| j % HOLDOUT_EVERY != HOLDOUT_EVERY - 1);
        if train_idx.is_empty() || test_idx.is_empty() {
            return Err(Error::Config(format!("{n_scenarios} scenarios is too few to split")));
        }
        let train = db.subset(&train_idx);
        let test = db.subset(&test_idx).into_scenarios();
        let basis = compute_basis_from_database(&train, ModeRule::default())?;
        let coeffs = extract_coefficients(&basis, &train)?;
        let model = LikelihoodModel::from_basis(&basis, DEFAULT_SCALE, Default::default())?;
        Ok(Session {
            train,
            test,
            basis,
            coeffs,
            model,
        })
    }

    pub fn test_ids(&self) -> Vec<u64> {
        self.test.iter().map(|s| s.scenario_id).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.train.horizon()
    }

    pub fn contribution(&self, theta: f64) -> Contribution {
        let curve = self.basis.contribution().to_vec();
        let rank = curve.iter().position(|&c| c >= theta).map_or(curve.len(), |i| i + 1);
        Contribution {
            eigenvalues: self.basis.eigenvalues().to_vec(),
            curve,
            rank,
            model_rank: self.basis.rank(),
        }
    }

    fn observe(&self, truth: &ScenarioRecord, steps: usize, sigma: f64, seed: u64) -> Result<Vec<GaugeSeries>> {
        let noise = Normal::new(0.0, sigma)
            .ok()
            .filter(|_| sigma >= 0.0)
            .ok_or_else(|| Error::Argument(format!("invalid noise level {sigma}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(truth
            .waveforms
            .iter()
            .map(|g| {
                let samples = g.samples[..steps]
                    .iter()
                    .map(|v| if sigma > 0.0 { v + noise.sample(&mut rng) } else { *v })
                    .collect();
                GaugeSeries::new(g.gauge_id, samples)
            })
            .collect())
    }

    /// Runs all three methods on held-out event `test_index` observed for `t_obs` seconds.
    pub fn forecast(&self, test_index: usize, t_obs: f64, noise_sigma: f64, noise_seed: u64) -> Result<Forecast> {
        let truth = self.test.get(test_index).ok_or_else(|| {
            Error::Argument(format!("test index {test_index} out of range ({})", self.test.len()))
        })?;
        let window = ObservationWindow::for_database(t_obs, &self.train)?;
        let steps = window.step_count();
        let observed = self.observe(truth, steps, noise_sigma, noise_seed)?;
        let target = self.train.n_gauges() - 1;

        let prior = PosteriorState::uniform(self.train.len()).with_history();
        let post = run_sequence(&self.coeffs, &self.basis, &observed, steps, &self.model, prior)?;
        let predictions: Vec<Prediction> = vec![
            detect::most_probable(&post, &self.train, target, window.t_obs())?,
            detect::weighted_mean(&post, &self.train, target, window.t_obs())?,
            detect::shortest_dtw(&self.train, &observed, &window, &DtwConfig::default(), target)?,
        ];
        let methods = predictions
            .into_iter()
            .map(|p| {
                let c = classify_inundation(&p.inundation_pred, &truth.inundation, DEFAULT_WET_THRESHOLD)?;
                Ok(MethodResult {
                    method: p.method,
                    eta_max: p.eta_max_pred,
                    h_max: p.h_max_pred,
                    chosen_id: p.chosen_id,
                    tpr: c.tpr(),
                    fpr: c.fpr(),
                    depths: p.inundation_pred.depths().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let history = post.history().unwrap_or_default();
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.sort_by(|&a, &b| post.probs()[b].total_cmp(&post.probs()[a]));
        let trace = order
            .into_iter()
            .take(TRACE_LEN)
            .map(|j| Trace {
                scenario_id: self.train.scenarios()[j].scenario_id,
                probs: history.iter().map(|h| h[j]).collect(),
            })
            .collect();

        let (nx, ny) = truth.inundation.shape();
        Ok(Forecast {
            scenario_id: truth.scenario_id,
            t_obs: window.t_obs(),
            dt: self.train.dt(),
            steps,
            target_gauge: target,
            observed: observed[target].samples.clone(),
            truth_series: truth.waveforms[target].samples.clone(),
            eta_max: truth.eta_max_per_gauge[target],
            h_max: truth.h_max,
            nx,
            ny,
            truth_depths: truth.inundation.depths().to_vec(),
            methods,
            trace,
        })
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n_scenarios: usize, n_steps: usize) -> Result<Demo, JsError> {
        Session::new(seed.into(), n_scenarios, n_steps)
            .map(|session| Demo { session })
            .map_err(js_err)
    }

    #[wasm_bindgen(js_name = testIds)]
    pub fn test_ids(&self) -> Vec<f64> {
        self.session.test_ids().into_iter().map(|id| id as f64).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.session.horizon()
    }

    /// JSON [`Contribution`].
    pub fn contribution(&self, theta: f64) -> Result<String, JsError> {
        serde_json::to_string(&self.session.contribution(theta)).map_err(js_err)
    }

    /// JSON [`Forecast`].
    pub fn forecast(&self, test_index: usize, t_obs: f64, noise_sigma: f64, noise_seed: u32) -> Result<String, JsError> {
        let f = self
            .session
            .forecast(test_index, t_obs, noise_sigma, noise_seed.into())
            .map_err(js_err)?;
        serde_json::to_string(&f).map_err(js_err)
    }
}
