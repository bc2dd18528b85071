use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::arrival::detect_arrival;
use super::report::{box_table, BoxRow};
use super::split::{filter_scenarios, kfold_split};
use super::SweepConfig;
use crate::bayes::{run_sequence_checkpoints, LikelihoodModel, PosteriorState};
use crate::detect::{self, Method, Prediction};
use crate::dtw::{argmin_by_id, scenario_distances};
use crate::error::{Error, Result};
use crate::metrics::{absolute_error, classify_inundation};
use crate::pod::{compute_basis_from_database, extract_coefficients, CoefficientSet, PodBasis};
use crate::scenario::{GaugeSeries, ObservationWindow, ScenarioDatabase, ScenarioRecord};

/// One prediction compared against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fold: usize,
    pub scenario_id: u64,
    pub method: Method,
    pub t_obs: f64,
    pub eta_pred: f64,
    pub eta_true: f64,
    #[serde(rename = "H_pred")]
    pub h_pred: f64,
    #[serde(rename = "H_true")]
    pub h_true: f64,
    #[serde(rename = "TPR")]
    pub tpr: f64,
    #[serde(rename = "FPR")]
    pub fpr: f64,
    pub t_arrv: Option<f64>,
    pub chosen_id: Option<u64>,
    pub n_tp: usize,
    pub n_tn: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    /// `ok`, or the error that prevented a prediction.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn eta_error(&self) -> f64 {
        absolute_error(self.eta_pred, self.eta_true)
    }

    pub fn h_error(&self) -> f64 {
        absolute_error(self.h_pred, self.h_true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    pub rank: Option<usize>,
    /// Fingerprint of the fold's POD basis.
    pub basis_digest: Option<u64>,
    pub error: Option<String>,
}

/// Predicted grid of one report row.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseGrid {
    pub fold: usize,
    pub scenario_id: u64,
    pub method: Method,
    pub t_obs: f64,
    pub grid: crate::scenario::InundationGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub folds: Vec<FoldSummary>,
    pub boxes: Vec<BoxRow>,
    pub grids: Vec<CaseGrid>,
    /// Scenarios left after amplitude filtering.
    pub n_retained: usize,
    pub target_gauge: usize,
}

struct FoldModel {
    train: ScenarioDatabase,
    basis: PodBasis,
    coeffs: CoefficientSet,
    model: LikelihoodModel,
}

fn fit_fold(train: ScenarioDatabase, cfg: &SweepConfig) -> Result<FoldModel> {
    let basis = compute_basis_from_database(&train, cfg.mode_rule)?;
    let coeffs = extract_coefficients(&basis, &train)?;
    let model = LikelihoodModel::from_basis(&basis, cfg.likelihood_scale, cfg.covariance_policy)?;
    Ok(FoldModel {
        train,
        basis,
        coeffs,
        model,
    })
}

/// One (method, window) cell of the evaluation grid for a test scenario.
#[derive(Debug, Clone, Copy)]
struct Slot {
    method: Method,
    t_obs: f64,
    steps: usize,
}

fn slots(cfg: &SweepConfig, db: &ScenarioDatabase) -> Result<Vec<Slot>> {
    let windows = cfg
        .windows
        .iter()
        .map(|&t| ObservationWindow::for_database(t, db))
        .collect::<Result<Vec<_>>>()?;
    let mut methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| cfg.methods.contains(m))
        .collect();
    methods.dedup();
    let mut out = Vec::new();
    for &method in &methods {
        for w in &windows {
            if w.step_count() == 0 {
                return Err(Error::Config(format!(
                    "window {} s is shorter than one sampling period",
                    w.t_obs()
                )));
            }
            out.push(Slot {
                method,
                t_obs: w.t_obs(),
                steps: w.step_count(),
            });
        }
        if cfg.full_history && method == Method::ShortestDtw {
            out.push(Slot {
                method,
                t_obs: db.horizon(),
                steps: db.n_steps(),
            });
        }
    }
    Ok(out)
}

fn noisy_observation(record: &ScenarioRecord, sigma: f64, seed: u64) -> Vec<GaugeSeries> {
    if sigma == 0.0 {
        return record.waveforms.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_655f_7374);
    rng.set_stream(record.scenario_id);
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    record
        .waveforms
        .iter()
        .map(|g| {
            GaugeSeries::new(
                g.gauge_id,
                g.samples.iter().map(|v| v + noise.sample(&mut rng)).collect(),
            )
        })
        .collect()
}

struct CaseOutput {
    rows: Vec<SweepRow>,
    grids: Vec<CaseGrid>,
}

fn failed_rows(fold: usize, truth: &ScenarioRecord, target: usize, slots: &[Slot], err: &Error) -> Vec<SweepRow> {
    slots
        .iter()
        .map(|s| SweepRow {
            fold,
            scenario_id: truth.scenario_id,
            method: s.method,
            t_obs: s.t_obs,
            eta_pred: f64::NAN,
            eta_true: truth.eta_max_per_gauge[target],
            h_pred: f64::NAN,
            h_true: truth.h_max,
            tpr: f64::NAN,
            fpr: f64::NAN,
            t_arrv: None,
            chosen_id: None,
            n_tp: 0,
            n_tn: 0,
            n_fp: 0,
            n_fn: 0,
            status: err.to_string().replace(['\n', '\r'], " "),
        })
        .collect()
}

fn evaluate_case(
    fold: usize,
    fm: &FoldModel,
    truth: &ScenarioRecord,
    slots: &[Slot],
    target: usize,
    cfg: &SweepConfig,
) -> Result<CaseOutput> {
    let observed = noisy_observation(truth, cfg.noise_sigma, cfg.seed);
    let t_arrv = detect_arrival(&truth.waveforms[target], fm.train.dt(), &cfg.peak).map(|a| a.t_arrv);

    let bayes_steps: Vec<usize> = slots
        .iter()
        .filter(|s| s.method.is_bayesian())
        .map(|s| s.steps)
        .collect();
    let posteriors = if bayes_steps.is_empty() {
        Vec::new()
    } else {
        run_sequence_checkpoints(
            &fm.coeffs,
            &fm.basis,
            &observed,
            &bayes_steps,
            &fm.model,
            PosteriorState::uniform(fm.train.len()),
        )?
    };

    let dtw_steps: Vec<usize> = slots
        .iter()
        .filter(|s| s.method == Method::ShortestDtw)
        .map(|s| s.steps)
        .collect();
    let dtw_choice: Vec<usize> = if dtw_steps.is_empty() {
        Vec::new()
    } else {
        let d = scenario_distances(&fm.train, &observed, &dtw_steps, &cfg.dtw)?;
        let ids: Vec<u64> = fm.train.scenarios().iter().map(|s| s.scenario_id).collect();
        (0..dtw_steps.len())
            .map(|w| {
                let column: Vec<f64> = d.iter().map(|row| row[w]).collect();
                argmin_by_id(&column, &ids).expect("non-empty training set")
            })
            .collect()
    };

    let (mut bi, mut di) = (0, 0);
    let mut rows = Vec::with_capacity(slots.len());
    let mut grids = Vec::new();
    for s in slots {
        let pred: Prediction = match s.method {
            Method::MostProbable => {
                bi += 1;
                detect::most_probable(&posteriors[bi - 1], &fm.train, target, s.t_obs)?
            }
            Method::WeightedMean => {
                bi += 1;
                detect::weighted_mean(&posteriors[bi - 1], &fm.train, target, s.t_obs)?
            }
            Method::ShortestDtw => {
                di += 1;
                detect::from_scenario(
                    Method::ShortestDtw,
                    &fm.train.scenarios()[dtw_choice[di - 1]],
                    s.t_obs,
                    target,
                )
            }
        };
        let counts = classify_inundation(&pred.inundation_pred, &truth.inundation, cfg.wet_threshold)?;
        rows.push(SweepRow {
            fold,
            scenario_id: truth.scenario_id,
            method: s.method,
            t_obs: s.t_obs,
            eta_pred: pred.eta_max_pred,
            eta_true: truth.eta_max_per_gauge[target],
            h_pred: pred.h_max_pred,
            h_true: truth.h_max,
            tpr: counts.tpr(),
            fpr: counts.fpr(),
            t_arrv,
            chosen_id: pred.chosen_id,
            n_tp: counts.tp,
            n_tn: counts.tn,
            n_fp: counts.fp,
            n_fn: counts.fn_,
            status: "ok".into(),
        });
        if cfg.keep_grids {
            grids.push(CaseGrid {
                fold,
                scenario_id: truth.scenario_id,
                method: s.method,
                t_obs: s.t_obs,
                grid: pred.inundation_pred,
            });
        }
    }
    Ok(CaseOutput { rows, grids })
}

/// k-fold evaluation of every selected method at every observation window.
///
/// The POD basis, coefficients and likelihood model are refit on each
/// training fold. A failure on one test scenario is recorded in its rows and
/// does not stop the sweep.
pub fn run_sweep(db: &ScenarioDatabase, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let target = cfg.target_gauge.unwrap_or(db.n_gauges().saturating_sub(1));
    if target >= db.n_gauges() {
        return Err(Error::Config(format!(
            "target gauge {target} out of range for {} gauges",
            db.n_gauges()
        )));
    }
    let db = filter_scenarios(db, cfg.amplitude_threshold, target)?;
    let slots = slots(cfg, &db)?;
    let folds = kfold_split(db.len(), cfg.folds, cfg.seed)?;

    let ids = |idx: &[usize]| -> Vec<u64> { idx.iter().map(|&i| db.scenarios()[i].scenario_id).collect() };
    let mut summaries = Vec::with_capacity(folds.len());
    let mut models = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let fitted = fit_fold(db.subset(&fold.train), cfg);
        summaries.push(FoldSummary {
            fold: f,
            train_ids: ids(&fold.train),
            test_ids: ids(&fold.test),
            rank: fitted.as_ref().ok().map(|m| m.basis.rank()),
            basis_digest: fitted.as_ref().ok().map(|m| m.basis.digest()),
            error: fitted.as_ref().err().map(|e| e.to_string()),
        });
        models.push(fitted);
    }

    let cases: Vec<(usize, usize)> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, fold)| fold.test.iter().map(move |&i| (f, i)))
        .collect();
    let run_case = |&(f, i): &(usize, usize)| -> CaseOutput {
        let truth = &db.scenarios()[i];
        let outcome = match &models[f] {
            Ok(fm) => evaluate_case(f, fm, truth, &slots, target, cfg),
            Err(e) => Err(Error::Degenerate(format!("fold {f} model unavailable: {e}"))),
        };
        outcome.unwrap_or_else(|e| {
            log::warn!("fold {f}, scenario {}: {e}", truth.scenario_id);
            CaseOutput {
                rows: failed_rows(f, truth, target, &slots, &e),
                grids: Vec::new(),
            }
        })
    };

    #[cfg(feature = "parallel")]
    let outputs: Vec<CaseOutput> = {
        use rayon::prelude::*;
        cases.par_iter().map(run_case).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<CaseOutput> = cases.iter().map(run_case).collect();

    let mut rows = Vec::with_capacity(cases.len() * slots.len());
    let mut grids = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        grids.extend(out.grids);
    }
    let boxes = box_table(&rows);
    Ok(SweepReport {
        rows,
        folds: summaries,
        boxes,
        grids,
        n_retained: db.len(),
        target_gauge: target,
    })
}
