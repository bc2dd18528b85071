mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsunami_detect::bayes::{run_sequence, run_sequence_checkpoints, LikelihoodModel, PosteriorState};
use tsunami_detect::detect;
use tsunami_detect::dtw::{dtw_distance, dtw_prefix_distances, dtw_with_path};
use tsunami_detect::harness::kfold_split;
use tsunami_detect::metrics::{box_stats, classify_inundation};
use tsunami_detect::pod::{compute_basis, compute_basis_from_database, extract_coefficients, ModeRule};
use tsunami_detect::scenario::{
    recompute_risk_indices, resample_series, GaugeSeries, InundationGrid, ScenarioRecord,
};

use common::{dtw_exhaustive, random_db, random_probs};

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite(-5.0, 5.0), 1..=max_len)
}

fn grid(nx: usize, ny: usize) -> impl Strategy<Value = InundationGrid> {
    prop::collection::vec(prop_oneof![Just(0.0), finite(0.0, 4.0)], nx * ny)
        .prop_map(move |d| InundationGrid::new(nx, ny, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn risk_indices_match_brute_force(
        waves in prop::collection::vec(prop::collection::vec(finite(-3.0, 3.0), 5), 1..5),
        g in grid(3, 4),
    ) {
        let waveforms: Vec<GaugeSeries> =
            waves.iter().enumerate().map(|(i, w)| GaugeSeries::new(i, w.clone())).collect();
        let rec = recompute_risk_indices(ScenarioRecord {
            scenario_id: 9,
            waveforms,
            inundation: g.clone(),
            eta_max_per_gauge: vec![],
            h_max: -1.0,
        }).unwrap();
        for (i, w) in waves.iter().enumerate() {
            let mut m = f64::NEG_INFINITY;
            for &v in w {
                if v > m { m = v; }
            }
            prop_assert_eq!(rec.eta_max_per_gauge[i], m);
        }
        let mut h = 0.0f64;
        for ix in 0..3 {
            for iy in 0..4 {
                if g.get(ix, iy) > h { h = g.get(ix, iy); }
            }
        }
        prop_assert_eq!(rec.h_max, h);
    }

    #[test]
    fn resample_is_idempotent_on_uniform_input(values in prop::collection::vec(finite(-2.0, 2.0), 2..60)) {
        let dt = 5.0;
        let horizon = values.len() as f64 * dt;
        let raw: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| ((k + 1) as f64 * dt, v)).collect();
        let once = resample_series(0, &raw, dt, horizon).unwrap();
        prop_assert_eq!(&once.samples, &values);
        let again: Vec<(f64, f64)> = once.samples.iter().enumerate().map(|(k, &v)| ((k + 1) as f64 * dt, v)).collect();
        prop_assert_eq!(resample_series(0, &again, dt, horizon).unwrap(), once);
    }

    #[test]
    fn dtw_is_symmetric(a in series(12), b in series(12)) {
        prop_assert_eq!(dtw_distance(&a, &b, None).unwrap(), dtw_distance(&b, &a, None).unwrap());
    }

    #[test]
    fn dtw_bounded_by_diagonal_path(pair in (1usize..15).prop_flat_map(|n| (
        prop::collection::vec(finite(-5.0, 5.0), n),
        prop::collection::vec(finite(-5.0, 5.0), n),
    ))) {
        let (a, b) = pair;
        let diag: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(dtw_distance(&a, &b, None).unwrap() <= diag + 1e-12);
    }

    #[test]
    fn dtw_matches_exhaustive_search(a in series(6), b in series(6)) {
        let dp = dtw_distance(&a, &b, None).unwrap();
        prop_assert!((dp - dtw_exhaustive(&a, &b)).abs() <= 1e-9 * (1.0 + dp));
    }

    #[test]
    fn dtw_path_cost_equals_distance(a in series(10), b in series(10)) {
        let r = dtw_with_path(&a, &b, None).unwrap();
        let path = r.path.unwrap();
        prop_assert_eq!(path[0], (0, 0));
        prop_assert_eq!(*path.last().unwrap(), (a.len() - 1, b.len() - 1));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let cost: f64 = path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
        prop_assert!((cost - r.distance).abs() <= 1e-9 * (1.0 + cost));
    }

    #[test]
    fn banding_never_lowers_distance(a in series(12), b in series(12), w in 0usize..4) {
        let exact = dtw_distance(&a, &b, None).unwrap();
        prop_assert!(dtw_distance(&a, &b, Some(w)).unwrap() >= exact - 1e-12);
    }

    #[test]
    fn prefix_sweep_matches_separate_runs(a in series(20), b in series(20), band in prop::option::of(0usize..5)) {
        let n = a.len().min(b.len());
        let prefixes: Vec<usize> = (1..=n).collect();
        let swept = dtw_prefix_distances(&a, &b, &prefixes, band).unwrap();
        for (k, d) in prefixes.iter().zip(swept) {
            prop_assert_eq!(d, dtw_distance(&a[..*k], &b[..*k], band).unwrap());
        }
    }

    #[test]
    fn dtw_argmin_survives_monotone_rescaling(
        chi in series(8),
        cands in prop::collection::vec(series(8), 2..6),
        scale in finite(0.1, 10.0),
    ) {
        let d: Vec<f64> = cands.iter().map(|c| dtw_distance(&chi, c, None).unwrap()).collect();
        let ids: Vec<u64> = (0..d.len() as u64).collect();
        let scaled: Vec<f64> = d.iter().map(|v| scale * v + 1.0).collect();
        prop_assert_eq!(
            tsunami_detect::dtw::argmin_by_id(&d, &ids),
            tsunami_detect::dtw::argmin_by_id(&scaled, &ids)
        );
    }

    #[test]
    fn pod_invariants(seed in any::<u64>(), n_g in 2usize..8, n_cols in 8usize..40, theta in finite(0.3, 1.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n_g, n_cols, |_, _| common::gaussian(&mut rng));
        let basis = compute_basis(&x, ModeRule::Threshold(theta)).unwrap();
        let r = basis.rank();
        let gram = basis.modes().transpose() * basis.modes();
        prop_assert!((gram - DMatrix::identity(r, r)).amax() < 1e-10);
        let lambda = basis.eigenvalues();
        prop_assert!(lambda.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(lambda.iter().all(|&l| l >= 0.0));
        let c = basis.contribution();
        prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*c.last().unwrap(), 1.0);
        prop_assert!(c[r - 1] >= theta);
        if r > 1 {
            prop_assert!(c[r - 2] < theta);
        }
        let pinv_phi = basis.pseudoinverse() * basis.modes();
        prop_assert!((pinv_phi - DMatrix::identity(r, r)).amax() < 1e-10);
        let energy: f64 = lambda.iter().sum();
        prop_assert!((energy - x.norm_squared()).abs() <= 1e-10 * x.norm_squared());
        let alpha = DVector::from_fn(r, |_, _| common::gaussian(&mut rng));
        let back = basis.project(basis.reconstruct(&alpha).as_slice()).unwrap();
        prop_assert!((back - alpha).amax() < 1e-10);
    }

    #[test]
    fn posterior_stays_normalized_and_checkpoints_agree(seed in any::<u64>(), steps in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, 6, 3, 12, 2, 2);
        let basis = compute_basis_from_database(&db, ModeRule::default()).unwrap();
        let coeffs = extract_coefficients(&basis, &db).unwrap();
        let model = LikelihoodModel::from_basis(&basis, 0.1, Default::default()).unwrap();
        let obs = &db.scenarios()[rng_index(seed, 6)].waveforms;
        let fin = run_sequence(&coeffs, &basis, obs, steps, &model, PosteriorState::uniform(6).with_history()).unwrap();
        for p in fin.history().unwrap() {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let all: Vec<usize> = (1..=steps).collect();
        let cps = run_sequence_checkpoints(&coeffs, &basis, obs, &all, &model, PosteriorState::uniform(6)).unwrap();
        for (cp, h) in cps.iter().zip(fin.history().unwrap()) {
            prop_assert_eq!(cp.probs(), &h[..]);
        }
    }

    #[test]
    fn likelihood_scale_leaves_posterior_unchanged(
        prior in prop::collection::vec(finite(0.01, 1.0), 2..8),
        shift in finite(-50.0, 50.0),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ll: Vec<f64> = prior.iter().map(|_| -10.0 * rand::Rng::random::<f64>(&mut rng)).collect();
        let shifted: Vec<f64> = ll.iter().map(|v| v + shift).collect();
        let mut a = PosteriorState::from_prior(&prior).unwrap();
        let mut b = a.clone();
        a.apply_log_likelihoods(&ll).unwrap();
        b.apply_log_likelihoods(&shifted).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn confusion_counts_are_consistent(p in grid(6, 5), t in grid(6, 5), thr in finite(0.0, 2.0)) {
        let c = classify_inundation(&p, &t, thr).unwrap();
        prop_assert_eq!(c.total(), 30);
        prop_assert!((0.0..=1.0).contains(&c.tpr()));
        prop_assert!((0.0..=1.0).contains(&c.fpr()));
        let higher = classify_inundation(&p, &t, thr + 0.5).unwrap();
        prop_assert!(higher.tp + higher.fp <= c.tp + c.fp);
        let same = classify_inundation(&t, &t, thr).unwrap();
        prop_assert_eq!((same.tpr(), same.fpr()), (1.0, 0.0));
    }

    #[test]
    fn box_stats_are_ordered(v in prop::collection::vec(finite(-100.0, 100.0), 1..50)) {
        let b = box_stats(&v).unwrap();
        prop_assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
        prop_assert!(b.min <= b.mean && b.mean <= b.max);
    }

    #[test]
    fn weighted_mean_is_convex_and_point_methods_are_members(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, 7, 2, 4, 3, 3);
        let post = PosteriorState::from_prior(&random_probs(&mut rng, 7)).unwrap();
        let wm = detect::weighted_mean(&post, &db, 0, 5.0).unwrap();
        let support: Vec<&ScenarioRecord> = db.scenarios().iter().zip(post.probs())
            .filter(|(_, p)| **p > 0.0).map(|(s, _)| s).collect();
        let lo = support.iter().map(|s| s.eta_max_per_gauge[0]).fold(f64::INFINITY, f64::min);
        let hi = support.iter().map(|s| s.eta_max_per_gauge[0]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= wm.eta_max_pred && wm.eta_max_pred <= hi);
        for c in 0..9 {
            let lo = support.iter().map(|s| s.inundation.depths()[c]).fold(f64::INFINITY, f64::min);
            let hi = support.iter().map(|s| s.inundation.depths()[c]).fold(f64::NEG_INFINITY, f64::max);
            let v = wm.inundation_pred.depths()[c];
            prop_assert!(lo <= v && v <= hi);
        }
        let mp = detect::most_probable(&post, &db, 0, 5.0).unwrap();
        let chosen = db.get(mp.chosen_id.unwrap()).unwrap();
        prop_assert_eq!(&mp.inundation_pred, &chosen.inundation);
        prop_assert_eq!(mp.h_max_pred, chosen.h_max);
    }

    #[test]
    fn folds_partition_the_scenarios(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_split(n, k, seed).unwrap();
        let mut hits = vec![0; n];
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in &folds {
            prop_assert_eq!(f.train.len() + f.test.len(), n);
            for &i in &f.test {
                hits[i] += 1;
                prop_assert!(f.train.binary_search(&i).is_err());
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }
}

fn rng_index(seed: u64, n: usize) -> usize {
    (seed % n as u64) as usize
}
