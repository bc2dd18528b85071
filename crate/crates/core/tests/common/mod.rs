#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tsunami_detect::scenario::{
    GaugeSeries, GridGeometry, InundationGrid, ScenarioDatabase, ScenarioRecord,
};

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Depths with roughly a third of the cells dry.
pub fn random_grid(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> InundationGrid {
    let depths = (0..nx * ny)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0..3.0);
            v.max(0.0)
        })
        .collect();
    InundationGrid::new(nx, ny, depths).unwrap()
}

/// White-noise waveforms and random grids; ids are `0..n_s`.
pub fn random_db(
    rng: &mut ChaCha8Rng,
    n_s: usize,
    n_g: usize,
    n_t: usize,
    nx: usize,
    ny: usize,
) -> ScenarioDatabase {
    let scenarios = (0..n_s)
        .map(|j| {
            let waves = (0..n_g)
                .map(|g| GaugeSeries::new(g, (0..n_t).map(|_| gaussian(rng)).collect()))
                .collect();
            ScenarioRecord::new(j as u64, waves, random_grid(rng, nx, ny)).unwrap()
        })
        .collect();
    ScenarioDatabase::new(scenarios, n_g, n_t, 5.0, GridGeometry::new(nx, ny)).unwrap()
}

/// Random probability vector with some exact zeros (never all zero).
pub fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if p.iter().all(|&v| v == 0.0) {
        p[rng.random_range(0..n)] = 1.0;
    }
    p
}

/// Minimum over every monotone warping path, by plain recursion.
pub fn dtw_exhaustive(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let c = (a[i] - b[j]).abs();
        if i == 0 && j == 0 {
            return c;
        }
        let mut best = f64::INFINITY;
        if i > 0 {
            best = best.min(go(a, b, i - 1, j));
        }
        if j > 0 {
            best = best.min(go(a, b, i, j - 1));
        }
        if i > 0 && j > 0 {
            best = best.min(go(a, b, i - 1, j - 1));
        }
        c + best
    }
    go(a, b, a.len() - 1, b.len() - 1)
}

/// Wet/dry confusion counts `(tp, tn, fp, fn)` by an explicit double loop.
pub fn confusion_oracle(pred: &InundationGrid, truth: &InundationGrid, thr: f64) -> [usize; 4] {
    let mut c = [0; 4];
    for ix in 0..truth.nx() {
        for iy in 0..truth.ny() {
            let p = pred.get(ix, iy) > thr;
            let t = truth.get(ix, iy) > thr;
            let k = match (p, t) {
                (true, true) => 0,
                (false, false) => 1,
                (true, false) => 2,
                (false, true) => 3,
            };
            c[k] += 1;
        }
    }
    c
}
