use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scenario::ScenarioDatabase;

/// Keeps scenarios whose peak height at `gauge` is at least `threshold`, in order.
pub fn filter_scenarios(
    db: &ScenarioDatabase,
    threshold: f64,
    gauge: usize,
) -> Result<ScenarioDatabase> {
    if gauge >= db.n_gauges() {
        return Err(Error::Argument(format!(
            "gauge {gauge} out of range for {} gauges",
            db.n_gauges()
        )));
    }
    let keep: Vec<usize> = db
        .scenarios()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.eta_max_per_gauge[gauge] >= threshold)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::Config(format!(
            "no scenario reaches {threshold} m at gauge {gauge}"
        )));
    }
    Ok(db.subset(&keep))
}

/// Positions (into the split database) of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle into `k` disjoint test folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds for {n} scenarios")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        start += size;
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold { train, test });
    }
    Ok(folds)
}
