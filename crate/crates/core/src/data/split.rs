//! Label-stratified train/test splitting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

use super::TabularDataset;

/// Stratified split: |test| = round(test_fraction * n), with per-class test
/// counts apportioned by largest remainder. Deterministic per seed.
pub fn split(
    dataset: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = dataset.n_rows();
    if n < 5 {
        return Err(Error::Config(format!(
            "need at least 5 rows to split, have {}",
            n
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0, 1), got {}",
            test_fraction
        )));
    }

    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    for (class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "label class {} has {} row(s); need at least 2",
                class,
                idx.len()
            )));
        }
    }

    let total_test = ((n as f64) * test_fraction).round() as usize;
    let total_test = total_test.clamp(1, n - 1);

    // Largest-remainder apportionment of the test quota across classes.
    let classes: Vec<&Vec<usize>> = by_class.values().collect();
    let mut quotas: Vec<(usize, f64)> = classes
        .iter()
        .map(|idx| {
            let exact = idx.len() as f64 * test_fraction;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        quotas[b]
            .1
            .partial_cmp(&quotas[a].1)
            .unwrap()
            .then(classes[b].len().cmp(&classes[a].len()))
    });
    let mut oi = 0;
    while assigned < total_test {
        let slot = order[oi % order.len()];
        if quotas[slot].0 < classes[slot].len() {
            quotas[slot].0 += 1;
            assigned += 1;
        }
        oi += 1;
    }
    while assigned > total_test {
        let slot = order[oi % order.len()];
        if quotas[slot].0 > 0 {
            quotas[slot].0 -= 1;
            assigned -= 1;
        }
        oi += 1;
    }

    let mut r = rng::stream(seed, &["split"]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (slot, idx) in classes.iter().enumerate() {
        let mut shuffled = (*idx).clone();
        shuffled.shuffle(&mut r);
        let take = quotas[slot].0;
        test.extend_from_slice(&shuffled[..take]);
        train.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
