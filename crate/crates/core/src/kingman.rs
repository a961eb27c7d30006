//! Kingman n-coalescent sampler.

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::tree::{default_labels, Merge, NodeId, UltrametricTree};

/// Samples a Kingman n-coalescent on leaves `"1".."n"`: with `k` lineages
/// the next merge comes after an Exponential(k(k-1)/2) wait and joins a
/// uniformly chosen pair.
pub fn sample_kingman(n: usize, rng: &mut RandomSource) -> Result<UltrametricTree> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(sample_kingman_labelled(default_labels(n), rng))
}

pub fn sample_kingman_labelled(leaves: Vec<String>, rng: &mut RandomSource) -> UltrametricTree {
    let n = leaves.len();
    let mut live: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut t = 0.0;
    while live.len() > 1 {
        let k = live.len() as f64;
        t += rng.exponential(k * (k - 1.0) / 2.0);
        let (i, j) = rng.distinct_pair(live.len());
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let b = live.swap_remove(hi);
        let a = live[lo];
        let node = n + merges.len();
        merges.push(Merge {
            time: t,
            children: [a, b],
            id: NodeId(merges.len() as u64),
        });
        live[lo] = node;
    }
    UltrametricTree::from_parts_unchecked(leaves, merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_exponential, mean_se};

    #[test]
    fn zero_leaves_rejected() {
        let mut r = RandomSource::new(0, 0);
        assert!(sample_kingman(0, &mut r).is_err());
    }

    #[test]
    fn single_leaf() {
        let mut r = RandomSource::new(0, 0);
        let t = sample_kingman(1, &mut r).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert!(t.merges().is_empty());
        assert_eq!(t.root_time(), 0.0);
    }

    #[test]
    fn two_leaf_mean_is_one() {
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|i| sample_kingman(2, &mut RandomSource::new(3, i)).unwrap().root_time())
            .collect();
        let (m, _) = mean_se(&xs);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn ten_leaf_height_mean() {
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|i| sample_kingman(10, &mut RandomSource::new(4, i)).unwrap().root_time())
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.8).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn level_times_are_exponential_per_level() {
        let n = 5;
        let reps = 10_000;
        let trees: Vec<_> = (0..reps)
            .map(|i| sample_kingman(n, &mut RandomSource::new(5, i)).unwrap())
            .collect();
        for (lvl, k) in (2..=n).rev().enumerate() {
            let xs: Vec<f64> = trees.iter().map(|t| t.level_times()[lvl]).collect();
            let rate = (k * (k - 1)) as f64 / 2.0;
            let ks = ks_exponential(&xs, rate);
            assert!(ks.p_value > 0.01, "level {k}: p = {}", ks.p_value);
        }
    }

    #[test]
    fn level_times_sum_to_root_time() {
        let mut r = RandomSource::new(6, 0);
        for _ in 0..100 {
            let t = sample_kingman(7, &mut r).unwrap();
            let s: f64 = t.level_times().iter().sum();
            assert!((s - t.root_time()).abs() <= 1e-12 * t.root_time().max(1.0));
        }
    }

    #[test]
    fn sampled_trees_are_ultrametric() {
        for i in 0..10_000 {
            let t = sample_kingman(6, &mut RandomSource::new(7, i)).unwrap();
            assert!(t.is_ultrametric());
            assert!(t.to_mm_space().distances().is_ultrametric(0.0));
        }
    }

    #[test]
    fn deterministic_given_source() {
        let a = sample_kingman(20, &mut RandomSource::new(8, 2)).unwrap();
        let b = sample_kingman(20, &mut RandomSource::new(8, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_time_lineage_count() {
        let n = 10_000;
        let eps = 0.01;
        let mut acc = 0.0;
        let trees = 20;
        for i in 0..trees {
            let t = sample_kingman(n, &mut RandomSource::new(9, i)).unwrap();
            acc += eps * t.lineage_count_at_depth(eps) as f64;
        }
        let avg = acc / trees as f64;
        assert!((avg - 2.0).abs() < 0.4, "eps * N = {avg}");
    }
}
