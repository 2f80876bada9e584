//! Negative sampling for training batches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::interactions::InteractionSet;

/// For every train positive (u, i), draws `ratio` items uniformly from
/// the items the user never interacted with in the full observed set.
/// Called once per epoch with a fresh epoch-derived generator.
pub fn sample_train_negatives(
    train: &InteractionSet,
    observed: &InteractionSet,
    ratio: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, u32)> {
    let n = observed.num_items() as u32;
    let mut negatives = Vec::with_capacity(train.num_feedback() * ratio);
    for u in 0..train.num_users() as u32 {
        let blocked = observed.items_of(u);
        if blocked.len() >= n as usize {
            log::warn!("user {u} interacted with every item; no negatives sampled");
            continue;
        }
        for _ in 0..train.items_of(u).len() * ratio {
            loop {
                let i = rng.random_range(0..n);
                if blocked.binary_search(&i).is_err() {
                    negatives.push((u, i));
                    break;
                }
            }
        }
    }
    negatives
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Stream};

    fn observed() -> InteractionSet {
        InteractionSet::from_lists(vec![vec![0, 1, 2, 3], vec![5, 6]], 10).unwrap()
    }

    #[test]
    fn epoch_count_law() {
        let full = observed();
        // Train = full here; ratio 1 gives exactly one negative per positive.
        let mut rng = derive_rng(0, Stream::NegSampling, 0);
        let negs = sample_train_negatives(&full, &full, 1, &mut rng);
        assert_eq!(negs.len(), full.num_feedback());
        let mut rng = derive_rng(0, Stream::NegSampling, 0);
        let negs3 = sample_train_negatives(&full, &full, 3, &mut rng);
        assert_eq!(negs3.len(), 3 * full.num_feedback());
    }

    #[test]
    fn negatives_never_observed() {
        let full = observed();
        for epoch in 0..20 {
            let mut rng = derive_rng(1, Stream::NegSampling, epoch);
            for (u, i) in sample_train_negatives(&full, &full, 2, &mut rng) {
                assert!(!full.contains(u, i), "({u},{i}) is observed");
            }
        }
    }

    #[test]
    fn fully_interacted_user_is_skipped() {
        let full = InteractionSet::from_lists(vec![vec![0, 1], vec![0]], 2).unwrap();
        let mut rng = derive_rng(2, Stream::NegSampling, 0);
        let negs = sample_train_negatives(&full, &full, 1, &mut rng);
        // user 0 owns every item; only user 1 contributes.
        assert_eq!(negs.len(), 1);
        assert_eq!(negs[0], (1, 1));
    }

    #[test]
    fn sampling_is_uniform_over_complement() {
        // One user observing item 0 of 50; counts over 1e5 draws must sit
        // within 3 sigma of the multinomial expectation for every item.
        let full = InteractionSet::from_lists(vec![vec![0]], 50).unwrap();
        let mut counts = vec![0u32; 50];
        let mut rng = derive_rng(7, Stream::NegSampling, 0);
        let draws = 100_000;
        for _ in 0..draws {
            let negs = sample_train_negatives(&full, &full, 1, &mut rng);
            counts[negs[0].1 as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        let p = 1.0 / 49.0;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate().skip(1) {
            assert!(
                (c as f64 - expect).abs() <= 3.0 * sigma,
                "item {i}: count {c} vs expected {expect:.1} ± {:.1}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn resampling_is_a_pure_function_of_seed_and_epoch() {
        let full = observed();
        let a = sample_train_negatives(&full, &full, 1, &mut derive_rng(3, Stream::NegSampling, 5));
        let b = sample_train_negatives(&full, &full, 1, &mut derive_rng(3, Stream::NegSampling, 5));
        let c = sample_train_negatives(&full, &full, 1, &mut derive_rng(3, Stream::NegSampling, 6));
        assert_eq!(a, b);
        assert_ne!(a, c, "different epochs draw different negatives");
    }
}
