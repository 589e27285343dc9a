//! Item-level B-cubed scores for comparing two partitions of one item set.

use std::collections::HashMap;
use std::hash::Hash;

use super::CogclustError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcubedScores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// B-cubed precision/recall/F of `predicted` against `gold`. Both maps must
/// assign a cluster label to exactly the same items.
pub fn bcubed_f<T, A, B>(
    gold: &HashMap<T, A>,
    predicted: &HashMap<T, B>,
) -> Result<BcubedScores, CogclustError>
where
    T: Eq + Hash,
    A: Eq + Hash,
    B: Eq + Hash,
{
    if gold.len() != predicted.len() || gold.keys().any(|k| !predicted.contains_key(k)) {
        return Err(CogclustError::ItemSetMismatch);
    }
    if gold.is_empty() {
        return Err(CogclustError::ItemSetMismatch);
    }
    let mut gold_size: HashMap<&A, u64> = HashMap::new();
    let mut pred_size: HashMap<&B, u64> = HashMap::new();
    let mut joint_size: HashMap<(&A, &B), u64> = HashMap::new();
    for (item, g) in gold {
        let p = &predicted[item];
        *gold_size.entry(g).or_default() += 1;
        *pred_size.entry(p).or_default() += 1;
        *joint_size.entry((g, p)).or_default() += 1;
    }
    let n = gold.len() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for (item, g) in gold {
        let p = &predicted[item];
        let joint = joint_size[&(g, p)] as f64;
        precision += joint / pred_size[p] as f64;
        recall += joint / gold_size[g] as f64;
    }
    precision /= n;
    recall /= n;
    let f = 2.0 * precision * recall / (precision + recall);
    Ok(BcubedScores { precision, recall, f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn as_map(labels: &[u32]) -> HashMap<usize, u32> {
        labels.iter().copied().enumerate().collect()
    }

    /// Pairwise definition computed item by item, O(n^2).
    fn oracle(gold: &[u32], predicted: &[u32]) -> BcubedScores {
        let n = gold.len();
        let mut precision = 0.0;
        let mut recall = 0.0;
        for i in 0..n {
            let same_pred = (0..n).filter(|&j| predicted[j] == predicted[i]);
            let both: usize = same_pred.clone().filter(|&j| gold[j] == gold[i]).count();
            precision += both as f64 / same_pred.count() as f64;
            let same_gold = (0..n).filter(|&j| gold[j] == gold[i]).count();
            recall += both as f64 / same_gold as f64;
        }
        precision /= n as f64;
        recall /= n as f64;
        BcubedScores { precision, recall, f: 2.0 * precision * recall / (precision + recall) }
    }

    #[test]
    fn identical_partitions_are_perfect() {
        let labels = [0, 0, 1, 2, 2, 2];
        let s = bcubed_f(&as_map(&labels), &as_map(&labels)).unwrap();
        assert_eq!((s.precision, s.recall, s.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn lumped_pair_hand_value() {
        // gold {a,b},{c}; predicted {a,b,c}
        let s = bcubed_f(&as_map(&[0, 0, 1]), &as_map(&[0, 0, 0])).unwrap();
        assert!((s.precision - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
        assert!((s.f - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn singletons_against_one_class() {
        for n in 1..=8u32 {
            let gold = vec![0u32; n as usize];
            let pred: Vec<u32> = (0..n).collect();
            let s = bcubed_f(&as_map(&gold), &as_map(&pred)).unwrap();
            assert_eq!(s.precision, 1.0);
            assert!((s.recall - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn item_sets_must_match() {
        let gold: HashMap<usize, u32> = [(0, 0), (1, 0)].into();
        let predicted: HashMap<usize, u32> = [(0, 0), (2, 0)].into();
        assert!(matches!(
            bcubed_f(&gold, &predicted),
            Err(CogclustError::ItemSetMismatch)
        ));
        let empty: HashMap<usize, u32> = HashMap::new();
        assert!(bcubed_f(&empty, &empty).is_err());
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle(
            gold in proptest::collection::vec(0u32..5, 1..12),
            seed in proptest::collection::vec(0u32..5, 1..12),
        ) {
            let n = gold.len().min(seed.len());
            let (gold, predicted) = (&gold[..n], &seed[..n]);
            let fast = bcubed_f(&as_map(gold), &as_map(predicted)).unwrap();
            let slow = oracle(gold, predicted);
            prop_assert!((fast.precision - slow.precision).abs() < 1e-12);
            prop_assert!((fast.recall - slow.recall).abs() < 1e-12);
            prop_assert!((fast.f - slow.f).abs() < 1e-12);
        }

        /// Splitting predicted clusters cannot lower precision; merging them
        /// cannot lower recall.
        #[test]
        fn refinement_monotonicity(
            gold in proptest::collection::vec(0u32..4, 2..12),
            pred in proptest::collection::vec(0u32..4, 2..12),
            split in proptest::collection::vec(0u32..2, 2..12),
        ) {
            let n = gold.len().min(pred.len()).min(split.len());
            let (gold, pred, split) = (&gold[..n], &pred[..n], &split[..n]);
            // Refinement: tag each item with an extra bit inside its cluster.
            let refined: Vec<u32> = pred.iter().zip(split).map(|(&p, &s)| p * 2 + s).collect();
            let base = bcubed_f(&as_map(gold), &as_map(pred)).unwrap();
            let fine = bcubed_f(&as_map(gold), &as_map(&refined)).unwrap();
            prop_assert!(fine.precision >= base.precision - 1e-12);
            // Coarsening: collapse pairs of cluster ids.
            let coarse: Vec<u32> = pred.iter().map(|&p| p / 2).collect();
            let merged = bcubed_f(&as_map(gold), &as_map(&coarse)).unwrap();
            prop_assert!(merged.recall >= base.recall - 1e-12);
        }
    }
}
