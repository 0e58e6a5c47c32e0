//! Adjusted p-values for the all-pairs comparison: the Holm step-down
//! procedure and the Bergmann-Hommel procedure based on exhaustive sets
//! of simultaneously-true equality hypotheses.

use super::McompError;

/// Holm step-down adjusted p-values: sort ascending, multiply the i-th
/// smallest by `m − i`, take running maxima, clip to 1.
pub fn holm(raw: &[f64]) -> Vec<f64> {
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
    let mut adjusted = vec![0.0f64; m];
    let mut running = 0.0f64;
    for (i, &idx) in order.iter().enumerate() {
        running = running.max(((m - i) as f64) * raw[idx]).min(1.0);
        adjusted[idx] = running;
    }
    adjusted
}

/// Index of hypothesis (a, b), a < b, in lexicographic pair order.
pub(crate) fn pair_index(a: usize, b: usize, k: usize) -> usize {
    debug_assert!(a < b && b < k);
    a * k - a * (a + 1) / 2 + (b - a - 1)
}

/// Bergmann-Hommel adjusted p-values for the `m = k(k−1)/2` pairwise
/// equality hypotheses, in lexicographic pair order.
///
/// A set of hypotheses is *exhaustive* when some partition of the
/// algorithms into groups makes exactly those pairs equal; the adjusted
/// p-value of hypothesis j is `max { |I| · min_{i∈I} p_i : I exhaustive,
/// j ∈ I }`, clipped to 1. Every partition of the algorithm set is
/// enumerated recursively, which is why k is capped at 9.
pub fn bergmann_hommel(raw: &[f64], k: usize) -> Result<Vec<f64>, McompError> {
    if k > 9 {
        return Err(McompError::TooManyAlgorithms(k));
    }
    let m = k * (k - 1) / 2;
    if raw.len() != m {
        return Err(McompError::WrongPairCount { expected: m, k, got: raw.len() });
    }
    if raw.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(McompError::BadPValue);
    }

    let mut adjusted = raw.to_vec(); // singleton sets give |I| = 1
    let mut groups: Vec<Vec<usize>> = Vec::new();
    visit_partitions(0, k, &mut groups, &mut |partition| {
        let mut hypotheses: Vec<usize> = Vec::new();
        for group in partition {
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    let (a, b) = (group[i].min(group[j]), group[i].max(group[j]));
                    hypotheses.push(pair_index(a, b, k));
                }
            }
        }
        if hypotheses.is_empty() {
            return;
        }
        let size = hypotheses.len() as f64;
        let min_p = hypotheses.iter().map(|&h| raw[h]).fold(f64::INFINITY, f64::min);
        let value = (size * min_p).min(1.0);
        for &h in &hypotheses {
            if value > adjusted[h] {
                adjusted[h] = value;
            }
        }
    });
    Ok(adjusted)
}

/// Recursively builds every partition of `{0, …, k−1}` by assigning each
/// element to an existing group or opening a new one.
fn visit_partitions(
    element: usize,
    k: usize,
    groups: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    if element == k {
        visit(groups);
        return;
    }
    for g in 0..groups.len() {
        groups[g].push(element);
        visit_partitions(element + 1, k, groups, visit);
        groups[g].pop();
    }
    groups.push(vec![element]);
    visit_partitions(element + 1, k, groups, visit);
    groups.pop();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holm_single_hypothesis_is_identity() {
        assert_eq!(holm(&[0.03]), vec![0.03]);
    }

    #[test]
    fn holm_hand_step_down() {
        // (3·0.01, 2·0.02, 1·0.03) with running maxima → (0.03, 0.04, 0.04)
        let adjusted = holm(&[0.01, 0.02, 0.03]);
        assert!((adjusted[0] - 0.03).abs() < 1e-15);
        assert!((adjusted[1] - 0.04).abs() < 1e-15);
        assert!((adjusted[2] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn holm_clips_to_one() {
        assert_eq!(holm(&[1.0, 1.0]), vec![1.0, 1.0]);
        let adjusted = holm(&[0.9, 0.8]);
        assert!(adjusted.iter().all(|&p| p <= 1.0));
    }

    #[test]
    fn pair_indexing_is_lexicographic() {
        let k = 4;
        let expected = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for (idx, &(a, b)) in expected.iter().enumerate() {
            assert_eq!(pair_index(a, b, k), idx);
        }
    }

    #[test]
    fn bh_k2_single_hypothesis_is_raw() {
        let adjusted = bergmann_hommel(&[0.2], 2).unwrap();
        assert_eq!(adjusted, vec![0.2]);
    }

    #[test]
    fn bh_all_zero_stays_zero() {
        let adjusted = bergmann_hommel(&[0.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(adjusted, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn bh_k3_hand_case() {
        // Raw (H01, H02, H12) = (0.01, 0.04, 0.30). Exhaustive sets:
        // singletons and the full triple (two pairs imply the third).
        let adjusted = bergmann_hommel(&[0.01, 0.04, 0.30], 3).unwrap();
        assert!((adjusted[0] - 0.03).abs() < 1e-15);
        assert!((adjusted[1] - 0.04).abs() < 1e-15);
        assert!((adjusted[2] - 0.30).abs() < 1e-15);
    }

    /// Brute-force oracle enumerating partitions as canonical labelings
    /// (k^k assignments, deduplicated), then taking the same
    /// max-over-sets minima.
    fn bh_oracle(raw: &[f64], k: usize) -> Vec<f64> {
        use std::collections::BTreeSet;
        let mut pair_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
        let total = (k as u64).pow(k as u32);
        for code in 0..total {
            let mut labels = vec![0usize; k];
            let mut c = code;
            for slot in labels.iter_mut() {
                *slot = (c % k as u64) as usize;
                c /= k as u64;
            }
            let mut pairs: Vec<usize> = Vec::new();
            for a in 0..k {
                for b in a + 1..k {
                    if labels[a] == labels[b] {
                        pairs.push(pair_index(a, b, k));
                    }
                }
            }
            pairs.sort_unstable();
            pair_sets.insert(pairs);
        }
        let mut adjusted = raw.to_vec();
        for set in pair_sets {
            if set.is_empty() {
                continue;
            }
            let min_p = set.iter().map(|&h| raw[h]).fold(f64::INFINITY, f64::min);
            let value = (set.len() as f64 * min_p).min(1.0);
            for h in set {
                adjusted[h] = adjusted[h].max(value);
            }
        }
        adjusted
    }

    #[test]
    fn bh_matches_labeling_oracle_small_k() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for k in [3usize, 4, 5] {
            let m = k * (k - 1) / 2;
            for _ in 0..20 {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let got = bergmann_hommel(&raw, k).unwrap();
                let want = bh_oracle(&raw, k);
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-14, "{got:?} vs {want:?}");
                }
            }
        }
    }

    #[test]
    fn bh_dominates_holm_on_random_vectors() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in 3..=7usize {
            let m = k * (k - 1) / 2;
            for _ in 0..25 {
                // Mix small and large p-values to exercise rejections.
                let raw: Vec<f64> = (0..m)
                    .map(|_| {
                        let u: f64 = rng.random();
                        if rng.random::<f64>() < 0.5 { u * 0.05 } else { u }
                    })
                    .collect();
                let bh = bergmann_hommel(&raw, k).unwrap();
                let h = holm(&raw);
                for i in 0..m {
                    assert!(bh[i] >= raw[i] - 1e-15);
                    assert!(bh[i] <= 1.0);
                    assert!(
                        bh[i] <= h[i] + 1e-12,
                        "k={k}: BH {} exceeds Holm {} at {i}",
                        bh[i],
                        h[i]
                    );
                }
            }
        }
    }

    #[test]
    fn bh_rejects_k_over_nine() {
        let m = 10 * 9 / 2;
        assert!(matches!(
            bergmann_hommel(&vec![0.5; m], 10),
            Err(McompError::TooManyAlgorithms(10))
        ));
    }
}
