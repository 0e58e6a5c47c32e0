//! Permutation feature importance: shuffle one feature, re-score, and
//! record how much the performance drops.

use super::InterpretError;
use crate::dataset::FeatureMatrix;
use crate::metrics::{score, MetricKind};
use crate::models::Predictor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Mean performance drop after permutation, oriented so larger means
    /// more important regardless of the metric's direction.
    pub mean_drop: f64,
    pub std_dev: f64,
    /// 1 = most important.
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric: String,
    pub baseline: f64,
    pub repeats: usize,
    pub entries: Vec<ImportanceEntry>,
}

/// Permutation importance of every feature group.
///
/// The baseline score is computed once; each (feature, repeat) pair draws
/// a fresh permutation and shuffles the whole group block with it. The
/// drop is `permuted − baseline` for lower-better metrics and
/// `baseline − permuted` for higher-better ones.
pub fn permutation_importance<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    y: &[f64],
    metric: MetricKind,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, InterpretError> {
    if repeats == 0 {
        return Err(InterpretError::BadRequest("repeats must be >= 1".into()));
    }
    let baseline_preds = model.predict_matrix(x)?;
    let baseline = score(y, &baseline_preds, None)?.get(metric);
    let sign = if metric.higher_is_better() { -1.0 } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.n_rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut stats: Vec<(f64, f64)> = Vec::with_capacity(x.groups().len());
    for group in x.groups() {
        let mut drops = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            perm.shuffle(&mut rng);
            let mut shuffled = x.clone();
            shuffled.permute_group_rows(group, &perm);
            let preds = model.predict_matrix(&shuffled)?;
            let permuted = score(y, &preds, None)?.get(metric);
            drops.push(sign * (permuted - baseline));
        }
        let mean = drops.iter().sum::<f64>() / repeats as f64;
        let std_dev = if repeats > 1 {
            (drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
        } else {
            0.0
        };
        stats.push((mean, std_dev));
    }

    // Rank 1 = largest mean drop; ties resolved by feature order.
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].0.partial_cmp(&stats[a].0).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0usize; stats.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }

    let entries = x
        .groups()
        .iter()
        .zip(stats)
        .zip(ranks)
        .map(|((group, (mean_drop, std_dev)), rank)| ImportanceEntry {
            feature: group.name.clone(),
            mean_drop,
            std_dev,
            rank,
        })
        .collect();
    Ok(ImportanceReport { metric: metric.name().into(), baseline, repeats, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_ols;

    fn two_feature_data() -> (FeatureMatrix, Vec<f64>) {
        // y depends only on the first feature.
        let a: Vec<f64> = (0..120).map(|i| (i % 17) as f64).collect();
        let b: Vec<f64> = (0..120).map(|i| ((i * 7) % 13) as f64).collect();
        let y: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        (FeatureMatrix::from_columns(vec!["a".into(), "b".into()], vec![a, b]), y)
    }

    #[test]
    fn informative_feature_dominates_and_dummy_is_noise() {
        let (x, y) = two_feature_data();
        let model = fit_ols(&x, &y).unwrap();
        let report =
            permutation_importance(&model, &x, &y, MetricKind::Rmse, 10, 99).unwrap();
        let a = &report.entries[0];
        let b = &report.entries[1];
        assert_eq!(a.rank, 1);
        assert!(a.mean_drop > b.mean_drop);
        // The ignored feature's drop sits inside its own noise band.
        assert!(b.mean_drop.abs() < 2.0 * b.std_dev.max(1e-12), "b drop {}", b.mean_drop);
    }

    #[test]
    fn orientation_flips_for_higher_better_metric() {
        let (x, y) = two_feature_data();
        let model = fit_ols(&x, &y).unwrap();
        let r2 = permutation_importance(&model, &x, &y, MetricKind::R2, 5, 4).unwrap();
        // Importance stays positive for the informative feature.
        assert!(r2.entries[0].mean_drop > 0.0);
        assert_eq!(r2.entries[0].rank, 1);
    }

    #[test]
    fn same_seed_identical_report() {
        let (x, y) = two_feature_data();
        let model = fit_ols(&x, &y).unwrap();
        let a = permutation_importance(&model, &x, &y, MetricKind::Rmse, 7, 5).unwrap();
        let b = permutation_importance(&model, &x, &y, MetricKind::Rmse, 7, 5).unwrap();
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.mean_drop, eb.mean_drop);
            assert_eq!(ea.std_dev, eb.std_dev);
        }
    }

    #[test]
    fn ranks_are_a_permutation() {
        let (x, y) = two_feature_data();
        let model = fit_ols(&x, &y).unwrap();
        let report = permutation_importance(&model, &x, &y, MetricKind::Medae, 3, 0).unwrap();
        let mut ranks: Vec<usize> = report.entries.iter().map(|e| e.rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, vec![1, 2]);
    }
}
