//! Random forest: bootstrap-sampled regression trees with per-split
//! feature subsampling, averaged for prediction. Out-of-bag predictions
//! are kept alongside the trees.

use super::tree::{grow_tree, GrowConfig, Tree};
use super::{derive_seed, FittedModel, ModelError, ModelParams, TrainingMeta};
use crate::dataset::FeatureMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ForestOptions {
    pub n_trees: usize,
    /// Features tried per split; defaults to ⌈p/3⌉.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Disable to grow every tree on the full sample (useful for the
    /// single-tree reduction check).
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Fits a forest; each tree draws its own generator seeded from the run
/// seed and the tree index, so results do not depend on evaluation order.
pub fn fit_forest(
    x: &FeatureMatrix,
    y: &[f64],
    opts: &ForestOptions,
) -> Result<FittedModel, ModelError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if opts.n_trees == 0 {
        return Err(ModelError::BadHyper("n_trees must be >= 1".into()));
    }
    let mtry = opts.mtry.unwrap_or_else(|| p.div_ceil(3).max(1));
    if mtry == 0 || mtry > p {
        return Err(ModelError::BadHyper(format!("mtry must be in [1, {p}], got {mtry}")));
    }
    if opts.min_leaf == 0 || n < 2 * opts.min_leaf {
        return Err(ModelError::TooFewRows { n, need: 2 * opts.min_leaf.max(1) });
    }

    let cfg = GrowConfig {
        max_depth: opts.max_depth,
        min_leaf: opts.min_leaf,
        mtry: Some(mtry),
    };
    let mut trees = Vec::with_capacity(opts.n_trees);
    let mut oob_sum = vec![0.0f64; n];
    let mut oob_count = vec![0usize; n];
    let all_rows: Vec<usize> = (0..n).collect();

    for t in 0..opts.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, t as u64));
        let rows: Vec<usize> = if opts.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            all_rows.clone()
        };
        let tree = grow_tree(x, y, &rows, &cfg, Some(&mut rng));
        if opts.bootstrap {
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            for (i, bagged) in in_bag.iter().enumerate() {
                if !bagged {
                    oob_sum[i] += tree.predict_row(x.row_slice(i));
                    oob_count[i] += 1;
                }
            }
        }
        trees.push(tree);
    }

    let oob: Vec<Option<f64>> = oob_sum
        .iter()
        .zip(&oob_count)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    let oob_mse = {
        let pairs: Vec<(f64, f64)> = oob
            .iter()
            .zip(y)
            .filter_map(|(o, &yi)| o.map(|p| (p, yi)))
            .collect();
        if pairs.is_empty() {
            f64::NAN
        } else {
            pairs.iter().map(|(p, yi)| (p - yi).powi(2)).sum::<f64>() / pairs.len() as f64
        }
    };

    Ok(FittedModel {
        params: ModelParams::Forest { trees, oob },
        feature_names: x.names().to_vec(),
        seed: Some(opts.seed),
        meta: TrainingMeta {
            iterations: opts.n_trees,
            converged: true,
            final_loss: oob_mse,
            loss_history: vec![],
            warnings: vec![],
        },
    })
}

/// Forest prediction is the arithmetic mean over member trees.
pub(crate) fn predict_forest(trees: &[Tree], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_cart;

    fn smooth_data(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 * 6.0 - 3.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| x.sin() * 2.0 + 0.5 * x).collect();
        (FeatureMatrix::from_columns(vec!["x".into()], vec![xs]), y)
    }

    #[test]
    fn single_tree_no_bootstrap_equals_cart() {
        let (x, y) = smooth_data(80);
        let forest = fit_forest(
            &x,
            &y,
            &ForestOptions {
                n_trees: 1,
                mtry: Some(1),
                min_leaf: 3,
                max_depth: Some(6),
                bootstrap: false,
                seed: 9,
            },
        )
        .unwrap();
        let cart = fit_cart(&x, &y, 6, 3).unwrap();
        let pf = forest.predict(&x).unwrap();
        let pc = cart.predict(&x).unwrap();
        assert_eq!(pf, pc);
    }

    #[test]
    fn same_seed_identical_forests() {
        let (x, y) = smooth_data(60);
        let opts = ForestOptions { n_trees: 12, seed: 33, min_leaf: 2, ..Default::default() };
        let a = fit_forest(&x, &y, &opts).unwrap();
        let b = fit_forest(&x, &y, &opts).unwrap();
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
        let ModelParams::Forest { trees: ta, .. } = &a.params else { panic!() };
        let ModelParams::Forest { trees: tb, .. } = &b.params else { panic!() };
        assert_eq!(ta, tb);
    }

    #[test]
    fn prediction_is_mean_of_member_trees() {
        let (x, y) = smooth_data(50);
        let opts = ForestOptions { n_trees: 7, seed: 5, min_leaf: 2, ..Default::default() };
        let model = fit_forest(&x, &y, &opts).unwrap();
        let ModelParams::Forest { trees, .. } = &model.params else { panic!() };
        let row = x.row_slice(10);
        let mean: f64 = trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / 7.0;
        assert_eq!(model.predict(&x).unwrap()[10], mean);
    }

    #[test]
    fn oob_predictions_present_with_bootstrap() {
        let (x, y) = smooth_data(100);
        let opts = ForestOptions { n_trees: 40, seed: 1, min_leaf: 2, ..Default::default() };
        let model = fit_forest(&x, &y, &opts).unwrap();
        let ModelParams::Forest { oob, .. } = &model.params else { panic!() };
        let covered = oob.iter().filter(|o| o.is_some()).count();
        // With 40 bootstrap rounds essentially every row is OOB somewhere.
        assert!(covered > 95, "only {covered} rows have OOB predictions");
        assert!(model.meta.final_loss.is_finite());
    }
}
