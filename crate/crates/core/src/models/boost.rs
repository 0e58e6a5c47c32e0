//! Stagewise gradient boosting for squared error: each round fits a
//! depth-limited regression tree to the current residuals and adds it
//! with shrinkage. Training RMSE is recorded per round and cannot
//! increase while the learning rate stays in (0, 1].

use super::tree::{grow_tree, GrowConfig, Tree};
use super::{FittedModel, ModelError, ModelParams, TrainingMeta};
use crate::dataset::FeatureMatrix;

pub struct BoostOptions {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for BoostOptions {
    fn default() -> Self {
        BoostOptions { n_rounds: 300, learning_rate: 0.1, max_depth: 4, min_leaf: 10, seed: 0 }
    }
}

pub fn fit_boost(
    x: &FeatureMatrix,
    y: &[f64],
    opts: &BoostOptions,
) -> Result<FittedModel, ModelError> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if opts.n_rounds == 0 {
        return Err(ModelError::BadHyper("n_rounds must be >= 1".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate <= 1.0) {
        return Err(ModelError::BadHyper(format!(
            "learning_rate must be in (0, 1], got {}",
            opts.learning_rate
        )));
    }
    if opts.min_leaf == 0 || n < 2 * opts.min_leaf {
        return Err(ModelError::TooFewRows { n, need: 2 * opts.min_leaf.max(1) });
    }

    let base: f64 = y.iter().sum::<f64>() / n as f64;
    let mut current: Vec<f64> = vec![base; n];
    let mut residuals: Vec<f64> = y.iter().zip(&current).map(|(a, b)| a - b).collect();
    let rows: Vec<usize> = (0..n).collect();
    let cfg = GrowConfig { max_depth: Some(opts.max_depth), min_leaf: opts.min_leaf, mtry: None };
    let mut trees = Vec::with_capacity(opts.n_rounds);
    let mut round_rmse = Vec::with_capacity(opts.n_rounds);

    for _ in 0..opts.n_rounds {
        let tree = grow_tree(x, &residuals, &rows, &cfg, None);
        for i in 0..n {
            current[i] += opts.learning_rate * tree.predict_row(x.row_slice(i));
            residuals[i] = y[i] - current[i];
        }
        let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
        round_rmse.push(mse.sqrt());
        trees.push(tree);
    }

    let final_loss = round_rmse.last().copied().unwrap_or(0.0);
    Ok(FittedModel {
        params: ModelParams::Boost { base, learning_rate: opts.learning_rate, trees },
        feature_names: x.names().to_vec(),
        seed: Some(opts.seed),
        meta: TrainingMeta {
            iterations: opts.n_rounds,
            converged: true,
            final_loss,
            loss_history: round_rmse,
            warnings: vec![],
        },
    })
}

pub(crate) fn predict_boost(base: f64, learning_rate: f64, trees: &[Tree], row: &[f64]) -> f64 {
    base + learning_rate * trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_cart;

    fn line_data(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / 4.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        (FeatureMatrix::from_columns(vec!["x".into()], vec![xs]), y)
    }

    #[test]
    fn one_round_unit_rate_reduces_to_cart_on_centered_target() {
        let (x, y) = line_data(40);
        let opts = BoostOptions {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: 3,
            min_leaf: 2,
            seed: 0,
        };
        let boost = fit_boost(&x, &y, &opts).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let cart = fit_cart(&x, &centered, 3, 2).unwrap();
        let pb = boost.predict(&x).unwrap();
        let pc: Vec<f64> = cart.predict(&x).unwrap().iter().map(|v| v + mean).collect();
        for (a, b) in pb.iter().zip(&pc) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_rmse_non_increasing() {
        let (x, y) = line_data(60);
        let opts = BoostOptions {
            n_rounds: 50,
            learning_rate: 0.3,
            max_depth: 2,
            min_leaf: 2,
            seed: 0,
        };
        let model = fit_boost(&x, &y, &opts).unwrap();
        let h = &model.meta.loss_history;
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "rmse rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn converges_on_linear_data() {
        let (x, y) = line_data(80);
        let opts = BoostOptions {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 2,
            seed: 0,
        };
        let model = fit_boost(&x, &y, &opts).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(
            model.meta.final_loss < 0.1 * sd,
            "training rmse {} vs 0.1 sd {}",
            model.meta.final_loss,
            0.1 * sd
        );
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let (x, y) = line_data(20);
        let opts = BoostOptions { learning_rate: 1.5, ..Default::default() };
        assert!(matches!(fit_boost(&x, &y, &opts), Err(ModelError::BadHyper(_))));
    }
}
