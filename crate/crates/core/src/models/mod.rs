//! Seven regressor families behind one fit/predict contract.
//!
//! [`RegressorSpec`] describes a family plus hyperparameters (seed
//! mandatory for the stochastic ones); [`fit`] produces a [`FittedModel`]
//! whose predictions are expected trip counts. Fitting is a pure function
//! of `(X, y, spec)` — rerunning with the same inputs gives an identical
//! model. Models serialize to self-describing JSON.
//!
//! Default hyperparameters (overridable everywhere): forest 500 trees,
//! `mtry = ⌈p/3⌉`, `min_leaf` 5; boosting 300 rounds, rate 0.1, depth 4,
//! `min_leaf` 10; CART depth 8, `min_leaf` 10; MLP one hidden layer of
//! 32. These are this toolkit's defaults, not values taken from any
//! benchmark.

mod boost;
mod count;
mod linear;
mod mlp;
mod optim;
mod tree;

pub use boost::{fit_boost, BoostOptions};
pub use count::{fit_hurdle, fit_nb, fit_zinb};
pub use forest::{fit_forest, ForestOptions};
pub use linear::fit_ols;
pub use mlp::{fit_mlp, Layer, MlpOptions, MlpParams};
pub use tree::{Node, Tree};

mod forest;

use crate::dataset::FeatureMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature names do not match the fit-time list: expected {expected:?}, got {got:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("singular fit: {detail}")]
    Singular { detail: String },
    #[error("too few rows: have {n}, need at least {need}")]
    TooFewRows { n: usize, need: usize },
    #[error("target at row {row} is not a non-negative integer: {value}")]
    NonIntegerTarget { row: usize, value: f64 },
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("bad hyperparameter: {0}")]
    BadHyper(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("external predictions missing row id {0}")]
    MissingRowId(usize),
    #[error("external predictions contain duplicate row id {0}")]
    DuplicateRowId(usize),
}

fn default_count_max_iter() -> usize {
    200
}
fn default_count_tol() -> f64 {
    1e-8
}
fn default_cart_depth() -> usize {
    8
}
fn default_cart_leaf() -> usize {
    10
}
fn default_forest_trees() -> usize {
    500
}
fn default_forest_leaf() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_boost_rounds() -> usize {
    300
}
fn default_boost_rate() -> f64 {
    0.1
}
fn default_boost_depth() -> usize {
    4
}
fn default_boost_leaf() -> usize {
    10
}
fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_epochs() -> usize {
    200
}
fn default_step() -> f64 {
    0.01
}
fn default_batch() -> usize {
    32
}

/// Family plus hyperparameters. The stochastic families (forest, boost,
/// mlp) require an explicit seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressorSpec {
    Ols,
    Zinb {
        #[serde(default = "default_count_max_iter")]
        max_iter: usize,
        #[serde(default = "default_count_tol")]
        tol: f64,
    },
    Hurdle {
        #[serde(default = "default_count_max_iter")]
        max_iter: usize,
        #[serde(default = "default_count_tol")]
        tol: f64,
    },
    Cart {
        #[serde(default = "default_cart_depth")]
        max_depth: usize,
        #[serde(default = "default_cart_leaf")]
        min_leaf: usize,
    },
    Forest {
        #[serde(default = "default_forest_trees")]
        n_trees: usize,
        #[serde(default)]
        mtry: Option<usize>,
        #[serde(default = "default_forest_leaf")]
        min_leaf: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "default_true")]
        bootstrap: bool,
        seed: u64,
    },
    Boost {
        #[serde(default = "default_boost_rounds")]
        n_rounds: usize,
        #[serde(default = "default_boost_rate")]
        learning_rate: f64,
        #[serde(default = "default_boost_depth")]
        max_depth: usize,
        #[serde(default = "default_boost_leaf")]
        min_leaf: usize,
        seed: u64,
    },
    Mlp {
        #[serde(default = "default_hidden")]
        hidden_sizes: Vec<usize>,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_step")]
        step_size: f64,
        #[serde(default = "default_batch")]
        batch: usize,
        seed: u64,
    },
}

impl RegressorSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            RegressorSpec::Ols => "ols",
            RegressorSpec::Zinb { .. } => "zinb",
            RegressorSpec::Hurdle { .. } => "hurdle",
            RegressorSpec::Cart { .. } => "cart",
            RegressorSpec::Forest { .. } => "forest",
            RegressorSpec::Boost { .. } => "boost",
            RegressorSpec::Mlp { .. } => "mlp",
        }
    }
}

/// Learned parameters, tagged by family for self-describing JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    /// `coefficients[0]` is the intercept.
    Ols { coefficients: Vec<f64> },
    Zinb { zero_coefs: Vec<f64>, count_coefs: Vec<f64>, theta: f64 },
    Hurdle { logit_coefs: Vec<f64>, count_coefs: Vec<f64>, theta: f64 },
    Cart { tree: Tree },
    Forest {
        trees: Vec<Tree>,
        /// Out-of-bag prediction per training row (`None` when a row was
        /// in every bootstrap sample).
        oob: Vec<Option<f64>>,
    },
    Boost { base: f64, learning_rate: f64, trees: Vec<Tree> },
    Mlp(MlpParams),
}

impl ModelParams {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelParams::Ols { .. } => "ols",
            ModelParams::Zinb { .. } => "zinb",
            ModelParams::Hurdle { .. } => "hurdle",
            ModelParams::Cart { .. } => "cart",
            ModelParams::Forest { .. } => "forest",
            ModelParams::Boost { .. } => "boost",
            ModelParams::Mlp(_) => "mlp",
        }
    }
}

/// Fit diagnostics. `loss_history` is family-specific: negative
/// log-likelihood per EM iteration for ZINB, training RMSE per round for
/// boosting, per-epoch MSE for the MLP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A fitted regressor: parameters, the feature names captured at fit time
/// (predict refuses matrices with different columns), and training
/// metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub seed: Option<u64>,
    pub meta: TrainingMeta,
}

impl FittedModel {
    pub fn family_name(&self) -> &'static str {
        self.params.family_name()
    }

    /// Expected-count prediction for every row. Deterministic; errors on
    /// a feature-name mismatch or a non-finite result.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(ModelError::FeatureMismatch {
                expected: self.feature_names.clone(),
                got: x.names().to_vec(),
            });
        }
        let mut out = Vec::with_capacity(x.n_rows());
        for i in 0..x.n_rows() {
            let row = x.row_slice(i);
            let v = match &self.params {
                ModelParams::Ols { coefficients } => linear::predict_linear(coefficients, row),
                ModelParams::Zinb { zero_coefs, count_coefs, .. } => {
                    count::predict_zinb(zero_coefs, count_coefs, row)
                }
                ModelParams::Hurdle { logit_coefs, count_coefs, theta } => {
                    count::predict_hurdle(logit_coefs, count_coefs, *theta, row)
                }
                ModelParams::Cart { tree } => tree.predict_row(row),
                ModelParams::Forest { trees, .. } => forest::predict_forest(trees, row),
                ModelParams::Boost { base, learning_rate, trees } => {
                    boost::predict_boost(*base, *learning_rate, trees, row)
                }
                ModelParams::Mlp(params) => mlp::predict_mlp(params, row),
            };
            if !v.is_finite() {
                return Err(ModelError::NumericFailure(format!(
                    "non-finite prediction at row {i}"
                )));
            }
            out.push(v);
        }
        Ok(out)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Anything that can predict on a feature matrix: fitted models, or ad
/// hoc callables wrapped in [`FnPredictor`] (useful to explain an
/// arbitrary black box).
pub trait Predictor {
    fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError>;
}

impl Predictor for FittedModel {
    fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.predict(x)
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F: Fn(&FeatureMatrix) -> Vec<f64>>(pub F);

impl<F: Fn(&FeatureMatrix) -> Vec<f64>> Predictor for FnPredictor<F> {
    fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        Ok((self.0)(x))
    }
}

/// Fits `spec` on `(x, y)`; pure given the spec's seed.
pub fn fit(spec: &RegressorSpec, x: &FeatureMatrix, y: &[f64]) -> Result<FittedModel, ModelError> {
    match spec {
        RegressorSpec::Ols => fit_ols(x, y),
        RegressorSpec::Zinb { max_iter, tol } => fit_zinb(x, y, *max_iter, *tol),
        RegressorSpec::Hurdle { max_iter, tol } => fit_hurdle(x, y, *max_iter, *tol),
        RegressorSpec::Cart { max_depth, min_leaf } => fit_cart(x, y, *max_depth, *min_leaf),
        RegressorSpec::Forest { n_trees, mtry, min_leaf, max_depth, bootstrap, seed } => fit_forest(
            x,
            y,
            &ForestOptions {
                n_trees: *n_trees,
                mtry: *mtry,
                min_leaf: *min_leaf,
                max_depth: *max_depth,
                bootstrap: *bootstrap,
                seed: *seed,
            },
        ),
        RegressorSpec::Boost { n_rounds, learning_rate, max_depth, min_leaf, seed } => fit_boost(
            x,
            y,
            &BoostOptions {
                n_rounds: *n_rounds,
                learning_rate: *learning_rate,
                max_depth: *max_depth,
                min_leaf: *min_leaf,
                seed: *seed,
            },
        ),
        RegressorSpec::Mlp { hidden_sizes, epochs, step_size, batch, seed } => fit_mlp(
            x,
            y,
            &MlpOptions {
                hidden_sizes: hidden_sizes.clone(),
                epochs: *epochs,
                step_size: *step_size,
                batch: *batch,
                seed: *seed,
            },
        ),
    }
}

/// Greedy variance-minimizing regression tree.
pub fn fit_cart(
    x: &FeatureMatrix,
    y: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Result<FittedModel, ModelError> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if min_leaf == 0 || n < 2 * min_leaf {
        return Err(ModelError::TooFewRows { n, need: 2 * min_leaf.max(1) });
    }
    let rows: Vec<usize> = (0..n).collect();
    let cfg = tree::GrowConfig { max_depth: Some(max_depth), min_leaf, mtry: None };
    let t = tree::grow_tree(x, y, &rows, &cfg, None);
    let mse = (0..n)
        .map(|i| (t.predict_row(x.row_slice(i)) - y[i]).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(FittedModel {
        params: ModelParams::Cart { tree: t },
        feature_names: x.names().to_vec(),
        seed: None,
        meta: TrainingMeta {
            iterations: 1,
            converged: true,
            final_loss: mse,
            loss_history: vec![],
            warnings: vec![],
        },
    })
}

/// Reads externally produced predictions (`row_id,yhat` CSV) and aligns
/// them to `required` row order. The file must cover every required id;
/// duplicates and gaps are errors that name the offending id.
pub fn load_external_predictions(
    path: &Path,
    required: &[usize],
) -> Result<Vec<f64>, ModelError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut by_id: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for record in reader.records() {
        let record = record?;
        let id: usize = record
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| ModelError::ShapeMismatch("unparseable row_id".into()))?;
        let yhat: f64 = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| ModelError::ShapeMismatch(format!("unparseable yhat for row {id}")))?;
        if !yhat.is_finite() {
            return Err(ModelError::NumericFailure(format!("non-finite yhat for row {id}")));
        }
        if by_id.insert(id, yhat).is_some() {
            return Err(ModelError::DuplicateRowId(id));
        }
    }
    required
        .iter()
        .map(|&id| by_id.get(&id).copied().ok_or(ModelError::MissingRowId(id)))
        .collect()
}

/// Splitmix-style derivation of per-stream seeds from a base seed; used
/// so per-tree generators are independent of evaluation order.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
