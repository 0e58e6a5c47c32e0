//! Partial dependence and individual conditional expectation curves: the
//! response of predictions as one feature sweeps a grid with everything
//! else held fixed — averaged over rows for PDP, per row for ICE. The
//! mean ICE curve over the same rows reproduces the PDP bit for bit.

use super::{apply_grid_value, find_group, GridSpec, InterpretError};
use crate::dataset::FeatureMatrix;
use crate::models::Predictor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdpCurve {
    pub grid: GridSpec,
    pub mean_prediction: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IceBundle {
    pub grid: GridSpec,
    pub row_ids: Vec<usize>,
    /// One curve per sampled row, over the grid.
    pub curves: Vec<Vec<f64>>,
    /// Pointwise mean of `curves`, equal to the PDP over the same rows.
    pub mean_curve: Vec<f64>,
}

/// Which rows ICE sweeps.
#[derive(Clone, Debug)]
pub enum SampleSpec {
    All,
    Ids(Vec<usize>),
    Count { n: usize, seed: u64 },
}

/// Predictions per grid value over every row of `x` (rows in row order).
fn grid_predictions<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    grid: &GridSpec,
) -> Result<Vec<Vec<f64>>, InterpretError> {
    let group = find_group(x, &grid.feature)?.clone();
    let mut per_value = Vec::with_capacity(grid.values.len());
    for gi in 0..grid.values.len() {
        let mut modified = x.clone();
        apply_grid_value(&mut modified, &group, &grid.values, gi)?;
        per_value.push(model.predict_matrix(&modified)?);
    }
    Ok(per_value)
}

fn mean_in_row_order(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Partial dependence: for each grid value, overwrite the feature on all
/// rows, predict, and average.
pub fn pdp<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    grid: &GridSpec,
) -> Result<PdpCurve, InterpretError> {
    if x.n_rows() == 0 {
        return Err(InterpretError::EmptySample);
    }
    let per_value = grid_predictions(model, x, grid)?;
    let mean_prediction = per_value.iter().map(|preds| mean_in_row_order(preds)).collect();
    Ok(PdpCurve { grid: grid.clone(), mean_prediction })
}

/// ICE curves for the sampled rows, plus their mean curve.
pub fn ice<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    grid: &GridSpec,
    sample: &SampleSpec,
) -> Result<IceBundle, InterpretError> {
    let row_ids: Vec<usize> = match sample {
        SampleSpec::All => (0..x.n_rows()).collect(),
        SampleSpec::Ids(ids) => {
            if let Some(&bad) = ids.iter().find(|&&i| i >= x.n_rows()) {
                return Err(InterpretError::BadRequest(format!("row id {bad} out of range")));
            }
            ids.clone()
        }
        SampleSpec::Count { n, seed } => {
            let mut all: Vec<usize> = (0..x.n_rows()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            all.shuffle(&mut rng);
            let mut picked: Vec<usize> = all.into_iter().take(*n).collect();
            picked.sort_unstable();
            picked
        }
    };
    if row_ids.is_empty() {
        return Err(InterpretError::EmptySample);
    }
    let sub = x.take_rows(&row_ids);
    let per_value = grid_predictions(model, &sub, grid)?;
    let mean_curve: Vec<f64> = per_value.iter().map(|preds| mean_in_row_order(preds)).collect();
    let curves: Vec<Vec<f64>> = (0..row_ids.len())
        .map(|r| per_value.iter().map(|preds| preds[r]).collect())
        .collect();
    Ok(IceBundle { grid: grid.clone(), row_ids, curves, mean_curve })
}
