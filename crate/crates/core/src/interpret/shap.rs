//! Shapley-value explanations with an interventional value function: a
//! coalition's value is the mean prediction over background rows whose
//! in-coalition features are replaced by the explained instance's values.
//!
//! The exact method enumerates all 2^p coalitions (p ≤ 15 feature
//! groups) with the factorial Shapley kernel; the sampled method averages
//! marginal contributions over random feature orderings and then spreads
//! the small efficiency residual over the estimates, flagging that it did.

use super::{find_group, InterpretError};
use crate::dataset::FeatureMatrix;
use crate::models::Predictor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Feature-group names, parallel to `phi`.
    pub features: Vec<String>,
    pub phi: Vec<f64>,
    /// Mean prediction over the background rows.
    pub base_value: f64,
    /// Model prediction at the explained instance.
    pub prediction: f64,
    pub method: String,
    pub background_ids: Vec<usize>,
    /// Set by the sampled method after redistributing the efficiency
    /// residual; the exact method satisfies efficiency by construction.
    pub efficiency_adjusted: bool,
}

const MAX_EXACT_GROUPS: usize = 15;

fn validate_background(x: &FeatureMatrix, background: &[usize]) -> Result<(), InterpretError> {
    if background.is_empty() {
        return Err(InterpretError::EmptySample);
    }
    if let Some(&bad) = background.iter().find(|&&i| i >= x.n_rows()) {
        return Err(InterpretError::BadRequest(format!("background row {bad} out of range")));
    }
    Ok(())
}

/// Exact Shapley values by coalition enumeration.
///
/// `φ_i = Σ_{S ⊆ F∖{i}} |S|!(p−|S|−1)!/p! · (v(S∪{i}) − v(S))`, with
/// `v(S)` the interventional value above. `base_value + Σφ` reproduces
/// the prediction to floating precision.
pub fn shap_exact<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    row: usize,
    background: &[usize],
) -> Result<ShapExplanation, InterpretError> {
    validate_background(x, background)?;
    if row >= x.n_rows() {
        return Err(InterpretError::BadRequest(format!("row {row} out of range")));
    }
    let groups = x.groups().to_vec();
    let p = groups.len();
    if p > MAX_EXACT_GROUPS {
        return Err(InterpretError::TooManyFeaturesForExact(p));
    }
    let instance: Vec<f64> = x.row_slice(row).to_vec();
    let back = x.take_rows(background);

    // v(mask) for every coalition mask.
    let n_masks = 1usize << p;
    let mut value = vec![0.0f64; n_masks];
    for (mask, slot) in value.iter_mut().enumerate() {
        let mut composite = back.clone();
        for (gi, group) in groups.iter().enumerate() {
            if mask >> gi & 1 == 1 {
                for r in 0..composite.n_rows() {
                    composite.copy_group_cells(r, group, &instance);
                }
            }
        }
        let preds = model.predict_matrix(&composite)?;
        *slot = preds.iter().sum::<f64>() / preds.len() as f64;
    }

    // Factorial kernel weights by coalition size.
    let mut factorial = vec![1.0f64; p + 1];
    for i in 1..=p {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight = |s: usize| factorial[s] * factorial[p - s - 1] / factorial[p];

    let mut phi = vec![0.0f64; p];
    for (gi, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << gi;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            *phi_i += weight(s) * (value[mask | bit] - value[mask]);
        }
    }

    Ok(ShapExplanation {
        features: groups.iter().map(|g| g.name.clone()).collect(),
        phi,
        base_value: value[0],
        prediction: value[n_masks - 1],
        method: "exact".into(),
        background_ids: background.to_vec(),
        efficiency_adjusted: false,
    })
}

/// Monte Carlo Shapley values over random feature orderings.
///
/// `n_coalitions` is the number of ordering passes (each contributes one
/// marginal per feature) and must be at least `2p`. After averaging, the
/// efficiency residual is distributed proportionally to `|φ_i|` and the
/// explanation is flagged as adjusted.
pub fn shap_sampled<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    row: usize,
    background: &[usize],
    n_coalitions: usize,
    seed: u64,
) -> Result<ShapExplanation, InterpretError> {
    validate_background(x, background)?;
    if row >= x.n_rows() {
        return Err(InterpretError::BadRequest(format!("row {row} out of range")));
    }
    let groups = x.groups().to_vec();
    let p = groups.len();
    if n_coalitions < 2 * p {
        return Err(InterpretError::BadRequest(format!(
            "n_coalitions must be at least 2p = {}, got {n_coalitions}",
            2 * p
        )));
    }
    let instance: Vec<f64> = x.row_slice(row).to_vec();
    let back = x.take_rows(background);
    let base_preds = model.predict_matrix(&back)?;
    let base_value = base_preds.iter().sum::<f64>() / base_preds.len() as f64;
    let single = x.take_rows(&[row]);
    let prediction = model.predict_matrix(&single)?[0];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = vec![0.0f64; p];
    let mut order: Vec<usize> = (0..p).collect();
    for _ in 0..n_coalitions {
        let b = background[rng.random_range(0..background.len())];
        order.shuffle(&mut rng);
        // p+1 composite rows: background row, then cumulative
        // substitution of the instance's groups in `order`.
        let mut composite = FeatureMatrixBatch::new(x, b, p + 1);
        let mut current: Vec<f64> = x.row_slice(b).to_vec();
        composite.set_row(0, &current);
        for (step, &gi) in order.iter().enumerate() {
            for c in groups[gi].columns() {
                current[c] = instance[c];
            }
            composite.set_row(step + 1, &current);
        }
        let preds = model.predict_matrix(&composite.into_matrix())?;
        for (step, &gi) in order.iter().enumerate() {
            totals[gi] += preds[step + 1] - preds[step];
        }
    }
    let mut phi: Vec<f64> = totals.iter().map(|t| t / n_coalitions as f64).collect();

    // Efficiency adjustment: spread the residual over |φ|.
    let residual = (prediction - base_value) - phi.iter().sum::<f64>();
    let abs_sum: f64 = phi.iter().map(|v| v.abs()).sum();
    if abs_sum > 0.0 {
        for v in phi.iter_mut() {
            *v += residual * v.abs() / abs_sum;
        }
    } else {
        for v in phi.iter_mut() {
            *v += residual / p as f64;
        }
    }

    Ok(ShapExplanation {
        features: groups.iter().map(|g| g.name.clone()).collect(),
        phi,
        base_value,
        prediction,
        method: "sampled".into(),
        background_ids: background.to_vec(),
        efficiency_adjusted: true,
    })
}

/// Small helper assembling a batch of rows that all share `x`'s columns.
struct FeatureMatrixBatch {
    names: Vec<String>,
    groups: Vec<crate::dataset::FeatureGroup>,
    data: Vec<f64>,
    n_cols: usize,
    n_rows: usize,
}

impl FeatureMatrixBatch {
    fn new(x: &FeatureMatrix, template_row: usize, n_rows: usize) -> Self {
        let n_cols = x.n_cols();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for _ in 0..n_rows {
            data.extend_from_slice(x.row_slice(template_row));
        }
        FeatureMatrixBatch {
            names: x.names().to_vec(),
            groups: x.groups().to_vec(),
            data,
            n_cols,
            n_rows,
        }
    }

    fn set_row(&mut self, row: usize, values: &[f64]) {
        self.data[row * self.n_cols..(row + 1) * self.n_cols].copy_from_slice(values);
    }

    fn into_matrix(self) -> FeatureMatrix {
        FeatureMatrix::new(self.names, self.data, self.n_rows, self.n_cols, self.groups)
    }
}
