//! LIME local surrogates: perturb the instance, weight the perturbations
//! by proximity, and fit a small weighted linear model on the K most
//! correlated features.
//!
//! Numeric features are perturbed with standard-normal noise scaled by
//! the training standard deviation; binary and categorical features are
//! resampled from their training frequencies, and a one-hot block moves
//! as one unit. The surrogate sees one interpretable column per original
//! feature: the perturbed value for numerics, and a same-category
//! indicator for nominals.

use super::{InterpretError};
use crate::dataset::{FeatureMatrix, GroupKind};
use crate::linalg;
use crate::models::Predictor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimeExplanation {
    /// Feature-group names, parallel to `weights`.
    pub features: Vec<String>,
    pub intercept: f64,
    /// Surrogate weight per feature; zero for features outside the top K.
    pub weights: Vec<f64>,
    pub selected: Vec<String>,
    pub kernel_width: f64,
    /// Weighted R² of the surrogate against the black box on the
    /// perturbation set.
    pub weighted_r2: f64,
    pub num_samples: usize,
    pub seed: u64,
}

pub struct LimeOptions {
    pub num_samples: usize,
    /// Features kept in the surrogate (the complexity budget).
    pub k_features: usize,
    /// Proximity kernel width on standardized distance; default
    /// `0.75·sqrt(p)`.
    pub kernel_width: Option<f64>,
    pub seed: u64,
}

/// Explains `model`'s prediction at `x[row]` with a locally weighted
/// linear surrogate trained on `num_samples` perturbations (the first
/// perturbation is the instance itself).
pub fn lime_explain<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    row: usize,
    opts: &LimeOptions,
) -> Result<LimeExplanation, InterpretError> {
    if row >= x.n_rows() {
        return Err(InterpretError::BadRequest(format!("row {row} out of range")));
    }
    let groups = x.groups().to_vec();
    let p = groups.len();
    if opts.k_features == 0 || opts.k_features > p {
        return Err(InterpretError::BadRequest(format!(
            "k_features must be in [1, {p}], got {}",
            opts.k_features
        )));
    }
    if opts.num_samples < 10 * opts.k_features {
        return Err(InterpretError::BadRequest(format!(
            "num_samples must be at least 10·K = {}, got {}",
            10 * opts.k_features,
            opts.num_samples
        )));
    }
    let n_train = x.n_rows();

    // Training statistics per group: std for numerics, category
    // frequencies for binary/nominal groups.
    enum Stat {
        Numeric { std: f64 },
        Frequencies(Vec<f64>),
    }
    let stats: Vec<Stat> = groups
        .iter()
        .map(|g| match &g.kind {
            GroupKind::Numeric => {
                let col = x.column_values(g.start);
                let mean = col.iter().sum::<f64>() / n_train as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_train as f64;
                Stat::Numeric { std: var.sqrt() }
            }
            GroupKind::Binary => {
                let ones =
                    (0..n_train).filter(|&i| x.get(i, g.start) == 1.0).count() as f64;
                Stat::Frequencies(vec![1.0 - ones / n_train as f64, ones / n_train as f64])
            }
            GroupKind::Nominal { categories } => {
                let mut freqs = vec![0.0f64; categories.len()];
                for i in 0..n_train {
                    for (slot, c) in g.columns().enumerate() {
                        if x.get(i, c) == 1.0 {
                            freqs[slot] += 1.0;
                        }
                    }
                }
                for f in &mut freqs {
                    *f /= n_train as f64;
                }
                Stat::Frequencies(freqs)
            }
        })
        .collect();

    let instance: Vec<f64> = x.row_slice(row).to_vec();
    let sigma = opts.kernel_width.unwrap_or(0.75 * (p as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let n = opts.num_samples;
    let mut z = vec![0.0f64; n * p]; // interpretable design
    let mut encoded = vec![0.0f64; n * x.n_cols()];
    let mut proximity = vec![0.0f64; n];
    for s in 0..n {
        let enc = &mut encoded[s * x.n_cols()..(s + 1) * x.n_cols()];
        enc.copy_from_slice(&instance);
        let mut d2 = 0.0;
        for (gi, (g, stat)) in groups.iter().zip(&stats).enumerate() {
            match (stat, &g.kind) {
                (Stat::Numeric { std }, _) => {
                    let value = if s == 0 {
                        instance[g.start]
                    } else {
                        instance[g.start] + normal.sample(&mut rng) * std
                    };
                    enc[g.start] = value;
                    z[s * p + gi] = value;
                    if *std > 0.0 {
                        d2 += ((value - instance[g.start]) / std).powi(2);
                    }
                }
                (Stat::Frequencies(freqs), GroupKind::Binary) => {
                    let value = if s == 0 {
                        instance[g.start]
                    } else {
                        f64::from(rng.random::<f64>() < freqs[1])
                    };
                    enc[g.start] = value;
                    z[s * p + gi] = value;
                    if value != instance[g.start] {
                        d2 += 1.0;
                    }
                }
                (Stat::Frequencies(freqs), GroupKind::Nominal { .. }) => {
                    let instance_slot = (0..g.width)
                        .position(|slot| instance[g.start + slot] == 1.0)
                        .unwrap_or(0);
                    let slot = if s == 0 {
                        instance_slot
                    } else {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut chosen = freqs.len() - 1;
                        for (ci, f) in freqs.iter().enumerate() {
                            acc += f;
                            if u < acc {
                                chosen = ci;
                                break;
                            }
                        }
                        chosen
                    };
                    for ci in 0..g.width {
                        enc[g.start + ci] = f64::from(ci == slot);
                    }
                    z[s * p + gi] = f64::from(slot == instance_slot);
                    if slot != instance_slot {
                        d2 += 1.0;
                    }
                }
                _ => unreachable!(),
            }
        }
        proximity[s] = (-d2 / (sigma * sigma)).exp();
    }

    let perturb_matrix =
        FeatureMatrix::new(x.names().to_vec(), encoded, n, x.n_cols(), groups.clone());
    let f = model.predict_matrix(&perturb_matrix)?;

    // Weighted correlation screening for the K surrogate features.
    let wsum: f64 = proximity.iter().sum();
    let wmean = |col: &dyn Fn(usize) -> f64| -> f64 {
        (0..n).map(|s| proximity[s] * col(s)).sum::<f64>() / wsum
    };
    let f_mean = wmean(&|s| f[s]);
    let f_var = (0..n).map(|s| proximity[s] * (f[s] - f_mean).powi(2)).sum::<f64>() / wsum;
    let mut correlations = vec![0.0f64; p];
    let mut any_spread = false;
    for gi in 0..p {
        let mean = wmean(&|s| z[s * p + gi]);
        let var =
            (0..n).map(|s| proximity[s] * (z[s * p + gi] - mean).powi(2)).sum::<f64>() / wsum;
        if var > 1e-24 {
            any_spread = true;
            if f_var > 1e-24 {
                let cov = (0..n)
                    .map(|s| proximity[s] * (z[s * p + gi] - mean) * (f[s] - f_mean))
                    .sum::<f64>()
                    / wsum;
                correlations[gi] = (cov / (var * f_var).sqrt()).abs();
            }
        }
    }
    if !any_spread {
        return Err(InterpretError::DegeneratePerturbations);
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        correlations[b].partial_cmp(&correlations[a]).unwrap().then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(opts.k_features).collect();
    selected.sort_unstable();

    // Weighted least squares on [1 | selected columns].
    let cols = selected.len() + 1;
    let mut design = vec![0.0f64; n * cols];
    for s in 0..n {
        design[s * cols] = 1.0;
        for (ci, &gi) in selected.iter().enumerate() {
            design[s * cols + 1 + ci] = z[s * p + gi];
        }
    }
    let coef = linalg::weighted_least_squares(&design, n, cols, &f, Some(&proximity))
        .ok_or(InterpretError::DegeneratePerturbations)?;

    // Weighted R² of the surrogate.
    let mut sse = 0.0;
    for s in 0..n {
        let pred: f64 = coef[0]
            + selected
                .iter()
                .enumerate()
                .map(|(ci, &gi)| coef[1 + ci] * z[s * p + gi])
                .sum::<f64>();
        sse += proximity[s] * (f[s] - pred).powi(2);
    }
    let sst = f_var * wsum;
    let weighted_r2 = if sst > 1e-300 { 1.0 - sse / sst } else if sse < 1e-300 { 1.0 } else { 0.0 };

    let mut weights = vec![0.0f64; p];
    for (ci, &gi) in selected.iter().enumerate() {
        weights[gi] = coef[1 + ci];
    }
    Ok(LimeExplanation {
        features: x.groups().iter().map(|g| g.name.clone()).collect(),
        intercept: coef[0],
        weights,
        selected: selected.iter().map(|&gi| x.groups()[gi].name.clone()).collect(),
        kernel_width: sigma,
        weighted_r2,
        num_samples: n,
        seed: opts.seed,
    })
}
