//! Small fully-connected network: rectified-linear hidden layers, linear
//! output, squared-error loss, mini-batch gradient descent.
//!
//! Inputs and the target are standardized internally at fit time (the
//! moments are stored on the model and predictions are de-standardized),
//! which only conditions the optimization — the caller's data is never
//! modified.

use super::{FittedModel, ModelError, ModelParams, TrainingMeta};
use crate::dataset::FeatureMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `outputs × inputs` weight matrix.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub outputs: usize,
    pub inputs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

pub struct MlpOptions {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub step_size: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        MlpOptions { hidden_sizes: vec![32], epochs: 200, step_size: 0.01, batch: 32, seed: 0 }
    }
}

pub fn fit_mlp(x: &FeatureMatrix, y: &[f64], opts: &MlpOptions) -> Result<FittedModel, ModelError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if opts.hidden_sizes.is_empty() {
        return Err(ModelError::BadHyper("at least one hidden layer is required".into()));
    }
    if opts.hidden_sizes.iter().any(|&h| h == 0) {
        return Err(ModelError::BadHyper("hidden layer sizes must be >= 1".into()));
    }
    if opts.epochs == 0 || opts.batch == 0 || !(opts.step_size > 0.0) {
        return Err(ModelError::BadHyper("epochs, batch and step_size must be positive".into()));
    }
    if n == 0 {
        return Err(ModelError::TooFewRows { n: 0, need: 1 });
    }

    // Standardize inputs and target.
    let mut x_mean = vec![0.0; p];
    let mut x_scale = vec![0.0; p];
    for j in 0..p {
        let col = x.column_values(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        x_mean[j] = mean;
        x_scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_scale = if y_var.sqrt() > 1e-12 { y_var.sqrt() } else { 1.0 };

    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            x.row_slice(i)
                .iter()
                .enumerate()
                .map(|(j, v)| (v - x_mean[j]) / x_scale[j])
                .collect()
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut net = init_layers(p, &opts.hidden_sizes, &mut rng);

    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(opts.batch) {
            let mut grads = zero_grads(&net);
            for &i in chunk {
                accumulate_gradients(&net, &xs[i], ys[i], &mut grads);
            }
            let scale = opts.step_size / chunk.len() as f64;
            for (layer, grad) in net.iter_mut().zip(&grads) {
                for (w, g) in layer.weights.iter_mut().zip(&grad.0) {
                    *w -= scale * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.1) {
                    *b -= scale * g;
                }
            }
        }
        let mse_std: f64 =
            xs.iter().zip(&ys).map(|(xi, &yi)| (forward(&net, xi) - yi).powi(2)).sum::<f64>()
                / n as f64;
        let mse = mse_std * y_scale * y_scale;
        if !mse.is_finite() {
            return Err(ModelError::NumericFailure(format!(
                "mlp training diverged at epoch {epoch}: loss {mse}; lower step_size (was {})",
                opts.step_size
            )));
        }
        loss_history.push(mse);
    }

    let final_loss = loss_history.last().copied().unwrap_or(f64::NAN);
    Ok(FittedModel {
        params: ModelParams::Mlp(MlpParams { layers: net, x_mean, x_scale, y_mean, y_scale }),
        feature_names: x.names().to_vec(),
        seed: Some(opts.seed),
        meta: TrainingMeta {
            iterations: opts.epochs,
            converged: true,
            final_loss,
            loss_history,
            warnings: vec![],
        },
    })
}

fn init_layers(inputs: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Vec<Layer> {
    let mut sizes = vec![inputs];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
        layers.push(Layer {
            weights: (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect(),
            bias: vec![0.0; fan_out],
            outputs: fan_out,
            inputs: fan_in,
        });
    }
    layers
}

fn zero_grads(net: &[Layer]) -> Vec<(Vec<f64>, Vec<f64>)> {
    net.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect()
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    (0..layer.outputs)
        .map(|o| {
            layer.bias[o]
                + layer.weights[o * layer.inputs..(o + 1) * layer.inputs]
                    .iter()
                    .zip(input)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
        })
        .collect()
}

/// Network output in standardized space.
pub(crate) fn forward(net: &[Layer], input: &[f64]) -> f64 {
    let mut a = input.to_vec();
    for (li, layer) in net.iter().enumerate() {
        let mut z = affine(layer, &a);
        if li + 1 < net.len() {
            for v in &mut z {
                *v = v.max(0.0);
            }
        }
        a = z;
    }
    a[0]
}

/// Adds d(½·residual²)/dW for one example onto `grads`.
fn accumulate_gradients(net: &[Layer], input: &[f64], target: f64, grads: &mut [(Vec<f64>, Vec<f64>)]) {
    // Forward pass keeping pre- and post-activation values.
    let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(net.len());
    for (li, layer) in net.iter().enumerate() {
        let z = affine(layer, activations.last().unwrap());
        pre.push(z.clone());
        let mut a = z;
        if li + 1 < net.len() {
            for v in &mut a {
                *v = v.max(0.0);
            }
        }
        activations.push(a);
    }
    let output = activations.last().unwrap()[0];
    // d loss / d output with loss = (output − target)².
    let mut delta = vec![2.0 * (output - target)];

    for li in (0..net.len()).rev() {
        let layer = &net[li];
        let a_in = &activations[li];
        let (gw, gb) = &mut grads[li];
        for o in 0..layer.outputs {
            gb[o] += delta[o];
            let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
            for (g, &x) in row.iter_mut().zip(a_in) {
                *g += delta[o] * x;
            }
        }
        if li > 0 {
            let mut next = vec![0.0; layer.inputs];
            for (inp, nx) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for o in 0..layer.outputs {
                    acc += delta[o] * layer.weights[o * layer.inputs + inp];
                }
                // ReLU derivative of the upstream activation.
                *nx = if pre[li - 1][inp] > 0.0 { acc } else { 0.0 };
            }
            delta = next;
        }
    }
}

pub(crate) fn predict_mlp(params: &MlpParams, row: &[f64]) -> f64 {
    let standardized: Vec<f64> = row
        .iter()
        .enumerate()
        .map(|(j, v)| (v - params.x_mean[j]) / params.x_scale[j])
        .collect();
    forward(&params.layers, &standardized) * params.y_scale + params.y_mean
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = init_layers(3, &[4, 3], &mut rng);
        let input = [0.3, -0.7, 1.2];
        let target = 0.9;

        let loss = |net: &[Layer]| (forward(net, &input) - target).powi(2);
        let mut grads = zero_grads(&net);
        accumulate_gradients(&net, &input, target, &mut grads);

        // Five probe weights across the layers.
        let probes = [(0usize, 0usize), (0, 5), (1, 2), (1, 7), (2, 1)];
        for &(li, wi) in &probes {
            let h = 1e-6;
            let mut plus = net.clone();
            plus[li].weights[wi] += h;
            let mut minus = net.clone();
            minus[li].weights[wi] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let an = grads[li].0[wi];
            let denom = fd.abs().max(an.abs()).max(1e-8);
            assert!(
                ((an - fd) / denom).abs() < 1e-4,
                "layer {li} weight {wi}: analytic {an} vs fd {fd}"
            );
        }
    }

    #[test]
    fn rejects_zero_hidden_layers() {
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![vec![1.0, 2.0]]);
        let opts = MlpOptions { hidden_sizes: vec![], ..Default::default() };
        assert!(matches!(fit_mlp(&x, &[1.0, 2.0], &opts), Err(ModelError::BadHyper(_))));
    }

    #[test]
    fn learns_a_line() {
        let n = 256;
        let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / n as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs.clone()]);
        let opts = MlpOptions {
            hidden_sizes: vec![16],
            epochs: 400,
            step_size: 0.02,
            batch: 32,
            seed: 3,
        };
        let model = fit_mlp(&x, &y, &opts).unwrap();

        // Held-out grid inside the training range.
        let test_xs: Vec<f64> = (0..50).map(|i| -1.9 + 3.8 * i as f64 / 49.0).collect();
        let test_y: Vec<f64> = test_xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let xt = FeatureMatrix::from_columns(vec!["x".into()], vec![test_xs]);
        let preds = model.predict(&xt).unwrap();
        let rmse = (preds
            .iter()
            .zip(&test_y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 50.0)
            .sqrt();
        let mean = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(rmse < 0.05 * sd, "rmse {rmse} vs bound {}", 0.05 * sd);
    }

    #[test]
    fn deterministic_given_seed() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 8.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]);
        let opts = MlpOptions { epochs: 20, seed: 44, ..Default::default() };
        let a = fit_mlp(&x, &y, &opts).unwrap();
        let b = fit_mlp(&x, &y, &opts).unwrap();
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
        assert_eq!(a.meta.loss_history, b.meta.loss_history);
    }
}
