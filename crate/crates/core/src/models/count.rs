//! Zero-inflated negative-binomial and hurdle count regressions, fit by
//! maximum likelihood.
//!
//! Both use the NB2 parameterization: mean `μ = exp(x·β)`, dispersion
//! `θ > 0` (variance `μ + μ²/θ`), with θ optimized on the log scale. The
//! zero-inflated model mixes a logit-gated structural zero with the NB
//! count and is fit by EM with BFGS M-steps started from the current
//! iterate, which keeps the observed log-likelihood non-decreasing. The
//! hurdle model fits a logit on `y > 0` and a zero-truncated NB on the
//! positive counts as two independent maximizations.

use super::optim::{minimize, OptimResult};
use super::{FittedModel, ModelError, ModelParams, TrainingMeta};
use crate::dataset::FeatureMatrix;
use crate::special::ln_gamma;

/// Cap applied to logit coefficients when a separating feature drives the
/// binary likelihood toward infinity.
const LOGIT_COEF_CAP: f64 = 15.0;
const INNER_MAX_ITER: usize = 200;
const INNER_F_TOL: f64 = 1e-11;
const INNER_G_TOL: f64 = 1e-7;

#[inline]
fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else if t < -30.0 {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn eta_row(coefs: &[f64], row: &[f64]) -> f64 {
    coefs[0] + row.iter().zip(&coefs[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Validates a count target and returns it as integers.
fn validate_counts(y: &[f64]) -> Result<Vec<u32>, ModelError> {
    let mut out = Vec::with_capacity(y.len());
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
            return Err(ModelError::NonIntegerTarget { row: i + 1, value: v });
        }
        out.push(v as u32);
    }
    Ok(out)
}

/// Per-θ lookup tables for the gamma-ratio terms. Counts are small
/// integers, so `ln Γ(y+θ) − ln Γ(θ)` and `ψ(y+θ) − ψ(θ)` reduce to short
/// running sums over `θ + j`.
struct ThetaTables {
    ln_ratio: Vec<f64>,
    dg_ratio: Vec<f64>,
}

impl ThetaTables {
    fn build(theta: f64, max_y: u32) -> Self {
        let mut ln_ratio = Vec::with_capacity(max_y as usize + 1);
        let mut dg_ratio = Vec::with_capacity(max_y as usize + 1);
        let mut ln_acc = 0.0;
        let mut dg_acc = 0.0;
        ln_ratio.push(0.0);
        dg_ratio.push(0.0);
        for j in 0..max_y {
            let t = theta + j as f64;
            ln_acc += t.ln();
            dg_acc += 1.0 / t;
            ln_ratio.push(ln_acc);
            dg_ratio.push(dg_acc);
        }
        ThetaTables { ln_ratio, dg_ratio }
    }
}

/// Weighted NB2 negative log-likelihood and gradient over `[β…, ln θ]`.
///
/// Rows receive the optional `weights` (the EM responsibilities); `lnfact`
/// caches `ln y!`.
fn nb_objective(
    x: &FeatureMatrix,
    y: &[u32],
    lnfact: &[f64],
    weights: Option<&[f64]>,
    params: &[f64],
) -> (f64, Vec<f64>) {
    let p1 = params.len() - 1;
    let beta = &params[..p1];
    let theta = params[p1].exp();
    let max_y = y.iter().copied().max().unwrap_or(0);
    let tables = ThetaTables::build(theta, max_y);

    let mut nll = 0.0;
    let mut grad = vec![0.0; params.len()];
    for i in 0..x.n_rows() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w == 0.0 {
            continue;
        }
        let row = x.row_slice(i);
        let eta = eta_row(beta, row);
        let mu = eta.exp();
        let yi = y[i] as f64;
        let denom = theta + mu;
        // θ lnθ − (θ+y) ln(θ+μ) rewritten as −θ ln1p(μ/θ) − y ln(θ+μ) to
        // survive large θ without cancellation.
        let ll = tables.ln_ratio[y[i] as usize] - lnfact[i] + yi * (eta - denom.ln())
            - theta * (mu / theta).ln_1p();
        nll -= w * ll;

        let dmu = theta * (yi - mu) / denom; // d ll / d eta
        grad[0] -= w * dmu;
        for (g, &xv) in grad[1..p1].iter_mut().zip(&row[..p1 - 1]) {
            *g -= w * dmu * xv;
        }
        let dtheta =
            tables.dg_ratio[y[i] as usize] - (mu / theta).ln_1p() + (mu - yi) / denom;
        grad[p1] -= w * theta * dtheta;
    }
    (nll, grad)
}

/// Weighted Bernoulli negative log-likelihood and gradient; responses may
/// be fractional (the EM responsibilities).
fn logit_objective(x: &FeatureMatrix, resp: &[f64], params: &[f64]) -> (f64, Vec<f64>) {
    let mut nll = 0.0;
    let mut grad = vec![0.0; params.len()];
    for i in 0..x.n_rows() {
        let row = x.row_slice(i);
        let eta = eta_row(params, row);
        let r = resp[i];
        nll += r * softplus(-eta) + (1.0 - r) * softplus(eta);
        let d = r - sigmoid(eta);
        grad[0] -= d;
        for (g, &xv) in grad[1..].iter_mut().zip(row) {
            *g -= d * xv;
        }
    }
    (nll, grad)
}

/// Zero-truncated NB2 negative log-likelihood and gradient over
/// `[β…, ln θ]`; all rows must have `y ≥ 1`.
fn ztnb_objective(x: &FeatureMatrix, y: &[u32], lnfact: &[f64], params: &[f64]) -> (f64, Vec<f64>) {
    let p1 = params.len() - 1;
    let beta = &params[..p1];
    let theta = params[p1].exp();
    let max_y = y.iter().copied().max().unwrap_or(1);
    let tables = ThetaTables::build(theta, max_y);

    let mut nll = 0.0;
    let mut grad = vec![0.0; params.len()];
    for i in 0..x.n_rows() {
        let row = x.row_slice(i);
        let eta = eta_row(beta, row);
        let mu = eta.exp();
        let yi = y[i] as f64;
        let denom = theta + mu;
        let ln_p0 = -theta * (mu / theta).ln_1p();
        let p0 = ln_p0.exp();
        let one_minus_p0 = -ln_p0.exp_m1();
        let ll = tables.ln_ratio[y[i] as usize] - lnfact[i] + yi * (eta - denom.ln()) + ln_p0
            - one_minus_p0.ln();
        nll -= ll;

        let ratio = p0 / one_minus_p0;
        let dmu = theta * (yi - mu) / denom - ratio * theta * mu / denom;
        grad[0] -= dmu;
        for (g, &xv) in grad[1..p1].iter_mut().zip(&row[..p1 - 1]) {
            *g -= dmu * xv;
        }
        let base = mu / denom - (mu / theta).ln_1p();
        let dtheta = tables.dg_ratio[y[i] as usize] + base - yi / denom + ratio * base;
        grad[p1] -= theta * dtheta;
    }
    (nll, grad)
}

fn ln_factorials(y: &[u32]) -> Vec<f64> {
    y.iter().map(|&v| ln_gamma(v as f64 + 1.0)).collect()
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Observed-data log-likelihood of the zero-inflated NB model.
fn zinb_loglik(
    x: &FeatureMatrix,
    y: &[u32],
    lnfact: &[f64],
    gamma: &[f64],
    beta: &[f64],
    ln_theta: f64,
) -> f64 {
    let theta = ln_theta.exp();
    let max_y = y.iter().copied().max().unwrap_or(0);
    let tables = ThetaTables::build(theta, max_y);
    let mut ll = 0.0;
    for i in 0..x.n_rows() {
        let row = x.row_slice(i);
        let eta_z = eta_row(gamma, row);
        let eta_c = eta_row(beta, row);
        let mu = eta_c.exp();
        let ln_pi = -softplus(-eta_z);
        let ln_one_minus_pi = -softplus(eta_z);
        let ln_p0 = -theta * (mu / theta).ln_1p();
        if y[i] == 0 {
            let a = ln_pi;
            let b = ln_one_minus_pi + ln_p0;
            let m = a.max(b);
            ll += m + ((a - m).exp() + (b - m).exp()).ln();
        } else {
            let yi = y[i] as f64;
            ll += ln_one_minus_pi + tables.ln_ratio[y[i] as usize] - lnfact[i]
                + yi * (eta_c - (theta + mu).ln())
                + ln_p0;
        }
    }
    ll
}

/// Fits the zero-inflated negative binomial by EM.
///
/// `max_iter` bounds the EM iterations and `tol` is the log-likelihood
/// improvement under which the fit is declared converged; hitting
/// `max_iter` instead returns the best iterate with `converged = false`.
/// `meta.loss_history` records the negative log-likelihood after each EM
/// iteration (non-increasing up to numerical tolerance).
pub fn fit_zinb(
    x: &FeatureMatrix,
    y: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<FittedModel, ModelError> {
    let counts = validate_counts(y)?;
    let n = x.n_rows();
    if counts.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", counts.len())));
    }
    let zeros = counts.iter().filter(|&&v| v == 0).count();
    if zeros == 0 {
        return Err(ModelError::DegenerateTarget("no zero counts; fit a plain NB instead".into()));
    }
    if zeros == n {
        return Err(ModelError::DegenerateTarget(
            "all counts are zero; the likelihood is degenerate".into(),
        ));
    }
    let lnfact = ln_factorials(&counts);
    let p = x.n_cols();

    let zero_frac = zeros as f64 / n as f64;
    let mean_y = counts.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let mut gamma = vec![0.0; p + 1];
    gamma[0] = logit((0.5 * zero_frac + 0.01).clamp(0.02, 0.95));
    let mut count_params = vec![0.0; p + 2];
    count_params[0] = mean_y.max(0.05).ln();
    // count_params[p + 1] is ln θ, starting at θ = 1.

    let mut ll = zinb_loglik(x, &counts, &lnfact, &gamma, &count_params[..p + 1], count_params[p + 1]);
    let mut history = vec![-ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = vec![0.0f64; n];
    let mut nb_weights = vec![1.0f64; n];

    for iter in 0..max_iter {
        iterations = iter + 1;
        // E-step: responsibility of the structural-zero component.
        let theta = count_params[p + 1].exp();
        for i in 0..n {
            if counts[i] > 0 {
                resp[i] = 0.0;
            } else {
                let row = x.row_slice(i);
                let eta_z = eta_row(&gamma, row);
                let mu = eta_row(&count_params[..p + 1], row).exp();
                let ln_pi = -softplus(-eta_z);
                let ln_one_minus_pi = -softplus(eta_z);
                let ln_p0 = -theta * (mu / theta).ln_1p();
                let a = ln_pi;
                let b = ln_one_minus_pi + ln_p0;
                let m = a.max(b);
                let lse = m + ((a - m).exp() + (b - m).exp()).ln();
                resp[i] = (a - lse).exp();
            }
            nb_weights[i] = 1.0 - resp[i];
        }

        // M-step 1: gate coefficients against the responsibilities.
        let gate = minimize(
            &mut |params| logit_objective(x, &resp, params),
            &gamma,
            INNER_MAX_ITER,
            INNER_F_TOL,
            INNER_G_TOL,
        );
        gamma = gate.x;

        // M-step 2: weighted NB on the at-risk mass.
        let nb = minimize(
            &mut |params| nb_objective(x, &counts, &lnfact, Some(&nb_weights), params),
            &count_params,
            INNER_MAX_ITER,
            INNER_F_TOL,
            INNER_G_TOL,
        );
        count_params = nb.x;

        let ll_new =
            zinb_loglik(x, &counts, &lnfact, &gamma, &count_params[..p + 1], count_params[p + 1]);
        history.push(-ll_new);
        let improvement = ll_new - ll;
        ll = ll_new;
        if improvement < tol {
            converged = true;
            break;
        }
    }

    let theta = count_params[p + 1].exp();
    Ok(FittedModel {
        params: ModelParams::Zinb {
            zero_coefs: gamma,
            count_coefs: count_params[..p + 1].to_vec(),
            theta,
        },
        feature_names: x.names().to_vec(),
        seed: None,
        meta: TrainingMeta {
            iterations,
            converged,
            final_loss: -ll,
            loss_history: history,
            warnings: vec![],
        },
    })
}

/// Fits the hurdle model: a logit for crossing zero and a zero-truncated
/// NB2 for the positive counts, maximized independently.
pub fn fit_hurdle(
    x: &FeatureMatrix,
    y: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<FittedModel, ModelError> {
    let counts = validate_counts(y)?;
    let n = x.n_rows();
    if counts.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", counts.len())));
    }
    let positives: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
    if positives.is_empty() {
        return Err(ModelError::DegenerateTarget("no positive counts".into()));
    }
    if positives.len() == n {
        return Err(ModelError::DegenerateTarget(
            "all counts are positive; the hurdle logit is degenerate".into(),
        ));
    }
    let p = x.n_cols();
    let mut warnings = Vec::new();

    // Binary part.
    let resp: Vec<f64> = counts.iter().map(|&v| f64::from(v > 0)).collect();
    let pos_frac = positives.len() as f64 / n as f64;
    let mut gamma0 = vec![0.0; p + 1];
    gamma0[0] = logit(pos_frac.clamp(0.02, 0.98));
    let gate = minimize(
        &mut |params| logit_objective(x, &resp, params),
        &gamma0,
        max_iter.max(INNER_MAX_ITER),
        (tol * 1e-3).max(1e-12),
        INNER_G_TOL,
    );
    let mut logit_coefs = gate.x;
    if logit_coefs.iter().any(|c| c.abs() > LOGIT_COEF_CAP) {
        for c in &mut logit_coefs {
            *c = c.clamp(-LOGIT_COEF_CAP, LOGIT_COEF_CAP);
        }
        warnings.push(format!(
            "possible complete separation in the hurdle logit; coefficients capped at ±{LOGIT_COEF_CAP}"
        ));
    }

    // Count part on the positives only.
    let x_pos = x.take_rows(&positives);
    let y_pos: Vec<u32> = positives.iter().map(|&i| counts[i]).collect();
    let lnfact_pos = ln_factorials(&y_pos);
    let mean_pos = y_pos.iter().map(|&v| v as f64).sum::<f64>() / y_pos.len() as f64;
    let mut count0 = vec![0.0; p + 2];
    count0[0] = mean_pos.max(0.1).ln();
    let count_fit: OptimResult = minimize(
        &mut |params| ztnb_objective(&x_pos, &y_pos, &lnfact_pos, params),
        &count0,
        max_iter.max(INNER_MAX_ITER),
        (tol * 1e-3).max(1e-12),
        INNER_G_TOL,
    );
    let theta = count_fit.x[p + 1].exp();

    Ok(FittedModel {
        params: ModelParams::Hurdle {
            logit_coefs,
            count_coefs: count_fit.x[..p + 1].to_vec(),
            theta,
        },
        feature_names: x.names().to_vec(),
        seed: None,
        meta: TrainingMeta {
            iterations: gate.iterations + count_fit.iterations,
            converged: gate.converged && count_fit.converged,
            final_loss: gate.value + count_fit.value,
            loss_history: vec![],
            warnings,
        },
    })
}

/// Plain NB2 fit (no zero inflation); used by the nested-model
/// consistency checks and available to callers that want the reduced
/// model.
pub fn fit_nb(
    x: &FeatureMatrix,
    y: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, f64, bool), ModelError> {
    let counts = validate_counts(y)?;
    let lnfact = ln_factorials(&counts);
    let p = x.n_cols();
    let mean_y = counts.iter().map(|&v| v as f64).sum::<f64>() / counts.len() as f64;
    let mut start = vec![0.0; p + 2];
    start[0] = mean_y.max(0.05).ln();
    let fit = minimize(
        &mut |params| nb_objective(x, &counts, &lnfact, None, params),
        &start,
        max_iter.max(INNER_MAX_ITER),
        (tol * 1e-3).max(1e-12),
        INNER_G_TOL,
    );
    Ok((fit.x[..p + 1].to_vec(), fit.x[p + 1].exp(), fit.converged))
}

/// Expected count under the zero-inflated model: `(1 − π(x)) · μ(x)`.
pub(crate) fn predict_zinb(zero_coefs: &[f64], count_coefs: &[f64], row: &[f64]) -> f64 {
    let pi = sigmoid(eta_row(zero_coefs, row));
    let mu = eta_row(count_coefs, row).min(30.0).exp();
    (1.0 - pi) * mu
}

/// Expected count under the hurdle model:
/// `P(y>0 | x) · μ / (1 − P_NB(0; μ, θ))`.
pub(crate) fn predict_hurdle(
    logit_coefs: &[f64],
    count_coefs: &[f64],
    theta: f64,
    row: &[f64],
) -> f64 {
    let p_pos = sigmoid(eta_row(logit_coefs, row));
    let mu = eta_row(count_coefs, row).min(30.0).exp();
    let ln_p0 = -theta * (mu / theta).ln_1p();
    let one_minus_p0 = -ln_p0.exp_m1();
    if one_minus_p0 <= 0.0 {
        return 0.0;
    }
    p_pos * mu / one_minus_p0
}
