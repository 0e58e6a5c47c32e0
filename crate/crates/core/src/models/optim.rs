//! Dense BFGS minimizer with Armijo backtracking, used for the
//! maximum-likelihood inner steps of the count models.

pub(crate) struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` (which returns value and gradient) from `x0`.
///
/// Stops when the step improves the objective by less than `f_tol`
/// relative terms or the gradient inf-norm falls below `g_tol`; starting
/// from the caller's current iterate it never returns a worse point, which
/// is what the EM outer loop relies on.
pub(crate) fn minimize(
    f: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    max_iter: usize,
    f_tol: f64,
    g_tol: f64,
) -> OptimResult {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut grad) = f(&x);
    let mut h = identity(dim);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        if inf_norm(&grad) <= g_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // Search direction d = −H·g, reset to steepest descent if H has
        // drifted off positive-definite.
        let mut dir: Vec<f64> = (0..dim)
            .map(|i| -(0..dim).map(|j| h[i][j] * grad[j]).sum::<f64>())
            .collect();
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let slope = if slope >= 0.0 {
            h = identity(dim);
            dir = grad.iter().map(|g| -g).collect();
            -grad.iter().map(|g| g * g).sum::<f64>()
        } else {
            slope
        };

        // Backtracking line search (Armijo).
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            // No descent step representable: treat the current point as
            // the optimum.
            converged = true;
            break;
        };

        let improvement = fx - ft;
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * inf_norm(&s).max(1e-300) * inf_norm(&yv).max(1e-300) {
            bfgs_update(&mut h, &s, &yv, sy);
        }
        x = xt;
        fx = ft;
        grad = gt;
        if improvement <= f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    OptimResult { x, value: fx, iterations, converged }
}

fn identity(dim: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; dim]; dim];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    h
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1/(yᵀs).
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let dim = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..dim {
        for j in 0..dim {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut f = |x: &[f64]| {
            let v = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
        };
        let res = minimize(&mut f, &[0.0, 0.0], 100, 1e-12, 1e-10);
        assert!(res.converged);
        assert!((res.x[0] - 3.0).abs() < 1e-6);
        assert!((res.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let res = minimize(&mut f, &[-1.2, 1.0], 500, 1e-14, 1e-10);
        assert!((res.x[0] - 1.0).abs() < 1e-4, "x = {:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_returns_worse_point() {
        let mut f = |x: &[f64]| ((x[0].powi(4) + x[0]).abs(), vec![4.0 * x[0].powi(3) + 1.0]);
        let start = 2.0;
        let (f0, _) = f(&[start]);
        let res = minimize(&mut f, &[start], 5, 1e-15, 1e-12);
        assert!(res.value <= f0);
    }
}
