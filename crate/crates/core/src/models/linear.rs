//! Ordinary least squares with an intercept, solved through the normal
//! equations.

use super::{FittedModel, ModelError, ModelParams, TrainingMeta};
use crate::dataset::FeatureMatrix;
use crate::linalg;

/// Least-squares fit of `y` on the design matrix plus an intercept.
///
/// Coefficients are stored `[intercept, per-feature…]`. Exactly collinear
/// columns make the normal equations singular, which is reported as an
/// error rather than silently regularized.
pub fn fit_ols(x: &FeatureMatrix, y: &[f64]) -> Result<FittedModel, ModelError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(ModelError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n <= p {
        return Err(ModelError::TooFewRows { n, need: p + 1 });
    }
    let mut design = Vec::with_capacity(n * (p + 1));
    for i in 0..n {
        design.push(1.0);
        design.extend_from_slice(x.row_slice(i));
    }
    let coefficients = linalg::weighted_least_squares(&design, n, p + 1, y, None)
        .ok_or_else(|| ModelError::Singular {
            detail: "normal equations are singular; remove duplicated or constant columns"
                .into(),
        })?;
    let mut sse = 0.0;
    for i in 0..n {
        let pred = coefficients[0]
            + x.row_slice(i).iter().zip(&coefficients[1..]).map(|(a, b)| a * b).sum::<f64>();
        sse += (y[i] - pred).powi(2);
    }
    Ok(FittedModel {
        params: ModelParams::Ols { coefficients },
        feature_names: x.names().to_vec(),
        seed: None,
        meta: TrainingMeta {
            iterations: 1,
            converged: true,
            final_loss: sse / n as f64,
            loss_history: vec![],
            warnings: vec![],
        },
    })
}

pub(crate) fn predict_linear(coefficients: &[f64], row: &[f64]) -> f64 {
    coefficients[0] + row.iter().zip(&coefficients[1..]).map(|(a, b)| a * b).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]);
        let model = fit_ols(&x, &y).unwrap();
        let ModelParams::Ols { coefficients } = &model.params else { panic!() };
        assert!((coefficients[0] - 3.0).abs() < 1e-10);
        assert!((coefficients[1] - 2.0).abs() < 1e-10);
        assert!((model.predict(&x).unwrap()[5] - 13.0).abs() < 1e-10);
    }

    #[test]
    fn constant_target_gives_zero_slope() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y = vec![5.0; 8];
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]);
        let model = fit_ols(&x, &y).unwrap();
        let ModelParams::Ols { coefficients } = &model.params else { panic!() };
        assert!(coefficients[1].abs() < 1e-10);
        assert!((coefficients[0] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        let x = FeatureMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![xs.clone(), xs],
        );
        assert!(matches!(fit_ols(&x, &y), Err(ModelError::Singular { .. })));
    }

    #[test]
    fn needs_more_rows_than_columns() {
        let x = FeatureMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        );
        assert!(matches!(
            fit_ols(&x, &[1.0, 2.0]),
            Err(ModelError::TooFewRows { .. })
        ));
    }
}
