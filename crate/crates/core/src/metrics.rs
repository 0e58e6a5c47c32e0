//! Regression performance metrics — R², RMSE, MedAE, RRSE — per
//! cross-validation fold, with optional observation weights.
//!
//! The four are tied together: `RRSE² = Σ(y−ŷ)² / Σ(y−ȳ)²` and
//! `R² = 1 − RRSE²`, an identity the tests pin to 1e-12. Weighted
//! variants replace sums with weighted sums and the median with the
//! weighted median. Reports conventionally show these ×100; everything
//! here is stored unscaled.

use crate::dataset::{Dataset, FoldAssignment};
use crate::models::{self, ModelError, RegressorSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: {y} targets vs {yhat} predictions")]
    LengthMismatch { y: usize, yhat: usize },
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("target variance is zero; R² and RRSE are undefined")]
    ZeroVariance,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("weights must be positive and match length")]
    BadWeights,
    #[error("fold {fold}: {source}")]
    FoldFit {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error("fold {fold}: {source}")]
    FoldScore {
        fold: usize,
        #[source]
        source: Box<MetricError>,
    },
    #[error("data error: {0}")]
    Data(#[from] crate::dataset::DataError),
}

/// Which metric, with its orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    R2,
    Rmse,
    Medae,
    Rrse,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::R2 => "r2",
            MetricKind::Rmse => "rmse",
            MetricKind::Medae => "medae",
            MetricKind::Rrse => "rrse",
        }
    }

    pub fn higher_is_better(&self) -> bool {
        matches!(self, MetricKind::R2)
    }

    pub const ALL: [MetricKind; 4] =
        [MetricKind::R2, MetricKind::Rmse, MetricKind::Medae, MetricKind::Rrse];
}

/// Scores of one evaluation fold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub r2: f64,
    pub rmse: f64,
    pub medae: f64,
    pub rrse: f64,
    pub n: usize,
}

impl FoldScore {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::R2 => self.r2,
            MetricKind::Rmse => self.rmse,
            MetricKind::Medae => self.medae,
            MetricKind::Rrse => self.rrse,
        }
    }
}

/// All four metrics of a prediction vector against its targets.
///
/// `weights`, when given, must be positive and aligned with `y`; they
/// replace the sums with weighted sums and the median with the weighted
/// median.
pub fn score(y: &[f64], yhat: &[f64], weights: Option<&[f64]>) -> Result<FoldScore, MetricError> {
    let n = y.len();
    if yhat.len() != n {
        return Err(MetricError::LengthMismatch { y: n, yhat: yhat.len() });
    }
    if n < 2 {
        return Err(MetricError::TooFew(n));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite("targets"));
    }
    if yhat.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite("predictions"));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(MetricError::BadWeights);
        }
    }
    let wsum: f64 = weights.map_or(n as f64, |w| w.iter().sum());
    let wmean =
        |vals: &[f64]| -> f64 {
            match weights {
                Some(w) => vals.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>() / wsum,
                None => vals.iter().sum::<f64>() / n as f64,
            }
        };
    let ybar = wmean(y);
    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..n {
        let w = weights.map_or(1.0, |ws| ws[i]);
        sse += w * (y[i] - yhat[i]).powi(2);
        sst += w * (y[i] - ybar).powi(2);
    }
    if sst <= 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    let abs_err: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    let medae = weighted_median(&abs_err, weights);

    Ok(FoldScore {
        fold: 0,
        r2: 1.0 - sse / sst,
        rmse: (sse / wsum).sqrt(),
        medae,
        rrse: (sse / sst).sqrt(),
        n,
    })
}

/// Median with the even-length convention (mean of the two central order
/// statistics); the weighted form averages the boundary pair when the
/// cumulative weight hits exactly half.
fn weighted_median(values: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    match weights {
        None => {
            let m = idx.len();
            if m % 2 == 1 {
                values[idx[m / 2]]
            } else {
                0.5 * (values[idx[m / 2 - 1]] + values[idx[m / 2]])
            }
        }
        Some(w) => {
            let total: f64 = w.iter().sum();
            let half = total / 2.0;
            let eps = 1e-12 * total;
            let mut acc = 0.0;
            for (pos, &i) in idx.iter().enumerate() {
                acc += w[i];
                if acc > half + eps {
                    return values[i];
                }
                if (acc - half).abs() <= eps {
                    // Exactly half the mass below: average with the next.
                    let next = idx.get(pos + 1).copied().unwrap_or(i);
                    return 0.5 * (values[i] + values[next]);
                }
            }
            values[*idx.last().expect("non-empty")]
        }
    }
}

/// Prediction source for cross-validation: a spec to refit per fold, or a
/// full-length externally produced prediction vector to slice.
pub enum CvSource<'a> {
    Spec(&'a RegressorSpec),
    External(&'a [f64]),
}

/// K-fold cross-validation scores: fit on k−1 folds, score the held-out
/// fold, k times. Weighted scoring uses the dataset's weight column when
/// `weighted` is set. Fit and scoring errors carry the fold index.
pub fn cv_score(
    source: CvSource<'_>,
    dataset: &Dataset,
    folds: &FoldAssignment,
    weighted: bool,
) -> Result<Vec<FoldScore>, MetricError> {
    let x = dataset.encode()?;
    let y = dataset.target_f64();
    let weights = if weighted { dataset.weights() } else { None };
    let mut out = Vec::with_capacity(folds.k());
    for fold in 0..folds.k() {
        let test = folds.test_indices(fold);
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let w_test: Option<Vec<f64>> =
            weights.map(|w| test.iter().map(|&i| w[i]).collect());
        let yhat = match &source {
            CvSource::Spec(spec) => {
                let train = folds.train_indices(fold);
                let x_train = x.take_rows(&train);
                let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = models::fit(spec, &x_train, &y_train)
                    .map_err(|source| MetricError::FoldFit { fold, source })?;
                model
                    .predict(&x.take_rows(&test))
                    .map_err(|source| MetricError::FoldFit { fold, source })?
            }
            CvSource::External(preds) => test.iter().map(|&i| preds[i]).collect(),
        };
        let mut fs = score(&y_test, &yhat, w_test.as_deref())
            .map_err(|e| MetricError::FoldScore { fold, source: Box::new(e) })?;
        fs.fold = fold;
        out.push(fs);
    }
    Ok(out)
}
