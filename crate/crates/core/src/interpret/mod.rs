//! Model-agnostic explanations over any [`Predictor`]: permutation
//! feature importance, partial-dependence and individual-conditional-
//! expectation curves, exact and sampled Shapley values, and LIME local
//! surrogates.
//!
//! All explainers treat an original column as one unit — a one-hot block
//! is permuted, substituted, or perturbed atomically, so no impossible
//! multi-hot rows ever reach the model — and are deterministic given
//! their seed.

mod importance;
mod lime;
mod pdp;
mod shap;

pub use importance::{permutation_importance, ImportanceEntry, ImportanceReport};
pub use lime::{lime_explain, LimeExplanation, LimeOptions};
pub use pdp::{ice, pdp, IceBundle, PdpCurve, SampleSpec};
pub use shap::{shap_exact, shap_sampled, ShapExplanation};

use crate::dataset::{FeatureGroup, FeatureMatrix, GroupKind};
use crate::metrics::MetricError;
use crate::models::ModelError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{feature}' is {actual}, expected {expected}")]
    WrongKind { feature: String, expected: &'static str, actual: &'static str },
    #[error(
        "exact Shapley enumeration is limited to 15 feature groups (got {0}); use shap_sampled"
    )]
    TooManyFeaturesForExact(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("grid value {value} outside the observed range of '{feature}'")]
    GridOutOfRange { feature: String, value: f64 },
    #[error("degenerate perturbation spread: no interpretable feature varies")]
    DegeneratePerturbations,
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Grid of values to sweep for one feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValues {
    Numeric(Vec<f64>),
    Categories(Vec<String>),
}

impl GridValues {
    pub fn len(&self) -> usize {
        match self {
            GridValues::Numeric(v) => v.len(),
            GridValues::Categories(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Text label of one grid point, for reports.
    pub fn label(&self, i: usize) -> String {
        match self {
            GridValues::Numeric(v) => format!("{}", v[i]),
            GridValues::Categories(v) => v[i].clone(),
        }
    }
}

/// A feature plus the grid the curves sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub feature: String,
    pub values: GridValues,
}

impl GridSpec {
    /// Quantile grid of up to `points` values for a numeric feature; grid
    /// values are observed order statistics, so they stay within range
    /// and respect the support.
    pub fn quantile(
        x: &FeatureMatrix,
        feature: &str,
        points: usize,
    ) -> Result<Self, InterpretError> {
        let group = find_group(x, feature)?;
        match group.kind {
            GroupKind::Numeric | GroupKind::Binary => {}
            GroupKind::Nominal { .. } => {
                return Err(InterpretError::WrongKind {
                    feature: feature.into(),
                    expected: "numeric",
                    actual: "nominal",
                })
            }
        }
        let mut vals = x.column_values(group.start);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len();
        if n == 0 {
            return Err(InterpretError::EmptySample);
        }
        let points = points.max(2);
        let mut grid = Vec::with_capacity(points);
        for i in 0..points {
            let q = i as f64 / (points - 1) as f64;
            let idx = (q * (n - 1) as f64).round() as usize;
            let v = vals[idx];
            if grid.last() != Some(&v) {
                grid.push(v);
            }
        }
        Ok(GridSpec { feature: feature.into(), values: GridValues::Numeric(grid) })
    }

    /// Default grid: 20-point quantile grid for numerics, {0, 1} for
    /// binary columns, the category set for nominals.
    pub fn auto(x: &FeatureMatrix, feature: &str) -> Result<Self, InterpretError> {
        let group = find_group(x, feature)?;
        match &group.kind {
            GroupKind::Numeric => Self::quantile(x, feature, 20),
            GroupKind::Binary => Ok(GridSpec {
                feature: feature.into(),
                values: GridValues::Numeric(vec![0.0, 1.0]),
            }),
            GroupKind::Nominal { categories } => Ok(GridSpec {
                feature: feature.into(),
                values: GridValues::Categories(categories.clone()),
            }),
        }
    }

    /// Validates numeric grid values against the observed range.
    pub fn checked_numeric(
        x: &FeatureMatrix,
        feature: &str,
        grid: Vec<f64>,
    ) -> Result<Self, InterpretError> {
        let group = find_group(x, feature)?;
        let (lo, hi) = x.column_range(group.start);
        for &v in &grid {
            if v < lo || v > hi {
                return Err(InterpretError::GridOutOfRange { feature: feature.into(), value: v });
            }
        }
        Ok(GridSpec { feature: feature.into(), values: GridValues::Numeric(grid) })
    }
}

pub(crate) fn find_group<'x>(
    x: &'x FeatureMatrix,
    feature: &str,
) -> Result<&'x FeatureGroup, InterpretError> {
    x.group(feature).ok_or_else(|| InterpretError::UnknownFeature(feature.to_string()))
}

/// Sets a group to one grid value on every row of `x`.
pub(crate) fn apply_grid_value(
    x: &mut FeatureMatrix,
    group: &FeatureGroup,
    values: &GridValues,
    idx: usize,
) -> Result<(), InterpretError> {
    match (values, &group.kind) {
        (GridValues::Numeric(v), GroupKind::Numeric | GroupKind::Binary) => {
            x.fill_column(group.start, v[idx]);
            Ok(())
        }
        (GridValues::Categories(cats), GroupKind::Nominal { categories }) => {
            let slot = categories.iter().position(|c| c == &cats[idx]).ok_or_else(|| {
                InterpretError::BadRequest(format!(
                    "category '{}' not in feature '{}'",
                    cats[idx], group.name
                ))
            })?;
            x.fill_onehot(group, slot);
            Ok(())
        }
        (GridValues::Numeric(_), GroupKind::Nominal { .. }) => Err(InterpretError::WrongKind {
            feature: group.name.clone(),
            expected: "categorical grid",
            actual: "numeric grid",
        }),
        (GridValues::Categories(_), _) => Err(InterpretError::WrongKind {
            feature: group.name.clone(),
            expected: "numeric grid",
            actual: "categorical grid",
        }),
    }
}

/// Representative scalar for a group on one row, used in report tables:
/// the value itself for numeric and binary columns, the category index
/// for one-hot blocks.
pub(crate) fn group_scalar(x: &FeatureMatrix, row: usize, group: &FeatureGroup) -> f64 {
    match &group.kind {
        GroupKind::Numeric | GroupKind::Binary => x.get(row, group.start),
        GroupKind::Nominal { .. } => {
            for (slot, c) in group.columns().enumerate() {
                if x.get(row, c) == 1.0 {
                    return slot as f64;
                }
            }
            f64::NAN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_grid_within_range_and_sorted() {
        let x = FeatureMatrix::from_columns(
            vec!["a".into()],
            vec![(0..101).map(|i| (i as f64).powi(2)).collect()],
        );
        let grid = GridSpec::quantile(&x, "a", 20).unwrap();
        let GridValues::Numeric(vals) = &grid.values else { panic!() };
        assert!(vals.len() <= 20 && vals.len() >= 2);
        assert_eq!(vals[0], 0.0);
        assert_eq!(*vals.last().unwrap(), 10_000.0);
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unknown_feature_rejected() {
        let x = FeatureMatrix::from_columns(vec!["a".into()], vec![vec![1.0, 2.0]]);
        assert!(matches!(
            GridSpec::auto(&x, "zzz"),
            Err(InterpretError::UnknownFeature(_))
        ));
    }

    #[test]
    fn checked_numeric_rejects_out_of_range() {
        let x = FeatureMatrix::from_columns(vec!["a".into()], vec![vec![1.0, 2.0, 3.0]]);
        assert!(GridSpec::checked_numeric(&x, "a", vec![1.5, 2.5]).is_ok());
        assert!(matches!(
            GridSpec::checked_numeric(&x, "a", vec![0.5]),
            Err(InterpretError::GridOutOfRange { .. })
        ));
    }
}
