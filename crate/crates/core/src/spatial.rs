//! Scenario analysis in space: accessibility sensitivity curves, hexagonal
//! aggregation of predicted new trips, and the SPAEF similarity score
//! between value surfaces.
//!
//! Hexagons are pointy-top with axial (q, r) addressing and a configurable
//! flat-to-flat cell size (1000 m by default), origin at the data's
//! bounding-box minimum so maps from different models share cells. SPAEF
//! combines Pearson correlation α, the ratio of coefficients of variation
//! β, and the histogram-intersection fraction γ of z-scored values:
//! `1 − sqrt((α−1)² + (β−1)² + (γ−1)²)`.

use crate::dataset::FeatureMatrix;
use crate::interpret::find_group;
use crate::models::Predictor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFiniteCoordinate(f64, f64),
    #[error("maps use different grids")]
    GridMismatch,
    #[error("need at least 2 cells in the union, got {0}")]
    TooFewCells(usize),
    #[error("zero variance on map {0}")]
    ZeroVariance(&'static str),
    #[error("zero mean on map {0}; coefficient of variation undefined")]
    ZeroMean(&'static str),
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{0}' is not a single numeric column")]
    NotNumeric(String),
    #[error("deltas must be sorted ascending and start at 0")]
    BadDeltas,
    #[error("coordinate count {coords} does not match row count {rows}")]
    CoordinateMismatch { coords: usize, rows: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Interpret(#[from] crate::interpret::InterpretError),
}

/// Pointy-top hexagonal grid with axial coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexGrid {
    /// Flat-to-flat cell width in meters.
    pub cell_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl HexGrid {
    pub fn new(cell_size: f64, origin_x: f64, origin_y: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        HexGrid { cell_size, origin_x, origin_y }
    }

    /// Grid anchored at the bounding-box minimum of `points`.
    pub fn covering(points: &[(f64, f64)], cell_size: f64) -> Self {
        let (mut ox, mut oy) = (0.0f64, 0.0f64);
        if !points.is_empty() {
            ox = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            oy = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        }
        HexGrid::new(cell_size, ox, oy)
    }

    /// Circumradius: flat-to-flat width is `sqrt(3) · R` for pointy-top.
    fn radius(&self) -> f64 {
        self.cell_size / 3.0f64.sqrt()
    }

    /// Center of cell (q, r) in map units.
    pub fn center(&self, q: i64, r: i64) -> (f64, f64) {
        let rad = self.radius();
        (
            self.origin_x + rad * 3.0f64.sqrt() * (q as f64 + r as f64 / 2.0),
            self.origin_y + rad * 1.5 * r as f64,
        )
    }

    /// Cell containing a point: cube-rounded axial coordinates, then a
    /// nearest-center check over the neighborhood with ties broken toward
    /// the lowest (q, r).
    pub fn cell_of(&self, x: f64, y: f64) -> Result<(i64, i64), SpatialError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(SpatialError::NonFiniteCoordinate(x, y));
        }
        let rad = self.radius();
        let px = x - self.origin_x;
        let py = y - self.origin_y;
        let qf = (3.0f64.sqrt() / 3.0 * px - py / 3.0) / rad;
        let rf = (2.0 / 3.0 * py) / rad;
        let (q0, r0) = cube_round(qf, rf);

        let mut best = (q0, r0);
        let mut best_d2 = f64::INFINITY;
        let tol = 1e-9 * self.cell_size * self.cell_size;
        const NEIGHBORS: [(i64, i64); 7] =
            [(0, 0), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
        for (dq, dr) in NEIGHBORS {
            let cand = (q0 + dq, r0 + dr);
            let (cx, cy) = self.center(cand.0, cand.1);
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            if d2 + tol < best_d2 || ((d2 - best_d2).abs() <= tol && cand < best) {
                best = cand;
                best_d2 = d2.min(best_d2);
            }
        }
        Ok(best)
    }
}

fn cube_round(q: f64, r: f64) -> (i64, i64) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i64, rr as i64)
}

/// Values accumulated per hexagonal cell.
#[derive(Clone, Debug, PartialEq)]
pub struct HexMap {
    pub grid: HexGrid,
    pub cells: BTreeMap<(i64, i64), f64>,
}

impl HexMap {
    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }

    /// `q,r,center_x,center_y,value` CSV body, cells in (q, r) order.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("q,r,center_x,center_y,value\n");
        for (&(q, r), &v) in &self.cells {
            let (cx, cy) = self.grid.center(q, r);
            s.push_str(&format!("{q},{r},{cx},{cy},{v}\n"));
        }
        s
    }
}

/// Accumulates each point's value into its containing cell; the cell sums
/// conserve the input total exactly (same additions, grouped).
pub fn hex_bin(points: &[(f64, f64, f64)], grid: &HexGrid) -> Result<HexMap, SpatialError> {
    let mut cells: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for &(x, y, value) in points {
        let cell = grid.cell_of(x, y)?;
        *cells.entry(cell).or_insert(0.0) += value;
    }
    Ok(HexMap { grid: *grid, cells })
}

/// SPAEF decomposition between two maps on the same grid.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpaefComponents {
    /// Pearson correlation.
    pub alpha: f64,
    /// cv(A) / cv(B).
    pub beta: f64,
    /// Histogram-intersection fraction of z-scored values, in [0, 1].
    pub gamma: f64,
    pub bins: usize,
    pub score: f64,
    /// Set when the two maps share no cells (score computed on the
    /// zero-filled union anyway).
    pub disjoint_supports: bool,
}

/// SPAEF of map `a` against map `b` with an `n`-bin histogram for γ.
///
/// Values are compared on the union of cells with missing cells counted
/// as zero. The score is 1 only for a self-comparison; it is not
/// symmetric in general because β and γ are directional.
pub fn spaef(a: &HexMap, b: &HexMap, bins: usize) -> Result<SpaefComponents, SpatialError> {
    if a.grid != b.grid {
        return Err(SpatialError::GridMismatch);
    }
    let mut keys: Vec<(i64, i64)> = a.cells.keys().chain(b.cells.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.len() < 2 {
        return Err(SpatialError::TooFewCells(keys.len()));
    }
    let va: Vec<f64> = keys.iter().map(|k| a.cells.get(k).copied().unwrap_or(0.0)).collect();
    let vb: Vec<f64> = keys.iter().map(|k| b.cells.get(k).copied().unwrap_or(0.0)).collect();
    let disjoint = !a.cells.keys().any(|k| b.cells.contains_key(k));

    let n = keys.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (ma, mb) = (mean(&va), mean(&vb));
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let (sa, sb) = (var(&va, ma).sqrt(), var(&vb, mb).sqrt());
    if sa == 0.0 {
        return Err(SpatialError::ZeroVariance("A"));
    }
    if sb == 0.0 {
        return Err(SpatialError::ZeroVariance("B"));
    }
    if ma == 0.0 {
        return Err(SpatialError::ZeroMean("A"));
    }
    if mb == 0.0 {
        return Err(SpatialError::ZeroMean("B"));
    }

    let cov = va.iter().zip(&vb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let alpha = cov / (sa * sb);
    let beta = (sa / ma) / (sb / mb);

    // Histogram intersection of z-scored values over the combined range.
    let za: Vec<f64> = va.iter().map(|v| (v - ma) / sa).collect();
    let zb: Vec<f64> = vb.iter().map(|v| (v - mb) / sb).collect();
    let lo = za.iter().chain(&zb).fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = za.iter().chain(&zb).fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let bins = bins.max(1);
    let width = ((hi - lo) / bins as f64).max(1e-300);
    let histogram = |z: &[f64]| -> Vec<usize> {
        let mut h = vec![0usize; bins];
        for &v in z {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            h[idx] += 1;
        }
        h
    };
    let ha = histogram(&za);
    let hb = histogram(&zb);
    let inter: usize = ha.iter().zip(&hb).map(|(x, y)| x.min(y)).copied().sum();
    let gamma = inter as f64 / za.len() as f64;

    let score = 1.0
        - ((alpha - 1.0).powi(2) + (beta - 1.0).powi(2) + (gamma - 1.0).powi(2)).sqrt();
    Ok(SpaefComponents { alpha, beta, gamma, bins, score, disjoint_supports: disjoint })
}

/// Mean predicted new trips per person at each accessibility increment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub label: String,
    pub deltas: Vec<f64>,
    pub mean_new_trips: Vec<f64>,
}

fn access_column(x: &FeatureMatrix, feature: &str) -> Result<usize, SpatialError> {
    let group =
        find_group(x, feature).map_err(|_| SpatialError::UnknownFeature(feature.to_string()))?;
    if group.width != 1 {
        return Err(SpatialError::NotNumeric(feature.to_string()));
    }
    Ok(group.start)
}

fn check_deltas(deltas: &[f64]) -> Result<(), SpatialError> {
    let ascending = deltas.windows(2).all(|w| w[0] <= w[1]);
    if deltas.is_empty() || deltas[0] != 0.0 || !ascending {
        return Err(SpatialError::BadDeltas);
    }
    Ok(())
}

/// Per-person prediction changes after adding `delta` (scaled per row by
/// `per_row_scale` when given) to the accessibility feature.
fn prediction_deltas<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    col: usize,
    baseline: &[f64],
    delta: f64,
    per_row_scale: Option<&[f64]>,
) -> Result<Vec<f64>, SpatialError> {
    let mut shifted = x.clone();
    for i in 0..x.n_rows() {
        let scale = per_row_scale.map_or(1.0, |s| s[i]);
        shifted.set(i, col, x.get(i, col) + delta * scale);
    }
    let preds = model.predict_matrix(&shifted)?;
    Ok(preds.iter().zip(baseline).map(|(p, b)| p - b).collect())
}

/// Sensitivity curve over ascending accessibility increments (uniform per
/// person), starting at exactly 0 for delta 0.
pub fn sensitivity_curve<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    access_feature: &str,
    deltas: &[f64],
    label: impl Into<String>,
) -> Result<SensitivityCurve, SpatialError> {
    sensitivity_curve_scaled(model, x, access_feature, deltas, None, label)
}

/// Like [`sensitivity_curve`] but with a per-row increment multiplier —
/// the hook for spatially targeted (for instance per-zone) investments.
pub fn sensitivity_curve_scaled<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    access_feature: &str,
    deltas: &[f64],
    per_row_scale: Option<&[f64]>,
    label: impl Into<String>,
) -> Result<SensitivityCurve, SpatialError> {
    check_deltas(deltas)?;
    let col = access_column(x, access_feature)?;
    let baseline = model.predict_matrix(x)?;
    let n = x.n_rows() as f64;
    let mut mean_new_trips = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if d == 0.0 {
            mean_new_trips.push(0.0);
            continue;
        }
        let diffs = prediction_deltas(model, x, col, &baseline, d, per_row_scale)?;
        mean_new_trips.push(diffs.iter().sum::<f64>() / n);
    }
    Ok(SensitivityCurve { label: label.into(), deltas: deltas.to_vec(), mean_new_trips })
}

/// Per-person new trips at one increment, hex-binned at home locations.
pub fn new_trips_map<P: Predictor>(
    model: &P,
    x: &FeatureMatrix,
    access_feature: &str,
    delta: f64,
    coordinates: &[(f64, f64)],
    grid: &HexGrid,
) -> Result<HexMap, SpatialError> {
    if coordinates.len() != x.n_rows() {
        return Err(SpatialError::CoordinateMismatch {
            coords: coordinates.len(),
            rows: x.n_rows(),
        });
    }
    let col = access_column(x, access_feature)?;
    let baseline = model.predict_matrix(x)?;
    let diffs = if delta == 0.0 {
        vec![0.0; x.n_rows()]
    } else {
        prediction_deltas(model, x, col, &baseline, delta, None)?
    };
    let points: Vec<(f64, f64, f64)> = coordinates
        .iter()
        .zip(&diffs)
        .map(|(&(px, py), &v)| (px, py, v))
        .collect();
    hex_bin(&points, grid)
}
