//! Gravity-based transit accessibility: job counts discounted by a
//! travel-time impedance.
//!
//! The impedance weight is `180 / (90 + t) − 1` for `t < 90` minutes and 0
//! at or beyond 90, so it runs from 1 at `t = 0` through 0.5 at the
//! 30-minute median to 0 at the cutoff. Accessibility of an origin is the
//! impedance-weighted sum of jobs over all destinations.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AccessError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("negative travel time {0}")]
    NegativeTime(f64),
    #[error("destination axes mismatch: travel-time matrix has {matrix} zones, jobs vector has {jobs}")]
    AxisMismatch { matrix: usize, jobs: usize },
    #[error("destination zone order differs between travel-time matrix and jobs vector at position {0}")]
    ZoneOrderMismatch(usize),
    #[error("negative jobs count at zone '{0}'")]
    NegativeJobs(String),
    #[error("bad cell in {file} at line {line}: {message}")]
    BadCell { file: String, line: usize, message: String },
}

/// Impedance constants: `scale / (offset + t) − 1`, zero from `cutoff` on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub scale: f64,
    pub offset: f64,
    pub cutoff: f64,
}

impl Default for ImpedanceParams {
    fn default() -> Self {
        ImpedanceParams { scale: 180.0, offset: 90.0, cutoff: 90.0 }
    }
}

/// Travel-time weight in `[0, 1]` for a trip of `t` minutes.
///
/// Exactly at the cutoff the weight is 0 (the strict `< cutoff` branch).
pub fn impedance(t: f64, params: &ImpedanceParams) -> Result<f64, AccessError> {
    if t < 0.0 || !t.is_finite() {
        return Err(AccessError::NegativeTime(t));
    }
    if t < params.cutoff {
        Ok(params.scale / (params.offset + t) - 1.0)
    } else {
        Ok(0.0)
    }
}

/// Origin × destination travel times in minutes. Unreachable pairs are an
/// explicit sentinel (`None`), never a large finite time.
#[derive(Clone, Debug)]
pub struct TravelTimeMatrix {
    pub origins: Vec<String>,
    pub destinations: Vec<String>,
    /// Row-major origins × destinations; `None` = unreachable.
    pub minutes: Vec<Option<f64>>,
}

impl TravelTimeMatrix {
    pub fn get(&self, origin: usize, destination: usize) -> Option<f64> {
        self.minutes[origin * self.destinations.len() + destination]
    }

    /// Reads a long-format CSV `origin,destination,minutes`; an empty or
    /// `NA` minutes cell marks the pair unreachable. Zone order follows
    /// first appearance. Pairs absent from the file are unreachable.
    pub fn from_csv(path: &Path) -> Result<Self, AccessError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut origins: Vec<String> = Vec::new();
        let mut destinations: Vec<String> = Vec::new();
        let mut triples: Vec<(usize, usize, Option<f64>)> = Vec::new();
        let fname = path.display().to_string();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2; // header is line 1
            let o = record.get(0).unwrap_or("").trim().to_string();
            let d = record.get(1).unwrap_or("").trim().to_string();
            let raw = record.get(2).unwrap_or("").trim();
            let minutes = if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                None
            } else {
                let t: f64 = raw.parse().map_err(|_| AccessError::BadCell {
                    file: fname.clone(),
                    line,
                    message: format!("unparseable minutes '{raw}'"),
                })?;
                if t < 0.0 || !t.is_finite() {
                    return Err(AccessError::NegativeTime(t));
                }
                Some(t)
            };
            let oi = match origins.iter().position(|z| *z == o) {
                Some(i) => i,
                None => {
                    origins.push(o);
                    origins.len() - 1
                }
            };
            let di = match destinations.iter().position(|z| *z == d) {
                Some(i) => i,
                None => {
                    destinations.push(d);
                    destinations.len() - 1
                }
            };
            triples.push((oi, di, minutes));
        }
        let mut minutes = vec![None; origins.len() * destinations.len()];
        let width = destinations.len();
        for (oi, di, t) in triples {
            minutes[oi * width + di] = t;
        }
        Ok(TravelTimeMatrix { origins, destinations, minutes })
    }
}

/// Jobs available per destination zone.
#[derive(Clone, Debug)]
pub struct OpportunityVector {
    pub zones: Vec<String>,
    pub jobs: Vec<f64>,
}

impl OpportunityVector {
    /// Reads `zone,jobs` CSV.
    pub fn from_csv(path: &Path) -> Result<Self, AccessError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut zones = Vec::new();
        let mut jobs = Vec::new();
        let fname = path.display().to_string();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let zone = record.get(0).unwrap_or("").trim().to_string();
            let raw = record.get(1).unwrap_or("").trim();
            let j: f64 = raw.parse().map_err(|_| AccessError::BadCell {
                file: fname.clone(),
                line: i + 2,
                message: format!("unparseable jobs '{raw}'"),
            })?;
            if j < 0.0 || !j.is_finite() {
                return Err(AccessError::NegativeJobs(zone));
            }
            zones.push(zone);
            jobs.push(j);
        }
        Ok(OpportunityVector { zones, jobs })
    }
}

/// Accessibility score per origin zone, in job-equivalents.
#[derive(Clone, Debug)]
pub struct AccessibilityScore {
    pub zones: Vec<String>,
    pub access: Vec<f64>,
}

impl AccessibilityScore {
    /// `zone,access` CSV body.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("zone,access\n");
        for (z, a) in self.zones.iter().zip(&self.access) {
            s.push_str(&format!("{z},{a}\n"));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AccessError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

/// Accessibility of every origin: `A_i = Σ_j O_j · impedance(t_ij)`, with
/// unreachable pairs contributing nothing.
///
/// The jobs vector must cover the matrix's destination axis in the same
/// zone order.
pub fn gravity_accessibility(
    ttm: &TravelTimeMatrix,
    jobs: &OpportunityVector,
    params: &ImpedanceParams,
) -> Result<AccessibilityScore, AccessError> {
    if ttm.destinations.len() != jobs.zones.len() {
        return Err(AccessError::AxisMismatch {
            matrix: ttm.destinations.len(),
            jobs: jobs.zones.len(),
        });
    }
    if let Some(pos) = ttm.destinations.iter().zip(&jobs.zones).position(|(a, b)| a != b) {
        return Err(AccessError::ZoneOrderMismatch(pos));
    }
    if let Some(&j) = jobs.jobs.iter().find(|&&j| j < 0.0) {
        return Err(AccessError::NegativeJobs(format!("{j}")));
    }
    let mut access = Vec::with_capacity(ttm.origins.len());
    for oi in 0..ttm.origins.len() {
        let mut a = 0.0;
        for (di, &o_j) in jobs.jobs.iter().enumerate() {
            if let Some(t) = ttm.get(oi, di) {
                a += o_j * impedance(t, params)?;
            }
        }
        access.push(a);
    }
    Ok(AccessibilityScore { zones: ttm.origins.clone(), access })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ImpedanceParams {
        ImpedanceParams::default()
    }

    #[test]
    fn impedance_anchor_points() {
        assert_eq!(impedance(30.0, &params()).unwrap(), 0.5);
        assert_eq!(impedance(90.0, &params()).unwrap(), 0.0);
        assert_eq!(impedance(0.0, &params()).unwrap(), 1.0);
    }

    #[test]
    fn impedance_rejects_negative_time() {
        assert!(impedance(-1.0, &params()).is_err());
    }

    #[test]
    fn impedance_bounded_and_non_increasing() {
        let mut prev = 1.0;
        for i in 0..=1800 {
            let t = i as f64 * 0.1;
            let w = impedance(t, &params()).unwrap();
            assert!((0.0..=1.0).contains(&w), "w({t}) = {w}");
            assert!(w <= prev + 1e-15);
            prev = w;
        }
    }

    fn matrix(origins: usize, times: Vec<Option<f64>>, destinations: usize) -> TravelTimeMatrix {
        TravelTimeMatrix {
            origins: (0..origins).map(|i| format!("o{i}")).collect(),
            destinations: (0..destinations).map(|i| format!("d{i}")).collect(),
            minutes: times,
        }
    }

    fn jobs(values: Vec<f64>) -> OpportunityVector {
        OpportunityVector {
            zones: (0..values.len()).map(|i| format!("d{i}")).collect(),
            jobs: values,
        }
    }

    #[test]
    fn single_pair_halves_jobs_at_median_time() {
        let ttm = matrix(1, vec![Some(30.0)], 1);
        let score = gravity_accessibility(&ttm, &jobs(vec![1000.0]), &params()).unwrap();
        assert_eq!(score.access, vec![500.0]);
    }

    #[test]
    fn all_beyond_cutoff_zero() {
        let ttm = matrix(2, vec![Some(90.0), Some(120.0), Some(95.0), None], 2);
        let score = gravity_accessibility(&ttm, &jobs(vec![100.0, 200.0]), &params()).unwrap();
        assert_eq!(score.access, vec![0.0, 0.0]);
    }

    #[test]
    fn two_destination_hand_sum() {
        // t = (0, 30), O = (100, 1000): A = 100·1 + 1000·0.5 = 600.
        let ttm = matrix(1, vec![Some(0.0), Some(30.0)], 2);
        let score = gravity_accessibility(&ttm, &jobs(vec![100.0, 1000.0]), &params()).unwrap();
        assert_eq!(score.access, vec![600.0]);
    }

    #[test]
    fn axis_mismatch_rejected() {
        let ttm = matrix(1, vec![Some(0.0), Some(30.0)], 2);
        assert!(matches!(
            gravity_accessibility(&ttm, &jobs(vec![100.0]), &params()),
            Err(AccessError::AxisMismatch { .. })
        ));
    }

    #[test]
    fn monotone_in_travel_time() {
        // Decreasing any t never decreases any A.
        let base = matrix(1, vec![Some(40.0), Some(70.0)], 2);
        let o = jobs(vec![500.0, 800.0]);
        let a0 = gravity_accessibility(&base, &o, &params()).unwrap().access[0];
        let faster = matrix(1, vec![Some(20.0), Some(70.0)], 2);
        let a1 = gravity_accessibility(&faster, &o, &params()).unwrap().access[0];
        assert!(a1 >= a0);
    }

    #[test]
    fn additive_over_disjoint_destination_sets() {
        let both = matrix(1, vec![Some(10.0), Some(50.0)], 2);
        let o_both = jobs(vec![300.0, 700.0]);
        let total = gravity_accessibility(&both, &o_both, &params()).unwrap().access[0];

        let first = matrix(1, vec![Some(10.0)], 1);
        let second = TravelTimeMatrix {
            origins: vec!["o0".into()],
            destinations: vec!["d1".into()],
            minutes: vec![Some(50.0)],
        };
        let a = gravity_accessibility(&first, &jobs(vec![300.0]), &params()).unwrap().access[0];
        let b = gravity_accessibility(
            &second,
            &OpportunityVector { zones: vec!["d1".into()], jobs: vec![700.0] },
            &params(),
        )
        .unwrap()
        .access[0];
        assert!((total - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn bounded_by_total_jobs_with_equality_at_zero_time() {
        let ttm = matrix(1, vec![Some(0.0), Some(0.0)], 2);
        let o = jobs(vec![100.0, 200.0]);
        let score = gravity_accessibility(&ttm, &o, &params()).unwrap();
        assert_eq!(score.access[0], 300.0);
        let slower = matrix(1, vec![Some(1.0), Some(0.0)], 2);
        assert!(gravity_accessibility(&slower, &o, &params()).unwrap().access[0] < 300.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ttm_path = dir.path().join("ttm.csv");
        std::fs::write(
            &ttm_path,
            "origin,destination,minutes\nA,X,0\nA,Y,30\nB,X,NA\nB,Y,95\n",
        )
        .unwrap();
        let jobs_path = dir.path().join("jobs.csv");
        std::fs::write(&jobs_path, "zone,jobs\nX,100\nY,1000\n").unwrap();
        let ttm = TravelTimeMatrix::from_csv(&ttm_path).unwrap();
        let o = OpportunityVector::from_csv(&jobs_path).unwrap();
        let score = gravity_accessibility(&ttm, &o, &ImpedanceParams::default()).unwrap();
        assert_eq!(score.access, vec![600.0, 0.0]);
        let body = score.to_csv_string();
        assert_eq!(body, "zone,access\nA,600\nB,0\n");
    }
}
