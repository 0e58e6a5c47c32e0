//! Nonparametric multiple-comparison statistics over a folds × algorithms
//! score table.
//!
//! The omnibus test is Friedman Aligned Ranks: scores are centered on
//! their fold mean, the `k·n` aligned values are ranked jointly (best
//! = 1, mid-ranks on ties), and
//!
//! ```text
//!       (k−1) · [ Σ_j R̂.j² − (k n²/4)(k n + 1)² ]
//! T = ─────────────────────────────────────────────
//!     [k n (k n + 1)(2 k n + 1)] / 6 − (1/k) Σ_i R̂i.²
//! ```
//!
//! with `R̂.j` the aligned-rank total of algorithm j and `R̂i.` of fold i;
//! the p-value is the chi-square upper tail at k−1 degrees of freedom.
//!
//! Pairwise follow-up compares mean aligned ranks with a normal
//! approximation, `z_uv = (R̄_u − R̄_v) / sqrt(k (k n + 1) / (6 n))` —
//! the source material for this pipeline never states its pairwise
//! statistic, so the choice is documented here, isolated in
//! [`pairwise_z`], and checked against a permutation oracle in the tests.
//! Raw p-values are then adjusted by Bergmann-Hommel (exhaustive-set
//! enumeration, `k ≤ 9`) or the Holm step-down fallback.

mod adjust;

pub use adjust::{bergmann_hommel, holm};

use crate::metrics::MetricKind;
use crate::special;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McompError {
    #[error("score matrix needs n >= 2 folds and k >= 2 algorithms, got {n} x {k}")]
    TooSmall { n: usize, k: usize },
    #[error("non-finite score at fold {fold}, algorithm {algorithm}")]
    NonFinite { fold: usize, algorithm: usize },
    #[error("negative chi-square statistic {0}")]
    NegativeStatistic(f64),
    #[error(
        "Bergmann-Hommel is limited to k <= 9 algorithms (got {0}); use the holm fallback"
    )]
    TooManyAlgorithms(usize),
    #[error("expected {expected} pairwise p-values for k = {k}, got {got}")]
    WrongPairCount { expected: usize, k: usize, got: usize },
    #[error("p-values must lie in [0, 1]")]
    BadPValue,
}

/// Which direction of a metric is better.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Orientation {
    pub fn of(metric: MetricKind) -> Self {
        if metric.higher_is_better() {
            Orientation::HigherBetter
        } else {
            Orientation::LowerBetter
        }
    }
}

/// n folds × k algorithms performance table for one metric.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    pub metric: String,
    pub orientation: Orientation,
    pub algorithms: Vec<String>,
    values: Vec<f64>, // row-major folds × algorithms
    n: usize,
    k: usize,
}

impl ScoreMatrix {
    /// `values` is row-major: one row per fold, one column per algorithm.
    pub fn new(
        metric: impl Into<String>,
        orientation: Orientation,
        algorithms: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, McompError> {
        let k = algorithms.len();
        let n = if k == 0 { 0 } else { values.len() / k };
        if n < 2 || k < 2 || values.len() != n * k {
            return Err(McompError::TooSmall { n, k });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(McompError::NonFinite { fold: pos / k, algorithm: pos % k });
        }
        Ok(ScoreMatrix { metric: metric.into(), orientation, algorithms, values, n, k })
    }

    pub fn n_folds(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, fold: usize, algorithm: usize) -> f64 {
        self.values[fold * self.k + algorithm]
    }
}

/// Fold-mean-aligned ranks of the full table.
#[derive(Clone, Debug)]
pub struct AlignedRanks {
    /// Row-major folds × algorithms, values in `[1, k·n]`.
    pub ranks: Vec<f64>,
    pub column_totals: Vec<f64>,
    pub row_totals: Vec<f64>,
    pub n: usize,
    pub k: usize,
}

impl AlignedRanks {
    pub fn mean_rank(&self, algorithm: usize) -> f64 {
        self.column_totals[algorithm] / self.n as f64
    }
}

/// Centers each fold on its mean and ranks all `k·n` aligned values
/// jointly, rank 1 = best under the matrix orientation, ties receiving
/// mid-ranks.
pub fn align_ranks(scores: &ScoreMatrix) -> AlignedRanks {
    let (n, k) = (scores.n, scores.k);
    let mut aligned = vec![0.0f64; n * k];
    for fold in 0..n {
        let mean: f64 = (0..k).map(|a| scores.get(fold, a)).sum::<f64>() / k as f64;
        for a in 0..k {
            aligned[fold * k + a] = scores.get(fold, a) - mean;
        }
    }
    // Sort indices so the best value comes first.
    let mut order: Vec<usize> = (0..n * k).collect();
    match scores.orientation {
        Orientation::HigherBetter => {
            order.sort_by(|&a, &b| aligned[b].partial_cmp(&aligned[a]).unwrap())
        }
        Orientation::LowerBetter => {
            order.sort_by(|&a, &b| aligned[a].partial_cmp(&aligned[b]).unwrap())
        }
    }
    // Mid-ranks over ties.
    let mut ranks = vec![0.0f64; n * k];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && aligned[order[j + 1]] == aligned[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &cell in &order[i..=j] {
            ranks[cell] = mid;
        }
        i = j + 1;
    }
    let column_totals: Vec<f64> =
        (0..k).map(|a| (0..n).map(|f| ranks[f * k + a]).sum()).collect();
    let row_totals: Vec<f64> = (0..n).map(|f| (0..k).map(|a| ranks[f * k + a]).sum()).collect();
    AlignedRanks { ranks, column_totals, row_totals, n, k }
}

/// Omnibus test outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmnibusResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Mean aligned rank per algorithm (lower = better).
    pub mean_ranks: Vec<f64>,
    /// Set when every score is tied and the statistic degenerates to 0.
    pub degenerate: bool,
}

/// Friedman Aligned Ranks omnibus test.
pub fn friedman_aligned(scores: &ScoreMatrix) -> Result<OmnibusResult, McompError> {
    let ranks = align_ranks(scores);
    let (n, k) = (ranks.n as f64, ranks.k as f64);
    let sum_col_sq: f64 = ranks.column_totals.iter().map(|r| r * r).sum();
    let sum_row_sq: f64 = ranks.row_totals.iter().map(|r| r * r).sum();
    let kn = k * n;
    let numerator = (k - 1.0) * (sum_col_sq - (k * n * n / 4.0) * (kn + 1.0) * (kn + 1.0));
    let denominator = kn * (kn + 1.0) * (2.0 * kn + 1.0) / 6.0 - sum_row_sq / k;
    let mean_ranks: Vec<f64> = (0..ranks.k).map(|a| ranks.mean_rank(a)).collect();
    let df = ranks.k - 1;
    let all_tied = ranks.ranks.windows(2).all(|w| w[0] == w[1]);
    if all_tied || denominator.abs() < 1e-9 {
        return Ok(OmnibusResult {
            statistic: 0.0,
            df,
            p_value: 1.0,
            mean_ranks,
            degenerate: true,
        });
    }
    let statistic = numerator / denominator;
    let p_value = chi2_upper_tail(statistic.max(0.0), df)?;
    Ok(OmnibusResult { statistic, df, p_value, mean_ranks, degenerate: false })
}

/// Upper-tail chi-square probability: the regularized upper incomplete
/// gamma at `(df/2, x/2)`, accurate to well under 1e-10 absolute.
pub fn chi2_upper_tail(x: f64, df: usize) -> Result<f64, McompError> {
    if x < 0.0 || !x.is_finite() {
        return Err(McompError::NegativeStatistic(x));
    }
    assert!(df >= 1, "chi-square needs df >= 1");
    Ok(special::gamma_q(df as f64 / 2.0, x / 2.0))
}

/// One pairwise comparison (indices into the algorithm list, `a < b`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairZ {
    pub a: usize,
    pub b: usize,
    pub z: f64,
    pub p_raw: f64,
}

/// Pairwise z statistics over mean aligned ranks with standard error
/// `sqrt(k (k n + 1) / (6 n))`, and their two-sided normal p-values.
pub fn pairwise_z(ranks: &AlignedRanks) -> Vec<PairZ> {
    let (n, k) = (ranks.n as f64, ranks.k as f64);
    let se = (k * (k * n + 1.0) / (6.0 * n)).sqrt();
    let mut out = Vec::with_capacity(ranks.k * (ranks.k - 1) / 2);
    for a in 0..ranks.k {
        for b in a + 1..ranks.k {
            let z = (ranks.mean_rank(a) - ranks.mean_rank(b)) / se;
            out.push(PairZ { a, b, z, p_raw: special::normal_two_sided(z) });
        }
    }
    out
}

/// Full pairwise post hoc report for one metric.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestReport {
    pub metric: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    /// α-decision on the omnibus hypothesis; the p-value is reported
    /// alongside so the analyst can weigh both.
    pub significant: bool,
    pub degenerate: bool,
    pub algorithms: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub pairs: Vec<PairRow>,
    /// Pairs whose adjusted p is at or above α — the "not significantly
    /// different" graph edges.
    pub insignificant_edges: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub z: f64,
    pub p_raw: f64,
    pub p_holm: f64,
    /// Absent when k > 9 (Bergmann-Hommel enumeration bound).
    pub p_bh: Option<f64>,
}

/// Runs the omnibus test and the pairwise post hoc with both adjustments;
/// the significance graph uses Bergmann-Hommel p-values when available,
/// Holm otherwise.
pub fn compare(scores: &ScoreMatrix, alpha: f64) -> Result<TestReport, McompError> {
    let omnibus = friedman_aligned(scores)?;
    let ranks = align_ranks(scores);
    let pairs = pairwise_z(&ranks);
    let raw: Vec<f64> = pairs.iter().map(|p| p.p_raw).collect();
    let p_holm = holm(&raw);
    let p_bh = if scores.k() <= 9 {
        Some(bergmann_hommel(&raw, scores.k())?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(pairs.len());
    let mut edges = Vec::new();
    for (i, pz) in pairs.iter().enumerate() {
        let adjusted = p_bh.as_ref().map_or(p_holm[i], |v| v[i]);
        if adjusted >= alpha {
            edges.push((
                scores.algorithms[pz.a].clone(),
                scores.algorithms[pz.b].clone(),
            ));
        }
        rows.push(PairRow {
            a: scores.algorithms[pz.a].clone(),
            b: scores.algorithms[pz.b].clone(),
            z: pz.z,
            p_raw: pz.p_raw,
            p_holm: p_holm[i],
            p_bh: p_bh.as_ref().map(|v| v[i]),
        });
    }
    Ok(TestReport {
        metric: scores.metric.clone(),
        statistic: omnibus.statistic,
        df: omnibus.df,
        p_value: omnibus.p_value,
        alpha,
        significant: omnibus.p_value < alpha,
        degenerate: omnibus.degenerate,
        algorithms: scores.algorithms.clone(),
        mean_ranks: omnibus.mean_ranks,
        pairs: rows,
        insignificant_edges: edges,
    })
}

impl TestReport {
    /// Square matrix of adjusted pairwise p-values (unit diagonal) as a
    /// CSV body — the heatmap companion of the report.
    pub fn adjusted_p_matrix_csv(&self) -> String {
        let k = self.algorithms.len();
        let mut grid = vec![1.0f64; k * k];
        let mut pair_iter = self.pairs.iter();
        for a in 0..k {
            for b in a + 1..k {
                let row = pair_iter.next().expect("pairs cover all a<b");
                let p = row.p_bh.unwrap_or(row.p_holm);
                grid[a * k + b] = p;
                grid[b * k + a] = p;
            }
        }
        let mut s = String::from("algorithm");
        for name in &self.algorithms {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for a in 0..k {
            s.push_str(&self.algorithms[a]);
            for b in 0..k {
                s.push_str(&format!(",{}", grid[a * k + b]));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_matrix() -> ScoreMatrix {
        // k = 2 algorithms, n = 2 folds, higher better.
        ScoreMatrix::new(
            "score",
            Orientation::HigherBetter,
            vec!["A".into(), "B".into()],
            vec![1.0, 0.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn hand_alignment_and_rank_totals() {
        let ranks = align_ranks(&hand_matrix());
        // Aligned values (0.5, −0.5; 0.5, −0.5) → ranks (1.5, 3.5; 1.5, 3.5).
        assert_eq!(ranks.ranks, vec![1.5, 3.5, 1.5, 3.5]);
        assert_eq!(ranks.column_totals, vec![3.0, 7.0]);
        assert_eq!(ranks.row_totals, vec![5.0, 5.0]);
    }

    #[test]
    fn rank_sum_invariant() {
        let ranks = align_ranks(&hand_matrix());
        let kn = (ranks.n * ranks.k) as f64;
        let total: f64 = ranks.ranks.iter().sum();
        assert_eq!(total, kn * (kn + 1.0) / 2.0);
    }

    #[test]
    fn all_tied_scores_get_mid_rank_everywhere() {
        let m = ScoreMatrix::new(
            "score",
            Orientation::LowerBetter,
            vec!["A".into(), "B".into(), "C".into()],
            vec![5.0; 9],
        )
        .unwrap();
        let ranks = align_ranks(&m);
        let kn = 9.0;
        assert!(ranks.ranks.iter().all(|&r| r == (kn + 1.0) / 2.0));
        let omnibus = friedman_aligned(&m).unwrap();
        assert!(omnibus.degenerate);
        assert_eq!(omnibus.statistic, 0.0);
        assert_eq!(omnibus.p_value, 1.0);
    }

    #[test]
    fn orientation_flip_reverses_ranks() {
        let values = vec![0.3, 0.7, 0.1, 0.9, 0.5, 0.2];
        let hi = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["A".into(), "B".into()],
            values.clone(),
        )
        .unwrap();
        let lo =
            ScoreMatrix::new("m", Orientation::LowerBetter, vec!["A".into(), "B".into()], values)
                .unwrap();
        let rh = align_ranks(&hi);
        let rl = align_ranks(&lo);
        let kn = (rh.n * rh.k) as f64;
        for (a, b) in rh.ranks.iter().zip(&rl.ranks) {
            assert_eq!(a + b, kn + 1.0);
        }
    }

    #[test]
    fn hand_omnibus_statistic_and_p() {
        let result = friedman_aligned(&hand_matrix()).unwrap();
        assert!((result.statistic - 1.6).abs() < 1e-12);
        assert_eq!(result.df, 1);
        assert!((result.p_value - 0.205_903_210_732_064_66).abs() < 1e-9);
    }

    #[test]
    fn chi2_anchors() {
        assert_eq!(chi2_upper_tail(0.0, 1).unwrap(), 1.0);
        assert_eq!(chi2_upper_tail(0.0, 7).unwrap(), 1.0);
        assert!((chi2_upper_tail(1.6, 1).unwrap() - 0.20590).abs() < 1e-5);
        assert!(chi2_upper_tail(100.0, 1).unwrap() < 1e-20);
        assert!(chi2_upper_tail(-1.0, 1).is_err());
    }

    #[test]
    fn chi2_matches_quadrature_oracle() {
        // Simpson integration of the chi-square density on [0, x] as an
        // independent route to the same tail. The substitution t = u²
        // removes the df = 1 singularity at zero: the transformed
        // integrand pdf(u²)·2u ∝ u^{df−1} e^{−u²/2} is smooth.
        fn integrand(df: f64, u: f64) -> f64 {
            if u <= 0.0 {
                return if df == 1.0 {
                    (2.0 / std::f64::consts::PI).sqrt()
                } else {
                    0.0
                };
            }
            let half = df / 2.0;
            let ln_pdf = -crate::special::ln_gamma(half) - half * 2.0f64.ln()
                + (half - 1.0) * (u * u).ln()
                - u * u / 2.0;
            2.0 * u * ln_pdf.exp()
        }
        for (x, df) in [(1.6f64, 1usize), (3.2, 2), (7.9, 4), (0.4, 3)] {
            let upper = x.sqrt();
            let steps = 100_000;
            let h = upper / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let a = i as f64 * h;
                acc += h / 6.0
                    * (integrand(df as f64, a)
                        + 4.0 * integrand(df as f64, a + h / 2.0)
                        + integrand(df as f64, a + h));
            }
            let oracle = 1.0 - acc;
            let got = chi2_upper_tail(x, df).unwrap();
            assert!(
                (got - oracle).abs() < 1e-8,
                "df {df}, x {x}: {got} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn pairwise_hand_case() {
        let ranks = align_ranks(&hand_matrix());
        let pairs = pairwise_z(&ranks);
        assert_eq!(pairs.len(), 1);
        let z_expected = -2.0 / (2.0 * 5.0 / 12.0f64).sqrt();
        assert!((pairs[0].z - z_expected).abs() < 1e-12);
        assert!((pairs[0].p_raw - 0.028_459_736_916_31).abs() < 1e-8);
    }

    #[test]
    fn pairwise_identical_columns_z_zero() {
        let m = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["A".into(), "B".into(), "C".into()],
            vec![0.5, 0.5, 0.9, 0.2, 0.2, 0.8, 0.4, 0.4, 0.6],
        )
        .unwrap();
        let pairs = pairwise_z(&align_ranks(&m));
        let ab = pairs.iter().find(|p| p.a == 0 && p.b == 1).unwrap();
        assert_eq!(ab.z, 0.0);
        assert_eq!(ab.p_raw, 1.0);
    }

    #[test]
    fn pairwise_antisymmetry_via_column_swap() {
        let m = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["A".into(), "B".into()],
            vec![0.9, 0.1, 0.8, 0.3, 0.7, 0.2],
        )
        .unwrap();
        let swapped = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["B".into(), "A".into()],
            vec![0.1, 0.9, 0.3, 0.8, 0.2, 0.7],
        )
        .unwrap();
        let za = pairwise_z(&align_ranks(&m))[0].z;
        let zb = pairwise_z(&align_ranks(&swapped))[0].z;
        assert!((za + zb).abs() < 1e-12);
    }

    #[test]
    fn omnibus_invariant_under_column_relabeling() {
        let values = vec![
            0.52, 0.58, 0.49, 0.55, 0.51, 0.59, 0.48, 0.56, 0.53, 0.57, 0.50, 0.54,
        ];
        let m = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            values.clone(),
        )
        .unwrap();
        // Swap columns 0 and 2 everywhere.
        let mut swapped = values;
        for fold in 0..3 {
            swapped.swap(fold * 4, fold * 4 + 2);
        }
        let m2 = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            vec!["C".into(), "B".into(), "A".into(), "D".into()],
            swapped,
        )
        .unwrap();
        let r1 = friedman_aligned(&m).unwrap();
        let r2 = friedman_aligned(&m2).unwrap();
        assert!((r1.statistic - r2.statistic).abs() < 1e-12);
        assert!((r1.p_value - r2.p_value).abs() < 1e-12);
    }

    #[test]
    fn dominant_algorithm_detected_and_matches_permutation_oracle() {
        // 4 algorithms × 6 folds; algorithm 0 dominates.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (n, k) = (6usize, 4usize);
        let mut values = vec![0.0f64; n * k];
        for fold in 0..n {
            for a in 0..k {
                let lift = if a == 0 { 0.3 } else { 0.0 };
                values[fold * k + a] = lift + 0.02 * rng.random::<f64>();
            }
        }
        let m = ScoreMatrix::new(
            "m",
            Orientation::HigherBetter,
            (0..k).map(|i| format!("alg{i}")).collect(),
            values.clone(),
        )
        .unwrap();
        let obs = friedman_aligned(&m).unwrap();
        assert!(obs.p_value < 0.05, "p = {}", obs.p_value);

        // Permutation oracle: shuffle within folds, compare T.
        let mut at_least = 0usize;
        let shuffles = 2000;
        let mut perm_values = values;
        for _ in 0..shuffles {
            for fold in 0..n {
                for a in (1..k).rev() {
                    let b = rng.random_range(0..=a);
                    perm_values.swap(fold * k + a, fold * k + b);
                }
            }
            let pm = ScoreMatrix::new(
                "m",
                Orientation::HigherBetter,
                (0..k).map(|i| format!("alg{i}")).collect(),
                perm_values.clone(),
            )
            .unwrap();
            if friedman_aligned(&pm).unwrap().statistic >= obs.statistic {
                at_least += 1;
            }
        }
        let p_perm = (1 + at_least) as f64 / (1 + shuffles) as f64;
        assert_eq!(p_perm < 0.05, obs.p_value < 0.05, "decisions disagree: {p_perm}");
    }

    #[test]
    fn compare_builds_full_report() {
        let m = ScoreMatrix::new(
            "rmse",
            Orientation::LowerBetter,
            vec!["A".into(), "B".into(), "C".into()],
            vec![0.5, 0.7, 0.9, 0.4, 0.8, 0.9, 0.45, 0.75, 0.95, 0.5, 0.7, 0.85],
        )
        .unwrap();
        let report = compare(&m, 0.05).unwrap();
        assert_eq!(report.pairs.len(), 3);
        for row in &report.pairs {
            assert!(row.p_holm >= row.p_raw - 1e-15);
            let bh = row.p_bh.unwrap();
            assert!(bh >= row.p_raw - 1e-15);
            assert!(bh <= row.p_holm + 1e-15);
        }
        let csv = report.adjusted_p_matrix_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("algorithm,A,B,C"));
    }
}
