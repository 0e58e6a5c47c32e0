//! Synthetic survey generator: zero-inflated (or hurdle) negative-binomial
//! trip counts over configurable feature distributions and a clustered
//! spatial layout. Stands in for confidential survey microdata at desk
//! scale.

use super::{ColumnData, ColumnKind, ColumnSpec, DataError, Dataset, Schema};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Marginal distribution of one generated feature column.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum FeatureDist {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
    Categorical { categories: Vec<String>, probs: Vec<f64> },
}

impl FeatureDist {
    fn encoded_width(&self) -> usize {
        match self {
            FeatureDist::Categorical { categories, .. } => categories.len(),
            _ => 1,
        }
    }

    fn column_kind(&self) -> ColumnKind {
        match self {
            FeatureDist::Normal { .. } | FeatureDist::Uniform { .. } => ColumnKind::Numeric,
            FeatureDist::Bernoulli { .. } => ColumnKind::Binary,
            FeatureDist::Categorical { categories, .. } => {
                ColumnKind::Nominal { categories: categories.clone() }
            }
        }
    }
}

/// One generated column: a name plus its distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthColumn {
    pub name: String,
    #[serde(flatten)]
    pub dist: FeatureDist,
}

/// Gaussian cluster of home locations, in projected meters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub sd: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// How zeros and counts are mixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMechanism {
    /// With probability π(x) emit a structural zero, otherwise draw
    /// NB(mean = exp(β·x), dispersion θ); sampling zeros remain possible.
    #[default]
    ZeroInflated,
    /// With probability π(x) emit zero, otherwise draw a zero-truncated
    /// NB(exp(β·x), θ); all zeros come from the gate.
    Hurdle,
}

/// Configuration of the synthetic generator.
///
/// Both coefficient vectors apply to the encoded feature vector with an
/// intercept prepended, in column order (one-hot blocks expand in schema
/// category order), so their length must be `1 + encoded width`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub columns: Vec<SynthColumn>,
    /// Logit coefficients of the structural-zero gate π(x).
    pub zero_coefs: Vec<f64>,
    /// Log-link coefficients of the count mean μ(x).
    pub count_coefs: Vec<f64>,
    /// Negative-binomial dispersion θ > 0.
    pub dispersion: f64,
    #[serde(default)]
    pub mechanism: CountMechanism,
    /// Spatial layout; empty means no coordinate columns are produced.
    #[serde(default)]
    pub clusters: Vec<ClusterSpec>,
    pub seed: u64,
    /// Name of the target column in the produced schema.
    #[serde(default = "default_target")]
    pub target_name: String,
}

fn default_target() -> String {
    "trips".into()
}

impl SynthConfig {
    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(|c| c.dist.encoded_width()).sum()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_rows == 0 {
            return Err(DataError::BadConfig("n_rows must be positive".into()));
        }
        if self.columns.is_empty() {
            return Err(DataError::BadConfig("at least one feature column required".into()));
        }
        if !(self.dispersion > 0.0) || !self.dispersion.is_finite() {
            return Err(DataError::BadConfig(format!(
                "dispersion must be > 0, got {}",
                self.dispersion
            )));
        }
        let want = 1 + self.encoded_width();
        for (label, coefs) in [("zero_coefs", &self.zero_coefs), ("count_coefs", &self.count_coefs)]
        {
            if coefs.len() != want {
                return Err(DataError::BadConfig(format!(
                    "{label} must have length {want} (intercept + encoded features), got {}",
                    coefs.len()
                )));
            }
        }
        for col in &self.columns {
            match &col.dist {
                FeatureDist::Normal { sd, .. } if !(*sd >= 0.0) => {
                    return Err(DataError::BadConfig(format!("column '{}': sd < 0", col.name)))
                }
                FeatureDist::Uniform { lo, hi } if !(hi > lo) => {
                    return Err(DataError::BadConfig(format!("column '{}': hi <= lo", col.name)))
                }
                FeatureDist::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                    return Err(DataError::BadConfig(format!("column '{}': p outside [0,1]", col.name)))
                }
                FeatureDist::Categorical { categories, probs } => {
                    if categories.len() < 2 || categories.len() != probs.len() {
                        return Err(DataError::BadConfig(format!(
                            "column '{}': categories/probs mismatch",
                            col.name
                        )));
                    }
                    if probs.iter().any(|&p| p < 0.0) {
                        return Err(DataError::BadConfig(format!(
                            "column '{}': negative probability",
                            col.name
                        )));
                    }
                    let total: f64 = probs.iter().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(DataError::BadConfig(format!(
                            "column '{}': probabilities sum to {total}, not 1",
                            col.name
                        )));
                    }
                }
                _ => {}
            }
        }
        for cl in &self.clusters {
            if !(cl.sd >= 0.0) || !(cl.weight > 0.0) {
                return Err(DataError::BadConfig("cluster sd must be >= 0 and weight > 0".into()));
            }
        }
        Ok(())
    }

    /// Schema of the datasets this generator produces.
    pub fn schema(&self) -> Schema {
        Schema {
            columns: self
                .columns
                .iter()
                .map(|c| ColumnSpec { name: c.name.clone(), kind: c.dist.column_kind() })
                .collect(),
            target: self.target_name.clone(),
            weight: None,
            coordinates: if self.clusters.is_empty() {
                None
            } else {
                Some(("x".into(), "y".into()))
            },
        }
    }
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Draws NB(mean = mu, dispersion = theta) as a gamma-mixed Poisson.
fn sample_nb(rng: &mut ChaCha8Rng, mu: f64, theta: f64) -> u32 {
    if mu <= 1e-12 {
        return 0;
    }
    let gamma = Gamma::new(theta, mu / theta).expect("validated theta/mu");
    let lambda: f64 = gamma.sample(rng);
    if lambda <= 1e-12 {
        return 0;
    }
    let pois = Poisson::new(lambda).expect("lambda > 0");
    let draw: f64 = pois.sample(rng);
    draw as u32
}

fn sample_truncated_nb(rng: &mut ChaCha8Rng, mu: f64, theta: f64) -> u32 {
    for _ in 0..100_000 {
        let y = sample_nb(rng, mu, theta);
        if y > 0 {
            return y;
        }
    }
    1 // unreachable for any practical mean; keeps the generator total
}

/// Generates a synthetic dataset per `config`; identical configs (same
/// seed) produce identical datasets.
///
/// Targets: with probability π(x) a structural zero, otherwise an NB draw
/// (zero-truncated under the hurdle mechanism), clipped to the survey
/// bound. Coordinates come from the weighted cluster mixture.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_rows;
    let width = config.encoded_width();

    let mut columns: Vec<ColumnData> = config
        .columns
        .iter()
        .map(|c| match &c.dist {
            FeatureDist::Normal { .. } | FeatureDist::Uniform { .. } => {
                ColumnData::Numeric(Vec::with_capacity(n))
            }
            FeatureDist::Bernoulli { .. } => ColumnData::Binary(Vec::with_capacity(n)),
            FeatureDist::Categorical { .. } => ColumnData::Nominal(Vec::with_capacity(n)),
        })
        .collect();
    let mut target: Vec<u32> = Vec::with_capacity(n);
    let mut coords: Vec<(f64, f64)> = Vec::with_capacity(n);
    let cluster_total: f64 = config.clusters.iter().map(|c| c.weight).sum();

    let mut encoded = vec![0.0f64; width];
    for _ in 0..n {
        // Features first, then the target draws, then coordinates; the
        // fixed order is what makes the generator reproducible.
        encoded.iter_mut().for_each(|v| *v = 0.0);
        let mut slot = 0usize;
        for (col, data) in config.columns.iter().zip(columns.iter_mut()) {
            match (&col.dist, data) {
                (FeatureDist::Normal { mean, sd }, ColumnData::Numeric(v)) => {
                    let d = Normal::new(*mean, *sd).expect("validated sd");
                    let x = d.sample(&mut rng);
                    v.push(x);
                    encoded[slot] = x;
                    slot += 1;
                }
                (FeatureDist::Uniform { lo, hi }, ColumnData::Numeric(v)) => {
                    let x = lo + (hi - lo) * rng.random::<f64>();
                    v.push(x);
                    encoded[slot] = x;
                    slot += 1;
                }
                (FeatureDist::Bernoulli { p }, ColumnData::Binary(v)) => {
                    let x = u8::from(rng.random::<f64>() < *p);
                    v.push(x);
                    encoded[slot] = x as f64;
                    slot += 1;
                }
                (FeatureDist::Categorical { categories, probs }, ColumnData::Nominal(v)) => {
                    let u = rng.random::<f64>();
                    let mut acc = 0.0;
                    let mut chosen = categories.len() - 1;
                    for (ci, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            chosen = ci;
                            break;
                        }
                    }
                    v.push(categories[chosen].clone());
                    encoded[slot + chosen] = 1.0;
                    slot += categories.len();
                }
                _ => unreachable!(),
            }
        }

        let eta_zero = config.zero_coefs[0]
            + config.zero_coefs[1..].iter().zip(&encoded).map(|(c, x)| c * x).sum::<f64>();
        let eta_count = config.count_coefs[0]
            + config.count_coefs[1..].iter().zip(&encoded).map(|(c, x)| c * x).sum::<f64>();
        let pi = sigmoid(eta_zero);
        let mu = eta_count.min(20.0).exp();

        let y = if rng.random::<f64>() < pi {
            0
        } else {
            match config.mechanism {
                CountMechanism::ZeroInflated => sample_nb(&mut rng, mu, config.dispersion),
                CountMechanism::Hurdle => sample_truncated_nb(&mut rng, mu, config.dispersion),
            }
        };
        target.push(y.min(super::TARGET_MAX));

        if !config.clusters.is_empty() {
            let u = rng.random::<f64>() * cluster_total;
            let mut acc = 0.0;
            let mut chosen = &config.clusters[config.clusters.len() - 1];
            for cl in &config.clusters {
                acc += cl.weight;
                if u < acc {
                    chosen = cl;
                    break;
                }
            }
            let nx = Normal::new(chosen.center_x, chosen.sd).expect("validated sd");
            let ny = Normal::new(chosen.center_y, chosen.sd).expect("validated sd");
            coords.push((nx.sample(&mut rng), ny.sample(&mut rng)));
        }
    }

    Dataset::from_parts(
        config.schema(),
        columns,
        target,
        None,
        if config.clusters.is_empty() { None } else { Some(coords) },
    )
}
