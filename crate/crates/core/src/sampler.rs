//! Discrete heavy-tailed samplers driven by a precomputed CDF.
//!
//! Every sampler here draws by inverse transform: one uniform variate and a
//! binary search over the cumulative table. The final CDF bucket is set to
//! exactly 1 so no variate can fall past the end of the support.

use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("power-law exponent must be > 1, got {0}")]
    Exponent(f64),
    #[error("maximal value must be >= 1")]
    EmptySupport,
    #[error("head cut {head_cut} must satisfy 1 <= head_cut <= max_level {max_level}")]
    HeadCut { head_cut: u64, max_level: u64 },
    #[error("mixture weights must be finite, non-negative and sum to 1, got {0:?}")]
    Weights([f64; 3]),
    #[error("round-lot multiple {multiple} exceeds maximal volume {v_max}")]
    MultipleTooLarge { multiple: u64, v_max: u64 },
}

/// Table-driven sampler over `values[i]` with probabilities `pmf[i]`.
#[derive(Debug, Clone)]
pub struct DiscreteCdf {
    values: Vec<u64>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteCdf {
    /// Builds the table from unnormalized non-negative weights.
    pub fn from_weights(values: Vec<u64>, weights: &[f64]) -> Self {
        assert_eq!(values.len(), weights.len());
        assert!(!values.is_empty());
        let z: f64 = weights.iter().sum();
        let pmf: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        DiscreteCdf { values, pmf, cdf }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of a single value (0 outside the support).
    pub fn prob(&self, value: u64) -> f64 {
        self.values.binary_search(&value).map_or(0.0, |i| self.pmf[i])
    }

    /// Exact expectation over the support.
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.pmf).map(|(&v, &p)| v as f64 * p).sum()
    }

    pub fn max_value(&self) -> u64 {
        *self.values.last().unwrap()
    }
}

impl Distribution<u64> for DiscreteCdf {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Bounded discrete power law `P(v) ∝ v^-gamma` on `1..=v_max`.
#[derive(Debug, Clone)]
pub struct PowerLaw {
    gamma: f64,
    table: DiscreteCdf,
}

impl PowerLaw {
    pub fn new(gamma: f64, v_max: u64) -> Result<Self, ModelError> {
        Self::on_multiples(gamma, 1, v_max)
    }

    /// Power law over the multiples `m, 2m, ..` up to `v_max`, with the
    /// exponent applied to the multiple index: `P(j m) ∝ j^-gamma`.
    pub fn on_multiples(gamma: f64, multiple: u64, v_max: u64) -> Result<Self, ModelError> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(ModelError::Exponent(gamma));
        }
        if v_max == 0 || multiple == 0 {
            return Err(ModelError::EmptySupport);
        }
        if multiple > v_max {
            return Err(ModelError::MultipleTooLarge { multiple, v_max });
        }
        let n = v_max / multiple;
        let values: Vec<u64> = (1..=n).map(|j| j * multiple).collect();
        let weights: Vec<f64> = (1..=n).map(|j| (j as f64).powf(-gamma)).collect();
        Ok(PowerLaw { gamma, table: DiscreteCdf::from_weights(values, &weights) })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn table(&self) -> &DiscreteCdf {
        &self.table
    }

    pub fn mean(&self) -> f64 {
        self.table.mean()
    }
}

impl Distribution<u64> for PowerLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.table.sample(rng)
    }
}

/// Draws one value from `PowerLaw(gamma, v_max)`.
///
/// Builds the table on every call; hold a [`PowerLaw`] for repeated draws.
pub fn sample_power_law<R: Rng + ?Sized>(gamma: f64, v_max: u64, rng: &mut R) -> Result<u64, ModelError> {
    Ok(PowerLaw::new(gamma, v_max)?.sample(rng))
}

/// Order volume law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VolumeModel {
    PowerLaw {
        gamma: f64,
        v_max: u64,
    },
    /// Components are non-round volumes (any integer), multiples of 10 and
    /// multiples of 100, each a power law over its multiple index.
    RoundLotMixture {
        weights: [f64; 3],
        exponents: [f64; 3],
        v_max: u64,
    },
}

/// Lot multiples of the three round-lot mixture components.
pub const ROUND_LOT_MULTIPLES: [u64; 3] = [1, 10, 100];

impl VolumeModel {
    pub fn v_max(&self) -> u64 {
        match *self {
            VolumeModel::PowerLaw { v_max, .. } | VolumeModel::RoundLotMixture { v_max, .. } => v_max,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.sampler().map(|_| ())
    }

    /// Compiles the model into a sampling table.
    pub fn sampler(&self) -> Result<VolumeSampler, ModelError> {
        match *self {
            VolumeModel::PowerLaw { gamma, v_max } => Ok(VolumeSampler::Single(PowerLaw::new(gamma, v_max)?)),
            VolumeModel::RoundLotMixture { weights, exponents, v_max } => {
                let sum: f64 = weights.iter().sum();
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(ModelError::Weights(weights));
                }
                let mut components = Vec::with_capacity(3);
                for ((&w, &g), &m) in weights.iter().zip(&exponents).zip(&ROUND_LOT_MULTIPLES) {
                    let law = PowerLaw::on_multiples(g, m, v_max)?;
                    components.push((w, law));
                }
                let pick = DiscreteCdf::from_weights(vec![0, 1, 2], &weights);
                Ok(VolumeSampler::Mixture { pick, components })
            }
        }
    }
}

/// Compiled [`VolumeModel`].
#[derive(Debug, Clone)]
pub enum VolumeSampler {
    Single(PowerLaw),
    Mixture { pick: DiscreteCdf, components: Vec<(f64, PowerLaw)> },
}

impl VolumeSampler {
    /// Exact expected volume.
    pub fn mean(&self) -> f64 {
        match self {
            VolumeSampler::Single(p) => p.mean(),
            VolumeSampler::Mixture { components, .. } => components.iter().map(|(w, p)| w * p.mean()).sum(),
        }
    }

    /// Exact probability of one volume value.
    pub fn prob(&self, v: u64) -> f64 {
        match self {
            VolumeSampler::Single(p) => p.table().prob(v),
            VolumeSampler::Mixture { components, .. } => components.iter().map(|(w, p)| w * p.table().prob(v)).sum(),
        }
    }

    pub fn max_value(&self) -> u64 {
        match self {
            VolumeSampler::Single(p) => p.table().max_value(),
            VolumeSampler::Mixture { components, .. } => {
                components.iter().map(|(_, p)| p.table().max_value()).max().unwrap_or(1)
            }
        }
    }
}

impl Distribution<u64> for VolumeSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            VolumeSampler::Single(p) => p.sample(rng),
            VolumeSampler::Mixture { pick, components } => {
                let c = pick.sample(rng) as usize;
                components[c].1.sample(rng)
            }
        }
    }
}

/// Submission level law: flat for `l <= head_cut`, `(l / head_cut)^-mu` beyond,
/// normalized over `1..=max_level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelModel {
    pub mu: f64,
    pub head_cut: u64,
    pub max_level: u64,
}

impl Default for LevelModel {
    fn default() -> Self {
        LevelModel { mu: 2.5, head_cut: 10, max_level: 1000 }
    }
}

impl LevelModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mu.is_finite() && self.mu > 1.0) {
            return Err(ModelError::Exponent(self.mu));
        }
        if self.head_cut == 0 || self.head_cut > self.max_level {
            return Err(ModelError::HeadCut { head_cut: self.head_cut, max_level: self.max_level });
        }
        Ok(())
    }

    pub fn weight(&self, level: u64) -> f64 {
        if level <= self.head_cut {
            1.0
        } else {
            (level as f64 / self.head_cut as f64).powf(-self.mu)
        }
    }

    pub fn sampler(&self) -> Result<DiscreteCdf, ModelError> {
        self.validate()?;
        let values: Vec<u64> = (1..=self.max_level).collect();
        let weights: Vec<f64> = values.iter().map(|&l| self.weight(l)).collect();
        Ok(DiscreteCdf::from_weights(values, &weights))
    }
}
