//! Gaussian likelihood of replicate stress–strain data given θ.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::CachedModel;

/// How the noise std of each size is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Pooled across-replicate std of the data at each size.
    PooledPerSize,
    /// One std for every point (GPa).
    Fixed(f64),
    /// Explicit (size, std) pairs.
    PerSize(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LikelihoodSpec {
    pub noise: NoiseSpec,
    /// Use every `stride`-th data point of each curve.
    pub stride: usize,
}

impl Default for LikelihoodSpec {
    fn default() -> Self {
        Self {
            noise: NoiseSpec::PooledPerSize,
            stride: 1,
        }
    }
}

/// Data points of one size with their noise std.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBlock {
    pub size: f64,
    pub sigma: f64,
    /// One (strain, stress) list per replicate.
    pub replicates: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SizeBlock {
    pub fn n_points(&self) -> usize {
        self.replicates.iter().map(|r| r.0.len()).sum()
    }
}

/// Training data bound to a noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct Likelihood {
    pub blocks: Vec<SizeBlock>,
}

impl Likelihood {
    pub fn new(training: &Dataset, spec: &LikelihoodSpec) -> Result<Self> {
        if spec.stride == 0 {
            return Err(Error::InvalidConfig("likelihood stride must be >= 1".into()));
        }
        let noise = training.noise_summary();
        let blocks = training
            .sizes()
            .into_iter()
            .zip(noise)
            .map(|(size, n)| {
                let sigma = match &spec.noise {
                    NoiseSpec::PooledPerSize => n.pooled_std,
                    NoiseSpec::Fixed(s) => *s,
                    NoiseSpec::PerSize(pairs) => pairs
                        .iter()
                        .find(|(l, _)| (l - size).abs() <= 1e-9 * size)
                        .map(|p| p.1)
                        .ok_or(Error::MissingSize(size))?,
                };
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "noise std at size {size} must be > 0, got {sigma} (a single replicate gives no pooled spread)"
                    )));
                }
                let replicates = training
                    .curves_for(size)
                    .into_iter()
                    .map(|c| {
                        let strain = c.strain.iter().step_by(spec.stride).copied().collect();
                        let stress = c.stress.iter().step_by(spec.stride).copied().collect();
                        (strain, stress)
                    })
                    .collect();
                Ok(SizeBlock {
                    size,
                    sigma,
                    replicates,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    /// Log-likelihood at θ; solver failures give −∞.
    pub fn log_likelihood(&self, theta: &[f64], model: &CachedModel) -> f64 {
        let mut total = 0.0;
        for block in &self.blocks {
            let curve = match model.curve(theta, block.size) {
                Ok(c) => c,
                Err(e) => {
                    debug!("likelihood at {theta:?}, L = {}: {e}", block.size);
                    return f64::NEG_INFINITY;
                }
            };
            for (strain, stress) in &block.replicates {
                let residuals = strain.iter().zip(stress).map(|(&e, &d)| curve.interpolate(e) - d);
                total += gaussian_log_likelihood(residuals, block.sigma);
            }
        }
        total
    }
}

/// Σ [−½ ln 2π − ln σ − ½ (r/σ)²] over the residuals.
pub fn gaussian_log_likelihood<I: IntoIterator<Item = f64>>(residuals: I, sigma: f64) -> f64 {
    let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln();
    let mut n = 0usize;
    let mut ss = 0.0;
    for r in residuals {
        n += 1;
        ss += r * r;
    }
    n as f64 * c - 0.5 * ss / (sigma * sigma)
}
