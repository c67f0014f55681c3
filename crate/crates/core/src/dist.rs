//! A closed set of latency distributions that can be sampled and evaluated
//! by the stochastic-order tests and serialized to JSON.

use crate::error::Result;
use crate::exgauss::ExGaussianParams;
use crate::mixture::MixtureSsrt;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParametricDistribution {
    ExGaussian(ExGaussianParams),
    Mixture(MixtureSsrt),
}

impl ParametricDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricDistribution::ExGaussian(p) => p.validate(),
            ParametricDistribution::Mixture(m) => m.validate(),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ParametricDistribution::ExGaussian(p) => p.cdf(t),
            ParametricDistribution::Mixture(m) => m.cdf(t),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            ParametricDistribution::ExGaussian(d) => d.quantile(p),
            ParametricDistribution::Mixture(m) => m.quantile(p),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ParametricDistribution::ExGaussian(p) => p.mean(),
            ParametricDistribution::Mixture(m) => m.mean(),
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            ParametricDistribution::ExGaussian(p) => p.sample_with(n, rng),
            ParametricDistribution::Mixture(m) => m.sample_with(n, rng),
        }
    }

    /// The `n` mid-point quantiles `Q((i - 1/2)/n)`, i = 1..n.
    pub fn quantile_grid(&self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|i| self.quantile((i as f64 + 0.5) / n as f64))
            .collect()
    }
}

impl From<ExGaussianParams> for ParametricDistribution {
    fn from(p: ExGaussianParams) -> Self {
        ParametricDistribution::ExGaussian(p)
    }
}

impl From<MixtureSsrt> for ParametricDistribution {
    fn from(m: MixtureSsrt) -> Self {
        ParametricDistribution::Mixture(m)
    }
}
