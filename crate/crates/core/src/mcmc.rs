//! Componentwise adaptive random-walk Metropolis, split R-hat and posterior
//! summaries. Shared by the individual and two-stage fits.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    /// Per-coordinate acceptance rate the step sizes are tuned toward.
    pub target_accept: f64,
    /// Iterations per adaptation batch during burn-in.
    pub adapt_interval: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_iter: 20_000, n_burn: 5_000, target_accept: 0.44, adapt_interval: 50 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Precondition(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.n_burn, self.n_iter
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) || self.adapt_interval == 0 {
            return Err(Error::Precondition("invalid adaptation settings".into()));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        self.n_iter - self.n_burn
    }
}

/// Post-burn-in draws of one chain, stored row-major (`n_kept x dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub dim: usize,
    pub draws: Vec<f64>,
    /// Post-burn-in acceptance rate per coordinate.
    pub acceptance: Vec<f64>,
    /// Frozen proposal standard deviations.
    pub step_sizes: Vec<f64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

/// Runs one chain. `log_target` may return `-inf` to reject; coordinates
/// leaving `[lo_j, hi_j]` are rejected without evaluating the target.
pub fn componentwise_metropolis<F, R>(
    mut log_target: F,
    init: &[f64],
    init_steps: &[f64],
    bounds: &[(f64, f64)],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Chain>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let dim = init.len();
    if init_steps.len() != dim || bounds.len() != dim {
        return Err(Error::Precondition("dimension mismatch in sampler inputs".into()));
    }
    let mut x = init.to_vec();
    let mut lp = log_target(&x);
    if !lp.is_finite() {
        return Err(Error::Precondition("log target is not finite at the initial point".into()));
    }
    let mut log_step: Vec<f64> = init_steps.iter().map(|s| s.ln()).collect();
    let mut batch_accepts = vec![0usize; dim];
    let mut kept_accepts = vec![0usize; dim];
    let mut draws = Vec::with_capacity(cfg.n_kept() * dim);
    let mut batch = 0usize;

    for iter in 0..cfg.n_iter {
        for j in 0..dim {
            let old = x[j];
            let z: f64 = rng.sample(StandardNormal);
            let prop = old + log_step[j].exp() * z;
            let (lo, hi) = bounds[j];
            let accept = if prop < lo || prop > hi {
                // consume the uniform anyway so the stream layout is state-independent
                let _ = rng.random::<f64>();
                false
            } else {
                x[j] = prop;
                let lp_new = log_target(&x);
                let u: f64 = rng.random();
                if lp_new.is_finite() && u.ln() < lp_new - lp {
                    lp = lp_new;
                    true
                } else {
                    x[j] = old;
                    false
                }
            };
            if accept {
                if iter < cfg.n_burn {
                    batch_accepts[j] += 1;
                } else {
                    kept_accepts[j] += 1;
                }
            }
        }
        if iter < cfg.n_burn && (iter + 1) % cfg.adapt_interval == 0 {
            batch += 1;
            let delta = (1.0 / (batch as f64).sqrt()).min(0.5);
            for j in 0..dim {
                let rate = batch_accepts[j] as f64 / cfg.adapt_interval as f64;
                log_step[j] += if rate > cfg.target_accept { delta } else { -delta };
                batch_accepts[j] = 0;
            }
        }
        if iter >= cfg.n_burn {
            draws.extend_from_slice(&x);
        }
    }
    let kept = cfg.n_kept() as f64;
    Ok(Chain {
        dim,
        draws,
        acceptance: kept_accepts.iter().map(|&a| a as f64 / kept).collect(),
        step_sizes: log_step.iter().map(|s| s.exp()).collect(),
    })
}

/// Split R-hat (each chain halved) for one scalar quantity.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .filter(|h| h.len() >= 2)
        .collect();
    if halves.len() < 2 {
        return f64::NAN;
    }
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Mean, standard deviation and central 95% interval of a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub rhat: f64,
}

impl Summary {
    pub fn covers(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

pub fn summarize(chains: &[Vec<f64>]) -> Summary {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let sd = if all.len() > 1 { (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    let q = |p: f64| crate::indices::quantile_linear(&all, p).unwrap_or(f64::NAN);
    Summary { mean, sd, q025: q(0.025), q975: q(0.975), rhat: split_rhat(chains) }
}

/// Summaries of every coordinate across chains.
pub fn summarize_chains(chains: &[Chain]) -> Vec<Summary> {
    let dim = chains.first().map_or(0, |c| c.dim);
    (0..dim)
        .map(|j| summarize(&chains.iter().map(|c| c.column(j)).collect::<Vec<_>>()))
        .collect()
}
