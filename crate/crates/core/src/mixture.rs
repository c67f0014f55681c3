//! Two-state mixture SSRT: with probability `w_a` a latency from component A
//! (stop trials preceded by a go trial), otherwise from component B.
//!
//! The weight is read two ways. Sampling treats it as a Bernoulli indicator
//! per draw; moments treat it as the constant proportion of type-A stop trials.

use crate::error::{Error, Result};
use crate::exgauss::{invert_cdf, ExGaussianParams, RawMoments, ShapeStats};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSsrt {
    pub w_a: f64,
    pub theta_a: ExGaussianParams,
    pub theta_b: ExGaussianParams,
}

impl MixtureSsrt {
    pub fn new(w_a: f64, theta_a: ExGaussianParams, theta_b: ExGaussianParams) -> Result<Self> {
        let m = MixtureSsrt { w_a, theta_a, theta_b };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_a) {
            return Err(Error::ParameterDomain(format!("w_a must lie in [0,1], got {}", self.w_a)));
        }
        self.theta_a.validate()?;
        self.theta_b.validate()
    }

    pub fn w_b(&self) -> f64 {
        1.0 - self.w_a
    }

    pub fn pdf(&self, t: f64) -> f64 {
        self.w_a * self.theta_a.pdf(t) + self.w_b() * self.theta_b.pdf(t)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.w_a * self.theta_a.cdf(t) + self.w_b() * self.theta_b.cdf(t)
    }

    pub fn sf(&self, t: f64) -> f64 {
        self.w_a * self.theta_a.sf(t) + self.w_b() * self.theta_b.sf(t)
    }

    /// Inverse of the mixture CDF (no closed form), bracketed by the
    /// component quantiles.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let qa = self.theta_a.quantile(p)?;
        let qb = self.theta_b.quantile(p)?;
        let scale = self.theta_a.sigma.max(self.theta_b.sigma) + self.theta_a.tau.max(self.theta_b.tau);
        Ok(invert_cdf(|t| self.cdf(t), |t| self.pdf(t), p, qa.min(qb), qa.max(qb), scale))
    }

    /// One draw and whether it came from component A.
    pub fn draw_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        let from_a = rng.random::<f64>() < self.w_a;
        let theta = if from_a { &self.theta_a } else { &self.theta_b };
        (theta.draw(rng), from_a)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw_labeled(rng).0
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(self.sample_with(n, &mut crate::rng::seeded(seed)))
    }

    pub fn mean(&self) -> f64 {
        self.w_a * self.theta_a.mean() + self.w_b() * self.theta_b.mean()
    }

    /// `E[M^k] = w_a E[A^k] + (1 - w_a) E[B^k]` for k = 1..4.
    pub fn moments(&self) -> RawMoments {
        self.theta_a.moments().mix(&self.theta_b.moments(), self.w_a)
    }

    /// Variance, skewness and kurtosis from the mixed raw moments.
    ///
    /// The raw moments are taken about the mixture mean (a location shift of
    /// both components), which leaves the shape statistics unchanged and keeps
    /// the fourth-moment expansion from cancelling catastrophically.
    pub fn shape(&self) -> ShapeStats {
        let c = self.mean();
        let a = self.theta_a.shifted(-c).moments();
        let b = self.theta_b.shifted(-c).moments();
        a.mix(&b, self.w_a).shape()
    }

    /// Law-of-total-variance form, `w Var_A + (1-w) Var_B + w(1-w)(E_A - E_B)^2`.
    pub fn variance_decomposed(&self) -> f64 {
        let (w, v) = (self.w_a, self.w_b());
        let d = self.theta_a.mean() - self.theta_b.mean();
        w * self.theta_a.shape().variance + v * self.theta_b.shape().variance + w * v * d * d
    }
}
