//! The Ex-Gaussian distribution: the sum of a `Normal(mu, sigma^2)` and an
//! independent `Exponential` with mean `tau`.
//!
//! Densities are evaluated in log space. The textbook form
//! `(1/tau) exp((mu - t)/tau + sigma^2/(2 tau^2)) Phi((t - mu)/sigma - sigma/tau)`
//! overflows in the exponential when `sigma/tau` is large while the `Phi` factor
//! underflows; combining `ln Phi` with the exponent keeps both finite.

use crate::error::{Error, Result};
use crate::special::{log_add_exp, log_ndtr};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

/// Lower bound of the uniform parameter prior used for SSRT/GORT fits (ms).
pub const PRIOR_LO: f64 = 10.0;
/// Upper bound of the uniform parameter prior used for SSRT/GORT fits (ms).
pub const PRIOR_HI: f64 = 2000.0;

/// Parameters `(mu, sigma, tau)` of one Ex-Gaussian distribution, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExGaussianParams {
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
}

/// The first four raw (non-central) moments `E[X^k]`, k = 1..4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMoments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (3 for a Gaussian).
    pub kurtosis: f64,
}

impl RawMoments {
    /// Variance, skewness and kurtosis from raw moments:
    /// `Var = E2 - E1^2`,
    /// `gamma = (E3 - 3 E1 E2 + 2 E1^3) / Var^(3/2)`,
    /// `kappa = (E4 - 4 E1 E3 + 6 E1^2 E2 - 3 E1^4) / Var^2`.
    pub fn shape(&self) -> ShapeStats {
        let (e1, e2, e3, e4) = (self.m1, self.m2, self.m3, self.m4);
        let variance = e2 - e1 * e1;
        let third = e3 - 3.0 * e1 * e2 + 2.0 * e1.powi(3);
        let fourth = e4 - 4.0 * e1 * e3 + 6.0 * e1 * e1 * e2 - 3.0 * e1.powi(4);
        ShapeStats {
            variance,
            skewness: third / variance.powf(1.5),
            kurtosis: fourth / (variance * variance),
        }
    }

    /// Weighted combination `w * self + (1 - w) * other`, moment by moment.
    pub fn mix(&self, other: &RawMoments, w: f64) -> RawMoments {
        let v = 1.0 - w;
        RawMoments {
            m1: w * self.m1 + v * other.m1,
            m2: w * self.m2 + v * other.m2,
            m3: w * self.m3 + v * other.m3,
            m4: w * self.m4 + v * other.m4,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }
}

impl ExGaussianParams {
    pub fn new(mu: f64, sigma: f64, tau: f64) -> Result<Self> {
        let p = ExGaussianParams { mu, sigma, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::ParameterDomain(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::ParameterDomain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::ParameterDomain(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// True when every parameter lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        [self.mu, self.sigma, self.tau]
            .iter()
            .all(|&v| (lo..=hi).contains(&v))
    }

    pub fn shifted(&self, c: f64) -> Self {
        ExGaussianParams { mu: self.mu + c, ..*self }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.mu, self.sigma, self.tau]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ExGaussianParams { mu: a[0], sigma: a[1], tau: a[2] }
    }

    /// `ln(exp((mu - t)/tau + sigma^2/(2 tau^2)) * Phi((t - mu)/sigma - sigma/tau))`
    #[inline]
    fn ln_exp_term(&self, u: f64, r: f64) -> f64 {
        -u * r + 0.5 * r * r + log_ndtr(u - r)
    }

    #[inline]
    pub fn ln_pdf(&self, t: f64) -> f64 {
        let u = (t - self.mu) / self.sigma;
        let r = self.sigma / self.tau;
        -self.tau.ln() + self.ln_exp_term(u, r)
    }

    pub fn pdf(&self, t: f64) -> f64 {
        self.ln_pdf(t).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 1.0;
        }
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        let u = (t - self.mu) / self.sigma;
        let r = self.sigma / self.tau;
        let ln_phi = log_ndtr(u);
        let b = self.ln_exp_term(u, r);
        // F = Phi(u) - e^b with e^b < Phi(u)
        (ln_phi.exp() * -(b - ln_phi).exp_m1()).clamp(0.0, 1.0)
    }

    /// Survival function `1 - F(t)`, computed as a sum of two positive terms.
    pub fn sf(&self, t: f64) -> f64 {
        self.ln_sf(t).exp()
    }

    #[inline]
    pub fn ln_cdf(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 0.0;
        }
        if t == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let u = (t - self.mu) / self.sigma;
        let r = self.sigma / self.tau;
        let ln_phi = log_ndtr(u);
        let b = self.ln_exp_term(u, r);
        (ln_phi + (-(b - ln_phi).exp_m1()).ln()).min(0.0)
    }

    pub fn ln_sf(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        if t == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        let u = (t - self.mu) / self.sigma;
        let r = self.sigma / self.tau;
        log_add_exp(log_ndtr(-u), self.ln_exp_term(u, r)).min(0.0)
    }

    /// Inverse CDF by safeguarded Newton iteration inside a bisection bracket.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0,1), got {p}")));
        }
        let lo = self.mu - 10.0 * self.sigma;
        let hi = self.mu + 10.0 * self.sigma + 100.0 * self.tau;
        Ok(invert_cdf(|t| self.cdf(t), |t| self.pdf(t), p, lo, hi, self.sigma + self.tau))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = Normal::new(self.mu, self.sigma).expect("validated sigma");
        let exp = Exp::new(1.0 / self.tau).expect("validated tau");
        normal.sample(rng) + exp.sample(rng)
    }

    /// `n` draws as Normal + Exponential variates from `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(self.mu, self.sigma).expect("validated sigma");
        let exp = Exp::new(1.0 / self.tau).expect("validated tau");
        (0..n).map(|_| normal.sample(rng) + exp.sample(rng)).collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(self.sample_with(n, &mut crate::rng::seeded(seed)))
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.tau
    }

    /// Closed-form raw moments of orders 1 through 4.
    pub fn moments(&self) -> RawMoments {
        let (m, s, t) = (self.mu, self.sigma, self.tau);
        let (s2, t2) = (s * s, t * t);
        RawMoments {
            m1: m + t,
            m2: m * m + 2.0 * m * t + s2 + 2.0 * t2,
            m3: m.powi(3) + 3.0 * m * s2 + 6.0 * m * t2 + 3.0 * m * m * t + 3.0 * s2 * t
                + 6.0 * t.powi(3),
            m4: m.powi(4)
                + 4.0 * m.powi(3) * t
                + 6.0 * m * m * s2
                + 12.0 * m * m * t2
                + 24.0 * m * t.powi(3)
                + 12.0 * m * s2 * t
                + 3.0 * s2 * s2
                + 12.0 * s2 * t2
                + 24.0 * t2 * t2,
        }
    }

    /// Closed-form variance, skewness and kurtosis.
    pub fn shape(&self) -> ShapeStats {
        let (s2, t2) = (self.sigma * self.sigma, self.tau * self.tau);
        let variance = s2 + t2;
        // 2 (1 + sigma^2/tau^2)^(-3/2)
        let skewness = 2.0 * (1.0 + s2 / t2).powf(-1.5);
        // 3 (1 + 2 tau^2/sigma^2 + 3 tau^4/sigma^4) / (1 + tau^2/sigma^2)^2, scaled by sigma^4
        let kurtosis = 3.0 * (s2 * s2 + 2.0 * s2 * t2 + 3.0 * t2 * t2) / (variance * variance);
        ShapeStats { variance, skewness, kurtosis }
    }
}

/// Root of `cdf(t) = p` given a starting bracket that is widened if needed.
pub(crate) fn invert_cdf<C, D>(cdf: C, pdf: D, p: f64, mut lo: f64, mut hi: f64, scale: f64) -> f64
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut widen = scale.max(1.0);
    while cdf(lo) > p {
        lo -= widen;
        widen *= 2.0;
    }
    widen = scale.max(1.0);
    while cdf(hi) < p {
        hi += widen;
        widen *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = cdf(x) - p;
        if fx.abs() <= 1e-13 {
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-12 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(mu: f64, sigma: f64, tau: f64) -> ExGaussianParams {
        ExGaussianParams::new(mu, sigma, tau).unwrap()
    }

    #[test]
    fn log_cdf_and_log_sf_agree_with_linear_forms() {
        let d = p(300.0, 50.0, 100.0);
        for &t in &[0.0, 150.0, 300.0, 500.0, 1200.0] {
            assert_relative_eq!(d.ln_cdf(t).exp(), d.cdf(t), max_relative = 1e-12);
            assert_relative_eq!(d.ln_sf(t).exp(), d.sf(t), max_relative = 1e-12);
        }
        // deep lower tail stays finite where the linear CDF underflows
        assert!(d.cdf(-2000.0) == 0.0 && d.ln_cdf(-2000.0).is_finite());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(ExGaussianParams::new(0.0, 0.0, 1.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(ExGaussianParams::new(0.0, 1.0, -1.0), Err(Error::ParameterDomain(_))));
        assert!(ExGaussianParams::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn pdf_matches_convolution_value() {
        // mpmath convolution of Normal(300, 50) and Exp(mean 100) at t = 350
        assert_relative_eq!(p(300.0, 50.0, 100.0).pdf(350.0), 0.004_752_347_363_200_470, max_relative = 1e-12);
    }

    #[test]
    fn pdf_approaches_exponential_for_large_tau() {
        let d = p(0.0, 1.0, 1e4);
        for &t in &[50.0, 500.0, 5000.0] {
            let ratio = d.pdf(t) * d.tau * (t / d.tau).exp();
            assert_relative_eq!(ratio, 1.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn pdf_finite_when_sigma_over_tau_is_huge() {
        let d = p(500.0, 400.0, 0.5);
        for &t in &[-1000.0, 0.0, 500.0, 2000.0] {
            assert!(d.ln_pdf(t).is_finite());
        }
        // tends to the Gaussian density
        let gauss = (-0.5f64).exp() / (400.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert_relative_eq!(d.pdf(900.5), gauss, max_relative = 1e-3);
    }

    #[test]
    fn pdf_normalizes() {
        let d = p(300.0, 50.0, 100.0);
        let lo = d.mu - 10.0 * d.sigma;
        let hi = d.mu + 10.0 * d.sigma + 50.0 * d.tau;
        let r = integrate(|t| d.pdf(t), &[lo, d.mu, d.mu + 5.0 * d.tau, hi], Tolerance::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cdf_reference_and_limits() {
        let d = p(300.0, 50.0, 100.0);
        assert_relative_eq!(d.cdf(300.0), 0.150_381_165_279_601_93, max_relative = 1e-12);
        assert_eq!(d.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
        assert!(d.cdf(-1e6) < 1e-300);
        assert!((d.cdf(1e6) - 1.0).abs() < 1e-15);
        assert_relative_eq!(d.cdf(320.0) + d.sf(320.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let d = p(250.0, 40.0, 120.0);
        let lo = d.mu - 15.0 * d.sigma;
        for &t in &[150.0f64, 250.0, 330.0, 600.0, 1200.0] {
            let r = integrate(|x| d.pdf(x), &[lo, t.min(d.mu), t], Tolerance { rel: 1e-12, ..Default::default() }).unwrap();
            assert!((d.cdf(t) - r.value).abs() <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn quantile_reference_and_round_trip() {
        let d = p(93.1, 116.2, 103.6);
        assert_relative_eq!(d.quantile(0.9).unwrap(), 394.278_937_283_423_84, max_relative = 1e-9);
        let d = p(300.0, 50.0, 100.0);
        for i in 1..100 {
            let pr = i as f64 / 100.0;
            let q = d.quantile(pr).unwrap();
            assert!((d.cdf(q) - pr).abs() <= 1e-9, "p={pr}");
        }
        assert!((d.cdf(d.quantile(0.5).unwrap()) - 0.5).abs() <= 1e-8);
    }

    #[test]
    fn quantile_domain() {
        let d = p(0.0, 1.0, 1.0);
        assert!(matches!(d.quantile(0.0), Err(Error::Domain(_))));
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(f64::NAN).is_err());
    }

    #[test]
    fn median_shifts_with_location() {
        let d = p(0.0, 30.0, 80.0);
        let m0 = d.quantile(0.5).unwrap();
        let m1 = d.shifted(123.0).quantile(0.5).unwrap();
        assert_relative_eq!(m1 - m0, 123.0, epsilon = 1e-8);
    }

    #[test]
    fn sampling_is_reproducible_and_empty_for_zero() {
        let d = p(93.1, 116.2, 103.6);
        assert_eq!(d.sample(10, 3).unwrap(), d.sample(10, 3).unwrap());
        assert!(d.sample(0, 3).unwrap().is_empty());
    }

    #[test]
    fn sample_mean_of_type_s_triple() {
        let d = p(93.1, 116.2, 103.6);
        let xs = d.sample(1_000_000, 11).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = d.shape().variance.sqrt();
        assert!((mean - 196.7).abs() < 1.0);
        assert!((mean - d.mean()).abs() < 3.0 * sd / 1000.0);
    }

    #[test]
    fn tiny_sigma_is_a_shifted_exponential() {
        let d = p(100.0, 1e-6, 50.0);
        let xs = d.sample(10_000, 5).unwrap();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= 100.0 - 1e-4);
    }

    #[test]
    fn unit_moments() {
        let m = p(0.0, 1.0, 1.0).moments();
        assert_eq!(m.as_array(), [1.0, 3.0, 9.0, 39.0]);
        assert_relative_eq!(p(93.1, 10.0, 103.6).moments().m1, 196.7, epsilon = 1e-12);
    }

    #[test]
    fn moments_tend_to_gaussian() {
        let m = p(5.0, 2.0, 1e-9).moments();
        // N(5, 4): 5, 29, 185, 1273
        assert_relative_eq!(m.m1, 5.0, max_relative = 1e-8);
        assert_relative_eq!(m.m2, 29.0, max_relative = 1e-8);
        assert_relative_eq!(m.m3, 185.0, max_relative = 1e-8);
        assert_relative_eq!(m.m4, 1273.0, max_relative = 1e-8);
    }

    #[test]
    fn shape_special_cases() {
        let s = p(0.0, 7.0, 7.0).shape();
        assert!((s.skewness - 1.0 / 2f64.sqrt()).abs() <= 1e-12);
        assert_relative_eq!(p(0.0, 1.0, 1e-6).shape().kurtosis, 3.0, epsilon = 1e-9);
        assert_relative_eq!(p(0.0, 1e-6, 1.0).shape().kurtosis, 9.0, epsilon = 1e-9);
        assert_relative_eq!(p(93.1, 116.2, 103.6).shape().variance, 24235.4, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn shape_agrees_with_raw_moment_expansion(mu in 10.0..500.0f64, sigma in 10.0..500.0f64, tau in 10.0..500.0f64) {
            let d = p(mu, sigma, tau);
            let a = d.shape();
            // centre first so the raw-moment expansion does not cancel
            let b = d.shifted(-d.mean()).moments().shape();
            prop_assert!(((a.variance - b.variance) / a.variance).abs() < 1e-10);
            prop_assert!(((a.skewness - b.skewness) / a.skewness).abs() < 1e-10);
            prop_assert!(((a.kurtosis - b.kurtosis) / a.kurtosis).abs() < 1e-10);
        }

        #[test]
        fn right_skewed_and_leptokurtic(sigma in 10.0..2000.0f64, tau in 10.0..2000.0f64) {
            let s = p(0.0, sigma, tau).shape();
            prop_assert!(s.skewness > 0.0 && s.skewness < 2.0);
            prop_assert!(s.kurtosis > 3.0 && s.kurtosis < 9.0);
        }

        #[test]
        fn location_equivariance(mu in -500.0..500.0f64, sigma in 1.0..300.0f64, tau in 1.0..300.0f64, t in -1000.0..3000.0f64, c in -200.0..200.0f64) {
            let d = p(mu, sigma, tau);
            let a = d.shifted(c).ln_pdf(t + c);
            let b = d.ln_pdf(t);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn cdf_monotone_and_quantile_inverts(sigma in 10.0..400.0f64, tau in 10.0..400.0f64, pr in 0.001..0.999f64) {
            let d = p(200.0, sigma, tau);
            let q = d.quantile(pr).unwrap();
            prop_assert!((d.cdf(q) - pr).abs() < 1e-9);
            prop_assert!(d.cdf(q) <= d.cdf(q + 1.0));
            prop_assert!(d.pdf(q) >= 0.0);
        }
    }
}
