//! Censored race-model likelihood and individual Bayesian estimation of the
//! go and stop Ex-Gaussian parameters.
//!
//! Go trials contribute `ln f_go(t)`. A responded stop trial contributes
//! `ln f_go(t_r) + ln(1 - F_stop(t_r - T_d))`. An inhibited stop trial
//! contributes the log of
//!
//! ```text
//! P(GORT >= T_d + SSRT) = integral (1 - F_go(s + T_d)) f_stop(s) ds
//! ```
//!
//! taken over the stop-latency axis.

use crate::error::{Error, Result};
use crate::exgauss::{ExGaussianParams, PRIOR_HI, PRIOR_LO};
use crate::mcmc::{componentwise_metropolis, summarize_chains, Chain, SamplerConfig, Summary};
use crate::quadrature::{integrate, Tolerance};
use crate::racesim::{extract_views, ClusterPartition, SstDataset};
use crate::rng::substream;
use crate::special::log_add_exp;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sentinel replacing `ln 0` so the log posterior stays finite.
pub const LOG_FLOOR: f64 = -745.0;

/// Support of the optional stop-latency truncation.
pub const TRUNCATION: (f64, f64) = (1.0, 1000.0);

pub const PARAM_NAMES: [&str; 6] = ["mu_go", "sigma_go", "tau_go", "mu_stop", "sigma_stop", "tau_stop"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RaceLikelihoodInput {
    pub go_rts: Vec<f64>,
    /// `(rt_ms, ssd_ms)` of stop trials with a response.
    pub signal_respond: Vec<(f64, f64)>,
    /// SSDs of inhibited stop trials.
    pub signal_inhibit: Vec<f64>,
}

impl RaceLikelihoodInput {
    pub fn from_dataset(d: &SstDataset) -> Self {
        let mut input = RaceLikelihoodInput::default();
        for t in &d.trials {
            match (t.is_stop(), t.rt_ms, t.ssd_ms) {
                (false, Some(rt), _) => input.go_rts.push(rt),
                (true, Some(rt), Some(ssd)) => input.signal_respond.push((rt, ssd)),
                (true, None, Some(ssd)) => input.signal_inhibit.push(ssd),
                _ => {}
            }
        }
        input
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.go_rts.iter().chain(&self.signal_inhibit).all(|x| x.is_finite())
            && self.signal_respond.iter().all(|(r, d)| r.is_finite() && d.is_finite());
        if !finite {
            return Err(Error::Precondition("likelihood input contains non-finite times".into()));
        }
        if self.signal_respond.iter().any(|&(r, _)| r <= 0.0) {
            return Err(Error::Precondition("signal-respond RTs must be positive".into()));
        }
        Ok(())
    }

    pub fn n_stop(&self) -> usize {
        self.signal_respond.len() + self.signal_inhibit.len()
    }

    /// Inhibit SSDs collapsed to `(ssd, count)` pairs, ascending.
    fn inhibit_groups(&self) -> Vec<(f64, usize)> {
        let mut v = self.signal_inhibit.clone();
        v.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for x in v {
            match out.last_mut() {
                Some((y, n)) if *y == x => *n += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }
}

/// How the inhibition probability is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitIntegrator {
    /// Adaptive Gauss-Kronrod over the stop-latency axis, relative tolerance 1e-8.
    #[default]
    Quadrature,
    /// Exact closed form (untruncated model only): `GORT - SSRT` is a Gaussian
    /// plus an asymmetric Laplace variate, so the probability splits into
    /// two Ex-Gaussian tail terms.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LikelihoodOptions {
    pub integrator: InhibitIntegrator,
    /// Truncate the stop latency to `[1, 1000]` ms.
    pub truncate_stop: bool,
}

fn floored(x: f64) -> f64 {
    if x.is_nan() {
        LOG_FLOOR
    } else {
        x.max(LOG_FLOOR)
    }
}

/// `sum ln f_go(t_g)`; each term floored at [`LOG_FLOOR`].
pub fn loglik_go(theta_go: &ExGaussianParams, go_rts: &[f64]) -> f64 {
    go_rts.iter().map(|&t| floored(theta_go.ln_pdf(t))).sum()
}

/// Stop-latency distribution with optional truncation to [`TRUNCATION`].
struct StopLaw {
    theta: ExGaussianParams,
    truncated: Option<(f64, f64, f64)>,
}

impl StopLaw {
    fn new(theta: ExGaussianParams, truncate: bool) -> Self {
        let truncated = truncate.then(|| {
            let (a, b) = TRUNCATION;
            let (fa, fb) = (theta.cdf(a), theta.cdf(b));
            (fa, fb, (fb - fa).max(f64::MIN_POSITIVE))
        });
        StopLaw { theta, truncated }
    }

    fn ln_pdf(&self, s: f64) -> f64 {
        match self.truncated {
            None => self.theta.ln_pdf(s),
            Some((_, _, z)) if (TRUNCATION.0..=TRUNCATION.1).contains(&s) => self.theta.ln_pdf(s) - z.ln(),
            Some(_) => f64::NEG_INFINITY,
        }
    }

    fn ln_sf(&self, s: f64) -> f64 {
        match self.truncated {
            None => self.theta.ln_sf(s),
            Some((_, fb, z)) => {
                let (a, b) = TRUNCATION;
                if s <= a {
                    0.0
                } else if s >= b {
                    f64::NEG_INFINITY
                } else {
                    ((fb - self.theta.cdf(s)).max(0.0) / z).ln()
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        let t = &self.theta;
        let (lo, hi) = (t.mu - 12.0 * t.sigma, t.mu + 12.0 * t.sigma + 100.0 * t.tau);
        match self.truncated {
            None => (lo, hi),
            Some(_) => (lo.max(TRUNCATION.0), hi.min(TRUNCATION.1)),
        }
    }
}

/// `ln P(GORT >= t_d + SSRT)` in closed form for the untruncated model.
///
/// With `GORT - SSRT = Z + L`, `Z ~ N(mu_g - mu_s, sigma_g^2 + sigma_s^2)` and
/// `L` a difference of exponentials, `L` is `+Exp(tau_g)` with probability
/// `tau_g / (tau_g + tau_s)` and `-Exp(tau_s)` otherwise.
pub fn ln_inhibit_probability_analytic(go: &ExGaussianParams, stop: &ExGaussianParams, t_d: f64) -> f64 {
    let m = go.mu - stop.mu;
    let s = go.sigma.hypot(stop.sigma);
    let total = go.tau + stop.tau;
    let up = ExGaussianParams { mu: m, sigma: s, tau: go.tau };
    let down = ExGaussianParams { mu: -m, sigma: s, tau: stop.tau };
    log_add_exp((go.tau / total).ln() + up.ln_sf(t_d), (stop.tau / total).ln() + down.ln_cdf(-t_d))
}

fn ln_inhibit_quadrature(go: &ExGaussianParams, stop: &StopLaw, t_d: f64) -> Result<f64> {
    let (lo, stop_hi) = stop.support();
    let go_hi = go.mu + 12.0 * go.sigma + 100.0 * go.tau - t_d;
    let hi = stop_hi.min(go_hi);
    if hi <= lo {
        return Ok(f64::NEG_INFINITY);
    }
    let theta = &stop.theta;
    let mut points = vec![lo, hi];
    for p in [theta.mu, theta.mu + theta.tau, go.mu - t_d, go.mu + go.tau - t_d] {
        if p > lo && p < hi {
            points.push(p);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    // scale by the integrand's peak so tiny probabilities keep full relative accuracy
    let integrand = |s: f64| go.ln_sf(s + t_d) + stop.ln_pdf(s);
    let grid = 64;
    let peak = (0..=grid)
        .map(|i| integrand(lo + (hi - lo) * i as f64 / grid as f64))
        .chain(points.iter().map(|&p| integrand(p)))
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let r = integrate(|s| (integrand(s) - peak).exp(), &points, Tolerance::default())?;
    Ok(peak + r.value.ln())
}

/// `ln P(inhibit | t_d)` by the selected integrator.
pub fn ln_inhibit_probability(
    go: &ExGaussianParams,
    stop: &ExGaussianParams,
    t_d: f64,
    opts: &LikelihoodOptions,
) -> Result<f64> {
    match (opts.integrator, opts.truncate_stop) {
        (InhibitIntegrator::Analytic, false) => Ok(ln_inhibit_probability_analytic(go, stop, t_d)),
        _ => ln_inhibit_quadrature(go, &StopLaw::new(*stop, opts.truncate_stop), t_d),
    }
}

/// Stop-trial log-likelihood: signal-respond density and survival terms plus
/// inhibition terms, each floored at [`LOG_FLOOR`].
pub fn loglik_stop(
    theta_go: &ExGaussianParams,
    theta_stop: &ExGaussianParams,
    input: &RaceLikelihoodInput,
    opts: &LikelihoodOptions,
) -> Result<f64> {
    let stop = StopLaw::new(*theta_stop, opts.truncate_stop);
    let mut ll = 0.0;
    for &(rt, ssd) in &input.signal_respond {
        ll += floored(theta_go.ln_pdf(rt)) + floored(stop.ln_sf(rt - ssd));
    }
    for (ssd, count) in input.inhibit_groups() {
        let term = match (opts.integrator, opts.truncate_stop) {
            (InhibitIntegrator::Analytic, false) => ln_inhibit_probability_analytic(theta_go, theta_stop, ssd),
            _ => ln_inhibit_quadrature(theta_go, &stop, ssd)?,
        };
        ll += count as f64 * floored(term);
    }
    Ok(ll)
}

/// Which cluster view a fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cluster {
    S,
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpaConfig {
    pub n_chains: usize,
    pub sampler: SamplerConfig,
    pub prior_lo: f64,
    pub prior_hi: f64,
    /// Defaults to the closed-form inhibition probability; truncation always
    /// falls back to quadrature.
    pub likelihood: LikelihoodOptions,
    /// Drop the likelihood and sample the prior.
    pub prior_only: bool,
    pub seed: u64,
}

impl Default for IbpaConfig {
    fn default() -> Self {
        IbpaConfig {
            n_chains: 3,
            sampler: SamplerConfig::default(),
            prior_lo: PRIOR_LO,
            prior_hi: PRIOR_HI,
            likelihood: LikelihoodOptions { integrator: InhibitIntegrator::Analytic, truncate_stop: false },
            prior_only: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChains {
    pub param_names: Vec<String>,
    pub chains: Vec<Chain>,
    pub n_burn: usize,
    pub n_iter: usize,
    pub rhat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub params: Vec<(String, Summary)>,
    pub theta_go: ExGaussianParams,
    pub theta_stop: ExGaussianParams,
    pub max_rhat: f64,
    pub warnings: Vec<String>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&Summary> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn summaries(&self) -> impl Iterator<Item = &Summary> {
        self.params.iter().map(|(_, s)| s)
    }
}

fn split_theta(x: &[f64]) -> (ExGaussianParams, ExGaussianParams) {
    (ExGaussianParams::from_array([x[0], x[1], x[2]]), ExGaussianParams::from_array([x[3], x[4], x[5]]))
}

/// Log posterior on the prior box (flat prior, so the log likelihood).
pub fn log_posterior(x: &[f64], input: &RaceLikelihoodInput, opts: &LikelihoodOptions) -> f64 {
    let (go, stop) = split_theta(x);
    match loglik_stop(&go, &stop, input, opts) {
        Ok(ll) => loglik_go(&go, &input.go_rts) + ll,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Adaptive-Metropolis fit of `(theta_go, theta_stop)` under uniform priors.
/// Chains start from independent uniform draws on the prior box and run in
/// parallel on separate random streams.
pub fn fit_ibpa(view: &SstDataset, cfg: &IbpaConfig) -> Result<(PosteriorChains, PosteriorSummary)> {
    let input = RaceLikelihoodInput::from_dataset(view);
    input.validate()?;
    fit_ibpa_input(&input, cfg)
}

pub fn fit_ibpa_input(input: &RaceLikelihoodInput, cfg: &IbpaConfig) -> Result<(PosteriorChains, PosteriorSummary)> {
    cfg.sampler.validate()?;
    if !cfg.prior_only && (input.go_rts.is_empty() || input.n_stop() == 0) {
        return Err(Error::Precondition("a fit needs at least one go and one stop trial".into()));
    }
    if cfg.n_chains == 0 || !(cfg.prior_lo < cfg.prior_hi) {
        return Err(Error::Precondition("need at least one chain and a non-empty prior box".into()));
    }
    let bounds = [(cfg.prior_lo, cfg.prior_hi); 6];
    let steps = [0.05 * (cfg.prior_hi - cfg.prior_lo); 6];
    let chains: Vec<Chain> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(cfg.seed, c as u64);
            let init: Vec<f64> = (0..6).map(|_| rng.random_range(cfg.prior_lo..cfg.prior_hi)).collect();
            if cfg.prior_only {
                componentwise_metropolis(|_| 0.0, &init, &steps, &bounds, &cfg.sampler, &mut rng)
            } else {
                componentwise_metropolis(
                    |x| log_posterior(x, input, &cfg.likelihood),
                    &init,
                    &steps,
                    &bounds,
                    &cfg.sampler,
                    &mut rng,
                )
            }
        })
        .collect::<Result<_>>()?;

    let summaries = summarize_chains(&chains);
    let rhat: Vec<f64> = summaries.iter().map(|s| s.rhat).collect();
    let max_rhat = rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut warnings = Vec::new();
    if max_rhat > 1.1 || max_rhat.is_nan() {
        warnings.push(format!("chains may not have converged: max R-hat {max_rhat:.3}"));
    }
    for (c, chain) in chains.iter().enumerate() {
        if chain.acceptance.iter().any(|&a| a == 0.0) {
            warnings.push(format!("chain {c} rejected every proposal for some parameter"));
        }
    }
    let means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    let (theta_go, theta_stop) = split_theta(&means);
    let summary = PosteriorSummary {
        params: PARAM_NAMES.iter().map(|n| n.to_string()).zip(summaries).collect(),
        theta_go,
        theta_stop,
        max_rhat,
        warnings,
    };
    let posterior = PosteriorChains {
        param_names: PARAM_NAMES.iter().map(|n| n.to_string()).collect(),
        chains,
        n_burn: cfg.sampler.n_burn,
        n_iter: cfg.sampler.n_iter,
        rhat,
    };
    Ok((posterior, summary))
}

/// Fits for the whole session and both cluster views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFits {
    pub theta_s: PosteriorSummary,
    pub theta_a: PosteriorSummary,
    pub theta_b: PosteriorSummary,
    pub w_a: f64,
}

/// Runs [`fit_ibpa`] on the S, A and B views. Each view gets its own seed
/// derived from `cfg.seed`.
pub fn fit_all_clusters(d: &SstDataset, p: &ClusterPartition, cfg: &IbpaConfig) -> Result<ClusterFits> {
    let views = extract_views(d, p);
    for (name, v) in [("A", &views.type_a), ("B", &views.type_b)] {
        if v.n_stop() < 2 {
            return Err(Error::Precondition(format!("cluster {name} has {} stop trials; at least 2 are needed", v.n_stop())));
        }
    }
    let fit = |v: &SstDataset, k: u64| -> Result<PosteriorSummary> {
        let cfg = IbpaConfig { seed: crate::rng::child_seed(cfg.seed, k), ..*cfg };
        Ok(fit_ibpa(v, &cfg)?.1)
    };
    Ok(ClusterFits {
        theta_s: fit(&views.full, 0)?,
        theta_a: fit(&views.type_a, 1)?,
        theta_b: fit(&views.type_b, 2)?,
        w_a: p.w_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::racesim::{partition_clusters, simulate_sst, Design, Trial};
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(mu: f64, sigma: f64, tau: f64) -> ExGaussianParams {
        ExGaussianParams::new(mu, sigma, tau).unwrap()
    }

    const QUAD: LikelihoodOptions = LikelihoodOptions { integrator: InhibitIntegrator::Quadrature, truncate_stop: false };
    const EXACT: LikelihoodOptions = LikelihoodOptions { integrator: InhibitIntegrator::Analytic, truncate_stop: false };

    #[test]
    fn go_loglik_basics() {
        let g = p(400.0, 50.0, 80.0);
        assert_eq!(loglik_go(&g, &[]), 0.0);
        assert_eq!(loglik_go(&g, &[420.0]), g.ln_pdf(420.0));
        // mpmath (50 digits) sum of log densities
        let ll = loglik_go(&g, &[350.0, 420.0, 480.0, 515.5, 610.25]);
        assert_relative_eq!(ll, -29.701_900_368_044_185, max_relative = 1e-12);
    }

    #[test]
    fn no_stop_trials_gives_zero() {
        let input = RaceLikelihoodInput { go_rts: vec![400.0], ..Default::default() };
        assert_eq!(loglik_stop(&p(400.0, 50.0, 80.0), &p(200.0, 30.0, 60.0), &input, &QUAD).unwrap(), 0.0);
    }

    #[test]
    fn instant_stop_always_wins() {
        let ln_p = ln_inhibit_probability(&p(400.0, 50.0, 80.0), &p(10.0, 10.0, 10.0), 0.0, &QUAD).unwrap();
        assert!(ln_p.abs() < 1e-8, "{ln_p}");
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let cases = [
            (p(300.0, 50.0, 100.0), p(200.0, 30.0, 60.0), 250.0),
            (p(450.0, 60.0, 90.0), p(180.0, 40.0, 70.0), 100.0),
            (p(400.0, 20.0, 300.0), p(250.0, 150.0, 10.0), 400.0),
            (p(900.0, 10.0, 10.0), p(100.0, 10.0, 10.0), 0.0),
            (p(300.0, 40.0, 40.0), p(300.0, 40.0, 40.0), 600.0),
            (p(1500.0, 1800.0, 1900.0), p(20.0, 1900.0, 1500.0), 50.0),
        ];
        for (go, stop, t_d) in cases {
            let q = ln_inhibit_probability(&go, &stop, t_d, &QUAD).unwrap();
            let a = ln_inhibit_probability(&go, &stop, t_d, &EXACT).unwrap();
            assert!((q - a).abs() <= 1e-8 * a.abs().max(1.0), "{go:?} {stop:?} {t_d}: {q} vs {a}");
        }
    }

    #[test]
    fn inhibit_probability_matches_monte_carlo() {
        let (go, stop, t_d) = (p(300.0, 50.0, 100.0), p(200.0, 30.0, 60.0), 250.0);
        let pr = ln_inhibit_probability(&go, &stop, t_d, &QUAD).unwrap().exp();
        let mut rng = seeded(21);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| go.draw(&mut rng) >= t_d + stop.draw(&mut rng)).count() as f64;
        let se = (pr * (1.0 - pr) / n as f64).sqrt();
        assert!((hits / n as f64 - pr).abs() < 4.0 * se);
    }

    #[test]
    fn truncation_restricts_the_stop_latency() {
        let (go, stop) = (p(400.0, 50.0, 80.0), p(200.0, 30.0, 60.0));
        let opts = LikelihoodOptions { integrator: InhibitIntegrator::Quadrature, truncate_stop: true };
        let t = ln_inhibit_probability(&go, &stop, 200.0, &opts).unwrap();
        let u = ln_inhibit_probability(&go, &stop, 200.0, &QUAD).unwrap();
        // almost all stop mass lies in [1, 1000], so the two nearly agree
        assert!((t - u).abs() < 1e-5);
        let wide = p(10.0, 600.0, 600.0);
        let t = ln_inhibit_probability(&go, &wide, 200.0, &opts).unwrap().exp();
        let u = ln_inhibit_probability(&go, &wide, 200.0, &QUAD).unwrap().exp();
        assert!((0.0..=1.0).contains(&t) && (t - u).abs() > 1e-3);
        // the truncated survival is 1 below the lower truncation point
        let input = RaceLikelihoodInput { signal_respond: vec![(200.0, 250.0)], ..Default::default() };
        let ll = loglik_stop(&go, &wide, &input, &opts).unwrap();
        assert_relative_eq!(ll, go.ln_pdf(200.0), max_relative = 1e-12);
    }

    #[test]
    fn log_posterior_finite_at_prior_corners() {
        let d = simulate_sst(p(400.0, 60.0, 80.0), p(180.0, 40.0, 70.0), &Design::default(), 3).unwrap();
        let input = RaceLikelihoodInput::from_dataset(&d);
        for corner in 0..64u32 {
            let x: Vec<f64> = (0..6).map(|j| if corner >> j & 1 == 1 { PRIOR_HI } else { PRIOR_LO }).collect();
            assert!(log_posterior(&x, &input, &QUAD).is_finite(), "{x:?}");
        }
    }

    #[test]
    fn prior_only_recovers_prior_mean() {
        let cfg = IbpaConfig {
            prior_only: true,
            sampler: SamplerConfig { n_iter: 20_000, n_burn: 2_000, ..SamplerConfig::default() },
            seed: 5,
            ..IbpaConfig::default()
        };
        let (_, s) = fit_ibpa_input(&RaceLikelihoodInput::default(), &cfg).unwrap();
        for sum in s.summaries() {
            assert!((sum.mean - 1005.0).abs() < 30.0, "{sum:?}");
        }
    }

    #[test]
    fn fit_is_deterministic_and_in_support() {
        let d = simulate_sst(p(400.0, 60.0, 80.0), p(180.0, 40.0, 70.0), &Design::default(), 8).unwrap();
        let cfg = IbpaConfig {
            sampler: SamplerConfig { n_iter: 600, n_burn: 200, ..SamplerConfig::default() },
            likelihood: EXACT,
            seed: 2,
            ..IbpaConfig::default()
        };
        let (c1, s1) = fit_ibpa(&d, &cfg).unwrap();
        let (c2, s2) = fit_ibpa(&d, &cfg).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
        assert_eq!(c1.chains.len(), 3);
        assert!(c1.chains.iter().all(|c| c.draws.iter().all(|&x| (PRIOR_LO..=PRIOR_HI).contains(&x))));
        for s in s1.summaries() {
            assert!(s.sd >= 0.0 && s.q025 <= s.mean && s.mean <= s.q975);
        }
    }

    #[test]
    fn cluster_b_needs_two_stop_trials() {
        let d = SstDataset::from_trials(vec![
            Trial::go(1, 400.0),
            Trial::stop_inhibited(2, 250.0),
            Trial::go(3, 420.0),
            Trial::go(4, 380.0),
            Trial::stop_responded(5, 300.0, 390.0),
        ])
        .unwrap();
        let part = partition_clusters(&d);
        assert!(matches!(fit_all_clusters(&d, &part, &IbpaConfig::default()), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn inhibit_probability_is_a_probability(mg in 10.0..2000.0f64, sg in 10.0..2000.0f64, tg in 10.0..2000.0f64,
                                                ms in 10.0..2000.0f64, ss in 10.0..2000.0f64, ts in 10.0..2000.0f64,
                                                t_d in 0.0..1000.0f64) {
            let (go, stop) = (p(mg, sg, tg), p(ms, ss, ts));
            let q = ln_inhibit_probability(&go, &stop, t_d, &QUAD).unwrap();
            let a = ln_inhibit_probability_analytic(&go, &stop, t_d);
            prop_assert!(q <= 1e-12 && a <= 1e-12);
            prop_assert!((q.exp() - a.exp()).abs() < 1e-9, "{} vs {}", q, a);
        }

        #[test]
        fn later_ssd_raises_respond_survival(rt in 200.0..900.0f64, d1 in 0.0..500.0f64, extra in 0.0..300.0f64) {
            let stop = StopLaw::new(p(200.0, 40.0, 60.0), false);
            prop_assert!(stop.ln_sf(rt - (d1 + extra)) >= stop.ln_sf(rt - d1));
        }
    }
}
