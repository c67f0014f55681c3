//! Colonius retrieval of the SSRT distribution from race-model-implied
//! densities, and the weight sweep of mixture-versus-single disparities.

use crate::bayesfit::{ln_inhibit_probability, LikelihoodOptions, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::exgauss::ExGaussianParams;
use crate::mixture::MixtureSsrt;
use crate::sotest::{pspdt, PspdtConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `F_SSRT(t) = 1 - (1 - P(SI|T_d)) f_SRRT(t + T_d | T_d) / f_GORT(t + T_d)`,
/// with `P(SI|T_d)` integrated numerically and the signal-respond density
/// implied by the race model.
pub fn colonius_cdf(go: &ExGaussianParams, stop: &ExGaussianParams, t_d: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t_d > 0.0) || !t.is_finite() || !t_d.is_finite() {
        return Err(Error::Domain(format!("Colonius retrieval needs t, T_d > 0 (t = {t}, T_d = {t_d})")));
    }
    go.validate()?;
    stop.validate()?;
    let ln_p_si = ln_inhibit_probability(go, stop, t_d, &LikelihoodOptions::default())?;
    // ln(1 - P) from ln P
    let ln_respond = if ln_p_si > -std::f64::consts::LN_2 {
        (-ln_p_si.exp_m1()).ln()
    } else {
        (-ln_p_si.exp()).ln_1p()
    };
    if !ln_respond.is_finite() {
        return Err(Error::UndefinedRatio(format!("P(SI | T_d = {t_d}) is numerically one")));
    }
    let ln_f_go = go.ln_pdf(t + t_d);
    if !(ln_f_go >= LOG_FLOOR) {
        return Err(Error::UndefinedRatio(format!("go density is numerically zero at {}", t + t_d)));
    }
    let ln_f_srrt = ln_f_go + stop.ln_sf(t) - ln_respond;
    let ratio = (ln_respond + ln_f_srrt - ln_f_go).exp();
    Ok((1.0 - ratio).clamp(0.0, 1.0))
}

/// Inputs of one cluster for the mixture retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColoniusInputs {
    pub go: ExGaussianParams,
    pub stop: ExGaussianParams,
    pub t_d: f64,
}

/// Mixture retrieval: cluster-wise Colonius terms weighted by `w_a` and `1 - w_a`.
pub fn colonius_mixture_cdf(a: &ColoniusInputs, b: &ColoniusInputs, w_a: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w_a) {
        return Err(Error::ParameterDomain(format!("w_a must lie in [0,1], got {w_a}")));
    }
    let mut value = 0.0;
    if w_a > 0.0 {
        value += w_a * colonius_cdf(&a.go, &a.stop, a.t_d, t)?;
    }
    if w_a < 1.0 {
        value += (1.0 - w_a) * colonius_cdf(&b.go, &b.stop, b.t_d, t)?;
    }
    Ok(value)
}

/// Per-subject stop-latency parameters of the three clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectClusters {
    pub theta_s: ExGaussianParams,
    pub theta_a: ExGaussianParams,
    pub theta_b: ExGaussianParams,
}

fn mean(p: &ExGaussianParams) -> f64 {
    p.mu + p.tau
}

fn var(p: &ExGaussianParams) -> f64 {
    p.sigma * p.sigma + p.tau * p.tau
}

/// Cohort-averaged `Delta mean(w) = slope w + intercept` and
/// `Delta var(w) = a w^2 + b w + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCoefficients {
    pub mean_slope: f64,
    pub mean_intercept: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub var_c: f64,
}

impl SweepCoefficients {
    pub fn from_cohort(cohort: &[SubjectClusters]) -> Result<Self> {
        if cohort.is_empty() {
            return Err(Error::Domain("weight sweep needs a non-empty cohort".into()));
        }
        let n = cohort.len() as f64;
        let avg = |f: &dyn Fn(&SubjectClusters) -> f64| cohort.iter().map(f).sum::<f64>() / n;
        let sq_diff = avg(&|s| (mean(&s.theta_a) - mean(&s.theta_b)).powi(2));
        Ok(SweepCoefficients {
            mean_slope: avg(&|s| mean(&s.theta_a) - mean(&s.theta_b)),
            mean_intercept: avg(&|s| mean(&s.theta_b) - mean(&s.theta_s)),
            var_a: -sq_diff,
            var_b: sq_diff + avg(&|s| var(&s.theta_a) - var(&s.theta_b)),
            var_c: avg(&|s| var(&s.theta_b) - var(&s.theta_s)),
        })
    }

    pub fn delta_mean(&self, w: f64) -> f64 {
        self.mean_slope * w + self.mean_intercept
    }

    pub fn delta_var(&self, w: f64) -> f64 {
        (self.var_a * w + self.var_b) * w + self.var_c
    }

    /// Vertex of the variance parabola; `None` when it degenerates.
    pub fn var_vertex(&self) -> Option<f64> {
        (self.var_a < 0.0).then(|| -self.var_b / (2.0 * self.var_a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweep {
    pub grid: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub delta_var: Vec<f64>,
    pub coefficients: SweepCoefficients,
    /// Maximizer of `delta_var` on `[0, 1]`; `None` if the cluster means agree.
    pub argmax_var_w: Option<f64>,
    /// Averaged KS statistic of the cohort-mean single versus mixture at each `w`.
    pub pspdt_stat: Option<Vec<f64>>,
    pub pspdt_cutoff: Option<f64>,
}

/// `n` equally spaced weights on `[0, 1]`.
pub fn weight_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn cohort_mean(cohort: &[SubjectClusters], pick: fn(&SubjectClusters) -> ExGaussianParams) -> ExGaussianParams {
    let n = cohort.len() as f64;
    let sum = cohort.iter().map(pick).fold([0.0; 3], |acc, p| {
        let a = p.to_array();
        [acc[0] + a[0], acc[1] + a[1], acc[2] + a[2]]
    });
    ExGaussianParams::from_array([sum[0] / n, sum[1] / n, sum[2] / n])
}

pub fn weight_sweep(cohort: &[SubjectClusters], grid: &[f64], pspdt_cfg: Option<&PspdtConfig>) -> Result<WeightSweep> {
    let coefficients = SweepCoefficients::from_cohort(cohort)?;
    if grid.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::Domain("sweep weights must lie in [0,1]".into()));
    }
    let (pspdt_stat, pspdt_cutoff) = match pspdt_cfg {
        None => (None, None),
        Some(cfg) => {
            let single = cohort_mean(cohort, |s| s.theta_s).into();
            let (a, b) = (cohort_mean(cohort, |s| s.theta_a), cohort_mean(cohort, |s| s.theta_b));
            let results = grid
                .par_iter()
                .map(|&w| pspdt(&single, &MixtureSsrt::new(w, a, b)?.into(), cfg))
                .collect::<Result<Vec<_>>>()?;
            let cutoff = results.first().map(|r| r.critical_value);
            (Some(results.into_iter().map(|r| r.d_bar).collect()), cutoff)
        }
    };
    Ok(WeightSweep {
        grid: grid.to_vec(),
        delta_mean: grid.iter().map(|&w| coefficients.delta_mean(w)).collect(),
        delta_var: grid.iter().map(|&w| coefficients.delta_var(w)).collect(),
        argmax_var_w: coefficients.var_vertex().map(|w| w.clamp(0.0, 1.0)),
        coefficients,
        pspdt_stat,
        pspdt_cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn p(mu: f64, sigma: f64, tau: f64) -> ExGaussianParams {
        ExGaussianParams::new(mu, sigma, tau).unwrap()
    }

    #[test]
    fn inverts_the_race_model() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let go = p(rng.random_range(300.0..600.0), rng.random_range(20.0..80.0), rng.random_range(30.0..150.0));
            let stop = p(rng.random_range(100.0..250.0), rng.random_range(10.0..60.0), rng.random_range(10.0..80.0));
            let t_d = rng.random_range(50.0..400.0);
            for i in 1..=50 {
                let t = 8.0 * i as f64;
                let f = colonius_cdf(&go, &stop, t_d, t).unwrap();
                assert!((f - stop.cdf(t)).abs() <= 1e-6, "t = {t}: {f} vs {}", stop.cdf(t));
            }
        }
    }

    #[test]
    fn tends_to_one_and_is_monotone() {
        let (go, stop) = (p(450.0, 50.0, 100.0), p(200.0, 30.0, 40.0));
        let values: Vec<f64> = (1..200).map(|i| colonius_cdf(&go, &stop, 250.0, 5.0 * i as f64).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(values.last().unwrap() > &(1.0 - 1e-6));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (go, stop) = (p(450.0, 50.0, 100.0), p(200.0, 30.0, 40.0));
        assert!(matches!(colonius_cdf(&go, &stop, 250.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(colonius_cdf(&go, &stop, 0.0, 10.0), Err(Error::Domain(_))));
        let narrow = p(450.0, 1.0, 1.0);
        assert!(matches!(colonius_cdf(&narrow, &stop, 250.0, 5.0), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn mixture_form_decomposes_and_collapses() {
        let a = ColoniusInputs { go: p(450.0, 50.0, 100.0), stop: p(220.0, 30.0, 50.0), t_d: 230.0 };
        let b = ColoniusInputs { go: p(430.0, 40.0, 120.0), stop: p(260.0, 40.0, 60.0), t_d: 270.0 };
        let mix = MixtureSsrt::new(0.59, a.stop, b.stop).unwrap();
        for i in 1..=40 {
            let t = 10.0 * i as f64;
            let fa = colonius_cdf(&a.go, &a.stop, a.t_d, t).unwrap();
            let fb = colonius_cdf(&b.go, &b.stop, b.t_d, t).unwrap();
            let m = colonius_mixture_cdf(&a, &b, 0.59, t).unwrap();
            assert!((m - (0.59 * fa + 0.41 * fb)).abs() < 1e-9);
            assert!((m - mix.cdf(t)).abs() < 1e-6);
            assert_eq!(colonius_mixture_cdf(&a, &b, 1.0, t).unwrap(), fa);
            assert_eq!(colonius_mixture_cdf(&a, &b, 0.0, t).unwrap(), fb);
            let same = colonius_mixture_cdf(&a, &a, 0.3, t).unwrap();
            assert!((same - fa).abs() < 1e-12);
        }
    }

    fn table2_cohort() -> Vec<SubjectClusters> {
        // cluster means mu + tau of 196.8 (single), 265.0 (A), 253.6 (B)
        vec![SubjectClusters {
            theta_s: p(100.0, 40.0, 96.8),
            theta_a: p(150.0, 60.0, 115.0),
            theta_b: p(140.0, 55.0, 113.6),
        }]
    }

    #[test]
    fn published_mean_disparities() {
        let c = SweepCoefficients::from_cohort(&table2_cohort()).unwrap();
        assert_relative_eq!(c.mean_slope, 11.4, max_relative = 1e-9);
        assert_relative_eq!(c.mean_intercept, 56.8, max_relative = 1e-9);
        assert!((c.delta_mean(0.59) - 63.5).abs() <= 0.05);
        assert!((c.delta_mean(0.75) - 65.3).abs() <= 0.05 + 1e-9);
        assert!((c.delta_mean(1.0) - 68.2).abs() <= 0.05);
    }

    #[test]
    fn published_variance_vertex() {
        let c = SweepCoefficients { mean_slope: 0.0, mean_intercept: 0.0, var_a: -18885.9, var_b: 21106.8, var_c: 20330.3 };
        assert!((c.var_vertex().unwrap() - 0.56).abs() < 0.005);
    }

    #[test]
    fn equal_clusters_degenerate() {
        let s = p(100.0, 30.0, 50.0);
        let a = p(150.0, 40.0, 60.0);
        let cohort = [SubjectClusters { theta_s: s, theta_a: a, theta_b: a }];
        let sweep = weight_sweep(&cohort, &weight_grid(101), None).unwrap();
        assert_eq!(sweep.coefficients.var_a, 0.0);
        assert!(sweep.argmax_var_w.is_none());
        assert!(weight_sweep(&[], &weight_grid(11), None).is_err());
    }

    fn random_cohort(seed: u64, n: usize) -> Vec<SubjectClusters> {
        let mut rng = seeded(seed);
        let mut draw = |m: f64| p(m + rng.random_range(-30.0..30.0), rng.random_range(10.0..80.0), rng.random_range(20.0..120.0));
        (0..n).map(|_| SubjectClusters { theta_s: draw(90.0), theta_a: draw(130.0), theta_b: draw(120.0) }).collect()
    }

    #[test]
    fn vertex_matches_grid_search() {
        for seed in 0..10 {
            let cohort = random_cohort(seed, 44);
            let sweep = weight_sweep(&cohort, &weight_grid(101), None).unwrap();
            let (i_max, _) = sweep
                .delta_var
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
            assert!((sweep.grid[i_max] - sweep.argmax_var_w.unwrap()).abs() <= 0.01);
        }
    }

    #[test]
    fn expansion_matches_direct_mixture_variance() {
        let cohort = random_cohort(7, 1);
        let s = cohort[0];
        let c = SweepCoefficients::from_cohort(&cohort).unwrap();
        for w in weight_grid(21) {
            let m = MixtureSsrt::new(w, s.theta_a, s.theta_b).unwrap();
            let direct = m.shape().variance - var(&s.theta_s);
            assert_relative_eq!(c.delta_var(w), direct, max_relative = 1e-9, epsilon = 1e-6);
        }
    }

    #[test]
    fn pspdt_attachment() {
        let cohort = random_cohort(3, 10);
        let cfg = PspdtConfig { k: 8, mc_replicates: 0, ..PspdtConfig::default() };
        let sweep = weight_sweep(&cohort, &weight_grid(5), Some(&cfg)).unwrap();
        let stats = sweep.pspdt_stat.unwrap();
        assert_eq!(stats.len(), 5);
        assert!(stats.iter().all(|d| (0.0..=1.0).contains(d)));
        assert!(sweep.pspdt_cutoff.unwrap() > 0.19);
    }

    proptest! {
        #[test]
        fn sweep_is_affine_and_concave(seed in 0u64..1000, n in 1usize..20) {
            let cohort = random_cohort(seed, n);
            let c = SweepCoefficients::from_cohort(&cohort).unwrap();
            let (x0, x1, x2) = (c.delta_mean(0.0), c.delta_mean(0.5), c.delta_mean(1.0));
            prop_assert!((x1 - 0.5 * (x0 + x2)).abs() < 1e-9 * (1.0 + x1.abs()));
            let (v0, v1, v2) = (c.delta_var(0.0), c.delta_var(0.5), c.delta_var(1.0));
            // second difference of a quadratic on step 1/2 equals a / 2
            prop_assert!((v0 - 2.0 * v1 + v2 - c.var_a / 2.0).abs() < 1e-6 * (1.0 + v1.abs()));
            prop_assert!(c.var_a <= 0.0);
        }
    }
}
