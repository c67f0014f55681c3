//! Stochastic-order tests: two-sample Kolmogorov-Smirnov, the averaged-KS
//! paired samples parametric distribution test (PSPDT), and the paired t-test.
//!
//! One-sided alternatives are named by the stochastic order of `x` relative
//! to `y`: `Less` (x is stochastically smaller, so `F_x >= F_y`) uses
//! `D = max(F_x - F_y)`; `Greater` uses `D = max(F_y - F_x)`.

use crate::dist::ParametricDistribution;
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub n: usize,
    pub m: usize,
}

/// `(max(F_x - F_y), max(F_y - F_x))` over all pooled sample points, with
/// both ECDFs right-continuous.
fn one_sided_statistics(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut d_xy, mut d_yx) = (0.0f64, 0.0f64);
    while i < xs.len() || j < ys.len() {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        let diff = i as f64 / n - j as f64 / m;
        d_xy = d_xy.max(diff);
        d_yx = d_yx.max(-diff);
    }
    (d_xy, d_yx)
}

/// Asymptotic Kolmogorov survival `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-theta form, fast for small lambda:
        // 1 - Q = sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=6).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS statistic for sample sizes `n`, `m`.
pub fn ks_p_value(d: f64, n: usize, m: usize, alternative: Alternative) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    match alternative {
        Alternative::TwoSided => kolmogorov_sf(ne.sqrt() * d),
        _ => (-2.0 * ne * d * d).exp().min(1.0),
    }
}

pub fn ks_two_sample(x: &[f64], y: &[f64], alternative: Alternative) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("KS test needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS test samples contain NaN".into()));
    }
    let (d_xy, d_yx) = one_sided_statistics(x, y);
    let statistic = match alternative {
        Alternative::TwoSided => d_xy.max(d_yx),
        Alternative::Less => d_xy,
        Alternative::Greater => d_yx,
    };
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, x.len(), y.len(), alternative),
        alternative,
        n: x.len(),
        m: y.len(),
    })
}

/// KS statistics for all three alternatives, as reported per subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTriple {
    pub two_sided: KsResult,
    pub greater: KsResult,
    pub less: KsResult,
}

pub fn ks_all(x: &[f64], y: &[f64]) -> Result<KsTriple> {
    Ok(KsTriple {
        two_sided: ks_two_sample(x, y, Alternative::TwoSided)?,
        greater: ks_two_sample(x, y, Alternative::Greater)?,
        less: ks_two_sample(x, y, Alternative::Less)?,
    })
}

/// How the PSPDT obtains its `n` and `m` points per distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Independent random draws for each of the K pairs.
    #[default]
    Random,
    /// Mid-point quantiles `Q((i - 1/2)/n)`; every pair is identical.
    QuantileGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PspdtConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub alternative: Alternative,
    pub mode: SampleMode,
    /// Use the constant `sqrt(-ln(1/2)/2)` in place of `c(alpha)`.
    pub compat_coefficient: bool,
    /// Null replicates for the Monte Carlo p-value; 0 skips it.
    pub mc_replicates: usize,
    pub seed: u64,
}

impl Default for PspdtConfig {
    fn default() -> Self {
        PspdtConfig {
            k: 44,
            n: 96,
            m: 96,
            alpha: 0.05,
            alternative: Alternative::TwoSided,
            mode: SampleMode::Random,
            compat_coefficient: false,
            mc_replicates: 999,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PspdtResult {
    pub d_bar: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub alternative: Alternative,
    pub coefficient: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub per_k: Vec<f64>,
    /// Single-pair asymptotic p-value evaluated at `d_bar`.
    pub asymptotic_p_value: f64,
    /// `(1 + #{null d_bar >= observed}) / (1 + R)`, if requested.
    pub mc_p_value: Option<f64>,
}

/// `c(alpha)` of the asymptotic KS cutoff `c(alpha) sqrt(1/n + 1/m)`.
pub fn critical_coefficient(alpha: f64, alternative: Alternative, compat: bool) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if compat {
        return Ok((-0.5 * 0.5f64.ln()).sqrt());
    }
    Ok(match alternative {
        Alternative::TwoSided => (-0.5 * (alpha / 2.0).ln()).sqrt(),
        _ => (-0.5 * alpha.ln()).sqrt(),
    })
}

fn statistic(x: &[f64], y: &[f64], alternative: Alternative) -> f64 {
    let (d_xy, d_yx) = one_sided_statistics(x, y);
    match alternative {
        Alternative::TwoSided => d_xy.max(d_yx),
        Alternative::Less => d_xy,
        Alternative::Greater => d_yx,
    }
}

/// Averaged KS statistic under a common continuous distribution. KS is
/// distribution-free, so uniform samples serve for any null.
fn null_d_bar<R: Rng>(cfg: &PspdtConfig, rng: &mut R) -> f64 {
    let mut sum = 0.0;
    for _ in 0..cfg.k {
        let x: Vec<f64> = (0..cfg.n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..cfg.m).map(|_| rng.random()).collect();
        sum += statistic(&x, &y, cfg.alternative);
    }
    sum / cfg.k as f64
}

/// Averages K two-sample KS statistics between samples of `dist1` and
/// `dist2` and compares the mean with the single-pair cutoff.
pub fn pspdt(dist1: &ParametricDistribution, dist2: &ParametricDistribution, cfg: &PspdtConfig) -> Result<PspdtResult> {
    dist1.validate()?;
    dist2.validate()?;
    if cfg.k == 0 || cfg.n < 2 || cfg.m < 2 {
        return Err(Error::Precondition("PSPDT needs K >= 1 and n, m >= 2".into()));
    }
    let coefficient = critical_coefficient(cfg.alpha, cfg.alternative, cfg.compat_coefficient)?;
    let per_k: Vec<f64> = match cfg.mode {
        SampleMode::QuantileGrid => {
            let d = statistic(&dist1.quantile_grid(cfg.n)?, &dist2.quantile_grid(cfg.m)?, cfg.alternative);
            vec![d; cfg.k]
        }
        SampleMode::Random => (0..cfg.k)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(cfg.seed, k as u64);
                let x = dist1.sample_with(cfg.n, &mut rng);
                let y = dist2.sample_with(cfg.m, &mut rng);
                statistic(&x, &y, cfg.alternative)
            })
            .collect(),
    };
    let d_bar = per_k.iter().sum::<f64>() / cfg.k as f64;
    let critical_value = coefficient * (1.0 / cfg.n as f64 + 1.0 / cfg.m as f64).sqrt();
    let mc_p_value = (cfg.mc_replicates > 0).then(|| {
        let exceed = (0..cfg.mc_replicates)
            .into_par_iter()
            .filter(|&r| {
                let mut rng = substream(cfg.seed, (1u64 << 32) + r as u64);
                null_d_bar(cfg, &mut rng) >= d_bar
            })
            .count();
        (1 + exceed) as f64 / (1 + cfg.mc_replicates) as f64
    });
    Ok(PspdtResult {
        d_bar,
        k: cfg.k,
        n: cfg.n,
        m: cfg.m,
        alternative: cfg.alternative,
        coefficient,
        critical_value,
        reject: d_bar > critical_value,
        per_k,
        asymptotic_p_value: ks_p_value(d_bar, cfg.n, cfg.m, cfg.alternative),
        mc_p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    /// Two-sided p-value; `None` when the differences have zero variance.
    pub p_value: Option<f64>,
}

/// Paired t-test on `a - b` with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Domain("paired samples must have equal length".into()));
    }
    if a.len() < 2 {
        return Err(Error::Domain("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean_diff = d.iter().sum::<f64>() / n;
    let sd_diff = (d.iter().map(|x| (x - mean_diff).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd_diff == 0.0 {
        return Ok(PairedTTest { n: d.len(), mean_diff, sd_diff, t: None, ci95: None, p_value: None });
    }
    let se = sd_diff / n.sqrt();
    let t = mean_diff / se;
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let p = 2.0 * dist.sf(t.abs());
    let q = dist.inverse_cdf(0.975);
    Ok(PairedTTest {
        n: d.len(),
        mean_diff,
        sd_diff,
        t: Some(t),
        ci95: Some((mean_diff - q * se, mean_diff + q * se)),
        p_value: Some(p.min(1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exgauss::ExGaussianParams;
    use crate::mixture::MixtureSsrt;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(mu: f64, sigma: f64, tau: f64) -> ExGaussianParams {
        ExGaussianParams::new(mu, sigma, tau).unwrap()
    }

    #[test]
    fn identical_and_disjoint_samples() {
        let x = [1.0, 2.0, 3.0, 3.0];
        let r = ks_two_sample(&x, &x, Alternative::TwoSided).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let y = [10.0, 11.0];
        assert_eq!(ks_two_sample(&x, &y, Alternative::TwoSided).unwrap().statistic, 1.0);
        // x entirely below y: x is stochastically smaller
        assert_eq!(ks_two_sample(&x, &y, Alternative::Less).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&x, &y, Alternative::Greater).unwrap().statistic, 0.0);
        assert!(ks_two_sample(&[], &y, Alternative::TwoSided).is_err());
    }

    #[test]
    fn ties_use_right_continuous_ecdfs() {
        let r = ks_two_sample(&[1.0, 2.0], &[2.0, 3.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn published_p_values_at_n_96() {
        // statistics and asymptotic p-values reported for 96-point comparisons
        let two = ks_p_value(26.0 / 96.0, 96, 96, Alternative::TwoSided);
        assert!((two - 0.0017).abs() < 5e-5, "{two}");
        assert!((ks_p_value(26.0 / 96.0, 96, 96, Alternative::Less) - 0.0009).abs() < 5e-5);
        assert!((ks_p_value(4.0 / 96.0, 96, 96, Alternative::Greater) - 0.8465).abs() < 5e-5);
        assert!((ks_p_value(15.0 / 96.0, 96, 96, Alternative::Less) - 0.0960).abs() < 5e-5);
        assert!((ks_p_value(19.0 / 96.0, 96, 96, Alternative::TwoSided) - 0.046547).abs() < 5e-5);
    }

    #[test]
    fn kolmogorov_series_branches_agree() {
        for &l in &[0.9, 0.95, 1.0, 1.05] {
            let c = -std::f64::consts::PI.powi(2) / (8.0 * l * l);
            let theta: f64 = (1..=6).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
            let small = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / l * theta;
            let large: f64 = 2.0 * (1..=100).map(|k: i32| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * l * l).exp()).sum::<f64>();
            assert_relative_eq!(small, large, max_relative = 1e-12);
        }
        assert_relative_eq!(kolmogorov_sf(1.3580986393225505), 0.05, max_relative = 1e-9);
    }

    #[test]
    fn critical_values() {
        let c = critical_coefficient(0.05, Alternative::TwoSided, false).unwrap();
        assert_relative_eq!(c, 1.358_101_515_740_619_5, max_relative = 1e-12);
        assert!((c * (2.0f64 / 96.0).sqrt() - 0.196).abs() < 5e-4);
        let compat = critical_coefficient(0.05, Alternative::TwoSided, true).unwrap();
        assert!((compat - 0.589).abs() < 5e-4);
        assert!(critical_coefficient(1.5, Alternative::TwoSided, false).is_err());
    }

    #[test]
    fn pspdt_with_k_one_is_the_ks_test() {
        let d1: ParametricDistribution = p(78.4, 93.9, 73.1).into();
        let d2: ParametricDistribution = p(120.0, 93.9, 73.1).into();
        let cfg = PspdtConfig { k: 1, mc_replicates: 0, seed: 3, ..PspdtConfig::default() };
        let r = pspdt(&d1, &d2, &cfg).unwrap();
        let mut rng = substream(3, 0);
        let x = d1.sample_with(96, &mut rng);
        let y = d2.sample_with(96, &mut rng);
        let ks = ks_two_sample(&x, &y, Alternative::TwoSided).unwrap();
        assert_eq!(r.d_bar, ks.statistic);
        assert_eq!(r.asymptotic_p_value, ks.p_value);
    }

    #[test]
    fn pspdt_table4_decisions() {
        let single: ParametricDistribution = p(78.4, 93.9, 73.1).into();
        let a = p(94.0, 134.5, 104.8);
        let b = p(90.9, 142.3, 99.0);
        let mixture: ParametricDistribution = MixtureSsrt::new(0.59, a, b).unwrap().into();
        let cfg = PspdtConfig { mc_replicates: 199, seed: 11, ..PspdtConfig::default() };
        let sm = pspdt(&single, &mixture, &cfg).unwrap();
        assert!(sm.reject, "{}", sm.d_bar);
        assert!(sm.mc_p_value.unwrap() < 0.01);
        let ba = pspdt(&b.into(), &a.into(), &cfg).unwrap();
        assert!(!ba.reject, "{}", ba.d_bar);
        assert_relative_eq!(sm.d_bar, sm.per_k.iter().sum::<f64>() / 44.0, max_relative = 1e-12);
    }

    #[test]
    fn quantile_grid_mode_is_deterministic() {
        let d1: ParametricDistribution = p(78.4, 93.9, 73.1).into();
        let d2: ParametricDistribution = p(94.0, 134.5, 104.8).into();
        let cfg = PspdtConfig { mode: SampleMode::QuantileGrid, mc_replicates: 0, ..PspdtConfig::default() };
        let r = pspdt(&d1, &d2, &cfg).unwrap();
        assert!(r.per_k.iter().all(|&d| d == r.per_k[0]));
        assert_relative_eq!(r.d_bar, r.per_k[0], max_relative = 1e-12);
    }

    #[test]
    fn paired_t_hand_computed() {
        // d = (1, 2, 3, 4, 10): mean 4, sd sqrt(12.5), t = 4 / (sqrt(12.5)/sqrt(5)) = 2.529822128
        let a = [11.0, 12.0, 13.0, 14.0, 20.0];
        let b = [10.0; 5];
        let r = paired_t_test(&a, &b).unwrap();
        assert_relative_eq!(r.mean_diff, 4.0);
        assert_relative_eq!(r.t.unwrap(), 2.529_822_128_134_703_5, max_relative = 1e-12);
        // t distribution with 4 df, two-sided (scipy.stats.t.sf(2.5298..., 4) * 2)
        assert_relative_eq!(r.p_value.unwrap(), 0.064_676_893_956_353_04, max_relative = 1e-6);
        let (lo, hi) = r.ci95.unwrap();
        assert!(lo < 4.0 && hi > 4.0);
    }

    #[test]
    fn paired_t_degenerate_cases() {
        let b = [1.0, 2.0, 3.0];
        let a: Vec<f64> = b.iter().map(|x| x + 10.0).collect();
        let r = paired_t_test(&a, &b).unwrap();
        assert_eq!(r.mean_diff, 10.0);
        assert!(r.p_value.is_none());
        assert_eq!(paired_t_test(&b, &b).unwrap().mean_diff, 0.0);
        assert!(paired_t_test(&a, &b[..2]).is_err());
    }

    proptest! {
        #[test]
        fn two_sided_is_max_of_one_sided(x in prop::collection::vec(0.0..100.0f64, 1..40),
                                         y in prop::collection::vec(0.0..100.0f64, 1..40)) {
            let two = ks_two_sample(&x, &y, Alternative::TwoSided).unwrap();
            let g = ks_two_sample(&x, &y, Alternative::Greater).unwrap();
            let l = ks_two_sample(&x, &y, Alternative::Less).unwrap();
            prop_assert_eq!(two.statistic, g.statistic.max(l.statistic));
            prop_assert!((0.0..=1.0).contains(&two.statistic) && (0.0..=1.0).contains(&two.p_value));
        }

        #[test]
        fn p_value_decreases_in_d(d1 in 0.0..1.0f64, d2 in 0.0..1.0f64, n in 2usize..300, m in 2usize..300) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            for alt in [Alternative::TwoSided, Alternative::Less] {
                prop_assert!(ks_p_value(lo, n, m, alt) >= ks_p_value(hi, n, m, alt));
            }
        }
    }
}
