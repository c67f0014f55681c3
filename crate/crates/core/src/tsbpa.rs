//! Two-stage Bayesian pooling of per-subject stop-parameter triples.
//!
//! Stage 1 (see [`crate::bayesfit`]) reduces each subject to posterior-mean
//! `(mu, sigma, tau)`. Stage 2 models the triples with a triangular
//! factorization of a trivariate normal:
//!
//! ```text
//! mu_i                 ~ N(m_mu,                         s_mu^2)
//! sigma_i | mu_i       ~ N(b20 + b21 mu_i,               s_sigma^2)
//! tau_i | mu_i,sigma_i ~ N(b30 + b31 mu_i + b32 sigma_i, s_tau^2)
//! ```
//!
//! Location coefficients have `N(0, 1000^2)` priors; scales have half-normal
//! priors with standard deviation 10, truncated to `[0, 1000]`. The three
//! rows are independent regressions, each sampled by Gibbs steps for the
//! coefficients and an independence Metropolis-Hastings step for the scale.

use crate::error::{Error, Result};
use crate::exgauss::ExGaussianParams;
use crate::mcmc::{summarize, Chain, SamplerConfig, Summary};
use crate::mixture::MixtureSsrt;
use crate::rng::substream;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Prior standard deviation of the location coefficients.
pub const COEF_PRIOR_SD: f64 = 1000.0;
/// Half-normal prior standard deviation of the scales.
pub const SCALE_PRIOR_SD: f64 = 10.0;
pub const SCALE_MAX: f64 = 1000.0;
/// Scales are kept at or above this value.
pub const SCALE_FLOOR: f64 = 1e-3;

pub const STAGE2_NAMES: [&str; 9] =
    ["mu_mu", "b20", "b21", "b30", "b31", "b32", "s_mu", "s_sigma", "s_tau"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterLabel {
    S,
    A,
    B,
}

/// Per-subject posterior-mean stop triples for one cluster type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTriples {
    pub rows: Vec<[f64; 3]>,
    pub cluster: ClusterLabel,
}

impl SubjectTriples {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 3 {
            return Err(Error::Precondition(format!("stage 2 needs at least 3 subjects, got {}", self.rows.len())));
        }
        if let Some(r) = self.rows.iter().find(|r| !r.iter().all(|&x| x > 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!("subject triples must be positive and finite, got {r:?}")));
        }
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> [f64; 3] {
        let n = self.rows.len() as f64;
        let mut m = [0.0; 3];
        for r in &self.rows {
            for j in 0..3 {
                m[j] += r[j] / n;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    pub n_chains: usize,
    pub sampler: SamplerConfig,
    /// Fix `b21 = b31 = b32 = 0` (uncorrelated parameters).
    pub independent: bool,
    pub seed: u64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            n_chains: 3,
            sampler: SamplerConfig { n_iter: 100_000, n_burn: 5_000, ..SamplerConfig::default() },
            independent: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Posterior {
    pub cluster: ClusterLabel,
    pub param_names: Vec<String>,
    /// Draws of the nine stage-2 parameters, in [`STAGE2_NAMES`] order.
    pub chains: Vec<Chain>,
    pub params: Vec<(String, Summary)>,
    /// Posterior mean over draws of the implied population mean triple.
    pub overall: ExGaussianParams,
    pub overall_summary: [Summary; 3],
    /// Implied correlations `(rho_mu_sigma, rho_mu_tau, rho_sigma_tau)`.
    pub correlations: [Summary; 3],
    pub max_rhat: f64,
    pub warnings: Vec<String>,
}

impl Stage2Posterior {
    pub fn get(&self, name: &str) -> Option<&Summary> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Implied population mean triple of one draw.
pub fn overall_triple(x: &[f64]) -> [f64; 3] {
    let mu = x[0];
    let sigma = x[1] + x[2] * mu;
    let tau = x[3] + x[4] * mu + x[5] * sigma;
    [mu, sigma, tau]
}

/// Covariance matrix implied by one draw of the triangular factorization.
pub fn implied_covariance(x: &[f64]) -> Matrix3<f64> {
    let (b21, b31, b32) = (x[2], x[4], x[5]);
    let (s_mu, s_sigma, s_tau) = (x[6], x[7], x[8]);
    // (mu, sigma, tau) = B e with e ~ N(0, diag(s^2)), B lower triangular
    let b = Matrix3::new(1.0, 0.0, 0.0, b21, 1.0, 0.0, b31 + b32 * b21, b32, 1.0);
    let d = Matrix3::from_diagonal(&Vector3::new(s_mu * s_mu, s_sigma * s_sigma, s_tau * s_tau));
    b * d * b.transpose()
}

pub fn implied_correlations(x: &[f64]) -> [f64; 3] {
    let c = implied_covariance(x);
    let r = |i: usize, j: usize| c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt();
    [r(0, 1), r(0, 2), r(1, 2)]
}

/// One conjugate linear regression `y = X b + e`, `e ~ N(0, s^2)`, with
/// `b ~ N(0, COEF_PRIOR_SD^2 I)` and a truncated half-normal prior on `s`.
///
/// Covariates are centred internally for conditioning; the prior is mapped
/// into the centred coordinates exactly.
struct Regression {
    /// Maps centred coefficients back to the original ones: `b = T c`.
    t: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    prior_prec: DMatrix<f64>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Regression {
    fn new(covariates: &[Vec<f64>], y: &[f64]) -> Self {
        let n = y.len();
        let k = covariates.len() + 1;
        let means: Vec<f64> = covariates.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] - means[j - 1] });
        // original intercept b0 = c0 - sum_j c_j mean_j; slopes unchanged
        let t = DMatrix::from_fn(k, k, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (0, j) => -means[j - 1],
            (i, j) if i == j => 1.0,
            _ => 0.0,
        });
        let prior_prec = t.transpose() * &t / (COEF_PRIOR_SD * COEF_PRIOR_SD);
        let y = DVector::from_column_slice(y);
        Regression { xtx: x.transpose() * &x, xty: x.transpose() * &y, t, prior_prec, x, y }
    }

    fn draw_coefficients<R: Rng + ?Sized>(&self, var: f64, rng: &mut R) -> Result<DVector<f64>> {
        let prec = &self.xtx / var + &self.prior_prec;
        let chol = prec
            .cholesky()
            .ok_or_else(|| Error::Precondition("stage-2 posterior precision is not positive definite".into()))?;
        let mean = chol.solve(&(&self.xty / var));
        let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        // c = mean + L^-T z has covariance prec^-1
        let l = chol.l();
        let dev = l.transpose().solve_upper_triangular(&z).expect("triangular factor is invertible");
        Ok(mean + dev)
    }

    fn ssr(&self, c: &DVector<f64>) -> f64 {
        (&self.y - &self.x * c).norm_squared()
    }

    /// Independence MH for `v = s^2`: propose from the likelihood's inverse
    /// gamma kernel, accept with the prior ratio.
    fn update_variance<R: Rng + ?Sized>(&self, v: f64, c: &DVector<f64>, rng: &mut R) -> (f64, bool) {
        let n = self.y.len() as f64;
        let shape = 0.5 * (n - 1.0);
        let rate = (0.5 * self.ssr(c)).max(1e-300);
        let g = Gamma::new(shape, 1.0 / rate).expect("positive shape");
        let prop = (1.0 / g.sample(rng)).max(SCALE_FLOOR * SCALE_FLOOR);
        let u: f64 = rng.random();
        if prop > SCALE_MAX * SCALE_MAX {
            return (v, false);
        }
        let log_ratio = -(prop - v) / (2.0 * SCALE_PRIOR_SD * SCALE_PRIOR_SD);
        if u.ln() < log_ratio {
            (prop, true)
        } else {
            (v, false)
        }
    }
}

fn run_chain(data: &SubjectTriples, cfg: &Stage2Config, chain: usize) -> Result<Chain> {
    let mut rng = substream(cfg.seed, chain as u64);
    let (mu, sigma, tau) = (data.column(0), data.column(1), data.column(2));
    let regressions = if cfg.independent {
        [Regression::new(&[], &mu), Regression::new(&[], &sigma), Regression::new(&[], &tau)]
    } else {
        [
            Regression::new(&[], &mu),
            Regression::new(&[mu.clone()], &sigma),
            Regression::new(&[mu.clone(), sigma.clone()], &tau),
        ]
    };
    // overdispersed start for the variances
    let mut vars: [f64; 3] = std::array::from_fn(|_| rng.random_range(1.0..SCALE_MAX).powi(2));
    let mut accepts = [0usize; 3];
    let mut draws = Vec::with_capacity(cfg.sampler.n_kept() * 9);
    for iter in 0..cfg.sampler.n_iter {
        let mut coefs: Vec<DVector<f64>> = Vec::with_capacity(3);
        for (r, v) in regressions.iter().zip(vars.iter_mut()) {
            let c = r.draw_coefficients(*v, &mut rng)?;
            let (nv, acc) = r.update_variance(*v, &c, &mut rng);
            *v = nv;
            if acc && iter >= cfg.sampler.n_burn {
                accepts[coefs.len()] += 1;
            }
            coefs.push(&r.t * c);
        }
        if iter >= cfg.sampler.n_burn {
            let (b1, b2) = (&coefs[1], &coefs[2]);
            let slope = |b: &DVector<f64>, i: usize| if cfg.independent { 0.0 } else { b[i] };
            draws.extend_from_slice(&[
                coefs[0][0],
                b1[0],
                slope(b1, 1),
                b2[0],
                slope(b2, 1),
                slope(b2, 2),
                vars[0].sqrt(),
                vars[1].sqrt(),
                vars[2].sqrt(),
            ]);
        }
    }
    let kept = cfg.sampler.n_kept() as f64;
    let mut acceptance = vec![1.0; 6];
    acceptance.extend(accepts.iter().map(|&a| a as f64 / kept));
    Ok(Chain { dim: 9, draws, acceptance, step_sizes: Vec::new() })
}

/// Samples the stage-2 posterior for one cluster's subject triples.
pub fn fit_stage2(data: &SubjectTriples, cfg: &Stage2Config) -> Result<Stage2Posterior> {
    data.validate()?;
    cfg.sampler.validate()?;
    if cfg.n_chains == 0 {
        return Err(Error::Precondition("need at least one chain".into()));
    }
    let chains: Vec<Chain> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, cfg, c))
        .collect::<Result<_>>()?;

    let per_chain = |f: &dyn Fn(&[f64]) -> f64| -> Vec<Vec<f64>> {
        chains.iter().map(|c| (0..c.len()).map(|i| f(c.draw(i))).collect()).collect()
    };
    let params: Vec<(String, Summary)> = STAGE2_NAMES
        .iter()
        .enumerate()
        .map(|(j, n)| (n.to_string(), summarize(&per_chain(&|x: &[f64]| x[j]))))
        .collect();
    let overall_summary: [Summary; 3] = std::array::from_fn(|k| summarize(&per_chain(&|x: &[f64]| overall_triple(x)[k])));
    let correlations: [Summary; 3] = std::array::from_fn(|k| {
        if cfg.independent {
            Summary { mean: 0.0, sd: 0.0, q025: 0.0, q975: 0.0, rhat: 1.0 }
        } else {
            summarize(&per_chain(&|x: &[f64]| implied_correlations(x)[k]))
        }
    });
    let max_rhat = params
        .iter()
        .map(|(_, s)| s.rhat)
        .chain(overall_summary.iter().map(|s| s.rhat))
        .filter(|r| r.is_finite())
        .fold(1.0, f64::max);

    let mut warnings = Vec::new();
    for (j, name) in ["mu", "sigma", "tau"].iter().enumerate() {
        let col = data.column(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        if col.iter().all(|x| (x - m).abs() <= 1e-9 * m.abs().max(1.0)) {
            warnings.push(format!("degenerate data: every subject has the same {name}; scales are pinned near 0"));
        }
    }
    if max_rhat > 1.1 {
        warnings.push(format!("chains may not have converged: max R-hat {max_rhat:.3}"));
    }
    Ok(Stage2Posterior {
        cluster: data.cluster,
        param_names: STAGE2_NAMES.iter().map(|n| n.to_string()).collect(),
        overall: ExGaussianParams::from_array(std::array::from_fn(|k| overall_summary[k].mean)),
        overall_summary,
        correlations,
        params,
        chains,
        max_rhat,
        warnings,
    })
}

/// Overall single and mixture SSRT distributions from the three cluster fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallDistributions {
    pub single: ExGaussianParams,
    pub mixture: MixtureSsrt,
}

pub fn overall_distributions(
    stage2_s: &ExGaussianParams,
    stage2_a: &ExGaussianParams,
    stage2_b: &ExGaussianParams,
    w_bar: f64,
) -> Result<OverallDistributions> {
    stage2_s.validate()?;
    Ok(OverallDistributions { single: *stage2_s, mixture: MixtureSsrt::new(w_bar, *stage2_a, *stage2_b)? })
}

/// Target moments of a synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub mean: [f64; 3],
    pub sd: [f64; 3],
    /// `(rho_mu_sigma, rho_mu_tau, rho_sigma_tau)`.
    pub corr: [f64; 3],
}

impl CohortSpec {
    pub fn covariance(&self) -> Matrix3<f64> {
        let [r01, r02, r12] = self.corr;
        let r = Matrix3::new(1.0, r01, r02, r01, 1.0, r12, r02, r12, 1.0);
        let d = Matrix3::from_diagonal(&Vector3::from(self.sd));
        d * r * d
    }
}

/// Draws `n` trivariate-normal subject triples. With `exact_moments` the
/// sample mean and covariance equal the targets exactly, which isolates
/// estimator error from cohort sampling noise. Cohorts with a non-positive
/// entry are redrawn.
pub fn synthetic_cohort(spec: &CohortSpec, n: usize, seed: u64, exact_moments: bool) -> Result<SubjectTriples> {
    if n < 4 {
        return Err(Error::Precondition("a synthetic cohort needs at least 4 subjects".into()));
    }
    let target = spec
        .covariance()
        .cholesky()
        .ok_or_else(|| Error::ParameterDomain("cohort covariance is not positive definite".into()))?
        .l();
    for attempt in 0..1000u64 {
        let mut rng = substream(seed, attempt);
        let mut z = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        if exact_moments {
            for j in 0..3 {
                let m = z.column(j).mean();
                z.column_mut(j).add_scalar_mut(-m);
            }
            let cov = z.transpose() * &z / (n as f64 - 1.0);
            let l = cov.cholesky().expect("sample covariance of continuous draws is positive definite").l();
            // whiten: rows z_i -> L^-1 z_i
            let li = l.try_inverse().expect("triangular factor is invertible");
            z = &z * li.transpose();
        }
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let v = target * Vector3::new(z[(i, 0)], z[(i, 1)], z[(i, 2)]);
                std::array::from_fn(|j| spec.mean[j] + v[j])
            })
            .collect();
        if rows.iter().all(|r| r.iter().all(|&x| x > 0.0)) {
            return Ok(SubjectTriples { rows, cluster: ClusterLabel::S });
        }
    }
    Err(Error::Precondition("could not draw a cohort with all-positive triples".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> Stage2Config {
        Stage2Config {
            n_chains: 3,
            sampler: SamplerConfig { n_iter: 6_000, n_burn: 1_000, ..SamplerConfig::default() },
            independent: false,
            seed,
        }
    }

    const SPEC: CohortSpec = CohortSpec { mean: [78.4, 93.9, 73.1], sd: [20.0, 25.0, 25.0], corr: [0.20, 0.64, 0.66] };

    fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn exact_moment_cohort_hits_targets() {
        let c = synthetic_cohort(&SPEC, 200, 4, true).unwrap();
        let m = c.column_means();
        for j in 0..3 {
            assert!((m[j] - SPEC.mean[j]).abs() < 1e-9);
        }
        let (mu, sg, ta) = (c.column(0), c.column(1), c.column(2));
        assert!((sample_corr(&mu, &sg) - 0.20).abs() < 1e-9);
        assert!((sample_corr(&mu, &ta) - 0.64).abs() < 1e-9);
        assert!((sample_corr(&sg, &ta) - 0.66).abs() < 1e-9);
    }

    #[test]
    fn implied_covariance_of_known_factorization() {
        // generator covariance mapped to regression coefficients and back
        let cov = SPEC.covariance();
        let b21 = cov[(0, 1)] / cov[(0, 0)];
        let s_sigma = (cov[(1, 1)] - b21 * cov[(0, 1)]).sqrt();
        let sub = nalgebra::Matrix2::new(cov[(0, 0)], cov[(0, 1)], cov[(0, 1)], cov[(1, 1)]);
        let beta = sub.try_inverse().unwrap() * nalgebra::Vector2::new(cov[(0, 2)], cov[(1, 2)]);
        let s_tau = (cov[(2, 2)] - beta.dot(&nalgebra::Vector2::new(cov[(0, 2)], cov[(1, 2)]))).sqrt();
        let x = [0.0, 0.0, b21, 0.0, beta[0], beta[1], SPEC.sd[0], s_sigma, s_tau];
        let c = implied_covariance(&x);
        assert!((c - cov).abs().max() < 1e-9);
        let r = implied_correlations(&x);
        assert!((r[0] - 0.20).abs() < 1e-12 && (r[1] - 0.64).abs() < 1e-12 && (r[2] - 0.66).abs() < 1e-12);
    }

    #[test]
    fn recovers_exact_moment_cohort() {
        let c = synthetic_cohort(&SPEC, 200, 7, true).unwrap();
        let post = fit_stage2(&c, &quick(1)).unwrap();
        for j in 0..3 {
            assert!((post.overall_summary[j].mean - SPEC.mean[j]).abs() < 3.0, "{j}: {:?}", post.overall);
            assert!((post.correlations[j].mean - SPEC.corr[j]).abs() < 0.1, "{:?}", post.correlations[j]);
        }
        assert!(post.max_rhat < 1.05);
        let s = post.get("s_mu").unwrap();
        assert!(s.mean > 0.0 && s.q975 <= SCALE_MAX);
    }

    #[test]
    fn zero_correlation_cohort_has_null_slopes() {
        let spec = CohortSpec { corr: [0.0, 0.0, 0.0], ..SPEC };
        let c = synthetic_cohort(&spec, 200, 3, true).unwrap();
        let post = fit_stage2(&c, &quick(2)).unwrap();
        for name in ["b21", "b31", "b32"] {
            let s = post.get(name).unwrap();
            assert!(s.mean.abs() < 2.0 * s.sd, "{name}: {s:?}");
        }
    }

    #[test]
    fn repeated_triple_is_a_point_mass() {
        let data = SubjectTriples { rows: vec![[120.0, 60.0, 80.0]; 10], cluster: ClusterLabel::A };
        let post = fit_stage2(&data, &quick(3)).unwrap();
        for (j, want) in [120.0, 60.0, 80.0].iter().enumerate() {
            assert!((post.overall_summary[j].mean - want).abs() < 1.0, "{:?}", post.overall);
        }
        assert!(!post.warnings.is_empty());
        assert!(post.chains.iter().all(|c| c.column(6).iter().all(|&s| s >= SCALE_FLOOR)));
    }

    #[test]
    fn independent_mode_matches_arithmetic_means() {
        let c = synthetic_cohort(&SPEC, 60, 9, false).unwrap();
        let cfg = Stage2Config { independent: true, ..quick(4) };
        let post = fit_stage2(&c, &cfg).unwrap();
        let m = c.column_means();
        for j in 0..3 {
            assert!((post.overall_summary[j].mean - m[j]).abs() < 0.2, "{j}: {:?} vs {m:?}", post.overall);
        }
        assert_eq!(post.get("b21").unwrap().mean, 0.0);
    }

    #[test]
    fn location_shift_moves_the_overall_mean() {
        let c = synthetic_cohort(&SPEC, 100, 12, false).unwrap();
        let shifted = SubjectTriples {
            rows: c.rows.iter().map(|r| [r[0] + 50.0, r[1], r[2]]).collect(),
            cluster: c.cluster,
        };
        let a = fit_stage2(&c, &quick(5)).unwrap();
        let b = fit_stage2(&shifted, &quick(5)).unwrap();
        let d = b.overall_summary[0].mean - a.overall_summary[0].mean;
        assert!((d - 50.0).abs() < 0.5, "{d}");
    }

    #[test]
    fn implied_correlation_matrix_is_positive_definite_on_every_draw() {
        let c = synthetic_cohort(&SPEC, 44, 2, false).unwrap();
        let post = fit_stage2(&c, &quick(6)).unwrap();
        for chain in &post.chains {
            for i in 0..chain.len() {
                assert!(implied_covariance(chain.draw(i)).cholesky().is_some());
            }
        }
    }

    #[test]
    fn too_few_subjects() {
        let data = SubjectTriples { rows: vec![[1.0, 2.0, 3.0]; 2], cluster: ClusterLabel::S };
        assert!(matches!(fit_stage2(&data, &quick(0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn overall_distributions_from_table4_triples() {
        let s = ExGaussianParams::new(78.4, 93.9, 73.1).unwrap();
        let a = ExGaussianParams::new(94.0, 134.5, 104.8).unwrap();
        let b = ExGaussianParams::new(90.9, 142.3, 99.0).unwrap();
        let o = overall_distributions(&s, &a, &b, 0.59).unwrap();
        assert!((o.single.mean() - 151.5).abs() < 1e-9);
        assert!((o.mixture.mean() - 195.2).abs() <= 0.1);
        let only_a = overall_distributions(&s, &a, &b, 1.0).unwrap();
        assert_eq!(only_a.mixture.cdf(200.0), a.cdf(200.0));
    }
}
