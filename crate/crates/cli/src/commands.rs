use crate::args::*;
use crate::output::{emit, to_json, Envelope, SchemaMismatch, SCHEMA_VERSION};
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use ssrt::analysis::{colonius_cdf, colonius_mixture_cdf, weight_grid, weight_sweep, ColoniusInputs};
use ssrt::bayesfit::{fit_ibpa, Cluster, ClusterFits, IbpaConfig, LikelihoodOptions, PosteriorSummary};
use ssrt::indices::{ssrt_weighted, ConstantSsrtReport, GoSource};
use ssrt::io;
use ssrt::mcmc::SamplerConfig;
use ssrt::racesim::{extract_views, meets_type_b_minimum, partition_clusters, simulate_race, ClusterPartition, Design, RaceProcesses, SstDataset};
use ssrt::rng::{child_seed, substream};
use ssrt::sotest::{ks_all, pspdt, KsTriple, PspdtConfig};
use ssrt::tsbpa::{fit_stage2, ClusterLabel, Stage2Config, SubjectTriples};
use ssrt::{ExGaussianParams, MixtureSsrt, ParametricDistribution, ShapeStats};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| ssrt::Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

fn design(a: &DesignArgs) -> Design {
    Design {
        n_trials: a.trials,
        stop_fraction: a.stop_fraction,
        initial_ssd_ms: a.initial_ssd,
        step_ms: a.step,
        block_size: a.block_size,
        placement: a.placement.into(),
    }
}

fn processes(a: &ProcessArgs) -> RaceProcesses {
    RaceProcesses { go: a.go, stop_a: a.stop, stop_b: a.stop_b.unwrap_or(a.stop) }
}

fn ibpa_config(m: &McmcArgs, seed: u64) -> IbpaConfig {
    IbpaConfig {
        n_chains: m.chains,
        sampler: SamplerConfig { n_iter: m.iter, n_burn: m.burn, ..SamplerConfig::default() },
        likelihood: LikelihoodOptions { integrator: m.integrator.into(), truncate_stop: m.truncate },
        seed,
        ..IbpaConfig::default()
    }
}

fn pspdt_config(o: &PspdtOptions, seed: u64) -> PspdtConfig {
    PspdtConfig {
        k: o.k,
        n: o.n,
        m: o.m,
        alpha: o.alpha,
        alternative: o.alternative.into(),
        mode: o.mode.into(),
        compat_coefficient: o.compat_coefficient,
        mc_replicates: o.mc_replicates,
        seed,
    }
}

#[derive(Serialize)]
struct SessionSummary {
    n_trials: usize,
    n_go: usize,
    n_stop: usize,
    inhibition_rate: Option<f64>,
    mean_ssd_ms: Option<f64>,
}

fn session_summary(d: &SstDataset) -> SessionSummary {
    let ssds: Vec<f64> = d.stop_trials().filter_map(|t| t.ssd_ms).collect();
    SessionSummary {
        n_trials: d.trials.len(),
        n_go: d.n_go(),
        n_stop: d.n_stop(),
        inhibition_rate: d.inhibition_rate(),
        mean_ssd_ms: (!ssds.is_empty()).then(|| ssds.iter().sum::<f64>() / ssds.len() as f64),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let d = simulate_race(&processes(&a.process), &design(&a.design), a.seed, false)?;
    let file = File::create(&a.out).map_err(|e| ssrt::Error::Io(format!("{}: {e}", a.out.display())))?;
    io::write_trials(&d, std::io::BufWriter::new(file))?;
    let env = Envelope::new("simulate", Some(a.seed), a, session_summary(&d));
    emit(a.summary.as_deref(), &to_json(&env)?)
}

#[derive(Serialize)]
struct PartitionReport {
    partition: ClusterPartition,
    n_go_a: usize,
    n_go_b: usize,
    n_stop_a: usize,
    n_stop_b: usize,
    w_a: f64,
    meets_type_b_minimum: bool,
}

pub fn partition(a: &InputArgs) -> Result<()> {
    let d = io::read_trials(open(&a.input)?)?;
    let p = partition_clusters(&d);
    let report = PartitionReport {
        n_go_a: p.go_a.len(),
        n_go_b: p.go_b.len(),
        n_stop_a: p.stop_a.len(),
        n_stop_b: p.stop_b.len(),
        w_a: p.w_a,
        meets_type_b_minimum: meets_type_b_minimum(&p, a.min_type_b),
        partition: p,
    };
    emit(a.out.as_deref(), &to_json(&Envelope::new("partition", None, a, report))?)
}

pub fn indices(a: &IndicesArgs) -> Result<()> {
    let d = io::read_trials(open(&a.input)?)?;
    let report = ssrt_weighted(&d, &partition_clusters(&d), a.go_source.into())?;
    emit(a.out.as_deref(), &to_json(&Envelope::new("indices", None, a, report))?)
}

fn cluster_view(d: &SstDataset, c: Cluster) -> SstDataset {
    let views = extract_views(d, &partition_clusters(d));
    match c {
        Cluster::S => views.full,
        Cluster::A => views.type_a,
        Cluster::B => views.type_b,
    }
}

#[derive(Serialize)]
struct IbpaReport {
    cluster: Cluster,
    n_go: usize,
    n_stop: usize,
    summary: PosteriorSummary,
    rhat: Vec<f64>,
    acceptance: Vec<Vec<f64>>,
}

pub fn fit_ibpa_cmd(a: &FitIbpaArgs) -> Result<()> {
    let d = io::read_trials(open(&a.input)?)?;
    let view = cluster_view(&d, a.cluster.into());
    let (chains, summary) = fit_ibpa(&view, &ibpa_config(&a.mcmc, a.seed))?;
    if let Some(path) = &a.dump_chains {
        let file = File::create(path).map_err(|e| ssrt::Error::Io(format!("{}: {e}", path.display())))?;
        io::write_chains(&chains.param_names, &chains.chains, std::io::BufWriter::new(file))?;
    }
    let report = IbpaReport {
        cluster: a.cluster.into(),
        n_go: view.n_go(),
        n_stop: view.n_stop(),
        summary,
        rhat: chains.rhat.clone(),
        acceptance: chains.chains.iter().map(|c| c.acceptance.clone()).collect(),
    };
    emit(a.out.as_deref(), &to_json(&Envelope::new("fit-ibpa", Some(a.seed), a, report))?)
}

pub fn fit_tsbpa_cmd(a: &FitTsbpaArgs) -> Result<()> {
    let rows = io::read_triples(open(&a.triples)?)?;
    let cluster = match a.cluster {
        ClusterArg::S => ClusterLabel::S,
        ClusterArg::A => ClusterLabel::A,
        ClusterArg::B => ClusterLabel::B,
    };
    let data = SubjectTriples { rows: rows.iter().map(|(_, r)| *r).collect(), cluster };
    let cfg = Stage2Config {
        n_chains: a.chains,
        sampler: SamplerConfig { n_iter: a.iter, n_burn: a.burn, ..SamplerConfig::default() },
        independent: a.independent,
        seed: a.seed,
    };
    let post = fit_stage2(&data, &cfg)?;
    let mut result = serde_json::to_value(&post)?;
    if let Value::Object(m) = &mut result {
        m.remove("chains");
        m.insert("n_subjects".into(), rows.len().into());
    }
    emit(a.out.as_deref(), &to_json(&Envelope::new("fit-tsbpa", Some(a.seed), a, result))?)
}

pub fn test_ks(a: &TestKsArgs) -> Result<()> {
    let x = io::read_samples(open(&a.x)?).with_context(|| format!("reading {}", a.x.display()))?;
    let y = io::read_samples(open(&a.y)?).with_context(|| format!("reading {}", a.y.display()))?;
    let result = ks_all(&x, &y)?;
    emit(a.out.as_deref(), &to_json(&Envelope::new("test-ks", None, a, result))?)
}

/// Accepts a bare `{mu, sigma, tau}`, a tagged distribution, or a `fit-ibpa`
/// output (its posterior-mean stop latency).
fn read_distribution(path: &Path) -> Result<ParametricDistribution> {
    let v: Value = serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if let Some(found) = v.get("schema_version") {
        if found.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(SchemaMismatch { found: found.clone(), path: path.display().to_string() }.into());
        }
        let theta = v
            .pointer("/result/summary/theta_stop")
            .ok_or_else(|| ssrt::Error::Precondition(format!("{}: no result.summary.theta_stop", path.display())))?;
        let p: ExGaussianParams = serde_json::from_value(theta.clone())?;
        return Ok(p.into());
    }
    let d = if v.get("kind").is_some() {
        serde_json::from_value(v)?
    } else {
        ParametricDistribution::ExGaussian(serde_json::from_value(v)?)
    };
    d.validate()?;
    Ok(d)
}

pub fn pspdt_cmd(a: &PspdtArgs) -> Result<()> {
    let d1 = read_distribution(&a.dist1)?;
    let d2 = read_distribution(&a.dist2)?;
    let result = pspdt(&d1, &d2, &pspdt_config(&a.options, a.seed))?;
    emit(a.out.as_deref(), &to_json(&Envelope::new("pspdt", Some(a.seed), a, result))?)
}

#[derive(Serialize)]
struct ColoniusPoint {
    t: f64,
    cdf: f64,
    /// CDF of the stop latency (or stop mixture) the inputs imply.
    reference_cdf: f64,
}

pub fn colonius(a: &ColoniusArgs) -> Result<()> {
    if a.points == 0 || !(a.t_max > 0.0) {
        return Err(ssrt::Error::Domain("need --points >= 1 and --t-max > 0".into()).into());
    }
    let grid: Vec<f64> = (1..=a.points).map(|i| a.t_max * i as f64 / a.points as f64).collect();
    let points = match (a.go_b, a.stop_b, a.ssd_b, a.w_a) {
        (Some(go_b), Some(stop_b), Some(ssd_b), Some(w_a)) => {
            let ia = ColoniusInputs { go: a.go, stop: a.stop, t_d: a.ssd };
            let ib = ColoniusInputs { go: go_b, stop: stop_b, t_d: ssd_b };
            let mix = MixtureSsrt::new(w_a, a.stop, stop_b)?;
            grid.iter()
                .map(|&t| Ok(ColoniusPoint { t, cdf: colonius_mixture_cdf(&ia, &ib, w_a, t)?, reference_cdf: mix.cdf(t) }))
                .collect::<ssrt::Result<Vec<_>>>()?
        }
        _ => grid
            .iter()
            .map(|&t| Ok(ColoniusPoint { t, cdf: colonius_cdf(&a.go, &a.stop, a.ssd, t)?, reference_cdf: a.stop.cdf(t) }))
            .collect::<ssrt::Result<Vec<_>>>()?,
    };
    emit(a.out.as_deref(), &to_json(&Envelope::new("colonius", None, a, points))?)
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let cohort = io::read_cohort(open(&a.cohort)?)?;
    let cfg = pspdt_config(&a.options, a.seed);
    let s = weight_sweep(&cohort, &weight_grid(a.points), a.pspdt.then_some(&cfg))?;
    if let Some(path) = &a.csv_out {
        let file = File::create(path).map_err(|e| ssrt::Error::Io(format!("{}: {e}", path.display())))?;
        io::write_sweep(&s, std::io::BufWriter::new(file))?;
    }
    emit(a.out.as_deref(), &to_json(&Envelope::new("sweep", Some(a.seed), a, s))?)
}

#[derive(Serialize)]
struct ClusterSummary {
    n_go: usize,
    n_stop: usize,
    theta_go: ExGaussianParams,
    theta_stop: ExGaussianParams,
    max_rhat: f64,
    warnings: Vec<String>,
}

fn cluster_summary(view: &SstDataset, s: &PosteriorSummary) -> ClusterSummary {
    ClusterSummary {
        n_go: view.n_go(),
        n_stop: view.n_stop(),
        theta_go: s.theta_go,
        theta_stop: s.theta_stop,
        max_rhat: s.max_rhat,
        warnings: s.warnings.clone(),
    }
}

/// One row of the individual comparison table: single versus mixture SSRT.
#[derive(Serialize)]
struct KsRow {
    d: f64,
    p: f64,
    d_greater: f64,
    p_greater: f64,
    d_less: f64,
    p_less: f64,
}

impl From<&KsTriple> for KsRow {
    fn from(k: &KsTriple) -> Self {
        KsRow {
            d: k.two_sided.statistic,
            p: k.two_sided.p_value,
            d_greater: k.greater.statistic,
            p_greater: k.greater.p_value,
            d_less: k.less.statistic,
            p_less: k.less.p_value,
        }
    }
}

#[derive(Serialize)]
struct Shapes {
    mean: f64,
    shape: ShapeStats,
}

#[derive(Serialize)]
struct PipelineReport {
    session: SessionSummary,
    w_a: f64,
    n_stop_a: usize,
    n_stop_b: usize,
    constant_indices: Option<ConstantSsrtReport>,
    constant_indices_error: Option<String>,
    single: ClusterSummary,
    type_a: ClusterSummary,
    type_b: ClusterSummary,
    mixture: MixtureSsrt,
    single_stats: Shapes,
    mixture_stats: Shapes,
    ks: KsRow,
    ks_detail: KsTriple,
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let d = match &a.input {
        Some(path) => io::read_trials(open(path)?)?,
        None => simulate_race(&processes(&a.process), &design(&a.design), a.seed, false)?,
    };
    if let Some(path) = &a.trials_out {
        let file = File::create(path).map_err(|e| ssrt::Error::Io(format!("{}: {e}", path.display())))?;
        io::write_trials(&d, std::io::BufWriter::new(file))?;
    }
    let p = partition_clusters(&d);
    let views = extract_views(&d, &p);
    let fits: ClusterFits = ssrt::bayesfit::fit_all_clusters(&d, &p, &ibpa_config(&a.mcmc, child_seed(a.seed, 1)))?;
    let single = fits.theta_s.theta_stop;
    let mixture = MixtureSsrt::new(fits.w_a, fits.theta_a.theta_stop, fits.theta_b.theta_stop)?;

    let ks_seed = child_seed(a.seed, 2);
    let (sd, md): (ParametricDistribution, ParametricDistribution) = (single.into(), mixture.into());
    let (xs, ys) = match a.ks_mode {
        ModeArg::Random => {
            (sd.sample_with(a.ks_points, &mut substream(ks_seed, 0)), md.sample_with(a.ks_points, &mut substream(ks_seed, 1)))
        }
        ModeArg::QuantileGrid => (sd.quantile_grid(a.ks_points)?, md.quantile_grid(a.ks_points)?),
    };
    let ks_detail = ks_all(&xs, &ys)?;

    let (constant_indices, constant_indices_error) = match ssrt_weighted(&d, &p, GoSource::default()) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = PipelineReport {
        session: session_summary(&d),
        w_a: p.w_a,
        n_stop_a: p.stop_a.len(),
        n_stop_b: p.stop_b.len(),
        constant_indices,
        constant_indices_error,
        single: cluster_summary(&views.full, &fits.theta_s),
        type_a: cluster_summary(&views.type_a, &fits.theta_a),
        type_b: cluster_summary(&views.type_b, &fits.theta_b),
        mixture,
        single_stats: Shapes { mean: single.mean(), shape: single.shape() },
        mixture_stats: Shapes { mean: mixture.mean(), shape: mixture.shape() },
        ks: KsRow::from(&ks_detail),
        ks_detail,
    };
    emit(a.out.as_deref(), &to_json(&Envelope::new("pipeline", Some(a.seed), a, report))?)
}
