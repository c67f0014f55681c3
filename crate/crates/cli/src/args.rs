use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ssrt::bayesfit::{Cluster, InhibitIntegrator};
use ssrt::indices::GoSource;
use ssrt::racesim::Placement;
use ssrt::sotest::{Alternative, SampleMode};
use ssrt::ExGaussianParams;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "ssrt", version, about = "Stop-signal reaction time distributions: simulation, fitting and stochastic-order tests")]
pub struct Cli {
    /// Worker threads for chains and replicates (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SSRT_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a tracking stop-signal session and write its trial CSV.
    Simulate(SimulateArgs),
    /// Split a session into type-A and type-B clusters.
    Partition(InputArgs),
    /// Constant SSRT indices (crude, integration, weighted).
    Indices(IndicesArgs),
    /// Individual Bayesian fit of the race model to one cluster.
    FitIbpa(FitIbpaArgs),
    /// Stage-2 pooling of per-subject stop triples.
    FitTsbpa(FitTsbpaArgs),
    /// Two-sample Kolmogorov-Smirnov tests on two sample files.
    TestKs(TestKsArgs),
    /// Averaged KS test between two parametric distributions.
    Pspdt(PspdtArgs),
    /// Colonius retrieval of the SSRT CDF on a grid.
    Colonius(ColoniusArgs),
    /// Mixture-versus-single disparities across type-A weights.
    Sweep(SweepArgs),
    /// Simulate (or read), partition, fit all clusters and compare single and mixture SSRT.
    Pipeline(PipelineArgs),
}

/// Parses `mu,sigma,tau`.
pub fn parse_triple(s: &str) -> Result<ExGaussianParams, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 3 {
        return Err(format!("expected mu,sigma,tau, got {} values", v.len()));
    }
    ExGaussianParams::new(v[0], v[1], v[2]).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementArg {
    Independent,
    Blocked,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Independent => Placement::Independent,
            PlacementArg::Blocked => Placement::Blocked,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorArg {
    Analytic,
    Quadrature,
}

impl From<IntegratorArg> for InhibitIntegrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::Analytic => InhibitIntegrator::Analytic,
            IntegratorArg::Quadrature => InhibitIntegrator::Quadrature,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum ClusterArg {
    #[value(name = "S")]
    S,
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
}

impl From<ClusterArg> for Cluster {
    fn from(c: ClusterArg) -> Self {
        match c {
            ClusterArg::S => Cluster::S,
            ClusterArg::A => Cluster::A,
            ClusterArg::B => Cluster::B,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoSourceArg {
    ClusterMatched,
    AllGo,
}

impl From<GoSourceArg> for GoSource {
    fn from(g: GoSourceArg) -> Self {
        match g {
            GoSourceArg::ClusterMatched => GoSource::ClusterMatched,
            GoSourceArg::AllGo => GoSource::AllGo,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeArg {
    TwoSided,
    Greater,
    Less,
}

impl From<AlternativeArg> for Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::TwoSided => Alternative::TwoSided,
            AlternativeArg::Greater => Alternative::Greater,
            AlternativeArg::Less => Alternative::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Random,
    QuantileGrid,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Random => SampleMode::Random,
            ModeArg::QuantileGrid => SampleMode::QuantileGrid,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 96)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.25)]
    pub stop_fraction: f64,
    #[arg(long, default_value_t = 250.0)]
    pub initial_ssd: f64,
    /// Staircase step in ms (0 keeps the SSD constant).
    #[arg(long, default_value_t = 50.0)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Independent)]
    pub placement: PlacementArg,
    #[arg(long, default_value_t = 24)]
    pub block_size: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProcessArgs {
    /// Go latency `mu,sigma,tau` in ms.
    #[arg(long, value_parser = parse_triple, default_value = "450,60,90")]
    #[serde(serialize_with = "ser_triple")]
    pub go: ExGaussianParams,
    /// Stop latency `mu,sigma,tau`; used after go trials (and after stop trials unless --stop-b is set).
    #[arg(long, value_parser = parse_triple, default_value = "180,40,70")]
    #[serde(serialize_with = "ser_triple")]
    pub stop: ExGaussianParams,
    /// Stop latency for stop trials that follow a stop trial.
    #[arg(long, value_parser = parse_triple)]
    #[serde(serialize_with = "ser_opt_triple")]
    pub stop_b: Option<ExGaussianParams>,
}

fn ser_triple<S: serde::Serializer>(p: &ExGaussianParams, s: S) -> Result<S::Ok, S::Error> {
    p.to_array().serialize(s)
}

fn ser_opt_triple<S: serde::Serializer>(p: &Option<ExGaussianParams>, s: S) -> Result<S::Ok, S::Error> {
    p.map(|p| p.to_array()).serialize(s)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial CSV destination.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Summary JSON destination (stdout if omitted).
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Trial CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Minimum number of type-B stop trials a session must have to be flagged usable.
    #[arg(long, default_value_t = 0)]
    pub min_type_b: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IndicesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = GoSourceArg::ClusterMatched)]
    pub go_source: GoSourceArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 3)]
    pub chains: usize,
    #[arg(long, default_value_t = 20_000)]
    pub iter: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burn: usize,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Analytic)]
    pub integrator: IntegratorArg,
    /// Truncate the stop latency to [1, 1000] ms.
    #[arg(long)]
    pub truncate: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitIbpaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ClusterArg::S)]
    pub cluster: ClusterArg,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write every retained draw as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub dump_chains: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitTsbpaArgs {
    /// CSV with header `subject,mu,sigma,tau`.
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long, value_enum, default_value_t = ClusterArg::S)]
    pub cluster: ClusterArg,
    #[arg(long, default_value_t = 3)]
    pub chains: usize,
    #[arg(long, default_value_t = 100_000)]
    pub iter: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burn: usize,
    /// Treat mu, sigma and tau as uncorrelated.
    #[arg(long)]
    pub independent: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestKsArgs {
    /// First sample (one value per line).
    #[arg(long)]
    pub x: PathBuf,
    /// Second sample.
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PspdtOptions {
    #[arg(short = 'k', long, default_value_t = 44)]
    pub k: usize,
    #[arg(short = 'n', long, default_value_t = 96)]
    pub n: usize,
    #[arg(short = 'm', long, default_value_t = 96)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = AlternativeArg::TwoSided)]
    pub alternative: AlternativeArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    pub mode: ModeArg,
    /// Use the constant sqrt(-ln(1/2)/2) as the critical coefficient.
    #[arg(long)]
    pub compat_coefficient: bool,
    /// Null replicates for the Monte Carlo p-value (0 skips it).
    #[arg(long, default_value_t = 999)]
    pub mc_replicates: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PspdtArgs {
    /// Distribution JSON: `{"mu":..,"sigma":..,"tau":..}` or a tagged ex_gaussian / mixture object.
    #[arg(long)]
    pub dist1: PathBuf,
    #[arg(long)]
    pub dist2: PathBuf,
    #[command(flatten)]
    pub options: PspdtOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ColoniusArgs {
    #[arg(long, value_parser = parse_triple)]
    #[serde(serialize_with = "ser_triple")]
    pub go: ExGaussianParams,
    #[arg(long, value_parser = parse_triple)]
    #[serde(serialize_with = "ser_triple")]
    pub stop: ExGaussianParams,
    /// Stop-signal delay in ms.
    #[arg(long)]
    pub ssd: f64,
    /// Type-B go latency; with --stop-b, --ssd-b and --w-a selects the mixture form.
    #[arg(long, value_parser = parse_triple, requires_all = ["stop_b", "ssd_b", "w_a"])]
    #[serde(serialize_with = "ser_opt_triple")]
    pub go_b: Option<ExGaussianParams>,
    #[arg(long, value_parser = parse_triple, requires = "go_b")]
    #[serde(serialize_with = "ser_opt_triple")]
    pub stop_b: Option<ExGaussianParams>,
    #[arg(long, requires = "go_b")]
    pub ssd_b: Option<f64>,
    #[arg(long, requires = "go_b")]
    pub w_a: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// CSV with header `subject,s_mu,s_sigma,s_tau,a_mu,a_sigma,a_tau,b_mu,b_sigma,b_tau`.
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Attach averaged KS statistics of single versus mixture at every weight.
    #[arg(long)]
    pub pspdt: bool,
    #[command(flatten)]
    pub options: PspdtOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plot-ready CSV `w,delta_mean,delta_var,pspdt_stat,cutoff`.
    #[arg(long)]
    #[serde(skip)]
    pub csv_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Trial CSV; a session is simulated when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Points drawn from each fitted distribution for the KS comparison.
    #[arg(long, default_value_t = 96)]
    pub ks_points: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    pub ks_mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the (simulated) trial CSV here.
    #[arg(long)]
    #[serde(skip)]
    pub trials_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
