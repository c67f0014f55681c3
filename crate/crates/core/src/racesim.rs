//! Stop-signal task sessions under the independent horse-race model.
//!
//! On a stop trial the go process (GORT) and stop process (SSRT) start
//! independently; a response is recorded iff `GORT < SSD + SSRT`. The stop
//! signal delay follows a one-up/one-down staircase: after a successful
//! inhibition the next SSD grows by `step_ms`, after a failure it shrinks.
//!
//! Trials are partitioned by the type of the preceding trial: type A follows
//! a go trial, type B follows a stop trial. Trial 1 has no predecessor and
//! belongs to neither cluster.

use crate::error::{Error, Result};
use crate::exgauss::ExGaussianParams;
use crate::rng::seeded;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Go,
    Stop,
}

/// One trial record. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub kind: TrialKind,
    pub ssd_ms: Option<f64>,
    pub rt_ms: Option<f64>,
    pub inhibited: Option<bool>,
}

impl Trial {
    pub fn go(index: usize, rt_ms: f64) -> Self {
        Trial { index, kind: TrialKind::Go, ssd_ms: None, rt_ms: Some(rt_ms), inhibited: None }
    }

    pub fn stop_inhibited(index: usize, ssd_ms: f64) -> Self {
        Trial { index, kind: TrialKind::Stop, ssd_ms: Some(ssd_ms), rt_ms: None, inhibited: Some(true) }
    }

    pub fn stop_responded(index: usize, ssd_ms: f64, rt_ms: f64) -> Self {
        Trial { index, kind: TrialKind::Stop, ssd_ms: Some(ssd_ms), rt_ms: Some(rt_ms), inhibited: Some(false) }
    }

    pub fn is_stop(&self) -> bool {
        self.kind == TrialKind::Stop
    }

    pub fn is_go(&self) -> bool {
        self.kind == TrialKind::Go
    }

    /// Checks the field-presence rules for the trial's kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(format!("trial {}: {m}", self.index)));
        match self.kind {
            TrialKind::Go => {
                if self.rt_ms.is_none() {
                    return bad("go trial without rt");
                }
                if self.ssd_ms.is_some() || self.inhibited.is_some() {
                    return bad("go trial with ssd or inhibited flag");
                }
            }
            TrialKind::Stop => {
                let Some(ssd) = self.ssd_ms else {
                    return bad("stop trial without ssd");
                };
                if !ssd.is_finite() {
                    return bad("non-finite ssd");
                }
                match (self.inhibited, self.rt_ms) {
                    (Some(true), None) | (Some(false), Some(_)) => {}
                    _ => return bad("inhibited must be set exactly when rt is absent"),
                }
            }
        }
        if let Some(rt) = self.rt_ms {
            if !rt.is_finite() {
                return bad("non-finite rt");
            }
        }
        Ok(())
    }
}

/// Where stop trials are placed in a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Each trial is a stop trial independently with probability `stop_fraction`.
    Independent,
    /// Exactly `ceil(stop_fraction * block_len)` stop trials per block, at
    /// uniformly random positions within the block.
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n_trials: usize,
    pub stop_fraction: f64,
    pub initial_ssd_ms: f64,
    /// Staircase step; 0 gives a constant-SSD design.
    pub step_ms: f64,
    pub block_size: usize,
    pub placement: Placement,
}

impl Default for Design {
    fn default() -> Self {
        Design {
            n_trials: 96,
            stop_fraction: 0.25,
            initial_ssd_ms: 250.0,
            step_ms: 50.0,
            block_size: 24,
            placement: Placement::Independent,
        }
    }
}

impl Design {
    pub fn with_trials(n_trials: usize) -> Self {
        Design { n_trials, ..Design::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Design("n_trials must be positive".into()));
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return Err(Error::Design(format!("stop_fraction must lie in (0,1), got {}", self.stop_fraction)));
        }
        if !(self.initial_ssd_ms >= 0.0 && self.step_ms >= 0.0) {
            return Err(Error::Design("initial SSD and step must be non-negative".into()));
        }
        if self.placement == Placement::Blocked && self.block_size == 0 {
            return Err(Error::Design("block_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub n_trials: usize,
    pub stop_fraction: f64,
    pub initial_ssd_ms: f64,
    pub step_ms: f64,
    pub seed: u64,
}

/// The latent finishing times behind one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentDraw {
    pub index: usize,
    pub gort_ms: f64,
    pub ssrt_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SstDataset {
    pub trials: Vec<Trial>,
    pub meta: Option<SessionMeta>,
    /// Present only for simulations run with latent retention.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latent: Option<Vec<LatentDraw>>,
}

impl SstDataset {
    pub fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        for t in &trials {
            t.validate()?;
        }
        Ok(SstDataset { trials, meta: None, latent: None })
    }

    pub fn go_trials(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_go())
    }

    pub fn stop_trials(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_stop())
    }

    pub fn n_go(&self) -> usize {
        self.go_trials().count()
    }

    pub fn n_stop(&self) -> usize {
        self.stop_trials().count()
    }

    /// Observed proportion of inhibited stop trials, if any stop trials exist.
    pub fn inhibition_rate(&self) -> Option<f64> {
        let n = self.n_stop();
        (n > 0).then(|| self.stop_trials().filter(|t| t.inhibited == Some(true)).count() as f64 / n as f64)
    }

    /// The trials whose index is in `indices`, in session order.
    pub fn subset(&self, indices: &BTreeSet<usize>) -> SstDataset {
        SstDataset {
            trials: self.trials.iter().filter(|t| indices.contains(&t.index)).copied().collect(),
            meta: None,
            latent: None,
        }
    }
}

/// Go and stop processes, with the stop latency allowed to depend on the
/// type of the preceding trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceProcesses {
    pub go: ExGaussianParams,
    /// SSRT after a go trial (and on trial 1).
    pub stop_a: ExGaussianParams,
    /// SSRT after a stop trial.
    pub stop_b: ExGaussianParams,
}

impl RaceProcesses {
    pub fn homogeneous(go: ExGaussianParams, stop: ExGaussianParams) -> Self {
        RaceProcesses { go, stop_a: stop, stop_b: stop }
    }
}

fn stop_positions<R: Rng>(design: &Design, rng: &mut R) -> Vec<bool> {
    let n = design.n_trials;
    match design.placement {
        Placement::Independent => (0..n).map(|_| rng.random::<f64>() < design.stop_fraction).collect(),
        Placement::Blocked => {
            let mut is_stop = vec![false; n];
            let mut start = 0;
            while start < n {
                let len = design.block_size.min(n - start);
                let k = ((design.stop_fraction * len as f64).ceil() as usize).min(len);
                for i in sample_indices(rng, len, k) {
                    is_stop[start + i] = true;
                }
                start += len;
            }
            is_stop
        }
    }
}

/// Simulates one session with a single stop process.
pub fn simulate_sst(go: ExGaussianParams, stop: ExGaussianParams, design: &Design, seed: u64) -> Result<SstDataset> {
    simulate_race(&RaceProcesses::homogeneous(go, stop), design, seed, false)
}

/// Simulates one session, optionally keeping the latent GORT/SSRT draws.
pub fn simulate_race(processes: &RaceProcesses, design: &Design, seed: u64, retain_latent: bool) -> Result<SstDataset> {
    design.validate()?;
    processes.go.validate()?;
    processes.stop_a.validate()?;
    processes.stop_b.validate()?;
    let mut rng = seeded(seed);
    let is_stop = stop_positions(design, &mut rng);
    if !is_stop.iter().any(|&s| s) {
        return Err(Error::Design("session contains no stop trials".into()));
    }
    let mut ssd = design.initial_ssd_ms;
    let mut trials = Vec::with_capacity(design.n_trials);
    let mut latent = Vec::new();
    for (i, &stop) in is_stop.iter().enumerate() {
        let index = i + 1;
        let gort = processes.go.draw(&mut rng);
        if !stop {
            trials.push(Trial::go(index, gort));
            if retain_latent {
                latent.push(LatentDraw { index, gort_ms: gort, ssrt_ms: None });
            }
            continue;
        }
        let after_stop = i > 0 && is_stop[i - 1];
        let stop_process = if after_stop { processes.stop_b } else { processes.stop_a };
        let ssrt = stop_process.draw(&mut rng);
        if gort < ssd + ssrt {
            trials.push(Trial::stop_responded(index, ssd, gort));
            ssd = (ssd - design.step_ms).max(0.0);
        } else {
            trials.push(Trial::stop_inhibited(index, ssd));
            ssd += design.step_ms;
        }
        if retain_latent {
            latent.push(LatentDraw { index, gort_ms: gort, ssrt_ms: Some(ssrt) });
        }
    }
    Ok(SstDataset {
        trials,
        meta: Some(SessionMeta {
            n_trials: design.n_trials,
            stop_fraction: design.stop_fraction,
            initial_ssd_ms: design.initial_ssd_ms,
            step_ms: design.step_ms,
            seed,
        }),
        latent: retain_latent.then_some(latent),
    })
}

/// Trial-index sets of the type-A/type-B clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub go_a: BTreeSet<usize>,
    pub go_b: BTreeSet<usize>,
    pub stop_a: BTreeSet<usize>,
    pub stop_b: BTreeSet<usize>,
    /// `|stop_a| / (|stop_a| + |stop_b|)`; 0 when no stop trial has a predecessor.
    pub w_a: f64,
}

impl ClusterPartition {
    pub fn cluster_a(&self) -> BTreeSet<usize> {
        self.go_a.union(&self.stop_a).copied().collect()
    }

    pub fn cluster_b(&self) -> BTreeSet<usize> {
        self.go_b.union(&self.stop_b).copied().collect()
    }
}

pub fn partition_clusters(d: &SstDataset) -> ClusterPartition {
    let mut part = ClusterPartition {
        go_a: BTreeSet::new(),
        go_b: BTreeSet::new(),
        stop_a: BTreeSet::new(),
        stop_b: BTreeSet::new(),
        w_a: 0.0,
    };
    for pair in d.trials.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let set = match (prev.kind, cur.kind) {
            (TrialKind::Go, TrialKind::Go) => &mut part.go_a,
            (TrialKind::Go, TrialKind::Stop) => &mut part.stop_a,
            (TrialKind::Stop, TrialKind::Go) => &mut part.go_b,
            (TrialKind::Stop, TrialKind::Stop) => &mut part.stop_b,
        };
        set.insert(cur.index);
    }
    let total = part.stop_a.len() + part.stop_b.len();
    if total > 0 {
        part.w_a = part.stop_a.len() as f64 / total as f64;
    }
    part
}

/// The whole session and its two cluster sub-sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterViews {
    pub full: SstDataset,
    pub type_a: SstDataset,
    pub type_b: SstDataset,
}

pub fn extract_views(d: &SstDataset, p: &ClusterPartition) -> ClusterViews {
    ClusterViews {
        full: d.clone(),
        type_a: d.subset(&p.cluster_a()),
        type_b: d.subset(&p.cluster_b()),
    }
}

/// Optional screen mirroring a minimum count of type-B stop trials per subject.
pub fn meets_type_b_minimum(p: &ClusterPartition, min_type_b_stops: usize) -> bool {
    p.stop_b.len() >= min_type_b_stops
}
