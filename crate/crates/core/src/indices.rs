//! Constant (point) SSRT estimators: crude, Logan (1994) integration, and the
//! cluster-weighted combination of per-cluster Logan estimates.

use crate::error::{Error, Result};
use crate::racesim::{extract_views, ClusterPartition, SstDataset};
use serde::{Deserialize, Serialize};

/// Which go trials feed the per-cluster GORT quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoSource {
    /// Go trials of the same cluster as the stop trials.
    #[default]
    ClusterMatched,
    /// All go trials of the session.
    AllGo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSsrtReport {
    pub crude_ms: f64,
    pub logan1994_ms: f64,
    pub weighted_ms: f64,
    /// `None` when the cluster has no stop trials or a degenerate inhibition rate.
    pub ssrt_a_ms: Option<f64>,
    pub ssrt_b_ms: Option<f64>,
    pub w_a: f64,
    pub p_inhibit: f64,
    pub mean_ssd_ms: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Continuous (linear-interpolation) sample quantile: for sorted `x` of
/// length n, position `h = (n - 1) p` between order statistics.
pub fn quantile_linear(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Precondition("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level must lie in [0,1], got {p}")));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

fn go_rts(d: &SstDataset) -> Vec<f64> {
    d.go_trials().filter_map(|t| t.rt_ms).collect()
}

fn ssds(d: &SstDataset) -> Vec<f64> {
    d.stop_trials().filter_map(|t| t.ssd_ms).collect()
}

fn require_trials(d: &SstDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let (go, ssd) = (go_rts(d), ssds(d));
    if go.is_empty() {
        return Err(Error::Precondition("no go trials".into()));
    }
    if ssd.is_empty() {
        return Err(Error::Precondition("no stop trials".into()));
    }
    Ok((go, ssd))
}

/// Mean GORT minus mean SSD.
pub fn ssrt_crude(d: &SstDataset) -> Result<f64> {
    let (go, ssd) = require_trials(d)?;
    Ok(mean(&go) - mean(&ssd))
}

fn logan(go: &[f64], stops: &SstDataset) -> Result<f64> {
    let ssd = ssds(stops);
    if go.is_empty() || ssd.is_empty() {
        return Err(Error::Precondition("Logan estimate needs go and stop trials".into()));
    }
    let p_si = stops.inhibition_rate().unwrap_or(0.0);
    if p_si <= 0.0 || p_si >= 1.0 {
        return Err(Error::EstimatorUndefined(format!(
            "inhibition proportion {p_si} leaves the GORT quantile at the sample boundary"
        )));
    }
    Ok(quantile_linear(go, 1.0 - p_si)? - mean(&ssd))
}

/// GORT quantile at `1 - P(inhibit)` minus mean SSD.
pub fn ssrt_logan1994(d: &SstDataset) -> Result<f64> {
    let (go, _) = require_trials(d)?;
    logan(&go, d)
}

/// All three indices. Each cluster's Logan estimate uses that cluster's stop
/// trials and, by default, its own go trials. A cluster whose estimate is
/// undefined contributes only when its weight is zero.
pub fn ssrt_weighted(d: &SstDataset, p: &ClusterPartition, go_source: GoSource) -> Result<ConstantSsrtReport> {
    let crude_ms = ssrt_crude(d)?;
    let logan1994_ms = ssrt_logan1994(d)?;
    let views = extract_views(d, p);
    let all_go = go_rts(d);
    let cluster = |v: &SstDataset| -> Result<f64> {
        match go_source {
            GoSource::ClusterMatched => logan(&go_rts(v), v),
            GoSource::AllGo => logan(&all_go, v),
        }
    };
    let a = cluster(&views.type_a);
    let b = cluster(&views.type_b);
    let weighted_ms = match (p.w_a, &a, &b) {
        (w, Ok(a), _) if w == 1.0 => *a,
        (w, _, Ok(b)) if w == 0.0 => *b,
        (w, Ok(a), Ok(b)) => w * a + (1.0 - w) * b,
        (_, Err(e), _) | (_, _, Err(e)) => {
            return Err(Error::EstimatorUndefined(format!("weighted SSRT: cluster estimate unavailable: {e}")))
        }
    };
    Ok(ConstantSsrtReport {
        crude_ms,
        logan1994_ms,
        weighted_ms,
        ssrt_a_ms: a.ok(),
        ssrt_b_ms: b.ok(),
        w_a: p.w_a,
        p_inhibit: d.inhibition_rate().unwrap_or(0.0),
        mean_ssd_ms: mean(&ssds(d)),
    })
}
