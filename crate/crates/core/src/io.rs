//! Trial CSV: header `index,kind,ssd_ms,rt_ms,inhibited`, one row per trial,
//! empty cells where a field does not apply, times with at most 3 decimals.
//! Also the small numeric tables read and written by the command-line tool.

use crate::error::{Error, Result};
use crate::analysis::{SubjectClusters, WeightSweep};
use crate::exgauss::ExGaussianParams;
use crate::mcmc::Chain;
use crate::racesim::{SstDataset, Trial, TrialKind};
use std::io::{Read, Write};

pub const TRIAL_HEADER: [&str; 5] = ["index", "kind", "ssd_ms", "rt_ms", "inhibited"];

fn fmt_ms(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_default()
}

pub fn write_trials<W: Write>(d: &SstDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(TRIAL_HEADER).map_err(io)?;
    for t in &d.trials {
        let kind = match t.kind {
            TrialKind::Go => "go",
            TrialKind::Stop => "stop",
        };
        let inhibited = t.inhibited.map(|b| b.to_string()).unwrap_or_default();
        w.write_record([t.index.to_string(), kind.into(), fmt_ms(t.ssd_ms), fmt_ms(t.rt_ms), inhibited])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trials_to_string(d: &SstDataset) -> Result<String> {
    let mut buf = Vec::new();
    write_trials(d, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn parse_opt_f64(cell: &str, line: u64, name: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse { line, message: format!("{name}: not a number: {cell:?}") })
}

/// Reads and validates a trial CSV. Errors carry the 1-based line number.
pub fn read_trials<R: Read>(input: R) -> Result<SstDataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != TRIAL_HEADER {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", TRIAL_HEADER.join(",")) });
    }
    let mut trials = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |m: String| Error::Parse { line, message: m };
        let index = rec[0].trim().parse::<usize>().map_err(|_| perr(format!("index: not an integer: {:?}", &rec[0])))?;
        let kind = match rec[1].trim() {
            "go" => TrialKind::Go,
            "stop" => TrialKind::Stop,
            other => return Err(perr(format!("kind must be go or stop, got {other:?}"))),
        };
        let ssd_ms = parse_opt_f64(&rec[2], line, "ssd_ms")?;
        let rt_ms = parse_opt_f64(&rec[3], line, "rt_ms")?;
        let inhibited = match rec[4].trim() {
            "" => None,
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            other => return Err(perr(format!("inhibited must be true or false, got {other:?}"))),
        };
        let t = Trial { index, kind, ssd_ms, rt_ms, inhibited };
        t.validate().map_err(|e| perr(e.to_string()))?;
        if let Some(prev) = trials.last().map(|p: &Trial| p.index) {
            if index <= prev {
                return Err(perr("trial indices must be strictly increasing".into()));
            }
        }
        trials.push(t);
    }
    Ok(SstDataset { trials, meta: None, latent: None })
}

pub fn read_trials_path(path: &std::path::Path) -> Result<SstDataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trials(std::io::BufReader::new(f))
}

fn parse_f64(cell: &str, line: u64, name: &str) -> Result<f64> {
    parse_opt_f64(cell, line, name)?.ok_or_else(|| Error::Parse { line, message: format!("{name}: missing value") })
}

/// Rows of a CSV whose header must equal `header`, with their line numbers.
fn read_table<R: Read>(input: R, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found = r.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if found.iter().map(str::trim).collect::<Vec<_>>() != header {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", header.join(",")) });
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            Ok((rec.position().map(|p| p.line()).unwrap_or(0), rec))
        })
        .collect()
}

/// A one-column sample file: one value per line, optional non-numeric
/// header line, blank lines ignored. Only the first column is read.
pub fn read_samples<R: Read>(mut input: R) -> Result<Vec<f64>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let cell = raw.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if i == 0 => continue,
            _ => return Err(Error::Parse { line: i as u64 + 1, message: format!("not a finite number: {cell:?}") }),
        }
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 0, message: "sample file contains no values".into() });
    }
    Ok(out)
}

pub const TRIPLES_HEADER: [&str; 4] = ["subject", "mu", "sigma", "tau"];

/// Per-subject `(mu, sigma, tau)` rows keyed by subject id.
pub fn read_triples<R: Read>(input: R) -> Result<Vec<(String, [f64; 3])>> {
    read_table(input, &TRIPLES_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let v = |j: usize| parse_f64(&rec[j], line, TRIPLES_HEADER[j]);
            Ok((rec[0].trim().to_string(), [v(1)?, v(2)?, v(3)?]))
        })
        .collect()
}

pub const COHORT_HEADER: [&str; 10] =
    ["subject", "s_mu", "s_sigma", "s_tau", "a_mu", "a_sigma", "a_tau", "b_mu", "b_sigma", "b_tau"];

/// Per-subject single, type-A and type-B stop parameters.
pub fn read_cohort<R: Read>(input: R) -> Result<Vec<SubjectClusters>> {
    read_table(input, &COHORT_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let triple = |k: usize| -> Result<ExGaussianParams> {
                let v = |j: usize| parse_f64(&rec[j], line, COHORT_HEADER[j]);
                ExGaussianParams::new(v(k)?, v(k + 1)?, v(k + 2)?).map_err(|e| Error::Parse { line, message: e.to_string() })
            };
            Ok(SubjectClusters { theta_s: triple(1)?, theta_a: triple(4)?, theta_b: triple(7)? })
        })
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Plot-ready sweep table `w,delta_mean,delta_var,pspdt_stat,cutoff`.
pub fn write_sweep<W: Write>(s: &WeightSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["w", "delta_mean", "delta_var", "pspdt_stat", "cutoff"]).map_err(io)?;
    for i in 0..s.grid.len() {
        let stat = s.pspdt_stat.as_ref().map(|v| v[i]);
        w.write_record([
            s.grid[i].to_string(),
            s.delta_mean[i].to_string(),
            s.delta_var[i].to_string(),
            fmt_opt(stat),
            fmt_opt(s.pspdt_cutoff),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per retained draw: `chain,draw,<names...>`.
pub fn write_chains<W: Write>(names: &[String], chains: &[Chain], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (c, chain) in chains.iter().enumerate() {
        for i in 0..chain.len() {
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(chain.draw(i).iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
