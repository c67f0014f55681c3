use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every JSON artifact: schema and software version, seed, the full
/// configuration it was produced with, and the result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a C,
    pub result: R,
}

impl<'a, C: Serialize, R: Serialize> Envelope<'a, C, R> {
    pub fn new(command: &'a str, seed: Option<u64>, config: &'a C, result: R) -> Self {
        Envelope { schema_version: SCHEMA_VERSION, version: VERSION, command, seed, config, result }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or stdout when it is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| ssrt::Error::Io(format!("{}: {e}", p.display())).into()),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Input whose schema version this build cannot read.
#[derive(Debug, thiserror::Error)]
#[error("unsupported schema_version {found} in {path} (this build reads {SCHEMA_VERSION})")]
pub struct SchemaMismatch {
    pub found: Value,
    pub path: String,
}

fn error_kind(e: &ssrt::Error) -> &'static str {
    use ssrt::Error::*;
    match e {
        ParameterDomain(_) => "parameter_domain",
        Domain(_) => "domain",
        Design(_) => "design",
        Precondition(_) => "precondition",
        EstimatorUndefined(_) => "estimator_undefined",
        Quadrature { .. } => "quadrature",
        UndefinedRatio(_) => "undefined_ratio",
        Parse { .. } => "parse",
        Io(_) => "io",
    }
}

/// Machine-readable runtime error for stderr.
pub fn error_json(err: &anyhow::Error) -> String {
    let mut body = json!({ "kind": "runtime", "message": format!("{err:#}") });
    if let Some(e) = err.downcast_ref::<ssrt::Error>() {
        body["kind"] = json!(error_kind(e));
        if let ssrt::Error::Parse { line, .. } = e {
            body["line"] = json!(line);
        }
    } else if let Some(e) = err.downcast_ref::<SchemaMismatch>() {
        body["kind"] = json!("schema_mismatch");
        body["found_schema_version"] = e.found.clone();
        body["expected_schema_version"] = json!(SCHEMA_VERSION);
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        body["kind"] = json!("json");
    }
    let v = json!({ "schema_version": SCHEMA_VERSION, "version": VERSION, "error": body });
    serde_json::to_string(&v).unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", err.to_string()))
}
