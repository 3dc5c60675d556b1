use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Check { name, pass, value: None, threshold: None, detail: detail.into() }
    }

    /// `value <= threshold`
    pub fn at_most(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check { name, pass: value <= threshold, value: Some(value), threshold: Some(threshold), detail: detail.into() }
    }
}

/// What a subcommand hands back: its checks, the files it wrote and a few
/// scalars the checker script needs.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub params: Value,
}

pub fn write_json(path: &Path, v: &impl Serialize) -> nahm::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| nahm::Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(w.flush()?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> nahm::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, &r).map_err(|e| nahm::Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(w.flush()?)
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> nahm::Result<()> {
    let io = |e: csv::Error| nahm::Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    Ok(w.flush()?)
}

/// Empty string for `None`, otherwise the `Display` form.
pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &impl Serialize,
    outcome: &Outcome,
) -> nahm::Result<bool> {
    let pass = outcome.checks.iter().all(|c| c.pass);
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let summary = json!({
        "header": {
            "tool": "nahm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "timestamp_unix": timestamp,
            "seed": seed,
            "config": config,
        },
        "checks": outcome.checks,
        "pass": pass,
        "artifacts": outcome.artifacts,
        "params": outcome.params,
    });
    write_json(&dir.join(format!("{command}.summary.json")), &summary)?;
    Ok(pass)
}
