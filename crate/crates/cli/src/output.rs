//! JSON and CSV emission with atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{config_error, Format, RunConfig};

/// Column order of the stage tables written by `decay` and `pipeline`.
pub const STAGE_COLUMNS: [&str; 10] = [
    "n",
    "seed",
    "stage",
    "reflections",
    "mean_width",
    "ci",
    "circumradius_lb",
    "sandwich_ratio",
    "defect",
    "seconds",
];

pub const PROBE_COLUMNS: [&str; 15] = [
    "probe",
    "n",
    "trials",
    "seed",
    "statistic",
    "mean",
    "std",
    "min",
    "q50",
    "q90",
    "q99",
    "max",
    "threshold",
    "success_rate",
    "violations",
];

pub const NORM_COLUMNS: [&str; 7] = [
    "ns",
    "vectors_per_n",
    "adversarial",
    "checks",
    "max_ratio",
    "max_inverse_ratio",
    "violations",
];

/// Formats a value for CSV; floats use the shortest representation that
/// parses back to the same bits, and absent values are empty.
pub fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    result: &'a T,
}

fn json_text<T: Serialize>(config: &RunConfig, result: &T) -> Result<String> {
    let env = Envelope {
        tool: "minksym",
        version: minksym::VERSION,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

fn csv_text(config: &RunConfig, table: &Table) -> Result<String> {
    let mut buf = format!(
        "# minksym {} config={}\n",
        minksym::VERSION,
        serde_json::to_string(config)?
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf)?)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Resolved output plan.
pub enum Sink {
    Stdout,
    File(PathBuf),
}

pub struct Plan {
    pub json: Option<Sink>,
    pub csv: Option<Sink>,
}

pub fn plan(config: &RunConfig) -> Result<Plan> {
    let format = config.format.unwrap_or_else(|| match config.out.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext == "csv" => Format::Csv,
        _ => Format::Json,
    });
    let sink = |p: Option<PathBuf>| Some(p.map_or(Sink::Stdout, Sink::File));
    Ok(match (format, &config.out) {
        (Format::Json, out) => Plan { json: sink(out.clone()), csv: None },
        (Format::Csv, out) => Plan { json: None, csv: sink(out.clone()) },
        (Format::Both, Some(out)) => Plan {
            json: sink(Some(out.with_extension("json"))),
            csv: sink(Some(out.with_extension("csv"))),
        },
        (Format::Both, None) => return Err(config_error("--format both needs --out")),
    })
}

fn emit_text(sink: &Sink, text: &str) -> Result<()> {
    match sink {
        Sink::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Sink::File(p) => write_atomic(p, text),
    }
}

/// Writes the result as JSON and/or CSV per the plan.
pub fn emit<T: Serialize>(plan: &Plan, config: &RunConfig, result: &T, table: &Table) -> Result<()> {
    if let Some(sink) = &plan.json {
        emit_text(sink, &json_text(config, result)?)?;
    }
    if let Some(sink) = &plan.csv {
        emit_text(sink, &csv_text(config, table)?)?;
    }
    Ok(())
}
