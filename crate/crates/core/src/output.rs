//! Result serialization: CSV, JSON and gnuplot data files.
//!
//! CSV floats are printed with 17 significant digits and JSON floats in
//! their shortest round-trip form, so both parse back to the exact bits.

use std::io::{self, Write};

use serde::Serialize;

use crate::energy::{joules_to_kwh, sustainability_index, EnergyError};
use crate::report::Table2;
use crate::sim::SimResult;

/// Random stream used by every stochastic workload.
pub const RNG_DESCRIPTION: &str = "ChaCha8Rng::seed_from_u64(seed), stream = replication index";

pub const CSV_COLUMNS: [&str; 10] = [
    "scenario_label",
    "replication",
    "profile",
    "total_energy_j",
    "total_energy_kwh",
    "carbon_kg",
    "completed_work",
    "sustainability_index",
    "makespan_s",
    "mean_latency_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// One output row: the system-wide totals of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario_label: String,
    pub replication: u64,
    pub profile: String,
    pub total_energy_j: f64,
    pub total_energy_kwh: f64,
    pub carbon_kg: f64,
    pub completed_work: f64,
    pub sustainability_index: f64,
    pub makespan_s: f64,
    pub mean_latency_s: f64,
}

impl ResultRow {
    pub fn from_result(label: &str, replication: u64, result: &SimResult) -> Result<Self, EnergyError> {
        let energy_j = result.ledger.total_energy_j();
        let kwh = joules_to_kwh(energy_j);
        Ok(ResultRow {
            scenario_label: label.to_string(),
            replication,
            profile: result.profile.name().to_string(),
            total_energy_j: energy_j,
            total_energy_kwh: kwh,
            carbon_kg: result.ledger.total_carbon_kg,
            completed_work: result.ledger.completed_work,
            sustainability_index: sustainability_index(result.ledger.completed_work, kwh)?.value(),
            makespan_s: result.ledger.makespan_s,
            mean_latency_s: result.mean_latency_s(),
        })
    }
}

/// Formats like C's `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `rows` in the requested format. `meta` lines become `#` comments
/// ahead of the CSV header, or a `meta` object in JSON.
pub fn write_results<W: Write>(out: &mut W, rows: &[ResultRow], format: Format, meta: &[(&str, String)]) -> io::Result<()> {
    match format {
        Format::Csv => {
            for (k, v) in meta {
                writeln!(out, "# {k}: {v}")?;
            }
            writeln!(out, "{}", CSV_COLUMNS.join(","))?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    csv_field(&r.scenario_label),
                    r.replication,
                    csv_field(&r.profile),
                    fmt_g17(r.total_energy_j),
                    fmt_g17(r.total_energy_kwh),
                    fmt_g17(r.carbon_kg),
                    fmt_g17(r.completed_work),
                    fmt_g17(r.sustainability_index),
                    fmt_g17(r.makespan_s),
                    fmt_g17(r.mean_latency_s),
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let meta: serde_json::Map<String, serde_json::Value> =
                meta.iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v.clone()))).collect();
            let doc = serde_json::json!({ "meta": meta, "rows": rows });
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)
        }
    }
}

/// Writes the comparison as numbers: `metric,classical,hybrid` in CSV, or
/// an object per system in JSON.
pub fn write_table2<W: Write>(out: &mut W, table: &Table2, format: Format, meta: &[(&str, String)]) -> io::Result<()> {
    let rows = table.numeric_rows();
    match format {
        Format::Csv => {
            for (k, v) in meta {
                writeln!(out, "# {k}: {v}")?;
            }
            writeln!(out, "metric,classical,hybrid")?;
            for (metric, c, h) in rows {
                writeln!(out, "{metric},{},{}", fmt_g17(c), fmt_g17(h))?;
            }
            Ok(())
        }
        Format::Json => {
            let system = |pick: fn(&(&str, f64, f64)) -> f64| -> serde_json::Map<String, serde_json::Value> {
                rows.iter().map(|r| (r.0.to_string(), serde_json::json!(pick(r)))).collect()
            };
            let meta: serde_json::Map<String, serde_json::Value> =
                meta.iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v.clone()))).collect();
            let doc = serde_json::json!({
                "meta": meta,
                "classical": system(|r| r.1),
                "hybrid": system(|r| r.2),
            });
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)
        }
    }
}

/// Whitespace-separated columns for gnuplot, with a commented header.
pub fn write_dat<W: Write>(out: &mut W, title: &str, columns: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(out, "# {title}")?;
    writeln!(out, "# {}", columns.join(" "))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_g17(v)).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}
