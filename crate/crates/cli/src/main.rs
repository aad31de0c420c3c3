//! `qcc`: run scenarios of the hybrid quantum-classical continuum simulator.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use qcc_core::energy::EnergyError;
use qcc_core::model::RoutingProfile;
use qcc_core::output::{fmt_g17, write_dat, write_results, write_table2, Format, ResultRow, RNG_DESCRIPTION};
use qcc_core::report::{run_profiles, sweep_sustainability, table2_report, ReportError};
use qcc_core::scenario::{bundled, load_scenario, parse_scenario, RunError, Scenario, ScenarioError};
use qcc_core::sim::SimError;

#[derive(Debug, Parser)]
#[command(name = "qcc", version, about = "Energy-aware hybrid quantum-classical Edge/Fog/Cloud simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every replication of a scenario under its own policy.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's replication count.
        #[arg(long)]
        replications: Option<u32>,
        /// Output file, or `-` for standard output.
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
    },
    /// Compare hybrid and classical sustainability index across offered loads.
    Sweep {
        scenario: String,
        /// Load levels in (0, 1]; defaults to the scenario's own levels.
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
        /// Also write gnuplot data to this file.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Replay each replication under every routing profile and summarize
    /// total energy.
    Profiles {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
        /// Also write one row per replication and profile to this file.
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Also write gnuplot data to this file.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Solve one reference problem classically and on the hybrid system.
    Table2 {
        /// Scenario file; defaults to the bundled `table2` scenario.
        scenario: Option<String>,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
    },
    /// Check a scenario file and print `OK` or the problems found.
    Validate { scenario: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for failures while simulating, 1 for bad input.
fn exit_code(e: &anyhow::Error) -> u8 {
    let runtime = e.chain().any(|cause| {
        cause.is::<SimError>()
            || cause.is::<EnergyError>()
            || matches!(cause.downcast_ref::<RunError>(), Some(RunError::Sim(_)))
            || matches!(
                cause.downcast_ref::<ReportError>(),
                Some(ReportError::Run(RunError::Sim(_)) | ReportError::Energy(_) | ReportError::EmptyGroup(_))
            )
    });
    if runtime {
        2
    } else {
        1
    }
}

/// Reads a scenario from disk, falling back to the bundled set by name.
fn open(name: &str) -> Result<Scenario, ScenarioError> {
    if !Path::new(name).exists() {
        if let Some(text) = bundled(name) {
            return parse_scenario(text);
        }
    }
    load_scenario(name)
}

/// Writes to standard output, or to `path` via a temporary file renamed
/// into place.
fn emit(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    }
    let target = Path::new(path);
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write {path}"))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(target).with_context(|| format!("cannot write {path}"))?;
    Ok(())
}

fn meta(s: &Scenario) -> Vec<(&'static str, String)> {
    vec![("scenario", s.label.clone()), ("seed", s.seed.to_string()), ("rng", RNG_DESCRIPTION.to_string())]
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { scenario, seed, replications, out, format } => {
            let mut s = open(&scenario)?;
            s.seed = seed.unwrap_or(s.seed);
            let reps = replications.unwrap_or(s.replications);
            let rows = (0..u64::from(reps))
                .map(|rep| {
                    let r = s.run_replication(rep)?;
                    ResultRow::from_result(&s.label, rep, &r).context("cannot summarize run")
                })
                .collect::<Result<Vec<_>>>()?;
            let mut buf = Vec::new();
            let mut m = meta(&s);
            m.push(("replications", reps.to_string()));
            write_results(&mut buf, &rows, format.into(), &m)?;
            emit(&out, &buf)
        }
        Command::Sweep { scenario, loads, seed, out, format, plot } => {
            let mut s = open(&scenario)?;
            s.seed = seed.unwrap_or(s.seed);
            let loads = loads.unwrap_or_else(|| s.workload.levels().to_vec());
            if loads.is_empty() {
                anyhow::bail!("{scenario} has no load levels; pass --loads");
            }
            let points: Vec<_> = sweep_sustainability(&s, &loads)?.into_iter().map(|r| r.point).collect();
            let mut m = meta(&s);
            m.push(("sustainability_index", "completed work units per kWh".into()));
            let mut buf = Vec::new();
            match format {
                OutFormat::Csv => {
                    for (k, v) in &m {
                        writeln!(buf, "# {k}: {v}")?;
                    }
                    writeln!(buf, "load,si_hybrid,si_classical,ratio")?;
                    for p in &points {
                        let row = [p.load, p.si_hybrid.value(), p.si_classical.value(), p.ratio];
                        writeln!(buf, "{}", row.map(fmt_g17).join(","))?;
                    }
                }
                OutFormat::Json => {
                    let meta: serde_json::Map<_, _> = m.iter().map(|(k, v)| (k.to_string(), v.clone().into())).collect();
                    serde_json::to_writer_pretty(&mut buf, &serde_json::json!({ "meta": meta, "points": points }))?;
                    writeln!(buf)?;
                }
            }
            emit(&out, &buf)?;
            if let Some(path) = plot {
                let rows: Vec<Vec<f64>> =
                    points.iter().map(|p| vec![p.load, p.si_hybrid.value(), p.si_classical.value(), p.ratio]).collect();
                let mut dat = Vec::new();
                write_dat(&mut dat, &format!("{} sustainability index", s.label), &["load", "si_hybrid", "si_classical", "ratio"], &rows)?;
                emit(&path.to_string_lossy(), &dat)?;
            }
            Ok(())
        }
        Command::Profiles { scenario, seed, replications, out, format, runs, plot } => {
            let mut s = open(&scenario)?;
            s.seed = seed.unwrap_or(s.seed);
            let reps = replications.unwrap_or(s.replications);
            let all = run_profiles(&s, u64::from(reps))?;
            let stats = all.stats()?;
            let mut m = meta(&s);
            m.push(("replications", reps.to_string()));
            m.push(("cv", "population standard deviation over the mean".into()));
            let mut buf = Vec::new();
            match format {
                OutFormat::Csv => {
                    for (k, v) in &m {
                        writeln!(buf, "# {k}: {v}")?;
                    }
                    writeln!(buf, "profile,mean_energy_j,cv,n_replications")?;
                    for st in &stats {
                        writeln!(buf, "{},{},{},{}", st.profile, fmt_g17(st.mean_energy_j), fmt_g17(st.cv), st.n_replications)?;
                    }
                }
                OutFormat::Json => {
                    let meta: serde_json::Map<_, _> = m.iter().map(|(k, v)| (k.to_string(), v.clone().into())).collect();
                    serde_json::to_writer_pretty(&mut buf, &serde_json::json!({ "meta": meta, "profiles": stats }))?;
                    writeln!(buf)?;
                }
            }
            emit(&out, &buf)?;
            if let Some(path) = runs {
                let rows = all
                    .runs
                    .iter()
                    .enumerate()
                    .flat_map(|(rep, group)| group.iter().map(move |r| (rep as u64, r)))
                    .map(|(rep, r)| ResultRow::from_result(&s.label, rep, r).context("cannot summarize run"))
                    .collect::<Result<Vec<_>>>()?;
                let mut buf = Vec::new();
                write_results(&mut buf, &rows, format.into(), &m)?;
                emit(&path.to_string_lossy(), &buf)?;
            }
            if let Some(path) = plot {
                let names: Vec<String> =
                    RoutingProfile::ALL.iter().enumerate().map(|(i, p)| format!("{i}={p}")).collect();
                let rows: Vec<Vec<f64>> =
                    stats.iter().enumerate().map(|(i, st)| vec![i as f64, st.mean_energy_j, st.cv]).collect();
                let mut dat = Vec::new();
                write_dat(&mut dat, &format!("{} total energy by profile ({})", s.label, names.join(", ")), &["profile", "mean_energy_j", "cv"], &rows)?;
                emit(&path.to_string_lossy(), &dat)?;
            }
            Ok(())
        }
        Command::Table2 { scenario, out, format } => {
            let s = open(scenario.as_deref().unwrap_or("table2"))?;
            let t = table2_report(&s)?;
            let mut buf = Vec::new();
            match format {
                TableFormat::Text => buf.extend_from_slice(t.render().as_bytes()),
                TableFormat::Csv => write_table2(&mut buf, &t, Format::Csv, &meta(&s))?,
                TableFormat::Json => write_table2(&mut buf, &t, Format::Json, &meta(&s))?,
            }
            emit(&out, &buf)
        }
        Command::Validate { scenario } => {
            open(&scenario)?;
            println!("OK");
            Ok(())
        }
    }
}
