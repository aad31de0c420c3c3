//! Aggregation over runs: profile statistics, load sweeps and the
//! single-problem comparison table.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{joules_to_kwh, sustainability_index, EnergyError, SustainabilityIndex};
use crate::model::{DeviceId, RoutingProfile};
use crate::scenario::{RunError, Scenario};
use crate::sim::{SimError, SimResult};
use crate::workload::WorkloadError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no runs for profile {0}")]
    EmptyGroup(RoutingProfile),
    #[error("load levels must lie in (0, 1] and ascend: {0:?}")]
    BadLoads(Vec<f64>),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

impl From<SimError> for ReportError {
    fn from(e: SimError) -> Self {
        ReportError::Run(RunError::Sim(e))
    }
}

impl From<WorkloadError> for ReportError {
    fn from(e: WorkloadError) -> Self {
        ReportError::Run(RunError::Workload(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileStats {
    pub profile: RoutingProfile,
    pub mean_energy_j: f64,
    /// Population standard deviation over the mean.
    pub cv: f64,
    pub n_replications: usize,
}

/// Mean and population coefficient of variation. Values are summed in
/// sorted order so the result does not depend on input order.
pub fn mean_cv(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let sd = (dev.iter().sum::<f64>() / n).sqrt();
    let cv = if mean == 0.0 { 0.0 } else { sd / mean.abs() };
    (mean, cv)
}

/// Groups runs by profile and reports each group's total-energy mean and
/// spread, in the order of `profiles`.
pub fn aggregate_profiles(results: &[SimResult], profiles: &[RoutingProfile]) -> Result<Vec<ProfileStats>, ReportError> {
    profiles
        .iter()
        .map(|&profile| {
            let energies: Vec<f64> =
                results.iter().filter(|r| r.profile == profile).map(|r| r.ledger.total_energy_j()).collect();
            if energies.is_empty() {
                return Err(ReportError::EmptyGroup(profile));
            }
            let (mean_energy_j, cv) = mean_cv(&energies);
            Ok(ProfileStats { profile, mean_energy_j, cv, n_replications: energies.len() })
        })
        .collect()
}

/// Every replication run under each profile in [`RoutingProfile::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRuns {
    /// `runs[replication][k]` ran under `RoutingProfile::ALL[k]`.
    pub runs: Vec<Vec<SimResult>>,
}

impl ProfileRuns {
    pub fn stats(&self) -> Result<Vec<ProfileStats>, ReportError> {
        let flat: Vec<SimResult> = self.runs.iter().flatten().cloned().collect();
        aggregate_profiles(&flat, &RoutingProfile::ALL)
    }
}

/// Runs `replications` independent streams, each under all three profiles
/// with identical tasks. Replications run in parallel; results keep
/// replication order.
pub fn run_profiles(scenario: &Scenario, replications: u64) -> Result<ProfileRuns, ReportError> {
    let runs = (0..replications)
        .into_par_iter()
        .map(|rep| -> Result<Vec<SimResult>, ReportError> {
            let tasks = scenario.tasks(rep)?;
            RoutingProfile::ALL.iter().map(|&p| Ok(scenario.run_profile(&tasks, p)?)).collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProfileRuns { runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub load: f64,
    pub si_hybrid: SustainabilityIndex,
    pub si_classical: SustainabilityIndex,
    /// `si_hybrid / si_classical`; NaN when the classical index is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub point: SweepPoint,
    pub hybrid: SimResult,
    pub classical: SimResult,
}

fn si_of(r: &SimResult) -> Result<SustainabilityIndex, EnergyError> {
    sustainability_index(r.ledger.completed_work, joules_to_kwh(r.ledger.total_energy_j()))
}

/// For each load level, runs the same task list through the configured
/// hybrid policy and through the classical HPC-only baseline.
pub fn sweep_sustainability(scenario: &Scenario, loads: &[f64]) -> Result<Vec<SweepRun>, ReportError> {
    let valid = loads.iter().all(|&l| l > 0.0 && l <= 1.0) && loads.windows(2).all(|w| w[0] <= w[1]);
    if !valid {
        return Err(ReportError::BadLoads(loads.to_vec()));
    }
    let classical = scenario.policy.with_profile(RoutingProfile::ClassicalHpcOnly);
    loads
        .par_iter()
        .map(|&load| {
            let tasks = scenario.tasks_at_load(load, 0)?;
            let hybrid = scenario.run_tasks(&tasks, &scenario.policy)?;
            let classical = scenario.run_tasks(&tasks, &classical)?;
            let (si_hybrid, si_classical) = (si_of(&hybrid)?, si_of(&classical)?);
            let ratio = if si_classical.value() > 0.0 { si_hybrid.value() / si_classical.value() } else { f64::NAN };
            Ok(SweepRun { point: SweepPoint { load, si_hybrid, si_classical, ratio }, hybrid, classical })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Column {
    pub system: &'static str,
    /// Draw of every device that did work, QPUs first.
    pub peak_power_w: Vec<(DeviceId, f64)>,
    pub time_s: f64,
    pub energy_kwh: f64,
    pub carbon_t: f64,
    pub result: SimResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2 {
    pub classical: Table2Column,
    pub hybrid: Table2Column,
}

/// Solves the scenario's workload once on the classical HPC-only system and
/// once under the scenario's own (hybrid) policy.
pub fn table2_report(scenario: &Scenario) -> Result<Table2, ReportError> {
    let tasks = scenario.tasks(0)?;
    let column = |system: &'static str, result: SimResult| {
        let topo = &scenario.topology;
        let mut peak: Vec<(bool, DeviceId, f64)> = topo
            .devices()
            .iter()
            .filter(|d| result.ledger.per_device.get(&d.id).is_some_and(|e| e.active_j > 0.0))
            .map(|d| (!d.kind.is_qpu(), d.id.clone(), d.execution_power_w()))
            .collect();
        peak.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Table2Column {
            system,
            peak_power_w: peak.into_iter().map(|(_, id, w)| (id, w)).collect(),
            time_s: result.ledger.makespan_s,
            energy_kwh: joules_to_kwh(result.ledger.total_energy_j()),
            carbon_t: result.ledger.total_carbon_kg / 1000.0,
            result,
        }
    };
    let classical = scenario.run_profile(&tasks, RoutingProfile::ClassicalHpcOnly)?;
    let hybrid = scenario.run_tasks(&tasks, &scenario.policy)?;
    Ok(Table2 { classical: column("Classical HPC", classical), hybrid: column("Hybrid quantum-classical", hybrid) })
}

/// Rounds for display: whole numbers at or above 1, one significant figure
/// below.
pub fn display_round(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.abs() >= 1.0 {
        return group_thousands(x.round());
    }
    let decimals = (-x.abs().log10().floor()) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit, e.g. 0.96 -> 1.0.
    match s.parse::<f64>() {
        Ok(v) if v.abs() >= 1.0 => group_thousands(v),
        _ => s,
    }
}

fn group_thousands(x: f64) -> String {
    let digits = format!("{:.0}", x.abs());
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if x < 0.0 {
        format!("-{out}")
    } else {
        out
    }
}

fn fmt_power(w: f64) -> String {
    let (v, unit) = if w >= 1e6 {
        (w / 1e6, "MW")
    } else if w >= 1e3 {
        (w / 1e3, "kW")
    } else {
        (w, "W")
    };
    format!("{} {unit}", display_round(v))
}

fn fmt_time(s: f64) -> String {
    if s >= 3600.0 {
        format!("{} h", display_round(s / 3600.0))
    } else if s >= 60.0 {
        format!("{} min", display_round(s / 60.0))
    } else {
        format!("{} s", display_round(s))
    }
}

impl Table2Column {
    pub fn peak_power_display(&self) -> String {
        match &self.peak_power_w[..] {
            [] => "0 W".into(),
            [(_, w)] => fmt_power(*w),
            many => many.iter().map(|(id, w)| format!("{} ({id})", fmt_power(*w))).collect::<Vec<_>>().join(" + "),
        }
    }
}

impl Table2 {
    /// `(metric, classical, hybrid)` as displayed.
    pub fn rows(&self) -> Vec<(&'static str, String, String)> {
        let (c, h) = (&self.classical, &self.hybrid);
        vec![
            ("Peak power", c.peak_power_display(), h.peak_power_display()),
            ("Time to solution", fmt_time(c.time_s), fmt_time(h.time_s)),
            ("Energy", format!("{} kWh", display_round(c.energy_kwh)), format!("{} kWh", display_round(h.energy_kwh))),
            ("Carbon", format!("{} t CO2", display_round(c.carbon_t)), format!("{} t CO2", display_round(h.carbon_t))),
        ]
    }

    /// `(metric, classical, hybrid)` in SI-adjacent units, unrounded.
    pub fn numeric_rows(&self) -> [(&'static str, f64, f64); 4] {
        let (c, h) = (&self.classical, &self.hybrid);
        let peak = |col: &Table2Column| col.peak_power_w.iter().map(|(_, w)| w).sum::<f64>();
        [
            ("peak_power_w", peak(c), peak(h)),
            ("time_s", c.time_s, h.time_s),
            ("energy_kwh", c.energy_kwh, h.energy_kwh),
            ("carbon_t", c.carbon_t, h.carbon_t),
        ]
    }

    pub fn render(&self) -> String {
        let rows = self.rows();
        let head = ("Metric", self.classical.system, self.hybrid.system);
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(head.0.len());
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(head.1.len());
        let mut out = format!("{:<w0$}  {:<w1$}  {}\n", head.0, head.1, head.2);
        for (m, c, h) in rows {
            out.push_str(&format!("{m:<w0$}  {c:<w1$}  {h}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_of_one_two_three() {
        let (mean, cv) = mean_cv(&[1.0, 2.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((cv - (2.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_cv(&[5.0; 4]).1, 0.0);
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_round(300_000.0), "300,000");
        assert_eq!(display_round(0.9375), "0.9");
        assert_eq!(display_round(0.000375), "0.0004");
        assert_eq!(display_round(120.0), "120");
        assert_eq!(display_round(0.96), "1");
        assert_eq!(fmt_time(43_200.0), "12 h");
        assert_eq!(fmt_time(45.0), "45 s");
        assert_eq!(fmt_power(25e6), "25 MW");
    }
}
