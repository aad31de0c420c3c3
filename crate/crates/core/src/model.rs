//! Domain types shared across the simulator.
//!
//! Everything here is a plain value object. Construction goes through
//! `new`/`validate` helpers that reject field combinations the rest of the
//! crate relies on never seeing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position in the continuum, ordered by distance from the data source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Edge,
    Fog,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Edge, Tier::Fog, Tier::Cloud];
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Edge => "edge",
            Tier::Fog => "fog",
            Tier::Cloud => "cloud",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    ClassicalCpu,
    ClassicalGpu,
    QpuCryogenicLarge,
    QpuCompactEdge,
    QuantumSensor,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 5] = [
        DeviceKind::ClassicalCpu,
        DeviceKind::ClassicalGpu,
        DeviceKind::QpuCryogenicLarge,
        DeviceKind::QpuCompactEdge,
        DeviceKind::QuantumSensor,
    ];

    pub fn is_qpu(self) -> bool {
        matches!(self, DeviceKind::QpuCryogenicLarge | DeviceKind::QpuCompactEdge)
    }

    pub fn is_classical(self) -> bool {
        matches!(self, DeviceKind::ClassicalCpu | DeviceKind::ClassicalGpu)
    }

    /// Sensors produce data but never execute subtasks.
    pub fn is_compute(self) -> bool {
        self != DeviceKind::QuantumSensor
    }

    /// Tiers at which this kind of device may be deployed.
    pub fn allowed_tiers(self) -> &'static [Tier] {
        match self {
            DeviceKind::ClassicalCpu | DeviceKind::ClassicalGpu => &Tier::ALL,
            DeviceKind::QpuCryogenicLarge => &[Tier::Cloud],
            DeviceKind::QpuCompactEdge => &[Tier::Edge, Tier::Fog],
            DeviceKind::QuantumSensor => &[Tier::Edge],
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::ClassicalCpu => "classical-cpu",
            DeviceKind::ClassicalGpu => "classical-gpu",
            DeviceKind::QpuCryogenicLarge => "qpu-cryogenic-large",
            DeviceKind::QpuCompactEdge => "qpu-compact-edge",
            DeviceKind::QuantumSensor => "quantum-sensor",
        })
    }
}

/// How tightly a QPU is integrated with its classical counterpart.
/// Ordered from loosest to tightest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    LooseCloud,
    TightCoLocated,
    IntegratedLogic,
}

impl CouplingMode {
    pub const ALL: [CouplingMode; 3] = [
        CouplingMode::LooseCloud,
        CouplingMode::TightCoLocated,
        CouplingMode::IntegratedLogic,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Classical,
    QuantumWavelength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingProfile {
    ClassicalHpcOnly,
    CarbonPrioritized,
    EdgeCentric,
}

impl RoutingProfile {
    /// Reporting order: baseline, then profile A, then profile B.
    pub const ALL: [RoutingProfile; 3] = [
        RoutingProfile::ClassicalHpcOnly,
        RoutingProfile::CarbonPrioritized,
        RoutingProfile::EdgeCentric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoutingProfile::ClassicalHpcOnly => "classical-hpc-only",
            RoutingProfile::CarbonPrioritized => "carbon-prioritized",
            RoutingProfile::EdgeCentric => "edge-centric",
        }
    }
}

impl fmt::Display for RoutingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub String);

impl DeviceId {
    pub fn new(id: impl Into<String>) -> Self {
        DeviceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_string())
    }
}

/// A single field-level invariant violation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FieldError { field: field.into(), reason: reason.into() }
    }
}

fn check_non_negative(out: &mut Vec<FieldError>, field: &str, v: f64) {
    if !v.is_finite() || v < 0.0 {
        out.push(FieldError::new(field, format!("must be a finite value >= 0, got {v}")));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceNode {
    pub id: DeviceId,
    pub tier: Tier,
    pub kind: DeviceKind,
    pub coupling: CouplingMode,
    pub active_power_w: f64,
    pub idle_power_w: f64,
    /// Cryostat and control baseline, drawn whenever a QPU is warm.
    #[serde(default)]
    pub cryo_baseline_power_w: f64,
    #[serde(default)]
    pub warmup_time_s: f64,
    #[serde(default = "one")]
    pub concurrency_slots: u32,
    #[serde(default)]
    pub renewable_powered: bool,
    pub carbon_intensity_kg_per_kwh: f64,
    /// Classical node that drives this QPU; it draws its active power for
    /// the whole duration of every quantum kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<DeviceId>,
}

fn one() -> u32 {
    1
}

impl DeviceNode {
    /// Field-local invariants. Cross-device checks live in `topology`.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if self.id.0.is_empty() {
            out.push(FieldError::new("id", "must not be empty"));
        }
        check_non_negative(&mut out, "active_power_w", self.active_power_w);
        check_non_negative(&mut out, "idle_power_w", self.idle_power_w);
        check_non_negative(&mut out, "cryo_baseline_power_w", self.cryo_baseline_power_w);
        check_non_negative(&mut out, "warmup_time_s", self.warmup_time_s);
        check_non_negative(&mut out, "carbon_intensity_kg_per_kwh", self.carbon_intensity_kg_per_kwh);
        if self.idle_power_w > self.active_power_w {
            out.push(FieldError::new(
                "idle_power_w",
                format!("exceeds active_power_w ({} > {})", self.idle_power_w, self.active_power_w),
            ));
        }
        if self.cryo_baseline_power_w > 0.0 && !self.kind.is_qpu() {
            out.push(FieldError::new("cryo_baseline_power_w", format!("must be 0 for {}", self.kind)));
        }
        if self.concurrency_slots == 0 {
            out.push(FieldError::new("concurrency_slots", "must be positive"));
        }
        if self.controller.is_some() && !self.kind.is_qpu() {
            out.push(FieldError::new("controller", "only QPUs have a controller"));
        }
        out
    }

    /// Power drawn while executing: active electronics plus the cryostat.
    pub fn execution_power_w(&self) -> f64 {
        self.active_power_w + self.cryo_baseline_power_w
    }

    /// Power drawn while warm but not executing.
    pub fn standby_power_w(&self) -> f64 {
        self.idle_power_w + self.cryo_baseline_power_w
    }
}

/// Lifecycle of a QPU as seen by the orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QpuState {
    Cold,
    WarmingUp { ready_at: f64 },
    Ready,
    Busy,
}

impl QpuState {
    /// Whether `self -> next` is a legal transition. Any state may decay
    /// to `Cold`.
    pub fn can_transition_to(self, next: QpuState) -> bool {
        use QpuState::*;
        matches!(
            (self, next),
            (_, Cold) | (Cold, WarmingUp { .. }) | (WarmingUp { .. }, Ready) | (Ready, Busy) | (Busy, Ready)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub arrival_time_s: f64,
    pub complexity: f64,
    pub quantum_amenable_fraction: f64,
    #[serde(default)]
    pub data_size_bits: f64,
    #[serde(default)]
    pub privacy_local_only: bool,
    pub origin_tier: Tier,
}

impl Task {
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if self.id.0.is_empty() {
            out.push(FieldError::new("id", "must not be empty"));
        }
        check_non_negative(&mut out, "arrival_time_s", self.arrival_time_s);
        if !(self.complexity.is_finite() && self.complexity > 0.0) {
            out.push(FieldError::new("complexity", format!("must be > 0, got {}", self.complexity)));
        }
        if !(0.0..=1.0).contains(&self.quantum_amenable_fraction) {
            out.push(FieldError::new(
                "quantum_amenable_fraction",
                format!("must lie in [0, 1], got {}", self.quantum_amenable_fraction),
            ));
        }
        check_non_negative(&mut out, "data_size_bits", self.data_size_bits);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: DeviceId,
    pub to: DeviceId,
    pub latency_s: f64,
    pub bandwidth_bits_per_s: f64,
    pub energy_per_bit_j: f64,
    pub channel: Channel,
    #[serde(default = "yes")]
    pub bidirectional: bool,
}

fn yes() -> bool {
    true
}

impl Link {
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        check_non_negative(&mut out, "latency_s", self.latency_s);
        check_non_negative(&mut out, "energy_per_bit_j", self.energy_per_bit_j);
        if !(self.bandwidth_bits_per_s > 0.0) {
            out.push(FieldError::new(
                "bandwidth_bits_per_s",
                format!("must be > 0, got {}", self.bandwidth_bits_per_s),
            ));
        }
        if self.from == self.to {
            out.push(FieldError::new("to", "self-loop links are not allowed"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orderings_are_total_and_transitive() {
        for a in Tier::ALL {
            for b in Tier::ALL {
                assert_eq!(a == b, a.cmp(&b).is_eq());
                assert_eq!(a < b, b > a);
                for c in Tier::ALL {
                    if a < b && b < c {
                        assert!(a < c);
                    }
                }
            }
        }
        assert!(Tier::Edge < Tier::Fog && Tier::Fog < Tier::Cloud);
        for a in CouplingMode::ALL {
            for b in CouplingMode::ALL {
                assert!(a.cmp(&b) == b.cmp(&a).reverse());
                for c in CouplingMode::ALL {
                    if a <= b && b <= c {
                        assert!(a <= c);
                    }
                }
            }
        }
        assert!(CouplingMode::LooseCloud < CouplingMode::TightCoLocated);
        assert!(CouplingMode::TightCoLocated < CouplingMode::IntegratedLogic);
    }

    #[test]
    fn qpu_transitions() {
        use QpuState::*;
        let warming = WarmingUp { ready_at: 3.0 };
        assert!(Cold.can_transition_to(warming));
        assert!(warming.can_transition_to(Ready));
        assert!(Ready.can_transition_to(Busy));
        assert!(Busy.can_transition_to(Ready));
        assert!(Busy.can_transition_to(Cold));
        assert!(!Cold.can_transition_to(Ready));
        assert!(!Cold.can_transition_to(Busy));
        assert!(!warming.can_transition_to(Busy));
    }

    #[test]
    fn classical_device_with_cryo_is_rejected() {
        let d = DeviceNode {
            id: "cpu".into(),
            tier: Tier::Edge,
            kind: DeviceKind::ClassicalCpu,
            coupling: CouplingMode::LooseCloud,
            active_power_w: 10.0,
            idle_power_w: 20.0,
            cryo_baseline_power_w: 5.0,
            warmup_time_s: 0.0,
            concurrency_slots: 1,
            renewable_powered: false,
            carbon_intensity_kg_per_kwh: 0.4,
            controller: None,
        };
        let fields: Vec<_> = d.violations().into_iter().map(|e| e.field).collect();
        assert_eq!(fields, vec!["idle_power_w", "cryo_baseline_power_w"]);
    }
}
