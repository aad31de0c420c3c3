//! Energy, carbon, and sustainability arithmetic.
//!
//! All functions are pure. Energy is carried in joules throughout; kWh only
//! appears at reporting boundaries via [`joules_to_kwh`].

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Channel, CouplingMode, DeviceKind, DeviceNode, FieldError, Link};

pub const JOULES_PER_KWH: f64 = 3.6e6;

pub fn joules_to_kwh(j: f64) -> f64 {
    j / JOULES_PER_KWH
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("{0} cannot execute work")]
    NotAComputeDevice(DeviceKind),
    #[error("{0} is not a QPU")]
    NotAQpu(DeviceKind),
    #[error("complexity must be > 0, got {0}")]
    NonPositiveComplexity(f64),
    #[error("quantum payload cannot cross classical-only hop {hop}")]
    ChannelMismatch { hop: usize },
    #[error("positive work ({work}) reported with zero energy")]
    PositiveWorkZeroEnergy { work: f64 },
    #[error("energy must be finite and >= 0, got {0}")]
    NegativeEnergy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub active_j: f64,
    pub idle_j: f64,
    pub cryo_baseline_j: f64,
    pub transfer_j: f64,
}

impl EnergyBreakdown {
    pub const ZERO: EnergyBreakdown = EnergyBreakdown { active_j: 0.0, idle_j: 0.0, cryo_baseline_j: 0.0, transfer_j: 0.0 };

    pub fn total_j(&self) -> f64 {
        self.active_j + self.idle_j + self.cryo_baseline_j + self.transfer_j
    }

    pub fn total_kwh(&self) -> f64 {
        joules_to_kwh(self.total_j())
    }

    pub fn is_non_negative(&self) -> bool {
        [self.active_j, self.idle_j, self.cryo_baseline_j, self.transfer_j].iter().all(|v| *v >= 0.0)
    }
}

impl Add for EnergyBreakdown {
    type Output = EnergyBreakdown;

    fn add(self, o: EnergyBreakdown) -> EnergyBreakdown {
        EnergyBreakdown {
            active_j: self.active_j + o.active_j,
            idle_j: self.idle_j + o.idle_j,
            cryo_baseline_j: self.cryo_baseline_j + o.cryo_baseline_j,
            transfer_j: self.transfer_j + o.transfer_j,
        }
    }
}

impl AddAssign for EnergyBreakdown {
    fn add_assign(&mut self, o: EnergyBreakdown) {
        *self = *self + o;
    }
}

/// Power-law time-to-solution model for both regimes, anchored at a
/// reference problem size:
///
/// `t_classical(n) = t_c_ref * (n / n_ref)^alpha`, `t_quantum(n) = t_q_ref * (n / n_ref)^beta`.
///
/// This is the same family as `a * n^alpha` / `b * n^beta` with
/// `a = t_c_ref / n_ref^alpha`; anchoring keeps the reference problem exact
/// in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeModel {
    pub reference_complexity: f64,
    pub classical_reference_time_s: f64,
    pub classical_exponent_alpha: f64,
    pub quantum_reference_time_s: f64,
    pub quantum_exponent_beta: f64,
}

impl Default for TimeModel {
    /// A 1e6-unit problem takes 12 h classically and 45 s on a QPU.
    fn default() -> Self {
        TimeModel {
            reference_complexity: 1e6,
            classical_reference_time_s: 43_200.0,
            classical_exponent_alpha: 1.3,
            quantum_reference_time_s: 45.0,
            quantum_exponent_beta: 1.0,
        }
    }
}

impl TimeModel {
    /// Builds the model from raw `a, alpha, b, beta` coefficients.
    pub fn from_coefficients(a: f64, alpha: f64, b: f64, beta: f64) -> Self {
        TimeModel {
            reference_complexity: 1.0,
            classical_reference_time_s: a,
            classical_exponent_alpha: alpha,
            quantum_reference_time_s: b,
            quantum_exponent_beta: beta,
        }
    }

    pub fn classical_coeff_a(&self) -> f64 {
        self.classical_reference_time_s / self.reference_complexity.powf(self.classical_exponent_alpha)
    }

    pub fn quantum_coeff_b(&self) -> f64 {
        self.quantum_reference_time_s / self.reference_complexity.powf(self.quantum_exponent_beta)
    }

    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        let positive = [
            ("reference_complexity", self.reference_complexity),
            ("classical_reference_time_s", self.classical_reference_time_s),
            ("quantum_reference_time_s", self.quantum_reference_time_s),
        ];
        for (f, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(FieldError::new(f, format!("must be > 0, got {v}")));
            }
        }
        if !(self.classical_exponent_alpha.is_finite() && self.classical_exponent_alpha >= 1.0) {
            out.push(FieldError::new(
                "classical_exponent_alpha",
                format!("must be >= 1, got {}", self.classical_exponent_alpha),
            ));
        }
        if !(self.quantum_exponent_beta > 0.0 && self.quantum_exponent_beta <= 1.0) {
            out.push(FieldError::new(
                "quantum_exponent_beta",
                format!("must lie in (0, 1], got {}", self.quantum_exponent_beta),
            ));
        }
        out
    }

    pub fn classical_time(&self, complexity: f64) -> f64 {
        self.classical_reference_time_s * (complexity / self.reference_complexity).powf(self.classical_exponent_alpha)
    }

    pub fn quantum_time(&self, complexity: f64) -> f64 {
        self.quantum_reference_time_s * (complexity / self.reference_complexity).powf(self.quantum_exponent_beta)
    }
}

pub fn time_to_solution(complexity: f64, kind: DeviceKind, tm: &TimeModel) -> Result<f64, EnergyError> {
    if !(complexity > 0.0) {
        return Err(EnergyError::NonPositiveComplexity(complexity));
    }
    match kind {
        DeviceKind::ClassicalCpu | DeviceKind::ClassicalGpu => Ok(tm.classical_time(complexity)),
        DeviceKind::QpuCryogenicLarge | DeviceKind::QpuCompactEdge => Ok(tm.quantum_time(complexity)),
        DeviceKind::QuantumSensor => Err(EnergyError::NotAComputeDevice(kind)),
    }
}

/// Energy of running on `device` for `duration_s`. Negative durations are
/// treated as zero.
pub fn execution_energy(duration_s: f64, device: &DeviceNode) -> EnergyBreakdown {
    let d = duration_s.max(0.0);
    EnergyBreakdown {
        active_j: device.active_power_w * d,
        idle_j: 0.0,
        cryo_baseline_j: device.cryo_baseline_power_w * d,
        transfer_j: 0.0,
    }
}

/// Fraction of standby power wasted while a QPU waits on its classical
/// partner, per integration tightness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingFactors {
    pub loose_cloud: f64,
    pub tight_co_located: f64,
    pub integrated_logic: f64,
}

impl Default for CouplingFactors {
    fn default() -> Self {
        CouplingFactors { loose_cloud: 1.0, tight_co_located: 0.2, integrated_logic: 0.01 }
    }
}

impl CouplingFactors {
    pub fn factor(&self, mode: CouplingMode) -> f64 {
        match mode {
            CouplingMode::LooseCloud => self.loose_cloud,
            CouplingMode::TightCoLocated => self.tight_co_located,
            CouplingMode::IntegratedLogic => self.integrated_logic,
        }
    }

    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        for (f, v) in [
            ("loose_cloud", self.loose_cloud),
            ("tight_co_located", self.tight_co_located),
            ("integrated_logic", self.integrated_logic),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(FieldError::new(f, format!("must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.loose_cloud >= self.tight_co_located && self.tight_co_located >= self.integrated_logic) {
            out.push(FieldError::new(
                "coupling_factors",
                "must be non-increasing from loose_cloud to integrated_logic",
            ));
        }
        out
    }
}

/// Standby energy burned by a QPU during a feedback round trip.
pub fn coupling_idle_energy(
    round_trip_latency_s: f64,
    device: &DeviceNode,
    factors: &CouplingFactors,
) -> Result<f64, EnergyError> {
    if !device.kind.is_qpu() {
        return Err(EnergyError::NotAQpu(device.kind));
    }
    Ok(factors.factor(device.coupling) * device.standby_power_w() * round_trip_latency_s.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    Classical,
    Quantum,
}

/// Time and energy to move `bits` along `path`. An empty path is a local
/// hand-off and costs nothing.
pub fn transfer_energy<'a>(
    bits: f64,
    path: impl IntoIterator<Item = &'a Link>,
    payload: Payload,
) -> Result<(f64, f64), EnergyError> {
    let bits = bits.max(0.0);
    let mut seconds = 0.0;
    let mut joules = 0.0;
    for (hop, link) in path.into_iter().enumerate() {
        if payload == Payload::Quantum && link.channel != Channel::QuantumWavelength {
            return Err(EnergyError::ChannelMismatch { hop });
        }
        seconds += link.latency_s + bits / link.bandwidth_bits_per_s;
        joules += bits * link.energy_per_bit_j;
    }
    Ok((seconds, joules))
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarbonIntensity(f64);

impl CarbonIntensity {
    pub fn new(kg_per_kwh: f64) -> Result<Self, FieldError> {
        if kg_per_kwh.is_finite() && kg_per_kwh >= 0.0 {
            Ok(CarbonIntensity(kg_per_kwh))
        } else {
            Err(FieldError::new("carbon_intensity_kg_per_kwh", format!("must be finite and >= 0, got {kg_per_kwh}")))
        }
    }

    pub fn kg_per_kwh(self) -> f64 {
        self.0
    }
}

pub fn carbon_of(energy: &EnergyBreakdown, intensity: CarbonIntensity) -> f64 {
    energy.total_kwh() * intensity.kg_per_kwh()
}

/// Completed work per kWh.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SustainabilityIndex(pub f64);

impl SustainabilityIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn sustainability_index(completed_work: f64, energy_kwh: f64) -> Result<SustainabilityIndex, EnergyError> {
    if !(energy_kwh.is_finite() && energy_kwh >= 0.0) {
        return Err(EnergyError::NegativeEnergy(energy_kwh));
    }
    if energy_kwh == 0.0 {
        return if completed_work == 0.0 {
            Ok(SustainabilityIndex(0.0))
        } else {
            Err(EnergyError::PositiveWorkZeroEnergy { work: completed_work })
        };
    }
    Ok(SustainabilityIndex(completed_work / energy_kwh))
}
