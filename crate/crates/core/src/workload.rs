//! Seeded task generation.
//!
//! Every stream is a `ChaCha8Rng` seeded from the scenario seed with the
//! replication index as its stream number, so replications are independent
//! and any one of them can be regenerated in isolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::TimeModel;
use crate::model::{FieldError, Task, TaskId, Tier};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    Invalid(FieldError),
    #[error("a load sweep needs a load level and capacity; use generate_at_load")]
    NeedsLoad,
    #[error("no Cloud classical capacity to normalise load against")]
    NoCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum ComplexityDist {
    Fixed { value: f64 },
    Uniform { min: f64, max: f64 },
    LogUniform { min: f64, max: f64 },
}

impl ComplexityDist {
    pub fn violations(&self) -> Vec<FieldError> {
        let bad = |f: &str| vec![FieldError::new(f, "bounds must be finite, positive and ordered")];
        match *self {
            ComplexityDist::Fixed { value } if !(value.is_finite() && value > 0.0) => bad("complexity.value"),
            ComplexityDist::Uniform { min, max } | ComplexityDist::LogUniform { min, max }
                if !(min.is_finite() && max.is_finite() && min > 0.0 && min <= max) =>
            {
                bad("complexity")
            }
            _ => Vec::new(),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ComplexityDist::Fixed { value } => value,
            ComplexityDist::Uniform { min, max } => min + (max - min) * rng.gen::<f64>(),
            ComplexityDist::LogUniform { min, max } => (min.ln() + (max / min).ln() * rng.gen::<f64>()).exp(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ComplexityDist::Fixed { value } => value,
            ComplexityDist::Uniform { min, max } => 0.5 * (min + max),
            ComplexityDist::LogUniform { min, max } if min == max => min,
            ComplexityDist::LogUniform { min, max } => (max - min) / (max / min).ln(),
        }
    }

    /// Mean classical time-to-solution over the distribution, in closed form.
    pub fn mean_classical_time(&self, tm: &TimeModel) -> f64 {
        let alpha = tm.classical_exponent_alpha;
        let r = tm.reference_complexity;
        let scaled = match *self {
            ComplexityDist::Fixed { value } => (value / r).powf(alpha),
            ComplexityDist::Uniform { min, max } if min == max => (min / r).powf(alpha),
            ComplexityDist::Uniform { min, max } => {
                let (a, b) = (min / r, max / r);
                (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / ((alpha + 1.0) * (b - a))
            }
            ComplexityDist::LogUniform { min, max } if min == max => (min / r).powf(alpha),
            ComplexityDist::LogUniform { min, max } => {
                let (a, b) = (min / r, max / r);
                (b.powf(alpha) - a.powf(alpha)) / (alpha * (b / a).ln())
            }
        };
        tm.classical_reference_time_s * scaled
    }
}

/// Attributes shared by every generated task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskShape {
    pub quantum_amenable_fraction: f64,
    pub data_size_bits: f64,
    /// Probability that a task is flagged local-only.
    pub privacy_fraction: f64,
    pub origin_tier: Tier,
}

impl Default for TaskShape {
    fn default() -> Self {
        TaskShape { quantum_amenable_fraction: 1.0, data_size_bits: 0.0, privacy_fraction: 0.0, origin_tier: Tier::Edge }
    }
}

impl TaskShape {
    fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.quantum_amenable_fraction) {
            out.push(FieldError::new("shape.quantum_amenable_fraction", "must lie in [0, 1]"));
        }
        if !(self.data_size_bits.is_finite() && self.data_size_bits >= 0.0) {
            out.push(FieldError::new("shape.data_size_bits", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.privacy_fraction) {
            out.push(FieldError::new("shape.privacy_fraction", "must lie in [0, 1]"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WorkloadSpec {
    FixedBatch {
        tasks: Vec<Task>,
    },
    PoissonStream {
        rate_per_s: f64,
        duration_s: f64,
        complexity: ComplexityDist,
        #[serde(default)]
        shape: TaskShape,
    },
    /// Poisson streams whose rates are set by offered load relative to the
    /// Cloud's classical capacity.
    LoadSweep {
        levels: Vec<f64>,
        duration_s: f64,
        complexity: ComplexityDist,
        #[serde(default)]
        shape: TaskShape,
    },
}

impl WorkloadSpec {
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        let positive = |out: &mut Vec<FieldError>, f: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(FieldError::new(f, format!("must be finite and > 0, got {v}")));
            }
        };
        match self {
            WorkloadSpec::FixedBatch { tasks } => {
                for (i, t) in tasks.iter().enumerate() {
                    out.extend(t.violations().into_iter().map(|e| FieldError::new(format!("tasks[{i}].{}", e.field), e.reason)));
                }
            }
            WorkloadSpec::PoissonStream { rate_per_s, duration_s, complexity, shape } => {
                positive(&mut out, "rate_per_s", *rate_per_s);
                positive(&mut out, "duration_s", *duration_s);
                out.extend(complexity.violations());
                out.extend(shape.violations());
            }
            WorkloadSpec::LoadSweep { levels, duration_s, complexity, shape } => {
                if levels.is_empty() {
                    out.push(FieldError::new("levels", "must not be empty"));
                }
                for (i, l) in levels.iter().enumerate() {
                    if !(l.is_finite() && *l >= 0.0) {
                        out.push(FieldError::new(format!("levels[{i}]"), "must be finite and >= 0"));
                    }
                }
                positive(&mut out, "duration_s", *duration_s);
                out.extend(complexity.violations());
                out.extend(shape.violations());
            }
        }
        out
    }

    pub fn levels(&self) -> &[f64] {
        match self {
            WorkloadSpec::LoadSweep { levels, .. } => levels,
            _ => &[],
        }
    }
}

fn rng_for(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn poisson(rate: f64, duration: f64, dist: &ComplexityDist, shape: &TaskShape, rng: &mut ChaCha8Rng) -> Vec<Task> {
    let mut tasks = Vec::new();
    if rate <= 0.0 {
        return tasks;
    }
    let mut t = 0.0;
    loop {
        // Inverse-transform exponential; 1 - u lies in (0, 1].
        t += -(1.0 - rng.gen::<f64>()).ln() / rate;
        if t > duration {
            break;
        }
        let complexity = dist.sample(rng);
        let private = shape.privacy_fraction > 0.0 && rng.gen_bool(shape.privacy_fraction);
        tasks.push(Task {
            id: TaskId::new(format!("t{:06}", tasks.len())),
            arrival_time_s: t,
            complexity,
            quantum_amenable_fraction: shape.quantum_amenable_fraction,
            data_size_bits: shape.data_size_bits,
            privacy_local_only: private,
            origin_tier: shape.origin_tier,
        });
    }
    tasks
}

fn check(spec: &WorkloadSpec) -> Result<(), WorkloadError> {
    match spec.violations().into_iter().next() {
        Some(e) => Err(WorkloadError::Invalid(e)),
        None => Ok(()),
    }
}

/// Tasks for replication 0.
pub fn generate(spec: &WorkloadSpec, seed: u64) -> Result<Vec<Task>, WorkloadError> {
    generate_replication(spec, seed, 0)
}

pub fn generate_replication(spec: &WorkloadSpec, seed: u64, replication: u64) -> Result<Vec<Task>, WorkloadError> {
    check(spec)?;
    match spec {
        WorkloadSpec::FixedBatch { tasks } => Ok(tasks.clone()),
        WorkloadSpec::PoissonStream { rate_per_s, duration_s, complexity, shape } => {
            Ok(poisson(*rate_per_s, *duration_s, complexity, shape, &mut rng_for(seed, replication)))
        }
        WorkloadSpec::LoadSweep { .. } => Err(WorkloadError::NeedsLoad),
    }
}

/// Tasks offered at `load` (fraction of `capacity`, in work units per
/// second). Fixed batches ignore the load.
pub fn generate_at_load(
    spec: &WorkloadSpec,
    load: f64,
    capacity: f64,
    seed: u64,
    replication: u64,
) -> Result<Vec<Task>, WorkloadError> {
    check(spec)?;
    match spec {
        WorkloadSpec::FixedBatch { tasks } => Ok(tasks.clone()),
        WorkloadSpec::PoissonStream { duration_s, complexity, shape, .. }
        | WorkloadSpec::LoadSweep { duration_s, complexity, shape, .. } => {
            let rate = load_to_rate(load, capacity, complexity);
            Ok(poisson(rate, *duration_s, complexity, shape, &mut rng_for(seed, replication)))
        }
    }
}

/// Arrival rate that offers `load` × `capacity` work units per second.
pub fn load_to_rate(load: f64, capacity: f64, dist: &ComplexityDist) -> f64 {
    load * capacity / dist.mean()
}

/// Work units per second the Cloud's classical devices sustain for tasks
/// drawn from `dist`.
pub fn cloud_capacity(topo: &Topology, tm: &TimeModel, dist: &ComplexityDist) -> Result<f64, WorkloadError> {
    let slots: u32 = topo
        .devices()
        .iter()
        .filter(|d| d.tier == Tier::Cloud && d.kind.is_classical())
        .map(|d| d.concurrency_slots)
        .sum();
    if slots == 0 {
        return Err(WorkloadError::NoCapacity);
    }
    Ok(slots as f64 * dist.mean() / dist.mean_classical_time(tm))
}
