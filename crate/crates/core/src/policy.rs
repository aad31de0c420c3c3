//! Adaptive quantum-classical fusion: task decomposition, device placement
//! under a routing profile, and warm-start commands.
//!
//! Placement is a pure function of the task, the topology, and a snapshot of
//! the orchestrator's own bookkeeping (projected backlog per device). It does
//! not look at realised completion times, so two runs that differ only in
//! warm-start behaviour make identical placement decisions.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    coupling_idle_energy, time_to_solution, transfer_energy, CouplingFactors, EnergyError, Payload, TimeModel,
};
use crate::model::{DeviceId, FieldError, QpuState, RoutingProfile, Task, TaskId, Tier};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no feasible device for {subtask} under {profile}")]
    NoFeasibleDevice { subtask: String, profile: RoutingProfile },
    #[error("no device at origin tier {0} to ingest task data")]
    NoGateway(Tier),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubtaskPart {
    PreProcess,
    QuantumKernel,
    ClassicalKernel,
    PostProcess,
}

impl SubtaskPart {
    pub fn is_kernel(self) -> bool {
        matches!(self, SubtaskPart::QuantumKernel | SubtaskPart::ClassicalKernel)
    }

    fn tag(self) -> &'static str {
        match self {
            SubtaskPart::PreProcess => "pre",
            SubtaskPart::QuantumKernel => "qk",
            SubtaskPart::ClassicalKernel => "ck",
            SubtaskPart::PostProcess => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTask {
    pub parent: TaskId,
    pub part: SubtaskPart,
    /// Share of the parent's complexity.
    pub work: f64,
    /// Error-mitigation work added on top of the parent's complexity
    /// (post-processing only).
    pub overhead_work: f64,
    pub must_run_at: Option<Tier>,
}

impl SubTask {
    pub fn id(&self) -> String {
        format!("{}/{}", self.parent, self.part.tag())
    }

    pub fn effective_work(&self) -> f64 {
        self.work + self.overhead_work
    }
}

impl fmt::Display for SubTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub quantum_offload_fraction: f64,
    pub preprocess_fraction: f64,
    pub postprocess_fraction: f64,
    pub warm_start_lookahead_s: f64,
    pub profile: RoutingProfile,
    #[serde(default = "enabled")]
    pub warm_start_enabled: bool,
    #[serde(default)]
    pub mitigation_overhead_fraction: f64,
    /// Skip devices whose projected backlog exceeds this many seconds,
    /// unless every candidate does.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_backlog_s: Option<f64>,
}

fn enabled() -> bool {
    true
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            quantum_offload_fraction: 0.30,
            preprocess_fraction: 0.1,
            postprocess_fraction: 0.1,
            warm_start_lookahead_s: 0.0,
            profile: RoutingProfile::CarbonPrioritized,
            warm_start_enabled: true,
            mitigation_overhead_fraction: 0.0,
            max_backlog_s: None,
        }
    }
}

impl PolicyConfig {
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.quantum_offload_fraction) {
            out.push(FieldError::new("quantum_offload_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.preprocess_fraction) {
            out.push(FieldError::new("preprocess_fraction", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.postprocess_fraction) {
            out.push(FieldError::new("postprocess_fraction", "must lie in [0, 1)"));
        }
        if !(self.preprocess_fraction + self.postprocess_fraction < 1.0) {
            out.push(FieldError::new("postprocess_fraction", "preprocess + postprocess fractions must be < 1"));
        }
        if !(self.warm_start_lookahead_s.is_finite() && self.warm_start_lookahead_s >= 0.0) {
            out.push(FieldError::new("warm_start_lookahead_s", "must be a finite value >= 0"));
        }
        if !(self.mitigation_overhead_fraction.is_finite() && self.mitigation_overhead_fraction >= 0.0) {
            out.push(FieldError::new("mitigation_overhead_fraction", "must be a finite value >= 0"));
        }
        if let Some(b) = self.max_backlog_s {
            if !(b >= 0.0) {
                out.push(FieldError::new("max_backlog_s", "must be >= 0"));
            }
        }
        out
    }

    /// With no quantum offload the fusion layer is inert and tasks follow
    /// the classical baseline route.
    pub fn effective_profile(&self) -> RoutingProfile {
        if self.quantum_offload_fraction == 0.0 {
            RoutingProfile::ClassicalHpcOnly
        } else {
            self.profile
        }
    }

    pub fn with_profile(&self, profile: RoutingProfile) -> PolicyConfig {
        PolicyConfig { profile, ..self.clone() }
    }
}

/// Splits a task into pre-processing, quantum and classical kernels, and
/// post-processing. Zero-work parts are omitted; the parts' `work` sums to
/// the task complexity exactly when added in order.
pub fn decompose(task: &Task, cfg: &PolicyConfig) -> Vec<SubTask> {
    let n = task.complexity;
    let q = match cfg.effective_profile() {
        RoutingProfile::ClassicalHpcOnly => 0.0,
        _ => cfg.quantum_offload_fraction.min(task.quantum_amenable_fraction),
    };
    let pre = cfg.preprocess_fraction * n;
    let post = cfg.postprocess_fraction * n;
    let pool = n - pre - post;
    let quantum = q * pool;
    let classical = pool - quantum;

    let local = task.privacy_local_only.then_some(task.origin_tier);
    let mut parts: Vec<SubTask> = [
        (SubtaskPart::PreProcess, pre, local),
        (SubtaskPart::QuantumKernel, quantum, None),
        (SubtaskPart::ClassicalKernel, classical, None),
        (SubtaskPart::PostProcess, post, local),
    ]
    .into_iter()
    .filter(|(_, w, _)| *w > 0.0)
    .map(|(part, work, must_run_at)| SubTask {
        parent: task.id.clone(),
        part,
        work,
        overhead_work: if part == SubtaskPart::PostProcess { cfg.mitigation_overhead_fraction * quantum } else { 0.0 },
        must_run_at,
    })
    .collect();

    conserve_work(&mut parts, n);
    parts
}

// Re-derive the last part as the remainder and nudge it by single ulps
// until the in-order sum reproduces the complexity bit for bit.
fn conserve_work(parts: &mut [SubTask], n: f64) {
    let Some((last, head)) = parts.split_last_mut() else { return };
    let prefix: f64 = head.iter().map(|p| p.work).sum();
    let mut rem = n - prefix;
    for _ in 0..64 {
        let total = prefix + rem;
        match total.partial_cmp(&n) {
            Some(Ordering::Less) => rem = rem.next_up(),
            Some(Ordering::Greater) => rem = rem.next_down(),
            _ => break,
        }
    }
    if rem > 0.0 {
        last.work = rem;
    }
}

/// Indices of the subtasks whose output `idx` consumes.
pub fn predecessors(subtasks: &[SubTask], idx: usize) -> Vec<usize> {
    let part = subtasks[idx].part;
    match part {
        SubtaskPart::PreProcess => Vec::new(),
        SubtaskPart::QuantumKernel | SubtaskPart::ClassicalKernel => {
            subtasks.iter().position(|s| s.part == SubtaskPart::PreProcess).into_iter().collect()
        }
        SubtaskPart::PostProcess => {
            let kernels: Vec<usize> = (0..subtasks.len()).filter(|&i| subtasks[i].part.is_kernel()).collect();
            if kernels.is_empty() {
                subtasks.iter().position(|s| s.part == SubtaskPart::PreProcess).into_iter().collect()
            } else {
                kernels
            }
        }
    }
}

/// The orchestrator's view of one device at decision time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSnapshot {
    /// Seconds of committed work ahead of a new arrival, per the
    /// orchestrator's own contention-free projection.
    pub backlog_s: f64,
    /// For QPUs: `Cold` whenever new demand would need a fresh warm-up.
    pub qpu_state: Option<QpuState>,
}

/// Orchestrator-side bookkeeping of committed work per device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStates {
    projected_free: Vec<f64>,
    slots: Vec<f64>,
    qpu_states: Vec<Option<QpuState>>,
}

impl DeviceStates {
    pub fn new(topo: &Topology) -> Self {
        DeviceStates {
            projected_free: vec![0.0; topo.len()],
            slots: topo.devices().iter().map(|d| d.concurrency_slots as f64).collect(),
            qpu_states: topo.devices().iter().map(|d| d.kind.is_qpu().then_some(QpuState::Cold)).collect(),
        }
    }

    pub fn snapshot(&self, idx: usize, now: f64) -> DeviceSnapshot {
        DeviceSnapshot { backlog_s: (self.projected_free[idx] - now).max(0.0), qpu_state: self.qpu_states[idx] }
    }

    pub fn set_qpu_state(&mut self, idx: usize, state: QpuState) {
        if self.qpu_states[idx].is_some() {
            self.qpu_states[idx] = Some(state);
        }
    }

    fn book(&mut self, idx: usize, now: f64, hold_s: f64) {
        self.projected_free[idx] = self.projected_free[idx].max(now) + hold_s / self.slots[idx];
    }

    /// Records a plan's work in the projection.
    pub fn commit(&mut self, plan: &PlacementPlan, now: f64) {
        for a in &plan.assignments {
            self.book(a.device, now, a.expected_hold_s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Index into the task's subtask list.
    pub subtask: usize,
    pub device: usize,
    pub device_id: DeviceId,
    pub exec_s: f64,
    /// Device occupancy: execution plus, on a QPU, the feedback round trip.
    pub expected_hold_s: f64,
    /// Contention-free estimates, absolute times.
    pub expected_ready_s: f64,
    pub expected_finish_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    pub subtask: usize,
    pub from: usize,
    pub to: usize,
    pub hops: Vec<usize>,
    pub seconds: f64,
    pub joules: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub task: TaskId,
    pub source: usize,
    pub assignments: Vec<Assignment>,
    pub warm_starts: Vec<(DeviceId, f64)>,
    pub transfers: Vec<TransferPlan>,
}

impl PlacementPlan {
    pub fn device_of(&self, subtask: usize) -> usize {
        self.assignments[subtask].device
    }

    /// Contention-free completion estimate.
    pub fn expected_completion_s(&self) -> f64 {
        self.assignments.iter().map(|a| a.expected_finish_s).fold(0.0, f64::max)
    }
}

/// One device under consideration for a subtask.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub device: usize,
    pub id: DeviceId,
    pub tier: Tier,
    pub is_qpu: bool,
    pub is_classical: bool,
    pub carbon_kg_per_kwh: f64,
    pub expected_energy_j: f64,
    pub backlog_s: f64,
}

fn tie_chain(a: &Candidate, b: &Candidate) -> Ordering {
    a.expected_energy_j
        .total_cmp(&b.expected_energy_j)
        .then(a.carbon_kg_per_kwh.total_cmp(&b.carbon_kg_per_kwh))
        .then(a.backlog_s.total_cmp(&b.backlog_s))
        .then_with(|| a.id.cmp(&b.id))
}

fn profile_order(profile: RoutingProfile, a: &Candidate, b: &Candidate) -> Ordering {
    match profile {
        RoutingProfile::ClassicalHpcOnly => tie_chain(a, b),
        RoutingProfile::CarbonPrioritized => a.carbon_kg_per_kwh.total_cmp(&b.carbon_kg_per_kwh).then_with(|| tie_chain(a, b)),
        RoutingProfile::EdgeCentric => a.tier.cmp(&b.tier).then_with(|| tie_chain(a, b)),
    }
}

/// Ranks candidates under a routing profile. `ClassicalHpcOnly` keeps only
/// Cloud classical devices; the other profiles keep every candidate.
pub fn route_profile(profile: RoutingProfile, candidates: &[Candidate]) -> Vec<Candidate> {
    let mut ranked: Vec<Candidate> = candidates
        .iter()
        .filter(|c| profile != RoutingProfile::ClassicalHpcOnly || (c.is_classical && c.tier == Tier::Cloud))
        .cloned()
        .collect();
    ranked.sort_by(|a, b| profile_order(profile, a, b));
    ranked
}

/// Static inputs placement needs besides the task itself.
#[derive(Debug, Clone, Copy)]
pub struct Placer<'a> {
    pub topology: &'a Topology,
    pub time_model: &'a TimeModel,
    pub coupling: &'a CouplingFactors,
}

impl<'a> Placer<'a> {
    pub fn new(topology: &'a Topology, time_model: &'a TimeModel, coupling: &'a CouplingFactors) -> Self {
        Placer { topology, time_model, coupling }
    }

    /// Execution time and device occupancy of `work` on device `idx`.
    pub fn service_times(&self, idx: usize, work: f64) -> Result<(f64, f64), EnergyError> {
        let d = self.topology.device(idx);
        let exec = time_to_solution(work, d.kind, self.time_model)?;
        let rtt = if d.kind.is_qpu() { self.topology.controller_rtt(idx) } else { 0.0 };
        Ok((exec, exec + rtt))
    }

    /// Energy attributable to running `work` on device `idx`, excluding
    /// data movement.
    pub fn service_energy(&self, idx: usize, work: f64) -> Result<f64, EnergyError> {
        let d = self.topology.device(idx);
        let (exec, _) = self.service_times(idx, work)?;
        let mut e = d.execution_power_w() * exec;
        if d.kind.is_qpu() {
            if let Some(c) = self.topology.controller_of(idx) {
                e += self.topology.device(c).active_power_w * exec;
            }
            e += coupling_idle_energy(self.topology.controller_rtt(idx), d, self.coupling)?;
        }
        Ok(e)
    }

    fn transfer(&self, bits: f64, from: usize, to: usize) -> Option<(Vec<usize>, f64, f64)> {
        let route = self.topology.route(from, to)?;
        let (s, j) = transfer_energy(bits, self.topology.route_links(route), Payload::Classical).ok()?;
        Some((route.hops.clone(), s, j))
    }

    fn candidate_devices(&self, sub: &SubTask, profile: RoutingProfile) -> Vec<usize> {
        self.topology
            .devices()
            .iter()
            .enumerate()
            .filter(|(_, d)| match sub.part {
                SubtaskPart::QuantumKernel => d.kind.is_qpu(),
                _ => d.kind.is_classical(),
            })
            .filter(|(_, d)| match sub.must_run_at {
                Some(t) => d.tier == t,
                None => profile != RoutingProfile::ClassicalHpcOnly || d.tier == Tier::Cloud,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Places every subtask of `task`, in order, and returns the plan. The
    /// plan's warm-start list is left empty; see [`warm_start_commands`].
    pub fn place(
        &self,
        task: &Task,
        subtasks: &[SubTask],
        states: &DeviceStates,
        cfg: &PolicyConfig,
        now: f64,
    ) -> Result<PlacementPlan, PolicyError> {
        let profile = cfg.effective_profile();
        let source = self.topology.gateway(task.origin_tier).ok_or(PolicyError::NoGateway(task.origin_tier))?;
        let mut local = states.clone();
        let mut assignments: Vec<Assignment> = Vec::with_capacity(subtasks.len());
        let mut transfers = Vec::new();

        for (i, sub) in subtasks.iter().enumerate() {
            let preds = predecessors(subtasks, i);
            let inputs: Vec<(usize, f64)> = if preds.is_empty() {
                vec![(source, now)]
            } else {
                preds.iter().map(|&p| (assignments[p].device, assignments[p].expected_finish_s)).collect()
            };

            let mut cands = Vec::new();
            for dev in self.candidate_devices(sub, profile) {
                let Ok(service) = self.service_energy(dev, sub.effective_work()) else { continue };
                let mut moved = 0.0;
                let mut reachable = true;
                for &(from, _) in &inputs {
                    match self.transfer(task.data_size_bits, from, dev) {
                        Some((_, _, j)) => moved += j,
                        None => reachable = false,
                    }
                }
                if !reachable {
                    continue;
                }
                let d = self.topology.device(dev);
                cands.push(Candidate {
                    device: dev,
                    id: d.id.clone(),
                    tier: d.tier,
                    is_qpu: d.kind.is_qpu(),
                    is_classical: d.kind.is_classical(),
                    carbon_kg_per_kwh: d.carbon_intensity_kg_per_kwh,
                    expected_energy_j: service + moved,
                    backlog_s: local.snapshot(dev, now).backlog_s,
                });
            }
            cands.sort_by(|a, b| profile_order(profile, a, b));
            let chosen = cfg
                .max_backlog_s
                .and_then(|limit| cands.iter().find(|c| c.backlog_s <= limit))
                .or_else(|| cands.first())
                .ok_or_else(|| PolicyError::NoFeasibleDevice { subtask: sub.id(), profile })?
                .device;

            let (exec_s, hold_s) = self.service_times(chosen, sub.effective_work())?;
            let mut ready = now;
            for &(from, finish) in &inputs {
                let (hops, seconds, joules) = self.transfer(task.data_size_bits, from, chosen).expect("checked reachable");
                ready = ready.max(finish + seconds);
                transfers.push(TransferPlan { subtask: i, from, to: chosen, hops, seconds, joules });
            }
            local.book(chosen, now, hold_s);
            assignments.push(Assignment {
                subtask: i,
                device: chosen,
                device_id: self.topology.device(chosen).id.clone(),
                exec_s,
                expected_hold_s: hold_s,
                expected_ready_s: ready,
                expected_finish_s: ready + hold_s,
            });
        }

        Ok(PlacementPlan { task: task.id.clone(), source, assignments, warm_starts: Vec::new(), transfers })
    }
}

/// Warm-start commands for every QPU in `plan` that would otherwise be cold
/// when its kernel arrives. A command is timed so the QPU is ready
/// `warm_start_lookahead_s` before the kernel's contention-free arrival, and
/// never earlier than detection.
pub fn warm_start_commands(
    plan: &PlacementPlan,
    detection_time_s: f64,
    topology: &Topology,
    states: &DeviceStates,
    cfg: &PolicyConfig,
) -> Vec<(DeviceId, f64)> {
    if !cfg.warm_start_enabled {
        return Vec::new();
    }
    let mut out: Vec<(DeviceId, f64)> = Vec::new();
    for a in &plan.assignments {
        let d = topology.device(a.device);
        if !d.kind.is_qpu() || out.iter().any(|(id, _)| *id == d.id) {
            continue;
        }
        if states.snapshot(a.device, detection_time_s).qpu_state != Some(QpuState::Cold) {
            continue;
        }
        let issue = (a.expected_ready_s - d.warmup_time_s - cfg.warm_start_lookahead_s).max(detection_time_s);
        out.push((d.id.clone(), issue));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channel, CouplingMode, DeviceKind, DeviceNode, Link};
    use crate::topology::validate_topology;

    fn task(complexity: f64, amenable: f64) -> Task {
        Task {
            id: "t0".into(),
            arrival_time_s: 0.0,
            complexity,
            quantum_amenable_fraction: amenable,
            data_size_bits: 0.0,
            privacy_local_only: false,
            origin_tier: Tier::Edge,
        }
    }

    fn cfg(q: f64, profile: RoutingProfile) -> PolicyConfig {
        PolicyConfig { quantum_offload_fraction: q, profile, ..PolicyConfig::default() }
    }

    fn works(parts: &[SubTask]) -> Vec<(SubtaskPart, f64)> {
        parts.iter().map(|p| (p.part, p.work)).collect()
    }

    #[test]
    fn decompose_splits_kernel_pool() {
        let parts = decompose(&task(100.0, 1.0), &cfg(0.30, RoutingProfile::CarbonPrioritized));
        let w = works(&parts);
        assert_eq!(w.len(), 4);
        let expected = [10.0, 24.0, 56.0, 10.0];
        for ((_, got), want) in w.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{w:?}");
        }
        assert_eq!(parts.iter().map(|p| p.work).sum::<f64>(), 100.0);
    }

    #[test]
    fn zero_offload_has_no_quantum_kernel() {
        let parts = decompose(&task(100.0, 1.0), &cfg(0.0, RoutingProfile::CarbonPrioritized));
        assert_eq!(
            parts.iter().map(|p| p.part).collect::<Vec<_>>(),
            vec![SubtaskPart::PreProcess, SubtaskPart::ClassicalKernel, SubtaskPart::PostProcess]
        );
        assert!((parts[1].work - 80.0).abs() < 1e-9);
    }

    #[test]
    fn amenability_caps_offload() {
        let parts = decompose(&task(100.0, 0.1), &cfg(0.30, RoutingProfile::EdgeCentric));
        assert!((parts[1].work - 8.0).abs() < 1e-9);
        let baseline = decompose(&task(100.0, 1.0), &cfg(0.30, RoutingProfile::ClassicalHpcOnly));
        assert!(baseline.iter().all(|p| p.part != SubtaskPart::QuantumKernel));
    }

    #[test]
    fn privacy_pins_pre_and_post_to_origin() {
        let mut t = task(100.0, 1.0);
        t.privacy_local_only = true;
        let parts = decompose(&t, &cfg(0.30, RoutingProfile::CarbonPrioritized));
        assert_eq!(parts[0].must_run_at, Some(Tier::Edge));
        assert_eq!(parts[3].must_run_at, Some(Tier::Edge));
        assert_eq!(parts[1].must_run_at, None);
    }

    #[test]
    fn mitigation_adds_overhead_without_breaking_conservation() {
        let c = PolicyConfig { mitigation_overhead_fraction: 0.5, ..cfg(0.30, RoutingProfile::CarbonPrioritized) };
        let parts = decompose(&task(100.0, 1.0), &c);
        assert!((parts[3].overhead_work - 12.0).abs() < 1e-9);
        assert_eq!(parts.iter().map(|p| p.work).sum::<f64>(), 100.0);
    }

    #[test]
    fn dependencies() {
        let parts = decompose(&task(100.0, 1.0), &cfg(0.30, RoutingProfile::CarbonPrioritized));
        assert!(predecessors(&parts, 0).is_empty());
        assert_eq!(predecessors(&parts, 1), vec![0]);
        assert_eq!(predecessors(&parts, 2), vec![0]);
        assert_eq!(predecessors(&parts, 3), vec![1, 2]);
    }

    fn cand(id: &str, tier: Tier, carbon: f64, energy: f64) -> Candidate {
        Candidate {
            device: 0,
            id: id.into(),
            tier,
            is_qpu: false,
            is_classical: true,
            carbon_kg_per_kwh: carbon,
            expected_energy_j: energy,
            backlog_s: 0.0,
        }
    }

    #[test]
    fn carbon_profile_puts_renewables_first() {
        let mut grid = cand("grid-qpu", Tier::Cloud, 0.4, 1.0);
        let mut green = cand("green-qpu", Tier::Cloud, 0.0, 5.0);
        grid.is_qpu = true;
        green.is_qpu = true;
        let ranked = route_profile(RoutingProfile::CarbonPrioritized, &[grid, green]);
        assert_eq!(ranked[0].id.as_str(), "green-qpu");
    }

    #[test]
    fn edge_profile_puts_edge_first() {
        let ranked = route_profile(
            RoutingProfile::EdgeCentric,
            &[cand("cloud-cpu", Tier::Cloud, 0.4, 1.0), cand("edge-cpu", Tier::Edge, 0.4, 1.0)],
        );
        assert_eq!(ranked[0].id.as_str(), "edge-cpu");
    }

    #[test]
    fn singleton_and_baseline_filtering() {
        let only = cand("x", Tier::Fog, 0.1, 1.0);
        assert_eq!(route_profile(RoutingProfile::EdgeCentric, std::slice::from_ref(&only)), vec![only.clone()]);
        assert!(route_profile(RoutingProfile::ClassicalHpcOnly, &[only]).is_empty());
    }

    #[test]
    fn ties_fall_back_to_backlog_then_id() {
        let a = Candidate { backlog_s: 5.0, ..cand("a", Tier::Cloud, 0.4, 1.0) };
        let b = cand("b", Tier::Cloud, 0.4, 1.0);
        let c = cand("c", Tier::Cloud, 0.4, 1.0);
        let ids: Vec<_> = route_profile(RoutingProfile::ClassicalHpcOnly, &[c, a, b])
            .into_iter()
            .map(|c| c.id.0)
            .collect();
        assert_eq!(ids, vec!["b", "c", "a"]);
    }

    fn device(id: &str, tier: Tier, kind: DeviceKind, power: f64) -> DeviceNode {
        DeviceNode {
            id: id.into(),
            tier,
            kind,
            coupling: CouplingMode::TightCoLocated,
            active_power_w: power,
            idle_power_w: 0.0,
            cryo_baseline_power_w: 0.0,
            warmup_time_s: 30.0,
            concurrency_slots: 1,
            renewable_powered: false,
            carbon_intensity_kg_per_kwh: 0.4,
            controller: None,
        }
    }

    fn star(devices: Vec<DeviceNode>) -> Topology {
        let hub = devices[0].id.clone();
        let links: Vec<Link> = devices[1..]
            .iter()
            .map(|d| Link {
                from: hub.clone(),
                to: d.id.clone(),
                latency_s: 0.01,
                bandwidth_bits_per_s: 1e9,
                energy_per_bit_j: 1e-9,
                channel: Channel::Classical,
                bidirectional: true,
            })
            .collect();
        validate_topology(&devices, &links).unwrap()
    }

    #[test]
    fn baseline_places_everything_on_cloud_classical() {
        let topo = star(vec![
            device("edge-cpu", Tier::Edge, DeviceKind::ClassicalCpu, 100.0),
            device("cloud-cpu", Tier::Cloud, DeviceKind::ClassicalCpu, 1000.0),
            device("qpu", Tier::Cloud, DeviceKind::QpuCryogenicLarge, 10.0),
        ]);
        let tm = TimeModel::from_coefficients(0.01, 1.0, 0.001, 1.0);
        let f = CouplingFactors::default();
        let placer = Placer::new(&topo, &tm, &f);
        let c = cfg(0.3, RoutingProfile::ClassicalHpcOnly);
        let t = task(100.0, 1.0);
        let subs = decompose(&t, &c);
        let plan = placer.place(&t, &subs, &DeviceStates::new(&topo), &c, 0.0).unwrap();
        assert!(plan.assignments.iter().all(|a| a.device_id.as_str() == "cloud-cpu"));
    }

    #[test]
    fn edge_centric_keeps_small_tasks_at_the_edge() {
        let topo = star(vec![
            device("edge-cpu", Tier::Edge, DeviceKind::ClassicalCpu, 100.0),
            device("cloud-cpu", Tier::Cloud, DeviceKind::ClassicalCpu, 10.0),
            device("edge-qpu", Tier::Edge, DeviceKind::QpuCompactEdge, 50.0),
            device("qpu", Tier::Cloud, DeviceKind::QpuCryogenicLarge, 10.0),
        ]);
        let tm = TimeModel::from_coefficients(0.01, 1.0, 0.001, 1.0);
        let f = CouplingFactors::default();
        let placer = Placer::new(&topo, &tm, &f);
        let c = cfg(0.3, RoutingProfile::EdgeCentric);
        let t = task(10.0, 1.0);
        let subs = decompose(&t, &c);
        let plan = placer.place(&t, &subs, &DeviceStates::new(&topo), &c, 0.0).unwrap();
        for a in &plan.assignments {
            assert_eq!(topo.device(a.device).tier, Tier::Edge, "{}", a.device_id);
        }
    }

    #[test]
    fn quantum_kernel_without_qpu_is_infeasible() {
        let topo = star(vec![
            device("edge-cpu", Tier::Edge, DeviceKind::ClassicalCpu, 100.0),
            device("cloud-cpu", Tier::Cloud, DeviceKind::ClassicalCpu, 10.0),
        ]);
        let tm = TimeModel::from_coefficients(0.01, 1.0, 0.001, 1.0);
        let f = CouplingFactors::default();
        let placer = Placer::new(&topo, &tm, &f);
        let c = cfg(0.3, RoutingProfile::CarbonPrioritized);
        let t = task(10.0, 1.0);
        let subs = decompose(&t, &c);
        let err = placer.place(&t, &subs, &DeviceStates::new(&topo), &c, 0.0).unwrap_err();
        assert!(matches!(err, PolicyError::NoFeasibleDevice { .. }));
    }

    #[test]
    fn warm_start_only_for_cold_qpus() {
        let topo = star(vec![
            device("edge-cpu", Tier::Edge, DeviceKind::ClassicalCpu, 100.0),
            device("qpu", Tier::Cloud, DeviceKind::QpuCryogenicLarge, 10.0),
        ]);
        let tm = TimeModel::from_coefficients(0.5, 1.0, 0.001, 1.0);
        let f = CouplingFactors::default();
        let placer = Placer::new(&topo, &tm, &f);
        let c = cfg(0.3, RoutingProfile::CarbonPrioritized);
        let t = task(100.0, 1.0);
        let subs = decompose(&t, &c);
        let mut states = DeviceStates::new(&topo);
        let plan = placer.place(&t, &subs, &states, &c, 0.0).unwrap();
        let cmds = warm_start_commands(&plan, 0.0, &topo, &states, &c);
        assert_eq!(cmds, vec![(DeviceId::new("qpu"), 0.0)]);

        let late = PolicyConfig { warm_start_lookahead_s: 0.0, ..c.clone() };
        let qk = plan.assignments.iter().find(|a| a.device_id.as_str() == "qpu").unwrap();
        // pre-processing is 5 s here, warm-up 30 s: issuing at detection is the best we can do.
        assert!(qk.expected_ready_s < 30.0);
        assert_eq!(warm_start_commands(&plan, 0.0, &topo, &states, &late)[0].1, 0.0);

        states.set_qpu_state(topo.index_of(&"qpu".into()).unwrap(), QpuState::Ready);
        assert!(warm_start_commands(&plan, 0.0, &topo, &states, &c).is_empty());
    }
}
