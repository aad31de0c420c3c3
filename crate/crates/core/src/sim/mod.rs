//! Deterministic discrete-event core.
//!
//! A task's life: `TaskArrival` (decompose, place, warm-start) →
//! `TransferComplete` for each input → `SubtaskStart` → `SubtaskComplete`,
//! repeated along the subtask DAG until the post-processing step finishes.
//!
//! Devices serve their subtasks strictly in assignment order: the head of a
//! device's sequence must start before anything behind it, and it starts as
//! soon as its inputs have arrived, a slot is free, and (for a QPU) the
//! device is warm.
//!
//! QPU warm-up is organised in epochs. A kernel routed to a QPU whose last
//! demand was at `t` with `t + cooldown_s <= now` opens a new epoch and needs a fresh warm-up;
//! the warm-up begins at the warm-start command (or, without one, when that
//! kernel's inputs arrive) but never before the previous epoch has drained.
//! Once `cooldown_s` passes with no new demand the epoch closes and the QPU
//! goes cold as soon as its remaining kernels finish.

mod queue;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use queue::{Event, EventKind, EventQueue};

use crate::energy::{carbon_of, coupling_idle_energy, execution_energy, CarbonIntensity, CouplingFactors, EnergyBreakdown, TimeModel};
use crate::model::{DeviceId, FieldError, QpuState, RoutingProfile, Task, TaskId};
use crate::policy::{decompose, predecessors, warm_start_commands, DeviceStates, PlacementPlan, Placer, PolicyConfig, PolicyError, SubTask};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event scheduled at t={requested} while the clock reads t={now}")]
    TimeTravel { now: f64, requested: f64 },
    #[error("event horizon of {cap} events exceeded")]
    NonQuiescent { cap: u64 },
    #[error("task `{task}`: {error}")]
    InvalidTask { task: TaskId, error: FieldError },
    #[error("task id `{0}` appears more than once")]
    DuplicateTask(TaskId),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_cooldown")]
    pub cooldown_s: f64,
    #[serde(default = "default_cap")]
    pub event_cap: u64,
    #[serde(default)]
    pub coupling_factors: CouplingFactors,
}

fn default_cooldown() -> f64 {
    300.0
}

fn default_cap() -> u64 {
    10_000_000
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { cooldown_s: default_cooldown(), event_cap: default_cap(), coupling_factors: CouplingFactors::default() }
    }
}

impl EngineConfig {
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if !(self.cooldown_s.is_finite() && self.cooldown_s >= 0.0) {
            out.push(FieldError::new("cooldown_s", "must be a finite value >= 0"));
        }
        if self.event_cap == 0 {
            out.push(FieldError::new("event_cap", "must be positive"));
        }
        out.extend(self.coupling_factors.violations());
        out
    }
}

/// Everything the engine needs besides the task list.
#[derive(Debug, Clone, Copy)]
pub struct SimInput<'a> {
    pub topology: &'a Topology,
    pub policy: &'a PolicyConfig,
    pub time_model: &'a TimeModel,
    pub engine: &'a EngineConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub per_task: BTreeMap<TaskId, EnergyBreakdown>,
    pub per_device: BTreeMap<DeviceId, EnergyBreakdown>,
    /// Standby energy of devices sitting warm with nothing to run.
    pub unattributed_idle_j: f64,
    pub total_carbon_kg: f64,
    pub completed_work: f64,
    pub makespan_s: f64,
}

impl EnergyLedger {
    pub fn total_energy_j(&self) -> f64 {
        self.per_device.values().map(|e| e.total_j()).sum()
    }

    pub fn attributed_energy_j(&self) -> f64 {
        self.per_task.values().map(|e| e.total_j()).sum()
    }

    /// Relative mismatch between the task-side and device-side totals.
    pub fn cross_foot_error(&self) -> f64 {
        let lhs = self.attributed_energy_j() + self.unattributed_idle_j;
        let rhs = self.total_energy_j();
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub ledger: EnergyLedger,
    pub per_task_latency: BTreeMap<TaskId, f64>,
    /// Latency in excess of the task's contention-free critical path:
    /// waiting for slots and for QPU warm-up.
    pub per_task_queue_delay: BTreeMap<TaskId, f64>,
    pub per_task_completion: BTreeMap<TaskId, f64>,
    pub events_processed: u64,
    pub seed: u64,
    pub profile: RoutingProfile,
}

impl SimResult {
    pub fn mean_latency_s(&self) -> f64 {
        if self.per_task_latency.is_empty() {
            0.0
        } else {
            self.per_task_latency.values().sum::<f64>() / self.per_task_latency.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time_s: f64,
    pub seq: u64,
    pub kind: &'static str,
}

struct Input {
    transfer: usize,
}

struct TaskRt {
    subtasks: Vec<SubTask>,
    plan: PlacementPlan,
    inputs: Vec<Vec<Input>>,
    successors: Vec<Vec<usize>>,
    pending_inputs: Vec<usize>,
    epoch: Vec<Option<usize>>,
    remaining: usize,
    energy: EnergyBreakdown,
}

#[derive(Debug, Clone, Default)]
struct Epoch {
    trigger: Option<f64>,
    begin: Option<f64>,
    ready_at: Option<f64>,
    pending: usize,
    closed: bool,
    generation: u64,
}

#[derive(Debug, Clone, Default)]
struct QpuRt {
    epochs: Vec<Epoch>,
    last_demand: Option<f64>,
    cooldown_generation: u64,
    /// Latest finish among completed kernels.
    drained_at: f64,
}

impl QpuRt {
    fn open_epoch(&self) -> Option<usize> {
        self.epochs.last().filter(|e| !e.closed).map(|_| self.epochs.len() - 1)
    }

    fn all_drained_before(&self, epoch: usize) -> bool {
        self.epochs[..epoch].iter().all(|e| e.pending == 0)
    }
}

struct DeviceRt {
    sequence: VecDeque<(usize, usize)>,
    busy: u32,
    slots: u32,
    used: bool,
    idle_since: Option<f64>,
    qpu: Option<QpuRt>,
}

pub struct Engine<'a> {
    input: SimInput<'a>,
    placer: Placer<'a>,
    tasks: &'a [Task],
    queue: EventQueue,
    rt: Vec<Option<TaskRt>>,
    devices: Vec<DeviceRt>,
    states: DeviceStates,
    per_device: Vec<EnergyBreakdown>,
    unattributed_idle_j: f64,
    completion: Vec<Option<f64>>,
    queue_delay: Vec<f64>,
    events_processed: u64,
    trace: Option<Vec<TraceEntry>>,
}

impl<'a> Engine<'a> {
    pub fn new(input: SimInput<'a>, tasks: &'a [Task]) -> Result<Self, SimError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in tasks {
            if let Some(error) = t.violations().into_iter().next() {
                return Err(SimError::InvalidTask { task: t.id.clone(), error });
            }
            if !seen.insert(&t.id) {
                return Err(SimError::DuplicateTask(t.id.clone()));
            }
        }
        let topo = input.topology;
        let mut queue = EventQueue::new();
        for (i, t) in tasks.iter().enumerate() {
            queue.schedule(t.arrival_time_s, EventKind::TaskArrival { task: i })?;
        }
        let devices = topo
            .devices()
            .iter()
            .map(|d| DeviceRt {
                sequence: VecDeque::new(),
                busy: 0,
                slots: d.concurrency_slots,
                used: false,
                idle_since: None,
                qpu: d.kind.is_qpu().then(QpuRt::default),
            })
            .collect();
        Ok(Engine {
            input,
            placer: Placer::new(topo, input.time_model, &input.engine.coupling_factors),
            tasks,
            queue,
            rt: tasks.iter().map(|_| None).collect(),
            devices,
            states: DeviceStates::new(topo),
            per_device: vec![EnergyBreakdown::ZERO; topo.len()],
            unattributed_idle_j: 0.0,
            completion: vec![None; tasks.len()],
            queue_delay: vec![0.0; tasks.len()],
            events_processed: 0,
            trace: None,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    /// Processes the least pending event. Returns `false` once the queue is
    /// empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(ev) = self.queue.pop() else { return Ok(false) };
        self.events_processed += 1;
        if self.events_processed > self.input.engine.event_cap {
            return Err(SimError::NonQuiescent { cap: self.input.engine.event_cap });
        }
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry { time_s: ev.time_s, seq: ev.seq, kind: ev.kind.name() });
        }
        let now = ev.time_s;
        match ev.kind {
            EventKind::TaskArrival { task } => self.on_arrival(task, now)?,
            EventKind::WarmStartComplete { qpu, epoch, generation } => self.on_warm(qpu, epoch, generation, now)?,
            EventKind::TransferComplete { task, subtask, input } => self.on_transfer(task, subtask, input, now)?,
            EventKind::SubtaskStart { task, subtask } => self.on_start(task, subtask, now)?,
            EventKind::SubtaskComplete { task, subtask } => self.on_complete(task, subtask, now)?,
            EventKind::CooldownExpired { qpu, generation } => self.on_cooldown(qpu, generation, now)?,
        }
        Ok(true)
    }

    pub fn run_to_quiescence(mut self, seed: u64) -> Result<SimResult, SimError> {
        while self.step()? {}
        Ok(self.finish(seed))
    }

    fn cooldown(&self) -> f64 {
        self.input.engine.cooldown_s
    }

    /// Closes a QPU's open epoch if its cooldown has lapsed by `now`.
    fn expire_if_due(&mut self, qpu: usize, now: f64) {
        let c = self.cooldown();
        let q = self.devices[qpu].qpu.as_ref().unwrap();
        if let (Some(e), Some(last)) = (q.open_epoch(), q.last_demand) {
            if last + c <= now {
                self.close_epoch(qpu, e, last + c);
            }
        }
    }

    fn close_epoch(&mut self, qpu: usize, epoch: usize, at: f64) {
        let q = self.devices[qpu].qpu.as_mut().unwrap();
        q.epochs[epoch].closed = true;
        if q.epochs[epoch].pending == 0 {
            self.go_cold(qpu, at);
        }
    }

    fn go_cold(&mut self, qpu: usize, at: f64) {
        if let Some(since) = self.devices[qpu].idle_since.take() {
            self.accrue_idle(qpu, at - since);
        }
        self.states.set_qpu_state(qpu, QpuState::Cold);
    }

    fn accrue_idle(&mut self, dev: usize, seconds: f64) {
        if seconds <= 0.0 {
            return;
        }
        let d = self.input.topology.device(dev);
        let idle = d.idle_power_w * seconds;
        let cryo = d.cryo_baseline_power_w * seconds;
        self.per_device[dev].idle_j += idle;
        self.per_device[dev].cryo_baseline_j += cryo;
        self.unattributed_idle_j += idle + cryo;
    }

    fn refresh_qpu_view(&mut self, qpu: usize, now: f64) {
        let c = self.cooldown();
        let busy = self.devices[qpu].busy;
        let q = self.devices[qpu].qpu.as_ref().unwrap();
        let lapsed = q.last_demand.is_none_or(|last| last + c <= now);
        let state = match q.open_epoch() {
            Some(e) if !lapsed => {
                let ep = &q.epochs[e];
                match ep.ready_at {
                    Some(_) if busy > 0 => QpuState::Busy,
                    Some(_) => QpuState::Ready,
                    None => QpuState::WarmingUp {
                        ready_at: ep.begin.map_or(f64::INFINITY, |b| b + self.input.topology.device(qpu).warmup_time_s),
                    },
                }
            }
            _ => QpuState::Cold,
        };
        self.states.set_qpu_state(qpu, state);
    }

    fn on_arrival(&mut self, ti: usize, now: f64) -> Result<(), SimError> {
        let tasks = self.tasks;
        let task = &tasks[ti];
        let topo = self.input.topology;
        for qpu in 0..topo.len() {
            if self.devices[qpu].qpu.is_some() {
                self.expire_if_due(qpu, now);
                self.refresh_qpu_view(qpu, now);
            }
        }

        let subtasks = decompose(task, self.input.policy);
        let mut plan = self.placer.place(task, &subtasks, &self.states, self.input.policy, now)?;
        plan.warm_starts = warm_start_commands(&plan, now, topo, &self.states, self.input.policy);
        self.states.commit(&plan, now);

        let n = subtasks.len();
        let mut inputs: Vec<Vec<Input>> = (0..n).map(|_| Vec::new()).collect();
        for (k, tr) in plan.transfers.iter().enumerate() {
            inputs[tr.subtask].push(Input { transfer: k });
        }
        let mut successors = vec![Vec::new(); n];
        for s in 0..n {
            for p in predecessors(&subtasks, s) {
                successors[p].push(s);
            }
        }
        let pending_inputs = inputs.iter().map(|v| v.len()).collect();
        let mut epoch = vec![None; n];

        let c = self.cooldown();
        for a in &plan.assignments {
            self.devices[a.device].sequence.push_back((ti, a.subtask));
            if let Some(q) = self.devices[a.device].qpu.as_mut() {
                let e = match q.open_epoch() {
                    Some(e) => e,
                    None => {
                        q.epochs.push(Epoch::default());
                        q.epochs.len() - 1
                    }
                };
                q.epochs[e].pending += 1;
                q.last_demand = Some(now);
                q.cooldown_generation += 1;
                let generation = q.cooldown_generation;
                epoch[a.subtask] = Some(e);
                if let Some((_, issue)) = plan.warm_starts.iter().find(|(id, _)| *id == a.device_id) {
                    let ep = &mut q.epochs[e];
                    ep.trigger = Some(ep.trigger.map_or(*issue, |t| t.min(*issue)));
                }
                self.queue.schedule(now + c, EventKind::CooldownExpired { qpu: a.device, generation })?;
            }
        }

        for (s, ins) in inputs.iter().enumerate() {
            for inp in ins {
                let tr = &plan.transfers[inp.transfer];
                if predecessors(&subtasks, s).is_empty() {
                    self.queue.schedule(now + tr.seconds, EventKind::TransferComplete { task: ti, subtask: s, input: inp.transfer })?;
                }
            }
        }

        let kernel_qpus: Vec<usize> = plan.assignments.iter().filter(|a| self.devices[a.device].qpu.is_some()).map(|a| a.device).collect();
        self.rt[ti] = Some(TaskRt {
            remaining: n,
            subtasks,
            plan,
            inputs,
            successors,
            pending_inputs,
            epoch,
            energy: EnergyBreakdown::ZERO,
        });
        for qpu in kernel_qpus {
            self.maybe_begin_warmup(qpu, now)?;
            self.refresh_qpu_view(qpu, now);
        }
        Ok(())
    }

    /// Schedules (or pulls forward) the warm-up of the earliest epoch that
    /// has a trigger and whose predecessors have drained.
    fn maybe_begin_warmup(&mut self, qpu: usize, now: f64) -> Result<(), SimError> {
        let warmup = self.input.topology.device(qpu).warmup_time_s;
        let q = self.devices[qpu].qpu.as_mut().unwrap();
        let Some(e) = q.epochs.iter().position(|ep| ep.ready_at.is_none()) else { return Ok(()) };
        if !q.all_drained_before(e) {
            return Ok(());
        }
        let drained_at = if e == 0 { 0.0 } else { q.drained_at };
        let ep = &mut q.epochs[e];
        let Some(trigger) = ep.trigger else { return Ok(()) };
        let begin = trigger.max(drained_at);
        let reschedule = match ep.begin {
            None => true,
            Some(b) => begin < b && b > now,
        };
        if reschedule {
            ep.begin = Some(begin);
            ep.generation += 1;
            let generation = ep.generation;
            self.queue.schedule(begin + warmup, EventKind::WarmStartComplete { qpu, epoch: e, generation })?;
        }
        Ok(())
    }

    fn on_warm(&mut self, qpu: usize, epoch: usize, generation: u64, now: f64) -> Result<(), SimError> {
        let q = self.devices[qpu].qpu.as_mut().unwrap();
        let ep = &mut q.epochs[epoch];
        if ep.generation != generation || ep.ready_at.is_some() {
            return Ok(());
        }
        ep.ready_at = Some(now);
        if self.devices[qpu].busy == 0 {
            self.devices[qpu].idle_since = Some(now);
        }
        self.refresh_qpu_view(qpu, now);
        self.try_start(qpu, now)
    }

    fn on_transfer(&mut self, ti: usize, s: usize, transfer: usize, now: f64) -> Result<(), SimError> {
        let rt = self.rt[ti].as_mut().unwrap();
        let tr = &rt.plan.transfers[transfer];
        let (to, joules) = (tr.to, tr.joules);
        rt.energy.transfer_j += joules;
        self.per_device[to].transfer_j += joules;
        rt.pending_inputs[s] -= 1;
        if rt.pending_inputs[s] > 0 {
            return Ok(());
        }
        let dev = rt.plan.device_of(s);
        if let Some(e) = rt.epoch[s] {
            let q = self.devices[dev].qpu.as_mut().unwrap();
            let ep = &mut q.epochs[e];
            if ep.ready_at.is_none() {
                ep.trigger = Some(ep.trigger.map_or(now, |t| t.min(now)));
                self.maybe_begin_warmup(dev, now)?;
            }
        }
        self.try_start(dev, now)
    }

    fn try_start(&mut self, dev: usize, now: f64) -> Result<(), SimError> {
        loop {
            let d = &self.devices[dev];
            let Some(&(ti, s)) = d.sequence.front() else { break };
            if d.busy >= d.slots {
                break;
            }
            let rt = self.rt[ti].as_ref().unwrap();
            if rt.pending_inputs[s] > 0 {
                break;
            }
            if let (Some(q), Some(e)) = (&d.qpu, rt.epoch[s]) {
                if q.epochs[e].ready_at.is_none_or(|r| r > now) {
                    break;
                }
            }
            let d = &mut self.devices[dev];
            d.sequence.pop_front();
            if d.busy == 0 {
                if let Some(since) = d.idle_since.take() {
                    self.accrue_idle(dev, now - since);
                }
            }
            let d = &mut self.devices[dev];
            d.busy += 1;
            d.used = true;
            self.queue.schedule(now, EventKind::SubtaskStart { task: ti, subtask: s })?;
        }
        Ok(())
    }

    fn on_start(&mut self, ti: usize, s: usize, now: f64) -> Result<(), SimError> {
        let topo = self.input.topology;
        let a = &self.rt[ti].as_ref().unwrap().plan.assignments[s];
        let (dev, exec, hold) = (a.device, a.exec_s, a.expected_hold_s);
        let d = topo.device(dev);
        let mut e = execution_energy(exec, d);
        self.per_device[dev] += e;
        if d.kind.is_qpu() {
            if let Some(c) = topo.controller_of(dev) {
                let j = topo.device(c).active_power_w * exec;
                e.active_j += j;
                self.per_device[c].active_j += j;
            }
            let waste = coupling_idle_energy(topo.controller_rtt(dev), d, &self.input.engine.coupling_factors)
                .expect("QPU kind checked");
            e.idle_j += waste;
            self.per_device[dev].idle_j += waste;
            self.refresh_qpu_view(dev, now);
        }
        self.rt[ti].as_mut().unwrap().energy += e;
        self.queue.schedule(now + hold, EventKind::SubtaskComplete { task: ti, subtask: s })?;
        Ok(())
    }

    fn on_complete(&mut self, ti: usize, s: usize, now: f64) -> Result<(), SimError> {
        let rt = self.rt[ti].as_mut().unwrap();
        let dev = rt.plan.device_of(s);
        rt.remaining -= 1;
        let mut arrivals = Vec::new();
        for &succ in &rt.successors[s] {
            let preds = predecessors(&rt.subtasks, succ);
            let pos = preds.iter().position(|&p| p == s).expect("edge exists");
            let inp = &rt.inputs[succ][pos];
            arrivals.push((succ, inp.transfer, rt.plan.transfers[inp.transfer].seconds));
        }
        let epoch = rt.epoch[s];
        if rt.remaining == 0 {
            self.completion[ti] = Some(now);
            self.queue_delay[ti] = (now - rt.plan.expected_completion_s()).max(0.0);
        }
        for (succ, transfer, seconds) in arrivals {
            self.queue.schedule(now + seconds, EventKind::TransferComplete { task: ti, subtask: succ, input: transfer })?;
        }

        let d = &mut self.devices[dev];
        d.busy -= 1;
        if let (Some(q), Some(e)) = (d.qpu.as_mut(), epoch) {
            q.drained_at = q.drained_at.max(now);
            let ep = &mut q.epochs[e];
            ep.pending -= 1;
            if ep.closed && ep.pending == 0 {
                self.go_cold(dev, now);
                self.maybe_begin_warmup(dev, now)?;
            } else if self.devices[dev].busy == 0 {
                self.devices[dev].idle_since = Some(now);
            }
            self.refresh_qpu_view(dev, now);
        } else if d.busy == 0 {
            d.idle_since = Some(now);
        }
        self.try_start(dev, now)
    }

    fn on_cooldown(&mut self, qpu: usize, generation: u64, now: f64) -> Result<(), SimError> {
        let q = self.devices[qpu].qpu.as_ref().unwrap();
        if q.cooldown_generation != generation {
            return Ok(());
        }
        if let Some(e) = q.open_epoch() {
            self.close_epoch(qpu, e, now);
            self.refresh_qpu_view(qpu, now);
        }
        Ok(())
    }

    fn finish(self, seed: u64) -> SimResult {
        let topo = self.input.topology;
        let mut ledger = EnergyLedger { unattributed_idle_j: self.unattributed_idle_j, ..Default::default() };
        let mut per_task_latency = BTreeMap::new();
        let mut per_task_queue_delay = BTreeMap::new();
        let mut per_task_completion = BTreeMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if let (Some(done), Some(rt)) = (self.completion[i], &self.rt[i]) {
                ledger.per_task.insert(t.id.clone(), rt.energy);
                ledger.completed_work += t.complexity;
                ledger.makespan_s = ledger.makespan_s.max(done);
                per_task_latency.insert(t.id.clone(), done - t.arrival_time_s);
                per_task_queue_delay.insert(t.id.clone(), self.queue_delay[i]);
                per_task_completion.insert(t.id.clone(), done);
            }
        }
        for (i, d) in topo.devices().iter().enumerate() {
            let e = self.per_device[i];
            let intensity = CarbonIntensity::new(d.carbon_intensity_kg_per_kwh).unwrap_or_default();
            ledger.total_carbon_kg += carbon_of(&e, intensity);
            ledger.per_device.insert(d.id.clone(), e);
        }
        SimResult {
            ledger,
            per_task_latency,
            per_task_queue_delay,
            per_task_completion,
            events_processed: self.events_processed,
            seed,
            profile: self.input.policy.effective_profile(),
        }
    }
}

/// Runs `tasks` to quiescence.
pub fn simulate(input: SimInput<'_>, tasks: &[Task], seed: u64) -> Result<SimResult, SimError> {
    Engine::new(input, tasks)?.run_to_quiescence(seed)
}
