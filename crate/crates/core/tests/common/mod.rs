//! Shared helpers for the integration tests: a random small-scenario
//! generator and a brute-force reference scheduler.
#![allow(dead_code)]

use std::collections::BTreeMap;

use qcc_core::energy::{coupling_idle_energy, execution_energy, CouplingFactors, TimeModel};
use qcc_core::model::{Channel, CouplingMode, DeviceId, DeviceKind, DeviceNode, Link, QpuState, RoutingProfile, Task, TaskId, Tier};
use qcc_core::policy::{decompose, predecessors, warm_start_commands, DeviceStates, PlacementPlan, Placer, PolicyConfig, PolicyError};
use qcc_core::sim::{simulate, EngineConfig, SimError, SimInput, SimResult};
use qcc_core::topology::{validate_topology, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Case {
    pub devices: Vec<DeviceNode>,
    pub links: Vec<Link>,
    pub policy: PolicyConfig,
    pub engine: EngineConfig,
    pub time_model: TimeModel,
    pub tasks: Vec<Task>,
}

impl Case {
    pub fn topology(&self) -> Topology {
        validate_topology(&self.devices, &self.links).expect("generated topology is valid")
    }

    pub fn run(&self) -> Result<SimResult, SimError> {
        let topo = self.topology();
        self.run_on(&topo, &self.policy)
    }

    pub fn run_on(&self, topo: &Topology, policy: &PolicyConfig) -> Result<SimResult, SimError> {
        let input = SimInput { topology: topo, policy, time_model: &self.time_model, engine: &self.engine };
        simulate(input, &self.tasks, 0)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi / lo).ln() * rng.gen::<f64>()).exp()
}

fn device(rng: &mut ChaCha8Rng, id: &str, tier: Tier, kind: DeviceKind) -> DeviceNode {
    let active = log_uniform(rng, 10.0, 1e6);
    let qpu = kind.is_qpu();
    DeviceNode {
        id: id.into(),
        tier,
        kind,
        coupling: CouplingMode::ALL[rng.gen_range(0..3)],
        active_power_w: active,
        idle_power_w: active * rng.gen_range(0.0..0.5),
        cryo_baseline_power_w: if qpu { rng.gen_range(0.0..2e4) } else { 0.0 },
        warmup_time_s: if qpu && rng.gen_bool(0.7) { rng.gen_range(0.0..100.0) } else { 0.0 },
        concurrency_slots: 1,
        renewable_powered: rng.gen_bool(0.3),
        carbon_intensity_kg_per_kwh: rng.gen_range(0.0..0.8),
        controller: None,
    }
}

fn link(rng: &mut ChaCha8Rng, a: &str, b: &str) -> Link {
    Link {
        from: a.into(),
        to: b.into(),
        latency_s: if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..0.05) },
        bandwidth_bits_per_s: log_uniform(rng, 1e6, 1e10),
        energy_per_bit_j: rng.gen_range(0.0..1e-8),
        channel: Channel::Classical,
        bidirectional: true,
    }
}

/// A random scenario with at most `max_tasks` tasks and at most three
/// single-slot devices: a Cloud classical node, optionally a second
/// classical node and optionally a QPU.
pub fn random_case(rng: &mut ChaCha8Rng, max_tasks: usize) -> Case {
    let tiers = Tier::ALL;
    let mut devices = vec![device(rng, "c0", Tier::Cloud, DeviceKind::ClassicalCpu)];
    if rng.gen_bool(0.6) {
        let kind = if rng.gen_bool(0.5) { DeviceKind::ClassicalCpu } else { DeviceKind::ClassicalGpu };
        let tier = tiers[rng.gen_range(0..3)];
        devices.push(device(rng, "c1", tier, kind));
    }
    if rng.gen_bool(0.75) {
        let mut q = if rng.gen_bool(0.5) {
            device(rng, "q0", Tier::Cloud, DeviceKind::QpuCryogenicLarge)
        } else {
            let tier = [Tier::Edge, Tier::Fog][rng.gen_range(0..2)];
            device(rng, "q0", tier, DeviceKind::QpuCompactEdge)
        };
        if rng.gen_bool(0.6) {
            q.controller = Some(devices[rng.gen_range(0..devices.len())].id.clone());
        }
        devices.push(q);
    }
    let mut links = Vec::new();
    for i in 1..devices.len() {
        let peer = rng.gen_range(0..i);
        let (a, b) = (devices[peer].id.0.clone(), devices[i].id.0.clone());
        links.push(link(rng, &a, &b));
    }

    let origins: Vec<Tier> = {
        let mut t: Vec<Tier> = devices.iter().filter(|d| d.kind.is_classical()).map(|d| d.tier).collect();
        t.sort();
        t.dedup();
        t
    };
    let n = rng.gen_range(0..=max_tasks);
    let grid = rng.gen_bool(0.3);
    let tasks = (0..n)
        .map(|i| {
            let mut arrival = rng.gen_range(0.0..300.0);
            if grid {
                arrival = (arrival / 25.0_f64).floor() * 25.0;
            }
            Task {
                id: TaskId::new(format!("t{i}")),
                arrival_time_s: arrival,
                complexity: log_uniform(rng, 1e2, 1e5),
                quantum_amenable_fraction: rng.gen_range(0.0..=1.0),
                data_size_bits: if rng.gen_bool(0.2) { 0.0 } else { log_uniform(rng, 1e3, 1e7) },
                privacy_local_only: rng.gen_bool(0.2),
                origin_tier: origins[rng.gen_range(0..origins.len())],
            }
        })
        .collect();

    let pre = rng.gen_range(0.0..0.3);
    let policy = PolicyConfig {
        quantum_offload_fraction: if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..=1.0) },
        preprocess_fraction: if rng.gen_bool(0.1) { 0.0 } else { pre },
        postprocess_fraction: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..0.3) },
        warm_start_lookahead_s: if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..20.0) },
        profile: RoutingProfile::ALL[rng.gen_range(0..3)],
        warm_start_enabled: rng.gen_bool(0.5),
        mitigation_overhead_fraction: if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.2) },
        max_backlog_s: if rng.gen_bool(0.3) { Some(rng.gen_range(0.0..100.0)) } else { None },
    };
    let engine = EngineConfig {
        cooldown_s: if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..200.0) },
        event_cap: 10_000_000,
        coupling_factors: CouplingFactors::default(),
    };
    Case { devices, links, policy, engine, time_model: TimeModel::default(), tasks }
}

pub fn case_from_seed(seed: u64, max_tasks: usize) -> Case {
    random_case(&mut ChaCha8Rng::seed_from_u64(seed), max_tasks)
}

/// What the reference scheduler computes.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub completion: BTreeMap<TaskId, f64>,
    pub per_task_j: BTreeMap<TaskId, f64>,
    pub per_device_j: BTreeMap<DeviceId, f64>,
    pub unattributed_idle_j: f64,
    pub makespan_s: f64,
}

struct Epoch {
    kernels: Vec<(usize, usize)>,
    last_demand: f64,
    issue: Option<f64>,
}

/// Replays the policy's decisions without an event queue.
///
/// Placement is made per task in arrival order, exactly as the orchestrator
/// would. Start times then follow from a fixed-point iteration of the
/// scheduling equations: a subtask starts once its inputs have arrived, the
/// previous subtask on its device has finished and, for a kernel, its QPU
/// warm-up epoch is ready. Iteration starts from zero and only ever raises
/// times, so it settles on the earliest consistent schedule.
pub fn reference(case: &Case) -> Result<Reference, PolicyError> {
    let topo = case.topology();
    let placer = Placer::new(&topo, &case.time_model, &case.engine.coupling_factors);
    let c = case.engine.cooldown_s;
    let nd = topo.len();

    let mut order: Vec<usize> = (0..case.tasks.len()).collect();
    order.sort_by(|&a, &b| case.tasks[a].arrival_time_s.total_cmp(&case.tasks[b].arrival_time_s).then(a.cmp(&b)));

    let mut states = DeviceStates::new(&topo);
    let mut plans: Vec<Option<PlacementPlan>> = vec![None; case.tasks.len()];
    let mut subtasks = vec![Vec::new(); case.tasks.len()];
    let mut sequences: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nd];
    let mut epochs: Vec<Vec<Epoch>> = (0..nd).map(|_| Vec::new()).collect();
    let mut epoch_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();

    for &ti in &order {
        let task = &case.tasks[ti];
        let now = task.arrival_time_s;
        let fresh = |eps: &Vec<Epoch>| eps.last().is_none_or(|e| e.last_demand + c <= now);
        for (q, eps) in epochs.iter().enumerate() {
            if topo.device(q).kind.is_qpu() {
                let s = if fresh(eps) { QpuState::Cold } else { QpuState::Ready };
                states.set_qpu_state(q, s);
            }
        }
        let subs = decompose(task, &case.policy);
        let mut plan = placer.place(task, &subs, &states, &case.policy, now)?;
        plan.warm_starts = warm_start_commands(&plan, now, &topo, &states, &case.policy);
        states.commit(&plan, now);
        for a in &plan.assignments {
            sequences[a.device].push((ti, a.subtask));
            if topo.device(a.device).kind.is_qpu() {
                if fresh(&epochs[a.device]) {
                    epochs[a.device].push(Epoch { kernels: Vec::new(), last_demand: now, issue: None });
                }
                let e = epochs[a.device].len() - 1;
                let ep = &mut epochs[a.device][e];
                ep.kernels.push((ti, a.subtask));
                ep.last_demand = now;
                if let Some((_, t)) = plan.warm_starts.iter().find(|(id, _)| *id == a.device_id) {
                    ep.issue = Some(ep.issue.map_or(*t, |x: f64| x.min(*t)));
                }
                epoch_of.insert((ti, a.subtask), e);
            }
        }
        subtasks[ti] = subs;
        plans[ti] = Some(plan);
    }

    // Scheduling equations, iterated to a fixed point.
    let key = |t: usize, s: usize| (t, s);
    let mut ready: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut start: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut finish: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (ti, subs) in subtasks.iter().enumerate() {
        for s in 0..subs.len() {
            ready.insert(key(ti, s), 0.0);
            start.insert(key(ti, s), 0.0);
            finish.insert(key(ti, s), 0.0);
        }
    }
    let mut epoch_ready: Vec<Vec<f64>> = epochs.iter().map(|e| vec![0.0; e.len()]).collect();

    for _round in 0..100_000 {
        let mut changed = false;
        for (ti, plan) in plans.iter().enumerate() {
            let Some(plan) = plan else { continue };
            let arrival = case.tasks[ti].arrival_time_s;
            for s in 0..subtasks[ti].len() {
                let preds = predecessors(&subtasks[ti], s);
                let transfers: Vec<_> = plan.transfers.iter().filter(|t| t.subtask == s).collect();
                let r = if preds.is_empty() {
                    transfers.iter().map(|t| arrival + t.seconds).fold(f64::NEG_INFINITY, f64::max)
                } else {
                    preds.iter().zip(&transfers).map(|(&p, t)| finish[&key(ti, p)] + t.seconds).fold(f64::NEG_INFINITY, f64::max)
                };
                if ready[&key(ti, s)] != r {
                    ready.insert(key(ti, s), r);
                    changed = true;
                }
            }
        }
        for q in 0..nd {
            for e in 0..epochs[q].len() {
                let ep = &epochs[q][e];
                let trigger = ep.kernels.iter().map(|k| ready[k]).fold(ep.issue.unwrap_or(f64::INFINITY), f64::min);
                let drained = epochs[q][..e].iter().flat_map(|p| p.kernels.iter()).map(|k| finish[k]).fold(0.0, f64::max);
                let r = trigger.max(drained) + topo.device(q).warmup_time_s;
                if epoch_ready[q][e] != r {
                    epoch_ready[q][e] = r;
                    changed = true;
                }
            }
        }
        for (dev, seq) in sequences.iter().enumerate() {
            let mut prev = f64::NEG_INFINITY;
            for &(ti, s) in seq {
                let mut st = ready[&key(ti, s)].max(prev);
                if let Some(&e) = epoch_of.get(&(ti, s)) {
                    st = st.max(epoch_ready[dev][e]);
                }
                let hold = plans[ti].as_ref().unwrap().assignments[s].expected_hold_s;
                let fin = st + hold;
                if start[&key(ti, s)] != st || finish[&key(ti, s)] != fin {
                    start.insert(key(ti, s), st);
                    finish.insert(key(ti, s), fin);
                    changed = true;
                }
                prev = fin;
            }
        }
        if !changed {
            break;
        }
    }

    // Energy.
    let mut per_task_j = BTreeMap::new();
    let mut per_device = vec![0.0; nd];
    let mut completion = BTreeMap::new();
    let mut makespan = 0.0f64;
    for (ti, plan) in plans.iter().enumerate() {
        let Some(plan) = plan else { continue };
        let mut total = 0.0;
        for a in &plan.assignments {
            let d = topo.device(a.device);
            let mut e = execution_energy(a.exec_s, d).total_j();
            per_device[a.device] += e;
            if d.kind.is_qpu() {
                if let Some(ctl) = topo.controller_of(a.device) {
                    let j = topo.device(ctl).active_power_w * a.exec_s;
                    per_device[ctl] += j;
                    e += j;
                }
                let w = coupling_idle_energy(topo.controller_rtt(a.device), d, &case.engine.coupling_factors).unwrap();
                per_device[a.device] += w;
                e += w;
            }
            total += e;
        }
        for t in &plan.transfers {
            per_device[t.to] += t.joules;
            total += t.joules;
        }
        per_task_j.insert(case.tasks[ti].id.clone(), total);
        let done = (0..subtasks[ti].len()).map(|s| finish[&key(ti, s)]).fold(0.0, f64::max);
        completion.insert(case.tasks[ti].id.clone(), done);
        makespan = makespan.max(done);
    }

    let mut idle = 0.0;
    for (dev, seq) in sequences.iter().enumerate() {
        let d = topo.device(dev);
        let mut dev_idle = 0.0;
        if d.kind.is_qpu() {
            for (e, ep) in epochs[dev].iter().enumerate() {
                let mut at = epoch_ready[dev][e];
                let mut last_finish = at;
                for k in &ep.kernels {
                    dev_idle += (start[k] - at).max(0.0) * d.standby_power_w();
                    at = finish[k];
                    last_finish = finish[k];
                }
                dev_idle += ((ep.last_demand + c).max(last_finish) - at).max(0.0) * d.standby_power_w();
            }
        } else {
            for w in seq.windows(2) {
                dev_idle += (start[&w[1]] - finish[&w[0]]).max(0.0) * d.idle_power_w;
            }
        }
        per_device[dev] += dev_idle;
        idle += dev_idle;
    }

    Ok(Reference {
        completion,
        per_task_j,
        per_device_j: topo.devices().iter().zip(per_device).map(|(d, j)| (d.id.clone(), j)).collect(),
        unattributed_idle_j: idle,
        makespan_s: makespan,
    })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= tol * scale
}

/// Compares an engine run with the reference; returns a description of
/// the first mismatch.
pub fn compare(result: &SimResult, r: &Reference, tol: f64) -> Result<(), String> {
    if result.per_task_completion.len() != r.completion.len() {
        return Err(format!("completed {} vs {}", result.per_task_completion.len(), r.completion.len()));
    }
    for (id, &t) in &r.completion {
        let got = result.per_task_completion[id];
        if !rel_close(got, t, tol) {
            return Err(format!("completion of {id}: engine {got} vs reference {t}"));
        }
    }
    for (id, &j) in &r.per_task_j {
        let got = result.ledger.per_task[id].total_j();
        if !rel_close(got, j, tol) {
            return Err(format!("energy of {id}: engine {got} vs reference {j}"));
        }
    }
    for (id, &j) in &r.per_device_j {
        let got = result.ledger.per_device[id].total_j();
        if !rel_close(got, j, tol) {
            return Err(format!("energy of device {id}: engine {got} vs reference {j}"));
        }
    }
    if !rel_close(result.ledger.unattributed_idle_j, r.unattributed_idle_j, tol) {
        return Err(format!("idle: engine {} vs reference {}", result.ledger.unattributed_idle_j, r.unattributed_idle_j));
    }
    if !rel_close(result.ledger.makespan_s, r.makespan_s, tol) {
        return Err(format!("makespan: engine {} vs reference {}", result.ledger.makespan_s, r.makespan_s));
    }
    let total: f64 = r.per_device_j.values().sum();
    if !rel_close(result.ledger.total_energy_j(), total, tol) {
        return Err(format!("total: engine {} vs reference {total}", result.ledger.total_energy_j()));
    }
    Ok(())
}

/// Compares `actual` with the checked-in golden file, or rewrites the file
/// when `QCC_UPDATE_GOLDEN` is set.
pub fn golden(name: &str, actual: &str) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("QCC_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}; rerun with QCC_UPDATE_GOLDEN=1", path.display()));
    assert!(expected == actual, "{} differs from the golden copy", path.display());
}
