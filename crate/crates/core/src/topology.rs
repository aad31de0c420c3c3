//! Validated device graph with precomputed routes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Channel, DeviceId, DeviceKind, DeviceNode, FieldError, Link, Tier};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology has no devices")]
    Empty,
    #[error("device `{0}` is declared more than once")]
    DuplicateDevice(DeviceId),
    #[error("device `{device}`: {error}")]
    InvalidDevice { device: DeviceId, error: FieldError },
    #[error("link {index} ({from} -> {to}): {error}")]
    InvalidLink { index: usize, from: DeviceId, to: DeviceId, error: FieldError },
    #[error("link {index} references unknown device `{id}`")]
    DanglingLink { index: usize, id: DeviceId },
    #[error("device `{device}`: {kind} cannot be deployed at the {tier} tier")]
    TierViolation { device: DeviceId, kind: DeviceKind, tier: Tier },
    #[error("device `{device}`: controller `{controller}` is not a classical device in the topology")]
    BadController { device: DeviceId, controller: DeviceId },
    #[error("topology is disconnected: {unreachable:?} unreachable from `{root}`")]
    Disconnected { root: DeviceId, unreachable: Vec<DeviceId> },
}

/// A shortest path between two devices, as indices into `Topology::links`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Route {
    pub hops: Vec<usize>,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    devices: Vec<DeviceNode>,
    links: Vec<Link>,
    index: BTreeMap<DeviceId, usize>,
    /// Outgoing (neighbour, link index) per device.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Classical-payload routes, `routes[from][to]`.
    routes: Vec<Vec<Option<Route>>>,
    controller_rtt: Vec<f64>,
}

/// Checks every device, link, and graph invariant and returns either a
/// usable topology or the complete list of violations.
pub fn validate_topology(devices: &[DeviceNode], links: &[Link]) -> Result<Topology, Vec<TopologyError>> {
    let mut errors = Vec::new();
    if devices.is_empty() {
        return Err(vec![TopologyError::Empty]);
    }

    let mut sorted: Vec<DeviceNode> = devices.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut index = BTreeMap::new();
    for (i, d) in sorted.iter().enumerate() {
        if index.insert(d.id.clone(), i).is_some() {
            errors.push(TopologyError::DuplicateDevice(d.id.clone()));
        }
        for error in d.violations() {
            errors.push(TopologyError::InvalidDevice { device: d.id.clone(), error });
        }
        if !d.kind.allowed_tiers().contains(&d.tier) {
            errors.push(TopologyError::TierViolation { device: d.id.clone(), kind: d.kind, tier: d.tier });
        }
    }
    for d in &sorted {
        if let Some(c) = &d.controller {
            let ok = index.get(c).map(|&i| sorted[i].kind.is_classical()).unwrap_or(false);
            if !ok {
                errors.push(TopologyError::BadController { device: d.id.clone(), controller: c.clone() });
            }
        }
    }

    let mut adjacency = vec![Vec::new(); sorted.len()];
    for (i, l) in links.iter().enumerate() {
        for error in l.violations() {
            errors.push(TopologyError::InvalidLink { index: i, from: l.from.clone(), to: l.to.clone(), error });
        }
        let from = index.get(&l.from).copied();
        let to = index.get(&l.to).copied();
        if from.is_none() {
            errors.push(TopologyError::DanglingLink { index: i, id: l.from.clone() });
        }
        if to.is_none() {
            errors.push(TopologyError::DanglingLink { index: i, id: l.to.clone() });
        }
        if let (Some(f), Some(t)) = (from, to) {
            adjacency[f].push((t, i));
            if l.bidirectional {
                adjacency[t].push((f, i));
            }
        }
    }

    // Connectivity is judged on the undirected view of the link graph.
    let mut seen = vec![false; sorted.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..sorted.len() {
            if seen[v] {
                continue;
            }
            let linked = adjacency[u].iter().any(|&(n, _)| n == v) || adjacency[v].iter().any(|&(n, _)| n == u);
            if linked {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let unreachable: Vec<DeviceId> =
        sorted.iter().zip(&seen).filter(|(_, &s)| !s).map(|(d, _)| d.id.clone()).collect();
    if !unreachable.is_empty() {
        errors.push(TopologyError::Disconnected { root: sorted[0].id.clone(), unreachable });
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut topo = Topology {
        devices: sorted,
        links: links.to_vec(),
        index,
        adjacency,
        routes: Vec::new(),
        controller_rtt: Vec::new(),
    };
    topo.routes = (0..topo.devices.len()).map(|s| topo.shortest_routes(s, |_| true)).collect();
    topo.controller_rtt = topo
        .devices
        .iter()
        .enumerate()
        .map(|(i, d)| match &d.controller {
            Some(c) => topo.routes[i][topo.index[c]].as_ref().map_or(f64::INFINITY, |r| 2.0 * r.latency_s),
            None => 0.0,
        })
        .collect();
    Ok(topo)
}

impl Topology {
    pub fn devices(&self) -> &[DeviceNode] {
        &self.devices
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn device(&self, idx: usize) -> &DeviceNode {
        &self.devices[idx]
    }

    pub fn index_of(&self, id: &DeviceId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &DeviceId) -> Option<&DeviceNode> {
        self.index_of(id).map(|i| &self.devices[i])
    }

    /// Entry point for data originating at `tier`: the lexicographically
    /// smallest device id at that tier.
    pub fn gateway(&self, tier: Tier) -> Option<usize> {
        self.devices.iter().position(|d| d.tier == tier)
    }

    pub fn tiers_present(&self) -> BTreeSet<Tier> {
        self.devices.iter().map(|d| d.tier).collect()
    }

    /// Shortest classical-payload route. `Some(empty route)` when `from == to`.
    pub fn route(&self, from: usize, to: usize) -> Option<&Route> {
        self.routes[from][to].as_ref()
    }

    /// Shortest route restricted to quantum-wavelength hops.
    pub fn quantum_route(&self, from: usize, to: usize) -> Option<Route> {
        self.shortest_routes(from, |l| l.channel == Channel::QuantumWavelength).swap_remove(to)
    }

    pub fn route_links<'a>(&'a self, route: &'a Route) -> impl Iterator<Item = &'a Link> + 'a {
        route.hops.iter().map(move |&i| &self.links[i])
    }

    /// Feedback round-trip latency between a QPU and its controller; zero
    /// when the QPU has no external controller.
    pub fn controller_rtt(&self, idx: usize) -> f64 {
        self.controller_rtt[idx]
    }

    pub fn controller_of(&self, idx: usize) -> Option<usize> {
        self.devices[idx].controller.as_ref().and_then(|c| self.index_of(c))
    }

    // Dijkstra over (latency, hop count, node index); small graphs, so the
    // quadratic scan is fine and keeps tie-breaking obvious.
    fn shortest_routes(&self, source: usize, usable: impl Fn(&Link) -> bool) -> Vec<Option<Route>> {
        let n = self.devices.len();
        let mut best: Vec<Option<(f64, usize, Vec<usize>)>> = vec![None; n];
        let mut done = vec![false; n];
        best[source] = Some((0.0, 0, Vec::new()));
        loop {
            let mut pick: Option<usize> = None;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                if let Some((d, h, _)) = &best[v] {
                    let better = match pick {
                        None => true,
                        Some(p) => {
                            let (pd, ph, _) = best[p].as_ref().unwrap();
                            d.total_cmp(pd).then(h.cmp(ph)).is_lt()
                        }
                    };
                    if better {
                        pick = Some(v);
                    }
                }
            }
            let Some(u) = pick else { break };
            done[u] = true;
            let (du, hu, path_u) = best[u].clone().unwrap();
            for &(v, li) in &self.adjacency[u] {
                let link = &self.links[li];
                if done[v] || !usable(link) {
                    continue;
                }
                let cand = (du + link.latency_s, hu + 1);
                let improves = match &best[v] {
                    None => true,
                    Some((dv, hv, _)) => cand.0.total_cmp(dv).then(cand.1.cmp(hv)).is_lt(),
                };
                if improves {
                    let mut p = path_u.clone();
                    p.push(li);
                    best[v] = Some((cand.0, cand.1, p));
                }
            }
        }
        best.into_iter().map(|b| b.map(|(latency_s, _, hops)| Route { hops, latency_s })).collect()
    }
}
