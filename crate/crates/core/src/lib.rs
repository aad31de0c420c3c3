//! Discrete-event simulator for an energy-aware hybrid quantum-classical
//! computing continuum.
//!
//! Tasks enter at an Edge, Fog, or Cloud tier, the fusion policy in
//! [`policy`] splits them into classical and quantum subtasks and places
//! those on devices according to a routing profile, and [`sim`] replays the
//! resulting schedule while an energy and carbon ledger accumulates.

// Validation uses `!(x > 0.0)` style checks so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod model;
pub mod output;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod workload;
