//! Scenario files.
//!
//! A scenario is a TOML document with top-level `label`, `seed` and
//! `replications` keys and the sections `[engine]`, `[time_model]`,
//! `[policy]`, `[[devices]]`, `[[links]]` and `[workload]`. Every problem
//! found while loading is reported with its line and column.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::TimeModel;
use crate::model::{DeviceNode, FieldError, Link, RoutingProfile, Task};
use crate::policy::PolicyConfig;
use crate::sim::{simulate, EngineConfig, SimError, SimInput, SimResult};
use crate::topology::{validate_topology, Topology, TopologyError};
use crate::workload::{cloud_capacity, generate_at_load, generate_replication, WorkloadError, WorkloadSpec};

/// Reference scenarios shipped with the crate, by file name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("table2.scenario", include_str!("../../../scenarios/table2.scenario")),
    ("fig4_sweep.scenario", include_str!("../../../scenarios/fig4_sweep.scenario")),
    ("fig5_profiles.scenario", include_str!("../../../scenarios/fig5_profiles.scenario")),
];

/// Looks up a bundled scenario, with or without the `.scenario` extension.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name || n.strip_suffix(".scenario") == Some(name)).map(|(_, text)| *text)
}

/// The on-disk shape of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub label: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: u32,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub time_model: TimeModel,
    #[serde(default)]
    pub policy: PolicyConfig,
    pub devices: Vec<DeviceNode>,
    #[serde(default)]
    pub links: Vec<Link>,
    pub workload: WorkloadSpec,
}

fn one() -> u32 {
    1
}

/// A problem with the input, tied to where it occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located {
    /// Dotted field path such as `devices[2].active_power_w`.
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}: {}", self.path, self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), join(.0))]
    Invalid(Vec<Located>),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
}

fn join(errors: &[Located]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub seed: u64,
    pub replications: u32,
    pub engine: EngineConfig,
    pub time_model: TimeModel,
    pub policy: PolicyConfig,
    pub topology: Topology,
    pub workload: WorkloadSpec,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ScenarioError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    Scenario::from_file(file).map_err(|errors| ScenarioError::Invalid(locate_all(text, errors)))
}

impl Scenario {
    /// Validates a parsed file. Errors carry field paths but no positions.
    pub fn from_file(file: ScenarioFile) -> Result<Scenario, Vec<FieldError>> {
        let mut errors = Vec::new();
        let prefixed = |prefix: &str, v: Vec<FieldError>| {
            v.into_iter().map(move |e| FieldError::new(format!("{prefix}{}", e.field), e.reason)).collect::<Vec<_>>()
        };
        if file.label.trim().is_empty() {
            errors.push(FieldError::new("label", "must not be empty"));
        }
        if file.replications == 0 {
            errors.push(FieldError::new("replications", "must be at least 1"));
        }
        errors.extend(prefixed("engine.", file.engine.violations()));
        errors.extend(prefixed("time_model.", file.time_model.violations()));
        errors.extend(prefixed("policy.", file.policy.violations()));
        errors.extend(prefixed("workload.", file.workload.violations()));
        for (i, d) in file.devices.iter().enumerate() {
            errors.extend(prefixed(&format!("devices[{i}]."), d.violations()));
        }
        for (i, l) in file.links.iter().enumerate() {
            errors.extend(prefixed(&format!("links[{i}]."), l.violations()));
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let topology = validate_topology(&file.devices, &file.links)
            .map_err(|errs| errs.into_iter().map(|e| topology_field(&file, e)).collect::<Vec<_>>())?;
        Ok(Scenario {
            label: file.label,
            seed: file.seed,
            replications: file.replications,
            engine: file.engine,
            time_model: file.time_model,
            policy: file.policy,
            topology,
            workload: file.workload,
        })
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            label: self.label.clone(),
            seed: self.seed,
            replications: self.replications,
            engine: self.engine,
            time_model: self.time_model,
            policy: self.policy.clone(),
            devices: self.topology.devices().to_vec(),
            links: self.topology.links().to_vec(),
            workload: self.workload.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(&self.to_file()).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }

    pub fn input<'a>(&'a self, policy: &'a PolicyConfig) -> SimInput<'a> {
        SimInput { topology: &self.topology, policy, time_model: &self.time_model, engine: &self.engine }
    }

    /// Work units per second the Cloud's classical tier sustains under this
    /// scenario's complexity distribution.
    pub fn capacity(&self) -> Result<f64, WorkloadError> {
        match &self.workload {
            WorkloadSpec::PoissonStream { complexity, .. } | WorkloadSpec::LoadSweep { complexity, .. } => {
                cloud_capacity(&self.topology, &self.time_model, complexity)
            }
            WorkloadSpec::FixedBatch { .. } => Err(WorkloadError::NeedsLoad),
        }
    }

    /// Tasks of one replication. A load sweep is run at its highest level.
    pub fn tasks(&self, replication: u64) -> Result<Vec<Task>, WorkloadError> {
        match &self.workload {
            WorkloadSpec::LoadSweep { levels, .. } => {
                let top = levels.iter().copied().fold(0.0, f64::max);
                self.tasks_at_load(top, replication)
            }
            spec => generate_replication(spec, self.seed, replication),
        }
    }

    pub fn tasks_at_load(&self, load: f64, replication: u64) -> Result<Vec<Task>, WorkloadError> {
        generate_at_load(&self.workload, load, self.capacity()?, self.seed, replication)
    }

    pub fn run_tasks(&self, tasks: &[Task], policy: &PolicyConfig) -> Result<SimResult, SimError> {
        simulate(self.input(policy), tasks, self.seed)
    }

    pub fn run_replication(&self, replication: u64) -> Result<SimResult, RunError> {
        let tasks = self.tasks(replication)?;
        Ok(self.run_tasks(&tasks, &self.policy)?)
    }

    pub fn run_profile(&self, tasks: &[Task], profile: RoutingProfile) -> Result<SimResult, SimError> {
        self.run_tasks(tasks, &self.policy.with_profile(profile))
    }
}

fn topology_field(file: &ScenarioFile, e: TopologyError) -> FieldError {
    let device_pos = |id: &crate::model::DeviceId| file.devices.iter().position(|d| &d.id == id);
    let path = match &e {
        TopologyError::Empty => "devices".to_string(),
        TopologyError::DuplicateDevice(id) => match file.devices.iter().rposition(|d| &d.id == id) {
            Some(i) => format!("devices[{i}].id"),
            None => "devices".to_string(),
        },
        TopologyError::InvalidDevice { device, error } => match device_pos(device) {
            Some(i) => format!("devices[{i}].{}", error.field),
            None => "devices".to_string(),
        },
        TopologyError::TierViolation { device, .. } => match device_pos(device) {
            Some(i) => format!("devices[{i}].tier"),
            None => "devices".to_string(),
        },
        TopologyError::BadController { device, .. } => match device_pos(device) {
            Some(i) => format!("devices[{i}].controller"),
            None => "devices".to_string(),
        },
        TopologyError::InvalidLink { index, error, .. } => format!("links[{index}].{}", error.field),
        TopologyError::DanglingLink { index, id } => {
            let end = if file.links.get(*index).is_some_and(|l| &l.from == id) { "from" } else { "to" };
            format!("links[{index}].{end}")
        }
        TopologyError::Disconnected { .. } => "links".to_string(),
    };
    FieldError::new(path, e.to_string())
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

enum Seg {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Vec<Seg> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let mut rest = part;
        if let Some(b) = rest.find('[') {
            if b > 0 {
                out.push(Seg::Key(rest[..b].to_string()));
            }
            rest = &rest[b..];
            while let Some(stripped) = rest.strip_prefix('[') {
                let Some(close) = stripped.find(']') else { break };
                if let Ok(i) = stripped[..close].parse() {
                    out.push(Seg::Index(i));
                }
                rest = &stripped[close + 1..];
            }
        } else if !rest.is_empty() {
            out.push(Seg::Key(rest.to_string()));
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Node<'a> {
    Item(&'a toml_edit::Item),
    Table(&'a toml_edit::Table),
    Value(&'a toml_edit::Value),
}

impl<'a> Node<'a> {
    fn span(self) -> Option<Range<usize>> {
        match self {
            Node::Item(i) => i.span(),
            Node::Table(t) => t.span(),
            Node::Value(v) => v.span(),
        }
    }

    fn child(self, seg: &Seg) -> Option<Node<'a>> {
        use toml_edit::{Item, Value};
        match (self, seg) {
            (Node::Item(Item::Table(t)), Seg::Key(k)) | (Node::Table(t), Seg::Key(k)) => t.get(k).map(Node::Item),
            (Node::Item(Item::Value(Value::InlineTable(t))), Seg::Key(k)) | (Node::Value(Value::InlineTable(t)), Seg::Key(k)) => {
                t.get(k).map(Node::Value)
            }
            (Node::Item(Item::ArrayOfTables(a)), Seg::Index(i)) => a.get(*i).map(Node::Table),
            (Node::Item(Item::Value(Value::Array(a))), Seg::Index(i)) | (Node::Value(Value::Array(a)), Seg::Index(i)) => {
                a.get(*i).map(Node::Value)
            }
            _ => None,
        }
    }
}

/// Resolves field paths to positions in `text`, falling back to the
/// nearest enclosing element that has one.
fn locate_all(text: &str, errors: Vec<FieldError>) -> Vec<Located> {
    let doc = toml_edit::ImDocument::parse(text).ok();
    errors
        .into_iter()
        .map(|e| {
            let mut pos = None;
            if let Some(doc) = &doc {
                let mut node = Node::Item(doc.as_item());
                for seg in parse_path(&e.field) {
                    match node.child(&seg) {
                        Some(next) => node = next,
                        None => break,
                    }
                    if let Some(span) = node.span() {
                        pos = Some(line_col(text, span.start));
                    }
                }
            }
            Located { path: e.field, line: pos.map(|p| p.0), column: pos.map(|p| p.1), message: e.reason }
        })
        .collect()
}
