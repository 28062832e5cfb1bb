//! Flattening a diagram into one executable [`Net`].
//!
//! The diagram becomes a synthetic root transaction at lifecycle index 0;
//! every command below it keeps its place in the tree but all states, from
//! every level, land in a single evaluation-ordered list. Each command gets
//! three materialized states, `<id>#started`, `<id>#completed` and
//! `<id>#cancelled`, whether or not the diagram declares them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, FactoryOwner};
use crate::dsl::Diagnostic;
use crate::model::*;
use crate::validate::validate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub name: String,
    pub lifecycle_nodes: Vec<LifecycleNode>,
    pub state_nodes: Vec<StateNode>,
    pub handler_table: Vec<HandlerEntry>,
    /// Started with the root at tick 0.
    pub start_set: Vec<StartEntry>,
    /// Script channels the net reads, sorted.
    pub channels: Vec<String>,
    /// Output channels the net can write, sorted; only concrete names appear.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleNode {
    pub id: String,
    pub kind: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub auto_start: Vec<StartEntry>,
    /// Ticks to completion; absent for instantaneous actions and transactions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<NetValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brake_ticks: Option<NetValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime: Option<RuntimeInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub actuator: String,
    pub device_type: String,
    pub action: String,
    pub action_type: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, NetValue>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, NetValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBinding>,
}

/// World output written when the command completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBinding {
    pub channel: NetValue,
    pub value: NetValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartEntry {
    pub child: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<usize>,
}

/// A parameter value inside a net: concrete, a named slot awaiting a
/// binding, or a resolved catalog call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Slot {
        slot: String,
    },
    Call {
        call: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<String>,
        args: Vec<NetValue>,
    },
}

impl NetValue {
    pub fn from_literal(l: &Literal) -> NetValue {
        match l {
            Literal::Bool(b) => NetValue::Bool(*b),
            Literal::Int(i) => NetValue::Int(*i),
            Literal::Real(r) => NetValue::Real(*r),
            Literal::Str(s) => NetValue::Str(s.clone()),
        }
    }

    pub fn as_literal(&self) -> Option<Literal> {
        match self {
            NetValue::Bool(b) => Some(Literal::Bool(*b)),
            NetValue::Int(i) => Some(Literal::Int(*i)),
            NetValue::Real(r) => Some(Literal::Real(*r)),
            NetValue::Str(s) => Some(Literal::Str(s.clone())),
            _ => None,
        }
    }

    /// Slot names in this value, depth first.
    pub fn slots(&self) -> Vec<&str> {
        match self {
            NetValue::Slot { slot } => vec![slot.as_str()],
            NetValue::Call { args, .. } => args.iter().flat_map(NetValue::slots).collect(),
            _ => Vec::new(),
        }
    }

    /// Replaces every slot for which `f` yields a value.
    pub fn fill(&mut self, f: &impl Fn(&str) -> Option<NetValue>) {
        match self {
            NetValue::Slot { slot } => {
                if let Some(v) = f(slot) {
                    *self = v;
                }
            }
            NetValue::Call { args, .. } => args.iter_mut().for_each(|a| a.fill(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateNode {
    pub id: String,
    #[serde(flatten)]
    pub source: StateSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum StateSource {
    Started { command: usize },
    Completed { command: usize },
    Cancelled { command: usize },
    Progress { command: usize, percent: f64 },
    SensorTrue { channel: String },
    SensorGreater { channel: String, threshold: f64 },
    SensorLess { channel: String, threshold: f64 },
    ActuatorError { channel: String },
    Raised,
    Logical { op: LogicalOp, inputs: Vec<usize> },
}

impl StateSource {
    pub fn inputs(&self) -> &[usize] {
        match self {
            StateSource::Logical { inputs, .. } => inputs,
            _ => &[],
        }
    }

    pub fn channel(&self) -> Option<&str> {
        match self {
            StateSource::SensorTrue { channel }
            | StateSource::SensorGreater { channel, .. }
            | StateSource::SensorLess { channel, .. }
            | StateSource::ActuatorError { channel } => Some(channel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandlerEntry {
    pub id: String,
    pub scope: usize,
    pub source: usize,
    pub trigger: Trigger,
    pub effect: NetEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetEffect {
    Start(usize),
    Stop(usize),
    Cancel(usize),
    Raise(usize),
    External(String),
}

impl NetEffect {
    pub fn keyword(&self) -> &'static str {
        match self {
            NetEffect::Start(_) => "start",
            NetEffect::Stop(_) => "stop",
            NetEffect::Cancel(_) => "cancel",
            NetEffect::Raise(_) => "raise",
            NetEffect::External(_) => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("diagram is not valid ({} error(s))", .0.iter().filter(|d| d.is_error()).count())]
    Invalid(Vec<Diagnostic>),
    #[error("state graph has a cycle through {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("factory `{0}` is not in the catalog")]
    UnboundFactory(String),
}

impl Net {
    pub fn lifecycle_index(&self, id: &str) -> Option<usize> {
        self.lifecycle_nodes.iter().position(|n| n.id == id)
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.state_nodes.iter().position(|n| n.id == id)
    }

    /// Concrete output channels of all runtime nodes, sorted and unique.
    pub fn collect_outputs(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .lifecycle_nodes
            .iter()
            .filter_map(|n| n.runtime.as_ref()?.output.as_ref())
            .filter_map(|o| match &o.channel {
                NetValue::Str(s) => Some(s.clone()),
                _ => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("nets always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Net, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Validates and flattens a diagram.
pub fn compile(diagram: &Diagram, catalog: &Catalog) -> Result<Net, CompileError> {
    let report = validate(diagram, catalog);
    if !report.is_valid {
        return Err(CompileError::Invalid(report.diagnostics));
    }
    let ix = Index::new(diagram);
    let mut b = Builder { ix: &ix, catalog, lifecycle: Vec::new(), lc_index: HashMap::new() };
    b.lifecycle_nodes()?;

    // States before ordering: materialized, declared, logical.
    let mut nodes: Vec<StateNode> = Vec::new();
    for (i, n) in b.lifecycle.iter().enumerate() {
        nodes.push(StateNode { id: format!("{}#started", n.id), source: StateSource::Started { command: i } });
        nodes.push(StateNode { id: format!("{}#completed", n.id), source: StateSource::Completed { command: i } });
        nodes.push(StateNode { id: format!("{}#cancelled", n.id), source: StateSource::Cancelled { command: i } });
    }
    for s in &ix.states {
        let source = b.declared_source(s);
        nodes.push(StateNode { id: s.id.clone(), source });
    }
    let first_logical = nodes.len();
    let state_pos: HashMap<String, usize> = nodes
        .iter()
        .map(|n| n.id.clone())
        .chain(diagram.logical_states.iter().map(|l| l.id.clone()))
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    for l in &diagram.logical_states {
        nodes.push(StateNode {
            id: l.id.clone(),
            source: StateSource::Logical { op: l.op, inputs: l.inputs.iter().map(|i| state_pos[i.as_str()]).collect() },
        });
    }
    debug_assert!(nodes[first_logical..].iter().all(|n| matches!(n.source, StateSource::Logical { .. })));

    let order = topo_order(&nodes)?;
    let mut rank = vec![0; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let mut state_nodes: Vec<StateNode> = order.iter().map(|&i| nodes[i].clone()).collect();
    for n in &mut state_nodes {
        if let StateSource::Logical { inputs, .. } = &mut n.source {
            inputs.iter_mut().for_each(|i| *i = rank[*i]);
        }
    }
    let sidx = |id: &str| rank[state_pos[id]];

    for node in &mut b.lifecycle {
        for a in &mut node.auto_start {
            if let Some(g) = a.guard.as_mut() {
                *g = rank[*g];
            }
        }
    }

    let lc = |id: &str| b.lc_index[id];
    let handler_table = diagram
        .handlers
        .iter()
        .map(|h| HandlerEntry {
            id: h.id.clone(),
            scope: lc(&h.scope),
            source: sidx(&h.source),
            trigger: h.trigger,
            effect: match &h.effect {
                Effect::Start(t) => NetEffect::Start(lc(t)),
                Effect::Stop(t) => NetEffect::Stop(lc(t)),
                Effect::Cancel(t) => NetEffect::Cancel(lc(t)),
                Effect::Raise(t) => NetEffect::Raise(sidx(t)),
                Effect::External(tag) => NetEffect::External(tag.clone()),
            },
        })
        .collect();

    let mut start_set: Vec<StartEntry> = Vec::new();
    for s in &diagram.starters {
        for t in &s.targets {
            let child = lc(t);
            if !start_set.iter().any(|e| e.child == child) {
                start_set.push(StartEntry { child, guard: None });
            }
        }
    }

    let mut channels: BTreeSet<String> = BTreeSet::new();
    let all_sensors = ix
        .commands
        .iter()
        .filter_map(|c| match c {
            Command::Runtime(rt) => Some(rt.actuators.iter().flat_map(|a| a.sensors.iter())),
            _ => None,
        })
        .flatten()
        .chain(diagram.top_sensors.iter());
    for s in all_sensors {
        channels.insert(s.channel.clone());
    }
    for n in &state_nodes {
        if let Some(c) = n.source.channel() {
            channels.insert(c.to_string());
        }
    }

    let mut net = Net {
        name: diagram.name.clone(),
        lifecycle_nodes: b.lifecycle,
        state_nodes,
        handler_table,
        start_set,
        channels: channels.into_iter().collect(),
        outputs: Vec::new(),
    };
    net.outputs = net.collect_outputs();
    Ok(net)
}

/// State ids in evaluation order: every state after all of its inputs,
/// ties going to the earlier node.
pub fn evaluation_order(net: &Net) -> Result<Vec<String>, CompileError> {
    let order = topo_order(&net.state_nodes)?;
    Ok(order.into_iter().map(|i| net.state_nodes[i].id.clone()).collect())
}

/// Kahn's algorithm, always taking the lowest-index ready node.
fn topo_order(nodes: &[StateNode]) -> Result<Vec<usize>, CompileError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let n = nodes.len();
    let mut indegree = vec![0usize; n];
    let mut readers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        for &input in node.source.inputs() {
            indegree[i] += 1;
            readers[input].push(i);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &r in &readers[i] {
            indegree[r] -= 1;
            if indegree[r] == 0 {
                ready.push(Reverse(r));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).filter(|i| indegree[*i] > 0).map(|i| nodes[i].id.clone()).collect();
        return Err(CompileError::Cycle(stuck));
    }
    Ok(order)
}

struct Builder<'a, 'd> {
    ix: &'a Index<'d>,
    catalog: &'a Catalog,
    lifecycle: Vec<LifecycleNode>,
    lc_index: HashMap<String, usize>,
}

impl Builder<'_, '_> {
    fn lifecycle_nodes(&mut self) -> Result<(), CompileError> {
        let d = self.ix.diagram;
        self.lifecycle.push(LifecycleNode {
            id: d.name.clone(),
            kind: CommandKind::Root,
            parent: None,
            children: Vec::new(),
            auto_start: Vec::new(),
            duration: None,
            brake_ticks: None,
            runtime: None,
        });
        self.lc_index.insert(d.name.clone(), 0);
        for (i, cmd) in self.ix.commands.iter().enumerate() {
            self.lc_index.insert(cmd.id().to_string(), i + 1);
        }
        for cmd in self.ix.commands.clone() {
            let parent = self.lc_index[self.ix.parent(cmd.id()).expect("every command has a parent")];
            let me = self.lifecycle.len();
            self.lifecycle[parent].children.push(me);
            let node = self.node(cmd, parent)?;
            self.lifecycle.push(node);
        }
        Ok(())
    }

    fn node(&self, cmd: &Command, parent: usize) -> Result<LifecycleNode, CompileError> {
        let mut node = LifecycleNode {
            id: cmd.id().to_string(),
            kind: cmd.kind(),
            parent: Some(parent),
            children: Vec::new(),
            auto_start: Vec::new(),
            duration: None,
            brake_ticks: None,
            runtime: None,
        };
        match cmd {
            Command::Wait(w) => {
                node.duration = Some(NetValue::Int(w.duration_ticks as i64));
                node.brake_ticks = Some(NetValue::Int(0));
            }
            Command::Transaction(tx) => {
                node.auto_start = tx
                    .auto_start
                    .iter()
                    .map(|a| StartEntry {
                        child: self.lc_index[a.child.as_str()],
                        // Placeholder: pre-ordering position, remapped once states are ordered.
                        guard: a.guard.as_ref().map(|g| self.state_pre_index(g)),
                    })
                    .collect();
            }
            Command::Runtime(rt) => {
                let actuator = &rt.actuators[0];
                let action = &rt.actions[0];
                let ty = &self.catalog.action_types[&action.action_type];
                let mut params = BTreeMap::new();
                for p in &action.params {
                    params.insert(p.name.clone(), self.value(&p.binding)?);
                }
                let mut config = BTreeMap::new();
                for p in &actuator.config {
                    config.insert(p.name.clone(), self.value(&p.binding)?);
                }
                let lookup = |name: &str| -> Option<NetValue> {
                    params
                        .get(name)
                        .cloned()
                        .or_else(|| ty.param(name)?.default.as_ref().map(NetValue::from_literal))
                };
                node.duration = ty.duration_param.as_deref().and_then(lookup);
                node.brake_ticks = Some(lookup("brake_ticks").unwrap_or(NetValue::Int(ty.brake_ticks as i64)));
                let output = ty.output.as_ref().and_then(|o| {
                    Some(OutputBinding { channel: lookup(&o.channel_param)?, value: lookup(&o.value_param)? })
                });
                node.runtime = Some(RuntimeInfo {
                    actuator: actuator.id.clone(),
                    device_type: actuator.device_type.clone(),
                    action: action.id.clone(),
                    action_type: action.action_type.clone(),
                    config,
                    params,
                    output,
                });
            }
        }
        Ok(node)
    }

    /// Position of a state in the unordered list built by [`compile`].
    fn state_pre_index(&self, id: &str) -> usize {
        let materialized = 3 * (self.ix.commands.len() + 1);
        if let Some(i) = self.ix.states.iter().position(|s| s.id == id) {
            return materialized + i;
        }
        let l = self
            .ix
            .diagram
            .logical_states
            .iter()
            .position(|l| l.id == id)
            .expect("validated guard resolves to a state");
        materialized + self.ix.states.len() + l
    }

    fn value(&self, b: &Binding) -> Result<NetValue, CompileError> {
        Ok(match b {
            Binding::Constant(l) => NetValue::from_literal(l),
            Binding::Variable(v) => NetValue::Slot { slot: v.clone() },
            Binding::Factory(call) => {
                let f = self
                    .catalog
                    .factories
                    .get(&call.method)
                    .ok_or_else(|| CompileError::UnboundFactory(call.method.clone()))?;
                if matches!(f.owner, FactoryOwner::Global) != call.receiver.is_none() {
                    return Err(CompileError::UnboundFactory(call.method.clone()));
                }
                NetValue::Call {
                    call: call.method.clone(),
                    receiver: call.receiver.clone(),
                    args: call.args.iter().map(|a| self.value(a)).collect::<Result<_, _>>()?,
                }
            }
        })
    }

    fn declared_source(&self, s: &DeclaredState) -> StateSource {
        let lc = |id: &str| self.lc_index[id];
        let channel_of = |sensor: &str| match self.ix.get(sensor) {
            Some(Entity::Sensor(s)) => s.channel.clone(),
            _ => unreachable!("validated sensor owner"),
        };
        match &s.kind {
            StateKind::CommandStarted => StateSource::Started { command: lc(&s.owner) },
            StateKind::CommandCompleted => StateSource::Completed { command: lc(&s.owner) },
            StateKind::CommandCancelled => StateSource::Cancelled { command: lc(&s.owner) },
            StateKind::ActionProgressAtLeast { percent } => {
                StateSource::Progress { command: lc(self.ix.holder[s.owner.as_str()]), percent: *percent }
            }
            StateKind::SensorTrue => StateSource::SensorTrue { channel: channel_of(&s.owner) },
            StateKind::SensorGreater { threshold } => {
                StateSource::SensorGreater { channel: channel_of(&s.owner), threshold: *threshold }
            }
            StateKind::SensorLess { threshold } => {
                StateSource::SensorLess { channel: channel_of(&s.owner), threshold: *threshold }
            }
            StateKind::ActuatorError => StateSource::ActuatorError { channel: format!("{}.error", s.owner) },
            StateKind::Raised => StateSource::Raised,
        }
    }
}
