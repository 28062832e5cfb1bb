//! Deterministic tick simulation of a compiled [`Net`].
//!
//! Before tick 0 the root and its start set are started. Each tick then runs
//! five phases:
//!
//! 1. **sample**: read script channels, advance elapsed time of running
//!    runtime and wait commands;
//! 2. **evaluate**: compute every state in evaluation order;
//! 3. **trigger**: release guarded auto-starts whose guard holds, then scan
//!    handlers in declaration order and apply their effects immediately;
//! 4. **lifecycle**: complete or cancel runtime and wait commands, then
//!    transactions from the deepest up;
//! 5. **commit**: keep this tick's activity for edge detection and latch
//!    `ever` states and raised pulses.
//!
//! A command started in phase 3 of tick `t` is seen as started from tick
//! `t + 1`, which is also its first tick of progress. A runtime or wait
//! command's completion state is visible in the tick its progress reaches 1;
//! every other lifecycle transition becomes visible one tick later.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;

use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{NetEffect, NetValue, Net, StateSource};
use crate::model::{CommandKind, Literal, LogicalOp};

/// Arithmetic the simulator needs from its scalar type.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + fmt::Debug {}

impl<T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + fmt::Debug> Scalar for T {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptValue {
    Bool(bool),
    Real(f64),
}

/// Piecewise-constant sensor input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorScript {
    pub ticks: u64,
    #[serde(default)]
    pub channels: BTreeMap<String, Vec<(u64, ScriptValue)>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("script is not valid JSON: {0}")]
    Json(String),
    #[error("channel `{0}` has no segments")]
    Empty(String),
    #[error("channel `{0}` must start at tick 0")]
    NoStart(String),
    #[error("channel `{channel}`: segment ticks must strictly increase (at {tick})")]
    Order { channel: String, tick: u64 },
    #[error("channel `{0}` mixes boolean and real values")]
    Mixed(String),
}

impl SensorScript {
    pub fn from_json(text: &str) -> Result<SensorScript, ScriptError> {
        let s: SensorScript = serde_json::from_str(text).map_err(|e| ScriptError::Json(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), ScriptError> {
        for (name, segs) in &self.channels {
            let first = segs.first().ok_or_else(|| ScriptError::Empty(name.clone()))?;
            if first.0 != 0 {
                return Err(ScriptError::NoStart(name.clone()));
            }
            for w in segs.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(ScriptError::Order { channel: name.clone(), tick: w[1].0 });
                }
            }
            let boolean = matches!(first.1, ScriptValue::Bool(_));
            if segs.iter().any(|(_, v)| matches!(v, ScriptValue::Bool(_)) != boolean) {
                return Err(ScriptError::Mixed(name.clone()));
            }
        }
        Ok(())
    }

    /// Value of `channel` at `tick`, if the channel exists.
    pub fn value_at(&self, channel: &str, tick: u64) -> Option<ScriptValue> {
        let segs = self.channels.get(channel)?;
        let i = segs.partition_point(|(from, _)| *from <= tick);
        segs.get(i.checked_sub(1)?).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub max_ticks: u64,
    pub stop_on_root_terminal: bool,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig { max_ticks: 10_000, stop_on_root_terminal: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifecycleStatus<S> {
    Idle,
    Running { started_at: u64, cancel_requested: bool, progress: S },
    Completed { at: u64 },
    Stopped { at: u64 },
    Cancelled { at: u64 },
}

impl<S> LifecycleStatus<S> {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Completed { .. } | Self::Stopped { .. } | Self::Cancelled { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TickRecord>,
}

impl Trace {
    /// One JSON object per line, newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Trace { records })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_edges: Vec<StateEdge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<EffectRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lifecycle: Vec<LifecycleRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub externals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<OutputRecord>,
    /// Set on the last record when the tick horizon ended the run.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Entered,
    Left,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEdge {
    pub state: String,
    pub edge: Edge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub handler: String,
    pub effect: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub noop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Running,
    Cancelling,
    Completed,
    Stopped,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleRecord {
    pub command: String,
    pub status: Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub channel: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("script has no channel `{0}`")]
    MissingChannel(String),
    #[error("channel `{channel}` must carry {expected} values")]
    ChannelKind { channel: String, expected: &'static str },
    #[error("value {value} on channel `{channel}` is not representable")]
    Unrepresentable { channel: String, value: f64 },
    #[error("`{command}` needs a value for `{slot}` before it can run")]
    UnboundSlot { command: String, slot: String },
    #[error("`{command}`: {what} must be a non-negative integer")]
    BadValue { command: String, what: &'static str },
    #[error("max_ticks must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Idle,
    Running,
    Completed(u64),
    Stopped(u64),
    Cancelled(u64),
}

impl Status {
    fn is_terminal(self) -> bool {
        matches!(self, Status::Completed(_) | Status::Stopped(_) | Status::Cancelled(_))
    }
}

/// Static per-command data with every value made concrete.
struct Plan {
    kind: CommandKind,
    duration: u64,
    brake: u64,
    output: Option<(String, Literal)>,
    depth: usize,
}

#[derive(Clone)]
struct Cmd {
    status: Status,
    started_at: Option<u64>,
    elapsed: Option<u64>,
    cancel_at: Option<u64>,
    /// First tick at which a terminal transition counts for the parent.
    settled_from: u64,
    pending: Vec<(usize, usize)>,
}

enum Eval<S> {
    Bool(String),
    Greater(String, S),
    Less(String, S),
    Other,
}

/// Simulation state for one run; advance it with [`Engine::step`].
pub struct Engine<'a, S: Scalar> {
    net: &'a Net,
    script: &'a SensorScript,
    plans: Vec<Plan>,
    evals: Vec<Eval<S>>,
    /// Transactions by decreasing depth, then pre-order.
    tx_order: Vec<usize>,
    cmds: Vec<Cmd>,
    prev: Vec<bool>,
    cur: Vec<bool>,
    ever: Vec<bool>,
    raised_now: Vec<bool>,
    raised_next: Vec<bool>,
    first_latch: Vec<bool>,
    tick: u64,
    horizon: u64,
    stop_on_root_terminal: bool,
    finished: bool,
    boot: Vec<LifecycleRecord>,
    _scalar: PhantomData<S>,
}

/// Runs a net to the end and returns its trace.
pub fn run<S: Scalar>(net: &Net, script: &SensorScript, config: &SimConfig) -> Result<Trace, SimError> {
    let mut engine = Engine::<S>::new(net, script, config)?;
    let mut records = Vec::new();
    while let Some(r) = engine.step() {
        records.push(r);
    }
    Ok(Trace { records })
}

fn concrete_u64(net_value: Option<&NetValue>, command: &str, what: &'static str) -> Result<u64, SimError> {
    match net_value {
        None => Ok(0),
        Some(NetValue::Int(i)) if *i >= 0 => Ok(*i as u64),
        Some(v) => match v.slots().first() {
            Some(slot) => Err(SimError::UnboundSlot { command: command.into(), slot: slot.to_string() }),
            None => Err(SimError::BadValue { command: command.into(), what }),
        },
    }
}

impl<'a, S: Scalar> Engine<'a, S> {
    pub fn new(net: &'a Net, script: &'a SensorScript, config: &SimConfig) -> Result<Self, SimError> {
        if config.max_ticks == 0 {
            return Err(SimError::ZeroBudget);
        }
        script.check()?;
        for c in &net.channels {
            if !script.channels.contains_key(c) {
                return Err(SimError::MissingChannel(c.clone()));
            }
        }

        let mut plans = Vec::with_capacity(net.lifecycle_nodes.len());
        for node in &net.lifecycle_nodes {
            let depth = node.parent.map_or(0, |p: usize| plans.get(p).map_or(0, |pl: &Plan| pl.depth) + 1);
            let output = match node.runtime.as_ref().and_then(|r| r.output.as_ref()) {
                None => None,
                Some(o) => {
                    let lit = |v: &NetValue, what| {
                        v.as_literal().ok_or_else(|| match v.slots().first() {
                            Some(slot) => SimError::UnboundSlot { command: node.id.clone(), slot: slot.to_string() },
                            None => SimError::BadValue { command: node.id.clone(), what },
                        })
                    };
                    let channel = match lit(&o.channel, "output channel")? {
                        Literal::Str(s) => s,
                        _ => return Err(SimError::BadValue { command: node.id.clone(), what: "output channel" }),
                    };
                    Some((channel, lit(&o.value, "output value")?))
                }
            };
            plans.push(Plan {
                kind: node.kind,
                duration: concrete_u64(node.duration.as_ref(), &node.id, "duration")?,
                brake: concrete_u64(node.brake_ticks.as_ref(), &node.id, "brake_ticks")?,
                output,
                depth,
            });
        }

        let real = |v: f64, channel: &str| {
            S::from_f64(v).ok_or_else(|| SimError::Unrepresentable { channel: channel.into(), value: v })
        };
        let mut evals = Vec::with_capacity(net.state_nodes.len());
        for node in &net.state_nodes {
            let need = |channel: &str, boolean: bool| -> Result<(), SimError> {
                let segs = &script.channels[channel];
                for (_, v) in segs {
                    match (v, boolean) {
                        (ScriptValue::Bool(_), true) => {}
                        (ScriptValue::Real(x), false) => {
                            real(*x, channel)?;
                        }
                        _ => {
                            return Err(SimError::ChannelKind {
                                channel: channel.into(),
                                expected: if boolean { "boolean" } else { "real" },
                            })
                        }
                    }
                }
                Ok(())
            };
            let e = match &node.source {
                StateSource::SensorTrue { channel } | StateSource::ActuatorError { channel } => {
                    need(channel, true)?;
                    Eval::Bool(channel.clone())
                }
                StateSource::SensorGreater { channel, threshold } => {
                    need(channel, false)?;
                    Eval::Greater(channel.clone(), real(*threshold, channel)?)
                }
                StateSource::SensorLess { channel, threshold } => {
                    need(channel, false)?;
                    Eval::Less(channel.clone(), real(*threshold, channel)?)
                }
                _ => Eval::Other,
            };
            evals.push(e);
        }

        let mut tx_order: Vec<usize> = (0..plans.len())
            .filter(|&i| matches!(plans[i].kind, CommandKind::Transaction | CommandKind::Root))
            .collect();
        tx_order.sort_by_key(|&i| (std::cmp::Reverse(plans[i].depth), i));

        let n_states = net.state_nodes.len();
        let idle = Cmd { status: Status::Idle, started_at: None, elapsed: None, cancel_at: None, settled_from: 0, pending: Vec::new() };
        let mut engine = Engine {
            net,
            script,
            plans,
            evals,
            tx_order,
            cmds: vec![idle; net.lifecycle_nodes.len()],
            prev: vec![false; n_states],
            cur: vec![false; n_states],
            ever: vec![false; n_states],
            raised_now: vec![false; n_states],
            raised_next: vec![false; n_states],
            first_latch: vec![false; net.handler_table.len()],
            tick: 0,
            horizon: config.max_ticks.min(script.ticks),
            stop_on_root_terminal: config.stop_on_root_terminal,
            finished: false,
            boot: Vec::new(),
            _scalar: PhantomData,
        };
        if engine.horizon == 0 {
            engine.finished = true;
        } else {
            let mut boot = Vec::new();
            engine.start(0, 0, &mut boot);
            engine.boot = boot;
        }
        Ok(engine)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn status(&self, command: &str) -> Option<LifecycleStatus<S>> {
        let i = self.net.lifecycle_index(command)?;
        let c = &self.cmds[i];
        Some(match c.status {
            Status::Idle => LifecycleStatus::Idle,
            Status::Running => LifecycleStatus::Running {
                started_at: c.started_at.unwrap_or(0),
                cancel_requested: c.cancel_at.is_some(),
                progress: self.progress(i),
            },
            Status::Completed(at) => LifecycleStatus::Completed { at },
            Status::Stopped(at) => LifecycleStatus::Stopped { at },
            Status::Cancelled(at) => LifecycleStatus::Cancelled { at },
        })
    }

    /// Activity of a state in the most recently evaluated tick.
    pub fn is_active(&self, state: &str) -> Option<bool> {
        self.net.state_index(state).map(|i| self.prev[i])
    }

    fn progress(&self, i: usize) -> S {
        let d = self.plans[i].duration;
        match self.cmds[i].elapsed {
            None => S::zero(),
            Some(_) if d == 0 => S::one(),
            Some(e) => {
                let p = S::from_u64(e).unwrap_or(S::zero()) / S::from_u64(d).unwrap_or(S::one());
                if p > S::one() {
                    S::one()
                } else {
                    p
                }
            }
        }
    }

    fn is_atomic_done(&self, i: usize) -> bool {
        self.cmds[i].elapsed.is_some_and(|e| e >= self.plans[i].duration)
    }

    /// Advances one tick; `None` once the run is over.
    pub fn step(&mut self) -> Option<TickRecord> {
        if self.finished {
            return None;
        }
        let t = self.tick;
        let mut rec = TickRecord { tick: t, lifecycle: std::mem::take(&mut self.boot), ..Default::default() };

        // P1 sample
        for i in 0..self.cmds.len() {
            let c = &mut self.cmds[i];
            if c.status == Status::Running
                && c.cancel_at.is_none()
                && matches!(self.plans[i].kind, CommandKind::Runtime | CommandKind::Wait)
            {
                let since = t - c.started_at.expect("running commands have started");
                c.elapsed = Some(since.min(self.plans[i].duration));
            }
        }

        // P2 evaluate
        for s in 0..self.net.state_nodes.len() {
            let active = self.evaluate(s, t);
            self.cur[s] = active;
            if active != self.prev[s] {
                rec.state_edges.push(StateEdge {
                    state: self.net.state_nodes[s].id.clone(),
                    edge: if active { Edge::Entered } else { Edge::Left },
                });
            }
        }

        // P3 trigger
        for i in 0..self.cmds.len() {
            if self.cmds[i].status != Status::Running || self.cmds[i].cancel_at.is_some() {
                continue;
            }
            let pending = std::mem::take(&mut self.cmds[i].pending);
            let (go, wait): (Vec<_>, Vec<_>) = pending.into_iter().partition(|&(_, g)| self.cur[g]);
            self.cmds[i].pending = wait;
            for (child, _) in go {
                if self.cmds[child].status == Status::Idle {
                    self.start(child, t, &mut rec.lifecycle);
                }
            }
        }
        for h in 0..self.net.handler_table.len() {
            let entry = &self.net.handler_table[h];
            if self.cmds[entry.scope].status != Status::Running {
                continue;
            }
            let (before, now) = (self.prev[entry.source], self.cur[entry.source]);
            let edge = if entry.trigger.on_enter() { !before && now } else { before && !now };
            if !edge || (entry.trigger.is_first() && self.first_latch[h]) {
                continue;
            }
            if entry.trigger.is_first() {
                self.first_latch[h] = true;
            }
            self.apply(h, t, &mut rec);
        }

        // P4 lifecycle
        for i in 0..self.cmds.len() {
            if self.cmds[i].status != Status::Running
                || !matches!(self.plans[i].kind, CommandKind::Runtime | CommandKind::Wait)
            {
                continue;
            }
            let done = self.is_atomic_done(i);
            let outcome = match self.cmds[i].cancel_at {
                _ if done => Some(Transition::Completed),
                Some(c) if t >= c + self.plans[i].brake => Some(Transition::Cancelled),
                _ => None,
            };
            match outcome {
                Some(Transition::Completed) => self.complete(i, t, &mut rec),
                Some(Transition::Cancelled) => {
                    self.cmds[i].status = Status::Cancelled(t);
                    self.cmds[i].settled_from = t + 1;
                    rec.lifecycle.push(self.lc_record(i, Transition::Cancelled));
                }
                _ => {}
            }
        }
        for k in 0..self.tx_order.len() {
            let i = self.tx_order[k];
            if self.cmds[i].status != Status::Running {
                continue;
            }
            let children = &self.net.lifecycle_nodes[i].children;
            let cancelling = self.cmds[i].cancel_at.is_some();
            let any_started = children.iter().any(|&c| self.cmds[c].started_at.is_some());
            let running = children.iter().any(|&c| self.cmds[c].status == Status::Running);
            let settled = children
                .iter()
                .all(|&c| !self.cmds[c].status.is_terminal() || self.cmds[c].settled_from <= t);
            let pending = !self.cmds[i].pending.is_empty() && !cancelling;
            if (children.is_empty() || any_started || cancelling) && !running && !pending && settled {
                let (status, tr) = if cancelling {
                    (Status::Cancelled(t), Transition::Cancelled)
                } else {
                    (Status::Completed(t), Transition::Completed)
                };
                self.cmds[i].status = status;
                self.cmds[i].settled_from = t + 1;
                rec.lifecycle.push(self.lc_record(i, tr));
            }
        }

        // P5 commit
        for s in 0..self.cur.len() {
            if self.cur[s] {
                self.ever[s] = true;
            }
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.raised_now, &mut self.raised_next);
        self.raised_next.iter_mut().for_each(|r| *r = false);

        let root_done = self.cmds[0].status.is_terminal();
        self.tick += 1;
        if root_done && self.stop_on_root_terminal {
            self.finished = true;
        } else if self.tick >= self.horizon {
            self.finished = true;
            rec.truncated = !root_done;
        }
        Some(rec)
    }

    fn evaluate(&self, s: usize, t: u64) -> bool {
        let sample = |channel: &str| self.script.value_at(channel, t).expect("channels checked at construction");
        let real = |channel: &str| match sample(channel) {
            ScriptValue::Real(x) => S::from_f64(x).expect("values checked at construction"),
            ScriptValue::Bool(_) => unreachable!("kinds checked at construction"),
        };
        match &self.evals[s] {
            Eval::Bool(channel) => return matches!(sample(channel), ScriptValue::Bool(true)),
            Eval::Greater(channel, th) => return real(channel) > *th,
            Eval::Less(channel, th) => return real(channel) < *th,
            Eval::Other => {}
        }
        match &self.net.state_nodes[s].source {
            StateSource::Started { command } => self.cmds[*command].started_at.is_some(),
            StateSource::Completed { command } => {
                let c = &self.cmds[*command];
                match c.status {
                    Status::Completed(_) | Status::Cancelled(_) => true,
                    Status::Running => self.completion_visible(*command),
                    _ => false,
                }
            }
            StateSource::Cancelled { command } => self.cmds[*command].cancel_at.is_some(),
            StateSource::Progress { command, percent } => {
                let c = &self.cmds[*command];
                match c.elapsed {
                    None => false,
                    Some(e) => {
                        let from = |v: u64| S::from_u64(v).expect("tick counts are representable");
                        let pct = S::from_f64(*percent).expect("percent is representable");
                        from(e) * from(100) >= pct * from(self.plans[*command].duration)
                    }
                }
            }
            StateSource::Raised => self.raised_now[s],
            StateSource::Logical { op, inputs } => match op {
                LogicalOp::And => inputs.iter().all(|&i| self.cur[i]),
                LogicalOp::Or => inputs.iter().any(|&i| self.cur[i]),
                LogicalOp::Not => !self.cur[inputs[0]],
                LogicalOp::Ever => self.ever[s] || self.cur[inputs[0]],
            },
            _ => unreachable!("sensor states handled above"),
        }
    }

    fn completion_visible(&self, i: usize) -> bool {
        self.cmds[i].status == Status::Running
            && matches!(self.plans[i].kind, CommandKind::Runtime | CommandKind::Wait)
            && self.cmds[i].cancel_at.is_none()
            && self.is_atomic_done(i)
    }

    /// Normal completion of a runtime or wait command.
    fn complete(&mut self, i: usize, t: u64, rec: &mut TickRecord) {
        self.cmds[i].status = Status::Completed(t);
        self.cmds[i].settled_from = t;
        rec.lifecycle.push(self.lc_record(i, Transition::Completed));
        if let Some((channel, value)) = &self.plans[i].output {
            rec.outputs.push(OutputRecord { channel: channel.clone(), value: value.clone() });
        }
    }

    fn lc_record(&self, i: usize, status: Transition) -> LifecycleRecord {
        LifecycleRecord { command: self.net.lifecycle_nodes[i].id.clone(), status }
    }

    /// Starts an idle command and, for transactions, its unguarded auto-starts.
    fn start(&mut self, i: usize, t: u64, out: &mut Vec<LifecycleRecord>) {
        let c = &mut self.cmds[i];
        c.status = Status::Running;
        c.started_at = Some(t);
        out.push(self.lc_record(i, Transition::Running));
        let entries = if i == 0 { &self.net.start_set } else { &self.net.lifecycle_nodes[i].auto_start };
        let mut now = Vec::new();
        for e in entries {
            match e.guard {
                Some(g) => self.cmds[i].pending.push((e.child, g)),
                None => now.push(e.child),
            }
        }
        for child in now {
            if self.cmds[child].status == Status::Idle {
                self.start(child, t, out);
            }
        }
    }

    fn apply(&mut self, h: usize, t: u64, rec: &mut TickRecord) {
        let net = self.net;
        let entry = &net.handler_table[h];
        let name = |i: usize| net.lifecycle_nodes[i].id.clone();
        let mut record = EffectRecord {
            handler: entry.id.clone(),
            effect: entry.effect.keyword().to_string(),
            target: String::new(),
            noop: false,
        };
        match &entry.effect {
            NetEffect::Start(target) => {
                record.target = name(*target);
                record.noop = self.cmds[*target].status != Status::Idle;
                rec.effects.push(record);
                if !rec.effects.last().expect("just pushed").noop {
                    self.start(*target, t, &mut rec.lifecycle);
                }
            }
            NetEffect::Stop(target) => {
                record.target = name(*target);
                record.noop = self.cmds[*target].status.is_terminal();
                rec.effects.push(record);
                if rec.effects.last().expect("just pushed").noop {
                    return;
                }
                let mut stack = vec![*target];
                let mut closure = Vec::new();
                while let Some(i) = stack.pop() {
                    closure.push(i);
                    stack.extend(net.lifecycle_nodes[i].children.iter().rev());
                }
                for i in closure {
                    if self.cmds[i].status.is_terminal() {
                        continue;
                    }
                    // A completion already observed this tick stands.
                    if self.completion_visible(i) {
                        self.complete(i, t, rec);
                    } else {
                        self.cmds[i].status = Status::Stopped(t);
                        self.cmds[i].settled_from = t + 1;
                        rec.lifecycle.push(self.lc_record(i, Transition::Stopped));
                    }
                }
            }
            NetEffect::Cancel(target) => {
                record.target = name(*target);
                let c = &self.cmds[*target];
                record.noop = c.status != Status::Running || c.cancel_at.is_some();
                rec.effects.push(record);
                if !rec.effects.last().expect("just pushed").noop {
                    self.cancel(*target, t, &mut rec.lifecycle);
                }
            }
            NetEffect::Raise(state) => {
                record.target = net.state_nodes[*state].id.clone();
                rec.effects.push(record);
                self.raised_next[*state] = true;
            }
            NetEffect::External(tag) => {
                record.target = tag.clone();
                rec.effects.push(record);
                rec.externals.push(tag.clone());
            }
        }
    }

    fn cancel(&mut self, i: usize, t: u64, out: &mut Vec<LifecycleRecord>) {
        self.cmds[i].cancel_at = Some(t);
        out.push(self.lc_record(i, Transition::Cancelling));
        for k in 0..self.net.lifecycle_nodes[i].children.len() {
            let child = self.net.lifecycle_nodes[i].children[k];
            if self.cmds[child].status == Status::Running && self.cmds[child].cancel_at.is_none() {
                self.cancel(child, t, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::compile::compile;
    use crate::dsl::parse;
    use crate::Rational;

    fn net(src: &str) -> Net {
        compile(&parse(src, "t.gsr").unwrap(), Catalog::builtin()).unwrap()
    }

    fn script(json: &str) -> SensorScript {
        SensorScript::from_json(json).unwrap()
    }

    fn trace(n: &Net, s: &SensorScript) -> Trace {
        run::<f64>(n, s, &SimConfig::default()).unwrap()
    }

    /// Ticks at which `command` reached `status`.
    fn when(t: &Trace, command: &str, status: Transition) -> Vec<u64> {
        t.records
            .iter()
            .filter(|r| r.lifecycle.iter().any(|l| l.command == command && l.status == status))
            .map(|r| r.tick)
            .collect()
    }

    #[test]
    fn wait_runs_its_duration_or_until_cancelled() {
        let src = r#"
            diagram D {
                starter s -> t;
                transaction t {
                    wait lead: 2 { state leadDone: Completed on lead; }
                    wait w: 5;
                    start lead;
                    handler on leadDone first_entered start w;
                    handler on kick first_entered cancel w;
                }
                sensor k: DigitalInput channel "kick";
                state kick: True on k;
            }"#;
        let n = net(src);
        let quiet = script(r#"{"ticks": 50, "channels": {"kick": [[0, false]]}}"#);
        let t = trace(&n, &quiet);
        assert_eq!(when(&t, "w", Transition::Running), [2]);
        assert_eq!(when(&t, "w", Transition::Completed), [7]);

        let kicked = script(r#"{"ticks": 50, "channels": {"kick": [[0, false], [4, true]]}}"#);
        let t = trace(&n, &kicked);
        assert_eq!(when(&t, "w", Transition::Cancelled), [4]);
        assert!(when(&t, "w", Transition::Completed).is_empty());
    }

    #[test]
    fn single_tick_command_completes_with_root() {
        let n = net("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(duration = 1); } }");
        let t = trace(&n, &SensorScript { ticks: 100, channels: BTreeMap::new() });
        assert_eq!(when(&t, "c", Transition::Completed), [1]);
        assert_eq!(when(&t, "D", Transition::Completed), [1]);
        assert_eq!(t.records.len(), 2);
        assert!(!t.records[1].truncated);
    }

    #[test]
    fn raise_is_seen_next_tick() {
        let n = net(
            r#"diagram D { starter s -> w; wait w: 10 { state go: Started on w; }
                 state r: Raised on D;
                 handler on go entered raise r;
                 handler on r entered external "seen"; }"#,
        );
        let t = trace(&n, &SensorScript { ticks: 100, channels: BTreeMap::new() });
        let fired: Vec<u64> = t.records.iter().filter(|r| r.effects.iter().any(|e| e.effect == "raise")).map(|r| r.tick).collect();
        assert_eq!(fired, [0]);
        let edges: Vec<(u64, Edge)> = t
            .records
            .iter()
            .flat_map(|r| r.state_edges.iter().filter(|e| e.state == "r").map(move |e| (r.tick, e.edge)))
            .collect();
        assert_eq!(edges, [(1, Edge::Entered), (2, Edge::Left)]);
        assert_eq!(t.records[1].externals, ["seen"]);
    }

    #[test]
    fn stop_on_root_stops_everything_at_once() {
        let n = net(
            r#"diagram D { starter s -> t, w;
                 transaction t { wait a: 50; wait b: 50; start a; }
                 wait w: 3 { state wd: Completed on w; }
                 handler on wd entered stop D; }"#,
        );
        let t = trace(&n, &SensorScript { ticks: 100, channels: BTreeMap::new() });
        let last = t.records.last().unwrap();
        assert_eq!(last.tick, 3);
        let stopped: Vec<&str> = last
            .lifecycle
            .iter()
            .filter(|l| l.status == Transition::Stopped)
            .map(|l| l.command.as_str())
            .collect();
        // `w` had visibly completed, so it completes rather than stops; `b` had never started.
        assert_eq!(stopped, ["D", "t", "a", "b"]);
        assert_eq!(when(&t, "w", Transition::Completed), [3]);
    }

    #[test]
    fn stop_on_finished_target_leaves_idle_children_alone() {
        let n = net(
            r#"diagram D { starter s -> t, w;
                 transaction t { wait a: 1; wait idle: 1; start a; state td: Completed on t; }
                 wait w: 10;
                 handler on td entered stop t; }"#,
        );
        let t = trace(&n, &SensorScript { ticks: 100, channels: BTreeMap::new() });
        let stop = t.records.iter().flat_map(|r| &r.effects).find(|e| e.effect == "stop").unwrap();
        assert!(stop.noop);
        assert!(when(&t, "idle", Transition::Stopped).is_empty());
    }

    #[test]
    fn horizon_truncates() {
        let n = net("diagram D { starter s -> w; wait w: 50; }");
        let t = run::<f64>(&n, &SensorScript { ticks: 100, channels: BTreeMap::new() }, &SimConfig { max_ticks: 10, ..SimConfig::default() }).unwrap();
        assert_eq!(t.records.len(), 10);
        assert!(t.records[9].truncated);
    }

    #[test]
    fn missing_and_mistyped_channels() {
        let n = net(r#"diagram D { starter s -> w; wait w: 5; sensor k: DigitalInput channel "k"; state on_: True on k; }"#);
        let empty = SensorScript { ticks: 5, channels: BTreeMap::new() };
        assert_eq!(run::<f64>(&n, &empty, &SimConfig::default()).unwrap_err(), SimError::MissingChannel("k".into()));
        let real = script(r#"{"ticks": 5, "channels": {"k": [[0, 1.5]]}}"#);
        assert!(matches!(run::<f64>(&n, &real, &SimConfig::default()), Err(SimError::ChannelKind { .. })));
    }

    #[test]
    fn script_rules() {
        assert_eq!(SensorScript::from_json(r#"{"ticks": 3, "channels": {"a": [[1, true]]}}"#), Err(ScriptError::NoStart("a".into())));
        assert!(matches!(
            SensorScript::from_json(r#"{"ticks": 3, "channels": {"a": [[0, true], [0, false]]}}"#),
            Err(ScriptError::Order { .. })
        ));
        let s = script(r#"{"ticks": 9, "channels": {"a": [[0, 1], [4, 2.5]]}}"#);
        assert_eq!(s.value_at("a", 3), Some(ScriptValue::Real(1.0)));
        assert_eq!(s.value_at("a", 4), Some(ScriptValue::Real(2.5)));
    }

    #[test]
    fn brake_delays_cancellation() {
        let n = net(
            r#"diagram D { starter s -> t; transaction t {
                 runtime m { actuator a: LWR; action p: PTP(duration = 20, brake_ticks = 3); }
                 start m; handler on kick first_entered cancel t; }
               sensor k: DigitalInput channel "kick"; state kick: True on k; }"#,
        );
        let t = trace(&n, &script(r#"{"ticks": 50, "channels": {"kick": [[0, false], [5, true]]}}"#));
        assert_eq!(when(&t, "m", Transition::Cancelling), [5]);
        assert_eq!(when(&t, "m", Transition::Cancelled), [8]);
        assert_eq!(when(&t, "t", Transition::Cancelled), [9]);
    }

    #[test]
    fn exact_and_float_agree() {
        let n = net(
            r#"diagram D { starter s -> c; runtime c { actuator a: LWR; action p: PTP(duration = 3);
                 state third: ProgressAtLeast(33.4) on p; }
               handler on third entered external "third"; }"#,
        );
        let s = SensorScript { ticks: 10, channels: BTreeMap::new() };
        let f = run::<f64>(&n, &s, &SimConfig::default()).unwrap();
        let r = run::<Rational>(&n, &s, &SimConfig::default()).unwrap();
        assert_eq!(f, r);
        let tick = f.records.iter().find(|r| !r.externals.is_empty()).unwrap().tick;
        assert_eq!(tick, 2);
    }
}
