//! Late-bound command templates.
//!
//! [`generate`] compiles a diagram while leaving every `$variable` as a
//! named slot, lists the bindings the slots need and renders a builder
//! listing. [`instantiate`] fills the slots and refuses to produce a net
//! while any binding is missing or has the wrong kind.
//!
//! The listing is a line-oriented pseudo-script with five sections, always
//! in this order:
//!
//! ```text
//! [parameters]      one `param` line per parameter, `require` per variable
//! [atomic-states]   commands with their sensors and states, inner first
//! [logical-states]  logical states in evaluation order
//! [event-effects]   handlers in declaration order
//! [start-wiring]    auto-starts and starters
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ValueKind};
use crate::compile::{compile, CompileError, Net, NetValue, StateSource};
use crate::dsl::printer;
use crate::model::*;

pub type BindingSet = BTreeMap<String, Literal>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredBinding {
    pub name: String,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandTemplate {
    pub net_skeleton: Net,
    pub required_bindings: Vec<RequiredBinding>,
    /// Written separately from the JSON form.
    #[serde(skip)]
    pub listing: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstantiateError {
    #[error("missing binding(s): {}", .0.join(", "))]
    MissingBinding(Vec<String>),
    #[error("binding `{name}` must be a {} value", .expected.name())]
    KindMismatch { name: String, expected: ValueKind },
}

pub fn generate(diagram: &Diagram, catalog: &Catalog) -> Result<CommandTemplate, CompileError> {
    let net = compile(diagram, catalog)?;
    let ix = Index::new(diagram);
    let mut required: BTreeMap<String, ValueKind> = BTreeMap::new();
    for (owner, p) in diagram.parameters() {
        if let Some(kind) = param_kind(&ix, catalog, owner, &p.name) {
            collect_variables(&p.binding, kind, catalog, &mut required);
        }
    }
    let required_bindings = required.into_iter().map(|(name, kind)| RequiredBinding { name, kind }).collect();
    let listing = listing(diagram, &ix, catalog, &net);
    Ok(CommandTemplate { net_skeleton: net, required_bindings, listing })
}

fn param_kind(ix: &Index<'_>, catalog: &Catalog, owner: &str, name: &str) -> Option<ValueKind> {
    let specs = match ix.get(owner)? {
        Entity::Action(a) => &catalog.action_types.get(&a.action_type)?.params,
        Entity::Actuator(a) => &catalog.device_types.get(&a.device_type)?.config,
        _ => return None,
    };
    specs.iter().find(|s| s.name == name).map(|s| s.kind)
}

fn collect_variables(b: &Binding, kind: ValueKind, catalog: &Catalog, out: &mut BTreeMap<String, ValueKind>) {
    match b {
        Binding::Constant(_) => {}
        Binding::Variable(v) => {
            out.insert(v.clone(), kind);
        }
        Binding::Factory(call) => {
            if let Some(f) = catalog.factories.get(&call.method) {
                for (arg, k) in call.args.iter().zip(&f.args) {
                    collect_variables(arg, *k, catalog, out);
                }
            }
        }
    }
}

/// Fills every slot of the skeleton, or reports what is missing or mistyped.
pub fn instantiate(template: &CommandTemplate, bindings: &BindingSet) -> Result<Net, InstantiateError> {
    let missing: Vec<String> = template
        .required_bindings
        .iter()
        .filter(|r| !bindings.contains_key(&r.name))
        .map(|r| r.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(InstantiateError::MissingBinding(missing));
    }
    for r in &template.required_bindings {
        if !r.kind.accepts(&bindings[&r.name]) {
            return Err(InstantiateError::KindMismatch { name: r.name.clone(), expected: r.kind });
        }
    }
    let fill = |slot: &str| bindings.get(slot).map(NetValue::from_literal);
    let mut net = template.net_skeleton.clone();
    for node in &mut net.lifecycle_nodes {
        for v in node.duration.iter_mut().chain(node.brake_ticks.iter_mut()) {
            v.fill(&fill);
        }
        if let Some(rt) = &mut node.runtime {
            rt.config.values_mut().chain(rt.params.values_mut()).for_each(|v| v.fill(&fill));
            if let Some(o) = &mut rt.output {
                o.channel.fill(&fill);
                o.value.fill(&fill);
            }
        }
    }
    net.outputs = net.collect_outputs();
    Ok(net)
}

fn listing(d: &Diagram, ix: &Index<'_>, catalog: &Catalog, net: &Net) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "builder {}", d.name);

    out.push_str("\n[parameters]\n");
    let mut required: BTreeMap<String, ValueKind> = BTreeMap::new();
    for (owner, p) in d.parameters() {
        let kind = param_kind(ix, catalog, owner, &p.name);
        let kind_name = kind.map_or("?", ValueKind::name);
        let _ = writeln!(out, "param {owner}.{} : {kind_name} = {}", p.name, printer::binding(&p.binding));
        if let Some(k) = kind {
            collect_variables(&p.binding, k, catalog, &mut required);
        }
    }
    for (name, kind) in &required {
        let _ = writeln!(out, "require ${name} : {}", kind.name());
    }

    out.push_str("\n[atomic-states]\n");
    for cmd in &d.commands {
        atomic(&mut out, cmd);
    }
    for s in &d.top_sensors {
        let _ = writeln!(out, "sensor {} : {} channel \"{}\"", s.id, s.sensor_type, s.channel);
    }
    for s in &d.states {
        state_line(&mut out, s);
    }
    let _ = writeln!(out, "diagram {}", d.name);

    out.push_str("\n[logical-states]\n");
    for node in &net.state_nodes {
        if let StateSource::Logical { op, inputs } = &node.source {
            let names: Vec<&str> = inputs.iter().map(|&i| net.state_nodes[i].id.as_str()).collect();
            let _ = writeln!(out, "logical {} = {}({})", node.id, op.keyword(), names.join(", "));
        }
    }

    out.push_str("\n[event-effects]\n");
    for h in &d.handlers {
        let target = match &h.effect {
            Effect::Start(t) | Effect::Stop(t) | Effect::Cancel(t) | Effect::Raise(t) => t.clone(),
            Effect::External(tag) => format!("{tag:?}"),
        };
        let _ = writeln!(
            out,
            "effect {} in {} : on {} {} -> {} {target}",
            h.id,
            h.scope,
            h.source,
            h.trigger.keyword(),
            h.effect.keyword()
        );
    }

    out.push_str("\n[start-wiring]\n");
    for cmd in &ix.commands {
        if let Command::Transaction(tx) = cmd {
            for a in &tx.auto_start {
                match &a.guard {
                    Some(g) => writeln!(out, "auto {} -> {} when {g}", tx.id, a.child),
                    None => writeln!(out, "auto {} -> {}", tx.id, a.child),
                }
                .expect("writing to a string");
            }
        }
    }
    for s in &d.starters {
        let _ = writeln!(out, "starter {} -> {}", s.id, s.targets.join(", "));
    }
    out
}

/// Post-order: a transaction's children are emitted before the transaction.
fn atomic(out: &mut String, cmd: &Command) {
    match cmd {
        Command::Runtime(rt) => {
            for a in &rt.actuators {
                let _ = writeln!(out, "actuator {} : {}", a.id, a.device_type);
                for s in &a.sensors {
                    let _ = writeln!(out, "sensor {} : {} of {} channel \"{}\"", s.id, s.sensor_type, a.id, s.channel);
                }
            }
            for a in &rt.actions {
                let _ = writeln!(out, "action {} : {}", a.id, a.action_type);
            }
            let _ = writeln!(
                out,
                "runtime {} = ({}, {})",
                rt.id,
                rt.actuators.first().map_or("", |a| a.id.as_str()),
                rt.actions.first().map_or("", |a| a.id.as_str())
            );
        }
        Command::Transaction(tx) => {
            for c in &tx.children {
                atomic(out, c);
            }
            let ids: Vec<&str> = tx.children.iter().map(Command::id).collect();
            let _ = writeln!(out, "transaction {} = [{}]", tx.id, ids.join(", "));
        }
        Command::Wait(w) => {
            let _ = writeln!(out, "wait {} = {}", w.id, w.duration_ticks);
        }
    }
    for s in cmd.states() {
        state_line(out, s);
    }
}

fn state_line(out: &mut String, s: &DeclaredState) {
    let kind = match &s.kind {
        StateKind::CommandStarted => "started".to_string(),
        StateKind::CommandCompleted => "completed".to_string(),
        StateKind::CommandCancelled => "cancelled".to_string(),
        StateKind::ActionProgressAtLeast { percent } => format!("progress >= {percent}%"),
        StateKind::SensorTrue => "true".to_string(),
        StateKind::SensorGreater { threshold } => format!("> {threshold}"),
        StateKind::SensorLess { threshold } => format!("< {threshold}"),
        StateKind::ActuatorError => "error".to_string(),
        StateKind::Raised => "raised".to_string(),
    };
    let _ = writeln!(out, "state {} = {} {kind}", s.id, s.owner);
}
