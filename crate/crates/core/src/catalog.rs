//! Capability catalog: which devices, sensors, actions and factory calls
//! exist, and what they accept and provide.
//!
//! The catalog stands in for reflecting over a live robotics runtime. It is
//! loaded from a JSON document (see `catalog/default.json` for the shipped
//! one) and is immutable afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Command, Diagram, Literal, StateKindTag};

const BUILTIN: &str = include_str!("../catalog/default.json");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(default)]
    pub device_types: BTreeMap<String, DeviceType>,
    /// Sensor types that can be declared at diagram level.
    #[serde(default)]
    pub sensor_types: BTreeMap<String, SensorType>,
    #[serde(default)]
    pub action_types: BTreeMap<String, ActionType>,
    #[serde(default)]
    pub factories: BTreeMap<String, Factory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceType {
    #[serde(default)]
    pub sensors: Vec<DeviceSensor>,
    #[serde(default)]
    pub states: Vec<StateKindTag>,
    #[serde(default)]
    pub config: Vec<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSensor {
    pub sensor_type: String,
    pub factory: String,
    pub kind: SensorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorType {
    pub kind: SensorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Boolean,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionType {
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub provides: Vec<StateKindTag>,
    /// Integer parameter giving the duration in ticks; absent for
    /// instantaneous actions.
    #[serde(default)]
    pub duration_param: Option<String>,
    /// Ticks a cancelled execution needs to come to rest, unless the action
    /// sets a `brake_ticks` parameter.
    #[serde(default)]
    pub brake_ticks: u64,
    /// Set for actions that write a digital output when they complete.
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ActionType {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub channel_param: String,
    pub value_param: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ValueKind,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub default: Option<Literal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Integer,
    Real,
    Boolean,
    String,
    /// Robot pose; opaque string literal.
    Frame,
    RealSensor,
    BooleanSensor,
    State,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Boolean => "boolean",
            ValueKind::String => "string",
            ValueKind::Frame => "frame",
            ValueKind::RealSensor => "real_sensor",
            ValueKind::BooleanSensor => "boolean_sensor",
            ValueKind::State => "state",
        }
    }

    pub fn from_name(name: &str) -> Option<ValueKind> {
        [
            ValueKind::Integer,
            ValueKind::Real,
            ValueKind::Boolean,
            ValueKind::String,
            ValueKind::Frame,
            ValueKind::RealSensor,
            ValueKind::BooleanSensor,
            ValueKind::State,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }

    /// Whether a literal can be bound where this kind is expected.
    pub fn accepts(self, literal: &Literal) -> bool {
        matches!(
            (self, literal),
            (ValueKind::Integer, Literal::Int(_))
                | (ValueKind::Real, Literal::Int(_) | Literal::Real(_))
                | (ValueKind::Boolean, Literal::Bool(_))
                | (ValueKind::String | ValueKind::Frame, Literal::Str(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factory {
    pub owner: FactoryOwner,
    #[serde(default)]
    pub args: Vec<ValueKind>,
    pub returns: ValueKind,
}

/// What a factory is called on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactoryOwner {
    Device(String),
    Action(String),
    Sensor(SensorKind),
    Global,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("catalog schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl CatalogError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> CatalogError {
        CatalogError::Schema { path: path.into(), message: message.into() }
    }
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| load_catalog(BUILTIN).expect("built-in catalog is valid"))
    }
}

/// Parses and checks a catalog document.
pub fn load_catalog(document: &str) -> Result<Catalog, CatalogError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let catalog: Catalog = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CatalogError::at(path, e.into_inner().to_string())
    })?;
    check(&catalog)?;
    Ok(catalog)
}

fn check(cat: &Catalog) -> Result<(), CatalogError> {
    for (name, dev) in &cat.device_types {
        for (i, kind) in dev.states.iter().enumerate() {
            if *kind != StateKindTag::ActuatorError {
                return Err(CatalogError::at(
                    format!("device_types.{name}.states[{i}]"),
                    format!("{kind:?} is not an actuator state"),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, s) in dev.sensors.iter().enumerate() {
            if !seen.insert(&s.sensor_type) {
                return Err(CatalogError::at(
                    format!("device_types.{name}.sensors[{i}]"),
                    format!("sensor type `{}` listed twice", s.sensor_type),
                ));
            }
        }
        check_params(&dev.config, &format!("device_types.{name}.config"))?;
    }
    for (name, act) in &cat.action_types {
        let base = format!("action_types.{name}");
        for (i, kind) in act.provides.iter().enumerate() {
            if *kind != StateKindTag::ActionProgressAtLeast {
                return Err(CatalogError::at(
                    format!("{base}.provides[{i}]"),
                    format!("{kind:?} is not an action state"),
                ));
            }
        }
        check_params(&act.params, &format!("{base}.params"))?;
        if let Some(p) = &act.duration_param {
            match act.param(p) {
                Some(spec) if spec.kind == ValueKind::Integer => {}
                _ => {
                    return Err(CatalogError::at(
                        format!("{base}.duration_param"),
                        format!("`{p}` is not an integer parameter of {name}"),
                    ))
                }
            }
        }
        if let Some(out) = &act.output {
            for (field, p, kind) in [
                ("channel_param", &out.channel_param, ValueKind::String),
                ("value_param", &out.value_param, ValueKind::Boolean),
            ] {
                if act.param(p).map(|s| s.kind) != Some(kind) {
                    return Err(CatalogError::at(
                        format!("{base}.output.{field}"),
                        format!("`{p}` is not a {} parameter of {name}", kind.name()),
                    ));
                }
            }
        }
    }
    for (name, f) in &cat.factories {
        let missing = match &f.owner {
            FactoryOwner::Device(d) => !cat.device_types.contains_key(d),
            FactoryOwner::Action(a) => !cat.action_types.contains_key(a),
            _ => false,
        };
        if missing {
            return Err(CatalogError::at(
                format!("factories.{name}.owner"),
                "owner type is not in the catalog",
            ));
        }
    }
    Ok(())
}

fn check_params(params: &[ParamSpec], path: &str) -> Result<(), CatalogError> {
    let mut seen = BTreeSet::new();
    for (i, p) in params.iter().enumerate() {
        if !seen.insert(&p.name) {
            return Err(CatalogError::at(
                format!("{path}[{i}].name"),
                format!("parameter `{}` listed twice", p.name),
            ));
        }
        if let Some(d) = &p.default {
            if !p.kind.accepts(d) {
                return Err(CatalogError::at(
                    format!("{path}[{i}].default"),
                    format!("default does not fit kind {}", p.kind.name()),
                ));
            }
        }
    }
    Ok(())
}

/// A factory offered for a needed value kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub factory: String,
    /// 1: callable on an entity already in the diagram; 2: callable on an
    /// entity the diagram's devices can provide; 3: global.
    pub tier: u8,
    pub owner: FactoryOwner,
    pub args: Vec<ValueKind>,
    pub returns: ValueKind,
}

/// Ranks catalog factories returning `needed` by how close their owner is
/// to what the diagram already uses. Factories on types the diagram cannot
/// reach are left out. Ties are broken by name.
pub fn suggest(catalog: &Catalog, needed: ValueKind, context: &Diagram) -> Vec<Suggestion> {
    let mut devices = BTreeSet::new();
    let mut actions = BTreeSet::new();
    let mut declared_sensor_kinds = BTreeSet::new();

    let mut record_sensor = |sensor_type: &str, owner_device: Option<&str>| {
        let kind = match owner_device {
            Some(dev) => catalog
                .device_types
                .get(dev)
                .and_then(|d| d.sensors.iter().find(|s| s.sensor_type == sensor_type))
                .map(|s| s.kind),
            None => catalog.sensor_types.get(sensor_type).map(|t| t.kind),
        };
        if let Some(k) = kind {
            declared_sensor_kinds.insert(k);
        }
    };
    fn walk<'a>(
        cmd: &'a Command,
        devices: &mut BTreeSet<&'a str>,
        actions: &mut BTreeSet<&'a str>,
        sensors: &mut Vec<(&'a str, Option<&'a str>)>,
    ) {
        match cmd {
            Command::Runtime(rt) => {
                for a in &rt.actuators {
                    devices.insert(&a.device_type);
                    for s in &a.sensors {
                        sensors.push((&s.sensor_type, Some(&a.device_type)));
                    }
                }
                for a in &rt.actions {
                    actions.insert(&a.action_type);
                }
            }
            Command::Transaction(tx) => {
                for c in &tx.children {
                    walk(c, devices, actions, sensors);
                }
            }
            Command::Wait(_) => {}
        }
    }
    let mut sensors = Vec::new();
    for cmd in &context.commands {
        walk(cmd, &mut devices, &mut actions, &mut sensors);
    }
    for s in &context.top_sensors {
        sensors.push((&s.sensor_type, None));
    }
    for (ty, dev) in sensors {
        record_sensor(ty, dev);
    }
    let producible: BTreeSet<SensorKind> = devices
        .iter()
        .filter_map(|d| catalog.device_types.get(*d))
        .flat_map(|d| d.sensors.iter().map(|s| s.kind))
        .collect();

    let mut out: Vec<Suggestion> = catalog
        .factories
        .iter()
        .filter(|(_, f)| f.returns == needed)
        .filter_map(|(name, f)| {
            let tier = match &f.owner {
                FactoryOwner::Device(d) if devices.contains(d.as_str()) => 1,
                FactoryOwner::Action(a) if actions.contains(a.as_str()) => 1,
                FactoryOwner::Sensor(k) if declared_sensor_kinds.contains(k) => 1,
                FactoryOwner::Sensor(k) if producible.contains(k) => 2,
                FactoryOwner::Global => 3,
                _ => return None,
            };
            Some(Suggestion {
                factory: name.clone(),
                tier,
                owner: f.owner.clone(),
                args: f.args.clone(),
                returns: f.returns,
            })
        })
        .collect();
    out.sort_by(|a, b| (a.tier, &a.factory).cmp(&(b.tier, &b.factory)));
    out
}
