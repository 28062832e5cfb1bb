//! Domain types for command diagrams.
//!
//! A [`Diagram`] is the declarative description of one composite robot
//! command: runtime commands pairing an actuator with an action, transaction
//! commands grouping children, wait commands, the states they provide, the
//! logical states composed from them and the event handlers that schedule
//! everything. Values here are plain data; checking them against the rules
//! of the language is the job of [`crate::validate`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, SensorKind};

pub type Ident = String;

/// Location of an element in its source text.
///
/// Positions never participate in equality: a diagram compares equal to
/// its reprinted and reparsed form even though every element moved.
#[derive(Debug, Clone, Copy)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl Default for Pos {
    fn default() -> Self {
        Pos { line: 1, column: 1, length: 1 }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Pos) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Diagram {
    pub name: Ident,
    /// Source file name used in diagnostics. Not part of equality.
    pub file: String,
    pub pos: Pos,
    pub commands: Vec<Command>,
    pub starters: Vec<Starter>,
    pub top_sensors: Vec<Sensor>,
    /// States declared at diagram level (typically on top-level sensors).
    pub states: Vec<DeclaredState>,
    pub handlers: Vec<EventHandler>,
    pub logical_states: Vec<LogicalState>,
}

impl PartialEq for Diagram {
    fn eq(&self, other: &Diagram) -> bool {
        self.name == other.name
            && self.commands == other.commands
            && self.starters == other.starters
            && self.top_sensors == other.top_sensors
            && self.states == other.states
            && self.handlers == other.handlers
            && self.logical_states == other.logical_states
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Runtime(RuntimeCommand),
    Transaction(TransactionCommand),
    Wait(WaitCommand),
}

impl Command {
    pub fn id(&self) -> &str {
        match self {
            Command::Runtime(c) => &c.id,
            Command::Transaction(c) => &c.id,
            Command::Wait(c) => &c.id,
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Command::Runtime(c) => c.pos,
            Command::Transaction(c) => c.pos,
            Command::Wait(c) => c.pos,
        }
    }

    pub fn states(&self) -> &[DeclaredState] {
        match self {
            Command::Runtime(c) => &c.states,
            Command::Transaction(c) => &c.states,
            Command::Wait(c) => &c.states,
        }
    }

    pub fn children(&self) -> &[Command] {
        match self {
            Command::Transaction(c) => &c.children,
            _ => &[],
        }
    }

    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Runtime(_) => CommandKind::Runtime,
            Command::Transaction(_) => CommandKind::Transaction,
            Command::Wait(_) => CommandKind::Wait,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Root,
    Runtime,
    Transaction,
    Wait,
}

/// Pairs actuators with actions. Well-formed commands hold exactly one of
/// each; the lists exist so that malformed input can still be represented
/// and reported.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeCommand {
    pub id: Ident,
    pub pos: Pos,
    pub actuators: Vec<Actuator>,
    pub actions: Vec<Action>,
    pub states: Vec<DeclaredState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionCommand {
    pub id: Ident,
    pub pos: Pos,
    pub children: Vec<Command>,
    pub auto_start: Vec<AutoStart>,
    pub states: Vec<DeclaredState>,
}

/// A child started together with its transaction, optionally only once the
/// guard state is active.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoStart {
    pub child: Ident,
    pub guard: Option<Ident>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaitCommand {
    pub id: Ident,
    pub pos: Pos,
    pub duration_ticks: u64,
    pub states: Vec<DeclaredState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actuator {
    pub id: Ident,
    pub pos: Pos,
    pub device_type: String,
    pub config: Vec<Parameter>,
    pub sensors: Vec<Sensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub id: Ident,
    pub pos: Pos,
    pub action_type: String,
    pub params: Vec<Parameter>,
}

impl Action {
    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: Ident,
    pub pos: Pos,
    pub sensor_type: String,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredState {
    pub id: Ident,
    pub pos: Pos,
    pub owner: Ident,
    pub kind: StateKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    CommandStarted,
    CommandCompleted,
    CommandCancelled,
    ActionProgressAtLeast { percent: f64 },
    SensorTrue,
    SensorGreater { threshold: f64 },
    SensorLess { threshold: f64 },
    ActuatorError,
    /// Activated only by a `raise` effect.
    Raised,
}

impl StateKind {
    pub fn tag(&self) -> StateKindTag {
        match self {
            StateKind::CommandStarted => StateKindTag::CommandStarted,
            StateKind::CommandCompleted => StateKindTag::CommandCompleted,
            StateKind::CommandCancelled => StateKindTag::CommandCancelled,
            StateKind::ActionProgressAtLeast { .. } => StateKindTag::ActionProgressAtLeast,
            StateKind::SensorTrue => StateKindTag::SensorTrue,
            StateKind::SensorGreater { .. } => StateKindTag::SensorGreater,
            StateKind::SensorLess { .. } => StateKindTag::SensorLess,
            StateKind::ActuatorError => StateKindTag::ActuatorError,
            StateKind::Raised => StateKindTag::Raised,
        }
    }
}

/// Payload-free state kind, as named in catalogs and capability queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StateKindTag {
    CommandStarted,
    CommandCompleted,
    CommandCancelled,
    ActionProgressAtLeast,
    SensorTrue,
    SensorGreater,
    SensorLess,
    ActuatorError,
    Raised,
}

impl StateKindTag {
    pub const ALL: [StateKindTag; 9] = [
        StateKindTag::CommandStarted,
        StateKindTag::CommandCompleted,
        StateKindTag::CommandCancelled,
        StateKindTag::ActionProgressAtLeast,
        StateKindTag::SensorTrue,
        StateKindTag::SensorGreater,
        StateKindTag::SensorLess,
        StateKindTag::ActuatorError,
        StateKindTag::Raised,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalState {
    pub id: Ident,
    pub pos: Pos,
    pub op: LogicalOp,
    pub inputs: Vec<Ident>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalOp {
    And,
    Or,
    Not,
    /// Active from the first tick its input was active, forever after.
    Ever,
}

impl LogicalOp {
    pub fn keyword(self) -> &'static str {
        match self {
            LogicalOp::And => "and",
            LogicalOp::Or => "or",
            LogicalOp::Not => "not",
            LogicalOp::Ever => "ever",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventHandler {
    pub id: Ident,
    pub pos: Pos,
    /// Command owning the handler; the diagram name denotes the root.
    pub scope: Ident,
    pub source: Ident,
    pub trigger: Trigger,
    pub effect: Effect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Entered,
    FirstEntered,
    Left,
    FirstLeft,
}

impl Trigger {
    pub fn keyword(self) -> &'static str {
        match self {
            Trigger::Entered => "entered",
            Trigger::FirstEntered => "first_entered",
            Trigger::Left => "left",
            Trigger::FirstLeft => "first_left",
        }
    }

    pub fn is_first(self) -> bool {
        matches!(self, Trigger::FirstEntered | Trigger::FirstLeft)
    }

    pub fn on_enter(self) -> bool {
        matches!(self, Trigger::Entered | Trigger::FirstEntered)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Start(Ident),
    Stop(Ident),
    Cancel(Ident),
    Raise(Ident),
    External(String),
}

impl Effect {
    pub fn keyword(&self) -> &'static str {
        match self {
            Effect::Start(_) => "start",
            Effect::Stop(_) => "stop",
            Effect::Cancel(_) => "cancel",
            Effect::Raise(_) => "raise",
            Effect::External(_) => "external",
        }
    }

    /// Command targeted by start, stop or cancel.
    pub fn command_target(&self) -> Option<&str> {
        match self {
            Effect::Start(t) | Effect::Stop(t) | Effect::Cancel(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: Ident,
    pub pos: Pos,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Constant(Literal),
    Factory(FactoryCall),
    /// Late-bound: supplied when the generated template is instantiated.
    Variable(Ident),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoryCall {
    pub receiver: Option<Ident>,
    pub method: Ident,
    pub args: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Starter {
    pub id: Ident,
    pub pos: Pos,
    pub targets: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("identifier `{id}` declared twice (first at {first}, again at {second})")]
    DuplicateId { id: Ident, first: Pos, second: Pos },
    #[error("unknown entity `{0}`")]
    UnknownEntity(Ident),
    #[error("{kind:?} is not a state `{owner}` can provide")]
    IllegalState { owner: Ident, kind: StateKindTag },
}

/// Anything an identifier can name.
#[derive(Debug, Clone, Copy)]
pub enum Entity<'d> {
    Root,
    Command(&'d Command),
    Actuator(&'d Actuator),
    Action(&'d Action),
    Sensor(&'d Sensor),
    State(&'d DeclaredState),
    Logical(&'d LogicalState),
    Handler(&'d EventHandler),
    Starter(&'d Starter),
}

impl Entity<'_> {
    pub fn category(&self) -> &'static str {
        match self {
            Entity::Root => "diagram",
            Entity::Command(_) => "command",
            Entity::Actuator(_) => "actuator",
            Entity::Action(_) => "action",
            Entity::Sensor(_) => "sensor",
            Entity::State(_) => "state",
            Entity::Logical(_) => "logical state",
            Entity::Handler(_) => "handler",
            Entity::Starter(_) => "starter",
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(self, Entity::Root | Entity::Command(_))
    }

    pub fn is_state(&self) -> bool {
        matches!(self, Entity::State(_) | Entity::Logical(_))
    }
}

/// Identifier lookup over a diagram, built in one pass.
///
/// Walk order is the canonical declaration order used everywhere a
/// deterministic tie-breaker is needed: commands in pre-order, and within a
/// command its actuators, sensors, actions, children and finally its own
/// states.
pub struct Index<'d> {
    pub diagram: &'d Diagram,
    entities: HashMap<&'d str, (Entity<'d>, Pos)>,
    /// Command id → parent command id (top-level commands map to the root).
    parents: HashMap<&'d str, &'d str>,
    /// Commands in pre-order, root excluded.
    pub commands: Vec<&'d Command>,
    /// Declared states in canonical order.
    pub states: Vec<&'d DeclaredState>,
    /// Sensor → owning actuator (None for top-level sensors).
    pub sensor_owner: HashMap<&'d str, Option<&'d Actuator>>,
    /// Action/actuator → runtime command holding it.
    pub holder: HashMap<&'d str, &'d str>,
    pub duplicates: Vec<ModelError>,
}

impl<'d> Index<'d> {
    pub fn new(diagram: &'d Diagram) -> Index<'d> {
        let mut ix = Index {
            diagram,
            entities: HashMap::new(),
            parents: HashMap::new(),
            commands: Vec::new(),
            states: Vec::new(),
            sensor_owner: HashMap::new(),
            holder: HashMap::new(),
            duplicates: Vec::new(),
        };
        ix.insert(&diagram.name, Entity::Root, diagram.pos);
        for starter in &diagram.starters {
            ix.insert(&starter.id, Entity::Starter(starter), starter.pos);
        }
        for cmd in &diagram.commands {
            ix.walk_command(cmd, &diagram.name);
        }
        for sensor in &diagram.top_sensors {
            ix.insert(&sensor.id, Entity::Sensor(sensor), sensor.pos);
            ix.sensor_owner.insert(&sensor.id, None);
        }
        for state in &diagram.states {
            ix.insert(&state.id, Entity::State(state), state.pos);
            ix.states.push(state);
        }
        for logical in &diagram.logical_states {
            ix.insert(&logical.id, Entity::Logical(logical), logical.pos);
        }
        for handler in &diagram.handlers {
            ix.insert(&handler.id, Entity::Handler(handler), handler.pos);
        }
        ix
    }

    fn insert(&mut self, id: &'d str, entity: Entity<'d>, pos: Pos) {
        if let Some((_, first)) = self.entities.get(id) {
            self.duplicates.push(ModelError::DuplicateId {
                id: id.to_string(),
                first: *first,
                second: pos,
            });
            return;
        }
        self.entities.insert(id, (entity, pos));
    }

    fn walk_command(&mut self, cmd: &'d Command, parent: &'d str) {
        self.insert(cmd.id(), Entity::Command(cmd), cmd.pos());
        self.parents.insert(cmd.id(), parent);
        self.commands.push(cmd);
        match cmd {
            Command::Runtime(rt) => {
                for act in &rt.actuators {
                    self.insert(&act.id, Entity::Actuator(act), act.pos);
                    self.holder.insert(&act.id, &rt.id);
                    for s in &act.sensors {
                        self.insert(&s.id, Entity::Sensor(s), s.pos);
                        self.sensor_owner.insert(&s.id, Some(act));
                    }
                }
                for a in &rt.actions {
                    self.insert(&a.id, Entity::Action(a), a.pos);
                    self.holder.insert(&a.id, &rt.id);
                }
            }
            Command::Transaction(tx) => {
                for child in &tx.children {
                    self.walk_command(child, &tx.id);
                }
            }
            Command::Wait(_) => {}
        }
        for state in cmd.states() {
            self.insert(&state.id, Entity::State(state), state.pos);
            self.states.push(state);
        }
    }

    pub fn get(&self, id: &str) -> Option<Entity<'d>> {
        self.entities.get(id).map(|(e, _)| *e)
    }

    pub fn pos_of(&self, id: &str) -> Option<Pos> {
        self.entities.get(id).map(|(_, p)| *p)
    }

    pub fn command(&self, id: &str) -> Option<&'d Command> {
        match self.get(id) {
            Some(Entity::Command(c)) => Some(c),
            _ => None,
        }
    }

    pub fn is_root(&self, id: &str) -> bool {
        matches!(self.get(id), Some(Entity::Root))
    }

    pub fn parent(&self, command: &str) -> Option<&'d str> {
        self.parents.get(command).copied()
    }

    /// Direct children of a command id, or the top-level commands for the root.
    pub fn children(&self, id: &str) -> &'d [Command] {
        if self.is_root(id) {
            return &self.diagram.commands;
        }
        self.command(id).map(|c| c.children()).unwrap_or(&[])
    }

    /// True if `candidate` is `ancestor` or lies beneath it.
    pub fn is_descendant_or_self(&self, candidate: &str, ancestor: &str) -> bool {
        let mut cur = candidate;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

impl Diagram {
    /// Single-pass identifier uniqueness check.
    pub fn check_unique_ids(&self) -> Result<(), Vec<ModelError>> {
        let ix = Index::new(self);
        if ix.duplicates.is_empty() {
            Ok(())
        } else {
            Err(ix.duplicates)
        }
    }

    /// Every parameter binding in canonical order, with the entity it sits on.
    pub fn parameters(&self) -> Vec<(&str, &Parameter)> {
        let mut out = Vec::new();
        fn walk<'a>(cmd: &'a Command, out: &mut Vec<(&'a str, &'a Parameter)>) {
            match cmd {
                Command::Runtime(rt) => {
                    for act in &rt.actuators {
                        out.extend(act.config.iter().map(|p| (act.id.as_str(), p)));
                    }
                    for a in &rt.actions {
                        out.extend(a.params.iter().map(|p| (a.id.as_str(), p)));
                    }
                }
                Command::Transaction(tx) => tx.children.iter().for_each(|c| walk(c, out)),
                Command::Wait(_) => {}
            }
        }
        self.commands.iter().for_each(|c| walk(c, &mut out));
        out
    }
}

impl Binding {
    /// Variable names occurring in this binding, including inside factory arguments.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Binding::Constant(_) => Vec::new(),
            Binding::Variable(v) => vec![v.as_str()],
            Binding::Factory(call) => call.args.iter().flat_map(|a| a.variables()).collect(),
        }
    }
}

/// State kinds a diagram entity may provide, in a fixed order.
///
/// Commands provide their lifecycle states and raised states; actions and
/// actuators provide what their catalog entry lists; sensors provide the
/// direct value state when boolean and the two threshold comparisons when
/// real.
pub fn provided_states(
    diagram: &Diagram,
    catalog: &Catalog,
    entity: &str,
) -> Result<Vec<StateKindTag>, ModelError> {
    let ix = Index::new(diagram);
    provided_states_in(&ix, catalog, entity)
}

pub(crate) fn provided_states_in(
    ix: &Index<'_>,
    catalog: &Catalog,
    entity: &str,
) -> Result<Vec<StateKindTag>, ModelError> {
    use StateKindTag::*;
    let kinds = match ix.get(entity) {
        Some(Entity::Root) | Some(Entity::Command(_)) => {
            vec![CommandStarted, CommandCompleted, CommandCancelled, Raised]
        }
        Some(Entity::Action(a)) => catalog
            .action_types
            .get(&a.action_type)
            .map(|t| t.provides.clone())
            .unwrap_or_default(),
        Some(Entity::Actuator(a)) => catalog
            .device_types
            .get(&a.device_type)
            .map(|t| t.states.clone())
            .unwrap_or_default(),
        Some(Entity::Sensor(s)) => match sensor_kind(ix, catalog, s) {
            Some(SensorKind::Boolean) => vec![SensorTrue],
            Some(SensorKind::Real) => vec![SensorGreater, SensorLess],
            None => Vec::new(),
        },
        _ => return Err(ModelError::UnknownEntity(entity.to_string())),
    };
    Ok(kinds)
}

/// Value kind of a sensor according to the catalog entry of its type.
pub(crate) fn sensor_kind(ix: &Index<'_>, catalog: &Catalog, sensor: &Sensor) -> Option<SensorKind> {
    match ix.sensor_owner.get(sensor.id.as_str()) {
        Some(Some(actuator)) => catalog
            .device_types
            .get(&actuator.device_type)?
            .sensors
            .iter()
            .find(|s| s.sensor_type == sensor.sensor_type)
            .map(|s| s.kind),
        _ => catalog.sensor_types.get(&sensor.sensor_type).map(|t| t.kind),
    }
}

/// Decides whether a state of `kind` may be declared on `owner`.
///
/// Written as a direct rule per owner category rather than a membership test
/// on [`provided_states`], so the two can be checked against each other.
pub fn check_state_owner(
    diagram: &Diagram,
    catalog: &Catalog,
    owner: &str,
    kind: StateKindTag,
) -> Result<(), ModelError> {
    let ix = Index::new(diagram);
    check_state_owner_in(&ix, catalog, owner, kind)
}

pub(crate) fn check_state_owner_in(
    ix: &Index<'_>,
    catalog: &Catalog,
    owner: &str,
    kind: StateKindTag,
) -> Result<(), ModelError> {
    use StateKindTag::*;
    let entity = ix
        .get(owner)
        .ok_or_else(|| ModelError::UnknownEntity(owner.to_string()))?;
    let legal = match (entity, kind) {
        (Entity::Root | Entity::Command(_), CommandStarted | CommandCompleted | CommandCancelled | Raised) => true,
        (Entity::Action(a), ActionProgressAtLeast) => catalog
            .action_types
            .get(&a.action_type)
            .is_some_and(|t| t.provides.contains(&kind)),
        (Entity::Actuator(a), ActuatorError) => catalog
            .device_types
            .get(&a.device_type)
            .is_some_and(|t| t.states.contains(&kind)),
        (Entity::Sensor(s), SensorTrue) => sensor_kind(ix, catalog, s) == Some(SensorKind::Boolean),
        (Entity::Sensor(s), SensorGreater | SensorLess) => {
            sensor_kind(ix, catalog, s) == Some(SensorKind::Real)
        }
        (Entity::Root | Entity::Command(_) | Entity::Action(_) | Entity::Actuator(_) | Entity::Sensor(_), _) => false,
        _ => return Err(ModelError::UnknownEntity(owner.to_string())),
    };
    if legal {
        Ok(())
    } else {
        Err(ModelError::IllegalState { owner: owner.to_string(), kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const SRC: &str = r#"
diagram D {
    starter s0 -> tx;
    transaction tx {
        runtime move {
            actuator arm: LWR;
            sensor fx: ForceX on arm channel "arm.fx";
            sensor touch: TorqueReached on arm channel "arm.touch";
            action lin: LIN(start = "a", goal = "b", duration_ticks = 10);
            state half: ProgressAtLeast(50) on lin;
        }
        runtime out {
            actuator port: DigitalOutput;
            action set: SetDigitalValue(channel = "o", value = true);
        }
        start move;
    }
}
"#;

    fn diagram() -> Diagram {
        parse(SRC, "t.gsr").expect("fixture parses")
    }

    #[test]
    fn provided_states_per_category() {
        let d = diagram();
        let cat = Catalog::builtin();
        use StateKindTag::*;
        assert_eq!(provided_states(&d, cat, "lin").unwrap(), vec![ActionProgressAtLeast]);
        assert_eq!(provided_states(&d, cat, "touch").unwrap(), vec![SensorTrue]);
        assert_eq!(provided_states(&d, cat, "fx").unwrap(), vec![SensorGreater, SensorLess]);
        assert!(provided_states(&d, cat, "arm").unwrap().contains(&ActuatorError));
        assert!(provided_states(&d, cat, "set").unwrap().is_empty());
        assert_eq!(
            provided_states(&d, cat, "tx").unwrap(),
            vec![CommandStarted, CommandCompleted, CommandCancelled, Raised]
        );
        assert_eq!(
            provided_states(&d, cat, "nope"),
            Err(ModelError::UnknownEntity("nope".into()))
        );
    }

    #[test]
    fn construction_agrees_with_provided_states() {
        let d = diagram();
        let cat = Catalog::builtin();
        let owners = ["D", "tx", "move", "out", "arm", "port", "fx", "touch", "lin", "set"];
        for owner in owners {
            let provided = provided_states(&d, cat, owner).unwrap();
            for kind in StateKindTag::ALL {
                let ok = check_state_owner(&d, cat, owner, kind).is_ok();
                assert_eq!(ok, provided.contains(&kind), "{owner} / {kind:?}");
            }
        }
    }

    #[test]
    fn duplicate_ids_report_both_sites() {
        let mut d = diagram();
        let mut dup = d.states[..].to_vec();
        dup.push(DeclaredState {
            id: "fx".into(),
            pos: Pos { line: 40, column: 2, length: 2 },
            owner: "tx".into(),
            kind: StateKind::CommandStarted,
        });
        d.states = dup;
        let errs = d.check_unique_ids().unwrap_err();
        match &errs[0] {
            ModelError::DuplicateId { id, first, second } => {
                assert_eq!(id, "fx");
                assert_eq!(first.line, 7);
                assert_eq!(second.line, 40);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn descendant_relation() {
        let d = diagram();
        let ix = Index::new(&d);
        assert!(ix.is_descendant_or_self("move", "tx"));
        assert!(ix.is_descendant_or_self("move", "D"));
        assert!(ix.is_descendant_or_self("tx", "tx"));
        assert!(!ix.is_descendant_or_self("tx", "move"));
        assert_eq!(ix.children("D").len(), 1);
    }

    #[test]
    fn positions_do_not_affect_equality() {
        let a = diagram();
        let mut b = a.clone();
        b.pos = Pos { line: 99, column: 9, length: 4 };
        b.file = "elsewhere.gsr".into();
        assert_eq!(a, b);
    }
}
