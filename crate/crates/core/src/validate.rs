//! Well-formedness rules for diagrams.
//!
//! | code | rule |
//! |------|------|
//! | V1  | the diagram contains at least one command |
//! | V1b | (warning) a transaction has no children |
//! | V2  | at least one starter names at least one command |
//! | V3  | a runtime command holds exactly one actuator and one action |
//! | V4  | starter targets are top-level commands |
//! | V5  | `start` targets a direct child of the handler's scope |
//! | V6  | `stop`/`cancel` target the handler's scope or a descendant |
//! | V7  | logical states have legal arity and no cycles |
//! | V8  | entities, parameters and states conform to the catalog |
//! | V9  | factory calls resolve in the catalog and return the right kind |
//! | V10 | variable names are unique |
//! | V11 | every referenced identifier resolves to the right category |
//! | W1  | (warning) a command can never be started |
//! | W2  | (warning) a handler watches a state that can never change |

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::catalog::{Catalog, FactoryOwner, ParamSpec, ValueKind};
use crate::dsl::{Diagnostic, SourceSpan};
use crate::model::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    pub is_valid: bool,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    /// Distinct codes of error diagnostics, in first-seen order.
    pub fn error_codes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for d in self.errors() {
            if !out.contains(&d.code.as_str()) {
                out.push(&d.code);
            }
        }
        out
    }
}

pub fn validate(diagram: &Diagram, catalog: &Catalog) -> ValidationReport {
    let ix = Index::new(diagram);
    let mut v = Validator {
        ix: &ix,
        catalog,
        file: if diagram.file.is_empty() { "<memory>" } else { &diagram.file },
        out: Vec::new(),
    };
    v.run();
    let is_valid = !v.out.iter().any(Diagnostic::is_error);
    ValidationReport { diagnostics: v.out, is_valid }
}

struct Validator<'a, 'd> {
    ix: &'a Index<'d>,
    catalog: &'a Catalog,
    file: &'a str,
    out: Vec<Diagnostic>,
}

impl<'d> Validator<'_, 'd> {
    fn err(&mut self, code: &str, pos: Pos, message: String) {
        self.out.push(Diagnostic::error(code, message, SourceSpan::new(self.file, pos)));
    }

    fn warn(&mut self, code: &str, pos: Pos, message: String) {
        self.out.push(Diagnostic::warning(code, message, SourceSpan::new(self.file, pos)));
    }

    fn run(&mut self) {
        let d = self.ix.diagram;
        for dup in self.ix.duplicates.clone() {
            if let ModelError::DuplicateId { second, .. } = &dup {
                self.err("V11", *second, dup.to_string());
            }
        }

        if d.commands.is_empty() {
            self.err("V1", d.pos, "a diagram needs at least one command".into());
        } else if !d.starters.iter().any(|s| !s.targets.is_empty()) {
            self.err("V2", d.pos, "a diagram needs at least one starter naming a command".into());
        }

        for cmd in self.ix.commands.clone() {
            self.check_command(cmd);
        }
        for starter in &d.starters {
            for target in &starter.targets {
                match self.ix.get(target) {
                    None => self.err("V11", starter.pos, format!("starter `{}` names unknown command `{target}`", starter.id)),
                    Some(Entity::Command(_)) if self.ix.parent(target) == Some(d.name.as_str()) => {}
                    Some(Entity::Command(_)) => self.err(
                        "V4",
                        starter.pos,
                        format!("starter `{}` targets `{target}`, which is nested inside `{}`", starter.id, self.ix.parent(target).unwrap_or("?")),
                    ),
                    Some(e) => self.err("V11", starter.pos, format!("starter `{}` targets `{target}`, which is a {}", starter.id, e.category())),
                }
            }
        }
        for sensor in &d.top_sensors {
            if !self.catalog.sensor_types.contains_key(&sensor.sensor_type) {
                self.err("V8", sensor.pos, format!("sensor type `{}` cannot be declared at diagram level", sensor.sensor_type));
            }
        }
        for state in self.ix.states.clone() {
            self.check_state(state);
        }
        self.check_logical();
        for h in &d.handlers {
            self.check_handler(h);
        }
        self.check_parameters();
        self.check_reachability();
    }

    fn check_command(&mut self, cmd: &'d Command) {
        match cmd {
            Command::Runtime(rt) => {
                if rt.actuators.len() != 1 || rt.actions.len() != 1 {
                    self.err(
                        "V3",
                        rt.pos,
                        format!(
                            "runtime command `{}` must hold exactly one actuator and one action (has {} and {})",
                            rt.id,
                            rt.actuators.len(),
                            rt.actions.len()
                        ),
                    );
                }
                for act in &rt.actuators {
                    match self.catalog.device_types.get(&act.device_type) {
                        None => self.err("V8", act.pos, format!("unknown device type `{}`", act.device_type)),
                        Some(dev) => {
                            self.check_params(&act.id, act.pos, &act.config, &dev.config);
                            for s in &act.sensors {
                                if !dev.sensors.iter().any(|c| c.sensor_type == s.sensor_type) {
                                    self.err(
                                        "V8",
                                        s.pos,
                                        format!("device type `{}` has no `{}` sensor", act.device_type, s.sensor_type),
                                    );
                                }
                            }
                        }
                    }
                }
                for a in &rt.actions {
                    match self.catalog.action_types.get(&a.action_type) {
                        None => self.err("V8", a.pos, format!("unknown action type `{}`", a.action_type)),
                        Some(t) => self.check_params(&a.id, a.pos, &a.params, &t.params),
                    }
                }
            }
            Command::Transaction(tx) => {
                if tx.children.is_empty() {
                    self.warn("V1b", tx.pos, format!("transaction `{}` has no children", tx.id));
                }
                for auto in &tx.auto_start {
                    if !tx.children.iter().any(|c| c.id() == auto.child) {
                        self.err("V11", auto.pos, format!("`{}` is not a child of transaction `{}`", auto.child, tx.id));
                    }
                    if let Some(g) = &auto.guard {
                        self.expect_state(g, auto.pos, "start guard");
                    }
                }
            }
            Command::Wait(_) => {}
        }
    }

    fn check_params(&mut self, owner: &str, pos: Pos, given: &[Parameter], specs: &[ParamSpec]) {
        for p in given {
            match specs.iter().find(|s| s.name == p.name) {
                None => self.err("V8", p.pos, format!("`{owner}` has no parameter `{}`", p.name)),
                Some(spec) => {
                    if let Binding::Constant(lit) = &p.binding {
                        if !spec.kind.accepts(lit) {
                            self.err(
                                "V8",
                                p.pos,
                                format!("parameter `{owner}.{}` expects a {} value", p.name, spec.kind.name()),
                            );
                        }
                    }
                }
            }
        }
        for spec in specs.iter().filter(|s| s.required) {
            if !given.iter().any(|p| p.name == spec.name) {
                self.err("V8", pos, format!("`{owner}` is missing required parameter `{}`", spec.name));
            }
        }
    }

    fn check_state(&mut self, state: &'d DeclaredState) {
        match check_state_owner_in(self.ix, self.catalog, &state.owner, state.kind.tag()) {
            Ok(()) => {}
            Err(ModelError::UnknownEntity(o)) => {
                self.err("V11", state.pos, format!("state `{}` is declared on unknown or unsuitable `{o}`", state.id))
            }
            Err(e) => self.err("V8", state.pos, format!("state `{}`: {e}", state.id)),
        }
    }

    fn expect_state(&mut self, id: &str, pos: Pos, role: &str) -> bool {
        match self.ix.get(id) {
            Some(e) if e.is_state() => true,
            Some(e) => {
                self.err("V11", pos, format!("{role} `{id}` is a {}, not a state", e.category()));
                false
            }
            None => {
                self.err("V11", pos, format!("{role} `{id}` does not resolve"));
                false
            }
        }
    }

    fn check_logical(&mut self) {
        let d = self.ix.diagram;
        for l in &d.logical_states {
            let arity_ok = match l.op {
                LogicalOp::Not | LogicalOp::Ever => l.inputs.len() == 1,
                LogicalOp::And | LogicalOp::Or => l.inputs.len() >= 2,
            };
            if !arity_ok {
                self.err(
                    "V7",
                    l.pos,
                    format!("`{}` takes {} inputs, `{}` has {}", l.op.keyword(), if matches!(l.op, LogicalOp::Not | LogicalOp::Ever) { "exactly 1" } else { "at least 2" }, l.id, l.inputs.len()),
                );
            }
            for input in &l.inputs {
                self.expect_state(input, l.pos, "logical input");
            }
        }
        // Cycle detection over logical → logical edges.
        let logical: HashMap<&str, &LogicalState> = d.logical_states.iter().map(|l| (l.id.as_str(), l)).collect();
        let mut reported = HashSet::new();
        for l in &d.logical_states {
            if reported.contains(l.id.as_str()) {
                continue;
            }
            if let Some(cycle) = find_cycle(&l.id, &logical) {
                for id in &cycle {
                    reported.insert(*id);
                }
                self.err("V7", l.pos, format!("logical states form a cycle: {}", cycle.join(" -> ")));
            }
        }
    }

    fn check_handler(&mut self, h: &'d EventHandler) {
        let scope_ok = match self.ix.get(&h.scope) {
            Some(e) if e.is_command() => true,
            _ => {
                self.err("V11", h.pos, format!("handler `{}` scope `{}` is not a command", h.id, h.scope));
                false
            }
        };
        self.expect_state(&h.source, h.pos, "handler source");
        match &h.effect {
            Effect::Start(t) | Effect::Stop(t) | Effect::Cancel(t) => {
                match self.ix.get(t) {
                    Some(Entity::Command(_)) | Some(Entity::Root) => {}
                    Some(e) => {
                        self.err("V11", h.pos, format!("handler `{}` targets `{t}`, which is a {}", h.id, e.category()));
                        return;
                    }
                    None => {
                        self.err("V11", h.pos, format!("handler `{}` targets unknown command `{t}`", h.id));
                        return;
                    }
                }
                if !scope_ok {
                    return;
                }
                if let Effect::Start(_) = h.effect {
                    if !self.ix.children(&h.scope).iter().any(|c| c.id() == t) {
                        self.err(
                            "V5",
                            h.pos,
                            format!("handler `{}` may only start children of `{}`; `{t}` is not one", h.id, h.scope),
                        );
                    }
                } else if !self.ix.is_descendant_or_self(t, &h.scope) {
                    self.err(
                        "V6",
                        h.pos,
                        format!("handler `{}` may only {} `{}` or its descendants; `{t}` is outside", h.id, h.effect.keyword(), h.scope),
                    );
                }
            }
            Effect::Raise(t) => match self.ix.get(t) {
                Some(Entity::State(s)) if s.kind == StateKind::Raised && s.owner == h.scope => {}
                Some(Entity::State(_)) | Some(Entity::Logical(_)) => self.err(
                    "V8",
                    h.pos,
                    format!("handler `{}` can only raise a `Raised` state declared on `{}`", h.id, h.scope),
                ),
                Some(e) => self.err("V11", h.pos, format!("raise target `{t}` is a {}, not a state", e.category())),
                None => self.err("V11", h.pos, format!("raise target `{t}` does not resolve")),
            },
            Effect::External(_) => {}
        }
    }

    fn check_parameters(&mut self) {
        let mut seen: HashMap<String, Pos> = HashMap::new();
        for (owner, p) in self.ix.diagram.parameters() {
            for var in p.binding.variables() {
                if let Some(first) = seen.get(var) {
                    self.err("V10", p.pos, format!("variable `${var}` already used at {first}"));
                } else {
                    seen.insert(var.to_string(), p.pos);
                }
            }
            if let Binding::Factory(call) = &p.binding {
                let expected = self.param_kind(owner, &p.name);
                self.check_factory(call, expected, p.pos);
            }
        }
    }

    fn param_kind(&self, owner: &str, param: &str) -> Option<ValueKind> {
        let specs = match self.ix.get(owner)? {
            Entity::Action(a) => &self.catalog.action_types.get(&a.action_type)?.params,
            Entity::Actuator(a) => &self.catalog.device_types.get(&a.device_type)?.config,
            _ => return None,
        };
        specs.iter().find(|s| s.name == param).map(|s| s.kind)
    }

    fn check_factory(&mut self, call: &FactoryCall, expected: Option<ValueKind>, pos: Pos) {
        let Some(f) = self.catalog.factories.get(&call.method) else {
            self.err("V9", pos, format!("factory `{}` is not in the catalog", call.method));
            return;
        };
        let receiver_ok = match (&f.owner, &call.receiver) {
            (FactoryOwner::Global, None) => true,
            (FactoryOwner::Global, Some(_)) | (_, None) => false,
            (owner, Some(r)) => match (owner, self.ix.get(r)) {
                (FactoryOwner::Device(t), Some(Entity::Actuator(a))) => &a.device_type == t,
                (FactoryOwner::Action(t), Some(Entity::Action(a))) => &a.action_type == t,
                (FactoryOwner::Sensor(k), Some(Entity::Sensor(s))) => {
                    sensor_kind(self.ix, self.catalog, s) == Some(*k)
                }
                _ => false,
            },
        };
        if !receiver_ok {
            self.err("V9", pos, format!("`{}` cannot be called on {}", call.method, call.receiver.as_deref().map_or("nothing".to_string(), |r| format!("`{r}`"))));
        }
        if call.args.len() != f.args.len() {
            self.err("V9", pos, format!("`{}` takes {} arguments, got {}", call.method, f.args.len(), call.args.len()));
        } else {
            for (arg, kind) in call.args.iter().zip(f.args.clone()) {
                match arg {
                    Binding::Constant(lit) if !kind.accepts(lit) => {
                        self.err("V9", pos, format!("argument of `{}` expects a {} value", call.method, kind.name()))
                    }
                    Binding::Factory(inner) => self.check_factory(inner, Some(kind), pos),
                    _ => {}
                }
            }
        }
        if let Some(exp) = expected {
            if f.returns != exp {
                self.err(
                    "V9",
                    pos,
                    format!("`{}` returns {}, but a {} is needed", call.method, f.returns.name(), exp.name()),
                );
            }
        }
    }

    fn check_reachability(&mut self) {
        let d = self.ix.diagram;
        let mut started: HashSet<&str> = HashSet::new();
        for s in &d.starters {
            started.extend(s.targets.iter().map(String::as_str));
        }
        for h in &d.handlers {
            if let Effect::Start(t) = &h.effect {
                started.insert(t);
            }
        }
        let mut reachable: HashSet<&str> = HashSet::new();
        let mut queue: Vec<&str> = started.iter().copied().collect();
        queue.sort();
        while let Some(id) = queue.pop() {
            if !reachable.insert(id) {
                continue;
            }
            if let Some(Command::Transaction(tx)) = self.ix.command(id) {
                queue.extend(tx.auto_start.iter().map(|a| a.child.as_str()));
            }
        }
        for cmd in self.ix.commands.clone() {
            if !reachable.contains(cmd.id()) {
                self.warn("W1", cmd.pos(), format!("command `{}` is never started", cmd.id()));
            }
        }
        // States that can never change value.
        let raised: HashSet<&str> = d
            .handlers
            .iter()
            .filter_map(|h| match &h.effect {
                Effect::Raise(t) => Some(t.as_str()),
                _ => None,
            })
            .collect();
        let mut constant: BTreeMap<&str, bool> = BTreeMap::new();
        for s in &self.ix.states {
            let c = match s.kind {
                StateKind::Raised => !raised.contains(s.id.as_str()),
                StateKind::CommandStarted | StateKind::CommandCompleted | StateKind::CommandCancelled => {
                    !self.ix.is_root(&s.owner) && !reachable.contains(s.owner.as_str())
                }
                StateKind::ActionProgressAtLeast { .. } => self
                    .ix
                    .holder
                    .get(s.owner.as_str())
                    .is_some_and(|cmd| !reachable.contains(cmd)),
                _ => false,
            };
            constant.insert(&s.id, c);
        }
        // Logical states are constant when all inputs are; iterate to a fixpoint
        // since inputs may be declared later.
        loop {
            let mut changed = false;
            for l in &d.logical_states {
                if constant.contains_key(l.id.as_str()) {
                    continue;
                }
                let known: Option<Vec<bool>> = l.inputs.iter().map(|i| constant.get(i.as_str()).copied()).collect();
                if let Some(flags) = known {
                    constant.insert(&l.id, flags.iter().all(|c| *c));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for h in &d.handlers {
            if constant.get(h.source.as_str()) == Some(&true) {
                self.warn("W2", h.pos, format!("handler `{}` watches `{}`, which can never change", h.id, h.source));
            }
        }
    }
}

/// A cycle through `start` in the logical-state graph, if any.
fn find_cycle<'a>(start: &'a str, logical: &HashMap<&'a str, &'a LogicalState>) -> Option<Vec<&'a str>> {
    fn dfs<'a>(
        node: &'a str,
        start: &'a str,
        logical: &HashMap<&'a str, &'a LogicalState>,
        path: &mut Vec<&'a str>,
        seen: &mut HashSet<&'a str>,
    ) -> bool {
        let Some(l) = logical.get(node) else { return false };
        for input in &l.inputs {
            let input = input.as_str();
            if input == start {
                path.push(input);
                return true;
            }
            if logical.contains_key(input) && seen.insert(input) {
                path.push(input);
                if dfs(input, start, logical, path, seen) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![start];
    let mut seen = HashSet::new();
    if dfs(start, start, logical, &mut path, &mut seen) {
        Some(path)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn codes(src: &str) -> Vec<String> {
        let d = parse(src, "t.gsr").unwrap();
        validate(&d, Catalog::builtin()).error_codes().into_iter().map(String::from).collect()
    }

    #[test]
    fn command_without_starter_is_v2() {
        assert_eq!(codes("diagram D { wait w: 1; }"), ["V2"]);
    }

    #[test]
    fn two_actions_is_v3() {
        assert_eq!(
            codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(duration = 1); action n: PTP(duration = 2); } }"),
            ["V3"]
        );
    }

    #[test]
    fn start_of_grandchild_is_v5_but_stop_is_fine() {
        let src = |effect: &str| {
            format!(
                "diagram D {{ starter s -> t; transaction t {{ transaction u {{ wait w: 1; start w; }} start u; }} state ts: Started on t; handler on ts entered {effect} w; }}"
            )
        };
        assert_eq!(codes(&src("start")), ["V5"]);
        assert!(codes(&src("stop")).is_empty());
        assert!(codes(&src("cancel")).is_empty());
    }

    #[test]
    fn stop_outside_scope_is_v6() {
        assert_eq!(
            codes("diagram D { starter s -> a, b; wait a: 1 { state as: Started on a; } wait b: 1; handler in a on as entered stop b; }"),
            ["V6"]
        );
    }

    #[test]
    fn cycles_and_arity_are_v7() {
        let cyc = codes(
            "diagram D { starter s -> w; wait w: 1 { state x: Started on w; } logical a: and(x, b); logical b: or(a, x); handler on a entered stop w; }",
        );
        assert_eq!(cyc, ["V7"]);
        assert_eq!(codes("diagram D { starter s -> w; wait w: 1 { state x: Started on w; } logical n: not(x, x); }"), ["V7"]);
        assert_eq!(codes("diagram D { starter s -> w; wait w: 1 { state x: Started on w; } logical n: or(x); }"), ["V7"]);
    }

    #[test]
    fn raise_needs_raised_state_in_scope() {
        let ok = "diagram D { starter s -> w; wait w: 3 { state x: Started on w; } state r: Raised on D; handler on x entered raise r; }";
        assert!(codes(ok).is_empty());
        let bad = "diagram D { starter s -> w; wait w: 3 { state x: Started on w; state r: Raised on w; } handler on x entered raise r; }";
        assert_eq!(codes(bad), ["V8"]);
    }

    #[test]
    fn factories_are_v9() {
        let base = |binding: &str| {
            format!("diagram D {{ starter s -> c; runtime c {{ actuator a: LWR; action m: PTP(start = {binding}, duration = 1); }} }}")
        };
        assert!(codes(&base("@a.getHomePosition()")).is_empty());
        assert!(codes(&base("@offsetFrame(@a.getHomePosition(), 0.5)")).is_empty());
        assert_eq!(codes(&base("@nothing()")), ["V9"]);
        assert_eq!(codes(&base("@getHomePosition()")), ["V9"]);
        assert_eq!(codes(&base("@m.getHomePosition()")), ["V9"]);
        assert_eq!(codes(&base("@a.getForceXSensor()")), ["V9"]);
        assert_eq!(codes(&base("@namedFrame(3)")), ["V9"]);
        assert_eq!(codes(&base("@offsetFrame(\"x\")")), ["V9"]);
    }

    #[test]
    fn duplicate_variable_is_v10() {
        assert_eq!(
            codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: LIN(start = $p, goal = $p, duration_ticks = 3); } }"),
            ["V10"]
        );
    }

    #[test]
    fn unresolved_is_v11() {
        assert_eq!(codes("diagram D { starter s -> w; wait w: 1; handler on nowhere entered stop w; }"), ["V11"]);
    }

    #[test]
    fn catalog_conformance_is_v8() {
        assert_eq!(codes("diagram D { starter s -> c; runtime c { actuator a: Robot; action m: PTP(duration = 1); } }"), ["V8"]);
        assert_eq!(codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(); } }"), ["V8"]);
        assert_eq!(codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(duration = 1.5); } }"), ["V8"]);
        assert_eq!(codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(duration = 1, speed = 2); } }"), ["V8"]);
        assert_eq!(
            codes("diagram D { starter s -> c; runtime c { actuator a: LWR; action m: PTP(duration = 1); state p: ProgressAtLeast(5) on a; } }"),
            ["V8"]
        );
    }

    #[test]
    fn warnings_do_not_invalidate() {
        let d = parse("diagram D { starter s -> w; wait w: 1; wait idle: 2; transaction t { } }", "t.gsr").unwrap();
        let r = validate(&d, Catalog::builtin());
        assert!(r.is_valid);
        let warn: Vec<_> = r.diagnostics.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(warn, ["V1b", "W1", "W1"]);
    }

    #[test]
    fn handler_on_never_raised_state_warns() {
        let d = parse(
            "diagram D { starter s -> w; wait w: 5; state r: Raised on D; handler on r entered stop w; }",
            "t.gsr",
        )
        .unwrap();
        let r = validate(&d, Catalog::builtin());
        assert!(r.is_valid);
        assert_eq!(r.diagnostics[0].code, "W2");
    }

    #[test]
    fn validate_does_not_mutate() {
        let d = parse("diagram D { wait w: 1; }", "t.gsr").unwrap();
        let before = d.clone();
        let _ = validate(&d, Catalog::builtin());
        assert_eq!(d, before);
    }
}
