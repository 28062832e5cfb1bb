use std::collections::HashSet;

use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, SourceSpan};
use crate::model::*;

/// Words that cannot be used as identifiers because they would make the
/// grammar ambiguous.
const RESERVED: [&str; 6] = ["on", "in", "when", "channel", "true", "false"];

/// Parses one diagram. Declaration order in the result equals source order.
///
/// Diagnostic codes: P001 lexical, P002 syntax, P003 duplicate identifier,
/// P004 sensor on an actuator not declared in the same runtime command,
/// P005 parameter given twice.
pub fn parse(text: &str, file: &str) -> Result<Diagram, Vec<Diagnostic>> {
    let (tokens, lex_errors) = lex(text);
    if !lex_errors.is_empty() {
        return Err(lex_errors
            .into_iter()
            .map(|e| Diagnostic::error("P001", e.message, SourceSpan::new(file, e.pos)))
            .collect());
    }
    let mut p = Parser { tokens, i: 0, file, diagram: Diagram::default(), unnamed: Vec::new() };
    p.diagram.file = file.to_string();
    if let Err(d) = p.parse_diagram() {
        return Err(vec![d]);
    }
    p.name_handlers();
    let diagram = p.diagram;
    if let Err(dups) = diagram.check_unique_ids() {
        return Err(dups
            .into_iter()
            .map(|e| {
                let pos = match &e {
                    ModelError::DuplicateId { second, .. } => *second,
                    _ => Pos::default(),
                };
                Diagnostic::error("P003", e.to_string(), SourceSpan::new(file, pos))
            })
            .collect());
    }
    Ok(diagram)
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'a> {
    tokens: Vec<Token>,
    i: usize,
    file: &'a str,
    diagram: Diagram,
    /// Indices of handlers written without an id.
    unnamed: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Top,
    Runtime,
    Transaction,
    Wait,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.i].clone();
        if t.tok != Tok::Eof {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error("P002", message, SourceSpan::new(self.file, self.pos())))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.error(format!("expected {wanted}, found {found}"))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Pos> {
        if self.at_kw(kw) {
            Ok(self.bump().pos)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(Ident, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            Tok::Ident(s) => self.error(format!("`{s}` is reserved and cannot name {what}")),
            _ => self.unexpected(what),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn number(&mut self, what: &str) -> PResult<f64> {
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(i as f64)
            }
            Tok::Real(r) => {
                self.bump();
                Ok(r)
            }
            _ => self.unexpected(what),
        }
    }

    /// `a, b, c` with an optional trailing comma, up to (not including) `end`.
    fn comma_list<T>(
        &mut self,
        end: &Tok,
        mut item: impl FnMut(&mut Self) -> PResult<T>,
    ) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        while self.peek() != end {
            out.push(item(self)?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn parse_diagram(&mut self) -> PResult<()> {
        self.expect_kw("diagram")?;
        let (name, pos) = self.ident("a diagram name")?;
        self.diagram.name = name;
        self.diagram.pos = pos;
        self.expect(Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            let root = self.diagram.name.clone();
            match self.peek() {
                Tok::Ident(kw) => match kw.as_str() {
                    "starter" => {
                        let s = self.parse_starter()?;
                        self.diagram.starters.push(s);
                    }
                    "runtime" | "transaction" | "wait" => {
                        let c = self.parse_command()?;
                        self.diagram.commands.push(c);
                    }
                    "sensor" => {
                        let s = self.parse_top_sensor()?;
                        self.diagram.top_sensors.push(s);
                    }
                    "state" => {
                        let s = self.parse_state()?;
                        self.diagram.states.push(s);
                    }
                    "logical" => self.parse_logical()?,
                    "handler" => self.parse_handler(&root, Block::Top)?,
                    _ => return self.unexpected("a diagram item"),
                },
                _ => return self.unexpected("a diagram item or `}`"),
            }
        }
        self.expect(Tok::Eof)?;
        Ok(())
    }

    fn parse_starter(&mut self) -> PResult<Starter> {
        self.expect_kw("starter")?;
        let (id, pos) = self.ident("a starter name")?;
        self.expect(Tok::Arrow)?;
        let targets = self.comma_list(&Tok::Semi, |p| p.ident("a command name").map(|(t, _)| t))?;
        if targets.is_empty() {
            return self.unexpected("a command name");
        }
        self.expect(Tok::Semi)?;
        Ok(Starter { id, pos, targets })
    }

    fn parse_command(&mut self) -> PResult<Command> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.unexpected("a command"),
        };
        self.bump();
        let (id, pos) = self.ident("a command name")?;
        match kw.as_str() {
            "runtime" => {
                let mut rt = RuntimeCommand { id, pos, actuators: vec![], actions: vec![], states: vec![] };
                self.expect(Tok::LBrace)?;
                while !self.eat(&Tok::RBrace) {
                    if self.at_kw("actuator") {
                        self.bump();
                        let (id, pos) = self.ident("an actuator name")?;
                        self.expect(Tok::Colon)?;
                        let (device_type, _) = self.ident("a device type")?;
                        let config = self.parse_args()?;
                        self.expect(Tok::Semi)?;
                        rt.actuators.push(Actuator { id, pos, device_type, config, sensors: vec![] });
                    } else if self.at_kw("action") {
                        self.bump();
                        let (id, pos) = self.ident("an action name")?;
                        self.expect(Tok::Colon)?;
                        let (action_type, _) = self.ident("an action type")?;
                        let params = self.parse_args()?;
                        self.expect(Tok::Semi)?;
                        rt.actions.push(Action { id, pos, action_type, params });
                    } else if self.at_kw("sensor") {
                        self.parse_attached_sensor(&mut rt)?;
                    } else {
                        let rt_id = rt.id.clone();
                        if let Some(state) = self.parse_block_common(&rt_id, Block::Runtime)? {
                            rt.states.push(state);
                        }
                    }
                }
                Ok(Command::Runtime(rt))
            }
            "transaction" => {
                let mut tx = TransactionCommand { id, pos, children: vec![], auto_start: vec![], states: vec![] };
                self.expect(Tok::LBrace)?;
                while !self.eat(&Tok::RBrace) {
                    if self.at_kw("runtime") || self.at_kw("transaction") || self.at_kw("wait") {
                        let c = self.parse_command()?;
                        tx.children.push(c);
                    } else if self.at_kw("start") {
                        self.bump();
                        let items = self.comma_list(&Tok::Semi, |p| {
                            let (child, pos) = p.ident("a child command")?;
                            let guard = if p.at_kw("when") {
                                p.bump();
                                Some(p.ident("a guard state")?.0)
                            } else {
                                None
                            };
                            Ok(AutoStart { child, guard, pos })
                        })?;
                        if items.is_empty() {
                            return self.unexpected("a child command");
                        }
                        self.expect(Tok::Semi)?;
                        tx.auto_start.extend(items);
                    } else {
                        let tx_id = tx.id.clone();
                        if let Some(state) = self.parse_block_common(&tx_id, Block::Transaction)? {
                            tx.states.push(state);
                        }
                    }
                }
                Ok(Command::Transaction(tx))
            }
            _ => {
                self.expect(Tok::Colon)?;
                let duration_ticks = match *self.peek() {
                    Tok::Int(n) if n >= 0 => {
                        self.bump();
                        n as u64
                    }
                    _ => return self.unexpected("a non-negative tick count"),
                };
                let mut w = WaitCommand { id, pos, duration_ticks, states: vec![] };
                if self.eat(&Tok::LBrace) {
                    while !self.eat(&Tok::RBrace) {
                        let w_id = w.id.clone();
                        if let Some(state) = self.parse_block_common(&w_id, Block::Wait)? {
                            w.states.push(state);
                        }
                    }
                } else {
                    self.expect(Tok::Semi)?;
                }
                Ok(Command::Wait(w))
            }
        }
    }

    /// Items allowed in any command block. Returns a state declared in it.
    fn parse_block_common(&mut self, scope: &str, block: Block) -> PResult<Option<DeclaredState>> {
        if self.at_kw("state") {
            return self.parse_state().map(Some);
        }
        if self.at_kw("logical") {
            self.parse_logical()?;
        } else if self.at_kw("handler") {
            self.parse_handler(scope, block)?;
        } else {
            let wanted = match block {
                Block::Runtime => "`actuator`, `action`, `sensor`, `state`, `logical`, `handler` or `}`",
                Block::Transaction => "a command, `start`, `state`, `logical`, `handler` or `}`",
                _ => "`state`, `logical`, `handler` or `}`",
            };
            return self.unexpected(wanted);
        }
        Ok(None)
    }

    fn parse_attached_sensor(&mut self, rt: &mut RuntimeCommand) -> PResult<()> {
        self.expect_kw("sensor")?;
        let (id, pos) = self.ident("a sensor name")?;
        self.expect(Tok::Colon)?;
        let (sensor_type, _) = self.ident("a sensor type")?;
        self.expect_kw("on")?;
        let at = self.pos();
        let (owner, _) = self.ident("an actuator name")?;
        self.expect_kw("channel")?;
        let channel = self.string("a channel name")?;
        self.expect(Tok::Semi)?;
        match rt.actuators.iter_mut().find(|a| a.id == owner) {
            Some(act) => {
                act.sensors.push(Sensor { id, pos, sensor_type, channel });
                Ok(())
            }
            None => Err(Diagnostic::error(
                "P004",
                format!("sensor `{id}` is attached to `{owner}`, which is not an actuator declared earlier in `{}`", rt.id),
                SourceSpan::new(self.file, at),
            )),
        }
    }

    fn parse_top_sensor(&mut self) -> PResult<Sensor> {
        self.expect_kw("sensor")?;
        let (id, pos) = self.ident("a sensor name")?;
        self.expect(Tok::Colon)?;
        let (sensor_type, _) = self.ident("a sensor type")?;
        self.expect_kw("channel")?;
        let channel = self.string("a channel name")?;
        self.expect(Tok::Semi)?;
        Ok(Sensor { id, pos, sensor_type, channel })
    }

    fn parse_state(&mut self) -> PResult<DeclaredState> {
        self.expect_kw("state")?;
        let (id, pos) = self.ident("a state name")?;
        self.expect(Tok::Colon)?;
        let kind_pos = self.pos();
        let (kind_name, _) = self.ident("a state kind")?;
        let arg = |p: &mut Self, what: &str| -> PResult<f64> {
            p.expect(Tok::LParen)?;
            let v = p.number(what)?;
            p.expect(Tok::RParen)?;
            Ok(v)
        };
        let kind = match kind_name.as_str() {
            "Started" => StateKind::CommandStarted,
            "Completed" => StateKind::CommandCompleted,
            "Cancelled" => StateKind::CommandCancelled,
            "ProgressAtLeast" => {
                let percent = arg(self, "a percentage")?;
                if !(0.0..=100.0).contains(&percent) {
                    return Err(Diagnostic::error(
                        "P002",
                        format!("progress percentage {percent} is outside 0..=100"),
                        SourceSpan::new(self.file, kind_pos),
                    ));
                }
                StateKind::ActionProgressAtLeast { percent }
            }
            "True" => StateKind::SensorTrue,
            "Greater" => StateKind::SensorGreater { threshold: arg(self, "a threshold")? },
            "Less" => StateKind::SensorLess { threshold: arg(self, "a threshold")? },
            "Error" => StateKind::ActuatorError,
            "Raised" => StateKind::Raised,
            other => {
                return Err(Diagnostic::error(
                    "P002",
                    format!("unknown state kind `{other}`"),
                    SourceSpan::new(self.file, kind_pos),
                ))
            }
        };
        self.expect_kw("on")?;
        let (owner, _) = self.ident("the state's owner")?;
        self.expect(Tok::Semi)?;
        Ok(DeclaredState { id, pos, owner, kind })
    }

    fn parse_logical(&mut self) -> PResult<()> {
        self.expect_kw("logical")?;
        let (id, pos) = self.ident("a logical state name")?;
        self.expect(Tok::Colon)?;
        let op = match self.peek() {
            Tok::Ident(s) if s == "and" => LogicalOp::And,
            Tok::Ident(s) if s == "or" => LogicalOp::Or,
            Tok::Ident(s) if s == "not" => LogicalOp::Not,
            Tok::Ident(s) if s == "ever" => LogicalOp::Ever,
            _ => return self.unexpected("`and`, `or`, `not` or `ever`"),
        };
        self.bump();
        self.expect(Tok::LParen)?;
        let inputs = self.comma_list(&Tok::RParen, |p| p.ident("a state name").map(|(s, _)| s))?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        self.diagram.logical_states.push(LogicalState { id, pos, op, inputs });
        Ok(())
    }

    fn parse_handler(&mut self, scope: &str, block: Block) -> PResult<()> {
        let kw_pos = self.expect_kw("handler")?;
        let named = match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => Some(self.ident("a handler name")?),
            _ => None,
        };
        let mut scope = scope.to_string();
        if self.at_kw("in") {
            if block != Block::Top {
                return self.error("`in` is only allowed on handlers declared at diagram level");
            }
            self.bump();
            scope = self.ident("a scope command")?.0;
        }
        self.expect_kw("on")?;
        let (source, _) = self.ident("a state name")?;
        let trigger = match self.peek() {
            Tok::Ident(s) if s == "entered" => Trigger::Entered,
            Tok::Ident(s) if s == "first_entered" => Trigger::FirstEntered,
            Tok::Ident(s) if s == "left" => Trigger::Left,
            Tok::Ident(s) if s == "first_left" => Trigger::FirstLeft,
            _ => return self.unexpected("`entered`, `first_entered`, `left` or `first_left`"),
        };
        self.bump();
        let effect_kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.unexpected("an effect"),
        };
        let effect = match effect_kw.as_str() {
            "start" | "stop" | "cancel" | "raise" => {
                self.bump();
                let (target, _) = self.ident("an effect target")?;
                match effect_kw.as_str() {
                    "start" => Effect::Start(target),
                    "stop" => Effect::Stop(target),
                    "cancel" => Effect::Cancel(target),
                    _ => Effect::Raise(target),
                }
            }
            "external" => {
                self.bump();
                Effect::External(self.string("an external tag")?)
            }
            _ => return self.unexpected("`start`, `stop`, `cancel`, `raise` or `external`"),
        };
        self.expect(Tok::Semi)?;
        let (id, pos) = match named {
            Some(n) => n,
            None => {
                self.unnamed.push(self.diagram.handlers.len());
                (String::new(), kw_pos)
            }
        };
        self.diagram.handlers.push(EventHandler { id, pos, scope, source, trigger, effect });
        Ok(())
    }

    /// Handlers written without a name get `h<ordinal>`, skipping names
    /// already in use.
    fn name_handlers(&mut self) {
        if self.unnamed.is_empty() {
            return;
        }
        let taken: HashSet<String> = {
            let ix = Index::new(&self.diagram);
            let mut all: HashSet<String> = ix.commands.iter().map(|c| c.id().to_string()).collect();
            all.insert(self.diagram.name.clone());
            all.extend(ix.states.iter().map(|s| s.id.clone()));
            all.extend(self.diagram.logical_states.iter().map(|l| l.id.clone()));
            all.extend(self.diagram.handlers.iter().map(|h| h.id.clone()));
            all.extend(self.diagram.starters.iter().map(|s| s.id.clone()));
            all.extend(self.diagram.top_sensors.iter().map(|s| s.id.clone()));
            all.extend(collect_entity_ids(&self.diagram));
            all
        };
        let mut used = taken;
        for &i in &self.unnamed {
            let mut n = i + 1;
            let mut candidate = format!("h{n}");
            while used.contains(&candidate) {
                n += 1;
                candidate = format!("h{n}");
            }
            used.insert(candidate.clone());
            self.diagram.handlers[i].id = candidate;
        }
    }

    fn parse_args(&mut self) -> PResult<Vec<Parameter>> {
        if !self.eat(&Tok::LParen) {
            return Ok(Vec::new());
        }
        let params = self.comma_list(&Tok::RParen, |p| {
            // Parameter names sit before `=`, so keywords are unambiguous there.
            let (name, pos) = match p.peek().clone() {
                Tok::Ident(s) => (s, p.bump().pos),
                _ => return p.unexpected("a parameter name"),
            };
            p.expect(Tok::Eq)?;
            let binding = p.parse_binding()?;
            Ok(Parameter { name, pos, binding })
        })?;
        self.expect(Tok::RParen)?;
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Diagnostic::error(
                    "P005",
                    format!("parameter `{}` given twice", p.name),
                    SourceSpan::new(self.file, p.pos),
                ));
            }
        }
        Ok(params)
    }

    fn parse_binding(&mut self) -> PResult<Binding> {
        let lit = match self.peek().clone() {
            Tok::Int(i) => Literal::Int(i),
            Tok::Real(r) => Literal::Real(r),
            Tok::Str(s) => Literal::Str(s),
            Tok::Ident(s) if s == "true" => Literal::Bool(true),
            Tok::Ident(s) if s == "false" => Literal::Bool(false),
            Tok::Dollar => {
                self.bump();
                return Ok(Binding::Variable(self.ident("a variable name")?.0));
            }
            Tok::At => {
                self.bump();
                let (first, _) = self.ident("a factory name")?;
                let (receiver, method) = if self.eat(&Tok::Dot) {
                    (Some(first), self.ident("a method name")?.0)
                } else {
                    (None, first)
                };
                self.expect(Tok::LParen)?;
                let args = self.comma_list(&Tok::RParen, |p| p.parse_binding())?;
                self.expect(Tok::RParen)?;
                return Ok(Binding::Factory(FactoryCall { receiver, method, args }));
            }
            _ => return self.unexpected("a value, `$variable` or `@factory(...)`"),
        };
        self.bump();
        Ok(Binding::Constant(lit))
    }
}

fn collect_entity_ids(d: &Diagram) -> Vec<String> {
    fn walk(c: &Command, out: &mut Vec<String>) {
        if let Command::Runtime(rt) = c {
            for a in &rt.actuators {
                out.push(a.id.clone());
                out.extend(a.sensors.iter().map(|s| s.id.clone()));
            }
            out.extend(rt.actions.iter().map(|a| a.id.clone()));
        }
        for child in c.children() {
            walk(child, out);
        }
    }
    let mut out = Vec::new();
    d.commands.iter().for_each(|c| walk(c, &mut out));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_codes(src: &str) -> Vec<String> {
        parse(src, "t.gsr").unwrap_err().into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn minimal_diagram() {
        let d = parse(
            "diagram D { starter s0 -> c; runtime c { actuator a: LWR; action m: PTP(duration=100); } }",
            "t.gsr",
        )
        .unwrap();
        assert_eq!(d.commands.len(), 1);
        assert_eq!(d.starters.len(), 1);
        assert_eq!(d.starters[0].targets, vec!["c"]);
        let Command::Runtime(rt) = &d.commands[0] else { panic!() };
        assert_eq!(rt.actions[0].params[0].binding, Binding::Constant(Literal::Int(100)));
    }

    #[test]
    fn either_trigger_shape() {
        let src = r#"
            diagram EitherTrigger {
                starter entry -> ptpRT;
                runtime ptpRT {
                    actuator LbrLeft: LWR;
                    sensor torque: TorqueReached on LbrLeft channel "LbrLeft.torque";
                    action ptp: PTP(duration = 50);
                    state torqueReached: True on torque;
                    state ptpDone: Completed on ptpRT;
                }
                runtime open {
                    actuator gripper: DigitalOutput;
                    action openIt: SetDigitalValue(channel = "out.gripper", value = true);
                }
                logical torqueOrDone: or(torqueReached, ptpDone);
                handler on torqueOrDone first_entered start open;
            }"#;
        let d = parse(src, "either.gsr").unwrap();
        assert_eq!(d.logical_states.len(), 1);
        assert_eq!(d.logical_states[0].op, LogicalOp::Or);
        assert_eq!(d.logical_states[0].inputs.len(), 2);
        assert_eq!(d.handlers.len(), 1);
        assert_eq!(d.handlers[0].effect, Effect::Start("open".into()));
        assert_eq!(d.handlers[0].trigger, Trigger::FirstEntered);
        assert_eq!(d.handlers[0].scope, "EitherTrigger");
        assert_eq!(d.handlers[0].id, "h1");
    }

    #[test]
    fn handler_scope_follows_block() {
        let d = parse(
            "diagram D { starter s -> t; transaction t { wait w: 3; start w; handler x on ws entered stop w; state ws: Started on w; } }",
            "t.gsr",
        )
        .unwrap();
        assert_eq!(d.handlers[0].scope, "t");
        assert_eq!(d.handlers[0].id, "x");
    }

    #[test]
    fn bindings() {
        let d = parse(
            r#"diagram D { starter s -> c; runtime c { actuator a: LWR; action m: LIN(start = @a.getHomePosition(), goal = $g, duration_ticks = 5, x = @namedFrame("p", -1.5,),); } }"#,
            "t.gsr",
        )
        .unwrap();
        let Command::Runtime(rt) = &d.commands[0] else { panic!() };
        let p = &rt.actions[0].params;
        assert_eq!(
            p[0].binding,
            Binding::Factory(FactoryCall { receiver: Some("a".into()), method: "getHomePosition".into(), args: vec![] })
        );
        assert_eq!(p[1].binding, Binding::Variable("g".into()));
        assert_eq!(
            p[3].binding,
            Binding::Factory(FactoryCall {
                receiver: None,
                method: "namedFrame".into(),
                args: vec![Binding::Constant(Literal::Str("p".into())), Binding::Constant(Literal::Real(-1.5))]
            })
        );
    }

    #[test]
    fn syntax_error_has_span() {
        let errs = parse("diagram D {\n  starter s0 c;\n}", "bad.gsr").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, "P002");
        assert_eq!((errs[0].span.line, errs[0].span.column), (2, 14));
        assert_eq!(errs[0].span.file, "bad.gsr");
    }

    #[test]
    fn duplicate_identifier() {
        let errs = parse("diagram D { starter s -> w; wait w: 1; wait w: 2; }", "t.gsr").unwrap_err();
        assert_eq!(errs[0].code, "P003");
        assert!(errs[0].message.contains("first at 1:"));
    }

    #[test]
    fn other_error_codes() {
        assert_eq!(err_codes("diagram D { # }"), ["P001"]);
        assert_eq!(
            err_codes(r#"diagram D { runtime c { sensor f: ForceX on arm channel "x"; } }"#),
            ["P004"]
        );
        assert_eq!(err_codes("diagram D { runtime c { action m: PTP(duration = 1, duration = 2); } }"), ["P005"]);
        assert_eq!(err_codes("diagram on { }"), ["P002"]);
        assert_eq!(err_codes("diagram D { state s: ProgressAtLeast(120) on x; }"), ["P002"]);
        assert_eq!(err_codes("diagram D { runtime c { handler in c on x entered stop c; } }"), ["P002"]);
        assert_eq!(err_codes("diagram D { } trailing"), ["P002"]);
    }

    #[test]
    fn auto_handler_names_avoid_collisions() {
        let d = parse(
            "diagram D { starter s -> h1; wait h1: 1; state st: Started on h1; handler on st entered stop h1; }",
            "t.gsr",
        )
        .unwrap();
        assert_eq!(d.handlers[0].id, "h2");
    }
}
