use std::fmt::Write;

use crate::model::*;

const INDENT: &str = "    ";

/// Canonical source text for a diagram.
///
/// Logical states and handlers are always emitted at diagram level; a
/// handler whose scope is not the root carries an explicit `in <scope>`.
pub fn print(diagram: &Diagram) -> String {
    let mut out = String::new();
    let root = diagram.name.as_str();
    let _ = writeln!(out, "diagram {} {{", diagram.name);
    let mut sections: Vec<String> = Vec::new();

    let mut s = String::new();
    for st in &diagram.starters {
        let _ = writeln!(s, "{INDENT}starter {} -> {};", st.id, st.targets.join(", "));
    }
    sections.push(s);

    let mut s = String::new();
    for sensor in &diagram.top_sensors {
        let _ = writeln!(
            s,
            "{INDENT}sensor {}: {} channel {};",
            sensor.id,
            sensor.sensor_type,
            quote(&sensor.channel)
        );
    }
    sections.push(s);

    for cmd in &diagram.commands {
        let mut s = String::new();
        print_command(&mut s, cmd, 1);
        sections.push(s);
    }

    let mut s = String::new();
    for state in &diagram.states {
        print_state(&mut s, state, 1);
    }
    sections.push(s);

    let mut s = String::new();
    for l in &diagram.logical_states {
        let _ = writeln!(s, "{INDENT}logical {}: {}({});", l.id, l.op.keyword(), l.inputs.join(", "));
    }
    sections.push(s);

    let mut s = String::new();
    for h in &diagram.handlers {
        let _ = write!(s, "{INDENT}handler {}", h.id);
        if h.scope != root {
            let _ = write!(s, " in {}", h.scope);
        }
        let _ = write!(s, " on {} {} {}", h.source, h.trigger.keyword(), h.effect.keyword());
        match &h.effect {
            Effect::Start(t) | Effect::Stop(t) | Effect::Cancel(t) | Effect::Raise(t) => {
                let _ = write!(s, " {t}");
            }
            Effect::External(tag) => {
                let _ = write!(s, " {}", quote(tag));
            }
        }
        s.push_str(";\n");
    }
    sections.push(s);

    let body: Vec<String> = sections.into_iter().filter(|s| !s.is_empty()).collect();
    out.push_str(&body.join("\n"));
    out.push_str("}\n");
    out
}

fn pad(level: usize) -> String {
    INDENT.repeat(level)
}

fn print_command(out: &mut String, cmd: &Command, level: usize) {
    let p = pad(level);
    let inner = pad(level + 1);
    match cmd {
        Command::Runtime(rt) => {
            let _ = writeln!(out, "{p}runtime {} {{", rt.id);
            for a in &rt.actuators {
                let _ = writeln!(out, "{inner}actuator {}: {}{};", a.id, a.device_type, args(&a.config));
                for s in &a.sensors {
                    let _ = writeln!(
                        out,
                        "{inner}sensor {}: {} on {} channel {};",
                        s.id,
                        s.sensor_type,
                        a.id,
                        quote(&s.channel)
                    );
                }
            }
            for a in &rt.actions {
                let _ = writeln!(out, "{inner}action {}: {}{};", a.id, a.action_type, args(&a.params));
            }
            for st in &rt.states {
                print_state(out, st, level + 1);
            }
            let _ = writeln!(out, "{p}}}");
        }
        Command::Transaction(tx) => {
            let _ = writeln!(out, "{p}transaction {} {{", tx.id);
            for c in &tx.children {
                print_command(out, c, level + 1);
            }
            for st in &tx.states {
                print_state(out, st, level + 1);
            }
            if !tx.auto_start.is_empty() {
                let items: Vec<String> = tx
                    .auto_start
                    .iter()
                    .map(|a| match &a.guard {
                        Some(g) => format!("{} when {g}", a.child),
                        None => a.child.clone(),
                    })
                    .collect();
                let _ = writeln!(out, "{inner}start {};", items.join(", "));
            }
            let _ = writeln!(out, "{p}}}");
        }
        Command::Wait(w) => {
            if w.states.is_empty() {
                let _ = writeln!(out, "{p}wait {}: {};", w.id, w.duration_ticks);
            } else {
                let _ = writeln!(out, "{p}wait {}: {} {{", w.id, w.duration_ticks);
                for st in &w.states {
                    print_state(out, st, level + 1);
                }
                let _ = writeln!(out, "{p}}}");
            }
        }
    }
}

fn print_state(out: &mut String, st: &DeclaredState, level: usize) {
    let kind = match &st.kind {
        StateKind::CommandStarted => "Started".to_string(),
        StateKind::CommandCompleted => "Completed".to_string(),
        StateKind::CommandCancelled => "Cancelled".to_string(),
        StateKind::ActionProgressAtLeast { percent } => format!("ProgressAtLeast({})", number(*percent)),
        StateKind::SensorTrue => "True".to_string(),
        StateKind::SensorGreater { threshold } => format!("Greater({})", number(*threshold)),
        StateKind::SensorLess { threshold } => format!("Less({})", number(*threshold)),
        StateKind::ActuatorError => "Error".to_string(),
        StateKind::Raised => "Raised".to_string(),
    };
    let _ = writeln!(out, "{}state {}: {kind} on {};", pad(level), st.id, st.owner);
}

fn args(params: &[Parameter]) -> String {
    if params.is_empty() {
        return String::new();
    }
    let items: Vec<String> = params.iter().map(|p| format!("{} = {}", p.name, binding(&p.binding))).collect();
    format!("({})", items.join(", "))
}

pub(crate) fn binding(b: &Binding) -> String {
    match b {
        Binding::Constant(l) => literal(l),
        Binding::Variable(v) => format!("${v}"),
        Binding::Factory(call) => {
            let args: Vec<String> = call.args.iter().map(binding).collect();
            match &call.receiver {
                Some(r) => format!("@{r}.{}({})", call.method, args.join(", ")),
                None => format!("@{}({})", call.method, args.join(", ")),
            }
        }
    }
}

pub(crate) fn literal(l: &Literal) -> String {
    match l {
        Literal::Bool(b) => b.to_string(),
        Literal::Int(i) => i.to_string(),
        // Debug formatting keeps a fractional part or exponent, so the text
        // lexes back as a real and round-trips exactly.
        Literal::Real(r) => format!("{r:?}"),
        Literal::Str(s) => quote(s),
    }
}

/// Numeric state argument; integral values print without a fraction.
fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
