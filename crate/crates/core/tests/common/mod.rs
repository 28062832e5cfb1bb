//! Shared fixtures and random diagram generators for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::path::PathBuf;

use gsrapid::sim::ScriptValue;
use gsrapid::{Diagram, SensorScript, Trace};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn read(rel: &str) -> String {
    let path = data_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn diagram(rel: &str) -> Diagram {
    gsrapid::parse(&read(rel), rel).unwrap_or_else(|d| panic!("{rel}: {d:?}"))
}

pub fn script(rel: &str) -> SensorScript {
    SensorScript::from_json(&read(rel)).unwrap()
}

/// Sorted file names (without directory) under a data subdirectory.
pub fn files(sub: &str, ext: &str) -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(data_dir().join(sub))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(ext))
        .collect();
    out.sort();
    out
}

/// Activity of every state after each tick, rebuilt from the edge records.
pub fn activity(trace: &Trace) -> Vec<HashMap<String, bool>> {
    let mut cur: HashMap<String, bool> = HashMap::new();
    trace
        .records
        .iter()
        .map(|r| {
            for e in &r.state_edges {
                cur.insert(e.state.clone(), e.edge == gsrapid::sim::Edge::Entered);
            }
            cur.clone()
        })
        .collect()
}

pub fn active(snapshot: &HashMap<String, bool>, state: &str) -> bool {
    snapshot.get(state).copied().unwrap_or(false)
}

/// Random boolean channel: piecewise constant over `ticks`.
pub fn bool_channel(rng: &mut impl Rng, ticks: u64) -> Vec<(u64, ScriptValue)> {
    let mut segs = vec![(0, ScriptValue::Bool(rng.gen()))];
    let mut t = 0;
    loop {
        t += rng.gen_range(1..=8);
        if t >= ticks {
            break;
        }
        segs.push((t, ScriptValue::Bool(rng.gen())));
    }
    segs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    And,
    Or,
    Not,
    Ever,
}

/// A diagram of sensor states combined by logical operators.
pub struct LogicCase {
    pub src: String,
    pub script: SensorScript,
    /// Atomic state id → channel.
    pub atoms: Vec<(String, String)>,
    /// In dependency order (inputs always earlier in this list or atoms).
    pub logicals: Vec<(String, Op, Vec<String>)>,
}

pub fn logic_case(rng: &mut impl Rng) -> LogicCase {
    let n_atoms = rng.gen_range(1..=3);
    let n_logic = rng.gen_range(1..=3);
    let ticks = rng.gen_range(1..=40);
    let atoms: Vec<(String, String)> = (0..n_atoms).map(|i| (format!("a{i}"), format!("c{i}"))).collect();
    let mut names: Vec<String> = atoms.iter().map(|a| a.0.clone()).collect();
    let mut logicals = Vec::new();
    for i in 0..n_logic {
        let op = *[Op::And, Op::Or, Op::Not, Op::Ever].choose(rng).unwrap();
        let arity = match op {
            Op::Not | Op::Ever => 1,
            _ => rng.gen_range(2..=3),
        };
        let inputs: Vec<String> = (0..arity).map(|_| names.choose(rng).unwrap().clone()).collect();
        let id = format!("l{i}");
        names.push(id.clone());
        logicals.push((id, op, inputs));
    }
    let mut src = String::from("diagram R {\n    starter s0 -> w;\n    wait w: 1000;\n");
    for (id, ch) in &atoms {
        let _ = writeln!(src, "    sensor {id}s: DigitalInput channel \"{ch}\";\n    state {id}: True on {id}s;");
    }
    // Declaration order is shuffled so evaluation order has to be derived.
    let mut decl = logicals.clone();
    decl.shuffle(rng);
    for (id, op, inputs) in &decl {
        let kw = match op {
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Ever => "ever",
        };
        let _ = writeln!(src, "    logical {id}: {kw}({});", inputs.join(", "));
    }
    src.push_str("}\n");
    let channels: BTreeMap<String, Vec<(u64, ScriptValue)>> =
        atoms.iter().map(|(_, ch)| (ch.clone(), bool_channel(rng, ticks))).collect();
    LogicCase { src, script: SensorScript { ticks, channels }, atoms, logicals }
}

/// Truth-table and latch evaluation straight from the case description:
/// activity of every state at every tick.
pub fn logic_oracle(case: &LogicCase) -> Vec<HashMap<String, bool>> {
    let mut history: Vec<HashMap<String, bool>> = Vec::new();
    for t in 0..case.script.ticks {
        let mut now: HashMap<String, bool> = HashMap::new();
        for (id, ch) in &case.atoms {
            let v = matches!(case.script.value_at(ch, t), Some(ScriptValue::Bool(true)));
            now.insert(id.clone(), v);
        }
        for (id, op, inputs) in &case.logicals {
            let vals: Vec<bool> = inputs.iter().map(|i| now[i]).collect();
            let v = match op {
                Op::And => vals.iter().all(|v| *v),
                Op::Or => vals.iter().any(|v| *v),
                Op::Not => !vals[0],
                Op::Ever => vals[0] || history.iter().any(|h| h[&inputs[0]]),
            };
            now.insert(id.clone(), v);
        }
        history.push(now);
    }
    history
}

/// Command tree used by the effect generator.
#[derive(Debug, Clone)]
pub enum Node {
    Wait { id: String, ticks: u64 },
    Tx { id: String, children: Vec<Node>, auto: Vec<(String, Option<String>)> },
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Wait { id, .. } | Node::Tx { id, .. } => id,
        }
    }

    /// This node and everything below it, pre-order.
    pub fn subtree(&self) -> Vec<&Node> {
        let mut out = vec![self];
        if let Node::Tx { children, .. } = self {
            for c in children {
                out.extend(c.subtree());
            }
        }
        out
    }
}

pub struct EffectCase {
    pub src: String,
    pub script: SensorScript,
    /// Command id → ids of it and all its descendants.
    pub closure: HashMap<String, Vec<String>>,
    pub first_handlers: Vec<String>,
}

fn gen_node(rng: &mut impl Rng, depth: u32, next: &mut u32) -> Node {
    *next += 1;
    let n = *next;
    if depth >= 2 || rng.gen_bool(0.45) {
        return Node::Wait { id: format!("w{n}"), ticks: rng.gen_range(0..=8) };
    }
    let children: Vec<Node> = (0..rng.gen_range(1..=3)).map(|_| gen_node(rng, depth + 1, next)).collect();
    let mut auto = Vec::new();
    for c in &children {
        match rng.gen_range(0..3) {
            0 => auto.push((c.id().to_string(), None)),
            1 => auto.push((c.id().to_string(), Some(["b0", "b1"].choose(rng).unwrap().to_string()))),
            _ => {}
        }
    }
    Node::Tx { id: format!("t{n}"), children, auto }
}

fn print_node(out: &mut String, node: &Node, indent: usize) {
    let pad = "    ".repeat(indent);
    match node {
        Node::Wait { id, ticks } => {
            let _ = writeln!(out, "{pad}wait {id}: {ticks} {{ state {id}Go: Started on {id}; state {id}Done: Completed on {id}; }}");
        }
        Node::Tx { id, children, auto } => {
            let _ = writeln!(out, "{pad}transaction {id} {{");
            for c in children {
                print_node(out, c, indent + 1);
            }
            let _ = writeln!(out, "{pad}    state {id}Go: Started on {id};");
            let _ = writeln!(out, "{pad}    state {id}Done: Completed on {id};");
            let _ = writeln!(out, "{pad}    state {id}Raised: Raised on {id};");
            if !auto.is_empty() {
                let items: Vec<String> = auto
                    .iter()
                    .map(|(c, g)| match g {
                        Some(g) => format!("{c} when {g}"),
                        None => c.clone(),
                    })
                    .collect();
                let _ = writeln!(out, "{pad}    start {};", items.join(", "));
            }
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

/// A random valid diagram exercising every effect kind.
pub fn effect_case(rng: &mut impl Rng) -> EffectCase {
    let mut next = 0;
    let top: Vec<Node> = (0..rng.gen_range(1..=3)).map(|_| gen_node(rng, 0, &mut next)).collect();
    let root = Node::Tx { id: "R".into(), children: top.clone(), auto: Vec::new() };

    let mut closure: HashMap<String, Vec<String>> = HashMap::new();
    for n in root.subtree() {
        closure.insert(n.id().to_string(), n.subtree().iter().map(|d| d.id().to_string()).collect());
    }
    let scopes: Vec<&Node> = root.subtree().into_iter().filter(|n| matches!(n, Node::Tx { .. })).collect();

    let mut states: Vec<String> = vec!["b0".into(), "b1".into()];
    for n in root.subtree().iter().skip(1) {
        states.push(format!("{}Go", n.id()));
        states.push(format!("{}Done", n.id()));
        if matches!(n, Node::Tx { .. }) {
            states.push(format!("{}Raised", n.id()));
        }
    }
    let mut logical_lines = Vec::new();
    for i in 0..rng.gen_range(0..=2) {
        let (kw, arity) = *[("and", 2), ("or", 2), ("not", 1), ("ever", 1)].choose(rng).unwrap();
        let inputs: Vec<String> = (0..arity).map(|_| states.choose(rng).unwrap().clone()).collect();
        logical_lines.push(format!("    logical x{i}: {kw}({});", inputs.join(", ")));
        states.push(format!("x{i}"));
    }

    let mut handlers = Vec::new();
    let mut first_handlers = Vec::new();
    for i in 0..rng.gen_range(1..=6) {
        let scope = *scopes.choose(rng).unwrap();
        let Node::Tx { id: scope_id, children, .. } = scope else { unreachable!() };
        let trigger = *["entered", "first_entered", "left", "first_left"].choose(rng).unwrap();
        let source = states.choose(rng).unwrap();
        let effect = match rng.gen_range(0..5) {
            0 => format!("start {}", children.choose(rng).unwrap().id()),
            1 => format!("stop {}", closure[scope_id.as_str()].choose(rng).unwrap()),
            2 => format!("cancel {}", closure[scope_id.as_str()].choose(rng).unwrap()),
            3 if scope_id != "R" => format!("raise {scope_id}Raised"),
            _ => format!("external \"e{i}\""),
        };
        let id = format!("h{i}");
        if trigger.starts_with("first") {
            first_handlers.push(id.clone());
        }
        let scope_part = if scope_id == "R" { String::new() } else { format!(" in {scope_id}") };
        handlers.push(format!("    handler {id}{scope_part} on {source} {trigger} {effect};"));
    }

    let mut targets: Vec<&str> = top.iter().map(Node::id).filter(|_| rng.gen_bool(0.7)).collect();
    if targets.is_empty() {
        targets.push(top[0].id());
    }
    let mut src = format!("diagram R {{\n    starter s0 -> {};\n", targets.join(", "));
    src.push_str("    sensor s0s: DigitalInput channel \"s0\";\n    sensor s1s: DigitalInput channel \"s1\";\n");
    src.push_str("    state b0: True on s0s;\n    state b1: True on s1s;\n");
    for n in &top {
        print_node(&mut src, n, 1);
    }
    for l in logical_lines.iter().chain(&handlers) {
        src.push_str(l);
        src.push('\n');
    }
    src.push_str("}\n");

    let ticks = rng.gen_range(1..=60);
    let channels = ["s0", "s1"].iter().map(|c| (c.to_string(), bool_channel(rng, ticks))).collect();
    EffectCase { src, script: SensorScript { ticks, channels }, closure, first_handlers }
}
