//! Reading and writing Mealy machines in the DOT dialect used by the
//! automata-learning benchmark collections.
//!
//! Accepted subset: one `digraph` block, node declarations, edges labelled
//! `"in / out"`, and an optional hidden start node (`__start0 -> s0;`).
//! Without a start node the first declared node is initial.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::ParseError;
use crate::mealy::MealyMachine;
use crate::word::{Alphabet, Sym};

fn edge_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"^\s*("[^"]*"|[A-Za-z0-9_.]+)\s*->\s*("[^"]*"|[A-Za-z0-9_.]+)\s*(\[(.*)\])?\s*;?\s*$"#).unwrap()
    })
}

fn node_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^\s*("[^"]*"|[A-Za-z0-9_.]+)\s*(\[(.*)\])?\s*;?\s*$"#).unwrap())
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"label\s*=\s*"([^"]*)""#).unwrap())
}

fn unquote(id: &str) -> &str {
    id.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(id)
}

fn is_start_marker(id: &str) -> bool {
    id.starts_with("__start")
}

struct RawEdge {
    line: usize,
    from: usize,
    to: usize,
    input: String,
    output: String,
}

/// Parses a complete Mealy machine.
pub fn parse_dot(text: &str) -> Result<MealyMachine, ParseError> {
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
        *ids.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut opened = false;
    let mut closed = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stmt = raw.trim();
        if stmt.is_empty() || stmt.starts_with("//") || stmt.starts_with('#') {
            continue;
        }
        if !opened {
            if stmt.starts_with("digraph") && stmt.ends_with('{') {
                opened = true;
                continue;
            }
            return Err(ParseError::new(line, "expected `digraph <name> {`"));
        }
        if stmt == "}" {
            closed = true;
            continue;
        }
        if closed {
            return Err(ParseError::new(line, "content after closing brace"));
        }
        if let Some(c) = edge_re().captures(stmt) {
            let from = unquote(&c[1]);
            let to = unquote(&c[2]);
            if is_start_marker(from) {
                if is_start_marker(to) {
                    return Err(ParseError::new(line, "start marker points at itself"));
                }
                let id = intern(to, &mut names);
                if initial.replace(id).is_some() {
                    return Err(ParseError::new(line, "more than one initial marker"));
                }
                continue;
            }
            let attrs = c.get(4).map_or("", |m| m.as_str());
            let label = label_re()
                .captures(attrs)
                .ok_or_else(|| ParseError::new(line, "transition without label"))?;
            let label = &label[1];
            let (input, output) = label
                .split_once('/')
                .ok_or_else(|| ParseError::new(line, format!("malformed label `{label}`")))?;
            let input = input.trim_matches(|c: char| c.is_ascii_whitespace());
            let output = output.trim_matches(|c: char| c.is_ascii_whitespace());
            if input.is_empty() || output.is_empty() || output.contains('/') {
                return Err(ParseError::new(line, format!("malformed label `{label}`")));
            }
            let from = intern(from, &mut names);
            let to = intern(to, &mut names);
            edges.push(RawEdge {
                line,
                from,
                to,
                input: input.to_string(),
                output: output.to_string(),
            });
            continue;
        }
        if let Some(c) = node_re().captures(stmt) {
            let name = unquote(&c[1]);
            // graph-level attribute statements like `rankdir=LR` never match
            // here; `node [...]` / `edge [...]` defaults are skipped
            if is_start_marker(name) || matches!(name, "node" | "edge" | "graph") {
                continue;
            }
            intern(name, &mut names);
            continue;
        }
        if stmt.contains('=') && !stmt.contains("->") {
            continue;
        }
        return Err(ParseError::new(line, format!("unrecognised statement `{stmt}`")));
    }
    let last = text.lines().count().max(1);
    if !opened {
        return Err(ParseError::new(last, "missing `digraph` block"));
    }
    if !closed {
        return Err(ParseError::new(last, "missing closing brace"));
    }
    if names.is_empty() {
        return Err(ParseError::new(last, "no states declared"));
    }
    let initial = initial.unwrap_or(0);

    let inputs = Alphabet::new(
        edges
            .iter()
            .map(|e| e.input.clone())
            .collect::<std::collections::BTreeSet<_>>(),
    )
    .map_err(|e| ParseError::new(last, e.to_string()))?;
    let outputs = Alphabet::new(
        edges
            .iter()
            .map(|e| e.output.clone())
            .collect::<std::collections::BTreeSet<_>>(),
    )
    .map_err(|e| ParseError::new(last, e.to_string()))?;
    let k = inputs.len();
    let mut table: Vec<Option<(usize, Sym)>> = vec![None; names.len() * k];
    for e in &edges {
        let a = inputs.index(&e.input).expect("collected above") as usize;
        let o = outputs.index(&e.output).expect("collected above");
        let slot = &mut table[e.from * k + a];
        match slot {
            Some(prev) if *prev != (e.to, o) => {
                return Err(ParseError::new(
                    e.line,
                    format!("nondeterministic transition at {}/{}", names[e.from], e.input),
                ));
            }
            _ => *slot = Some((e.to, o)),
        }
    }
    let mut rows = Vec::with_capacity(names.len());
    for (q, name) in names.iter().enumerate() {
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            match table[q * k + a] {
                Some(t) => row.push(t),
                None => {
                    return Err(ParseError::new(
                        last,
                        format!("incomplete transition function at {}/{}", name, inputs.name(a as Sym)),
                    ))
                }
            }
        }
        rows.push(row);
    }
    MealyMachine::new(inputs, outputs, initial, rows).map_err(|e| ParseError::new(last, e.to_string()))
}

/// Serializes a machine. States are named `s0, s1, ...` by id and the
/// initial state is marked with a hidden `__start0` node.
pub fn write_dot(m: &MealyMachine) -> String {
    let mut out = String::from("digraph g {\n");
    out.push_str("\t__start0 [label=\"\" shape=\"none\"];\n");
    for q in 0..m.num_states() {
        let _ = writeln!(out, "\ts{q} [shape=\"circle\" label=\"s{q}\"];");
    }
    for q in 0..m.num_states() {
        for a in m.inputs().symbols() {
            let (t, o) = m.step(q, a);
            let _ = writeln!(
                out,
                "\ts{q} -> s{t} [label=\"{} / {}\"];",
                m.inputs().name(a),
                m.outputs().name(o)
            );
        }
    }
    let _ = writeln!(out, "\t__start0 -> s{};", m.initial());
    out.push_str("}\n");
    out
}
