use std::fmt::Write;

use crate::model::{action_call, EventKind, ProjectModel};

pub const HEADER_COMMENT: &str = "# HAZOP-UML model";

/// Canonical text form: fixed item order, explicit sub-ids, two-space
/// indentation, one blank line between blocks. Parsing the output yields a
/// structurally equal model, and re-serializing that is byte-identical.
pub fn serialize_model(model: &ProjectModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER_COMMENT}");
    let _ = writeln!(out, "model {};", quote(&model.name));

    for uc in &model.use_cases {
        out.push('\n');
        let _ = writeln!(out, "usecase {} {} {{", uc.id, quote(&uc.name));
        for actor in &uc.actors {
            let _ = writeln!(out, "  actor {};", name(actor));
        }
        if let Some(d) = &uc.description {
            let _ = writeln!(out, "  description {};", quote(d));
        }
        for (k, v) in &uc.meta {
            let _ = writeln!(out, "  meta {} = {};", quote(k), quote(v));
        }
        for c in &uc.conditions {
            let local = c.id.rsplit_once('.').map(|(_, l)| l).unwrap_or(&c.id);
            let _ = writeln!(out, "  {} {} {};", c.kind.keyword(), local, quote(&c.text));
        }
        out.push_str("}\n");
    }

    for sd in &model.sequence_diagrams {
        out.push('\n');
        let _ = writeln!(out, "sequence {} {} for {} {{", sd.id, quote(&sd.name), sd.use_case);
        for l in &sd.lifelines {
            let kw = if l.system { "system" } else { "lifeline" };
            let _ = writeln!(out, "  {kw} {};", name(&l.name));
        }
        for m in &sd.messages {
            let _ = write!(out, "  msg {} {} -> {} : {}", m.seq, name(&m.sender), name(&m.receiver), name(&m.name));
            if !m.arguments.is_empty() {
                let args: Vec<String> = m
                    .arguments
                    .iter()
                    .map(|a| match &a.unit {
                        Some(u) => format!("{}: {}", name(&a.name), name(u)),
                        None => name(&a.name),
                    })
                    .collect();
                let _ = write!(out, "({})", args.join(", "));
            }
            if let Some(g) = &m.guard {
                let _ = write!(out, " [{}]", delimited(g, ']'));
            }
            if let Some(t) = &m.timing {
                let _ = write!(out, " {{{}}}", delimited(t, '}'));
            }
            if let Some(k) = m.kind {
                let _ = write!(out, " <<{}>>", k.as_str());
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }

    for sm in &model.state_machines {
        out.push('\n');
        let _ = writeln!(out, "statemachine {} for {} {{", sm.id, name(&sm.object));
        for s in &sm.states {
            let kw = if s.initial { "initial" } else { "state" };
            let _ = writeln!(out, "  {kw} {};", name(&s.name));
        }
        for t in &sm.transitions {
            let local = t.id.rsplit_once('.').map(|(_, l)| l).unwrap_or(&t.id);
            let _ = write!(out, "  transition {local} {} -> {} :", name(&t.source), name(&t.target));
            if let Some(e) = &t.event {
                let text = match e.kind {
                    EventKind::Signal => name(&e.payload),
                    EventKind::Call if is_call(&e.payload) => action_call(&e.payload),
                    _ => e.to_string(),
                };
                let _ = write!(out, " {text}");
            }
            if let Some(g) = &t.guard {
                let _ = write!(out, " [{}]", delimited(g, ']'));
            }
            if !t.actions.is_empty() {
                let actions: Vec<String> =
                    t.actions.iter().map(|a| if is_call(a) { action_call(a) } else { quote(a) }).collect();
                let _ = write!(out, " / {}", actions.join(", "));
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// `ident` or `ident(balanced text)` with no string literals inside.
fn is_call(s: &str) -> bool {
    match s.split_once('(') {
        None => is_ident(s),
        Some((head, rest)) => {
            let Some(inner) = rest.strip_suffix(')') else { return false };
            if !is_ident(head) || inner.trim() != inner || inner.is_empty() || inner.contains('"') {
                return false;
            }
            let mut depth = 0i32;
            for c in inner.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth < 0 {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
            depth == 0
        }
    }
}

fn name(s: &str) -> String {
    if is_ident(s) {
        s.to_string()
    } else {
        quote(s)
    }
}

/// Bare text when the parser would read it back unchanged, otherwise a
/// quoted string.
fn delimited(s: &str, close: char) -> String {
    let bare_ok = !s.is_empty()
        && s.trim() == s
        && !s.starts_with('"')
        && !s.contains(close)
        && !s.chars().any(char::is_control);
    if bare_ok {
        s.to_string()
    } else {
        quote(s)
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
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
