use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::{ParseError, SourceSpan};
use crate::model::{
    Argument, Condition, ConditionKind, Event, EventKind, Lifeline, Message, MessageKind, ProjectModel, SequenceDiagram,
    State, StateMachine, Transition, UseCase,
};

const TOP_LEVEL: [&str; 4] = ["model", "usecase", "sequence", "statemachine"];

/// Result of parsing one file: its elements plus the optional `model` header.
pub struct ParsedFile {
    pub name: Option<String>,
    pub model: ProjectModel,
}

pub fn parse_file(path: &Path, text: &str) -> Result<ParsedFile, Vec<ParseError>> {
    let mut p = Parser { src: text, pos: 0, line: 1, col: 1, file: path.to_path_buf(), model: ProjectModel::default() };
    let mut name = None;
    let mut errors = Vec::new();

    loop {
        p.skip_trivia();
        if p.eof() {
            break;
        }
        let block_start = (p.pos, p.line, p.col);
        let result = match p.peek_ident().as_deref() {
            Some("model") => p.header().map(|n| {
                name.get_or_insert(n);
            }),
            Some("usecase") => p.use_case(),
            Some("sequence") => p.sequence(),
            Some("statemachine") => p.state_machine(),
            _ => Err(p.error_here("unexpected input at top level", Some("usecase, sequence or statemachine"))),
        };
        if let Err(e) = result {
            errors.push(e);
            (p.pos, p.line, p.col) = block_start;
            p.recover();
        }
    }

    if errors.is_empty() {
        Ok(ParsedFile { name, model: p.model })
    } else {
        Err(errors)
    }
}

type PResult<T> = Result<T, ParseError>;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    file: PathBuf,
    model: ProjectModel,
}

#[derive(Clone, Copy)]
struct Mark {
    line: u32,
    col: u32,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> Mark {
        Mark { line: self.line, col: self.col }
    }

    fn span(&self, m: Mark, length: usize) -> SourceSpan {
        SourceSpan { file: self.file.clone(), line: m.line, column: m.col, length: length as u32 }
    }

    fn error_at(&self, m: Mark, message: impl Into<String>, expected: Option<&str>) -> ParseError {
        ParseError { span: self.span(m, 1), message: message.into(), expected: expected.map(str::to_string) }
    }

    fn error_here(&self, message: impl Into<String>, expected: Option<&str>) -> ParseError {
        self.error_at(self.mark(), message, expected)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    /// Skips to the start of the next line whose first token is a
    /// top-level keyword.
    fn recover(&mut self) {
        self.bump();
        while !self.eof() {
            if self.col == 1 {
                while matches!(self.peek(), Some(' ' | '\t')) {
                    self.bump();
                }
                if self.peek_ident().is_some_and(|w| TOP_LEVEL.contains(&w.as_str())) {
                    return;
                }
            }
            self.bump();
        }
    }

    fn peek_ident(&self) -> Option<String> {
        let rest = self.rest();
        let mut chars = rest.char_indices();
        let (_, first) = chars.next()?;
        if !(first.is_alphabetic() || first == '_') {
            return None;
        }
        let end = chars.find(|(_, c)| !(c.is_alphanumeric() || *c == '_')).map(|(i, _)| i).unwrap_or(rest.len());
        Some(rest[..end].to_string())
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        self.skip_trivia();
        let word = self.peek_ident().ok_or_else(|| self.error_here(format!("missing {what}"), Some("identifier")))?;
        for _ in word.chars() {
            self.bump();
        }
        Ok(word)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Mark> {
        self.skip_trivia();
        let m = self.mark();
        match self.peek_ident() {
            Some(w) if w == kw => {
                self.ident(kw)?;
                Ok(m)
            }
            _ => Err(self.error_here(format!("expected `{kw}`"), Some(kw))),
        }
    }

    fn at(&mut self, s: &str) -> bool {
        self.skip_trivia();
        self.rest().starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.at(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            let found = self.peek().map(|c| format!("found `{c}`")).unwrap_or_else(|| "found end of file".into());
            Err(self.error_here(format!("expected `{s}`, {found}"), Some(s)))
        }
    }

    fn string(&mut self) -> PResult<String> {
        self.skip_trivia();
        let start = self.mark();
        if self.peek() != Some('"') {
            return Err(self.error_here("expected a quoted string", Some("\"...\"")));
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated string", Some("closing `\"`"))),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some('u') => out.push(self.unicode_escape()?),
                    _ => return Err(self.error_here("unknown escape sequence", Some("\\\" \\\\ \\n \\t \\r or \\u{..}"))),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn unicode_escape(&mut self) -> PResult<char> {
        if self.bump() != Some('{') {
            return Err(self.error_here("malformed unicode escape", Some("\\u{hex}")));
        }
        let mut hex = String::new();
        loop {
            match self.bump() {
                Some('}') => break,
                Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
                _ => return Err(self.error_here("malformed unicode escape", Some("\\u{hex}"))),
            }
        }
        u32::from_str_radix(&hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| self.error_here("invalid unicode scalar", None))
    }

    /// Identifier or quoted string.
    fn name(&mut self, what: &str) -> PResult<String> {
        if self.at("\"") {
            self.string()
        } else {
            self.ident(what)
        }
    }

    fn number(&mut self) -> PResult<u32> {
        self.skip_trivia();
        let digits: String = self.rest().chars().take_while(char::is_ascii_digit).collect();
        if digits.is_empty() {
            return Err(self.error_here("expected a message number", Some("integer")));
        }
        let value = digits.parse().map_err(|_| self.error_here("message number out of range", None))?;
        for _ in 0..digits.len() {
            self.bump();
        }
        Ok(value)
    }

    /// Text between `open` and `close`, either bare (trimmed) or as one
    /// quoted string. The opening delimiter has already been consumed.
    fn delimited_text(&mut self, close: char, what: &str) -> PResult<String> {
        let start = self.mark();
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
        if self.peek() == Some('"') {
            let s = self.string()?;
            self.expect(&close.to_string())?;
            return Ok(s);
        }
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, format!("unterminated {what}"), Some(&format!("`{close}`")))),
                Some(c) if c == close => break,
                Some(c) => out.push(c),
            }
        }
        let trimmed = out.trim();
        if trimmed.is_empty() {
            return Err(self.error_at(start, format!("empty {what}"), None));
        }
        Ok(trimmed.to_string())
    }

    /// Raw text up to the `)` matching an already consumed `(`.
    fn paren_text(&mut self) -> PResult<String> {
        let start = self.mark();
        let mut depth = 0usize;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unbalanced parentheses", Some("`)`"))),
                Some('(') => {
                    depth += 1;
                    out.push('(');
                }
                Some(')') if depth == 0 => break,
                Some(')') => {
                    depth -= 1;
                    out.push(')');
                }
                Some(c) => out.push(c),
            }
        }
        Ok(out.trim().to_string())
    }

    fn record_span(&mut self, id: &str, m: Mark, length: usize) {
        let span = self.span(m, length);
        self.model.spans.0.insert(id.to_string(), span);
    }

    fn header(&mut self) -> PResult<String> {
        self.keyword("model")?;
        let name = self.string()?;
        self.expect(";")?;
        Ok(name)
    }

    fn use_case(&mut self) -> PResult<()> {
        let m = self.keyword("usecase")?;
        let id = self.ident("use case id")?;
        let name = self.string()?;
        self.expect("{")?;

        let mut uc = UseCase { id: id.clone(), name, actors: vec![], conditions: vec![], description: None, meta: vec![] };
        let mut pending: Vec<(Option<u32>, ConditionKind, String, Mark)> = Vec::new();
        while !self.eat("}") {
            let item = self.mark();
            let word = self.ident("use case item").map_err(|_| {
                self.error_here("unexpected input in use case", Some("actor, pre, post, invariant, description, meta or `}`"))
            })?;
            match word.as_str() {
                "actor" => uc.actors.push(self.name("actor name")?),
                "pre" | "post" | "invariant" => {
                    let kind = match word.as_str() {
                        "pre" => ConditionKind::Precondition,
                        "post" => ConditionKind::Postcondition,
                        _ => ConditionKind::Invariant,
                    };
                    let local = if self.at("\"") {
                        None
                    } else {
                        let cm = self.mark();
                        let label = self.ident("condition id")?;
                        Some(
                            crate::ids::split_numbered(&label, "C")
                                .ok_or_else(|| self.error_at(cm, format!("`{label}` is not a condition id"), Some("C<digits>")))?,
                        )
                    };
                    let text = self.string()?;
                    pending.push((local, kind, text, item));
                }
                "description" => uc.description = Some(self.string()?),
                "meta" => {
                    let key = self.string()?;
                    self.expect("=")?;
                    uc.meta.push((key, self.string()?));
                }
                "extend" | "include" => {
                    return Err(self.error_at(
                        item,
                        format!("`{word}` relations are not supported; describe the behaviour in its own use case"),
                        None,
                    ))
                }
                other => {
                    return Err(self.error_at(
                        item,
                        format!("unknown use case item `{other}`"),
                        Some("actor, pre, post, invariant, description or meta"),
                    ))
                }
            }
            self.expect(";")?;
        }

        let numbers = assign_numbers(pending.iter().map(|p| p.0));
        for ((_, kind, text, mark), n) in pending.into_iter().zip(numbers) {
            let cid = format!("{id}.C{n}");
            self.record_span(&cid, mark, kind.keyword().len());
            uc.conditions.push(Condition { id: cid, kind, text });
        }
        self.record_span(&id, m, "usecase".len());
        self.model.use_cases.push(uc);
        Ok(())
    }

    fn sequence(&mut self) -> PResult<()> {
        let m = self.keyword("sequence")?;
        let id = self.ident("sequence diagram id")?;
        let name = self.string()?;
        self.keyword("for")?;
        let use_case = self.ident("use case id")?;
        self.expect("{")?;

        let mut sd = SequenceDiagram { id: id.clone(), name, use_case, lifelines: vec![], messages: vec![] };
        while !self.eat("}") {
            let item = self.mark();
            let word = self
                .ident("sequence item")
                .map_err(|_| self.error_here("unexpected input in sequence diagram", Some("lifeline, system, msg or `}`")))?;
            match word.as_str() {
                "lifeline" => sd.lifelines.push(Lifeline { name: self.name("lifeline name")?, system: false }),
                "system" => sd.lifelines.push(Lifeline { name: self.name("lifeline name")?, system: true }),
                "msg" => {
                    let msg = self.message()?;
                    self.record_span(&sd.message_id(&msg), item, 3);
                    sd.messages.push(msg);
                }
                "alt" | "opt" | "loop" | "par" | "break" | "critical" | "fragment" => {
                    return Err(self.error_at(
                        item,
                        format!("combined fragment `{word}` is not supported; draw each alternative as its own diagram"),
                        None,
                    ))
                }
                other => {
                    return Err(self.error_at(item, format!("unknown sequence item `{other}`"), Some("lifeline, system or msg")))
                }
            }
            self.expect(";")?;
        }
        self.record_span(&id, m, "sequence".len());
        self.model.sequence_diagrams.push(sd);
        Ok(())
    }

    fn message(&mut self) -> PResult<Message> {
        let seq = self.number()?;
        let sender = self.name("sender lifeline")?;
        self.expect("->")?;
        let receiver = self.name("receiver lifeline")?;
        self.expect(":")?;
        let name = self.name("message name")?;
        let mut arguments = Vec::new();
        if self.eat("(") && !self.eat(")") {
            loop {
                let arg = self.name("argument name")?;
                let unit = if self.eat(":") { Some(self.name("argument unit")?) } else { None };
                arguments.push(Argument { name: arg, unit });
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let guard = if self.eat("[") { Some(self.delimited_text(']', "guard")?) } else { None };
        let timing = if self.eat("{") { Some(self.delimited_text('}', "timing constraint")?) } else { None };
        let kind = if self.eat("<<") {
            let km = self.mark();
            let word = self.ident("message kind")?;
            let kind = MessageKind::parse(&word)
                .ok_or_else(|| self.error_at(km, format!("unknown message kind `{word}`"), Some("indirect, cognitive or physical")))?;
            self.expect(">>")?;
            Some(kind)
        } else {
            None
        };
        Ok(Message { seq, sender, receiver, name, arguments, guard, timing, kind })
    }

    fn state_machine(&mut self) -> PResult<()> {
        let m = self.keyword("statemachine")?;
        let id = self.ident("state machine id")?;
        self.keyword("for")?;
        let object = self.name("object name")?;
        self.expect("{")?;

        let mut sm = StateMachine { id: id.clone(), object, states: vec![], transitions: vec![] };
        let mut pending: Vec<(Option<u32>, Transition, Mark)> = Vec::new();
        while !self.eat("}") {
            let item = self.mark();
            let word = self
                .ident("state machine item")
                .map_err(|_| self.error_here("unexpected input in state machine", Some("initial, state, transition or `}`")))?;
            match word.as_str() {
                "initial" | "state" => {
                    let name = self.name("state name")?;
                    if self.at("/") || self.at("{") {
                        return Err(self.error_here(
                            format!("state `{name}` carries an action; actions belong on transitions"),
                            Some("`;`"),
                        ));
                    }
                    sm.states.push(State { name, initial: word == "initial" });
                }
                "transition" => {
                    let (local, t) = self.transition()?;
                    pending.push((local, t, item));
                }
                "entry" | "exit" | "do" => {
                    return Err(self.error_at(item, format!("`{word}` actions on states are not supported; put actions on transitions"), None))
                }
                other => {
                    return Err(self.error_at(item, format!("unknown state machine item `{other}`"), Some("initial, state or transition")))
                }
            }
            self.expect(";")?;
        }

        let numbers = assign_numbers(pending.iter().map(|p| p.0));
        for ((_, mut t, mark), n) in pending.into_iter().zip(numbers) {
            t.id = format!("{id}.T{n}");
            self.record_span(&t.id, mark, "transition".len());
            sm.transitions.push(t);
        }
        self.record_span(&id, m, "statemachine".len());
        self.model.state_machines.push(sm);
        Ok(())
    }

    fn transition(&mut self) -> PResult<(Option<u32>, Transition)> {
        let first_mark = {
            self.skip_trivia();
            self.mark()
        };
        let first = self.name("source state")?;
        let (local, source) = if self.at("->") {
            (None, first)
        } else {
            let n = crate::ids::split_numbered(&first, "T")
                .ok_or_else(|| self.error_at(first_mark, format!("`{first}` is not a transition id"), Some("T<digits> or `->`")))?;
            (Some(n), self.name("source state")?)
        };
        self.expect("->")?;
        let target = self.name("target state")?;
        let label_mark = self.mark();
        let (event, guard, actions) = if self.eat(":") { self.transition_label()? } else { (None, None, vec![]) };
        if event.is_none() && guard.is_none() && actions.is_empty() {
            return Err(self.error_at(label_mark, "empty transition label", Some("event [guard] / action()")));
        }
        Ok((local, Transition { id: String::new(), source, target, event, guard, actions }))
    }

    fn transition_label(&mut self) -> PResult<(Option<Event>, Option<String>, Vec<String>)> {
        let event = if self.at("[") || self.at("/") || self.at(";") { None } else { Some(self.event()?) };
        let guard = if self.eat("[") { Some(self.delimited_text(']', "guard")?) } else { None };
        let mut actions = Vec::new();
        if self.eat("/") {
            loop {
                actions.push(self.action()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        Ok((event, guard, actions))
    }

    fn event(&mut self) -> PResult<Event> {
        if self.at("\"") {
            return Ok(Event::new(EventKind::Signal, self.string()?));
        }
        let word = self.ident("event")?;
        if !self.eat("(") {
            return Ok(Event::new(EventKind::Signal, word));
        }
        let inner = self.paren_text()?;
        let kind = match word.as_str() {
            "after" => EventKind::TemporalAfter,
            "when" => EventKind::TemporalWhen,
            "change" => EventKind::Change,
            _ => {
                let payload = if inner.is_empty() { word } else { format!("{word}({inner})") };
                return Ok(Event::new(EventKind::Call, payload));
            }
        };
        Ok(Event::new(kind, inner))
    }

    fn action(&mut self) -> PResult<String> {
        if self.at("\"") {
            return self.string();
        }
        let word = self.ident("action")?;
        if self.eat("(") {
            let inner = self.paren_text()?;
            if !inner.is_empty() {
                return Ok(format!("{word}({inner})"));
            }
        }
        Ok(word)
    }
}

/// Explicit numbers are kept; implicit ones take the next free number in
/// declaration order.
fn assign_numbers(explicit: impl Iterator<Item = Option<u32>> + Clone) -> Vec<u32> {
    let taken: BTreeSet<u32> = explicit.clone().flatten().collect();
    let mut next = 0;
    explicit
        .map(|e| match e {
            Some(n) => n,
            None => {
                next += 1;
                while taken.contains(&next) {
                    next += 1;
                }
                next
            }
        })
        .collect()
}
