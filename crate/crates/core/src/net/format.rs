//! The line-oriented `.pnet` text format.
//!
//! ```text
//! # comment
//! place <id> [init] [final]
//! trans <id> [label=<activity>]
//! arc <src> <dst>
//! channel <id>
//! ```
//!
//! Tokens are whitespace separated. A token may contain double-quoted
//! segments (with `\"` and `\\` escapes) so ids and labels can carry spaces.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::{Marking, NetBuilder, NetError, PetriNet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// A parsed `.pnet` file: the net plus the declared markings and channel flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDocument {
    pub net: PetriNet,
    pub initial: Marking,
    pub final_marking: Marking,
    pub channels: BTreeSet<String>,
}

impl NetDocument {
    pub fn new(net: PetriNet) -> Self {
        NetDocument {
            net,
            initial: Marking::new(),
            final_marking: Marking::new(),
            channels: BTreeSet::new(),
        }
    }
}

/// Splits text into `(line number, tokens)` pairs, skipping blank and comment lines.
pub fn tokenize(text: &str) -> Result<Vec<(usize, Vec<String>)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut tokens = Vec::new();
        let mut cur = String::new();
        let mut in_token = false;
        let mut chars = raw.chars();
        while let Some(c) = chars.next() {
            match c {
                '#' => break,
                '"' => {
                    in_token = true;
                    loop {
                        match chars.next() {
                            Some('"') => break,
                            Some('\\') => match chars.next() {
                                Some(e) => cur.push(e),
                                None => return Err(ParseError::new(line_no, "dangling escape")),
                            },
                            Some(ch) => cur.push(ch),
                            None => return Err(ParseError::new(line_no, "unterminated quote")),
                        }
                    }
                }
                c if c.is_whitespace() => {
                    if in_token {
                        tokens.push(std::mem::take(&mut cur));
                        in_token = false;
                    }
                }
                c => {
                    in_token = true;
                    cur.push(c);
                }
            }
        }
        if in_token {
            tokens.push(cur);
        }
        if !tokens.is_empty() {
            out.push((line_no, tokens));
        }
    }
    Ok(out)
}

/// Quotes a token when it would not survive [`tokenize`] verbatim.
pub fn quote_token(s: &str) -> String {
    let plain = !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '\\' || c == '#');
    if plain {
        return s.to_string();
    }
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

pub fn parse_pnet(text: &str) -> Result<NetDocument, ParseError> {
    let mut builder = NetBuilder::new();
    let mut node_lines: HashMap<String, usize> = HashMap::new();
    let mut arc_lines: HashMap<(String, String), usize> = HashMap::new();
    let mut initial = Vec::new();
    let mut finals = Vec::new();
    let mut channels = Vec::new();

    for (line, tokens) in tokenize(text)? {
        let keyword = tokens[0].as_str();
        let args = &tokens[1..];
        match keyword {
            "place" => {
                let id = args
                    .first()
                    .ok_or_else(|| ParseError::new(line, "place needs an id"))?;
                declare(&mut node_lines, id, line)?;
                for flag in &args[1..] {
                    match flag.as_str() {
                        "init" => initial.push(id.clone()),
                        "final" => finals.push(id.clone()),
                        other => {
                            return Err(ParseError::new(line, format!("unknown place flag `{other}`")))
                        }
                    }
                }
                builder.place(id.clone());
            }
            "trans" => {
                let id = args
                    .first()
                    .ok_or_else(|| ParseError::new(line, "trans needs an id"))?;
                declare(&mut node_lines, id, line)?;
                let mut label = None;
                for attr in &args[1..] {
                    match attr.strip_prefix("label=") {
                        Some(l) if label.is_none() => label = Some(l.to_string()),
                        Some(_) => return Err(ParseError::new(line, "label given twice")),
                        None => {
                            return Err(ParseError::new(
                                line,
                                format!("unknown transition attribute `{attr}`"),
                            ))
                        }
                    }
                }
                builder.transition_with(id.clone(), label);
            }
            "arc" => {
                if args.len() != 2 {
                    return Err(ParseError::new(line, "arc needs exactly two endpoints"));
                }
                let key = (args[0].clone(), args[1].clone());
                if arc_lines.insert(key, line).is_some() {
                    return Err(ParseError::new(
                        line,
                        format!("duplicate arc {} -> {}", args[0], args[1]),
                    ));
                }
                builder.arc(args[0].clone(), args[1].clone());
            }
            "channel" => {
                if args.len() != 1 {
                    return Err(ParseError::new(line, "channel needs exactly one place id"));
                }
                channels.push((line, args[0].clone()));
            }
            other => return Err(ParseError::new(line, format!("unknown keyword `{other}`"))),
        }
    }

    let net = builder.build().map_err(|e| {
        let line = match &e {
            NetError::DuplicateNode(id)
            | NetError::EmptyPreset(id)
            | NetError::EmptyPostset(id)
            | NetError::Isolated(id) => node_lines.get(id).copied().unwrap_or(0),
            NetError::UnknownNode(id) => arc_lines
                .iter()
                .filter(|((a, b), _)| a == id || b == id)
                .map(|(_, &l)| l)
                .min()
                .unwrap_or(0),
            NetError::NotBipartite(a, b) | NetError::DuplicateArc(a, b) => {
                arc_lines.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
            }
            _ => 0,
        };
        ParseError::new(line, e.to_string())
    })?;

    let mut doc = NetDocument::new(net);
    doc.initial = Marking::from_places(initial);
    doc.final_marking = Marking::from_places(finals);
    for (line, id) in channels {
        if doc.net.place(&id).is_none() {
            return Err(ParseError::new(line, format!("channel `{id}` is not a declared place")));
        }
        doc.channels.insert(id);
    }
    Ok(doc)
}

fn declare(lines: &mut HashMap<String, usize>, id: &str, line: usize) -> Result<(), ParseError> {
    if let Some(prev) = lines.insert(id.to_string(), line) {
        return Err(ParseError::new(
            line,
            format!("duplicate node id `{id}` (first declared on line {prev})"),
        ));
    }
    Ok(())
}

pub fn print_pnet(doc: &NetDocument) -> String {
    let net = &doc.net;
    let mut out = String::new();
    for p in net.places() {
        out.push_str("place ");
        out.push_str(&quote_token(p));
        if doc.initial.get(p) > 0 {
            out.push_str(" init");
        }
        if doc.final_marking.get(p) > 0 {
            out.push_str(" final");
        }
        out.push('\n');
    }
    for (t, id) in net.transitions().iter().enumerate() {
        out.push_str("trans ");
        out.push_str(&quote_token(id));
        if let Some(l) = net.label(t) {
            let _ = write!(out, " {}", quote_token(&format!("label={l}")));
        }
        out.push('\n');
    }
    for (a, b) in net.arc_ids() {
        let _ = writeln!(out, "arc {} {}", quote_token(a), quote_token(b));
    }
    for c in &doc.channels {
        let _ = writeln!(out, "channel {}", quote_token(c));
    }
    out
}
