//! The `.amap` morphism file:
//!
//! ```text
//! alpha <source.pnet> <target.pnet>
//! map <source-node> <target-node>
//! ```
//!
//! Every source node must be listed; totality is never inferred.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::net::{quote_token, tokenize, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmapDocument {
    pub source: String,
    pub target: String,
    pub map: BTreeMap<String, String>,
    /// Line of each `map` entry, for error reporting.
    pub lines: BTreeMap<String, usize>,
}

pub fn parse_amap(text: &str) -> Result<AmapDocument, ParseError> {
    let mut header = None;
    let mut map = BTreeMap::new();
    let mut lines = BTreeMap::new();
    for (line, tokens) in tokenize(text)? {
        match tokens[0].as_str() {
            "alpha" => {
                if header.is_some() {
                    return Err(ParseError::new(line, "second `alpha` header"));
                }
                if tokens.len() != 3 {
                    return Err(ParseError::new(line, "`alpha` needs a source and a target file"));
                }
                header = Some((tokens[1].clone(), tokens[2].clone()));
            }
            "map" => {
                if header.is_none() {
                    return Err(ParseError::new(line, "`map` before the `alpha` header"));
                }
                if tokens.len() != 3 {
                    return Err(ParseError::new(line, "`map` needs a source and a target node"));
                }
                if let Some(prev) = lines.insert(tokens[1].clone(), line) {
                    return Err(ParseError::new(
                        line,
                        format!("`{}` is already mapped on line {prev}", tokens[1]),
                    ));
                }
                map.insert(tokens[1].clone(), tokens[2].clone());
            }
            other => return Err(ParseError::new(line, format!("unknown keyword `{other}`"))),
        }
    }
    let (source, target) = header.ok_or_else(|| ParseError::new(1, "missing `alpha` header"))?;
    Ok(AmapDocument {
        source,
        target,
        map,
        lines,
    })
}

pub fn print_amap(source: &str, target: &str, map: &BTreeMap<String, String>) -> String {
    let mut out = format!("alpha {} {}\n", quote_token(source), quote_token(target));
    for (a, b) in map {
        let _ = writeln!(out, "map {} {}", quote_token(a), quote_token(b));
    }
    out
}
