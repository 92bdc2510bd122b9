//! Event logs: reading, writing and per-agent projection.
//!
//! Two formats are understood. CSV has `case_id,activity[,timestamp]` rows,
//! with an optional header; events of a case keep their row order. The XES
//! subset is `<log>` / `<trace>` / `<event>` elements where every event
//! carries a `<string key="concept:name" value=".."/>` attribute.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event};
use quick_xml::{Reader, Writer};
use serde::Deserialize;
use thiserror::Error;

pub type Trace = Vec<String>;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{file}line {line}: {message}", file = .file.as_deref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Parse {
        file: Option<String>,
        line: usize,
        message: String,
    },
    #[error("{0}: the log contains no events")]
    EmptyLog(String),
    #[error("trace {0} is empty")]
    EmptyTrace(usize),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LogError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        LogError::Parse {
            file: None,
            line,
            message: message.into(),
        }
    }

    fn in_file(self, path: &str) -> Self {
        match self {
            LogError::Parse { line, message, .. } => LogError::Parse {
                file: Some(path.to_string()),
                line,
                message,
            },
            other => other,
        }
    }
}

/// A finite multiset of nonempty traces. Traces are kept in insertion order
/// so that writing a log is deterministic; equality is multiset equality.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    traces: Vec<Trace>,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.multiset() == other.multiset()
    }
}

impl Eq for EventLog {}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Result<Self, LogError> {
        if let Some(i) = traces.iter().position(Vec::is_empty) {
            return Err(LogError::EmptyTrace(i));
        }
        Ok(EventLog { traces })
    }

    pub fn from_strs(traces: &[&[&str]]) -> Result<Self, LogError> {
        Self::new(traces.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect())
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Vec::len).sum()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.traces.iter().flatten().cloned().collect()
    }

    /// Distinct traces with their multiplicities.
    pub fn multiset(&self) -> BTreeMap<&[String], usize> {
        let mut m = BTreeMap::new();
        for t in &self.traces {
            *m.entry(t.as_slice()).or_insert(0) += 1;
        }
        m
    }

    pub fn push(&mut self, trace: Trace) -> Result<(), LogError> {
        if trace.is_empty() {
            return Err(LogError::EmptyTrace(self.traces.len()));
        }
        self.traces.push(trace);
        Ok(())
    }
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (t, n)) in self.multiset().into_iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "<{}>", t.join(","))?;
            if n > 1 {
                write!(f, "^{n}")?;
            }
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub log: EventLog,
    /// Traces that became empty and were dropped.
    pub dropped: usize,
}

/// Restricts every trace to `alphabet`, dropping traces that become empty.
pub fn project(log: &EventLog, alphabet: &BTreeSet<String>) -> Projection {
    let mut traces = Vec::with_capacity(log.len());
    let mut dropped = 0;
    for t in log.traces() {
        let p: Trace = t.iter().filter(|a| alphabet.contains(*a)).cloned().collect();
        if p.is_empty() {
            dropped += 1;
        } else {
            traces.push(p);
        }
    }
    Projection {
        log: EventLog { traces },
        dropped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Send,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Interaction {
    pub channel: String,
    pub kind: Direction,
}

/// Which agent performs which activity, read from TOML:
///
/// ```toml
/// a1 = ["a", "b"]
/// a2 = ["c"]
///
/// [interactions]
/// b = { channel = "x", kind = "send" }
/// c = { channel = "x", kind = "receive" }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPartition {
    pub a1: BTreeSet<String>,
    pub a2: BTreeSet<String>,
    #[serde(default)]
    pub interactions: BTreeMap<String, Interaction>,
}

impl AgentPartition {
    pub fn new(a1: BTreeSet<String>, a2: BTreeSet<String>) -> Result<Self, LogError> {
        let p = AgentPartition {
            a1,
            a2,
            interactions: BTreeMap::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LogError> {
        if let Some(a) = self.a1.intersection(&self.a2).next() {
            return Err(LogError::Partition(format!("activity `{a}` belongs to both agents")));
        }
        for a in self.interactions.keys() {
            if !self.a1.contains(a) && !self.a2.contains(a) {
                return Err(LogError::Partition(format!("interaction `{a}` belongs to no agent")));
            }
        }
        Ok(())
    }

    /// Checks that the two alphabets cover the log.
    pub fn covers(&self, log: &EventLog) -> Result<(), LogError> {
        match log.alphabet().into_iter().find(|a| !self.a1.contains(a) && !self.a2.contains(a)) {
            Some(a) => Err(LogError::Partition(format!("activity `{a}` belongs to no agent"))),
            None => Ok(()),
        }
    }
}

impl FromStr for AgentPartition {
    type Err = LogError;

    fn from_str(text: &str) -> Result<Self, LogError> {
        let p: AgentPartition = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(1);
            LogError::parse(line, e.message().to_string())
        })?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Xes,
}

impl LogFormat {
    /// `.xes` files are XES, everything else is CSV.
    pub fn from_path(path: &Path) -> LogFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("xes") => LogFormat::Xes,
            _ => LogFormat::Csv,
        }
    }
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(LogFormat::Csv),
            "xes" => Ok(LogFormat::Xes),
            other => Err(format!("unknown log format `{other}` (expected csv or xes)")),
        }
    }
}

pub fn parse_csv(text: &str) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut order: Vec<String> = Vec::new();
    let mut cases: HashMap<String, Trace> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            LogError::parse(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && row.get(0) == Some("case_id") {
            if row.get(1) != Some("activity") {
                return Err(LogError::parse(line, "header must start with `case_id,activity`"));
            }
            continue;
        }
        if row.len() < 2 || row.len() > 3 {
            return Err(LogError::parse(line, format!("expected case_id,activity[,timestamp], found {} field(s)", row.len())));
        }
        let (case, activity) = (&row[0], &row[1]);
        if case.is_empty() {
            return Err(LogError::parse(line, "empty case id"));
        }
        if activity.is_empty() {
            return Err(LogError::parse(line, "empty activity"));
        }
        cases
            .entry(case.to_string())
            .or_insert_with(|| {
                order.push(case.to_string());
                Vec::new()
            })
            .push(activity.to_string());
    }
    let traces = order.into_iter().map(|c| cases.remove(&c).unwrap()).collect();
    Ok(EventLog { traces })
}

/// Case ids are `case1`, `case2`, ... in trace order.
pub fn write_csv(log: &EventLog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case_id", "activity"]).expect("in-memory write");
    for (i, t) in log.traces().iter().enumerate() {
        let case = format!("case{}", i + 1);
        for a in t {
            w.write_record([case.as_str(), a.as_str()]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 input")
}

fn line_at(text: &str, pos: u64) -> usize {
    let pos = (pos as usize).min(text.len());
    text.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1
}

pub fn parse_xes(text: &str) -> Result<EventLog, LogError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut traces = Vec::new();
    let mut trace: Option<Trace> = None;
    let mut event: Option<Option<String>> = None;
    let mut seen_log = false;
    loop {
        let pos = reader.buffer_position();
        let ev = reader.read_event().map_err(|e| LogError::parse(line_at(text, pos), e.to_string()))?;
        let line = line_at(text, pos);
        match ev {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"log" => seen_log = true,
            Event::Start(e) if e.name().as_ref() == b"trace" => {
                if trace.is_some() {
                    return Err(LogError::parse(line, "nested <trace>"));
                }
                trace = Some(Vec::new());
            }
            Event::Empty(e) if e.name().as_ref() == b"trace" => {
                return Err(LogError::parse(line, "empty <trace>"));
            }
            Event::Start(e) if e.name().as_ref() == b"event" => {
                if trace.is_none() {
                    return Err(LogError::parse(line, "<event> outside a <trace>"));
                }
                event = Some(None);
            }
            Event::Empty(e) if e.name().as_ref() == b"event" => {
                return Err(LogError::parse(line, "event without concept:name"));
            }
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"string" => {
                let mut key = None;
                let mut value = None;
                for a in e.attributes() {
                    let a = a.map_err(|err| LogError::parse(line, err.to_string()))?;
                    let v = a
                        .unescape_value()
                        .map_err(|err| LogError::parse(line, err.to_string()))?
                        .into_owned();
                    match a.key.as_ref() {
                        b"key" => key = Some(v),
                        b"value" => value = Some(v),
                        _ => {}
                    }
                }
                if let (Some(slot), Some("concept:name")) = (event.as_mut(), key.as_deref()) {
                    if slot.is_some() {
                        return Err(LogError::parse(line, "event has two concept:name attributes"));
                    }
                    *slot = Some(value.ok_or_else(|| LogError::parse(line, "concept:name without a value"))?);
                }
            }
            Event::End(e) if e.name().as_ref() == b"event" => {
                let name = event.take().flatten().ok_or_else(|| LogError::parse(line, "event without concept:name"))?;
                trace.as_mut().expect("event inside trace").push(name);
            }
            Event::End(e) if e.name().as_ref() == b"trace" => {
                let t = trace.take().expect("balanced tags");
                if t.is_empty() {
                    return Err(LogError::parse(line, "empty <trace>"));
                }
                traces.push(t);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !seen_log {
        return Err(LogError::parse(1, "missing <log> element"));
    }
    Ok(EventLog { traces })
}

pub fn write_xes(log: &EventLog) -> String {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    let put = |w: &mut Writer<Vec<u8>>, e: Event| w.write_event(e).expect("in-memory write");
    put(&mut w, Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)));
    put(&mut w, Event::Start(BytesStart::new("log")));
    let string = |key: &str, value: &str| {
        let mut s = BytesStart::new("string");
        s.push_attribute(("key", key));
        s.push_attribute(("value", value));
        Event::Empty(s)
    };
    for (i, t) in log.traces().iter().enumerate() {
        put(&mut w, Event::Start(BytesStart::new("trace")));
        put(&mut w, string("concept:name", &format!("case{}", i + 1)));
        for a in t {
            put(&mut w, Event::Start(BytesStart::new("event")));
            put(&mut w, string("concept:name", a));
            put(&mut w, Event::End(BytesEnd::new("event")));
        }
        put(&mut w, Event::End(BytesEnd::new("trace")));
    }
    put(&mut w, Event::End(BytesEnd::new("log")));
    let mut out = String::from_utf8(w.into_inner()).expect("utf-8 input");
    out.push('\n');
    out
}

pub fn parse_log(text: &str, format: LogFormat) -> Result<EventLog, LogError> {
    match format {
        LogFormat::Csv => parse_csv(text),
        LogFormat::Xes => parse_xes(text),
    }
}

pub fn write_log(log: &EventLog, format: LogFormat) -> String {
    match format {
        LogFormat::Csv => write_csv(log),
        LogFormat::Xes => write_xes(log),
    }
}

/// Reads a log file; errors name the file. A log without events is an error.
pub fn read_log(path: &Path, format: LogFormat) -> Result<EventLog, LogError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: name.clone(),
        source,
    })?;
    let log = parse_log(&text, format).map_err(|e| e.in_file(&name))?;
    if log.is_empty() {
        return Err(LogError::EmptyLog(name));
    }
    Ok(log)
}
