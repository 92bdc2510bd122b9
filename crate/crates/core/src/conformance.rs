//! Token-replay fitness and escaping-edge precision.
//!
//! Transitions without a label are silent. When a labelled transition is not
//! enabled, the shortest sequence of silent transitions that enables it is
//! fired first (ties broken by transition id); failing that, the missing
//! tokens are inserted and counted.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::gwf::GwfNet;
use crate::log::{EventLog, Trace};
use crate::net::PetriNet;

/// Bound on the markings visited by one silent-path search.
pub const SILENT_SEARCH_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConformanceError {
    #[error("label `{0}` is carried by several transitions; duplicate labels are not supported")]
    DuplicateLabel(String),
}

/// Replay counts of one distinct trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceReplay {
    pub trace: Trace,
    pub count: usize,
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
    /// Events whose label no transition carries.
    pub unmatched: u64,
}

impl TraceReplay {
    pub fn fits(&self) -> bool {
        self.missing == 0 && self.remaining == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrecisionDetails {
    pub states: usize,
    /// Σ w(s)·|observed(s)|
    pub observed: u64,
    /// Σ w(s)·|enabled(s)|
    pub enabled: u64,
    /// Prefix states not evaluated because reaching them needed missing tokens.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub fitness: f64,
    pub precision: f64,
    pub traces: Vec<TraceReplay>,
    pub precision_details: PrecisionDetails,
}

impl QualityReport {
    fn sums(&self) -> (u64, u64, u64, u64) {
        self.traces.iter().fold((0, 0, 0, 0), |(p, c, m, r), t| {
            let n = t.count as u64;
            (p + n * t.produced, c + n * t.consumed, m + n * t.missing, r + n * t.remaining)
        })
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, c, m, r) = self.sums();
        let n: usize = self.traces.iter().map(|t| t.count).sum();
        let fitting: usize = self.traces.iter().filter(|t| t.fits()).map(|t| t.count).sum();
        let d = &self.precision_details;
        writeln!(f, "fitness: {:.4}", self.fitness)?;
        writeln!(f, "precision: {:.4}", self.precision)?;
        writeln!(f, "traces: {n}")?;
        writeln!(f, "fitting_traces: {fitting}")?;
        writeln!(f, "produced: {p}")?;
        writeln!(f, "consumed: {c}")?;
        writeln!(f, "missing: {m}")?;
        writeln!(f, "remaining: {r}")?;
        writeln!(f, "prefix_states: {}", d.states)?;
        writeln!(f, "observed: {}", d.observed)?;
        writeln!(f, "enabled: {}", d.enabled)?;
        writeln!(f, "skipped_states: {}", d.skipped)
    }
}

struct Replayer<'a> {
    net: &'a PetriNet,
    by_label: HashMap<&'a str, usize>,
    silent: Vec<usize>,
    initial: Vec<u32>,
    fin: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
struct Counts {
    produced: u64,
    consumed: u64,
    missing: u64,
    unmatched: u64,
}

impl<'a> Replayer<'a> {
    fn new(g: &'a GwfNet) -> Result<Self, ConformanceError> {
        let net = g.net();
        let mut by_label = HashMap::new();
        let mut silent = Vec::new();
        for t in 0..net.transition_count() {
            match net.label(t) {
                Some(l) => {
                    if by_label.insert(l, t).is_some() {
                        return Err(ConformanceError::DuplicateLabel(l.to_string()));
                    }
                }
                None => silent.push(t),
            }
        }
        silent.sort_by_key(|&t| net.transition_id(t));
        Ok(Replayer {
            net,
            by_label,
            silent,
            initial: g.initial_tokens(),
            fin: g.final_tokens(),
        })
    }

    fn fire(&self, m: &mut Vec<u32>, t: usize, c: &mut Counts) {
        for &p in self.net.pre_t(t) {
            if m[p] == 0 {
                c.missing += 1;
            } else {
                m[p] -= 1;
            }
            c.consumed += 1;
        }
        for &p in self.net.post_t(t) {
            m[p] += 1;
            c.produced += 1;
        }
    }

    /// Shortest silent sequence from `m` to a marking satisfying `goal`.
    fn silent_path(&self, m: &[u32], goal: impl Fn(&[u32]) -> bool) -> Option<Vec<usize>> {
        if goal(m) {
            return Some(Vec::new());
        }
        let mut parent: HashMap<Vec<u32>, (Vec<u32>, usize)> = HashMap::new();
        let mut queue = VecDeque::from([m.to_vec()]);
        let mut seen = HashSet::from([m.to_vec()]);
        while let Some(cur) = queue.pop_front() {
            for &t in &self.silent {
                if !self.net.is_enabled_at(&cur, t) {
                    continue;
                }
                let next = self.net.fire_tokens(&cur, t);
                if !seen.insert(next.clone()) {
                    continue;
                }
                parent.insert(next.clone(), (cur.clone(), t));
                if goal(&next) {
                    let mut path = Vec::new();
                    let mut at = next;
                    while let Some((prev, t)) = parent.get(&at) {
                        path.push(*t);
                        at = prev.clone();
                    }
                    path.reverse();
                    return Some(path);
                }
                if seen.len() >= SILENT_SEARCH_CAP {
                    return None;
                }
                queue.push_back(next);
            }
        }
        None
    }

    /// Replays one event. Returns false when the event needed missing tokens
    /// or had no transition.
    fn step(&self, m: &mut Vec<u32>, activity: &str, c: &mut Counts) -> bool {
        let Some(&t) = self.by_label.get(activity) else {
            c.unmatched += 1;
            c.missing += 1;
            c.consumed += 1;
            return false;
        };
        if !self.net.is_enabled_at(m, t) {
            if let Some(path) = self.silent_path(m, |x| self.net.is_enabled_at(x, t)) {
                for s in path {
                    self.fire(m, s, c);
                }
            }
        }
        let before = c.missing;
        self.fire(m, t, c);
        c.missing == before
    }

    fn replay(&self, trace: &[String]) -> (Counts, u64) {
        let mut c = Counts {
            produced: self.initial.iter().map(|&x| x as u64).sum(),
            ..Counts::default()
        };
        let mut m = self.initial.clone();
        for a in trace {
            self.step(&mut m, a, &mut c);
        }
        if m != self.fin {
            let fin = &self.fin;
            if let Some(path) = self.silent_path(&m, |x| x == fin.as_slice()) {
                for s in path {
                    self.fire(&mut m, s, &mut c);
                }
            }
        }
        for (p, &want) in self.fin.iter().enumerate() {
            c.consumed += want as u64;
            let have = m[p].min(want);
            c.missing += (want - have) as u64;
            m[p] -= have;
        }
        let remaining = m.iter().map(|&x| x as u64).sum();
        (c, remaining)
    }

    /// Labels of transitions enabled at `m` or after silent steps from it.
    fn enabled_labels(&self, m: &[u32]) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        let mut seen = HashSet::from([m.to_vec()]);
        let mut queue = VecDeque::from([m.to_vec()]);
        while let Some(cur) = queue.pop_front() {
            for t in self.net.enabled_at(&cur) {
                match self.net.label(t) {
                    Some(l) => {
                        out.insert(l);
                    }
                    None => {
                        let next = self.net.fire_tokens(&cur, t);
                        if seen.len() < SILENT_SEARCH_CAP && seen.insert(next.clone()) {
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        out
    }
}

fn distinct(log: &EventLog) -> BTreeMap<&[String], usize> {
    log.multiset()
}

/// Fitness = ½(1 − missing/consumed) + ½(1 − remaining/produced), summed
/// over the log. Remaining tokens exclude the final marking.
pub fn token_replay_fitness(g: &GwfNet, log: &EventLog) -> Result<(f64, Vec<TraceReplay>), ConformanceError> {
    let r = Replayer::new(g)?;
    let mut traces = Vec::new();
    let (mut p, mut c, mut m, mut rem) = (0u64, 0u64, 0u64, 0u64);
    for (trace, n) in distinct(log) {
        let (counts, remaining) = r.replay(trace);
        let k = n as u64;
        p += k * counts.produced;
        c += k * counts.consumed;
        m += k * counts.missing;
        rem += k * remaining;
        traces.push(TraceReplay {
            trace: trace.to_vec(),
            count: n,
            produced: counts.produced,
            consumed: counts.consumed,
            missing: counts.missing,
            remaining,
            unmatched: counts.unmatched,
        });
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let fitness = 0.5 * (1.0 - ratio(m, c)) + 0.5 * (1.0 - ratio(rem, p));
    Ok((fitness, traces))
}

/// Precision over the prefix automaton of the log: every distinct prefix,
/// including the empty one and complete traces, weighted by the number of
/// traces passing through it. Returns 1 for an empty log.
pub fn escaping_edges_precision(g: &GwfNet, log: &EventLog) -> Result<(f64, PrecisionDetails), ConformanceError> {
    let r = Replayer::new(g)?;
    // prefix -> (weight, observed continuations)
    let mut states: BTreeMap<&[String], (u64, BTreeSet<&str>)> = BTreeMap::new();
    for t in log.traces() {
        for i in 0..=t.len() {
            let e = states.entry(&t[..i]).or_default();
            e.0 += 1;
            if i < t.len() {
                e.1.insert(t[i].as_str());
            }
        }
    }
    let mut details = PrecisionDetails::default();
    // markings are computed along the sorted prefix order, parents first
    let mut markings: HashMap<&[String], Option<Vec<u32>>> = HashMap::new();
    for (prefix, (w, observed)) in &states {
        let marking = match prefix.split_last() {
            None => Some(r.initial.clone()),
            Some((last, parent)) => markings[parent].clone().and_then(|mut m| {
                let mut c = Counts::default();
                r.step(&mut m, last, &mut c).then_some(m)
            }),
        };
        match &marking {
            Some(m) => {
                let enabled = r.enabled_labels(m);
                details.states += 1;
                details.observed += w * observed.iter().filter(|a| enabled.contains(*a)).count() as u64;
                details.enabled += w * enabled.len() as u64;
            }
            None => details.skipped += 1,
        }
        markings.insert(prefix, marking);
    }
    let precision = if details.enabled == 0 {
        1.0
    } else {
        details.observed as f64 / details.enabled as f64
    };
    Ok((precision, details))
}

pub fn quality(g: &GwfNet, log: &EventLog) -> Result<QualityReport, ConformanceError> {
    let (fitness, traces) = token_replay_fitness(g, log)?;
    let (precision, precision_details) = escaping_edges_precision(g, log)?;
    Ok(QualityReport {
        fitness,
        precision,
        traces,
        precision_details,
    })
}
