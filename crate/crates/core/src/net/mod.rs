//! Place/transition nets with unweighted arcs, markings and the token game.
//!
//! A [`PetriNet`] is immutable once built. Nodes are addressed either by their
//! string id or, on hot paths, by a [`Node`] index into the place or transition
//! vector. Markings come in two flavours: the public [`Marking`] keyed by place
//! id, and plain token vectors (`Vec<u32>` indexed by place) used internally by
//! the state-space code.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

mod format;
mod reach;
mod smd;

pub use format::{parse_pnet, print_pnet, quote_token, tokenize, NetDocument, ParseError};
pub use reach::{explore, explore_tokens, Edge, ReachabilityGraph, DEFAULT_STATE_CAP};
pub use smd::{
    find_sequential_component, smd_cover, SmdCover, SmdError, DEFAULT_SMD_BUDGET,
};

/// Index of a place or transition inside one [`PetriNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Place(usize),
    Transition(usize),
}

impl Node {
    pub fn is_place(self) -> bool {
        matches!(self, Node::Place(_))
    }

    pub fn is_transition(self) -> bool {
        matches!(self, Node::Transition(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate arc {0} -> {1}")]
    DuplicateArc(String, String),
    #[error("arc {0} -> {1} must connect a place and a transition")]
    NotBipartite(String, String),
    #[error("transition `{0}` has an empty preset")]
    EmptyPreset(String),
    #[error("transition `{0}` has an empty postset")]
    EmptyPostset(String),
    #[error("node `{0}` is not incident to any arc")]
    Isolated(String),
    #[error("marking refers to unknown place `{0}`")]
    InvalidMarking(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
}

/// A Petri net `(P, T, F)` with optional activity labels on transitions.
///
/// Invariants enforced by [`NetBuilder::build`]: place and transition ids are
/// unique and disjoint, arcs are bipartite, every transition has a nonempty
/// preset and postset, and every node is incident to at least one arc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<String>,
    labels: Vec<Option<String>>,
    arcs: Vec<(Node, Node)>,
    place_pre: Vec<Vec<usize>>,
    place_post: Vec<Vec<usize>>,
    trans_pre: Vec<Vec<usize>>,
    trans_post: Vec<Vec<usize>>,
    index: HashMap<String, Node>,
}

impl PetriNet {
    pub fn builder() -> NetBuilder {
        NetBuilder::default()
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[String] {
        &self.transitions
    }

    pub fn place_id(&self, p: usize) -> &str {
        &self.places[p]
    }

    pub fn transition_id(&self, t: usize) -> &str {
        &self.transitions[t]
    }

    pub fn label(&self, t: usize) -> Option<&str> {
        self.labels[t].as_deref()
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    /// Arcs in canonical order (sorted by node index).
    pub fn arcs(&self) -> &[(Node, Node)] {
        &self.arcs
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.arcs
            .iter()
            .map(move |&(a, b)| (self.node_id(a), self.node_id(b)))
    }

    pub fn node(&self, id: &str) -> Option<Node> {
        self.index.get(id).copied()
    }

    pub fn place(&self, id: &str) -> Option<usize> {
        match self.node(id) {
            Some(Node::Place(p)) => Some(p),
            _ => None,
        }
    }

    pub fn transition(&self, id: &str) -> Option<usize> {
        match self.node(id) {
            Some(Node::Transition(t)) => Some(t),
            _ => None,
        }
    }

    pub fn node_id(&self, n: Node) -> &str {
        match n {
            Node::Place(p) => &self.places[p],
            Node::Transition(t) => &self.transitions[t],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.places.len())
            .map(Node::Place)
            .chain((0..self.transitions.len()).map(Node::Transition))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Input places of transition `t`, ascending.
    pub fn pre_t(&self, t: usize) -> &[usize] {
        &self.trans_pre[t]
    }

    /// Output places of transition `t`, ascending.
    pub fn post_t(&self, t: usize) -> &[usize] {
        &self.trans_post[t]
    }

    /// Input transitions of place `p`, ascending.
    pub fn pre_p(&self, p: usize) -> &[usize] {
        &self.place_pre[p]
    }

    /// Output transitions of place `p`, ascending.
    pub fn post_p(&self, p: usize) -> &[usize] {
        &self.place_post[p]
    }

    pub fn preset(&self, n: Node) -> Vec<Node> {
        match n {
            Node::Place(p) => self.place_pre[p].iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.trans_pre[t].iter().map(|&p| Node::Place(p)).collect(),
        }
    }

    pub fn postset(&self, n: Node) -> Vec<Node> {
        match n {
            Node::Place(p) => self.place_post[p].iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.trans_post[t].iter().map(|&p| Node::Place(p)).collect(),
        }
    }

    /// Preset union postset.
    pub fn neighbourhood(&self, n: Node) -> BTreeSet<Node> {
        self.preset(n).into_iter().chain(self.postset(n)).collect()
    }

    pub fn has_arc(&self, from: Node, to: Node) -> bool {
        match (from, to) {
            (Node::Place(p), Node::Transition(t)) => self.trans_pre[t].binary_search(&p).is_ok(),
            (Node::Transition(t), Node::Place(p)) => self.trans_post[t].binary_search(&p).is_ok(),
            _ => false,
        }
    }

    /// Places with an empty preset.
    pub fn source_places(&self) -> Vec<usize> {
        (0..self.places.len()).filter(|&p| self.place_pre[p].is_empty()).collect()
    }

    /// Places with an empty postset.
    pub fn sink_places(&self) -> Vec<usize> {
        (0..self.places.len()).filter(|&p| self.place_post[p].is_empty()).collect()
    }

    /// Converts a marking to a token vector, rejecting unknown places.
    pub fn tokens(&self, m: &Marking) -> Result<Vec<u32>, NetError> {
        let mut v = vec![0; self.places.len()];
        for (id, &n) in &m.0 {
            let p = self
                .place(id)
                .ok_or_else(|| NetError::InvalidMarking(id.clone()))?;
            v[p] = n;
        }
        Ok(v)
    }

    pub fn marking(&self, tokens: &[u32]) -> Marking {
        Marking(
            tokens
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(|(p, &n)| (self.places[p].clone(), n))
                .collect(),
        )
    }

    pub fn is_enabled_at(&self, tokens: &[u32], t: usize) -> bool {
        self.trans_pre[t].iter().all(|&p| tokens[p] >= 1)
    }

    /// `m - •t + t•` with subtraction clamped at zero. Does not check enabledness.
    pub fn fire_tokens(&self, tokens: &[u32], t: usize) -> Vec<u32> {
        let mut next = tokens.to_vec();
        for &p in &self.trans_pre[t] {
            next[p] = next[p].saturating_sub(1);
        }
        for &p in &self.trans_post[t] {
            next[p] += 1;
        }
        next
    }

    pub fn enabled_at(&self, tokens: &[u32]) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| self.is_enabled_at(tokens, t))
            .collect()
    }

    /// Transitions enabled at `m`, in net order.
    pub fn enabled(&self, m: &Marking) -> Result<Vec<String>, NetError> {
        let tokens = self.tokens(m)?;
        Ok(self
            .enabled_at(&tokens)
            .into_iter()
            .map(|t| self.transitions[t].clone())
            .collect())
    }

    pub fn fire(&self, m: &Marking, t: &str) -> Result<Marking, NetError> {
        let ti = self
            .transition(t)
            .ok_or_else(|| NetError::UnknownNode(t.to_string()))?;
        let tokens = self.tokens(m)?;
        if !self.is_enabled_at(&tokens, ti) {
            return Err(NetError::NotEnabled(t.to_string()));
        }
        Ok(self.marking(&self.fire_tokens(&tokens, ti)))
    }

    /// Fires a sequence of transition ids from `m`, returning the reached marking.
    pub fn fire_sequence<S: AsRef<str>>(&self, m: &Marking, seq: &[S]) -> Result<Marking, NetError> {
        let mut cur = m.clone();
        for t in seq {
            cur = self.fire(&cur, t.as_ref())?;
        }
        Ok(cur)
    }

    /// The subnet generated by `nodes` together with its input and output elements.
    pub fn subnet<S: AsRef<str>>(&self, nodes: &[S]) -> Result<Subnet, NetError> {
        let mut set = HashSet::new();
        for id in nodes {
            let n = self
                .node(id.as_ref())
                .ok_or_else(|| NetError::UnknownNode(id.as_ref().to_string()))?;
            set.insert(n);
        }
        let (inputs, outputs) = self.boundary(&set);
        let mut sub = Subnet::default();
        for &n in &set {
            match n {
                Node::Place(_) => sub.places.insert(self.node_id(n).to_string()),
                Node::Transition(_) => sub.transitions.insert(self.node_id(n).to_string()),
            };
        }
        for &(a, b) in &self.arcs {
            if set.contains(&a) && set.contains(&b) {
                sub.arcs
                    .insert((self.node_id(a).to_string(), self.node_id(b).to_string()));
            }
        }
        sub.inputs = inputs.iter().map(|&n| self.node_id(n).to_string()).collect();
        sub.outputs = outputs.iter().map(|&n| self.node_id(n).to_string()).collect();
        Ok(sub)
    }

    /// Input and output elements of the subnet generated by `set`: nodes with a
    /// predecessor (successor) outside the set, or with an empty preset (postset).
    pub fn boundary(&self, set: &HashSet<Node>) -> (BTreeSet<Node>, BTreeSet<Node>) {
        let mut inputs = BTreeSet::new();
        let mut outputs = BTreeSet::new();
        for &n in set {
            let pre = self.preset(n);
            if pre.is_empty() || pre.iter().any(|z| !set.contains(z)) {
                inputs.insert(n);
            }
            let post = self.postset(n);
            if post.is_empty() || post.iter().any(|z| !set.contains(z)) {
                outputs.insert(n);
            }
        }
        (inputs, outputs)
    }

    /// Ids of every node, places first.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.places
            .iter()
            .chain(self.transitions.iter())
            .map(String::as_str)
    }

    /// Same places, transitions, labels and arcs, ignoring declaration order.
    pub fn same_structure(&self, other: &PetriNet) -> bool {
        let places = |n: &PetriNet| n.places.iter().cloned().collect::<BTreeSet<_>>();
        let trans = |n: &PetriNet| {
            n.transitions
                .iter()
                .cloned()
                .zip(n.labels.iter().cloned())
                .collect::<BTreeSet<_>>()
        };
        let arcs = |n: &PetriNet| {
            n.arc_ids()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<BTreeSet<_>>()
        };
        places(self) == places(other) && trans(self) == trans(other) && arcs(self) == arcs(other)
    }

    /// Returns a copy with every node id passed through `f`. Labels are kept.
    pub fn renamed(&self, f: impl Fn(&str) -> String) -> Result<PetriNet, NetError> {
        let mut b = NetBuilder::default();
        for p in &self.places {
            b.place(f(p));
        }
        for (t, id) in self.transitions.iter().enumerate() {
            b.transition_with(f(id), self.labels[t].clone());
        }
        for (a, c) in self.arc_ids() {
            b.arc(f(a), f(c));
        }
        b.build()
    }
}

/// A generated subnet `N(A)` with its input/output element sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subnet {
    pub places: BTreeSet<String>,
    pub transitions: BTreeSet<String>,
    pub arcs: BTreeSet<(String, String)>,
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
}

/// Accumulates nodes and arcs; validation happens in [`NetBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct NetBuilder {
    places: Vec<String>,
    transitions: Vec<(String, Option<String>)>,
    arcs: Vec<(String, String)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, id: impl Into<String>) -> &mut Self {
        self.places.push(id.into());
        self
    }

    pub fn transition(&mut self, id: impl Into<String>) -> &mut Self {
        self.transitions.push((id.into(), None));
        self
    }

    pub fn labeled(&mut self, id: impl Into<String>, label: impl Into<String>) -> &mut Self {
        self.transitions.push((id.into(), Some(label.into())));
        self
    }

    pub fn transition_with(&mut self, id: impl Into<String>, label: Option<String>) -> &mut Self {
        self.transitions.push((id.into(), label));
        self
    }

    pub fn arc(&mut self, from: impl Into<String>, to: impl Into<String>) -> &mut Self {
        self.arcs.push((from.into(), to.into()));
        self
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.places.iter().any(|p| p == id) || self.transitions.iter().any(|(t, _)| t == id)
    }

    pub fn build(&self) -> Result<PetriNet, NetError> {
        let mut index = HashMap::new();
        for (i, p) in self.places.iter().enumerate() {
            if index.insert(p.clone(), Node::Place(i)).is_some() {
                return Err(NetError::DuplicateNode(p.clone()));
            }
        }
        for (i, (t, _)) in self.transitions.iter().enumerate() {
            if index.insert(t.clone(), Node::Transition(i)).is_some() {
                return Err(NetError::DuplicateNode(t.clone()));
            }
        }
        let np = self.places.len();
        let nt = self.transitions.len();
        let mut place_pre = vec![Vec::new(); np];
        let mut place_post = vec![Vec::new(); np];
        let mut trans_pre = vec![Vec::new(); nt];
        let mut trans_post = vec![Vec::new(); nt];
        let mut arcs = BTreeSet::new();
        for (a, b) in &self.arcs {
            let na = *index.get(a).ok_or_else(|| NetError::UnknownNode(a.clone()))?;
            let nb = *index.get(b).ok_or_else(|| NetError::UnknownNode(b.clone()))?;
            match (na, nb) {
                (Node::Place(p), Node::Transition(t)) => {
                    place_post[p].push(t);
                    trans_pre[t].push(p);
                }
                (Node::Transition(t), Node::Place(p)) => {
                    trans_post[t].push(p);
                    place_pre[p].push(t);
                }
                _ => return Err(NetError::NotBipartite(a.clone(), b.clone())),
            }
            if !arcs.insert((na, nb)) {
                return Err(NetError::DuplicateArc(a.clone(), b.clone()));
            }
        }
        for v in place_pre
            .iter_mut()
            .chain(place_post.iter_mut())
            .chain(trans_pre.iter_mut())
            .chain(trans_post.iter_mut())
        {
            v.sort_unstable();
        }
        for (t, (id, _)) in self.transitions.iter().enumerate() {
            if trans_pre[t].is_empty() {
                return Err(NetError::EmptyPreset(id.clone()));
            }
            if trans_post[t].is_empty() {
                return Err(NetError::EmptyPostset(id.clone()));
            }
        }
        for (p, id) in self.places.iter().enumerate() {
            if place_pre[p].is_empty() && place_post[p].is_empty() {
                return Err(NetError::Isolated(id.clone()));
            }
        }
        Ok(PetriNet {
            places: self.places.clone(),
            transitions: self.transitions.iter().map(|(t, _)| t.clone()).collect(),
            labels: self.transitions.iter().map(|(_, l)| l.clone()).collect(),
            arcs: arcs.into_iter().collect(),
            place_pre,
            place_post,
            trans_pre,
            trans_post,
            index,
        })
    }
}

/// A multiset of places, keyed by place id. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    /// A set-like marking with one token on each listed place.
    pub fn from_places<I, S>(places: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut m = Marking::new();
        for p in places {
            m.add(p, 1);
        }
        m
    }

    pub fn add(&mut self, place: impl Into<String>, n: u32) {
        if n > 0 {
            *self.0.entry(place.into()).or_insert(0) += n;
        }
    }

    pub fn get(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of distinct marked places.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    /// True when every count is at most one.
    pub fn is_set(&self) -> bool {
        self.0.values().all(|&n| n <= 1)
    }

    /// Multiset inclusion `self ⊆ other`.
    pub fn is_subset(&self, other: &Marking) -> bool {
        self.0.iter().all(|(p, &n)| other.get(p) >= n)
    }

    pub fn places(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.0.iter().map(|(p, &n)| (p.as_str(), n))
    }
}

impl<S: Into<String>> FromIterator<S> for Marking {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Marking::from_places(iter)
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (p, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if *n == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}:{n}")?;
            }
        }
        f.write_str("}")
    }
}
