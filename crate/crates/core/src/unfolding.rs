//! Occurrence nets, branching processes and finite unfoldings of safe nets.
//!
//! [`unfold`] builds the unfolding by repeatedly adding possible extensions:
//! an event for transition `t` is added for every co-set of conditions that
//! maps bijectively onto `•t` and has not been used for `t` before. No cut-off
//! criterion is applied, so only acyclic nets terminate on their own; the event
//! cap bounds everything else.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::net::{quote_token, tokenize, Marking, NetError, Node, ParseError, PetriNet};

pub const DEFAULT_EVENT_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnfoldError {
    #[error("net is not safe: place `{0}` can hold two tokens")]
    Unsafe(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Conditions are `Node::Place` and events `Node::Transition` indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OccurrenceNet {
    pub conditions: Vec<String>,
    pub events: Vec<String>,
    pub arcs: BTreeSet<(Node, Node)>,
}

impl OccurrenceNet {
    pub fn node_id(&self, n: Node) -> &str {
        match n {
            Node::Place(b) => &self.conditions[b],
            Node::Transition(e) => &self.events[e],
        }
    }

    pub fn preset(&self, n: Node) -> Vec<Node> {
        self.arcs.iter().filter(|a| a.1 == n).map(|a| a.0).collect()
    }

    pub fn postset(&self, n: Node) -> Vec<Node> {
        self.arcs.iter().filter(|a| a.0 == n).map(|a| a.1).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.conditions.len())
            .map(Node::Place)
            .chain((0..self.events.len()).map(Node::Transition))
    }

    /// Conditions with an empty preset.
    pub fn minimal_conditions(&self) -> Vec<usize> {
        let fed: HashSet<usize> = self
            .arcs
            .iter()
            .filter_map(|a| match a.1 {
                Node::Place(b) => Some(b),
                _ => None,
            })
            .collect();
        (0..self.conditions.len()).filter(|b| !fed.contains(b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingProcess {
    pub occ: OccurrenceNet,
    /// Folding: occurrence-net node id to source-net node id.
    pub fold: BTreeMap<String, String>,
    /// The event cap stopped construction before the unfolding was complete.
    pub truncated: bool,
}

impl BranchingProcess {
    /// The occurrence net as a plain Petri net marked with `Min(O)`. Labels of
    /// events are copied from their images.
    pub fn to_marked_net(&self, source: &PetriNet) -> Result<(PetriNet, Marking), NetError> {
        let mut b = PetriNet::builder();
        for c in &self.occ.conditions {
            b.place(c.clone());
        }
        for e in &self.occ.events {
            let label = self
                .fold
                .get(e)
                .and_then(|t| source.transition(t))
                .and_then(|t| source.label(t))
                .map(str::to_string);
            b.transition_with(e.clone(), label);
        }
        for &(x, y) in &self.occ.arcs {
            b.arc(self.occ.node_id(x), self.occ.node_id(y));
        }
        let net = b.build()?;
        let m0 = Marking::from_places(
            self.occ
                .minimal_conditions()
                .into_iter()
                .map(|c| self.occ.conditions[c].clone()),
        );
        Ok((net, m0))
    }

    pub fn event_images(&self) -> Vec<&str> {
        self.occ
            .events
            .iter()
            .map(|e| self.fold.get(e).map(String::as_str).unwrap_or(""))
            .collect()
    }
}

struct Bits(Vec<u64>);

impl Bits {
    fn new() -> Self {
        Bits(Vec::new())
    }
    fn set(&mut self, i: usize) {
        let w = i / 64;
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

struct Builder<'a> {
    net: &'a PetriNet,
    cond_place: Vec<usize>,
    by_place: Vec<Vec<usize>>,
    co: Vec<Bits>,
    event_trans: Vec<usize>,
    event_pre: Vec<Vec<usize>>,
    event_post: Vec<Vec<usize>>,
    used: HashSet<(usize, Vec<usize>)>,
}

impl<'a> Builder<'a> {
    fn add_condition(&mut self, place: usize) -> usize {
        let b = self.cond_place.len();
        self.cond_place.push(place);
        self.by_place[place].push(b);
        self.co.push(Bits::new());
        b
    }

    /// Co-sets of existing conditions matching `•t`, sorted ascending.
    fn extensions_of(&self, t: usize, out: &mut Vec<Vec<usize>>) {
        let pre = self.net.pre_t(t);
        let mut chosen = Vec::with_capacity(pre.len());
        self.choose(pre, &mut chosen, t, out);
    }

    fn choose(&self, pre: &[usize], chosen: &mut Vec<usize>, t: usize, out: &mut Vec<Vec<usize>>) {
        let Some((&p, rest)) = pre.split_first() else {
            let mut key = chosen.clone();
            key.sort_unstable();
            if !self.used.contains(&(t, key.clone())) {
                out.push(key);
            }
            return;
        };
        for &b in &self.by_place[p] {
            if chosen.iter().all(|&c| self.co[c].get(b)) {
                chosen.push(b);
                self.choose(rest, chosen, t, out);
                chosen.pop();
            }
        }
    }

    fn add_event(&mut self, t: usize, pre: Vec<usize>) -> Result<(), UnfoldError> {
        let e = self.event_trans.len();
        // conditions concurrent to every input condition
        let mut common: Vec<usize> = self.co[pre[0]].ones().collect();
        for &b in &pre[1..] {
            common.retain(|&c| self.co[b].get(c));
        }
        let mut post = Vec::new();
        for &p in self.net.post_t(t) {
            if common.iter().any(|&c| self.cond_place[c] == p) {
                return Err(UnfoldError::Unsafe(self.net.place_id(p).to_string()));
            }
            post.push(self.add_condition(p));
        }
        for &b in &post {
            for &c in &common {
                self.co[b].set(c);
                self.co[c].set(b);
            }
            for &b2 in &post {
                if b2 != b {
                    self.co[b].set(b2);
                }
            }
        }
        self.used.insert((t, pre.clone()));
        self.event_trans.push(t);
        self.event_pre.push(pre);
        self.event_post.push(post);
        debug_assert_eq!(self.event_trans.len(), e + 1);
        Ok(())
    }
}

/// Builds the unfolding of `net` from `m0`, stopping after `event_cap` events.
pub fn unfold(net: &PetriNet, m0: &Marking, event_cap: usize) -> Result<BranchingProcess, UnfoldError> {
    let tokens = net.tokens(m0)?;
    let mut bld = Builder {
        net,
        cond_place: Vec::new(),
        by_place: vec![Vec::new(); net.place_count()],
        co: Vec::new(),
        event_trans: Vec::new(),
        event_pre: Vec::new(),
        event_post: Vec::new(),
        used: HashSet::new(),
    };
    let mut minimal = Vec::new();
    for (p, &n) in tokens.iter().enumerate() {
        if n > 1 {
            return Err(UnfoldError::Unsafe(net.place_id(p).to_string()));
        }
        if n == 1 {
            minimal.push(bld.add_condition(p));
        }
    }
    for &a in &minimal {
        for &b in &minimal {
            if a != b {
                bld.co[a].set(b);
            }
        }
    }

    let mut order: Vec<usize> = (0..net.transition_count()).collect();
    order.sort_by(|&a, &b| net.transition_id(a).cmp(net.transition_id(b)));

    let mut truncated = false;
    'rounds: loop {
        let mut round = Vec::new();
        for &t in &order {
            let mut found = Vec::new();
            bld.extensions_of(t, &mut found);
            found.sort();
            round.extend(found.into_iter().map(|pre| (t, pre)));
        }
        if round.is_empty() {
            break;
        }
        for (t, pre) in round {
            if bld.event_trans.len() >= event_cap {
                truncated = true;
                break 'rounds;
            }
            bld.add_event(t, pre)?;
        }
    }

    let mut occ = OccurrenceNet::default();
    let mut fold = BTreeMap::new();
    for (b, &p) in bld.cond_place.iter().enumerate() {
        let id = format!("b{b}");
        fold.insert(id.clone(), net.place_id(p).to_string());
        occ.conditions.push(id);
    }
    for (e, &t) in bld.event_trans.iter().enumerate() {
        let id = format!("e{e}");
        fold.insert(id.clone(), net.transition_id(t).to_string());
        occ.events.push(id);
        for &b in &bld.event_pre[e] {
            occ.arcs.insert((Node::Place(b), Node::Transition(e)));
        }
        for &b in &bld.event_post[e] {
            occ.arcs.insert((Node::Transition(e), Node::Place(b)));
        }
    }
    Ok(BranchingProcess { occ, fold, truncated })
}

/// Which clause of the occurrence-net or branching-process definition failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("clause {clause}: {detail}")]
pub struct BpViolation {
    /// `occ.1`–`occ.4` for occurrence-net clauses, `bp.1`–`bp.4` for
    /// branching-process clauses, `shape` for malformed input.
    pub clause: &'static str,
    pub detail: String,
}

fn violation(clause: &'static str, detail: impl Into<String>) -> Result<(), BpViolation> {
    Err(BpViolation {
        clause,
        detail: detail.into(),
    })
}

/// Checks every occurrence-net and branching-process clause exhaustively.
pub fn verify_branching_process(bp: &BranchingProcess, net: &PetriNet, m0: &Marking) -> Result<(), BpViolation> {
    let occ = &bp.occ;
    let mut ids = HashSet::new();
    for n in occ.nodes() {
        if !ids.insert(occ.node_id(n)) {
            return violation("shape", format!("duplicate id `{}`", occ.node_id(n)));
        }
    }
    for &(x, y) in &occ.arcs {
        if x.is_place() == y.is_place() {
            return violation("shape", "arc between two nodes of the same kind");
        }
    }

    let nb = occ.conditions.len();
    let ne = occ.events.len();
    let mut pre: Vec<Vec<Node>> = vec![Vec::new(); nb + ne];
    let mut post: Vec<Vec<Node>> = vec![Vec::new(); nb + ne];
    let slot = |n: Node| match n {
        Node::Place(b) => b,
        Node::Transition(e) => nb + e,
    };
    for &(x, y) in &occ.arcs {
        post[slot(x)].push(y);
        pre[slot(y)].push(x);
    }

    // occ.1
    for b in 0..nb {
        if pre[b].len() > 1 {
            return violation("occ.1", format!("condition `{}` has {} input events", occ.conditions[b], pre[b].len()));
        }
    }

    // occ.2 and occ.3: the flow relation of a finite net is a partial order iff acyclic
    let mut indeg: Vec<usize> = pre.iter().map(Vec::len).collect();
    let mut topo: Vec<Node> = occ.nodes().filter(|&n| indeg[slot(n)] == 0).collect();
    let mut i = 0;
    while i < topo.len() {
        let n = topo[i];
        for &m in &post[slot(n)] {
            indeg[slot(m)] -= 1;
            if indeg[slot(m)] == 0 {
                topo.push(m);
            }
        }
        i += 1;
    }
    if topo.len() != nb + ne {
        let n = occ.nodes().find(|&n| indeg[slot(n)] > 0).unwrap();
        return violation("occ.2", format!("`{}` lies on a cycle", occ.node_id(n)));
    }

    // occ.4: the past of each node must not contain two events sharing an input condition
    let mut past: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nb + ne];
    for &n in &topo {
        let mut acc = BTreeSet::new();
        for &m in &pre[slot(n)] {
            acc.extend(past[slot(m)].iter().copied());
        }
        if let Node::Transition(e) = n {
            acc.insert(e);
        }
        past[slot(n)] = acc;
    }
    for n in occ.nodes() {
        let events = &past[slot(n)];
        for b in 0..nb {
            let consumers = post[b]
                .iter()
                .filter(|m| matches!(m, Node::Transition(e) if events.contains(e)))
                .count();
            if consumers > 1 {
                return violation("occ.4", format!("`{}` is in self-conflict", occ.node_id(n)));
            }
        }
    }

    // bp.1
    let image = |n: Node| bp.fold.get(occ.node_id(n)).map(String::as_str);
    for n in occ.nodes() {
        let Some(img) = image(n) else {
            return violation("bp.1", format!("`{}` has no image", occ.node_id(n)));
        };
        let ok = match n {
            Node::Place(_) => net.place(img).is_some(),
            Node::Transition(_) => net.transition(img).is_some(),
        };
        if !ok {
            return violation("bp.1", format!("`{}` maps to `{img}` of the wrong kind", occ.node_id(n)));
        }
    }

    // bp.2
    let min: Vec<usize> = (0..nb).filter(|&b| pre[b].is_empty()).collect();
    let mut min_images: Vec<&str> = min.iter().map(|&b| image(Node::Place(b)).unwrap()).collect();
    min_images.sort_unstable();
    let mut m0_places: Vec<&str> = m0.places().collect();
    m0_places.sort_unstable();
    if min_images != m0_places || !m0.is_set() {
        return violation("bp.2", format!("Min(O) maps to {min_images:?}, initial marking is {m0}"));
    }

    // bp.3
    for e in 0..ne {
        let en = Node::Transition(e);
        let t = net.transition(image(en).unwrap()).unwrap();
        for (side, expected) in [(&pre[nb + e], net.pre_t(t)), (&post[nb + e], net.post_t(t))] {
            let mut got: Vec<usize> = side
                .iter()
                .map(|&b| net.place(image(b).unwrap()).unwrap())
                .collect();
            got.sort_unstable();
            if got != expected {
                return violation("bp.3", format!("neighbourhood of `{}` does not match `{}`", occ.events[e], net.transition_id(t)));
            }
        }
    }

    // bp.4
    let mut seen: HashSet<(&str, Vec<Node>)> = HashSet::new();
    for e in 0..ne {
        let mut p = pre[nb + e].clone();
        p.sort();
        if !seen.insert((image(Node::Transition(e)).unwrap(), p)) {
            return violation("bp.4", format!("`{}` duplicates another event", occ.events[e]));
        }
    }
    Ok(())
}

/// Prints a branching process in `.pnet` syntax with `fold` annotation lines.
pub fn print_branching_process(bp: &BranchingProcess) -> String {
    let mut out = String::new();
    let occ = &bp.occ;
    for b in &occ.conditions {
        let _ = writeln!(out, "place {}", quote_token(b));
    }
    for e in &occ.events {
        let _ = writeln!(out, "trans {}", quote_token(e));
    }
    for &(x, y) in &occ.arcs {
        let _ = writeln!(out, "arc {} {}", quote_token(occ.node_id(x)), quote_token(occ.node_id(y)));
    }
    for n in occ.nodes() {
        let id = occ.node_id(n);
        if let Some(img) = bp.fold.get(id) {
            let _ = writeln!(out, "fold {} {}", quote_token(id), quote_token(img));
        }
    }
    out
}

/// Reads the output of [`print_branching_process`]. Structural validity is
/// left to [`verify_branching_process`].
pub fn parse_branching_process(text: &str) -> Result<BranchingProcess, ParseError> {
    let mut occ = OccurrenceNet::default();
    let mut index: BTreeMap<String, Node> = BTreeMap::new();
    let mut fold = BTreeMap::new();
    for (line, tokens) in tokenize(text)? {
        let args = &tokens[1..];
        let need = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(ParseError::new(line, format!("`{}` takes {k} argument(s)", tokens[0])))
            }
        };
        match tokens[0].as_str() {
            "place" | "trans" => {
                need(1)?;
                let node = if tokens[0] == "place" {
                    occ.conditions.push(args[0].clone());
                    Node::Place(occ.conditions.len() - 1)
                } else {
                    occ.events.push(args[0].clone());
                    Node::Transition(occ.events.len() - 1)
                };
                if index.insert(args[0].clone(), node).is_some() {
                    return Err(ParseError::new(line, format!("duplicate node id `{}`", args[0])));
                }
            }
            "arc" => {
                need(2)?;
                let find = |id: &String| {
                    index
                        .get(id)
                        .copied()
                        .ok_or_else(|| ParseError::new(line, format!("unknown node `{id}`")))
                };
                occ.arcs.insert((find(&args[0])?, find(&args[1])?));
            }
            "fold" => {
                need(2)?;
                fold.insert(args[0].clone(), args[1].clone());
            }
            other => return Err(ParseError::new(line, format!("unknown keyword `{other}`"))),
        }
    }
    Ok(BranchingProcess { occ, fold, truncated: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_pnet;

    fn net(text: &str) -> (PetriNet, Marking) {
        let d = parse_pnet(text).unwrap();
        (d.net, d.initial)
    }

    const SEQ2: &str = "place s init\nplace p\nplace f\ntrans a\ntrans b\narc s a\narc a p\narc p b\narc b f\n";

    #[test]
    fn linear_net_unfolds_to_itself() {
        let (n, m0) = net(SEQ2);
        let bp = unfold(&n, &m0, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(bp.occ.conditions.len(), 3);
        assert_eq!(bp.event_images(), vec!["a", "b"]);
        assert!(!bp.truncated);
        verify_branching_process(&bp, &n, &m0).unwrap();
    }

    #[test]
    fn choice_gives_two_conflicting_events() {
        let (n, m0) = net("place p init\nplace q\ntrans x\ntrans y\narc p x\narc p y\narc x q\narc y q\n");
        let bp = unfold(&n, &m0, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(bp.occ.minimal_conditions().len(), 1);
        assert_eq!(bp.occ.events.len(), 2);
        // both events consume the single minimal condition
        let b0 = Node::Place(0);
        assert_eq!(bp.occ.postset(b0).len(), 2);
        verify_branching_process(&bp, &n, &m0).unwrap();
    }

    #[test]
    fn cyclic_net_hits_the_cap() {
        let (n, m0) = net("place p init\ntrans t\narc p t\narc t p\n");
        let bp = unfold(&n, &m0, 5).unwrap();
        assert!(bp.truncated);
        assert_eq!(bp.occ.events.len(), 5);
        verify_branching_process(&bp, &n, &m0).unwrap();
    }

    #[test]
    fn unsafe_net_is_rejected() {
        let (n, m0) = net("place p init\nplace q init\nplace r\ntrans t\ntrans u\narc p t\narc t r\narc q u\narc u r\n");
        assert_eq!(unfold(&n, &m0, 10), Err(UnfoldError::Unsafe("r".into())));
    }

    #[test]
    fn duplicate_event_breaks_clause_4() {
        let (n, m0) = net(SEQ2);
        let mut bp = unfold(&n, &m0, DEFAULT_EVENT_CAP).unwrap();
        // add a second copy of the `a` event on the same minimal condition
        bp.occ.events.push("dup".into());
        bp.occ.conditions.push("dup_out".into());
        let e = Node::Transition(bp.occ.events.len() - 1);
        let c = Node::Place(bp.occ.conditions.len() - 1);
        bp.occ.arcs.insert((Node::Place(0), e));
        bp.occ.arcs.insert((e, c));
        bp.fold.insert("dup".into(), "a".into());
        bp.fold.insert("dup_out".into(), "p".into());
        assert_eq!(verify_branching_process(&bp, &n, &m0).unwrap_err().clause, "bp.4");
    }

    #[test]
    fn remapped_minimal_condition_breaks_clause_2() {
        let (n, m0) = net(SEQ2);
        let mut bp = unfold(&n, &m0, DEFAULT_EVENT_CAP).unwrap();
        let b0 = bp.occ.conditions[0].clone();
        bp.fold.insert(b0, "p".into());
        assert_eq!(verify_branching_process(&bp, &n, &m0).unwrap_err().clause, "bp.2");
    }

    #[test]
    fn print_parse_round_trip() {
        let (n, m0) = net("place p init\nplace q\ntrans x\ntrans y\narc p x\narc p y\narc x q\narc y q\n");
        let bp = unfold(&n, &m0, DEFAULT_EVENT_CAP).unwrap();
        let text = print_branching_process(&bp);
        assert!(text.contains("fold e0 x"));
        assert_eq!(parse_branching_process(&text).unwrap(), bp);
    }
}
