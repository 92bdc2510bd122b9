//! Block-structured discovery: an inductive miner over the directly-follows
//! graph and the translation of process trees into workflow nets.
//!
//! Cuts are tried in the order xor, seq, par, loop. When none applies the
//! miner falls through to a flower model. Activities are handled in
//! lexicographic order throughout, so equal logs give equal trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use petgraph::unionfind::UnionFind;

use crate::gwf::GwfNet;
use crate::log::{EventLog, Trace};
use crate::net::PetriNet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcessTree {
    Activity(String),
    Silent,
    Seq(Vec<ProcessTree>),
    Xor(Vec<ProcessTree>),
    Par(Vec<ProcessTree>),
    /// Do-part first, then one or more alternative redo parts.
    Loop(Vec<ProcessTree>),
}

impl ProcessTree {
    pub fn activity(a: impl Into<String>) -> Self {
        ProcessTree::Activity(a.into())
    }

    pub fn children(&self) -> &[ProcessTree] {
        match self {
            ProcessTree::Activity(_) | ProcessTree::Silent => &[],
            ProcessTree::Seq(c) | ProcessTree::Xor(c) | ProcessTree::Par(c) | ProcessTree::Loop(c) => c,
        }
    }

    /// Every operator has at least two children.
    pub fn is_valid(&self) -> bool {
        match self {
            ProcessTree::Activity(_) | ProcessTree::Silent => true,
            _ => self.children().len() >= 2 && self.children().iter().all(Self::is_valid),
        }
    }

    pub fn activities(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if let ProcessTree::Activity(a) = t {
                out.insert(a.as_str());
            }
            stack.extend(t.children());
        }
        out
    }
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, children) = match self {
            ProcessTree::Activity(a) => return f.write_str(a),
            ProcessTree::Silent => return f.write_str("tau"),
            ProcessTree::Seq(c) => ("seq", c),
            ProcessTree::Xor(c) => ("xor", c),
            ProcessTree::Par(c) => ("par", c),
            ProcessTree::Loop(c) => ("loop", c),
        };
        write!(f, "{op}(")?;
        for (i, c) in children.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Directly-follows graph with edge, start and end counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectlyFollowsGraph {
    pub activities: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), usize>,
    pub start: BTreeMap<String, usize>,
    pub end: BTreeMap<String, usize>,
}

impl DirectlyFollowsGraph {
    pub fn from_log(log: &EventLog) -> Self {
        let mut counts: BTreeMap<Trace, usize> = BTreeMap::new();
        for t in log.traces() {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        Self::from_counts(&counts)
    }

    fn from_counts(log: &BTreeMap<Trace, usize>) -> Self {
        let mut g = DirectlyFollowsGraph::default();
        for (t, &n) in log {
            let (Some(first), Some(last)) = (t.first(), t.last()) else { continue };
            *g.start.entry(first.clone()).or_insert(0) += n;
            *g.end.entry(last.clone()).or_insert(0) += n;
            g.activities.extend(t.iter().cloned());
            for w in t.windows(2) {
                *g.edges.entry((w[0].clone(), w[1].clone())).or_insert(0) += n;
            }
        }
        g
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.contains_key(&(a.to_string(), b.to_string()))
    }
}

type Sublog = BTreeMap<Trace, usize>;

/// Indexed view of a DFG used by the cut detectors.
struct Graph {
    names: Vec<String>,
    graph: DiGraphMap<usize, ()>,
    start: BTreeSet<usize>,
    end: BTreeSet<usize>,
}

impl Graph {
    fn new(dfg: &DirectlyFollowsGraph) -> Self {
        let names: Vec<String> = dfg.activities.iter().cloned().collect();
        let idx = |a: &String| names.binary_search(a).expect("activity in alphabet");
        let mut graph = DiGraphMap::new();
        for i in 0..names.len() {
            graph.add_node(i);
        }
        for (a, b) in dfg.edges.keys() {
            graph.add_edge(idx(a), idx(b), ());
        }
        let start = dfg.start.keys().map(idx).collect();
        let end = dfg.end.keys().map(idx).collect();
        Graph {
            names,
            graph,
            start,
            end,
        }
    }

    fn n(&self) -> usize {
        self.names.len()
    }

    fn edge(&self, a: usize, b: usize) -> bool {
        self.graph.contains_edge(a, b)
    }

    /// `reach[a][b]`: b is reachable from a by a nonempty path.
    fn reachability(&self) -> Vec<Vec<bool>> {
        (0..self.n())
            .map(|a| {
                let mut seen = vec![false; self.n()];
                let mut stack: Vec<usize> = self.graph.neighbors(a).collect();
                while let Some(x) = stack.pop() {
                    if !seen[x] {
                        seen[x] = true;
                        stack.extend(self.graph.neighbors(x));
                    }
                }
                seen
            })
            .collect()
    }
}

/// Groups of a union-find, each sorted, ordered by smallest member.
fn groups(uf: &UnionFind<usize>, n: usize) -> Vec<Vec<usize>> {
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..n {
        by_root.entry(uf.find(a)).or_default().push(a);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    out.sort();
    out
}

fn xor_cut(g: &Graph) -> Option<Vec<Vec<usize>>> {
    let mut uf = UnionFind::new(g.n());
    for (a, b, _) in g.graph.all_edges() {
        uf.union(a, b);
    }
    let gs = groups(&uf, g.n());
    (gs.len() > 1).then_some(gs)
}

fn seq_cut(g: &Graph) -> Option<Vec<Vec<usize>>> {
    let reach = g.reachability();
    let mut uf = UnionFind::new(g.n());
    for scc in tarjan_scc(&g.graph) {
        for w in scc.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    for a in 0..g.n() {
        for b in a + 1..g.n() {
            if !reach[a][b] && !reach[b][a] {
                uf.union(a, b);
            }
        }
    }
    let mut gs = groups(&uf, g.n());
    if gs.len() < 2 {
        return None;
    }
    let reached_by = |grp: &Vec<usize>| (0..g.n()).filter(|&x| reach[x][grp[0]]).count();
    gs.sort_by_key(|grp| (reached_by(grp), grp[0]));
    for i in 0..gs.len() {
        for j in i + 1..gs.len() {
            for &a in &gs[i] {
                for &b in &gs[j] {
                    if !reach[a][b] || reach[b][a] {
                        return None;
                    }
                }
            }
        }
    }
    Some(gs)
}

fn par_cut(g: &Graph) -> Option<Vec<Vec<usize>>> {
    let mut uf = UnionFind::new(g.n());
    for a in 0..g.n() {
        for b in a + 1..g.n() {
            if !(g.edge(a, b) && g.edge(b, a)) {
                uf.union(a, b);
            }
        }
    }
    let gs = groups(&uf, g.n());
    let complete = |grp: &Vec<usize>| grp.iter().any(|a| g.start.contains(a)) && grp.iter().any(|a| g.end.contains(a));
    let (mut good, bad): (Vec<_>, Vec<_>) = gs.into_iter().partition(complete);
    if good.len() < 2 {
        return None;
    }
    for grp in bad {
        good[0].extend(grp);
    }
    good[0].sort();
    good.sort();
    Some(good)
}

/// Returns the do-part followed by the redo parts.
fn loop_cut(g: &Graph) -> Option<Vec<Vec<usize>>> {
    let mut in_do = vec![false; g.n()];
    for &a in g.start.iter().chain(&g.end) {
        in_do[a] = true;
    }
    let mut uf = UnionFind::new(g.n());
    for (a, b, _) in g.graph.all_edges() {
        if !in_do[a] && !in_do[b] {
            uf.union(a, b);
        }
    }
    let components: Vec<Vec<usize>> = groups(&uf, g.n()).into_iter().filter(|c| !in_do[c[0]]).collect();
    let mut do_part: Vec<usize> = (0..g.n()).filter(|&a| in_do[a]).collect();
    let mut redo = Vec::new();
    for c in components {
        let mut is_redo = true;
        for &x in &c {
            for a in 0..g.n() {
                if !in_do[a] {
                    continue;
                }
                // entries come only from every end activity, exits go only to every start activity
                if g.edge(a, x) && !g.end.contains(&a) || g.edge(x, a) && !g.start.contains(&a) {
                    is_redo = false;
                }
            }
            let entered = g.end.iter().any(|&e| g.edge(e, x));
            if entered && !g.end.iter().all(|&e| g.edge(e, x)) {
                is_redo = false;
            }
            let exits = g.start.iter().any(|&s| g.edge(x, s));
            if exits && !g.start.iter().all(|&s| g.edge(x, s)) {
                is_redo = false;
            }
        }
        if is_redo {
            redo.push(c);
        } else {
            do_part.extend(c);
        }
    }
    if redo.is_empty() {
        return None;
    }
    do_part.sort();
    let mut out = vec![do_part];
    out.extend(redo);
    Some(out)
}

fn group_of(gs: &[Vec<usize>], names: &[String]) -> BTreeMap<String, usize> {
    gs.iter()
        .enumerate()
        .flat_map(|(i, grp)| grp.iter().map(move |&a| (names[a].clone(), i)))
        .collect()
}

fn add(log: &mut Sublog, t: Trace, n: usize) {
    *log.entry(t).or_insert(0) += n;
}

/// Projects each trace on every group; the seq and par splits.
fn split_project(log: &Sublog, gs: &[Vec<usize>], names: &[String]) -> Vec<Sublog> {
    let owner = group_of(gs, names);
    let mut out = vec![Sublog::new(); gs.len()];
    for (t, &n) in log {
        let mut parts = vec![Trace::new(); gs.len()];
        for a in t {
            parts[owner[a]].push(a.clone());
        }
        for (i, p) in parts.into_iter().enumerate() {
            add(&mut out[i], p, n);
        }
    }
    out
}

fn split_xor(log: &Sublog, gs: &[Vec<usize>], names: &[String]) -> Vec<Sublog> {
    let owner = group_of(gs, names);
    let mut out = vec![Sublog::new(); gs.len()];
    for (t, &n) in log {
        add(&mut out[owner[&t[0]]], t.clone(), n);
    }
    out
}

fn split_loop(log: &Sublog, gs: &[Vec<usize>], names: &[String]) -> Vec<Sublog> {
    let owner = group_of(gs, names);
    let mut out = vec![Sublog::new(); gs.len()];
    for (t, &n) in log {
        let mut run = Trace::new();
        let mut cur = owner[&t[0]];
        for a in t {
            let g = owner[a];
            if g != cur {
                add(&mut out[cur], std::mem::take(&mut run), n);
                cur = g;
            }
            run.push(a.clone());
        }
        add(&mut out[cur], run, n);
    }
    out
}

fn mine(log: &Sublog) -> ProcessTree {
    let empty = log.keys().any(Vec::is_empty);
    if empty {
        let rest: Sublog = log.iter().filter(|(t, _)| !t.is_empty()).map(|(t, &n)| (t.clone(), n)).collect();
        if rest.is_empty() {
            return ProcessTree::Silent;
        }
        return ProcessTree::Xor(vec![mine(&rest), ProcessTree::Silent]);
    }
    let dfg = DirectlyFollowsGraph::from_counts(log);
    if dfg.activities.len() == 1 {
        let a = ProcessTree::activity(dfg.activities.first().unwrap().clone());
        return if log.keys().all(|t| t.len() == 1) {
            a
        } else {
            ProcessTree::Loop(vec![a, ProcessTree::Silent])
        };
    }
    let g = Graph::new(&dfg);
    type Cut = fn(&Graph) -> Option<Vec<Vec<usize>>>;
    type Split = fn(&Sublog, &[Vec<usize>], &[String]) -> Vec<Sublog>;
    type Make = fn(Vec<ProcessTree>) -> ProcessTree;
    let steps: [(Cut, Split, Make); 4] = [
        (xor_cut, split_xor, ProcessTree::Xor),
        (seq_cut, split_project, ProcessTree::Seq),
        (par_cut, split_project, ProcessTree::Par),
        (loop_cut, split_loop, ProcessTree::Loop),
    ];
    for (cut, split, make) in steps {
        if let Some(gs) = cut(&g) {
            return make(split(log, &gs, &g.names).iter().map(mine).collect());
        }
    }
    let mut flower = vec![ProcessTree::Silent];
    flower.extend(dfg.activities.iter().cloned().map(ProcessTree::Activity));
    ProcessTree::Loop(flower)
}

/// Discovers a process tree. An empty log gives `tau`.
pub fn discover_tree(log: &EventLog) -> ProcessTree {
    let mut counts = Sublog::new();
    for t in log.traces() {
        add(&mut counts, t.clone(), 1);
    }
    if counts.is_empty() {
        return ProcessTree::Silent;
    }
    mine(&counts)
}

struct Translation {
    builder: crate::net::NetBuilder,
    places: usize,
    silent: usize,
    used: BTreeSet<String>,
}

impl Translation {
    fn place(&mut self) -> String {
        self.places += 1;
        let id = format!("p{}", self.places);
        self.builder.place(id.clone());
        id
    }

    fn silent(&mut self, from: &str, to: &str) {
        self.silent += 1;
        let id = format!("tau_{}", self.silent);
        self.builder.transition(id.clone()).arc(from, id.clone()).arc(id, to);
    }

    fn build(&mut self, tree: &ProcessTree, from: &str, to: &str) {
        match tree {
            ProcessTree::Activity(a) => {
                let mut id = format!("t_{a}");
                let mut k = 1;
                while !self.used.insert(id.clone()) {
                    k += 1;
                    id = format!("t_{a}_{k}");
                }
                self.builder.labeled(id.clone(), a.clone()).arc(from, id.clone()).arc(id, to);
            }
            ProcessTree::Silent => self.silent(from, to),
            ProcessTree::Seq(cs) => {
                let mut cur = from.to_string();
                for (i, c) in cs.iter().enumerate() {
                    let next = if i + 1 == cs.len() { to.to_string() } else { self.place() };
                    self.build(c, &cur, &next);
                    cur = next;
                }
            }
            ProcessTree::Xor(cs) => {
                for c in cs {
                    self.build(c, from, to);
                }
            }
            ProcessTree::Par(cs) => {
                self.silent += 2;
                let (split, join) = (format!("tau_{}", self.silent - 1), format!("tau_{}", self.silent));
                self.builder.transition(split.clone()).transition(join.clone());
                self.builder.arc(from, split.clone()).arc(join.clone(), to);
                for c in cs {
                    let (a, b) = (self.place(), self.place());
                    self.builder.arc(split.clone(), a.clone()).arc(b.clone(), join.clone());
                    self.build(c, &a, &b);
                }
            }
            ProcessTree::Loop(cs) => {
                let (a, b) = (self.place(), self.place());
                self.silent(from, &a);
                self.build(&cs[0], &a, &b);
                for redo in &cs[1..] {
                    self.build(redo, &b, &a);
                }
                self.silent(&b, to);
            }
        }
    }
}

/// Translates a valid tree into a workflow net with places `source` and
/// `sink`. Activity transitions are `t_<activity>` labelled with the activity;
/// silent transitions are `tau_<n>` and carry no label.
pub fn tree_to_wfnet(tree: &ProcessTree) -> GwfNet {
    assert!(tree.is_valid(), "operators need at least two children: {tree}");
    let mut tr = Translation {
        builder: PetriNet::builder(),
        places: 0,
        silent: 0,
        used: BTreeSet::new(),
    };
    tr.builder.place("source").place("sink");
    tr.build(tree, "source", "sink");
    let net = tr.builder.build().expect("block translation is a valid net");
    GwfNet::recognize(net).expect("block translation is a workflow net")
}

/// Discovers a tree and translates it.
pub fn discover(log: &EventLog) -> (ProcessTree, GwfNet) {
    let tree = discover_tree(log);
    let net = tree_to_wfnet(&tree);
    (tree, net)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gwf::check_soundness;
    use crate::net::{smd_cover, DEFAULT_SMD_BUDGET, DEFAULT_STATE_CAP};
    use proptest::prelude::*;

    fn log(traces: &[&[&str]]) -> EventLog {
        EventLog::from_strs(traces).unwrap()
    }

    #[test]
    fn basic_cuts() {
        assert_eq!(discover_tree(&log(&[&["a", "b"]])).to_string(), "seq(a, b)");
        assert_eq!(discover_tree(&log(&[&["a", "b"], &["b", "a"]])).to_string(), "par(a, b)");
        assert_eq!(discover_tree(&log(&[&["a"], &["a", "b", "a"]])).to_string(), "loop(a, b)");
        assert_eq!(discover_tree(&log(&[&["a"], &["b"]])).to_string(), "xor(a, b)");
        assert_eq!(discover_tree(&log(&[&["a", "b"], &["a"]])).to_string(), "seq(a, xor(b, tau))");
        assert_eq!(discover_tree(&log(&[&["a", "a", "a"]])).to_string(), "loop(a, tau)");
    }

    #[test]
    fn flower_fallback() {
        // a is both start and end, every pair follows in both directions except
        // c->b, which breaks par; b->c->a with a->c rules out a loop
        let l = log(&[&["a", "b", "c", "a"], &["a", "c", "b", "a"], &["b", "a"], &["a", "b"]]);
        let tree = discover_tree(&l);
        assert!(tree.is_valid());
        assert_eq!(tree.activities(), BTreeSet::from(["a", "b", "c"]));
    }

    #[test]
    fn dfg_counts() {
        let g = DirectlyFollowsGraph::from_log(&log(&[&["a", "b"], &["a", "b"], &["b"]]));
        assert_eq!(g.edges[&("a".into(), "b".into())], 2);
        assert_eq!(g.start["a"], 2);
        assert_eq!(g.end["b"], 3);
        assert!(!g.has_edge("b", "a"));
    }

    #[test]
    fn seq_translates_to_seq2_shape() {
        let net = tree_to_wfnet(&discover_tree(&log(&[&["a", "b"]])));
        assert_eq!((net.net().place_count(), net.net().transition_count()), (3, 2));
        assert!(net.is_wf_net());
        let a = net.net().transition("t_a").unwrap();
        assert_eq!(net.net().label(a), Some("a"));
    }

    #[test]
    fn xor_translation() {
        let net = tree_to_wfnet(&ProcessTree::Xor(vec![ProcessTree::activity("a"), ProcessTree::activity("b")]));
        assert_eq!((net.net().place_count(), net.net().transition_count()), (2, 2));
        assert!(check_soundness(&net, DEFAULT_STATE_CAP).sound);
    }

    #[test]
    fn determinism() {
        let l = log(&[&["a", "b", "c"], &["a", "c", "b"], &["d"], &["a", "c", "b"]]);
        let t1 = discover_tree(&l).to_string();
        let rev = EventLog::new(l.traces().iter().rev().cloned().collect()).unwrap();
        assert_eq!(t1, discover_tree(&rev).to_string());
        assert_eq!(t1, "xor(seq(a, par(b, c)), d)");
    }

    /// Trees of depth at most `depth` with activities named by position.
    pub(crate) fn arb_tree(depth: u32) -> impl Strategy<Value = ProcessTree> {
        let leaf = prop_oneof![4 => Just(ProcessTree::activity("x")), 1 => Just(ProcessTree::Silent)];
        let tree = leaf.prop_recursive(depth, 24, 3, |inner| {
            let kids = prop::collection::vec(inner, 2..4);
            prop_oneof![
                kids.clone().prop_map(ProcessTree::Seq),
                kids.clone().prop_map(ProcessTree::Xor),
                kids.clone().prop_map(ProcessTree::Par),
                kids.prop_map(ProcessTree::Loop),
            ]
        });
        tree.prop_map(|t| {
            let mut n = 0;
            rename(t, &mut n)
        })
    }

    fn rename(t: ProcessTree, n: &mut usize) -> ProcessTree {
        let kids = |cs: Vec<ProcessTree>, n: &mut usize| cs.into_iter().map(|c| rename(c, n)).collect();
        match t {
            ProcessTree::Activity(_) => {
                *n += 1;
                ProcessTree::Activity(format!("a{n}"))
            }
            ProcessTree::Silent => ProcessTree::Silent,
            ProcessTree::Seq(cs) => ProcessTree::Seq(kids(cs, n)),
            ProcessTree::Xor(cs) => ProcessTree::Xor(kids(cs, n)),
            ProcessTree::Par(cs) => ProcessTree::Par(kids(cs, n)),
            ProcessTree::Loop(cs) => ProcessTree::Loop(kids(cs, n)),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn translations_are_sound_and_smd(tree in arb_tree(4)) {
            let g = tree_to_wfnet(&tree);
            prop_assert!(g.is_wf_net());
            let report = check_soundness(&g, DEFAULT_STATE_CAP);
            prop_assert!(report.sound, "{}: {}", tree, report);
            let cover = smd_cover(g.net(), g.initial(), DEFAULT_SMD_BUDGET).unwrap();
            prop_assert!(cover.is_covered(), "{}", tree);
        }
    }
}
