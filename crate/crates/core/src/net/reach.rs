//! Breadth-first reachability with a state cap and an early stop on the first
//! safety violation.

use std::collections::{HashMap, VecDeque};

use super::{Marking, NetError, PetriNet};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub transition: usize,
    pub to: usize,
}

/// Explored part of `[m0⟩`. State 0 is the initial marking.
#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    edges: Vec<Edge>,
    successors: Vec<Vec<usize>>,
    parent: Vec<Option<(usize, usize)>>,
    deadlocks: Vec<usize>,
    safe: bool,
    truncated: bool,
    unsafe_state: Option<usize>,
}

impl ReachabilityGraph {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices leaving state `i`.
    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.successors[i].iter().map(move |&e| &self.edges[e])
    }

    pub fn deadlocks(&self) -> &[usize] {
        &self.deadlocks
    }

    pub fn is_safe(&self) -> bool {
        self.safe
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// The first marking found with more than one token on a place.
    pub fn unsafe_state(&self) -> Option<usize> {
        self.unsafe_state
    }

    pub fn find(&self, tokens: &[u32]) -> Option<usize> {
        self.index.get(tokens).copied()
    }

    /// Transition indices of a shortest firing sequence from the initial state.
    pub fn path_to(&self, mut i: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some((prev, t)) = self.parent[i] {
            path.push(t);
            i = prev;
        }
        path.reverse();
        path
    }

    pub fn markings<'a>(&'a self, net: &'a PetriNet) -> impl Iterator<Item = Marking> + 'a {
        self.states.iter().map(move |s| net.marking(s))
    }

    /// States from which some state in `targets` is reachable (backward closure).
    pub fn can_reach(&self, targets: &[usize]) -> Vec<bool> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for e in &self.edges {
            preds[e.to].push(e.from);
        }
        let mut seen = vec![false; self.states.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &t in targets {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &p in &preds[s] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }
}

/// Explores `[m0⟩` breadth first, keeping at most `cap` states.
pub fn explore(net: &PetriNet, m0: &Marking, cap: usize) -> Result<ReachabilityGraph, NetError> {
    let tokens = net.tokens(m0)?;
    Ok(explore_tokens(net, tokens, cap))
}

pub fn explore_tokens(net: &PetriNet, m0: Vec<u32>, cap: usize) -> ReachabilityGraph {
    let cap = cap.max(1);
    let mut g = ReachabilityGraph {
        states: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
        successors: Vec::new(),
        parent: Vec::new(),
        deadlocks: Vec::new(),
        safe: true,
        truncated: false,
        unsafe_state: None,
    };
    let initially_unsafe = m0.iter().any(|&n| n > 1);
    g.index.insert(m0.clone(), 0);
    g.states.push(m0);
    g.successors.push(Vec::new());
    g.parent.push(None);
    if initially_unsafe {
        g.safe = false;
        g.unsafe_state = Some(0);
        return g;
    }

    let mut queue = VecDeque::from([0usize]);
    'bfs: while let Some(s) = queue.pop_front() {
        let mut any_enabled = false;
        for t in 0..net.transition_count() {
            if !net.is_enabled_at(&g.states[s], t) {
                continue;
            }
            any_enabled = true;
            let next = net.fire_tokens(&g.states[s], t);
            let target = match g.index.get(&next) {
                Some(&i) => i,
                None => {
                    if g.states.len() >= cap {
                        g.truncated = true;
                        break 'bfs;
                    }
                    let i = g.states.len();
                    let violates = next.iter().any(|&n| n > 1);
                    g.index.insert(next.clone(), i);
                    g.states.push(next);
                    g.successors.push(Vec::new());
                    g.parent.push(Some((s, t)));
                    if violates {
                        g.safe = false;
                        g.unsafe_state = Some(i);
                        let e = g.edges.len();
                        g.edges.push(Edge { from: s, transition: t, to: i });
                        g.successors[s].push(e);
                        break 'bfs;
                    }
                    queue.push_back(i);
                    i
                }
            };
            let e = g.edges.len();
            g.edges.push(Edge { from: s, transition: t, to: target });
            g.successors[s].push(e);
        }
        if !any_enabled {
            g.deadlocks.push(s);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::tests::seq2;
    use crate::net::PetriNet;

    #[test]
    fn seq2_state_space() {
        let n = seq2();
        let g = explore(&n, &Marking::from_places(["s"]), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(g.state_count(), 3);
        assert!(g.is_safe());
        assert!(!g.is_truncated());
        assert_eq!(g.deadlocks().len(), 1);
        assert_eq!(n.marking(g.state(g.deadlocks()[0])), Marking::from_places(["f"]));
        for e in g.edges() {
            assert_eq!(n.fire_tokens(g.state(e.from), e.transition), g.state(e.to));
        }
    }

    #[test]
    fn doubling_transition_is_unsafe() {
        // t puts a token into q twice via a loop back through r
        let mut b = PetriNet::builder();
        b.place("s").place("q").transition("t").transition("u");
        b.arc("s", "t").arc("t", "q").arc("t", "s");
        b.arc("q", "u").arc("u", "q");
        let n = b.build().unwrap();
        let g = explore(&n, &Marking::from_places(["s"]), 100).unwrap();
        assert!(!g.is_safe());
        let bad = g.unsafe_state().unwrap();
        assert_eq!(n.marking(g.state(bad)).get("q"), 2);
        let path: Vec<&str> = g.path_to(bad).iter().map(|&t| n.transition_id(t)).collect();
        assert_eq!(path, vec!["t", "t"]);
    }

    #[test]
    fn cap_truncates() {
        let n = seq2();
        let g = explore(&n, &Marking::from_places(["s"]), 2).unwrap();
        assert!(g.is_truncated());
        assert_eq!(g.state_count(), 2);
    }
}
