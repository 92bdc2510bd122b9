//! Sequential components and state-machine decomposability.
//!
//! A sequential component is a place set `A` whose generated subnet
//! `N(A ∪ ⦁A⦁)` is a connected state machine holding exactly one token under
//! the initial marking. The search grows `A` from a seed place: every
//! transition touching `A` must end up with exactly one input and one output
//! place inside `A`, and each transition still missing one forces a choice
//! among its candidate places. Every addition is adjacent to the current set,
//! so anything the search closes is connected; conversely every sequential
//! component containing the seed is reachable by some sequence of choices.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use super::{Marking, NetError, PetriNet};

pub const DEFAULT_SMD_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmdError {
    #[error("sequential component search exceeded its budget of {0} partial components")]
    BudgetExceeded(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmdCover {
    /// Place-id sets of the components found, in discovery order.
    Covered(Vec<BTreeSet<String>>),
    /// The first place that lies in no sequential component.
    Uncoverable(String),
}

impl SmdCover {
    pub fn is_covered(&self) -> bool {
        matches!(self, SmdCover::Covered(_))
    }
}

/// Covers every place of `net` by sequential components, or reports the first
/// place that cannot be covered.
pub fn smd_cover(net: &PetriNet, m0: &Marking, budget: usize) -> Result<SmdCover, SmdError> {
    let tokens = net.tokens(m0)?;
    let mut covered = vec![false; net.place_count()];
    let mut components = Vec::new();
    let mut spent = 0usize;
    for p in 0..net.place_count() {
        if covered[p] {
            continue;
        }
        let mut search = Search::new(net, &tokens, &[], budget.saturating_sub(spent));
        let found = search.run(p);
        spent += search.visited;
        match found? {
            Some(places) => {
                for &q in &places {
                    covered[q] = true;
                }
                components.push(places.iter().map(|&q| net.place_id(q).to_string()).collect());
            }
            None => return Ok(SmdCover::Uncoverable(net.place_id(p).to_string())),
        }
    }
    Ok(SmdCover::Covered(components))
}

/// Finds a sequential component containing place `seed` whose transition set
/// includes every transition in `required`. Returns its places, ascending.
pub fn find_sequential_component(
    net: &PetriNet,
    m0: &[u32],
    seed: usize,
    required: &[usize],
    budget: usize,
) -> Result<Option<Vec<usize>>, SmdError> {
    Search::new(net, m0, required, budget).run(seed)
}

struct Search<'a> {
    net: &'a PetriNet,
    m0: &'a [u32],
    required: &'a [usize],
    budget: usize,
    visited: usize,
    in_set: Vec<bool>,
    members: Vec<usize>,
    failed: HashSet<Vec<usize>>,
}

enum Pending {
    Closed,
    Broken,
    Choose(Vec<usize>),
}

impl<'a> Search<'a> {
    fn new(net: &'a PetriNet, m0: &'a [u32], required: &'a [usize], budget: usize) -> Self {
        Search {
            net,
            m0,
            required,
            budget,
            visited: 0,
            in_set: vec![false; net.place_count()],
            members: Vec::new(),
            failed: HashSet::new(),
        }
    }

    fn run(&mut self, seed: usize) -> Result<Option<Vec<usize>>, SmdError> {
        if self.m0[seed] > 1 {
            return Ok(None);
        }
        self.push(seed);
        let r = self.extend(self.m0[seed]);
        if r.as_ref().map(|o| o.is_none()).unwrap_or(false) {
            self.pop(seed);
        }
        r
    }

    fn push(&mut self, p: usize) {
        self.in_set[p] = true;
        self.members.push(p);
    }

    fn pop(&mut self, p: usize) {
        self.in_set[p] = false;
        let last = self.members.pop();
        debug_assert_eq!(last, Some(p));
    }

    fn key(&self) -> Vec<usize> {
        let mut k = self.members.clone();
        k.sort_unstable();
        k
    }

    /// Inspects every transition adjacent to the current set and returns the
    /// most constrained unresolved side, if any.
    fn pending(&self) -> Pending {
        let mut best: Option<Vec<usize>> = None;
        let mut seen = BTreeSet::new();
        for &p in &self.members {
            for &t in self.net.pre_p(p).iter().chain(self.net.post_p(p)) {
                if !seen.insert(t) {
                    continue;
                }
                let ins = self.net.pre_t(t).iter().filter(|&&q| self.in_set[q]).count();
                let outs = self.net.post_t(t).iter().filter(|&&q| self.in_set[q]).count();
                if ins > 1 || outs > 1 {
                    return Pending::Broken;
                }
                let side = if ins == 0 {
                    Some(self.net.pre_t(t))
                } else if outs == 0 {
                    Some(self.net.post_t(t))
                } else {
                    None
                };
                if let Some(side) = side {
                    if best.as_ref().is_none_or(|b| side.len() < b.len()) {
                        best = Some(side.to_vec());
                    }
                }
            }
        }
        match best {
            Some(c) => Pending::Choose(c),
            None => Pending::Closed,
        }
    }

    fn covers_required(&self) -> bool {
        self.required.iter().all(|&t| {
            self.net.pre_t(t).iter().any(|&q| self.in_set[q])
                || self.net.post_t(t).iter().any(|&q| self.in_set[q])
        })
    }

    fn extend(&mut self, tokens: u32) -> Result<Option<Vec<usize>>, SmdError> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(SmdError::BudgetExceeded(self.budget));
        }
        let key = self.key();
        if self.failed.contains(&key) {
            return Ok(None);
        }
        match self.pending() {
            Pending::Broken => {}
            Pending::Closed => {
                if tokens == 1 && self.covers_required() {
                    return Ok(Some(key));
                }
            }
            Pending::Choose(candidates) => {
                for q in candidates {
                    let t = tokens + self.m0[q];
                    if t > 1 {
                        continue;
                    }
                    self.push(q);
                    let r = self.extend(t)?;
                    self.pop(q);
                    if r.is_some() {
                        return Ok(r);
                    }
                }
            }
        }
        self.failed.insert(key);
        Ok(None)
    }
}
