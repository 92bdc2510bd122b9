//! Proposing candidate abstractions. Nothing here certifies anything; every
//! result still has to go through `check_alpha`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::MorphismError;
use crate::net::{Marking, Node, PetriNet};

/// One block of a grouping: the source nodes it contains and the id of the
/// abstract node it collapses to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub abstract_id: String,
    pub members: Vec<String>,
}

impl Block {
    pub fn new<S: Into<String>>(abstract_id: impl Into<String>, members: impl IntoIterator<Item = S>) -> Self {
        Block {
            abstract_id: abstract_id.into(),
            members: members.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quotient {
    pub net: PetriNet,
    pub initial: Marking,
    pub map: BTreeMap<String, String>,
}

/// Builds the quotient of `net` by `grouping`. A singleton transition block
/// stays a transition (keeping its label); every other block becomes a place.
pub fn quotient_candidate(net: &PetriNet, m0: &Marking, grouping: &[Block]) -> Result<Quotient, MorphismError> {
    let bad = |m: String| MorphismError::InvalidPartition(m);
    let mut owner: HashMap<Node, usize> = HashMap::new();
    let mut ids = HashSet::new();
    for (i, b) in grouping.iter().enumerate() {
        if b.members.is_empty() {
            return Err(bad(format!("block `{}` is empty", b.abstract_id)));
        }
        if !ids.insert(b.abstract_id.as_str()) {
            return Err(bad(format!("abstract id `{}` is used twice", b.abstract_id)));
        }
        for m in &b.members {
            let n = net.node(m).ok_or_else(|| bad(format!("`{m}` is not a node of the net")))?;
            if owner.insert(n, i).is_some() {
                return Err(bad(format!("`{m}` belongs to two blocks")));
            }
        }
    }
    if let Some(n) = net.nodes().find(|n| !owner.contains_key(n)) {
        return Err(bad(format!("`{}` belongs to no block", net.node_id(n))));
    }

    let is_transition: Vec<bool> = grouping
        .iter()
        .map(|b| b.members.len() == 1 && net.transition(&b.members[0]).is_some())
        .collect();
    for (i, b) in grouping.iter().enumerate() {
        if b.members.len() > 1 && !connected(net, &owner, i) {
            return Err(bad(format!("block `{}` is not connected", b.abstract_id)));
        }
    }

    let mut builder = PetriNet::builder();
    for (i, b) in grouping.iter().enumerate() {
        if is_transition[i] {
            let t = net.transition(&b.members[0]).unwrap();
            builder.transition_with(b.abstract_id.clone(), net.label(t).map(str::to_string));
        } else {
            builder.place(b.abstract_id.clone());
        }
    }
    let mut arcs = BTreeSet::new();
    for &(x, y) in net.arcs() {
        let (bx, by) = (owner[&x], owner[&y]);
        if bx == by {
            continue;
        }
        if !is_transition[bx] && !is_transition[by] {
            return Err(bad(format!(
                "arc {} -> {} joins two place blocks `{}` and `{}`",
                net.node_id(x),
                net.node_id(y),
                grouping[bx].abstract_id,
                grouping[by].abstract_id
            )));
        }
        arcs.insert((bx, by));
    }
    for (bx, by) in arcs {
        builder.arc(grouping[bx].abstract_id.clone(), grouping[by].abstract_id.clone());
    }
    let quotient = builder.build()?;

    let mut initial = Marking::new();
    for p in m0.places() {
        let n = net.place(p).ok_or_else(|| bad(format!("marked place `{p}` is unknown")))?;
        let id = &grouping[owner[&Node::Place(n)]].abstract_id;
        if initial.get(id) == 0 {
            initial.add(id.clone(), 1);
        }
    }
    let map = net
        .nodes()
        .map(|n| (net.node_id(n).to_string(), grouping[owner[&n]].abstract_id.clone()))
        .collect();
    Ok(Quotient {
        net: quotient,
        initial,
        map,
    })
}

fn connected(net: &PetriNet, owner: &HashMap<Node, usize>, block: usize) -> bool {
    let members: Vec<Node> = owner.iter().filter(|(_, &b)| b == block).map(|(&n, _)| n).collect();
    let mut seen = HashSet::from([members[0]]);
    let mut stack = vec![members[0]];
    while let Some(n) = stack.pop() {
        for m in net.neighbourhood(n) {
            if owner[&m] == block && seen.insert(m) {
                stack.push(m);
            }
        }
    }
    seen.len() == members.len()
}

/// Proposes a map from `refined` onto `abstract_net` by labels.
///
/// A labelled refined transition whose label names exactly one abstract
/// transition, by label or id, maps to it; unlabelled ones are internal.
/// Each connected region of the remaining nodes maps to the unique abstract
/// place whose preset and postset are the images of the mapped transitions
/// feeding and draining the region.
pub fn label_region_candidate(refined: &PetriNet, abstract_net: &PetriNet) -> Result<BTreeMap<String, String>, MorphismError> {
    let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
    for t in 0..abstract_net.transition_count() {
        let id = abstract_net.transition_id(t);
        by_name.entry(id).or_default().push(t);
        if let Some(l) = abstract_net.label(t) {
            if l != id {
                by_name.entry(l).or_default().push(t);
            }
        }
    }
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut mapped: HashMap<Node, usize> = HashMap::new();
    for t in 0..refined.transition_count() {
        let Some(name) = refined.label(t) else { continue };
        match by_name.get(name).map(Vec::as_slice) {
            Some([t2]) => {
                mapped.insert(Node::Transition(t), *t2);
                map.insert(refined.transition_id(t).to_string(), abstract_net.transition_id(*t2).to_string());
            }
            Some(_) => return Err(MorphismError::NoCandidate(format!("label `{name}` is ambiguous in the abstract net"))),
            None => {}
        }
    }

    let mut seen: HashSet<Node> = mapped.keys().copied().collect();
    let mut used: HashMap<usize, String> = HashMap::new();
    for start in refined.nodes() {
        if seen.contains(&start) {
            continue;
        }
        let mut region = vec![start];
        seen.insert(start);
        let mut i = 0;
        while i < region.len() {
            for m in refined.neighbourhood(region[i]) {
                if seen.insert(m) {
                    region.push(m);
                }
            }
            i += 1;
        }
        let mut feeds = BTreeSet::new();
        let mut drains = BTreeSet::new();
        for &n in &region {
            for m in refined.preset(n) {
                if let Some(&t2) = mapped.get(&m) {
                    feeds.insert(t2);
                }
            }
            for m in refined.postset(n) {
                if let Some(&t2) = mapped.get(&m) {
                    drains.insert(t2);
                }
            }
        }
        let candidates: Vec<usize> = (0..abstract_net.place_count())
            .filter(|&p2| {
                abstract_net.pre_p(p2).iter().copied().collect::<BTreeSet<_>>() == feeds
                    && abstract_net.post_p(p2).iter().copied().collect::<BTreeSet<_>>() == drains
            })
            .collect();
        let first = refined.node_id(start);
        let p2 = match candidates.as_slice() {
            [p2] => *p2,
            [] => return Err(MorphismError::NoCandidate(format!("no abstract place matches the region around `{first}`"))),
            _ => return Err(MorphismError::NoCandidate(format!("several abstract places match the region around `{first}`"))),
        };
        if let Some(other) = used.insert(p2, first.to_string()) {
            return Err(MorphismError::NoCandidate(format!(
                "regions around `{other}` and `{first}` both match `{}`",
                abstract_net.place_id(p2)
            )));
        }
        for n in region {
            map.insert(refined.node_id(n).to_string(), abstract_net.place_id(p2).to_string());
        }
    }
    Ok(map)
}
