//! Local nets around one abstract place and the unfolding-based check on them.

use std::collections::{BTreeMap, BTreeSet};

use super::{check_alpha, AlphaMorphism, MorphismError};
use crate::gwf::{check_soundness, GwfNet};
use crate::net::{Marking, PetriNet, DEFAULT_STATE_CAP};
use crate::unfolding::{unfold, DEFAULT_EVENT_CAP};

/// Id suffix of the artificial input place.
pub const TOP: &str = "⊤";
/// Id suffix of the artificial output place.
pub const BOTTOM: &str = "⊥";

#[derive(Debug, Clone)]
pub struct LocalNetPair {
    pub s1: PetriNet,
    pub s1_initial: Marking,
    pub s2: PetriNet,
    pub s2_initial: Marking,
    /// The restriction of the morphism, extended by `⊤ ↦ ⊤` and `⊥ ↦ ⊥`.
    pub restricted: AlphaMorphism,
    /// Ids of the artificial places, in both nets.
    pub artificial: Vec<String>,
}

fn artificial(net: &str, which: &str) -> String {
    format!("{net}.{which}")
}

/// Builds `S1(p2)` and `S2(p2)`. Artificial places are added exactly when
/// `•p2` (input side) or `p2•` (output side) is non-empty; each local net is
/// marked on its source places.
pub fn build_local_nets(phi: &AlphaMorphism, p2: &str) -> Result<LocalNetPair, MorphismError> {
    phi.require_certified()?;
    let n1 = phi.source();
    let n2 = phi.target();
    let p2i = n2.place(p2).ok_or_else(|| MorphismError::UnknownNode(p2.to_string()))?;
    let pre2: Vec<&str> = n2.pre_p(p2i).iter().map(|&t| n2.transition_id(t)).collect();
    let post2: Vec<&str> = n2.post_p(p2i).iter().map(|&t| n2.transition_id(t)).collect();

    let mut s2 = PetriNet::builder();
    s2.place(p2);
    let mut art = Vec::new();
    for t in pre2.iter().chain(&post2) {
        if !s2.has_node(t) {
            s2.transition_with(*t, n2.transition(t).and_then(|i| n2.label(i)).map(str::to_string));
        }
    }
    for t in &pre2 {
        s2.arc(*t, p2);
    }
    for t in &post2 {
        s2.arc(p2, *t);
    }

    let block: BTreeSet<String> = phi.preimage(p2).into_iter().collect();
    let pre1: BTreeSet<String> = pre2.iter().flat_map(|t| phi.preimage(t)).collect();
    let post1: BTreeSet<String> = post2.iter().flat_map(|t| phi.preimage(t)).collect();
    let mut s1 = PetriNet::builder();
    for id in block.iter().chain(&pre1).chain(&post1) {
        if s1.has_node(id) {
            continue;
        }
        match n1.transition(id) {
            Some(t) => s1.transition_with(id.clone(), n1.label(t).map(str::to_string)),
            None => s1.place(id.clone()),
        };
    }
    for (a, b) in n1.arc_ids() {
        // arcs between boundary transitions and places outside the block are dropped
        let inside = |x: &str| block.contains(x);
        let keep = (inside(a) && (inside(b) || post1.contains(b) || pre1.contains(b)))
            || (inside(b) && (pre1.contains(a) || post1.contains(a)));
        if keep {
            s1.arc(a, b);
        }
    }

    let mut map: BTreeMap<String, String> = block
        .iter()
        .chain(&pre1)
        .chain(&post1)
        .map(|id| (id.clone(), phi.image(id).expect("total map").to_string()))
        .collect();
    if !pre2.is_empty() {
        let (a1, a2) = (artificial("S1", TOP), artificial("S2", TOP));
        s1.place(a1.clone());
        s2.place(a2.clone());
        for t in &pre1 {
            s1.arc(a1.clone(), t.clone());
        }
        for t in &pre2 {
            s2.arc(a2.clone(), *t);
        }
        map.insert(a1.clone(), a2.clone());
        art.extend([a1, a2]);
    }
    if !post2.is_empty() {
        let (a1, a2) = (artificial("S1", BOTTOM), artificial("S2", BOTTOM));
        s1.place(a1.clone());
        s2.place(a2.clone());
        for t in &post1 {
            s1.arc(t.clone(), a1.clone());
        }
        for t in &post2 {
            s2.arc(*t, a2.clone());
        }
        map.insert(a1.clone(), a2.clone());
        art.extend([a1, a2]);
    }
    let s1 = s1.build()?;
    let s2 = s2.build()?;
    let sources = |n: &PetriNet| Marking::from_places(n.source_places().into_iter().map(|p| n.place_id(p).to_string()));
    let (m1, m2) = (sources(&s1), sources(&s2));
    let restricted = check_alpha(&s1, &m1, &s2, &m2, &map)?;
    Ok(LocalNetPair {
        s1,
        s1_initial: m1,
        s2,
        s2_initial: m2,
        restricted,
        artificial: art,
    })
}

/// Unfolds `S1(p2)` and checks that the folding composed with the restricted
/// morphism is itself an α-morphism onto `S2(p2)`.
///
/// The source net must be a sound generalized workflow net; anything else is
/// reported as a precondition failure rather than a verdict.
pub fn lemma1_check(phi: &AlphaMorphism, p2: &str) -> Result<bool, MorphismError> {
    phi.require_certified()?;
    let gwf = GwfNet::recognize(phi.source().clone())
        .map_err(|e| MorphismError::Precondition(format!("source net: {e}")))?;
    let report = check_soundness(&gwf, DEFAULT_STATE_CAP);
    if !report.sound {
        return Err(MorphismError::Precondition(format!(
            "source net is not sound ({})",
            report.violated.as_str()
        )));
    }
    let local = build_local_nets(phi, p2)?;
    let bp = unfold(&local.s1, &local.s1_initial, DEFAULT_EVENT_CAP)?;
    if bp.truncated {
        return Err(MorphismError::Precondition("unfolding of the local net is infinite".into()));
    }
    let (occ, occ_m0) = bp.to_marked_net(&local.s1)?;
    let map: BTreeMap<String, String> = bp
        .fold
        .iter()
        .map(|(x, y)| (x.clone(), local.restricted.image(y).expect("total map").to_string()))
        .collect();
    match check_alpha(&occ, &occ_m0, &local.s2, &local.s2_initial, &map) {
        Ok(m) => Ok(m.is_certified()),
        Err(MorphismError::MapShape(_)) => Ok(false),
        Err(e) => Err(e),
    }
}
