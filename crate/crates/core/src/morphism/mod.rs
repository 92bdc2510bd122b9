//! α-morphisms between marked SMD safe nets.
//!
//! [`check_alpha`] evaluates every condition separately and records a witness
//! for each failure, so a rejected map says exactly what is wrong with it.
//! Only a morphism whose certificate passes in full counts as certified; the
//! behavioural helpers refuse anything else.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::net::{
    explore, explore_tokens, find_sequential_component, smd_cover, Marking, NetError, Node, PetriNet,
    SmdCover, SmdError, DEFAULT_SMD_BUDGET, DEFAULT_STATE_CAP,
};
use crate::unfolding::UnfoldError;

mod candidate;
mod format;
mod local;

pub use candidate::{label_region_candidate, quotient_candidate, Block, Quotient};
pub use format::{parse_amap, print_amap, AmapDocument};
pub use local::{build_local_nets, lemma1_check, LocalNetPair, BOTTOM, TOP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("map is not a total surjective node map: {0}")]
    MapShape(String),
    #[error("{net} net is not SMD safe: {reason}")]
    NotSmdSafe { net: &'static str, reason: String },
    #[error("sequential component search exceeded its budget of {0}")]
    Budget(usize),
    #[error("morphism is not certified")]
    Unchecked,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("no candidate map: {0}")]
    NoCandidate(String),
    #[error("preservation violated at step {step}: {detail}")]
    PreservationViolation { step: usize, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Unfold(#[from] UnfoldError),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl From<SmdError> for MorphismError {
    fn from(e: SmdError) -> Self {
        match e {
            SmdError::BudgetExceeded(n) => MorphismError::Budget(n),
            SmdError::Net(e) => MorphismError::Net(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Places,
    Initial,
    TransitionNeighbourhood,
    Collapse,
    Acyclic,
    InputPlaces,
    OutputPlaces,
    InternalPlaces,
    SequentialComponent,
}

impl Condition {
    pub const ALL: [Condition; 9] = [
        Condition::Places,
        Condition::Initial,
        Condition::TransitionNeighbourhood,
        Condition::Collapse,
        Condition::Acyclic,
        Condition::InputPlaces,
        Condition::OutputPlaces,
        Condition::InternalPlaces,
        Condition::SequentialComponent,
    ];

    /// The short name used in reports: `1`, `2`, `3`, `4`, `5a` … `5e`.
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Places => "1",
            Condition::Initial => "2",
            Condition::TransitionNeighbourhood => "3",
            Condition::Collapse => "4",
            Condition::Acyclic => "5a",
            Condition::InputPlaces => "5b",
            Condition::OutputPlaces => "5c",
            Condition::InternalPlaces => "5d",
            Condition::SequentialComponent => "5e",
        }
    }

    pub fn from_name(s: &str) -> Option<Condition> {
        Condition::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub passed: bool,
    /// The first offending node, prefixed with the abstract place for the
    /// per-place conditions (`p2: node`).
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    results: Vec<ConditionResult>,
}

impl Certificate {
    pub fn results(&self) -> &[ConditionResult] {
        &self.results
    }

    pub fn result(&self, c: Condition) -> &ConditionResult {
        self.results.iter().find(|r| r.condition == c).expect("all conditions recorded")
    }

    pub fn passed(&self, c: Condition) -> bool {
        self.result(c).passed
    }

    pub fn is_certified(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certified: {}", if self.is_certified() { "yes" } else { "no" })?;
        for r in &self.results {
            write!(f, "condition {}: {}", r.condition, if r.passed { "pass" } else { "fail" })?;
            if let Some(w) = &r.witness {
                write!(f, " ({w})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AlphaOptions {
    pub state_cap: usize,
    pub smd_budget: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            state_cap: DEFAULT_STATE_CAP,
            smd_budget: DEFAULT_SMD_BUDGET,
        }
    }
}

/// A checked node map `φ: N1 → N2` with its certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaMorphism {
    source: PetriNet,
    target: PetriNet,
    m0s: Marking,
    m0t: Marking,
    map: BTreeMap<String, String>,
    certificate: Certificate,
}

impl AlphaMorphism {
    pub fn source(&self) -> &PetriNet {
        &self.source
    }

    pub fn target(&self) -> &PetriNet {
        &self.target
    }

    pub fn source_initial(&self) -> &Marking {
        &self.m0s
    }

    pub fn target_initial(&self) -> &Marking {
        &self.m0t
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn is_certified(&self) -> bool {
        self.certificate.is_certified()
    }

    pub fn image(&self, id: &str) -> Option<&str> {
        self.map.get(id).map(String::as_str)
    }

    /// Source ids mapped onto `id`, in ascending order.
    pub fn preimage(&self, id: &str) -> Vec<String> {
        self.map
            .iter()
            .filter(|(_, v)| v.as_str() == id)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// `φ(m)` read as a set: every target place with a marked preimage gets one token.
    pub fn image_marking(&self, m: &Marking) -> Result<Marking, MorphismError> {
        let mut out = Marking::new();
        for p in m.places() {
            let img = self
                .image(p)
                .ok_or_else(|| MorphismError::Net(NetError::InvalidMarking(p.to_string())))?;
            if self.target.place(img).is_none() {
                return Err(MorphismError::Unchecked);
            }
            if out.get(img) == 0 {
                out.add(img, 1);
            }
        }
        Ok(out)
    }

    fn require_certified(&self) -> Result<(), MorphismError> {
        if self.is_certified() {
            Ok(())
        } else {
            Err(MorphismError::Unchecked)
        }
    }
}

/// Checks `map` against every α-morphism condition with default limits.
pub fn check_alpha(
    n1: &PetriNet,
    m01: &Marking,
    n2: &PetriNet,
    m02: &Marking,
    map: &BTreeMap<String, String>,
) -> Result<AlphaMorphism, MorphismError> {
    check_alpha_with(n1, m01, n2, m02, map, AlphaOptions::default())
}

pub fn check_alpha_with(
    n1: &PetriNet,
    m01: &Marking,
    n2: &PetriNet,
    m02: &Marking,
    map: &BTreeMap<String, String>,
    opts: AlphaOptions,
) -> Result<AlphaMorphism, MorphismError> {
    let phi = resolve_map(n1, n2, map)?;
    require_smd_safe(n1, m01, "source", opts)?;
    require_smd_safe(n2, m02, "target", opts)?;
    let tokens1 = n1.tokens(m01)?;
    let results = evaluate(n1, &tokens1, n2, m02, &phi, opts.smd_budget)?;
    Ok(AlphaMorphism {
        source: n1.clone(),
        target: n2.clone(),
        m0s: m01.clone(),
        m0t: m02.clone(),
        map: map.clone(),
        certificate: Certificate { results },
    })
}

/// Index form of the map: images of places first, then transitions.
struct Phi {
    places: Vec<Node>,
    transitions: Vec<Node>,
}

impl Phi {
    fn of(&self, n: Node) -> Node {
        match n {
            Node::Place(p) => self.places[p],
            Node::Transition(t) => self.transitions[t],
        }
    }

    fn image(&self, nodes: impl IntoIterator<Item = Node>) -> BTreeSet<Node> {
        nodes.into_iter().map(|n| self.of(n)).collect()
    }

    fn preimage(&self, n2: Node) -> impl Iterator<Item = Node> + '_ {
        let ps = (0..self.places.len()).map(Node::Place);
        let ts = (0..self.transitions.len()).map(Node::Transition);
        ps.chain(ts).filter(move |&n| self.of(n) == n2)
    }
}

fn resolve_map(n1: &PetriNet, n2: &PetriNet, map: &BTreeMap<String, String>) -> Result<Phi, MorphismError> {
    for k in map.keys() {
        if !n1.contains(k) {
            return Err(MorphismError::MapShape(format!("`{k}` is not a node of the source net")));
        }
    }
    let look = |id: &str| -> Result<Node, MorphismError> {
        let v = map
            .get(id)
            .ok_or_else(|| MorphismError::MapShape(format!("source node `{id}` is unmapped")))?;
        n2.node(v)
            .ok_or_else(|| MorphismError::MapShape(format!("`{v}` is not a node of the target net")))
    };
    let phi = Phi {
        places: n1.places().iter().map(|p| look(p)).collect::<Result<_, _>>()?,
        transitions: n1.transitions().iter().map(|t| look(t)).collect::<Result<_, _>>()?,
    };
    let hit: HashSet<Node> = phi.places.iter().chain(&phi.transitions).copied().collect();
    if let Some(n) = n2.nodes().find(|n| !hit.contains(n)) {
        return Err(MorphismError::MapShape(format!(
            "target node `{}` has no preimage",
            n2.node_id(n)
        )));
    }
    Ok(phi)
}

fn require_smd_safe(net: &PetriNet, m0: &Marking, which: &'static str, opts: AlphaOptions) -> Result<(), MorphismError> {
    let rg = explore(net, m0, opts.state_cap)?;
    if let Some(s) = rg.unsafe_state() {
        let tokens = rg.state(s);
        let p = tokens.iter().position(|&n| n > 1).unwrap_or(0);
        return Err(MorphismError::NotSmdSafe {
            net: which,
            reason: format!("place `{}` can hold two tokens", net.place_id(p)),
        });
    }
    if rg.is_truncated() {
        return Err(MorphismError::NotSmdSafe {
            net: which,
            reason: format!("safety unknown: state space exceeds {} states", opts.state_cap),
        });
    }
    match smd_cover(net, m0, opts.smd_budget)? {
        SmdCover::Covered(_) => Ok(()),
        SmdCover::Uncoverable(p) => Err(MorphismError::NotSmdSafe {
            net: which,
            reason: format!("place `{p}` lies in no sequential component"),
        }),
    }
}

fn evaluate(
    n1: &PetriNet,
    m01: &[u32],
    n2: &PetriNet,
    m02: &Marking,
    phi: &Phi,
    budget: usize,
) -> Result<Vec<ConditionResult>, MorphismError> {
    let mut witnesses: BTreeMap<Condition, Option<String>> =
        Condition::ALL.iter().map(|&c| (c, None)).collect();
    let mut fail = |c: Condition, w: String| {
        let slot = witnesses.get_mut(&c).unwrap();
        if slot.is_none() {
            *slot = Some(w);
        }
    };

    // 1
    for p in 0..n1.place_count() {
        if !phi.places[p].is_place() {
            fail(Condition::Places, n1.place_id(p).to_string());
        }
    }
    let place_images: HashSet<Node> = phi.places.iter().copied().collect();
    for p2 in 0..n2.place_count() {
        if !place_images.contains(&Node::Place(p2)) {
            fail(Condition::Places, n2.place_id(p2).to_string());
        }
    }

    // 2
    let marked: BTreeSet<Node> = (0..n1.place_count())
        .filter(|&p| m01[p] > 0)
        .map(|p| phi.places[p])
        .collect();
    let expected: BTreeSet<Node> = m02
        .places()
        .map(|p| n2.place(p).map(Node::Place).ok_or_else(|| NetError::InvalidMarking(p.to_string())))
        .collect::<Result<_, _>>()?;
    if let Some(n) = marked.symmetric_difference(&expected).next() {
        fail(Condition::Initial, n2.node_id(*n).to_string());
    }

    // 3 and 4
    for t in 0..n1.transition_count() {
        let tn = Node::Transition(t);
        match phi.transitions[t] {
            t2 @ Node::Transition(_) => {
                if phi.image(n1.preset(tn)) != n2.preset(t2).into_iter().collect()
                    || phi.image(n1.postset(tn)) != n2.postset(t2).into_iter().collect()
                {
                    fail(Condition::TransitionNeighbourhood, n1.transition_id(t).to_string());
                }
            }
            p2 @ Node::Place(_) => {
                if phi.image(n1.neighbourhood(tn)) != BTreeSet::from([p2]) {
                    fail(Condition::Collapse, n1.transition_id(t).to_string());
                }
            }
        }
    }

    // 5a to 5e, per abstract place
    for p2 in 0..n2.place_count() {
        let p2n = Node::Place(p2);
        let p2id = n2.place_id(p2);
        let block: HashSet<Node> = phi.preimage(p2n).collect();
        let at = |n: Node| format!("{p2id}: {}", n1.node_id(n));

        if let Some(n) = cycle_node(n1, &block) {
            fail(Condition::Acyclic, at(n));
        }

        let (inputs, outputs) = n1.boundary(&block);
        let pre2: BTreeSet<Node> = n2.preset(p2n).into_iter().collect();
        let post2: BTreeSet<Node> = n2.postset(p2n).into_iter().collect();
        for &n in inputs.iter().filter(|n| n.is_place()) {
            let pre = n1.preset(n);
            if !phi.image(pre.iter().copied()).is_subset(&pre2) || (!pre2.is_empty() && pre.is_empty()) {
                fail(Condition::InputPlaces, at(n));
            }
        }
        for &n in outputs.iter().filter(|n| n.is_place()) {
            if phi.image(n1.postset(n)) != post2 {
                fail(Condition::OutputPlaces, at(n));
            }
        }
        let only_p2 = BTreeSet::from([p2n]);
        let mut places: Vec<Node> = block.iter().copied().filter(|n| n.is_place()).collect();
        places.sort();
        for &n in &places {
            if (!inputs.contains(&n) && phi.image(n1.preset(n)) != only_p2)
                || (!outputs.contains(&n) && phi.image(n1.postset(n)) != only_p2)
            {
                fail(Condition::InternalPlaces, at(n));
            }
        }

        let mut required: Vec<usize> = pre2
            .iter()
            .chain(&post2)
            .flat_map(|&t2| phi.preimage(t2))
            .filter_map(|n| match n {
                Node::Transition(t) => Some(t),
                Node::Place(_) => None,
            })
            .collect();
        required.sort_unstable();
        required.dedup();
        let mut covered: HashSet<usize> = HashSet::new();
        for &n in &places {
            let Node::Place(p) = n else { unreachable!() };
            if covered.contains(&p) {
                continue;
            }
            match find_sequential_component(n1, m01, p, &required, budget)? {
                Some(component) => covered.extend(component),
                None => fail(Condition::SequentialComponent, at(n)),
            }
        }
    }

    Ok(witnesses
        .into_iter()
        .map(|(condition, witness)| ConditionResult {
            condition,
            passed: witness.is_none(),
            witness,
        })
        .collect())
}

/// A node on a cycle of the subnet generated by `block`, if any.
fn cycle_node(net: &PetriNet, block: &HashSet<Node>) -> Option<Node> {
    let mut indeg: BTreeMap<Node, usize> = block.iter().map(|&n| (n, 0)).collect();
    for &n in block {
        for m in net.postset(n) {
            if let Some(d) = indeg.get_mut(&m) {
                *d += 1;
            }
        }
    }
    let mut ready: Vec<Node> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    while let Some(n) = ready.pop() {
        indeg.remove(&n);
        for m in net.postset(n) {
            if let Some(d) = indeg.get_mut(&m) {
                *d -= 1;
                if *d == 0 {
                    ready.push(m);
                }
            }
        }
    }
    indeg.keys().next().copied()
}

/// Replays `trace` in the source net and returns its image in the target.
///
/// Every step is checked against the preservation property: a step mapped to
/// a transition must take `φ(m)` to `φ(m')` by firing that transition, and a
/// step mapped to a place must leave `φ(m)` unchanged.
pub fn simulate_preservation<S: AsRef<str>>(phi: &AlphaMorphism, trace: &[S]) -> Result<Vec<String>, MorphismError> {
    phi.require_certified()?;
    let n1 = phi.source();
    let n2 = phi.target();
    let mut m = phi.source_initial().clone();
    let mut img = phi.image_marking(&m)?;
    if &img != phi.target_initial() {
        return Err(MorphismError::PreservationViolation {
            step: 0,
            detail: format!("initial image {img} differs from {}", phi.target_initial()),
        });
    }
    let mut out = Vec::new();
    for (i, t) in trace.iter().enumerate() {
        let t = t.as_ref();
        let next = n1.fire(&m, t)?;
        let next_img = phi.image_marking(&next)?;
        let t2 = phi.image(t).ok_or_else(|| MorphismError::UnknownNode(t.to_string()))?;
        if n2.transition(t2).is_some() {
            let fired = n2.fire(&img, t2).map_err(|_| MorphismError::PreservationViolation {
                step: i + 1,
                detail: format!("`{t2}` is not enabled at {img}"),
            })?;
            if fired != next_img {
                return Err(MorphismError::PreservationViolation {
                    step: i + 1,
                    detail: format!("firing `{t2}` gives {fired}, image of successor is {next_img}"),
                });
            }
            out.push(t2.to_string());
        } else if next_img != img {
            return Err(MorphismError::PreservationViolation {
                step: i + 1,
                detail: format!("internal step `{t}` changes the image from {img} to {next_img}"),
            });
        }
        m = next;
        img = next_img;
    }
    Ok(out)
}

/// Outcome of the exhaustive marking-reflection check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reflection {
    Holds,
    /// No reachable source marking maps onto this target marking.
    NoPreimage(Marking),
    /// Every preimage of the marking leaves some preimage transition of an
    /// enabled target transition disabled.
    NotEnabled { marking: Marking, transition: String },
    /// One of the state spaces exceeded the cap.
    Truncated,
}

/// How preimage transitions must be enabled for marking reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionMode {
    /// One preimage marking enables every preimage transition of every
    /// enabled target transition at once.
    Simultaneous,
    /// Each preimage transition is enabled at some preimage marking.
    PerTransition,
}

/// Checks that every reachable target marking has a reachable preimage and
/// that preimage transitions of enabled target transitions are enabled there,
/// in the sense given by `mode`.
pub fn check_reflection(phi: &AlphaMorphism, cap: usize, mode: ReflectionMode) -> Result<Reflection, MorphismError> {
    phi.require_certified()?;
    let n1 = phi.source();
    let n2 = phi.target();
    let rg1 = explore(n1, phi.source_initial(), cap)?;
    let rg2 = explore_tokens(n2, n2.tokens(phi.target_initial())?, cap);
    if rg1.is_truncated() || rg2.is_truncated() {
        return Ok(Reflection::Truncated);
    }
    let mut by_image: BTreeMap<Marking, Vec<usize>> = BTreeMap::new();
    for (i, m1) in rg1.markings(n1).enumerate() {
        by_image.entry(phi.image_marking(&m1)?).or_default().push(i);
    }
    for s2 in rg2.states() {
        let m2 = n2.marking(s2);
        let Some(candidates) = by_image.get(&m2) else {
            return Ok(Reflection::NoPreimage(m2));
        };
        let pre: Vec<(usize, Vec<usize>)> = n2
            .enabled_at(s2)
            .into_iter()
            .map(|t2| {
                let ts = phi
                    .preimage(n2.transition_id(t2))
                    .iter()
                    .filter_map(|id| n1.transition(id))
                    .collect();
                (t2, ts)
            })
            .collect();
        let enables = |i: usize, ts: &[usize]| ts.iter().all(|&t| n1.is_enabled_at(rg1.state(i), t));
        let failing = match mode {
            ReflectionMode::Simultaneous => {
                if candidates.iter().any(|&i| pre.iter().all(|(_, ts)| enables(i, ts))) {
                    None
                } else {
                    // name a target transition no single preimage serves, else the first
                    pre.iter()
                        .find(|(_, ts)| !candidates.iter().any(|&i| enables(i, ts)))
                        .or(pre.first())
                        .map(|(t2, _)| *t2)
                }
            }
            ReflectionMode::PerTransition => pre
                .iter()
                .find(|(_, ts)| !ts.iter().all(|&t| candidates.iter().any(|&i| enables(i, &[t]))))
                .map(|(t2, _)| *t2),
        };
        if let Some(t2) = failing {
            return Ok(Reflection::NotEnabled {
                marking: m2,
                transition: n2.transition_id(t2).to_string(),
            });
        }
    }
    Ok(Reflection::Holds)
}
