//! Generalized workflow nets and their soundness.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::morphism::{AlphaMorphism, MorphismError};
use crate::net::{explore_tokens, quote_token, Marking, NetDocument, Node, PetriNet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GwfError {
    #[error("not a generalized workflow net: clause {clause} fails{}", node.as_ref().map(|n| format!(" at `{n}`")).unwrap_or_default())]
    NotGwf { clause: u8, node: Option<String> },
}

/// A net together with `m0` (all source places) and `mf` (all sink places),
/// certified so that every node lies on a path from `m0` to `mf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GwfNet {
    net: PetriNet,
    m0: Marking,
    mf: Marking,
}

impl GwfNet {
    /// Certifies `net`, deriving both markings from its structure.
    pub fn recognize(net: PetriNet) -> Result<Self, GwfError> {
        recognize_gwf(net, None, None)
    }

    /// Certifies a parsed document; declared `init`/`final` flags, when
    /// present, must coincide with the derived markings.
    pub fn from_document(doc: &NetDocument) -> Result<Self, GwfError> {
        let m0 = (!doc.initial.is_empty()).then_some(&doc.initial);
        let mf = (!doc.final_marking.is_empty()).then_some(&doc.final_marking);
        recognize_gwf(doc.net.clone(), m0, mf)
    }

    pub fn net(&self) -> &PetriNet {
        &self.net
    }

    pub fn initial(&self) -> &Marking {
        &self.m0
    }

    pub fn final_marking(&self) -> &Marking {
        &self.mf
    }

    pub fn into_net(self) -> PetriNet {
        self.net
    }

    /// Both markings have exactly one place.
    pub fn is_wf_net(&self) -> bool {
        self.m0.len() == 1 && self.mf.len() == 1
    }

    pub fn initial_tokens(&self) -> Vec<u32> {
        self.net.tokens(&self.m0).expect("m0 is over the net's places")
    }

    pub fn final_tokens(&self) -> Vec<u32> {
        self.net.tokens(&self.mf).expect("mf is over the net's places")
    }

    pub fn to_document(&self) -> NetDocument {
        let mut doc = NetDocument::new(self.net.clone());
        doc.initial = self.m0.clone();
        doc.final_marking = self.mf.clone();
        doc
    }
}

/// Checks the three structural clauses of a generalized workflow net.
///
/// Declared markings, when given, are cross-checked against the derived
/// source and sink sets; a mismatch reports the clause it contradicts.
pub fn recognize_gwf(
    net: PetriNet,
    declared_m0: Option<&Marking>,
    declared_mf: Option<&Marking>,
) -> Result<GwfNet, GwfError> {
    let sources = net.source_places();
    let sinks = net.sink_places();
    if sources.is_empty() {
        return Err(GwfError::NotGwf { clause: 1, node: None });
    }
    if sinks.is_empty() {
        return Err(GwfError::NotGwf { clause: 2, node: None });
    }
    let m0 = Marking::from_places(sources.iter().map(|&p| net.place_id(p).to_string()));
    let mf = Marking::from_places(sinks.iter().map(|&p| net.place_id(p).to_string()));
    for (clause, declared, derived) in [(1u8, declared_m0, &m0), (2u8, declared_mf, &mf)] {
        if let Some(d) = declared {
            if d != derived {
                let node = d
                    .places()
                    .find(|p| derived.get(p) != d.get(p))
                    .or_else(|| derived.places().find(|p| d.get(p) == 0))
                    .map(str::to_string);
                return Err(GwfError::NotGwf { clause, node });
            }
        }
    }

    let forward = sweep(&net, sources.iter().map(|&p| Node::Place(p)), true);
    let backward = sweep(&net, sinks.iter().map(|&p| Node::Place(p)), false);
    if let Some(n) = net.nodes().find(|n| !forward.contains(n) || !backward.contains(n)) {
        return Err(GwfError::NotGwf {
            clause: 3,
            node: Some(net.node_id(n).to_string()),
        });
    }
    Ok(GwfNet { net, m0, mf })
}

fn sweep(net: &PetriNet, start: impl Iterator<Item = Node>, forward: bool) -> HashSet<Node> {
    let mut seen: HashSet<Node> = start.collect();
    let mut queue: VecDeque<Node> = seen.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        let next = if forward { net.postset(n) } else { net.preset(n) };
        for m in next {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    None,
    OptionToComplete,
    ProperCompletion,
    DeadTransition,
    Unsafe,
    Truncated,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::None => "none",
            Violation::OptionToComplete => "option-to-complete",
            Violation::ProperCompletion => "proper-completion",
            Violation::DeadTransition => "dead-transition",
            Violation::Unsafe => "unsafe",
            Violation::Truncated => "truncated",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    None,
    /// A transition that is never enabled.
    Transition(String),
    /// A firing sequence from `m0` to the offending marking.
    Sequence { firing: Vec<String>, reaches: Marking },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundnessReport {
    pub sound: bool,
    pub violated: Violation,
    pub witness: Witness,
    /// Number of markings explored.
    pub states: usize,
}

impl fmt::Display for SoundnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sound: {}", if self.sound { "yes" } else { "no" })?;
        writeln!(f, "violated: {}", self.violated)?;
        match &self.witness {
            Witness::None => writeln!(f, "witness: none")?,
            Witness::Transition(t) => writeln!(f, "witness: transition {}", quote_token(t))?,
            Witness::Sequence { firing, reaches } => {
                write!(f, "witness: sequence")?;
                for t in firing {
                    write!(f, " {}", quote_token(t))?;
                }
                writeln!(f)?;
                writeln!(f, "reaches: {reaches}")?;
            }
        }
        writeln!(f, "states: {}", self.states)
    }
}

/// Decides soundness by exhaustive exploration of `[m0⟩`.
///
/// The checks run in a fixed order and the first failure is reported: safety,
/// completeness of the exploration, proper completion, option to complete,
/// and finally dead transitions.
pub fn check_soundness(g: &GwfNet, cap: usize) -> SoundnessReport {
    let net = &g.net;
    let rg = explore_tokens(net, g.initial_tokens(), cap);
    let seq = |i: usize| Witness::Sequence {
        firing: rg
            .path_to(i)
            .into_iter()
            .map(|t| net.transition_id(t).to_string())
            .collect(),
        reaches: net.marking(rg.state(i)),
    };
    let report = |violated, witness| SoundnessReport {
        sound: violated == Violation::None,
        violated,
        witness,
        states: rg.state_count(),
    };

    if let Some(bad) = rg.unsafe_state() {
        return report(Violation::Unsafe, seq(bad));
    }
    if rg.is_truncated() {
        return report(Violation::Truncated, Witness::None);
    }

    let mf = g.final_tokens();
    let covers = |s: &[u32]| s.iter().zip(&mf).all(|(&a, &b)| a >= b);
    if let Some(i) = (0..rg.state_count()).find(|&i| covers(rg.state(i)) && rg.state(i) != mf.as_slice()) {
        return report(Violation::ProperCompletion, seq(i));
    }

    let targets: Vec<usize> = rg.find(&mf).into_iter().collect();
    let good = rg.can_reach(&targets);
    if let Some(i) = (0..rg.state_count()).find(|&i| !good[i]) {
        return report(Violation::OptionToComplete, seq(i));
    }

    let mut fired = vec![false; net.transition_count()];
    for e in rg.edges() {
        fired[e.transition] = true;
    }
    if let Some(t) = fired.iter().position(|&f| !f) {
        return report(
            Violation::DeadTransition,
            Witness::Transition(net.transition_id(t).to_string()),
        );
    }
    report(Violation::None, Witness::None)
}

/// Whether `marking` of the morphism's source net is well marked: for every
/// marked place of the target, every input place of the refining subnet is
/// marked, and nothing else is.
pub fn well_marked(marking: &Marking, phi: &AlphaMorphism) -> Result<bool, MorphismError> {
    if !phi.is_certified() {
        return Err(MorphismError::Unchecked);
    }
    let n1 = phi.source();
    let n2 = phi.target();
    let mut expected = BTreeSet::new();
    for p2 in phi.target_initial().places() {
        let block: HashSet<Node> = phi
            .preimage(p2)
            .iter()
            .map(|id| n1.node(id).expect("preimage nodes belong to the source"))
            .collect();
        let (inputs, _) = n1.boundary(&block);
        for n in inputs {
            if let Node::Place(p) = n {
                expected.insert(n1.place_id(p).to_string());
            }
        }
        debug_assert!(n2.place(p2).is_some());
    }
    let marked: BTreeSet<String> = marking.places().map(str::to_string).collect();
    for p in &marked {
        if n1.place(p).is_none() {
            return Err(MorphismError::Net(crate::net::NetError::InvalidMarking(p.clone())));
        }
    }
    Ok(marked == expected)
}
