//! Asynchronous channel composition of two workflow nets and its refinement
//! through α-morphisms.
//!
//! Composite node ids carry the prefixes `a1.`, `a2.` and `ch.`. The
//! provenance map of a [`ComposedNet`] is what code should consult; the
//! prefixes only matter when a composition is read back from a file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::gwf::{recognize_gwf, GwfError, GwfNet};
use crate::morphism::{check_alpha, AlphaMorphism, MorphismError};
use crate::net::{quote_token, tokenize, Marking, NetDocument, NetError, ParseError, PetriNet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("invalid channel spec: channel `{channel}` violates clause {clause}: {reason}")]
    InvalidChannelSpec {
        channel: String,
        clause: &'static str,
        reason: String,
    },
    #[error("transition `{0}` is in neither component")]
    UnknownTransition(String),
    #[error("transition `{0}` exists in both components; qualify it with a1. or a2.")]
    AmbiguousTransition(String),
    #[error("component mismatch: {0}")]
    ComponentMismatch(String),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Gwf(#[from] GwfError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub fn prefix(self) -> &'static str {
        match self {
            Agent::One => "a1.",
            Agent::Two => "a2.",
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::One => Agent::Two,
            Agent::Two => Agent::One,
        }
    }
}

pub const CHANNEL_PREFIX: &str = "ch.";

/// Where a node of a composed net comes from, with its original id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Agent(Agent, String),
    Channel(String),
}

/// Channel places with their send and receive arcs. Transition names may be
/// qualified with `a1.`/`a2.`; unqualified names are resolved against the
/// components at composition time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelSpec {
    pub channels: BTreeSet<String>,
    /// `(transition, channel)`
    pub sends: BTreeSet<(String, String)>,
    /// `(channel, transition)`
    pub receives: BTreeSet<(String, String)>,
}

impl ChannelSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn channel(&mut self, c: impl Into<String>) -> &mut Self {
        self.channels.insert(c.into());
        self
    }

    pub fn send(&mut self, t: impl Into<String>, c: impl Into<String>) -> &mut Self {
        self.sends.insert((t.into(), c.into()));
        self
    }

    pub fn recv(&mut self, c: impl Into<String>, t: impl Into<String>) -> &mut Self {
        self.receives.insert((c.into(), t.into()));
        self
    }
}

/// Parses `.chan` text: `channel <id>`, `send <transition> <channel>`,
/// `recv <channel> <transition>`.
pub fn parse_chan(text: &str) -> Result<ChannelSpec, ParseError> {
    let mut spec = ChannelSpec::new();
    let mut pending = Vec::new();
    for (line, tokens) in tokenize(text)? {
        let arity = |n: usize| {
            if tokens.len() == n + 1 {
                Ok(())
            } else {
                Err(ParseError::new(line, format!("`{}` takes {n} argument(s)", tokens[0])))
            }
        };
        match tokens[0].as_str() {
            "channel" => {
                arity(1)?;
                if !spec.channels.insert(tokens[1].clone()) {
                    return Err(ParseError::new(line, format!("channel `{}` declared twice", tokens[1])));
                }
            }
            "send" => {
                arity(2)?;
                pending.push((line, tokens[2].clone()));
                if !spec.sends.insert((tokens[1].clone(), tokens[2].clone())) {
                    return Err(ParseError::new(line, "duplicate send arc"));
                }
            }
            "recv" => {
                arity(2)?;
                pending.push((line, tokens[1].clone()));
                if !spec.receives.insert((tokens[1].clone(), tokens[2].clone())) {
                    return Err(ParseError::new(line, "duplicate recv arc"));
                }
            }
            other => return Err(ParseError::new(line, format!("unknown keyword `{other}`"))),
        }
    }
    for (line, c) in pending {
        if !spec.channels.contains(&c) {
            return Err(ParseError::new(line, format!("channel `{c}` is not declared")));
        }
    }
    Ok(spec)
}

pub fn print_chan(spec: &ChannelSpec) -> String {
    let mut out = String::new();
    for c in &spec.channels {
        let _ = writeln!(out, "channel {}", quote_token(c));
    }
    for (t, c) in &spec.sends {
        let _ = writeln!(out, "send {} {}", quote_token(t), quote_token(c));
    }
    for (c, t) in &spec.receives {
        let _ = writeln!(out, "recv {} {}", quote_token(c), quote_token(t));
    }
    out
}

/// A channel spec whose transitions have been resolved to one component.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedSpec {
    pub channels: BTreeSet<String>,
    pub sends: BTreeSet<(Agent, String, String)>,
    pub receives: BTreeSet<(String, Agent, String)>,
}

impl ResolvedSpec {
    /// Back to a plain spec with every transition qualified.
    pub fn to_spec(&self) -> ChannelSpec {
        let mut s = ChannelSpec::new();
        for c in &self.channels {
            s.channel(c.clone());
        }
        for (a, t, c) in &self.sends {
            s.send(format!("{}{t}", a.prefix()), c.clone());
        }
        for (c, a, t) in &self.receives {
            s.recv(c.clone(), format!("{}{t}", a.prefix()));
        }
        s
    }
}

fn resolve(name: &str, n1: &PetriNet, n2: &PetriNet) -> Result<(Agent, String), ComposeError> {
    for (agent, net) in [(Agent::One, n1), (Agent::Two, n2)] {
        if let Some(rest) = name.strip_prefix(agent.prefix()) {
            if net.transition(rest).is_some() {
                return Ok((agent, rest.to_string()));
            }
        }
    }
    match (n1.transition(name).is_some(), n2.transition(name).is_some()) {
        (true, false) => Ok((Agent::One, name.to_string())),
        (false, true) => Ok((Agent::Two, name.to_string())),
        (true, true) => Err(ComposeError::AmbiguousTransition(name.to_string())),
        (false, false) => Err(ComposeError::UnknownTransition(name.to_string())),
    }
}

fn resolve_spec(spec: &ChannelSpec, n1: &PetriNet, n2: &PetriNet) -> Result<ResolvedSpec, ComposeError> {
    let mut r = ResolvedSpec {
        channels: spec.channels.clone(),
        ..Default::default()
    };
    let unknown = |c: &str| ComposeError::InvalidChannelSpec {
        channel: c.to_string(),
        clause: "1",
        reason: "channel is used but not declared".into(),
    };
    for (t, c) in &spec.sends {
        if !spec.channels.contains(c) {
            return Err(unknown(c));
        }
        let (a, t) = resolve(t, n1, n2)?;
        r.sends.insert((a, t, c.clone()));
    }
    for (c, t) in &spec.receives {
        if !spec.channels.contains(c) {
            return Err(unknown(c));
        }
        let (a, t) = resolve(t, n1, n2)?;
        r.receives.insert((c.clone(), a, t));
    }
    for c in &r.channels {
        let senders: BTreeSet<Agent> = r.sends.iter().filter(|s| &s.2 == c).map(|s| s.0).collect();
        let receivers: BTreeSet<Agent> = r.receives.iter().filter(|s| &s.0 == c).map(|s| s.1).collect();
        let bad = |clause, reason: &str| ComposeError::InvalidChannelSpec {
            channel: c.clone(),
            clause,
            reason: reason.to_string(),
        };
        if senders.is_empty() || receivers.is_empty() {
            return Err(bad("5c", "every channel needs a sender and a receiver"));
        }
        if senders.len() > 1 || receivers.len() > 1 {
            return Err(bad("5a", "senders and receivers must each lie in one component"));
        }
        if senders == receivers {
            return Err(bad("5b", "sender and receiver lie in the same component"));
        }
    }
    Ok(r)
}

/// A channel composition together with its parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedNet {
    pub result: GwfNet,
    pub provenance: BTreeMap<String, Origin>,
    pub components: [GwfNet; 2],
    pub spec: ResolvedSpec,
}

impl ComposedNet {
    pub fn component(&self, a: Agent) -> &GwfNet {
        match a {
            Agent::One => &self.components[0],
            Agent::Two => &self.components[1],
        }
    }

    pub fn net(&self) -> &PetriNet {
        self.result.net()
    }

    /// The composed net as a document with `channel` lines.
    pub fn to_document(&self) -> NetDocument {
        let mut doc = self.result.to_document();
        doc.channels = self.spec.channels.iter().map(|c| format!("{CHANNEL_PREFIX}{c}")).collect();
        doc
    }

    /// Rebuilds a composition from a document written by [`Self::to_document`]:
    /// `channel` lines name the channel places and the `a1.`/`a2.` prefixes
    /// assign every other node to a component.
    pub fn from_document(doc: &NetDocument) -> Result<ComposedNet, ComposeError> {
        let net = &doc.net;
        let side = |id: &str| -> Result<Option<(Agent, String)>, ComposeError> {
            if doc.channels.contains(id) {
                return Ok(None);
            }
            for a in [Agent::One, Agent::Two] {
                if let Some(rest) = id.strip_prefix(a.prefix()) {
                    return Ok(Some((a, rest.to_string())));
                }
            }
            Err(ComposeError::ComponentMismatch(format!(
                "node `{id}` is neither a channel nor prefixed with a1./a2."
            )))
        };
        let mut builders = [PetriNet::builder(), PetriNet::builder()];
        let slot = |a: Agent| if a == Agent::One { 0 } else { 1 };
        for p in net.places() {
            if let Some((a, id)) = side(p)? {
                builders[slot(a)].place(id);
            }
        }
        for (t, id) in net.transitions().iter().enumerate() {
            match side(id)? {
                Some((a, id)) => {
                    builders[slot(a)].transition_with(id, net.label(t).map(str::to_string));
                }
                None => {
                    return Err(ComposeError::ComponentMismatch(format!("transition `{id}` is marked as a channel")))
                }
            }
        }
        let mut spec = ChannelSpec::new();
        let strip = |c: &str| c.strip_prefix(CHANNEL_PREFIX).unwrap_or(c).to_string();
        for c in &doc.channels {
            spec.channel(strip(c));
        }
        for (x, y) in net.arc_ids() {
            match (side(x)?, side(y)?) {
                (Some((a, x)), Some((b, y))) if a == b => {
                    builders[slot(a)].arc(x, y);
                }
                (Some((a, t)), None) => {
                    spec.send(format!("{}{t}", a.prefix()), strip(y));
                }
                (None, Some((a, t))) => {
                    spec.recv(strip(x), format!("{}{t}", a.prefix()));
                }
                _ => {
                    return Err(ComposeError::ComponentMismatch(format!(
                        "arc {x} -> {y} joins the two components directly"
                    )))
                }
            }
        }
        let [b1, b2] = builders;
        let n1 = GwfNet::recognize(b1.build()?)?;
        let n2 = GwfNet::recognize(b2.build()?)?;
        channel_compose(&n1, &n2, &spec)
    }
}

/// Builds `N1 ⊕Pc N2`.
pub fn channel_compose(n1: &GwfNet, n2: &GwfNet, spec: &ChannelSpec) -> Result<ComposedNet, ComposeError> {
    let resolved = resolve_spec(spec, n1.net(), n2.net())?;
    compose_resolved(n1, n2, resolved)
}

fn compose_resolved(n1: &GwfNet, n2: &GwfNet, spec: ResolvedSpec) -> Result<ComposedNet, ComposeError> {
    let mut b = PetriNet::builder();
    let mut provenance = BTreeMap::new();
    for (agent, g) in [(Agent::One, n1), (Agent::Two, n2)] {
        let net = g.net();
        let pre = agent.prefix();
        for p in net.places() {
            b.place(format!("{pre}{p}"));
            provenance.insert(format!("{pre}{p}"), Origin::Agent(agent, p.clone()));
        }
        for (t, id) in net.transitions().iter().enumerate() {
            b.transition_with(format!("{pre}{id}"), net.label(t).map(str::to_string));
            provenance.insert(format!("{pre}{id}"), Origin::Agent(agent, id.clone()));
        }
        for (x, y) in net.arc_ids() {
            b.arc(format!("{pre}{x}"), format!("{pre}{y}"));
        }
    }
    for c in &spec.channels {
        b.place(format!("{CHANNEL_PREFIX}{c}"));
        provenance.insert(format!("{CHANNEL_PREFIX}{c}"), Origin::Channel(c.clone()));
    }
    for (a, t, c) in &spec.sends {
        b.arc(format!("{}{t}", a.prefix()), format!("{CHANNEL_PREFIX}{c}"));
    }
    for (c, a, t) in &spec.receives {
        b.arc(format!("{CHANNEL_PREFIX}{c}"), format!("{}{t}", a.prefix()));
    }
    let net = b.build()?;
    let mut m0 = Marking::new();
    let mut mf = Marking::new();
    for (agent, g) in [(Agent::One, n1), (Agent::Two, n2)] {
        for p in g.initial().places() {
            m0.add(format!("{}{p}", agent.prefix()), 1);
        }
        for p in g.final_marking().places() {
            mf.add(format!("{}{p}", agent.prefix()), 1);
        }
    }
    let result = recognize_gwf(net, Some(&m0), Some(&mf))
        .expect("a channel composition of two GWF-nets is a GWF-net");
    Ok(ComposedNet {
        result,
        provenance,
        components: [n1.clone(), n2.clone()],
        spec,
    })
}

/// Replaces component `side` of `c` by the source of `phi`, copying every
/// channel arc of an abstract transition onto all of its preimages.
///
/// Returns the refined composition and the induced morphism onto `c`, which
/// is `phi` on the replaced component and the identity elsewhere.
pub fn refine_in_composition(
    c: &ComposedNet,
    side: Agent,
    phi: &AlphaMorphism,
) -> Result<(ComposedNet, AlphaMorphism), ComposeError> {
    if !phi.is_certified() {
        return Err(MorphismError::Unchecked.into());
    }
    let abstract_part = c.component(side);
    if !phi.target().same_structure(abstract_part.net()) || phi.target_initial() != abstract_part.initial() {
        return Err(ComposeError::ComponentMismatch(format!(
            "the morphism's target is not component {} of the composition",
            if side == Agent::One { 1 } else { 2 }
        )));
    }
    let refined = GwfNet::recognize(phi.source().clone())?;
    if refined.initial() != phi.source_initial() {
        return Err(ComposeError::ComponentMismatch(
            "the morphism's source marking is not the refined net's source places".into(),
        ));
    }

    let mut spec = ResolvedSpec {
        channels: c.spec.channels.clone(),
        ..Default::default()
    };
    for (a, t, ch) in &c.spec.sends {
        if *a == side {
            for t1 in phi.preimage(t) {
                spec.sends.insert((*a, t1, ch.clone()));
            }
        } else {
            spec.sends.insert((*a, t.clone(), ch.clone()));
        }
    }
    for (ch, a, t) in &c.spec.receives {
        if *a == side {
            for t1 in phi.preimage(t) {
                spec.receives.insert((ch.clone(), *a, t1));
            }
        } else {
            spec.receives.insert((ch.clone(), *a, t.clone()));
        }
    }
    let (n1, n2) = match side {
        Agent::One => (&refined, c.component(Agent::Two)),
        Agent::Two => (c.component(Agent::One), &refined),
    };
    let composed = compose_resolved(n1, n2, spec)?;

    let map: BTreeMap<String, String> = composed
        .provenance
        .iter()
        .map(|(id, origin)| {
            let img = match origin {
                Origin::Agent(a, x) if *a == side => {
                    format!("{}{}", a.prefix(), phi.image(x).expect("total map"))
                }
                _ => id.clone(),
            };
            (id.clone(), img)
        })
        .collect();
    let induced = check_alpha(
        composed.net(),
        composed.result.initial(),
        c.net(),
        c.result.initial(),
        &map,
    )?;
    Ok((composed, induced))
}

/// Splits a marking of the composition into its component and channel parts,
/// each keyed by original ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkingParts {
    pub agent1: Marking,
    pub channels: Marking,
    pub agent2: Marking,
}

impl fmt::Display for MarkingParts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.agent1, self.channels, self.agent2)
    }
}

pub fn decompose_marking(c: &ComposedNet, m: &Marking) -> Result<MarkingParts, ComposeError> {
    let mut parts = MarkingParts {
        agent1: Marking::new(),
        channels: Marking::new(),
        agent2: Marking::new(),
    };
    for (p, n) in m.iter() {
        match c.provenance.get(p) {
            Some(Origin::Agent(Agent::One, id)) if c.net().place(p).is_some() => parts.agent1.add(id.clone(), n),
            Some(Origin::Agent(Agent::Two, id)) if c.net().place(p).is_some() => parts.agent2.add(id.clone(), n),
            Some(Origin::Channel(id)) => parts.channels.add(id.clone(), n),
            _ => return Err(NetError::InvalidMarking(p.to_string()).into()),
        }
    }
    Ok(parts)
}
