//! Compositional discovery: project the log per agent, discover each agent,
//! certify the discovered nets against an abstract protocol, and refine the
//! protocol composition with them. Direct discovery on the full log is run
//! alongside for comparison.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::compose::{channel_compose, refine_in_composition, Agent, ChannelSpec, ComposeError, ComposedNet};
use crate::conformance::{quality, ConformanceError, QualityReport};
use crate::discover::{discover, ProcessTree};
use crate::gwf::{check_soundness, GwfNet, SoundnessReport};
use crate::log::{project, AgentPartition, EventLog, LogError};
use crate::morphism::{check_alpha, label_region_candidate, AlphaMorphism, Certificate, MorphismError};
use crate::net::DEFAULT_STATE_CAP;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("agent {agent}: the projected log is empty")]
    EmptyProjection { agent: u8 },
    #[error("agent {agent}: no candidate morphism: {source}")]
    Candidate {
        agent: u8,
        #[source]
        source: MorphismError,
    },
    #[error("agent {agent}: the discovered net is not an α-morphic refinement of the protocol\n{certificate}")]
    NotCertified { agent: u8, certificate: Certificate },
    #[error("the abstract protocol composition is not sound\n{0}")]
    UnsoundProtocol(SoundnessReport),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Conformance(#[from] ConformanceError),
}

/// How the morphism from a discovered agent net to its protocol is obtained.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum MapSource {
    /// Labels and regions, see [`label_region_candidate`].
    #[default]
    LabelRegions,
    Supplied(BTreeMap<String, String>),
}

#[derive(Debug, Clone)]
pub struct PipelineInput<'a> {
    pub log: &'a EventLog,
    pub partition: &'a AgentPartition,
    pub protocol: [&'a GwfNet; 2],
    pub spec: &'a ChannelSpec,
    pub maps: [MapSource; 2],
}

#[derive(Debug, Clone)]
pub struct AgentResult {
    pub tree: ProcessTree,
    pub net: GwfNet,
    pub morphism: AlphaMorphism,
    /// Traces that became empty under projection.
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub agents: [AgentResult; 2],
    pub protocol: ComposedNet,
    pub composed: ComposedNet,
    pub soundness: SoundnessReport,
    pub direct_tree: ProcessTree,
    pub direct: GwfNet,
    pub composed_quality: QualityReport,
    pub direct_quality: QualityReport,
}

impl PipelineReport {
    /// The two-row comparison table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<14} {:>8} {:>10}\n", "model", "fitness", "precision");
        for (name, q) in [("compositional", &self.composed_quality), ("direct", &self.direct_quality)] {
            out.push_str(&format!("{:<14} {:>8.4} {:>10.4}\n", name, q.fitness, q.precision));
        }
        out
    }
}

impl fmt::Display for PipelineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.agents.iter().enumerate() {
            writeln!(f, "agent {}: {}", i + 1, a.tree)?;
            if a.dropped > 0 {
                writeln!(f, "agent {}: {} trace(s) empty after projection", i + 1, a.dropped)?;
            }
        }
        writeln!(f, "direct: {}", self.direct_tree)?;
        writeln!(f, "composed sound: {}", if self.soundness.sound { "yes" } else { "no" })?;
        f.write_str(&self.table())
    }
}

fn agent(input: &PipelineInput, i: usize) -> Result<AgentResult, PipelineError> {
    let n = i as u8 + 1;
    let alphabet = if i == 0 { &input.partition.a1 } else { &input.partition.a2 };
    let projection = project(input.log, alphabet);
    if projection.log.is_empty() {
        return Err(PipelineError::EmptyProjection { agent: n });
    }
    let (tree, net) = discover(&projection.log);
    let target = input.protocol[i];
    let map = match &input.maps[i] {
        MapSource::Supplied(m) => m.clone(),
        MapSource::LabelRegions => label_region_candidate(net.net(), target.net())
            .map_err(|source| PipelineError::Candidate { agent: n, source })?,
    };
    let morphism = check_alpha(net.net(), net.initial(), target.net(), target.initial(), &map)?;
    if !morphism.is_certified() {
        return Err(PipelineError::NotCertified {
            agent: n,
            certificate: morphism.certificate().clone(),
        });
    }
    Ok(AgentResult {
        tree,
        net,
        morphism,
        dropped: projection.dropped,
    })
}

pub fn run_pipeline(input: &PipelineInput) -> Result<PipelineReport, PipelineError> {
    input.partition.covers(input.log)?;
    let a1 = agent(input, 0)?;
    let a2 = agent(input, 1)?;
    let protocol = channel_compose(input.protocol[0], input.protocol[1], input.spec)?;
    let report = check_soundness(&protocol.result, DEFAULT_STATE_CAP);
    if !report.sound {
        return Err(PipelineError::UnsoundProtocol(report));
    }
    let (half, _) = refine_in_composition(&protocol, Agent::One, &a1.morphism)?;
    let (composed, _) = refine_in_composition(&half, Agent::Two, &a2.morphism)?;
    let soundness = check_soundness(&composed.result, DEFAULT_STATE_CAP);
    let (direct_tree, direct) = discover(input.log);
    let composed_quality = quality(&composed.result, input.log)?;
    let direct_quality = quality(&direct, input.log)?;
    Ok(PipelineReport {
        agents: [a1, a2],
        protocol,
        composed,
        soundness,
        direct_tree,
        direct,
        composed_quality,
        direct_quality,
    })
}
