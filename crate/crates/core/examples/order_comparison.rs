//! Simulates the order/acknowledge system, then compares direct discovery
//! with compositional discovery on the generated log.

use std::path::{Path, PathBuf};

use wfcompose::compose::{channel_compose, parse_chan};
use wfcompose::gwf::GwfNet;
use wfcompose::log::AgentPartition;
use wfcompose::net::parse_pnet;
use wfcompose::pipeline::{run_pipeline, MapSource, PipelineInput};
use wfcompose::simulate::{playout, PlayoutOptions};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn load(name: &str) -> GwfNet {
    let text = std::fs::read_to_string(corpus(name)).expect("corpus file");
    GwfNet::from_document(&parse_pnet(&text).expect("valid net")).expect("workflow net")
}

fn main() {
    let spec = parse_chan(&std::fs::read_to_string(corpus("order/spec.chan")).unwrap()).unwrap();
    let system = channel_compose(&load("order/customer.pnet"), &load("order/shop.pnet"), &spec).unwrap();
    let log = playout(&system.result, 1000, 2024, PlayoutOptions::default()).unwrap().log;
    println!("simulated {} traces, {} distinct", log.len(), log.multiset().len());

    let partition: AgentPartition = std::fs::read_to_string(corpus("order/partition.toml")).unwrap().parse().unwrap();
    let (p1, p2) = (load("order/protocol1.pnet"), load("order/protocol2.pnet"));
    let report = run_pipeline(&PipelineInput {
        log: &log,
        partition: &partition,
        protocol: [&p1, &p2],
        spec: &spec,
        maps: [MapSource::LabelRegions, MapSource::LabelRegions],
    })
    .unwrap();
    print!("{report}");
}
