//! Channel composition of the handshake agents, then refinement of each side
//! in turn. Every step is checked for soundness.

use wfcompose::compose::{channel_compose, decompose_marking, parse_chan, refine_in_composition, Agent};
use wfcompose::gwf::{check_soundness, GwfNet};
use wfcompose::morphism::{check_alpha, parse_amap};
use wfcompose::net::{explore, parse_pnet, print_pnet, DEFAULT_STATE_CAP};

fn net(text: &str) -> GwfNet {
    GwfNet::from_document(&parse_pnet(text).unwrap()).unwrap()
}

fn main() {
    let n1 = net(include_str!("../corpus/handshake/n1.pnet"));
    let n2 = net(include_str!("../corpus/handshake/n2.pnet"));
    let spec = parse_chan(include_str!("../corpus/handshake/spec.chan")).unwrap();
    let protocol = channel_compose(&n1, &n2, &spec).unwrap();
    print!("{}", print_pnet(&protocol.to_document()));
    println!("protocol sound: {}", check_soundness(&protocol.result, DEFAULT_STATE_CAP).sound);

    let rg = explore(protocol.net(), protocol.result.initial(), DEFAULT_STATE_CAP).unwrap();
    for m in rg.markings(protocol.net()) {
        println!("  {}", decompose_marking(&protocol, &m).unwrap());
    }

    let refinements = [
        (Agent::One, include_str!("../corpus/handshake/n1_refined.pnet"), include_str!("../corpus/handshake/n1_refined.amap"), &n1),
        (Agent::Two, include_str!("../corpus/handshake/n2_refined.pnet"), include_str!("../corpus/handshake/n2_refined.amap"), &n2),
    ];
    let mut current = protocol;
    for (side, text, amap, target) in refinements {
        let source = net(text);
        let map = parse_amap(amap).unwrap().map;
        let phi = check_alpha(source.net(), source.initial(), target.net(), target.initial(), &map).unwrap();
        let (next, induced) = refine_in_composition(&current, side, &phi).unwrap();
        let report = check_soundness(&next.result, DEFAULT_STATE_CAP);
        println!(
            "refined {side:?}: induced morphism certified {}, sound {}, {} states",
            induced.is_certified(),
            report.sound,
            report.states
        );
        current = next;
    }
}
