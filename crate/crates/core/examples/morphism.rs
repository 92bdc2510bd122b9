//! Certifies a refinement, breaks it, and inspects what the certified map
//! preserves: trace images, the local nets of a refined place, and the
//! unfolding check on them.

use std::collections::BTreeMap;

use wfcompose::morphism::{build_local_nets, check_alpha, lemma1_check, quotient_candidate, simulate_preservation, Block};
use wfcompose::net::{parse_pnet, print_pnet, NetDocument};

fn main() {
    let abs = parse_pnet(include_str!("../corpus/refinement/abstract.pnet")).unwrap();
    let refined = parse_pnet(include_str!("../corpus/refinement/refined.pnet")).unwrap();

    // let the grouping produce the abstraction and its map
    let q = quotient_candidate(&refined.net, &refined.initial, &[
        Block::new("s", ["s"]),
        Block::new("t1", ["t1"]),
        Block::new("p", ["a", "x", "y", "b"]),
        Block::new("t2", ["t2"]),
        Block::new("f", ["f"]),
    ]).unwrap();
    assert!(q.net.same_structure(&abs.net));
    let phi = check_alpha(&refined.net, &refined.initial, &abs.net, &abs.initial, &q.map).unwrap();
    print!("{}", phi.certificate());
    println!("image of t1 x t2: {:?}", simulate_preservation(&phi, &["t1", "x", "t2"]).unwrap());

    let local = build_local_nets(&phi, "p").unwrap();
    print!("\nS1(p):\n{}", print_pnet(&NetDocument::new(local.restricted.source().clone())));
    println!("unfolded local net still maps onto S2(p): {}", lemma1_check(&phi, "p").unwrap());

    // map x onto t2 instead of collapsing it into p
    let mut broken: BTreeMap<String, String> = q.map.clone();
    broken.insert("x".into(), "t2".into());
    let phi = check_alpha(&refined.net, &refined.initial, &abs.net, &abs.initial, &broken).unwrap();
    print!("\nx mapped to t2\n{}", phi.certificate());
}
