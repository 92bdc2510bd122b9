//! Unfolds a small net with a choice and a parallel split, verifies the
//! branching process and prints it with its folding.

use wfcompose::net::parse_pnet;
use wfcompose::unfolding::{print_branching_process, unfold, verify_branching_process, DEFAULT_EVENT_CAP};

const NET: &str = "\
place i init
place a
place b
place c
place o
trans t
trans u
trans v
trans w
arc i t
arc t a
arc t b
arc a u
arc a v
arc u c
arc v c
arc b w
arc c w
arc w o
";

fn main() {
    let doc = parse_pnet(NET).unwrap();
    let bp = unfold(&doc.net, &doc.initial, DEFAULT_EVENT_CAP).unwrap();
    verify_branching_process(&bp, &doc.net, &doc.initial).unwrap();
    println!("{} conditions, {} events, truncated: {}", bp.occ.conditions.len(), bp.occ.events.len(), bp.truncated);
    print!("{}", print_branching_process(&bp));
}
