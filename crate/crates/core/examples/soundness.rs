//! Soundness checking: a sound sequence, and a net that deadlocks after a
//! wrong choice, with the witness run.

use wfcompose::gwf::{check_soundness, GwfNet};
use wfcompose::net::{parse_pnet, DEFAULT_STATE_CAP};

const DEADLOCK: &str = "\
place i init
place a
place b
place c
place d
place o final
trans split
trans x
trans y
trans join
trans alone
arc i split
arc split a
arc split b
arc a x
arc x c
arc a y
arc y d
arc c join
arc b join
arc join o
arc d alone
arc alone o
";

fn main() {
    let seq = parse_pnet(include_str!("../corpus/seq2.pnet")).unwrap();
    let g = GwfNet::from_document(&seq).unwrap();
    print!("seq2\n{}", check_soundness(&g, DEFAULT_STATE_CAP));

    let g = GwfNet::from_document(&parse_pnet(DEADLOCK).unwrap()).unwrap();
    // choosing y completes with the token on b still in place
    print!("\ndeadlock\n{}", check_soundness(&g, DEFAULT_STATE_CAP));
}
