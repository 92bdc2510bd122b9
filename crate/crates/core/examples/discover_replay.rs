//! Discovers a process tree from a small log, replays the log on the
//! resulting net and on a flower model, and compares their quality.

use wfcompose::conformance::quality;
use wfcompose::discover::{discover, tree_to_wfnet, ProcessTree};
use wfcompose::log::EventLog;
use wfcompose::net::print_pnet;

fn main() {
    let log = EventLog::from_strs(&[
        &["register", "check", "pay", "ship"],
        &["register", "pay", "check", "ship"],
        &["register", "check", "pay", "ship"],
        &["register", "reject"],
    ])
    .unwrap();
    println!("log: {log}");

    let (tree, net) = discover(&log);
    println!("tree: {tree}");
    print!("{}", print_pnet(&net.to_document()));
    print!("discovered\n{}", quality(&net, &log).unwrap());

    let flower = ProcessTree::Loop(
        std::iter::once(ProcessTree::Silent)
            .chain(log.alphabet().into_iter().map(ProcessTree::activity))
            .collect(),
    );
    print!("\nflower {flower}\n{}", quality(&tree_to_wfnet(&flower), &log).unwrap());
}
