//! Seeded random playout of workflow nets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gwf::{check_soundness, GwfNet};
use crate::log::{EventLog, Trace};
use crate::net::{Marking, DEFAULT_STATE_CAP};

/// Attempts per trace before giving up.
pub const MAX_ATTEMPTS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulateError {
    #[error("the net is not sound ({0}); pass unsound_ok to simulate anyway")]
    NotSound(&'static str),
    #[error("soundness contradiction: dead marking {0} is not the final marking")]
    SoundnessContradiction(Marking),
    #[error("trace {index}: no complete run within {max_steps} steps after {attempts} attempts")]
    GaveUp {
        index: usize,
        max_steps: usize,
        attempts: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlayoutOptions {
    /// Defaults to ten times the number of transitions.
    pub max_steps: Option<usize>,
    /// Skip the soundness check; runs that deadlock are then discarded.
    pub unsound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Playout {
    pub log: EventLog,
    /// Runs dropped for exceeding the step bound.
    pub too_long: usize,
    /// Runs dropped because they fired only silent transitions.
    pub empty: usize,
    /// Runs dropped because they deadlocked (only with `unsound_ok`).
    pub deadlocked: usize,
}

enum Run {
    Done(Trace),
    TooLong,
    Deadlock(Vec<u32>),
}

fn run(g: &GwfNet, rng: &mut ChaCha8Rng, max_steps: usize, fin: &[u32]) -> Run {
    let net = g.net();
    let mut m = g.initial_tokens();
    let mut trace = Trace::new();
    for _ in 0..=max_steps {
        if m == fin {
            return Run::Done(trace);
        }
        let enabled = net.enabled_at(&m);
        let Some(&t) = enabled.choose(rng) else {
            return Run::Deadlock(m);
        };
        if let Some(l) = net.label(t) {
            trace.push(l.to_string());
        }
        m = net.fire_tokens(&m, t);
    }
    Run::TooLong
}

/// Generates `traces` complete runs. Trace `i` draws from its own generator
/// seeded with `seed + i`, so logs are reproducible and prefixes of longer
/// logs.
pub fn playout(g: &GwfNet, traces: usize, seed: u64, opts: PlayoutOptions) -> Result<Playout, SimulateError> {
    if !opts.unsound_ok {
        let report = check_soundness(g, DEFAULT_STATE_CAP);
        if !report.sound {
            return Err(SimulateError::NotSound(report.violated.as_str()));
        }
    }
    let max_steps = opts.max_steps.unwrap_or(10 * g.net().transition_count());
    let fin = g.final_tokens();
    let mut out = Playout {
        log: EventLog::default(),
        too_long: 0,
        empty: 0,
        deadlocked: 0,
    };
    for i in 0..traces {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(SimulateError::GaveUp {
                    index: i,
                    max_steps,
                    attempts: MAX_ATTEMPTS,
                });
            }
            match run(g, &mut rng, max_steps, &fin) {
                Run::Done(t) if t.is_empty() => out.empty += 1,
                Run::Done(t) => {
                    out.log.push(t).expect("nonempty trace");
                    break;
                }
                Run::TooLong => out.too_long += 1,
                Run::Deadlock(_) if opts.unsound_ok => out.deadlocked += 1,
                Run::Deadlock(m) => return Err(SimulateError::SoundnessContradiction(g.net().marking(&m))),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::tests::run2;
    use crate::conformance::token_replay_fitness;
    use crate::discover::{tree_to_wfnet, ProcessTree};
    use crate::net::parse_pnet;

    fn gwf(text: &str) -> GwfNet {
        GwfNet::from_document(&parse_pnet(text).unwrap()).unwrap()
    }

    const SEQ2: &str = "place i init\nplace m\nplace o final\ntrans ta label=a\ntrans tb label=b\n\
        arc i ta\narc ta m\narc m tb\narc tb o\n";

    #[test]
    fn deterministic_net() {
        let p = playout(&gwf(SEQ2), 5, 7, PlayoutOptions::default()).unwrap();
        assert_eq!(p.log.to_string(), "[<a,b>^5]");
    }

    #[test]
    fn xor_frequencies_within_three_sigma() {
        let net = tree_to_wfnet(&ProcessTree::Xor(vec![ProcessTree::activity("a"), ProcessTree::activity("b")]));
        let p = playout(&net, 1000, 42, PlayoutOptions::default()).unwrap();
        let a = p.log.traces().iter().filter(|t| t[0] == "a").count() as f64;
        // binomial(1000, 1/2): sigma = sqrt(1000 / 4)
        let sigma = (1000.0f64 * 0.25).sqrt();
        assert!((a - 500.0).abs() <= 3.0 * sigma, "{a}");
        assert!(a < 1000.0 && a > 0.0);
    }

    #[test]
    fn run2_respects_channel_order() {
        let c = run2();
        let p = playout(&c.result, 200, 1, PlayoutOptions::default()).unwrap();
        for t in p.log.traces() {
            let b = t.iter().position(|x| x == "b").unwrap();
            let cc = t.iter().position(|x| x == "c").unwrap();
            assert!(b < cc, "{t:?}");
        }
        let (f, _) = token_replay_fitness(&c.result, &p.log).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn reproducible() {
        let net = tree_to_wfnet(&ProcessTree::Loop(vec![ProcessTree::activity("a"), ProcessTree::activity("b")]));
        let a = playout(&net, 50, 9, PlayoutOptions::default()).unwrap();
        let b = playout(&net, 50, 9, PlayoutOptions::default()).unwrap();
        assert_eq!(a.log.traces(), b.log.traces());
        let c = playout(&net, 60, 9, PlayoutOptions::default()).unwrap();
        assert_eq!(&c.log.traces()[..50], a.log.traces());
    }

    #[test]
    fn unsound_nets() {
        // choosing y strands the token on b
        let text = "place i init\nplace a\nplace b\nplace c\nplace d\nplace o final\n\
            trans s label=s\ntrans x label=x\ntrans y label=y\ntrans j label=j\ntrans k label=k\n\
            arc i s\narc s a\narc s b\narc a x\narc x c\narc a y\narc y d\narc c j\narc b j\narc j o\narc d k\narc k o\n";
        let g = gwf(text);
        assert!(matches!(playout(&g, 5, 0, PlayoutOptions::default()), Err(SimulateError::NotSound(_))));
        let opts = PlayoutOptions {
            max_steps: None,
            unsound_ok: true,
        };
        let p = playout(&g, 20, 0, opts).unwrap();
        assert!(p.log.traces().iter().all(|t| t == &["s", "x", "j"]));
        assert!(p.deadlocked > 0);
    }
}
