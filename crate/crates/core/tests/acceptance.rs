//! Acceptance run: prints one pass/fail line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wfcompose::compose::{channel_compose, decompose_marking, Agent, ComposedNet};
use wfcompose::gwf::{check_soundness, recognize_gwf, GwfNet};
use wfcompose::log::{write_csv, AgentPartition, EventLog};
use wfcompose::morphism::{check_alpha, check_reflection, simulate_preservation, AlphaMorphism, Reflection, ReflectionMode};
use wfcompose::net::{print_pnet, Marking, NetDocument, DEFAULT_STATE_CAP};
use wfcompose::pipeline::{run_pipeline, MapSource, PipelineInput, PipelineReport};
use wfcompose::simulate::{playout, PlayoutOptions};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

/// Soundness verdicts against the naive checker on random nets.
fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut safe, mut total, mut mismatches) = (0, 0, Vec::new());
    let mut verdicts: HashMap<&'static str, usize> = HashMap::new();
    while safe < 500 {
        let g = random_gwf(&mut rng, 8, "");
        let expected = naive_soundness(&g);
        let got = check_soundness(&g, DEFAULT_STATE_CAP).violated.as_str();
        total += 1;
        if expected != "unsafe" {
            safe += 1;
        }
        *verdicts.entry(expected).or_default() += 1;
        if expected != got {
            mismatches.push(format!("{expected} vs {got}: {}", print_pnet(&g.to_document())));
        }
    }
    let elapsed = start.elapsed();
    let mut v: Vec<_> = verdicts.into_iter().collect();
    v.sort();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{safe} safe nets ({total} generated), {} mismatches, verdicts {v:?}, {}",
            mismatches.len(),
            secs(elapsed)
        ),
    )
}

/// Channel compositions of random nets are GWF nets.
fn criterion2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    for i in 0..200 {
        let n1 = random_gwf(&mut rng, 6, "x");
        let n2 = random_gwf(&mut rng, 6, "y");
        let spec = random_spec(&mut rng, n1.net(), n2.net());
        match channel_compose(&n1, &n2, &spec) {
            Err(e) => failures.push(format!("pair {i}: {e}")),
            Ok(c) => {
                if let Err(e) = recognize_gwf(c.net().clone(), None, None) {
                    failures.push(format!("pair {i}: recognize_gwf: {e}"));
                }
                if let Err(e) = structural_gwf(c.net()) {
                    failures.push(format!("pair {i}: structural oracle: {e}"));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("200 pairs, {} failures {:?}", failures.len(), failures.first()))
}

/// Reachable markings of compositions split into component-reachable parts.
fn criterion3() -> Outcome {
    let cases = compositions();
    let mut bad = Vec::new();
    let mut states = 0;
    for (name, c) in &cases {
        let r1: BTreeSet<Marking> = reachable_markings(c.component(Agent::One), 100_000).into_iter().collect();
        let r2: BTreeSet<Marking> = reachable_markings(c.component(Agent::Two), 100_000).into_iter().collect();
        let all = reachable_markings(&c.result, 100_000);
        states += all.len();
        for m in &all {
            let parts = decompose_marking(c, m).unwrap();
            if !r1.contains(&parts.agent1) || !r2.contains(&parts.agent2) {
                bad.push(format!("{name}: {parts}"));
            }
        }
    }
    outcome(
        bad.is_empty() && cases.len() >= 10,
        format!("{} compositions, {states} markings, {} counterexamples {:?}", cases.len(), bad.len(), bad.first()),
    )
}

/// check_alpha agrees with the quantifier-expansion oracle per condition.
fn criterion4() -> Outcome {
    let certified: Vec<MapCase> = certified_morphisms().iter().map(|(n, p)| MapCase::of(n, p)).collect();
    let mutated = mutants(4);
    let mut cache: HashMap<String, Vec<u64>> = HashMap::new();
    let mut disagreements = Vec::new();
    let (mut oracle_certified, mut broken) = (0, 0);
    for (i, case) in certified.iter().chain(&mutated).enumerate() {
        let key = print_pnet(&NetDocument::new(case.n1.clone())) + &case.m1.to_string();
        let comps = cache
            .entry(key)
            .or_insert_with(|| sequential_components(&case.n1, &case.m1))
            .clone();
        let expected = def6_oracle(case, &comps);
        let phi = check_alpha(&case.n1, &case.m1, &case.n2, &case.m2, &case.map).unwrap();
        let all = expected.values().all(|&b| b);
        if i < certified.len() {
            oracle_certified += usize::from(all && phi.is_certified());
        } else {
            broken += usize::from(!all);
        }
        for r in phi.certificate().results() {
            if expected[r.condition.as_str()] != r.passed {
                disagreements.push(format!("{} condition {}", case.name, r.condition));
            }
        }
    }
    outcome(
        disagreements.is_empty() && oracle_certified >= 12 && oracle_certified == certified.len() && broken >= 12,
        format!(
            "{oracle_certified}/{} certified, {broken}/{} mutants broken, {} disagreements {:?}",
            certified.len(),
            mutated.len(),
            disagreements.len(),
            disagreements.first()
        ),
    )
}

/// Enumerates every firing sequence of at most `depth` steps, checking each
/// step against the image of the source marking. Returns the number of
/// distinct (marking, remaining depth) pairs visited.
fn check_traces(phi: &AlphaMorphism, depth: usize) -> Result<usize, String> {
    let n1 = phi.source();
    let n2 = phi.target();
    let image = |m: &Marking| -> Marking {
        let places: BTreeSet<&str> = m.places().map(|p| phi.image(p).unwrap()).collect();
        Marking::from_places(places)
    };
    let mut seen = BTreeSet::new();
    let mut stack = vec![(phi.source_initial().clone(), depth, Vec::<String>::new())];
    while let Some((m, left, trace)) = stack.pop() {
        if !seen.insert((m.clone(), left)) {
            continue;
        }
        let enabled = n1.enabled(&m).unwrap();
        if left == 0 || enabled.is_empty() {
            let img = simulate_preservation(phi, &trace).map_err(|e| format!("{trace:?}: {e}"))?;
            n2.fire_sequence(phi.target_initial(), &img).map_err(|e| format!("{img:?}: {e}"))?;
            continue;
        }
        for t in enabled {
            let next = n1.fire(&m, &t).unwrap();
            let t2 = phi.image(&t).unwrap();
            if n2.transition(t2).is_some() {
                let fired = n2.fire(&image(&m), t2).map_err(|e| format!("{t} after {trace:?}: {e}"))?;
                if fired != image(&next) {
                    return Err(format!("{t} after {trace:?}: image {} vs {fired}", image(&next)));
                }
            } else if image(&next) != image(&m) {
                return Err(format!("{t} after {trace:?} changes the image"));
            }
            let mut tr = trace.clone();
            tr.push(t);
            stack.push((next, left - 1, tr));
        }
    }
    Ok(seen.len())
}

/// Preservation, reflection and soundness preservation on certified morphisms.
fn criterion5() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, phi) in certified_morphisms() {
        let src = GwfNet::recognize(phi.source().clone()).unwrap();
        if !check_soundness(&src, DEFAULT_STATE_CAP).sound {
            continue;
        }
        checked += 1;
        if let Err(e) = check_traces(&phi, 20) {
            failures.push(format!("{name} (a): {e}"));
        }
        match check_reflection(&phi, DEFAULT_STATE_CAP, ReflectionMode::Simultaneous).unwrap() {
            Reflection::Holds => {}
            other => failures.push(format!("{name} (b): {other:?}")),
        }
        let dst = GwfNet::recognize(phi.target().clone()).unwrap();
        let report = check_soundness(&dst, DEFAULT_STATE_CAP);
        if !report.sound {
            failures.push(format!("{name} (c): {}", report.violated));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checked} morphisms with sound source, {} failures {failures:?}", failures.len()),
    )
}

fn pipeline(dir: &str, protocol: [&str; 2], log: &EventLog) -> Result<PipelineReport, String> {
    let partition: AgentPartition = read(&format!("{dir}/partition.toml")).parse().unwrap();
    let (p1, p2) = (gwf(&format!("{dir}/{}", protocol[0])), gwf(&format!("{dir}/{}", protocol[1])));
    let spec = chan(&format!("{dir}/spec.chan"));
    run_pipeline(&PipelineInput {
        log,
        partition: &partition,
        protocol: [&p1, &p2],
        spec: &spec,
        maps: [MapSource::LabelRegions, MapSource::LabelRegions],
    })
    .map_err(|e| e.to_string())
}

/// Soundness of refinements in RUN2 and the three-channel handshake.
fn criterion6() -> Outcome {
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    let sound = |c: &ComposedNet| check_soundness(&c.result, DEFAULT_STATE_CAP).sound;

    let hs = compose_dir("handshake", "n1", "n2");
    let (phi1, phi2) = (morphism("handshake", "n1_refined"), morphism("handshake", "n2_refined"));
    let (hs1, _) = refine(&hs, Agent::One, &phi1);
    let (hs2, _) = refine(&hs, Agent::Two, &phi2);
    let (hs12, _) = refine(&hs1, Agent::Two, &phi2);
    let run2p = compose_dir("run2", "protocol1", "protocol2");
    let (run2r, _) = refine(&run2p, Agent::One, &morphism("run2", "a1"));
    for (name, c) in [
        ("handshake", &hs),
        ("handshake N1'", &hs1),
        ("handshake N2'", &hs2),
        ("handshake N1'N2'", &hs12),
        ("run2 protocol", &run2p),
        ("run2 N1'", &run2r),
    ] {
        if !sound(c) {
            failures.push(name.to_string());
        }
    }

    let systems = [
        ("run2", compose_dir("run2", "a1", "a2"), ["protocol1.pnet", "protocol2.pnet"]),
        ("handshake", hs12.clone(), ["n1.pnet", "n2.pnet"]),
    ];
    for (dir, system, protocol) in systems {
        let log = playout(&system.result, 200, 6, PlayoutOptions::default()).unwrap().log;
        let start = Instant::now();
        let report = pipeline(dir, protocol, &log);
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        match report {
            Err(e) => failures.push(format!("{dir} pipeline: {e}")),
            Ok(r) => {
                if !r.soundness.sound || !sound(&r.protocol) {
                    failures.push(format!("{dir} pipeline: composed model not sound"));
                }
                if elapsed >= Duration::from_secs(10) {
                    failures.push(format!("{dir} pipeline took {}", secs(elapsed)));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("6 compositions and 2 pipeline runs, slowest pipeline {}, failures {failures:?}", secs(slowest)),
    )
}

struct Replication {
    log: EventLog,
    report: PipelineReport,
    elapsed: Duration,
}

fn replicate() -> Replication {
    let start = Instant::now();
    let system = compose_dir("order", "customer", "shop");
    let log = playout(&system.result, 1000, 2024, PlayoutOptions::default()).unwrap().log;
    let report = pipeline("order", ["protocol1.pnet", "protocol2.pnet"], &log).unwrap();
    Replication {
        log,
        report,
        elapsed: start.elapsed(),
    }
}

/// Fitness and precision of compositional against direct discovery.
fn criterion7() -> Outcome {
    let r = replicate();
    let (c, d) = (&r.report.composed_quality, &r.report.direct_quality);
    let gap = c.precision - d.precision;
    outcome(
        c.fitness == 1.0 && d.fitness == 1.0 && gap >= 0.10 && r.elapsed < Duration::from_secs(30),
        format!(
            "1000 traces ({} distinct), compositional fitness {:.4} precision {:.4}, direct fitness {:.4} precision {:.4}, gap {gap:.4}, {}",
            r.log.multiset().len(),
            c.fitness,
            c.precision,
            d.fitness,
            d.precision,
            secs(r.elapsed)
        ),
    )
}

/// Two seeded runs give byte-identical artefacts.
fn criterion8() -> Outcome {
    let render = |r: &Replication| {
        [
            write_csv(&r.log),
            print_pnet(&r.report.composed.to_document()),
            print_pnet(&r.report.direct.to_document()),
            r.report.to_string(),
            r.report.composed_quality.to_string(),
            r.report.direct_quality.to_string(),
        ]
    };
    let (a, b) = (render(&replicate()), render(&replicate()));
    let names = ["log", "composed net", "direct net", "report", "composed quality", "direct quality"];
    let differing: Vec<&str> = names.iter().zip(a.iter().zip(&b)).filter(|(_, (x, y))| x != y).map(|(n, _)| *n).collect();
    let bytes: usize = a.iter().map(String::len).sum();
    outcome(differing.is_empty(), format!("{bytes} bytes compared, differing: {differing:?}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("soundness oracle equivalence", criterion1),
        ("channel composition yields GWF nets", criterion2),
        ("composition markings decompose", criterion3),
        ("certificate equivalence", criterion4),
        ("preservation, reflection, soundness", criterion5),
        ("refinement soundness end to end", criterion6),
        ("scaled fitness/precision replication", criterion7),
        ("determinism", criterion8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!o.pass);
        println!("criterion {} ({name}): {}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
