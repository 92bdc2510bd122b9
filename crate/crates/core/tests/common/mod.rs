//! Shared fixtures for the integration suites: corpus loaders, the corpus of
//! compositions and morphisms, a random workflow-net generator, and
//! independent reference implementations used as oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use rand::Rng;
use wfcompose::compose::{channel_compose, parse_chan, refine_in_composition, Agent, ChannelSpec, ComposedNet};
use wfcompose::gwf::{recognize_gwf, GwfNet};
use wfcompose::morphism::{check_alpha, parse_amap, AlphaMorphism};
use wfcompose::net::{parse_pnet, Marking, PetriNet};

pub fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(corpus(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn gwf(rel: &str) -> GwfNet {
    GwfNet::from_document(&parse_pnet(&read(rel)).unwrap()).unwrap()
}

pub fn chan(rel: &str) -> ChannelSpec {
    parse_chan(&read(rel)).unwrap()
}

/// Loads `<dir>/<name>.amap` and checks it against the nets it names.
pub fn morphism(dir: &str, name: &str) -> AlphaMorphism {
    let doc = parse_amap(&read(&format!("{dir}/{name}.amap"))).unwrap();
    let src = gwf(&format!("{dir}/{}", doc.source));
    let dst = gwf(&format!("{dir}/{}", doc.target));
    check_alpha(src.net(), src.initial(), dst.net(), dst.initial(), &doc.map).unwrap()
}

pub fn compose_dir(dir: &str, n1: &str, n2: &str) -> ComposedNet {
    channel_compose(
        &gwf(&format!("{dir}/{n1}.pnet")),
        &gwf(&format!("{dir}/{n2}.pnet")),
        &chan(&format!("{dir}/spec.chan")),
    )
    .unwrap()
}

pub fn refine(c: &ComposedNet, side: Agent, phi: &AlphaMorphism) -> (ComposedNet, AlphaMorphism) {
    refine_in_composition(c, side, phi).unwrap()
}

/// Every composed system of the corpus, named.
pub fn compositions() -> Vec<(String, ComposedNet)> {
    let run2 = compose_dir("run2", "a1", "a2");
    let run2_protocol = compose_dir("run2", "protocol1", "protocol2");
    let hs = compose_dir("handshake", "n1", "n2");
    let (hs1, _) = refine(&hs, Agent::One, &morphism("handshake", "n1_refined"));
    let (hs2, _) = refine(&hs, Agent::Two, &morphism("handshake", "n2_refined"));
    let (hs12, _) = refine(&hs1, Agent::Two, &morphism("handshake", "n2_refined"));
    let order = compose_dir("order", "customer", "shop");
    let order_protocol = compose_dir("order", "protocol1", "protocol2");
    let (order_half, _) = refine(&order_protocol, Agent::One, &morphism("order", "customer"));
    let run2_refined = refine(&run2_protocol, Agent::One, &morphism("run2", "a1")).0;
    vec![
        ("run2".into(), run2),
        ("run2-protocol".into(), run2_protocol),
        ("run2-refined".into(), run2_refined),
        ("handshake".into(), hs),
        ("handshake-n1'".into(), hs1),
        ("handshake-n2'".into(), hs2),
        ("handshake-n1'n2'".into(), hs12),
        ("order".into(), order),
        ("order-protocol".into(), order_protocol),
        ("order-customer-refined".into(), order_half),
        ("choice".into(), compose_dir("choice", "a1", "a2")),
        ("pingpong".into(), compose_dir("pingpong", "a1", "a2")),
    ]
}

/// Certified morphisms of the corpus, named. Includes the morphisms induced
/// on compositions by refinement.
pub fn certified_morphisms() -> Vec<(String, AlphaMorphism)> {
    let mut out: Vec<(String, AlphaMorphism)> = [
        ("refinement", "refined"),
        ("handshake", "n1_refined"),
        ("handshake", "n2_refined"),
        ("morphisms", "seq"),
        ("morphisms", "loop"),
        ("morphisms", "concurrent"),
        ("morphisms", "split"),
        ("order", "customer"),
        ("order", "shop"),
        ("run2", "a1"),
    ]
    .into_iter()
    .map(|(d, n)| (format!("{d}/{n}"), morphism(d, n)))
    .collect();

    for (name, rel) in [("identity seq2", "seq2.pnet"), ("identity pingpong/a1", "pingpong/a1.pnet")] {
        let g = gwf(rel);
        let id = g.net().node_ids().map(|x| (x.to_string(), x.to_string())).collect();
        out.push((name.into(), check_alpha(g.net(), g.initial(), g.net(), g.initial(), &id).unwrap()));
    }

    let hs = compose_dir("handshake", "n1", "n2");
    out.push(("induced handshake-n1'".into(), refine(&hs, Agent::One, &morphism("handshake", "n1_refined")).1));
    out.push(("induced handshake-n2'".into(), refine(&hs, Agent::Two, &morphism("handshake", "n2_refined")).1));
    let run2 = compose_dir("run2", "protocol1", "protocol2");
    out.push(("induced run2".into(), refine(&run2, Agent::One, &morphism("run2", "a1")).1));
    out
}

/// A source/target pair with a map that need not be certified.
#[derive(Debug, Clone)]
pub struct MapCase {
    pub name: String,
    pub n1: PetriNet,
    pub m1: Marking,
    pub n2: PetriNet,
    pub m2: Marking,
    pub map: BTreeMap<String, String>,
}

impl MapCase {
    pub fn of(name: &str, phi: &AlphaMorphism) -> Self {
        MapCase {
            name: name.into(),
            n1: phi.source().clone(),
            m1: phi.source_initial().clone(),
            n2: phi.target().clone(),
            m2: phi.target_initial().clone(),
            map: phi.map().clone(),
        }
    }
}

/// Single-node reassignments of certified maps that keep the map total and
/// surjective, at most `per_map` for each, plus the structural mutant from
/// the corpus.
pub fn mutants(per_map: usize) -> Vec<MapCase> {
    let mut out = Vec::new();
    for (name, phi) in certified_morphisms() {
        let base = MapCase::of(&name, &phi);
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for v in base.map.values() {
            *count.entry(v).or_default() += 1;
        }
        let targets: Vec<&str> = base.n2.node_ids().collect();
        let mut made = 0;
        for (i, (k, v)) in base.map.iter().enumerate() {
            if count[v.as_str()] < 2 || made >= per_map {
                continue;
            }
            // one reassignment per source node, rotating through the targets
            let t = (0..targets.len())
                .map(|j| targets[(3 * i + 1 + j) % targets.len()])
                .find(|t| t != v)
                .unwrap();
            let mut m = base.clone();
            m.name = format!("{name} [{k} -> {t}]");
            m.map.insert(k.clone(), t.to_string());
            out.push(m);
            made += 1;
        }
    }
    let esc = parse_amap(&read("refinement/escaping.amap")).unwrap();
    let (src, dst) = (gwf("refinement/escaping.pnet"), gwf("refinement/abstract.pnet"));
    out.push(MapCase {
        name: "refinement/escaping".into(),
        n1: src.net().clone(),
        m1: src.initial().clone(),
        n2: dst.net().clone(),
        m2: dst.initial().clone(),
        map: esc.map,
    });
    out
}

/// Random generalized workflow net with at most `max_places` places whose
/// node ids start with `prefix`. Grows `s -> t0 -> f` by inserting places
/// between transitions, transitions between places, and extra arcs, then
/// keeps the first result that is a GWF net.
pub fn random_gwf(rng: &mut impl Rng, max_places: usize, prefix: &str) -> GwfNet {
    loop {
        let mut places = vec![format!("{prefix}s"), format!("{prefix}f")];
        let mut trans = vec![format!("{prefix}t0")];
        let mut arcs: BTreeSet<(String, String)> = BTreeSet::new();
        arcs.insert((places[0].clone(), trans[0].clone()));
        arcs.insert((trans[0].clone(), places[1].clone()));
        for _ in 0..rng.gen_range(0..12) {
            match rng.gen_range(0..5) {
                0 | 1 if places.len() < max_places => {
                    let p = format!("{prefix}p{}", places.len());
                    let a = trans[rng.gen_range(0..trans.len())].clone();
                    let b = trans[rng.gen_range(0..trans.len())].clone();
                    arcs.insert((a, p.clone()));
                    arcs.insert((p.clone(), b));
                    places.push(p);
                }
                2 => {
                    let t = format!("{prefix}t{}", trans.len());
                    let a = places[rng.gen_range(0..places.len())].clone();
                    let b = places[rng.gen_range(0..places.len())].clone();
                    arcs.insert((a, t.clone()));
                    arcs.insert((t.clone(), b));
                    trans.push(t);
                }
                3 => {
                    let t = trans[rng.gen_range(0..trans.len())].clone();
                    let p = places[rng.gen_range(0..places.len())].clone();
                    arcs.insert((t, p));
                }
                _ => {
                    let p = places[rng.gen_range(0..places.len())].clone();
                    let t = trans[rng.gen_range(0..trans.len())].clone();
                    arcs.insert((p, t));
                }
            }
        }
        let mut b = PetriNet::builder();
        for p in &places {
            b.place(p.clone());
        }
        for t in &trans {
            b.labeled(t.clone(), t.clone());
        }
        for (x, y) in &arcs {
            b.arc(x.clone(), y.clone());
        }
        if let Ok(g) = recognize_gwf(b.build().unwrap(), None, None) {
            return g;
        }
    }
}

/// A random valid channel specification between two nets with disjoint
/// transition ids: one to three channels, each with a non-empty sender set
/// in one net and a non-empty receiver set in the other.
pub fn random_spec(rng: &mut impl Rng, n1: &PetriNet, n2: &PetriNet) -> ChannelSpec {
    let mut spec = ChannelSpec::new();
    let pick = |rng: &mut dyn rand::RngCore, net: &PetriNet| -> Vec<String> {
        let ts = net.transitions();
        let mut chosen: BTreeSet<String> = BTreeSet::new();
        chosen.insert(ts[rng.gen_range(0..ts.len())].clone());
        for t in ts {
            if rng.gen_bool(0.2) {
                chosen.insert(t.clone());
            }
        }
        chosen.into_iter().collect()
    };
    for i in 0..rng.gen_range(1..=3) {
        let c = format!("c{i}");
        spec.channel(c.clone());
        let (from, to) = if rng.gen_bool(0.5) { (n1, n2) } else { (n2, n1) };
        for t in pick(rng, from) {
            spec.send(t, c.clone());
        }
        for t in pick(rng, to) {
            spec.recv(c.clone(), t);
        }
    }
    spec
}

/// Plain adjacency over string ids, built from the arc list alone.
pub struct Adjacency {
    pub pre: HashMap<String, BTreeSet<String>>,
    pub post: HashMap<String, BTreeSet<String>>,
}

impl Adjacency {
    pub fn of(net: &PetriNet) -> Self {
        let mut pre: HashMap<String, BTreeSet<String>> = HashMap::new();
        let mut post: HashMap<String, BTreeSet<String>> = HashMap::new();
        for id in net.node_ids() {
            pre.insert(id.to_string(), BTreeSet::new());
            post.insert(id.to_string(), BTreeSet::new());
        }
        for (a, b) in net.arc_ids() {
            post.get_mut(a).unwrap().insert(b.to_string());
            pre.get_mut(b).unwrap().insert(a.to_string());
        }
        Adjacency { pre, post }
    }

    pub fn pre(&self, x: &str) -> &BTreeSet<String> {
        &self.pre[x]
    }

    pub fn post(&self, x: &str) -> &BTreeSet<String> {
        &self.post[x]
    }
}

/// Structural GWF check: a non-empty set of places without inputs, a
/// non-empty set of places without outputs, and every node both reachable
/// from the former and co-reachable from the latter.
pub fn structural_gwf(net: &PetriNet) -> Result<(), String> {
    let adj = Adjacency::of(net);
    let sources: Vec<&String> = net.places().iter().filter(|p| adj.pre(p).is_empty()).collect();
    let sinks: Vec<&String> = net.places().iter().filter(|p| adj.post(p).is_empty()).collect();
    if sources.is_empty() || sinks.is_empty() {
        return Err("no source or no sink place".into());
    }
    let closure = |start: &[&String], next: &dyn Fn(&str) -> Vec<String>| {
        let mut seen: HashSet<String> = start.iter().map(|s| s.to_string()).collect();
        let mut stack: Vec<String> = seen.iter().cloned().collect();
        while let Some(x) = stack.pop() {
            for y in next(&x) {
                if seen.insert(y.clone()) {
                    stack.push(y);
                }
            }
        }
        seen
    };
    let fwd = closure(&sources, &|x| adj.post(x).iter().cloned().collect());
    let bwd = closure(&sinks, &|x| adj.pre(x).iter().cloned().collect());
    for id in net.node_ids() {
        if !fwd.contains(id) || !bwd.contains(id) {
            return Err(format!("`{id}` is not on a source-to-sink path"));
        }
    }
    Ok(())
}

/// Verdict of the naive soundness checker, named like the library's
/// violation kinds.
pub fn naive_soundness(g: &GwfNet) -> &'static str {
    let net = g.net();
    let n = net.place_count();
    assert!(n <= 16, "naive checker enumerates 2^|P| markings");
    let bit = |id: &str| 1u32 << net.place(id).unwrap();
    let mask = |ids: &BTreeSet<String>| ids.iter().fold(0u32, |m, p| m | bit(p));
    let adj = Adjacency::of(net);
    let pre: Vec<u32> = net.transitions().iter().map(|t| mask(adj.pre(t))).collect();
    let post: Vec<u32> = net.transitions().iter().map(|t| mask(adj.post(t))).collect();
    let m0 = g.initial().places().fold(0u32, |m, p| m | bit(p));
    let mf = g.final_marking().places().fold(0u32, |m, p| m | bit(p));

    // reachable set as a table over every 1-safe marking, grown to a fixpoint
    let size = 1usize << n;
    let mut reach = vec![false; size];
    reach[m0 as usize] = true;
    let mut unsafe_found = false;
    let mut changed = true;
    while changed {
        changed = false;
        for m in 0..size {
            if !reach[m] {
                continue;
            }
            let m = m as u32;
            for t in 0..pre.len() {
                if m & pre[t] != pre[t] {
                    continue;
                }
                let rest = m & !pre[t];
                if rest & post[t] != 0 {
                    unsafe_found = true;
                    continue;
                }
                let next = (rest | post[t]) as usize;
                if !reach[next] {
                    reach[next] = true;
                    changed = true;
                }
            }
        }
    }
    if unsafe_found {
        return "unsafe";
    }
    if (0..size).any(|m| reach[m] && m as u32 & mf == mf && m as u32 != mf) {
        return "proper-completion";
    }
    // markings from which mf is reachable, again by fixpoint
    let mut good = vec![false; size];
    good[mf as usize] = reach[mf as usize];
    let mut changed = true;
    while changed {
        changed = false;
        for m in 0..size {
            if !reach[m] || good[m] {
                continue;
            }
            let mu = m as u32;
            let ok = (0..pre.len())
                .filter(|&t| mu & pre[t] == pre[t])
                .any(|t| good[((mu & !pre[t]) | post[t]) as usize]);
            if ok {
                good[m] = true;
                changed = true;
            }
        }
    }
    if (0..size).any(|m| reach[m] && !good[m]) {
        return "option-to-complete";
    }
    let live = (0..pre.len()).all(|t| (0..size).any(|m| reach[m] && m as u32 & pre[t] == pre[t]));
    if !live {
        return "dead-transition";
    }
    "none"
}

/// Every sequential component of `net` under `m0`, as place bitmasks:
/// place sets holding one initial token whose adjacent transitions each have
/// exactly one input and one output place in the set, and whose generated
/// subnet is connected.
pub fn sequential_components(net: &PetriNet, m0: &Marking) -> Vec<u64> {
    let n = net.place_count();
    assert!(n <= 24, "component enumeration is exponential");
    let adj = Adjacency::of(net);
    let bit = |id: &str| 1u64 << net.place(id).unwrap();
    let pre: Vec<u64> = net.transitions().iter().map(|t| adj.pre(t).iter().fold(0, |m, p| m | bit(p))).collect();
    let post: Vec<u64> = net.transitions().iter().map(|t| adj.post(t).iter().fold(0, |m, p| m | bit(p))).collect();
    let marked = m0.places().fold(0u64, |m, p| m | bit(p));
    let mut out = Vec::new();
    for x in 1u64..(1u64 << n) {
        if (x & marked).count_ones() != 1 {
            continue;
        }
        let mut ok = true;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            parent[i] = r;
            r
        }
        for t in 0..pre.len() {
            let (i, o) = (pre[t] & x, post[t] & x);
            if i == 0 && o == 0 {
                continue;
            }
            if i.count_ones() != 1 || o.count_ones() != 1 {
                ok = false;
                break;
            }
            let (a, b) = (i.trailing_zeros() as usize, o.trailing_zeros() as usize);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        if !ok {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&p| x >> p & 1 == 1).collect();
        let root = find(&mut parent, members[0]);
        if members.iter().all(|&p| find(&mut parent, p) == root) {
            out.push(x);
        }
    }
    out
}

/// The α-morphism conditions evaluated by direct quantifier expansion over
/// string ids. Returns pass/fail per condition name (`1` … `5e`).
pub fn def6_oracle(case: &MapCase, components: &[u64]) -> BTreeMap<&'static str, bool> {
    let (n1, n2, phi) = (&case.n1, &case.n2, &case.map);
    let a1 = Adjacency::of(n1);
    let a2 = Adjacency::of(n2);
    let is_p1 = |x: &str| n1.place(x).is_some();
    let is_p2 = |x: &str| n2.place(x).is_some();
    let img = |xs: &BTreeSet<String>| -> BTreeSet<String> { xs.iter().map(|x| phi[x].clone()).collect() };
    let mut v = BTreeMap::new();

    v.insert(
        "1",
        n1.places().iter().all(|p| is_p2(&phi[p])) && n2.places().iter().all(|p2| n1.places().iter().any(|p| &phi[p] == p2)),
    );
    let marked1: BTreeSet<String> = case.m1.places().map(|p| phi[p].clone()).collect();
    let marked2: BTreeSet<String> = case.m2.places().map(str::to_string).collect();
    v.insert("2", marked1 == marked2);
    v.insert(
        "3",
        n1.transitions().iter().filter(|t| !is_p2(&phi[t.as_str()])).all(|t| {
            let t2 = &phi[t];
            &img(a1.pre(t)) == a2.pre(t2) && &img(a1.post(t)) == a2.post(t2)
        }),
    );
    v.insert(
        "4",
        n1.transitions().iter().filter(|t| is_p2(&phi[t.as_str()])).all(|t| {
            let nb: BTreeSet<String> = a1.pre(t).union(a1.post(t)).cloned().collect();
            img(&nb) == BTreeSet::from([phi[t].clone()])
        }),
    );

    let (mut c5a, mut c5b, mut c5c, mut c5d, mut c5e) = (true, true, true, true, true);
    for p2 in n2.places() {
        let block: BTreeSet<String> = phi.iter().filter(|(_, y)| *y == p2).map(|(x, _)| x.clone()).collect();
        // acyclic: no node reaches itself through a non-empty path inside the block
        for x in &block {
            let mut seen: HashSet<&str> = HashSet::new();
            let mut queue: VecDeque<&str> = a1.post(x).iter().filter(|y| block.contains(*y)).map(String::as_str).collect();
            while let Some(y) = queue.pop_front() {
                if y == x {
                    c5a = false;
                    break;
                }
                if seen.insert(y) {
                    queue.extend(a1.post(y).iter().filter(|z| block.contains(*z)).map(String::as_str));
                }
            }
        }
        let is_in = |x: &str| a1.pre(x).is_empty() || a1.pre(x).iter().any(|y| !block.contains(y));
        let is_out = |x: &str| a1.post(x).is_empty() || a1.post(x).iter().any(|y| !block.contains(y));
        let only = BTreeSet::from([p2.clone()]);
        for p in block.iter().filter(|x| is_p1(x)) {
            if is_in(p) && (!img(a1.pre(p)).is_subset(a2.pre(p2)) || (!a2.pre(p2).is_empty() && a1.pre(p).is_empty())) {
                c5b = false;
            }
            if is_out(p) && &img(a1.post(p)) != a2.post(p2) {
                c5c = false;
            }
            if (!is_in(p) && img(a1.pre(p)) != only) || (!is_out(p) && img(a1.post(p)) != only) {
                c5d = false;
            }
            let required: Vec<usize> = a2
                .pre(p2)
                .union(a2.post(p2))
                .flat_map(|t2| phi.iter().filter(move |(_, y)| *y == t2).map(|(x, _)| x.clone()))
                .filter_map(|x| n1.transition(&x))
                .collect();
            let pb = 1u64 << n1.place(p).unwrap();
            let touches = |x: u64, t: usize| {
                let t_id = n1.transition_id(t);
                a1.pre(t_id).iter().chain(a1.post(t_id)).any(|q| x >> n1.place(q).unwrap() & 1 == 1)
            };
            let exists = components
                .iter()
                .any(|&x| x & pb != 0 && required.iter().all(|&t| touches(x, t)));
            if !exists {
                c5e = false;
            }
        }
    }
    v.insert("5a", c5a);
    v.insert("5b", c5b);
    v.insert("5c", c5c);
    v.insert("5d", c5d);
    v.insert("5e", c5e);
    v
}

/// Markings of `g` reachable by plain breadth-first search over token
/// vectors keyed by place id.
pub fn reachable_markings(g: &GwfNet, limit: usize) -> Vec<Marking> {
    let net = g.net();
    let adj = Adjacency::of(net);
    let mut seen: BTreeSet<BTreeMap<String, u32>> = BTreeSet::new();
    let start: BTreeMap<String, u32> = g.initial().iter().map(|(p, n)| (p.to_string(), n)).collect();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some(m) = queue.pop_front() {
        for t in net.transitions() {
            if !adj.pre(t).iter().all(|p| m.get(p).copied().unwrap_or(0) > 0) {
                continue;
            }
            let mut next = m.clone();
            for p in adj.pre(t) {
                let e = next.get_mut(p).unwrap();
                *e -= 1;
                if *e == 0 {
                    next.remove(p);
                }
            }
            for p in adj.post(t) {
                *next.entry(p.clone()).or_default() += 1;
            }
            if seen.insert(next.clone()) {
                assert!(seen.len() <= limit, "state space above {limit}");
                queue.push_back(next);
            }
        }
    }
    seen.into_iter()
        .map(|m| {
            let mut out = Marking::new();
            for (p, n) in m {
                out.add(p, n);
            }
            out
        })
        .collect()
}
