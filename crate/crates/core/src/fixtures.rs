//! Built-in covering generators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clopen::ClopenSet;
use crate::covering::{Covering, OrbitAnnotation, RawLevel, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::graph::LevelGraph;

/// A named rule producing every level of a covering on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    /// Level n is a single p^n-cycle; cell i maps to i mod p^(n-1).
    Odometer { p: u32 },
    /// Full shift on `alphabet` symbols: words of length n, prefix bonds.
    FullShift { alphabet: u32 },
    /// Attracting fixed point p fed by a chain, beside a dyadic odometer.
    AttractingFix,
    /// `AttractingFix` plus an attracting period-2 orbit fed by two chains.
    AttractingTwoOrbit,
    /// Two period-4 cycles collapsed into one at level 1.
    MergedOrbits,
    /// Higher block presentation of the vertex shift of a graph.
    HigherBlock { graph: LevelGraph },
}

pub const GENERATOR_NAMES: [&str; 6] = [
    "odometer",
    "full-shift",
    "attracting-fix",
    "attracting-two-orbit",
    "merged-orbits",
    "higher-block",
];

fn pad(i: u64, width: usize) -> String {
    format!("{i:0width$}")
}

fn digits(mut x: u64) -> usize {
    let mut d = 1;
    while x >= 10 {
        x /= 10;
        d += 1;
    }
    d
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Odometer { .. } => "odometer",
            Generator::FullShift { .. } => "full-shift",
            Generator::AttractingFix => "attracting-fix",
            Generator::AttractingTwoOrbit => "attracting-two-orbit",
            Generator::MergedOrbits => "merged-orbits",
            Generator::HigherBlock { .. } => "higher-block",
        }
    }

    pub fn params(&self) -> serde_json::Value {
        match self {
            Generator::Odometer { p } => serde_json::json!({ "p": p }),
            Generator::FullShift { alphabet } => serde_json::json!({ "alphabet": alphabet }),
            Generator::HigherBlock { graph } => {
                let edges: Vec<[&str; 2]> = graph.edges().map(|(a, b)| [graph.name(a), graph.name(b)]).collect();
                serde_json::json!({ "vertices": graph.names(), "edges": edges })
            }
            _ => serde_json::json!({}),
        }
    }

    pub fn from_spec(name: &str, params: &serde_json::Value) -> Result<Self> {
        let int = |key: &str, default: u64| -> Result<u64> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => v
                    .as_u64()
                    .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
                    .ok_or_else(|| Error::input(format!("parameter `{key}` must be a positive integer"))),
            }
        };
        let g = match name {
            "odometer" => {
                let p = int("p", 2)?;
                if !(2..=16).contains(&p) {
                    return Err(Error::input("odometer needs 2 <= p <= 16"));
                }
                Generator::Odometer { p: p as u32 }
            }
            "full-shift" => {
                let a = int("alphabet", 2)?;
                if !(2..=10).contains(&a) {
                    return Err(Error::input("full-shift needs 2 <= alphabet <= 10"));
                }
                Generator::FullShift { alphabet: a as u32 }
            }
            "attracting-fix" => Generator::AttractingFix,
            "attracting-two-orbit" => Generator::AttractingTwoOrbit,
            "merged-orbits" => Generator::MergedOrbits,
            "higher-block" => {
                let vertices: Vec<String> = serde_json::from_value(params.get("vertices").cloned().unwrap_or_default())
                    .map_err(|e| Error::input(format!("higher-block vertices: {e}")))?;
                let edges: Vec<(String, String)> =
                    serde_json::from_value(params.get("edges").cloned().unwrap_or_default())
                        .map_err(|e| Error::input(format!("higher-block edges: {e}")))?;
                let graph = LevelGraph::from_named(vertices, &edges)?;
                if graph.is_empty() || !graph.is_forward_complete() {
                    return Err(Error::input("higher-block graph must be nonempty and forward-complete"));
                }
                Generator::HigherBlock { graph }
            }
            other => return Err(Error::UnknownGenerator(other.to_string())),
        };
        Ok(g)
    }

    pub fn raw_level(&self, depth: usize) -> Result<RawLevel> {
        if depth == 0 {
            return Err(Error::precondition("depths start at 1"));
        }
        match self {
            Generator::Odometer { p } => Ok(odometer_level(*p as u64, depth, "")),
            Generator::FullShift { alphabet } => Ok(full_shift_level(*alphabet as u64, depth)),
            Generator::AttractingFix => Ok(attracting_level(depth, false)),
            Generator::AttractingTwoOrbit => Ok(attracting_level(depth, true)),
            Generator::MergedOrbits => Ok(merged_level(depth)),
            Generator::HigherBlock { graph } => Ok(higher_block_level(graph, depth)),
        }
    }

    /// Orbits declared by the fixture.
    fn orbits(&self, c: &Covering) -> Result<Vec<OrbitAnnotation>> {
        let names = |xs: &[&str]| -> Vec<String> { xs.iter().map(|s| s.to_string()).collect() };
        let mut out = Vec::new();
        if matches!(self, Generator::AttractingFix | Generator::AttractingTwoOrbit) {
            let g = c.level(1)?;
            out.push(OrbitAnnotation {
                period: 1,
                level: 1,
                circuit: vec![g.index_of("p").expect("fixture cell")],
                basin: ClopenSet::from_names(c, 1, &names(&["p", "b01"]))?,
            });
        }
        if matches!(self, Generator::AttractingTwoOrbit) {
            let g = c.level(1)?;
            out.push(OrbitAnnotation {
                period: 2,
                level: 1,
                circuit: vec![
                    g.index_of("q0").expect("fixture cell"),
                    g.index_of("q1").expect("fixture cell"),
                ],
                basin: ClopenSet::from_names(c, 1, &names(&["q0", "q1", "c0_01", "c1_01"]))?,
            });
        }
        Ok(out)
    }
}

fn odometer_level(p: u64, depth: usize, prefix: &str) -> RawLevel {
    let size = p.pow(depth as u32);
    let w = digits(size - 1);
    let names: Vec<String> = (0..size).map(|i| format!("{prefix}{}", pad(i, w))).collect();
    let edges = (0..size).map(|i| (i as u32, ((i + 1) % size) as u32)).collect();
    let parents = if depth == 1 {
        Vec::new()
    } else {
        let psize = size / p;
        let pw = digits(psize - 1);
        (0..size).map(|i| format!("{prefix}{}", pad(i % psize, pw))).collect()
    };
    RawLevel { names, edges, parents }
}

fn full_shift_level(a: u64, depth: usize) -> RawLevel {
    let size = a.pow(depth as u32);
    let word = |mut i: u64, len: usize| -> String {
        let mut s = vec![b'0'; len];
        for k in (0..len).rev() {
            s[k] = b'0' + (i % a) as u8;
            i /= a;
        }
        String::from_utf8(s).expect("ascii")
    };
    let names: Vec<String> = (0..size).map(|i| word(i, depth)).collect();
    let mut edges = Vec::new();
    for i in 0..size {
        for x in 0..a {
            edges.push((i as u32, ((i * a) % size + x) as u32));
        }
    }
    let parents = if depth == 1 {
        Vec::new()
    } else {
        (0..size).map(|i| word(i / a, depth - 1)).collect()
    };
    RawLevel { names, edges, parents }
}

/// Chain b_1..b_d into the fixed point p, an odometer, and optionally the
/// period-2 component q_0 <-> q_1 fed by chains c^e_j.
fn attracting_level(depth: usize, two: bool) -> RawLevel {
    let mut lv = odometer_level(2, depth, "o");
    let push = |name: String, parent: Option<String>, lv: &mut RawLevel| -> u32 {
        lv.names.push(name);
        if let Some(p) = parent {
            lv.parents.push(p);
        }
        (lv.names.len() - 1) as u32
    };
    let up = |name: &str| (depth > 1).then(|| name.to_string());
    let bname = |j: usize| format!("b{j:02}");
    let p = push("p".into(), up("p"), &mut lv);
    lv.edges.push((p, p));
    let mut prev = p;
    for j in 1..=depth {
        let parent = if j == 1 { "p".to_string() } else { bname(j - 1) };
        let b = push(bname(j), up(&parent), &mut lv);
        lv.edges.push((b, prev));
        prev = b;
    }
    if two {
        let q = [
            push("q0".into(), up("q0"), &mut lv),
            push("q1".into(), up("q1"), &mut lv),
        ];
        lv.edges.push((q[0], q[1]));
        lv.edges.push((q[1], q[0]));
        let cname = |e: usize, j: usize| format!("c{e}_{j:02}");
        let mut cid: Vec<[u32; 2]> = Vec::new();
        for j in 1..=depth {
            let mut row = [0u32; 2];
            for (e, slot) in row.iter_mut().enumerate() {
                let parent = if j == 1 { format!("q{e}") } else { cname(e, j - 1) };
                *slot = push(cname(e, j), up(&parent), &mut lv);
            }
            cid.push(row);
        }
        for j in 1..=depth {
            for e in 0..2 {
                let target = if j == 1 { q[1 - e] } else { cid[j - 2][1 - e] };
                lv.edges.push((cid[j - 1][e], target));
            }
        }
    }
    lv
}

fn merged_level(depth: usize) -> RawLevel {
    let cycle = |prefix: &str, lv: &mut RawLevel, parent: Option<&str>| {
        let base = lv.names.len() as u32;
        for i in 0..4u32 {
            lv.names.push(format!("{prefix}{i}"));
            if let Some(pp) = parent {
                lv.parents.push(format!("{pp}{i}"));
            }
            lv.edges.push((base + i, base + (i + 1) % 4));
        }
    };
    let mut lv = RawLevel {
        names: Vec::new(),
        edges: Vec::new(),
        parents: Vec::new(),
    };
    match depth {
        1 => cycle("a", &mut lv, None),
        2 => {
            cycle("x", &mut lv, Some("a"));
            cycle("y", &mut lv, Some("a"));
        }
        _ => {
            cycle("x", &mut lv, Some("x"));
            cycle("y", &mut lv, Some("y"));
        }
    }
    lv
}

fn higher_block_level(graph: &LevelGraph, depth: usize) -> RawLevel {
    let mut paths: Vec<Vec<u32>> = (0..graph.len() as u32).map(|v| vec![v]).collect();
    for _ in 1..depth {
        let mut next = Vec::new();
        for p in &paths {
            for &w in graph.succ(*p.last().expect("nonempty path")) {
                let mut q = p.clone();
                q.push(w);
                next.push(q);
            }
        }
        paths = next;
    }
    let join = |p: &[u32]| p.iter().map(|&v| graph.name(v)).collect::<Vec<_>>().join(".");
    let index: std::collections::HashMap<&[u32], u32> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i as u32))
        .collect();
    let mut edges = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        for &w in graph.succ(*p.last().expect("nonempty path")) {
            let mut q = p[1..].to_vec();
            q.push(w);
            edges.push((i as u32, index[q.as_slice()]));
        }
    }
    let parents = if depth == 1 {
        Vec::new()
    } else {
        paths.iter().map(|p| join(&p[..depth - 1])).collect()
    };
    let names = paths.iter().map(|p| join(p)).collect();
    RawLevel { names, edges, parents }
}

/// Builds the named fixture with its declared orbits.
pub fn generate(name: &str, params: &serde_json::Value, budget: usize) -> Result<Covering> {
    if name == "random" {
        let int = |k: &str, d: u64| params.get(k).and_then(|v| v.as_u64()).unwrap_or(d);
        return random_covering(
            int("seed", 0),
            int("levels", 4) as usize,
            int("max-vertices", 50) as usize,
        );
    }
    let g = Generator::from_spec(name, params)?;
    from_generator(g, budget)
}

pub fn from_generator(g: Generator, budget: usize) -> Result<Covering> {
    let c = Covering::from_generator(g.clone(), budget)?;
    let orbits = g.orbits(&c)?;
    Ok(c.with_orbits(orbits))
}

pub fn odometer(p: u32) -> Covering {
    from_generator(Generator::Odometer { p }, DEFAULT_BUDGET).expect("odometer fixture")
}

pub fn full_shift() -> Covering {
    from_generator(Generator::FullShift { alphabet: 2 }, DEFAULT_BUDGET).expect("shift fixture")
}

pub fn attracting_fix() -> Covering {
    from_generator(Generator::AttractingFix, DEFAULT_BUDGET).expect("attracting fixture")
}

pub fn attracting_two_orbit() -> Covering {
    from_generator(Generator::AttractingTwoOrbit, DEFAULT_BUDGET).expect("attracting fixture")
}

pub fn merged_orbits() -> Covering {
    from_generator(Generator::MergedOrbits, DEFAULT_BUDGET).expect("merged fixture")
}

pub fn higher_block(graph: LevelGraph) -> Result<Covering> {
    if graph.is_empty() || !graph.is_forward_complete() {
        return Err(Error::input("higher-block graph must be nonempty and forward-complete"));
    }
    from_generator(Generator::HigherBlock { graph }, DEFAULT_BUDGET)
}

/// A random valid covering, grown top-down so every axiom holds by
/// construction: each child picks a successor of its parent as target and
/// sends all its edges to children of that target.
pub fn random_covering(seed: u64, levels: usize, max_vertices: usize) -> Result<Covering> {
    if levels == 0 || max_vertices < 2 {
        return Err(Error::input("random covering needs levels >= 1 and max-vertices >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = rng.gen_range(2..=max_vertices.min(6));
    let mut succ: Vec<Vec<u32>> = (0..n1)
        .map(|_| {
            let k = rng.gen_range(1..=2.min(n1));
            let mut s: Vec<u32> = (0..k).map(|_| rng.gen_range(0..n1) as u32).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let mut graphs = vec![succ.clone()];
    let mut bonds: Vec<Vec<u32>> = Vec::new();
    for _ in 1..levels {
        let np = succ.len();
        let mut parent = Vec::new();
        let budget = max_vertices.saturating_sub(np);
        for p in 0..np {
            parent.push(p as u32);
        }
        let extra = rng.gen_range(0..=budget.min(np * 2));
        for _ in 0..extra {
            parent.push(rng.gen_range(0..np) as u32);
        }
        let n = parent.len();
        let mut kids: Vec<Vec<u32>> = vec![Vec::new(); np];
        for (ch, &p) in parent.iter().enumerate() {
            kids[p as usize].push(ch as u32);
        }
        let mut next = Vec::with_capacity(n);
        for &p in &parent {
            let ps = &succ[p as usize];
            let t = ps[rng.gen_range(0..ps.len())];
            let pool = &kids[t as usize];
            let k = rng.gen_range(1..=pool.len().min(3));
            let mut s: Vec<u32> = (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            s.sort_unstable();
            s.dedup();
            next.push(s);
        }
        bonds.push(parent);
        graphs.push(next.clone());
        succ = next;
    }
    let mut levels_out = Vec::new();
    let mut perms: Vec<Vec<u32>> = Vec::new();
    for (d, s) in graphs.iter().enumerate() {
        // shuffle names so index order is unrelated to generation order
        let mut labels: Vec<u32> = (0..s.len() as u32).collect();
        for i in (1..labels.len()).rev() {
            let j = rng.gen_range(0..=i);
            labels.swap(i, j);
        }
        let names: Vec<String> = labels.iter().map(|l| format!("v{}_{l:02}", d + 1)).collect();
        let edges: Vec<(u32, u32)> = s
            .iter()
            .enumerate()
            .flat_map(|(a, t)| t.iter().map(move |&b| (a as u32, b)))
            .collect();
        let (g, perm) = LevelGraph::from_raw(names, &edges)?;
        levels_out.push(g);
        perms.push(perm);
    }
    let mut bonds_out = Vec::new();
    for (i, b) in bonds.iter().enumerate() {
        let mut out = vec![0u32; b.len()];
        for (ch, &p) in b.iter().enumerate() {
            out[perms[i + 1][ch] as usize] = perms[i][p as usize];
        }
        bonds_out.push(out);
    }
    Covering::new(levels_out, bonds_out)
}

/// Parameters of the built-in generators, for help output.
pub fn generator_help() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("odometer", "p=2..16"),
        ("full-shift", "alphabet=2..10"),
        ("attracting-fix", ""),
        ("attracting-two-orbit", ""),
        ("merged-orbits", ""),
        ("higher-block", "vertices, edges (JSON params)"),
        ("random", "seed, levels, max-vertices (materialized, no generator)"),
    ])
}
