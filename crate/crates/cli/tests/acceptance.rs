//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerodim::clopen::{preimage, quotient_graph, ClopenSet, Partition};
use zerodim::covering::{validate_covering, Covering};
use zerodim::dynamics::{aperiodicity_certificate, periodic_candidates, supercyclical_structure, Tau};
use zerodim::embed::{assign, IntervalAssignment};
use zerodim::fixtures::*;
use zerodim::graph::LevelGraph;
use zerodim::io::*;
use zerodim::marking::{krieger_marker, Mark, MarkedLevel};
use zerodim::rectify::{build_marked_sequence, non_marker_divergent, rectify_level, MarkedCovering};
use zerodim::verify::{contraction_certificate, geometry_suite, negative_detector, structural_suite};

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn zerodim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerodim"))
        .args(args)
        .output()
        .expect("run zerodim")
}

fn marked(c: &Covering, depth: usize) -> Result<MarkedCovering, String> {
    build_marked_sequence(c, depth).map_err(err)
}

fn embedded(c: &Covering, depth: usize) -> Result<(MarkedCovering, IntervalAssignment), String> {
    let mc = marked(c, depth + 1)?;
    let a = assign(&mc, c, depth).map_err(err)?;
    Ok((mc, a))
}

fn aperiodicity() -> Outcome {
    let r = aperiodicity_certificate(&odometer(2), 8, None).map_err(err)?;
    let want: Vec<usize> = (1..=8).map(|n| 1 << n).collect();
    ensure(r.nu == want, || format!("nu = {:?}", r.nu))?;
    ensure(r.verdict.to_string() == "aperiodic-up-to-depth-8", || {
        format!("verdict {}", r.verdict)
    })?;
    let out = zerodim(&["analyze", "--gen", "odometer", "--depth", "8"]);
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(
        out.status.success() && text.contains("verdict: aperiodic-up-to-depth-8"),
        || format!("analyze printed {text:?}"),
    )?;
    Ok(format!("nu = {:?}", r.nu))
}

/// Orbits of binary sequences with least period at most `k`, each as the
/// set of length-`width` words read from its points.
fn periodic_orbits(k: usize, width: usize) -> BTreeSet<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for p in 1..=k {
        for bits in 0..(1u32 << p) {
            let word: Vec<char> = (0..p).map(|i| if bits >> i & 1 == 1 { '1' } else { '0' }).collect();
            if (1..p).any(|q| p % q == 0 && (0..p).all(|i| word[i] == word[i % q])) {
                continue;
            }
            let orbit = (0..p)
                .map(|s| (0..width).map(|i| word[(s + i) % p]).collect::<String>())
                .collect();
            out.insert(orbit);
        }
    }
    out
}

fn periodic_detection() -> Outcome {
    let c = full_shift();
    let cands = periodic_candidates(&c, 2, 6).map_err(err)?;
    let mut found = BTreeSet::new();
    for p in &cands {
        let cells = p.circuit_at(6).ok_or("candidate does not reach depth 6")?;
        let names: BTreeSet<String> = cells
            .iter()
            .map(|&x| c.cell_name(6, x))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        found.insert(names);
    }
    let brute = periodic_orbits(2, 6);
    ensure(found == brute, || {
        format!("candidates {found:?}, brute force {brute:?}")
    })?;
    let mut periods: Vec<usize> = cands.iter().map(|p| p.period).collect();
    periods.sort();
    ensure(periods == [1, 1, 2], || format!("periods {periods:?}"))?;
    Ok(format!("{} candidates, periods {periods:?}", cands.len()))
}

fn refusal() -> Outcome {
    let r = negative_detector(&full_shift(), 6, 2).map_err(err)?;
    ensure(r.candidates.len() == 3 && r.non_attracting().len() == 3, || {
        format!(
            "{} candidates, {} non-attracting",
            r.candidates.len(),
            r.non_attracting().len()
        )
    })?;
    let out = zerodim(&["pipeline", "--gen", "full-shift", "--depth", "6"]);
    let msg = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(3), || format!("exit {:?}", out.status.code()))?;
    ensure(msg.contains("not purely attracting"), || format!("stderr {msg:?}"))?;
    Ok("3 non-attracting, pipeline exit 3".into())
}

fn partition_sequence() -> Outcome {
    let mut notes = Vec::new();
    for (name, c) in [
        ("attracting-fix", attracting_fix()),
        ("attracting-two-orbit", attracting_two_orbit()),
    ] {
        let mc = marked(&c, 4)?;
        let r = structural_suite(&mc, &c).map_err(err)?;
        let f = r.failures();
        ensure(f.is_empty(), || format!("{name}: {f:?}"))?;
        for check in [
            "S1",
            "S2",
            "S3",
            "S4",
            "tau",
            "well-marked",
            "relative-words",
            "unique-star",
        ] {
            ensure(r.checks.iter().any(|x| x.name == check), || {
                format!("{name}: no {check} check")
            })?;
        }
        let taus: Vec<u64> = mc.levels.iter().map(|l| l.tau().finite().unwrap_or(u64::MAX)).collect();
        ensure(taus.iter().enumerate().all(|(i, &t)| t > i as u64), || {
            format!("{name}: tau {taus:?}")
        })?;
        ensure(taus.windows(2).all(|w| w[0] <= w[1]), || {
            format!("{name}: tau {taus:?}")
        })?;
        notes.push(format!("{name} {} checks", r.checks.len()));
    }
    Ok(notes.join(", "))
}

fn two_branch() -> Result<(Covering, MarkedLevel), String> {
    let vs = ["a1", "a2", "b1", "b2", "s", "t", "x", "y"];
    let es = [
        ("s", "a1"),
        ("s", "b1"),
        ("a1", "a2"),
        ("a2", "x"),
        ("b1", "b2"),
        ("b2", "y"),
        ("x", "s"),
        ("x", "t"),
        ("y", "s"),
        ("y", "t"),
        ("t", "s"),
    ];
    let g = LevelGraph::from_named(
        vs.iter().map(|s| s.to_string()).collect(),
        &es.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect::<Vec<_>>(),
    )
    .map_err(err)?;
    let c = higher_block(g).map_err(err)?;
    let p = Partition::singletons(&c, 1).map_err(err)?;
    let structure = supercyclical_structure(&c, &p, Tau::Finite(1)).map_err(err)?;
    let ids = p.block_ids(&c).map_err(err)?;
    let chi = ids
        .iter()
        .map(|id| match id.as_str() {
            "s" => Mark::Star,
            "a1" | "b1" => Mark::Up,
            _ => Mark::Down,
        })
        .collect();
    Ok((c, MarkedLevel { structure, chi }))
}

fn descent() -> Outcome {
    let (c, level) = two_branch()?;
    let r = rectify_level(&level, &c).map_err(err)?;
    let keys: Vec<(usize, usize)> = r.log.iter().map(|s| (s.delta, s.mu)).collect();
    ensure(keys.first() == Some(&(3, 2)), || format!("initial {:?}", keys.first()))?;
    ensure(keys.windows(2).all(|w| w[1] < w[0]), || {
        format!("not strictly decreasing: {keys:?}")
    })?;
    let left = non_marker_divergent(&r.level);
    ensure(left.is_empty(), || {
        format!("non-star divergent blocks remain: {left:?}")
    })?;
    Ok(format!("{keys:?}"))
}

/// Exact point num/den, compared by cross-multiplication without reduction.
#[derive(Clone, Debug)]
struct Pt {
    num: BigInt,
    den: BigInt,
}

impl PartialEq for Pt {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}

impl Eq for Pt {}

impl PartialOrd for Pt {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Pt {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (&self.num * &o.den).cmp(&(&o.num * &self.den))
    }
}

/// Endpoints of the interval with the given midpoint and length over `den`.
fn span(mid: &BigInt, len: &BigInt, den: &BigInt) -> (Pt, Pt) {
    let (m2, d2): (BigInt, BigInt) = (mid * 2, den * 2);
    (
        Pt {
            num: &m2 - len,
            den: d2.clone(),
        },
        Pt {
            num: &m2 + len,
            den: d2,
        },
    )
}

fn ends(a: &IntervalAssignment, n: usize, b: usize) -> (Pt, Pt) {
    let l = a.level(n);
    span(&l.mid[b], &l.len[b], &BigInt::from(l.den.clone()))
}

/// Independent restatement of the nesting, disjointness, spacing and
/// container conditions.
fn geometry_oracle(a: &IntervalAssignment) -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=a.depth() {
        let l = a.level(n);
        let den = BigInt::from(l.den.clone());
        let groups: Vec<Vec<usize>> = if n == 1 {
            vec![(0..l.len()).collect()]
        } else {
            let mut g = vec![Vec::new(); a.level(n - 1).len()];
            for b in 0..l.len() {
                g[l.parent[b] as usize].push(b);
            }
            g
        };
        let boxed: BTreeSet<u32> = l.containers.iter().map(|cs| cs.parent).collect();
        let vn = BigInt::from(l.len() as u64 + 1);
        for (w, ch) in groups.iter().enumerate() {
            let mut spans: Vec<_> = ch.iter().map(|&b| (ends(a, n, b), b)).collect();
            spans.sort();
            for p in spans.windows(2) {
                checked += 1;
                ensure(p[0].0 .1 < p[1].0 .0, || {
                    format!("level {n}: {} meets {}", l.ids[p[0].1], l.ids[p[1].1])
                })?;
            }
            if n == 1 {
                continue;
            }
            let (pl, pr) = ends(a, n - 1, w);
            let up = a.level(n - 1);
            let up_den = BigInt::from(up.den.clone());
            for &b in ch {
                let (cl, cr) = ends(a, n, b);
                checked += 1;
                ensure(pl <= cl && cr <= pr, || {
                    format!("level {n}: {} outside its parent", l.ids[b])
                })?;
                if !boxed.contains(&(w as u32)) {
                    checked += 1;
                    // len/den <= plen / (up_den * 2 (|V_n| + 1))
                    let ok = &l.len[b] * &up_den * 2 * &vn <= &up.len[w] * &den;
                    ensure(ok, || format!("level {n}: spacing bound fails for {}", l.ids[b]))?;
                }
            }
        }
        for cs in &l.containers {
            let (pl, pr) = ends(a, n - 1, cs.parent as usize);
            let mut boxes = Vec::new();
            for k in 0..=cs.omega {
                let (bl, br) = span(&cs.mids[k], &cs.lens[k], &den);
                checked += 1;
                ensure(pl <= bl && br <= pr, || {
                    format!("level {n}: container {k} leaves its parent")
                })?;
                for &v in &cs.members[k] {
                    let (cl, cr) = ends(a, n, v as usize);
                    checked += 1;
                    ensure(bl <= cl && cr <= br, || {
                        format!("level {n}: {} outside container {k}", l.ids[v as usize])
                    })?;
                }
                boxes.push((bl, br));
            }
            boxes.sort();
            for p in boxes.windows(2) {
                checked += 1;
                ensure(p[0].1 < p[1].0, || format!("level {n}: containers overlap"))?;
            }
        }
    }
    Ok(checked)
}

fn geometry() -> Outcome {
    let mut notes = Vec::new();
    for (name, c) in [
        ("attracting-fix", attracting_fix()),
        ("attracting-two-orbit", attracting_two_orbit()),
    ] {
        let (_, a) = embedded(&c, 5)?;
        let g = geometry_suite(&a).map_err(err)?;
        ensure(g.passed(), || {
            format!("{name}: {:?}", &g.violations[..g.violations.len().min(3)])
        })?;
        let containers: usize = a.levels.iter().map(|l| l.containers.len()).sum();
        ensure(containers > 0, || format!("{name}: no containers placed"))?;
        let k = geometry_oracle(&a).map_err(|e| format!("{name}: {e}"))?;
        notes.push(format!("{name} {} + {k} checks", g.checks));
    }
    Ok(notes.join(", "))
}

fn contraction() -> Outcome {
    let mut notes = Vec::new();
    for (name, c) in [
        ("attracting-fix", attracting_fix()),
        ("attracting-two-orbit", attracting_two_orbit()),
    ] {
        let (mc, a) = embedded(&c, 6)?;
        for n in [1usize, 2] {
            let r = contraction_certificate(&a, &mc, n).map_err(err)?;
            ensure(r.passed(), || {
                format!("{name} n={n}: {} failures {:?}", r.failure_count, r.failures.first())
            })?;
            ensure(r.pairs_eligible >= 1 && r.pairs_certified == r.pairs_eligible, || {
                format!(
                    "{name} n={n}: {} eligible, {} certified",
                    r.pairs_eligible, r.pairs_certified
                )
            })?;
            ensure(r.pairs_eligible + r.pairs_ineligible == r.pairs_total, || {
                format!("{name}: pair accounting")
            })?;
            let max = r.max_ratio_value().ok_or("no ratio")?;
            let cap = BigRational::new(BigInt::one(), BigInt::one() << n);
            ensure(max <= cap, || format!("{name} n={n}: ratio above 2^-{n}"))?;
            notes.push(format!("{name} n={n} {}/{}", r.pairs_certified, r.pairs_total));
        }
    }
    Ok(notes.join(", "))
}

/// Cells of depth `d + 1` with an edge into a cell whose ancestor at depth
/// `d` lies in `u`, from the raw level edges and bonding map.
fn brute_preimage(c: &Covering, d: usize, u: &BTreeSet<u32>) -> Result<BTreeSet<u32>, String> {
    let g = c.level(d + 1).map_err(err)?;
    let bond = c.bond(d).map_err(err)?;
    Ok((0..g.len() as u32)
        .filter(|&w| g.succ(w).iter().any(|&y| u.contains(&bond[y as usize])))
        .collect())
}

/// Quotient by brute force: blocks named by their least cell name, an edge
/// whenever some member pair is joined.
fn brute_quotient(g: &LevelGraph, blocks: &[Vec<u32>]) -> (Vec<String>, BTreeSet<(String, String)>) {
    let id = |b: &Vec<u32>| b.iter().map(|&x| g.name(x).to_string()).min().unwrap_or_default();
    let mut names: Vec<String> = blocks.iter().map(id).collect();
    let mut edges = BTreeSet::new();
    for p in blocks {
        for q in blocks {
            if p.iter().any(|&x| q.iter().any(|&y| g.has_edge(x, y))) {
                edges.insert((id(p), id(q)));
            }
        }
    }
    names.sort();
    (names, edges)
}

fn oracle_equivalence() -> Outcome {
    let (mut sets, mut parts) = (0, 0);
    for seed in 0..100u64 {
        let levels = 1 + (seed % 4) as usize;
        let c = random_covering(seed, levels, 50).map_err(err)?;
        let v = validate_covering(&c);
        ensure(v.is_valid(), || {
            format!("seed {seed}: invalid covering {:?}", v.violations.first())
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in 1..=levels {
            let g = c.level(d).map_err(err)?;
            let n = g.len() as u32;
            ensure(n as usize <= 50, || format!("seed {seed}: level {d} has {n} vertices"))?;
            if d < levels {
                let mut subsets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(), (0..n).collect()];
                for _ in 0..6 {
                    let p: f64 = rng.gen();
                    subsets.push((0..n).filter(|_| rng.gen_bool(p)).collect());
                }
                for u in subsets {
                    let got = preimage(&c, &ClopenSet::new(d, u.iter().copied().collect())).map_err(err)?;
                    let want = brute_preimage(&c, d, &u)?;
                    ensure(got.depth() == d + 1, || {
                        format!("seed {seed}: preimage depth {}", got.depth())
                    })?;
                    let got: BTreeSet<u32> = got.cells().iter().copied().collect();
                    ensure(got == want, || {
                        format!("seed {seed} depth {d}: preimage {got:?} vs {want:?}")
                    })?;
                    sets += 1;
                }
            }
            for _ in 0..4 {
                let k = rng.gen_range(1..=n);
                let mut blocks = vec![Vec::new(); k as usize];
                for x in 0..n {
                    blocks[rng.gen_range(0..k) as usize].push(x);
                }
                blocks.retain(|b| !b.is_empty());
                let p = Partition::from_blocks(&c, d, blocks.clone()).map_err(err)?;
                let q = quotient_graph(&c, &p).map_err(err)?;
                let got_edges: BTreeSet<(String, String)> = q
                    .edges()
                    .map(|(a, b)| (q.name(a).to_string(), q.name(b).to_string()))
                    .collect();
                let (names, edges) = brute_quotient(&g, &blocks);
                ensure(q.names() == names.as_slice(), || {
                    format!("seed {seed} depth {d}: block names differ")
                })?;
                ensure(got_edges == edges, || {
                    format!("seed {seed} depth {d}: quotient edges differ")
                })?;
                parts += 1;
            }
        }
    }
    Ok(format!("{sets} preimages, {parts} quotients"))
}

/// A clopen set as a set of cells at one depth, with its own arithmetic on
/// the raw bonding maps.
#[derive(Clone, Debug)]
struct Cells {
    depth: usize,
    cells: BTreeSet<u32>,
}

struct Algebra<'a> {
    c: &'a Covering,
}

impl Algebra<'_> {
    fn ancestor(&self, mut depth: usize, mut x: u32, to: usize) -> Result<u32, String> {
        while depth > to {
            x = self.c.bond(depth - 1).map_err(err)?[x as usize];
            depth -= 1;
        }
        Ok(x)
    }

    fn deepen(&self, s: &Cells, depth: usize) -> Result<Cells, String> {
        let size = self.c.level(depth).map_err(err)?.len() as u32;
        let mut cells = BTreeSet::new();
        for x in 0..size {
            if s.cells.contains(&self.ancestor(depth, x, s.depth)?) {
                cells.insert(x);
            }
        }
        Ok(Cells { depth, cells })
    }

    /// Coarsest depth at which the set is still a union of cells.
    fn coarsen(&self, mut s: Cells) -> Result<Cells, String> {
        while s.depth > 1 {
            let bond = self.c.bond(s.depth - 1).map_err(err)?;
            let parents: BTreeSet<u32> = s.cells.iter().map(|&x| bond[x as usize]).collect();
            let full = (0..bond.len() as u32).all(|y| s.cells.contains(&y) || !parents.contains(&bond[y as usize]));
            if !full {
                break;
            }
            s = Cells {
                depth: s.depth - 1,
                cells: parents,
            };
        }
        Ok(s)
    }

    fn pre(&self, s: &Cells) -> Result<Cells, String> {
        let cells = brute_preimage(self.c, s.depth, &s.cells)?;
        self.coarsen(Cells {
            depth: s.depth + 1,
            cells,
        })
    }

    fn common(&self, a: &Cells, b: &Cells) -> Result<(Cells, Cells), String> {
        let d = a.depth.max(b.depth);
        Ok((self.deepen(a, d)?, self.deepen(b, d)?))
    }

    fn disjoint(&self, a: &Cells, b: &Cells) -> Result<bool, String> {
        let (a, b) = self.common(a, b)?;
        Ok(a.cells.is_disjoint(&b.cells))
    }

    fn union(&self, a: &Cells, b: &Cells) -> Result<Cells, String> {
        let (a, b) = self.common(a, b)?;
        self.coarsen(Cells {
            depth: a.depth,
            cells: &a.cells | &b.cells,
        })
    }

    fn subset(&self, a: &Cells, b: &Cells) -> Result<bool, String> {
        let (a, b) = self.common(a, b)?;
        Ok(a.cells.is_subset(&b.cells))
    }
}

fn krieger() -> Outcome {
    let c = attracting_fix();
    let alg = Algebra { c: &c };
    let p = Partition::singletons(&c, 3).map_err(err)?;
    let s = supercyclical_structure(&c, &p, Tau::Finite(1)).map_err(err)?;
    let sup = Cells {
        depth: 3,
        cells: s
            .supercyclical_blocks()
            .iter()
            .flat_map(|&b| p.block(b as usize).to_vec())
            .collect(),
    };
    let mut notes = Vec::new();
    for n in [1usize, 2] {
        let m = krieger_marker(&s, &c, n).map_err(err)?;
        ensure(m.big_n < 2 * n + 2, || {
            format!("n={n}: {} preimage layers", m.big_n + 1)
        })?;
        let f = alg.coarsen(Cells {
            depth: m.set.depth(),
            cells: m.set.cells().iter().copied().collect(),
        })?;
        ensure(!f.cells.is_empty(), || format!("n={n}: empty marker"))?;
        let mut layers = vec![f];
        for _ in 0..m.big_n.max(n) {
            let next = alg.pre(layers.last().expect("nonempty"))?;
            layers.push(next);
        }
        for i in 0..=n {
            for j in i + 1..=n {
                ensure(alg.disjoint(&layers[i], &layers[j])?, || {
                    format!("n={n}: layers {i} and {j} meet")
                })?;
            }
        }
        let mut cover = layers[0].clone();
        for l in &layers[1..=m.big_n] {
            cover = alg.union(&cover, l)?;
        }
        let mut target = alg.coarsen(sup.clone())?;
        for _ in 0..m.t {
            target = alg.pre(&target)?;
        }
        ensure(alg.subset(&target, &cover)?, || {
            format!("n={n}: f^-{} of the supercyclical part not covered", m.t)
        })?;
        notes.push(format!("n={n} t={} N={}", m.t, m.big_n));
    }
    Ok(notes.join(", "))
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("zerodim-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run_to(dir: &Path, args: &[&str]) -> Result<(), String> {
    let mut full: Vec<&str> = args.to_vec();
    let d = dir.to_str().ok_or("non-utf8 temp path")?;
    full.extend(["--out", d]);
    let out = zerodim(&full);
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(err)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    names.sort();
    for n in &names {
        let x = std::fs::read(a.join(n)).map_err(err)?;
        let y = std::fs::read(b.join(n)).map_err(err)?;
        ensure(x == y, || format!("{n:?} differs between runs"))?;
    }
    Ok(names.len())
}

fn round_trip() -> Outcome {
    let fixtures = [
        odometer(2),
        full_shift(),
        attracting_fix(),
        attracting_two_orbit(),
        merged_orbits(),
        random_covering(5, 4, 40).map_err(err)?,
    ];
    for c in &fixtures {
        let text = to_json(&dump_covering(c, 4).map_err(err)?).map_err(err)?;
        let back = parse_covering(&text).map_err(err)?;
        let again = to_json(&dump_covering(&back, 4).map_err(err)?).map_err(err)?;
        ensure(text == again, || "covering dump changed after a round trip".into())?;
    }
    for c in [attracting_fix(), attracting_two_orbit(), odometer(2)] {
        let (mc, a) = embedded(&c, 3)?;
        let text = to_json(&dump_marked(&mc, &c).map_err(err)?).map_err(err)?;
        ensure(parse_marked(&text, &c).map_err(err)? == mc, || {
            "marked covering changed".into()
        })?;
        let text = to_json(&dump_assignment(&a)).map_err(err)?;
        ensure(parse_assignment(&text).map_err(err)? == a, || {
            "assignment changed".into()
        })?;
    }

    let (x, y) = (scratch("a"), scratch("b"));
    for dir in [&x, &y] {
        run_to(dir, &["validate", "--gen", "random", "--seed", "7", "--depth", "3"])?;
        run_to(dir, &["pipeline", "--gen", "attracting-fix", "--depth", "3"])?;
        run_to(dir, &["embed", "--gen", "attracting-fix", "--depth", "3"])?;
        run_to(dir, &["render", "--gen", "attracting-fix", "--depth", "3"])?;
    }
    let files = same_files(&x, &y)?;
    let stdout: Vec<Vec<u8>> = (0..2)
        .map(|_| zerodim(&["embed", "--gen", "attracting-two-orbit", "--depth", "3"]).stdout)
        .collect();
    ensure(stdout[0] == stdout[1] && !stdout[0].is_empty(), || {
        "embed stdout differs between runs".into()
    })?;
    let _ = std::fs::remove_dir_all(&x);
    let _ = std::fs::remove_dir_all(&y);
    Ok(format!("{} fixtures, {files} artifacts byte-identical", fixtures.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("aperiodicity metric", 5, aperiodicity),
        ("periodic detection", 5, periodic_detection),
        ("refusal", 10, refusal),
        ("partition sequence", 60, partition_sequence),
        ("lexicographic descent", 5, descent),
        ("geometry exactness", 30, geometry),
        ("contraction certificate", 120, contraction),
        ("oracle equivalence", 30, oracle_equivalence),
        ("marker invariants", 30, krieger),
        ("round trip and determinism", 5, round_trip),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let dt = t.elapsed();
        let r = r.and_then(|s| {
            if dt <= Duration::from_secs(*limit) {
                Ok(s)
            } else {
                Err(format!("{s}; over the {limit} s limit"))
            }
        });
        let secs = dt.as_secs_f64();
        match r {
            Ok(s) => println!("criterion {:>2} PASS {name} ({secs:.2} s): {s}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2} s): {e}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
