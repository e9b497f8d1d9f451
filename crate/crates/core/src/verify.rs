//! Certificates: structural checks on marked coverings, exact geometry
//! checks on interval assignments, the finite-depth contraction certificate
//! and the non-attraction detector.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::circuits::circuits_in;
use crate::clopen::reach;
use crate::covering::Covering;
use crate::dynamics::{delta_omega, periodic_candidates, AttractedShape};
use crate::embed::IntervalAssignment;
use crate::error::{Error, Result};
use crate::marking::{relative_violations, well_marked_violations, Mark};
use crate::rectify::{non_marker_divergent, MarkedCovering};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    /// Level the check applies to; 0 for global checks.
    pub level: usize,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub checks: Vec<Check>,
}

impl StructuralReport {
    fn push(&mut self, name: &str, level: usize, witness: Option<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            level,
            passed: witness.is_none(),
            witness,
        });
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// S1–S4, marking laws, τ growth, refinement, relative words and the
/// one-star-per-chain property.
pub fn structural_suite(mc: &MarkedCovering, c: &Covering) -> Result<StructuralReport> {
    if mc.is_empty() {
        return Err(Error::precondition("marked covering is empty"));
    }
    let mut r = StructuralReport::default();
    for n in 1..=mc.len() {
        let l = mc.level(n);
        let ids = l.partition().block_ids(c)?;
        let s = &l.structure;
        let tau_ok = s.tau.admits(n) && (n == 1 || !mc.level(n - 1).tau().admits(1 + tau_value(s.tau)));
        r.push("tau", n, (!tau_ok).then(|| format!("tau {} at level {n}", s.tau)));

        let mut s1 = None;
        for orbit in s.orbits_present() {
            let blocks = s.attracted(orbit as usize);
            for &b in &blocks {
                if let Some(&t) = s.graph[b as usize]
                    .iter()
                    .find(|&&t| s.orbit_of[t as usize] != Some(orbit))
                {
                    s1.get_or_insert(format!(
                        "edge {} -> {} leaves the attracted set of orbit {orbit}",
                        ids[b as usize], ids[t as usize]
                    ));
                }
            }
        }
        for (i, o) in c.orbits().iter().enumerate() {
            if s.tau.admits(o.period) && s.attracted(i).is_empty() {
                s1.get_or_insert(format!("orbit {i} has no attracted set"));
            }
        }
        r.push("S1", n, s1);

        let shape = delta_omega(s);
        r.push("S2", n, shape.as_ref().err().map(|e| e.to_string()));
        if let Ok(shape) = &shape {
            r.push("S1-orbit", n, orbit_witness(shape, l, c, &ids)?);
        }

        let s3 = (0..l.len()).find(|&b| s.is_attracted(b) && s.graph[b].len() >= 2);
        r.push("S3", n, s3.map(|b| format!("attracted block {} is divergent", ids[b])));

        let s4 = non_marker_divergent(l);
        r.push(
            "S4",
            n,
            s4.first().map(|&b| {
                format!(
                    "divergent block {} is marked {}",
                    ids[b as usize],
                    l.chi[b as usize].symbol()
                )
            }),
        );

        let wm = well_marked_violations(l, c)?;
        r.push("well-marked", n, wm.first().cloned());

        if n > 1 {
            let prev = mc.level(n - 1);
            let refines = l.partition().refines(prev.partition(), c)?;
            r.push(
                "refines",
                n,
                (!refines).then(|| format!("level {n} does not refine level {}", n - 1)),
            );
            let words = if refines {
                relative_violations(l, prev, c)?
            } else {
                Vec::new()
            };
            r.push(
                "relative-words",
                n,
                words.first().map(|(b, w)| format!("block {b} carries the word {w}")),
            );
        }
    }
    r.push("unique-star", 0, two_star_chain(mc, c)?);
    Ok(r)
}

fn tau_value(t: crate::dynamics::Tau) -> usize {
    t.finite().map_or(usize::MAX - 1, |x| x as usize)
}

fn orbit_witness(
    shape: &AttractedShape,
    l: &crate::marking::MarkedLevel,
    c: &Covering,
    ids: &[String],
) -> Result<Option<String>> {
    for (orbit, circ, _) in &shape.circuits {
        let o = &c.orbits()[*orbit as usize];
        if l.depth() < o.level {
            continue;
        }
        let proj = c.projection(l.depth(), o.level)?;
        for &b in circ {
            let cells = l.partition().block(b as usize);
            if !cells.iter().all(|&x| o.circuit.contains(&proj[x as usize])) {
                return Ok(Some(format!(
                    "circuit block {} is outside orbit {orbit}",
                    ids[b as usize]
                )));
            }
        }
    }
    Ok(None)
}

/// A bonding chain through two or more markers, if any.
fn two_star_chain(mc: &MarkedCovering, c: &Covering) -> Result<Option<String>> {
    let mut count: Vec<u32> = mc.level(1).chi.iter().map(|&m| (m == Mark::Star) as u32).collect();
    for n in 2..=mc.len() {
        let l = mc.level(n);
        let parent = l.partition().parent_map(mc.level(n - 1).partition(), c)?;
        let next: Vec<u32> = (0..l.len())
            .map(|b| count[parent[b] as usize] + (l.chi[b] == Mark::Star) as u32)
            .collect();
        if let Some(b) = next.iter().position(|&k| k >= 2) {
            let mut chain = vec![b as u32];
            for k in (2..=n).rev() {
                let pm = mc.level(k).partition().parent_map(mc.level(k - 1).partition(), c)?;
                chain.push(pm[*chain.last().expect("nonempty") as usize]);
            }
            chain.reverse();
            let names: Vec<String> = chain
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let lv = mc.level(k + 1);
                    let id = lv.partition().block_ids(c).map(|v| v[x as usize].clone());
                    id.map(|s| format!("{}{}", s, lv.chi[x as usize].symbol()))
                })
                .collect::<Result<_>>()?;
            return Ok(Some(names.join(" <- ")));
        }
        count = next;
    }
    Ok(None)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GeometryReport {
    pub checks: usize,
    pub violations: Vec<String>,
}

impl GeometryReport {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(msg());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact nesting, sibling and container disjointness, containment, length
/// calibration and the spacing bound.
pub fn geometry_suite(a: &IntervalAssignment) -> Result<GeometryReport> {
    let mut r = GeometryReport::default();
    for n in 1..=a.depth() {
        let l = a.level(n);
        let den = BigInt::from(l.den.clone());
        let q = l.lambda.denom().clone();
        for b in 0..l.len() {
            r.check(l.len[b] > BigInt::zero(), || {
                format!("level {n}: {} has nonpositive length", l.ids[b])
            });
            let within = &l.len[b] * l.epsilon.denom() <= &den * l.epsilon.numer();
            r.check(within, || format!("level {n}: {} longer than epsilon", l.ids[b]));
        }
        for &(w, v) in &l.a_edges {
            let ok = &l.len[v as usize] * &q <= l.len[w as usize];
            r.check(ok, || {
                format!(
                    "level {n}: calibration fails on edge {} -> {}",
                    l.ids[w as usize], l.ids[v as usize]
                )
            });
        }
        if n == 1 {
            let all: Vec<u32> = (0..l.len() as u32).collect();
            disjoint_run(&mut r, n, l, &all);
            continue;
        }
        let up = a.level(n - 1);
        let m = BigInt::from(a.ratio(n)?);
        let kids = l.children(up.len());
        let in_box: Vec<bool> = {
            let mut v = vec![false; up.len()];
            for cs in &l.containers {
                v[cs.parent as usize] = true;
            }
            v
        };
        let vn1 = BigInt::from(l.len() as u64 + 1);
        for (w, ch) in kids.iter().enumerate() {
            let (pl, pr) = up.ends2(w);
            let (pl, pr) = (pl * &m, pr * &m);
            for &v in ch {
                let (cl, cr) = l.ends2(v as usize);
                r.check(pl <= cl && cr <= pr, || {
                    format!("level {n}: {} not inside parent {}", l.ids[v as usize], up.ids[w])
                });
                if !in_box[w] {
                    let ok = &l.len[v as usize] * BigInt::from(2) * &vn1 <= &up.len[w] * &m;
                    r.check(ok, || {
                        format!("level {n}: spacing bound fails for {}", l.ids[v as usize])
                    });
                }
            }
            disjoint_run(&mut r, n, l, ch);
        }
        for cs in &l.containers {
            let (pl, pr) = up.ends2(cs.parent as usize);
            let (pl, pr) = (pl * &m, pr * &m);
            let mut boxes: Vec<(BigInt, BigInt, usize)> = Vec::new();
            for k in 0..=cs.omega {
                let m2 = &cs.mids[k] << 1;
                let (bl, br) = (&m2 - &cs.lens[k], &m2 + &cs.lens[k]);
                r.check(pl <= bl && br <= pr, || {
                    format!(
                        "level {n}: container {k} of {} leaves its parent",
                        up.ids[cs.parent as usize]
                    )
                });
                for &v in &cs.members[k] {
                    let (cl, cr) = l.ends2(v as usize);
                    r.check(bl <= cl && cr <= br, || {
                        format!("level {n}: {} not inside container {k}", l.ids[v as usize])
                    });
                }
                boxes.push((bl, br, k));
            }
            boxes.sort();
            for wnd in boxes.windows(2) {
                r.check(wnd[0].1 < wnd[1].0, || {
                    format!(
                        "level {n}: containers {} and {} of {} overlap",
                        wnd[0].2, wnd[1].2, up.ids[cs.parent as usize]
                    )
                });
            }
        }
    }
    Ok(r)
}

fn disjoint_run(r: &mut GeometryReport, n: usize, l: &crate::embed::LevelAssignment, blocks: &[u32]) {
    let mut v: Vec<u32> = blocks.to_vec();
    v.sort_by(|&x, &y| l.mid[x as usize].cmp(&l.mid[y as usize]));
    for w in v.windows(2) {
        let (_, r0) = l.ends2(w[0] as usize);
        let (l1, _) = l.ends2(w[1] as usize);
        r.check(r0 < l1, || {
            format!(
                "level {n}: siblings {} and {} intersect",
                l.ids[w[0] as usize], l.ids[w[1] as usize]
            )
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractionFailure {
    pub level: usize,
    pub left: String,
    pub right: String,
    pub upper: String,
    pub lower: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractionReport {
    pub exponent: usize,
    pub depth: usize,
    /// Unordered pairs of distinct depth-N blocks.
    pub pairs_total: u64,
    pub pairs_eligible: u64,
    pub pairs_certified: u64,
    pub pairs_ineligible: u64,
    pub ineligible_by_reason: BTreeMap<String, u64>,
    pub groups_checked: u64,
    /// Largest certified upper/lower ratio, as "num/den".
    pub max_ratio: Option<String>,
    pub failure_count: u64,
    /// First failing pairs, capped.
    pub failures: Vec<ContractionFailure>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.failure_count == 0 && self.pairs_certified == self.pairs_eligible
    }

    pub fn max_ratio_value(&self) -> Option<BigRational> {
        self.max_ratio.as_ref().map(|s| s.parse().expect("stored ratio parses"))
    }
}

const FAILURE_CAP: usize = 32;

struct Sweep<'a> {
    a: &'a IntervalAssignment,
    n: usize,
    depth: usize,
    hull: Vec<Vec<(BigInt, BigInt)>>,
    desc: Vec<Vec<u64>>,
    kids: Vec<Vec<Vec<u32>>>,
    scale: Vec<BigInt>,
    best: Option<(BigInt, BigInt)>,
    certified: u64,
    failures: Vec<ContractionFailure>,
    failure_count: u64,
    groups: u64,
}

impl Sweep<'_> {
    /// Checks descendants x, y (at level `la`) of a sibling pair at level l
    /// with the given gap (over 2·den_l), refining on failure.
    fn check(&mut self, l: usize, la: usize, x: u32, y: u32, gap: &BigInt) {
        self.groups += 1;
        let (xl, xr) = &self.hull[la][x as usize];
        let (yl, yr) = &self.hull[la][y as usize];
        let upper = xr.max(yr) - xl.min(yl);
        let lower = gap * &self.scale[l];
        if (&upper << self.n) <= lower {
            self.certified += self.desc[la][x as usize] * self.desc[la][y as usize];
            let (num, den) = (upper, lower);
            let est = approx_ratio(&num, &den);
            let better = match &self.best {
                None => true,
                Some((bn, bd)) => {
                    let best = approx_ratio(bn, bd);
                    if (est - best).abs() > 1e-9 * best.max(est) {
                        est > best
                    } else {
                        &num * bd > bn * &den
                    }
                }
            };
            if better {
                self.best = Some((num, den));
            }
            return;
        }
        if la == self.depth {
            self.failure_count += 1;
            if self.failures.len() < FAILURE_CAP {
                let lv = self.a.level(la);
                self.failures.push(ContractionFailure {
                    level: l,
                    left: lv.ids[x as usize].clone(),
                    right: lv.ids[y as usize].clone(),
                    upper: format!("{}/{}", upper, BigInt::from(self.a.level(self.depth).den.clone()) * 2),
                    lower: format!("{}/{}", gap, BigInt::from(self.a.level(l).den.clone()) * 2),
                });
            }
            return;
        }
        let xs = self.kids[la + 1][x as usize].clone();
        let ys = self.kids[la + 1][y as usize].clone();
        for &cx in &xs {
            for &cy in &ys {
                self.check(l, la + 1, cx, cy, gap);
            }
        }
    }
}

fn approx_ratio(num: &BigInt, den: &BigInt) -> f64 {
    let shift = num.bits().max(den.bits()).saturating_sub(60);
    let f = |x: &BigInt| (x >> shift).to_f64().unwrap_or(f64::MAX);
    f(num) / f(den)
}

/// Certifies |ψ(fx) − ψ(fx')| ≤ 2^{-n}·|ψ(x) − ψ(x')| for every eligible
/// pair of depth-N blocks, N being the assignment depth.
pub fn contraction_certificate(a: &IntervalAssignment, mc: &MarkedCovering, n: usize) -> Result<ContractionReport> {
    let depth = a.depth();
    if n == 0 || depth < n + 4 {
        return Err(Error::precondition(format!(
            "contraction needs depth >= n + 4 (depth {depth}, n {n})"
        )));
    }
    if mc.len() < depth {
        return Err(Error::precondition("marked covering shallower than the assignment"));
    }
    let shapes: Vec<AttractedShape> = (1..=depth)
        .map(|k| delta_omega(&mc.level(k).structure))
        .collect::<Result<_>>()?;
    let mut kids: Vec<Vec<Vec<u32>>> = vec![Vec::new(); depth + 1];
    for k in 2..=depth {
        kids[k - 1] = a.level(k).children(a.level(k - 1).len());
    }
    // kids[k][b]: children at level k+1 of block b at level k, stored one
    // slot later for the sweep.
    let mut kids_at: Vec<Vec<Vec<u32>>> = vec![Vec::new(); depth + 1];
    kids_at[2..=depth].clone_from_slice(&kids[1..depth]);
    let mut desc: Vec<Vec<u64>> = vec![Vec::new(); depth + 1];
    desc[depth] = vec![1; a.level(depth).len()];
    for k in (1..depth).rev() {
        let mut d = vec![0u64; a.level(k).len()];
        for (v, &w) in a.level(k + 1).parent.iter().enumerate() {
            d[w as usize] += desc[k + 1][v];
        }
        desc[k] = d;
    }

    let top = a.level(depth);
    let g = &mc.level(depth).structure.graph;
    let mut hull: Vec<Vec<(BigInt, BigInt)>> = vec![Vec::new(); depth + 1];
    hull[depth] = (0..top.len())
        .map(|v| {
            let mut lo: Option<BigInt> = None;
            let mut hi: Option<BigInt> = None;
            for &y in &g[v] {
                let (l, r) = top.ends2(y as usize);
                lo = Some(lo.map_or(l.clone(), |x| x.min(l)));
                hi = Some(hi.map_or(r.clone(), |x| x.max(r)));
            }
            match (lo, hi) {
                (Some(l), Some(r)) => Ok((l, r)),
                _ => Err(Error::invariant("depth-N block without successors")),
            }
        })
        .collect::<Result<_>>()?;
    for k in (2..depth).rev() {
        let lv = a.level(k);
        let mut h: Vec<Option<(BigInt, BigInt)>> = vec![None; lv.len()];
        for (v, &w) in a.level(k + 1).parent.iter().enumerate() {
            let (l, r) = &hull[k + 1][v];
            let e = &mut h[w as usize];
            *e = Some(match e.take() {
                None => (l.clone(), r.clone()),
                Some((a0, b0)) => (a0.min(l.clone()), b0.max(r.clone())),
            });
        }
        hull[k] = h.into_iter().map(|x| x.expect("every block has children")).collect();
    }

    // scale[l] = den_N / den_l
    let d_last = &top.den;
    let mut scale = vec![BigInt::zero(); depth + 1];
    for (l, s) in scale.iter_mut().enumerate().skip(1) {
        let (q, rem) = d_last.div_rem(&a.level(l).den);
        if !rem.is_zero() {
            return Err(Error::invariant("level denominators are not nested"));
        }
        *s = BigInt::from(q);
    }

    let mut sweep = Sweep {
        a,
        n,
        depth,
        hull,
        desc,
        kids: kids_at,
        scale,
        best: None,
        certified: 0,
        failures: Vec::new(),
        failure_count: 0,
        groups: 0,
    };
    let total_n = a.level(depth).len() as u64;
    let pairs_total = total_n * total_n.saturating_sub(1) / 2;
    let mut eligible = 0u64;
    let mut reasons: BTreeMap<String, u64> = BTreeMap::new();
    let roots = &sweep.desc[1];
    let spread: u64 = roots.iter().sum::<u64>().pow(2) - roots.iter().map(|d| d * d).sum::<u64>();
    if spread > 0 {
        reasons.insert("distinct level-1 ancestors".to_string(), spread / 2);
    }
    for l in 2..=depth {
        let up = mc.level(l - 1);
        let here = a.level(l);
        let on_up = &shapes[l - 2].on_circuit;
        let on_here = &shapes[l - 1].on_circuit;
        let ch = kids[l - 1].clone();
        for (u, sibs) in ch.iter().enumerate() {
            for i in 0..sibs.len() {
                for j in i + 1..sibs.len() {
                    let (x, y) = (sibs[i], sibs[j]);
                    let weight = sweep.desc[l][x as usize] * sweep.desc[l][y as usize];
                    let reason = if on_up[u] {
                        if !on_here[x as usize] && !on_here[y as usize] {
                            Some("off-circuit pair under a circuit block")
                        } else if l < n + 4 {
                            Some("below the periodic threshold")
                        } else {
                            None
                        }
                    } else if up.structure.graph[u].len() >= 2 {
                        Some("divergent common ancestor")
                    } else if up.chi[up.structure.graph[u][0] as usize] == Mark::Star {
                        Some("successor is a marker")
                    } else if l < n + 3 {
                        Some("below the aperiodic threshold")
                    } else {
                        None
                    };
                    if let Some(rsn) = reason {
                        *reasons.entry(rsn.to_string()).or_default() += weight;
                        continue;
                    }
                    eligible += weight;
                    let (xl, xr) = here.ends2(x as usize);
                    let (yl, yr) = here.ends2(y as usize);
                    let gap = if xr < yl {
                        yl - xr
                    } else if yr < xl {
                        xl - yr
                    } else {
                        return Err(Error::invariant(format!(
                            "sibling intervals {} and {} overlap",
                            here.ids[x as usize], here.ids[y as usize]
                        )));
                    };
                    sweep.check(l, l, x, y, &gap);
                }
            }
        }
    }
    let ineligible: u64 = reasons.values().sum();
    if eligible + ineligible != pairs_total {
        return Err(Error::invariant("pair accounting does not add up"));
    }
    let max_ratio = sweep.best.take().map(|(num, den)| BigRational::new(num, den));
    if let Some(r) = &max_ratio {
        let bound = BigRational::new(BigInt::one(), BigInt::one() << n);
        let weaker = BigRational::new(BigInt::one(), BigInt::one() << (n - 1));
        if r > &bound || r > &weaker {
            return Err(Error::invariant("certified ratio exceeds the target bound"));
        }
    }
    Ok(ContractionReport {
        exponent: n,
        depth,
        pairs_total,
        pairs_eligible: eligible,
        pairs_certified: sweep.certified,
        pairs_ineligible: ineligible,
        ineligible_by_reason: reasons,
        groups_checked: sweep.groups,
        max_ratio: max_ratio.map(|r| r.to_string()),
        failure_count: sweep.failure_count,
        failures: sweep.failures,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateVerdict {
    pub period: usize,
    pub start: usize,
    /// Circuit cells at the deepest depth examined.
    pub circuit: Vec<String>,
    /// Shallowest depth at which the forward orbit of the circuit cells
    /// contains no other circuit.
    pub witness_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegativeReport {
    pub depth: usize,
    pub max_period: usize,
    pub candidates: Vec<CandidateVerdict>,
}

impl NegativeReport {
    pub fn non_attracting(&self) -> Vec<&CandidateVerdict> {
        self.candidates.iter().filter(|c| c.witness_depth.is_none()).collect()
    }
}

/// Periodic candidates of period at most `max_period` whose circuit cells
/// have no stable neighbourhood free of other circuits at any depth ≤ D.
pub fn negative_detector(c: &Covering, depth: usize, max_period: usize) -> Result<NegativeReport> {
    let cands = periodic_candidates(c, max_period, depth)?;
    let mut out = Vec::new();
    for cand in &cands {
        let mut witness = None;
        let last = cand.end().min(depth);
        for d in cand.start..=last {
            let Some(cells) = cand.circuit_at(d) else { continue };
            let g = c.level(d)?;
            let reached = reach(&g, cells);
            let mut alive = vec![false; g.len()];
            for &x in &reached {
                alive[x as usize] = true;
            }
            let single = match circuits_in(g.adjacency(), Some(&alive), 1) {
                Ok(found) => found.len() == 1,
                Err(e) if e.is_budget() => false,
                Err(e) => return Err(e),
            };
            if single {
                witness = Some(d);
                break;
            }
        }
        let cells = cand.circuit_at(last).unwrap_or(&[]);
        let circuit = cells.iter().map(|&x| c.cell_name(last, x)).collect::<Result<_>>()?;
        out.push(CandidateVerdict {
            period: cand.period,
            start: cand.start,
            circuit,
            witness_depth: witness,
        });
    }
    Ok(NegativeReport {
        depth,
        max_period,
        candidates: out,
    })
}

/// BigUint helper for callers comparing certificate bounds.
pub fn pow2(e: usize) -> BigUint {
    BigUint::one() << e
}
