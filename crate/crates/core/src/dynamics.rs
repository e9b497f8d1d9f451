//! Periodicity analysis, attracted structure of partitions and the backward
//! layering that turns each attracted set into a circuit with in-trees.

use serde::{Serialize, Serializer};

use crate::circuits::{circuits_in, cyclic_vertices, girth, scc, short_circuits, Circuit, CIRCUIT_LIMIT};
use crate::clopen::{forward_stable, preimage_canonical, quotient_adjacency, ClopenSet, Partition};
use crate::covering::{Covering, OrbitAnnotation};
use crate::error::{Error, Result};

/// Longest undeclared circuit searched for when checking a structure.
pub const UNDECLARED_SEARCH_CAP: usize = 64;

/// Supercyclical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tau {
    Finite(u64),
    Infinite,
}

impl Tau {
    pub fn admits(self, period: usize) -> bool {
        match self {
            Tau::Finite(t) => period as u64 <= t,
            Tau::Infinite => true,
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Tau::Finite(t) => Some(t),
            Tau::Infinite => None,
        }
    }
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Finite(t) => s.serialize_u64(*t),
            Tau::Infinite => s.serialize_str("inf"),
        }
    }
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tau::Finite(t) => write!(f, "{t}"),
            Tau::Infinite => write!(f, "inf"),
        }
    }
}

/// A derived partition with its order and the orbit attracting each block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupercyclicalLevel {
    pub partition: Partition,
    pub tau: Tau,
    /// Declared orbit index of each attracted block.
    pub orbit_of: Vec<Option<u32>>,
    /// Quotient adjacency over block indices.
    pub graph: Vec<Vec<u32>>,
}

impl SupercyclicalLevel {
    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.partition.depth()
    }

    pub fn is_attracted(&self, b: usize) -> bool {
        self.orbit_of[b].is_some()
    }

    pub fn attracted(&self, orbit: usize) -> Vec<u32> {
        (0..self.len() as u32)
            .filter(|&b| self.orbit_of[b as usize] == Some(orbit as u32))
            .collect()
    }

    pub fn supercyclical_blocks(&self) -> Vec<u32> {
        (0..self.len() as u32)
            .filter(|&b| self.orbit_of[b as usize].is_none())
            .collect()
    }

    pub fn supercyclical_mask(&self) -> Vec<bool> {
        self.orbit_of.iter().map(Option::is_none).collect()
    }

    /// Orbits with a nonempty attracted set.
    pub fn orbits_present(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.orbit_of.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn from_parts(c: &Covering, partition: Partition, tau: Tau, orbit_of: Vec<Option<u32>>) -> Result<Self> {
        if orbit_of.len() != partition.len() {
            return Err(Error::invariant("orbit assignment length differs from block count"));
        }
        let graph = quotient_adjacency(c, &partition)?;
        Ok(Self {
            partition,
            tau,
            orbit_of,
            graph,
        })
    }
}

/// A chain of equal-length circuits, aligned cell by cell, through depths
/// `start..=start + chain.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeriodicCandidate {
    pub period: usize,
    pub start: usize,
    pub chain: Vec<Vec<u32>>,
}

impl PeriodicCandidate {
    pub fn end(&self) -> usize {
        self.start + self.chain.len() - 1
    }

    pub fn circuit_at(&self, depth: usize) -> Option<&[u32]> {
        depth
            .checked_sub(self.start)
            .and_then(|i| self.chain.get(i))
            .map(Vec::as_slice)
    }
}

/// Circuits of length at most `k` at depth `n`, each extended downward while
/// its projection stays a circuit of the same length.
pub fn periodic_candidates(c: &Covering, k: usize, n: usize) -> Result<Vec<PeriodicCandidate>> {
    let g = c.level(n)?;
    let found = short_circuits(g.adjacency(), k, &|_| true);
    let mut out = Vec::new();
    for circ in found {
        let mut chain = vec![circ.cells.clone()];
        let mut d = n;
        while d > 1 {
            let bond = c.bond(d - 1)?;
            let below: Vec<u32> = chain
                .last()
                .expect("nonempty")
                .iter()
                .map(|&x| bond[x as usize])
                .collect();
            let mut distinct = below.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() != below.len() {
                break;
            }
            chain.push(below);
            d -= 1;
        }
        chain.reverse();
        out.push(PeriodicCandidate {
            period: circ.len(),
            start: d,
            chain,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AperiodicityVerdict {
    AperiodicUpToDepth(usize),
    HasPeriodicWitness { period: usize },
    Inconclusive,
}

impl std::fmt::Display for AperiodicityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AperiodicityVerdict::AperiodicUpToDepth(n) => write!(f, "aperiodic-up-to-depth-{n}"),
            AperiodicityVerdict::HasPeriodicWitness { period } => write!(f, "has-periodic-witness (period {period})"),
            AperiodicityVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AperiodicityReport {
    pub nu: Vec<usize>,
    pub bound: usize,
    pub verdict: AperiodicityVerdict,
}

pub fn nu(adjacency: &[Vec<u32>]) -> Result<usize> {
    girth(adjacency).ok_or_else(|| Error::precondition("graph has no circuit"))
}

/// ν_1..ν_N and a verdict; `bound` defaults to N.
pub fn aperiodicity_certificate(c: &Covering, n: usize, bound: Option<usize>) -> Result<AperiodicityReport> {
    let mut nus = Vec::with_capacity(n);
    for d in 1..=n {
        nus.push(nu(c.level(d)?.adjacency())?);
    }
    let k = c.level(1)?.len();
    let witness = periodic_candidates(c, k.min(nus[n - 1].max(1) * k), n)?
        .into_iter()
        .filter(|p| p.start == 1)
        .map(|p| p.period)
        .min();
    let bound = bound.unwrap_or(n);
    let verdict = match witness {
        Some(period) => AperiodicityVerdict::HasPeriodicWitness { period },
        None if nus[n - 1] > bound => AperiodicityVerdict::AperiodicUpToDepth(n),
        None => AperiodicityVerdict::Inconclusive,
    };
    Ok(AperiodicityReport {
        nu: nus,
        bound,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthCheck {
    pub depth: usize,
    pub stable: bool,
    pub circuits: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum AttractionVerdict {
    /// Passed at every depth up to and including `depth`.
    Certified {
        depth: usize,
    },
    Failed {
        depth: usize,
        reason: String,
    },
    Inconclusive {
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttractionReport {
    pub checks: Vec<DepthCheck>,
    pub verdict: AttractionVerdict,
}

impl AttractionReport {
    pub fn passed(&self) -> bool {
        matches!(self.verdict, AttractionVerdict::Certified { .. })
    }
}

/// Circuits of the subgraph induced by `cells` at `depth`, capped.
fn induced_circuits(c: &Covering, depth: usize, cells: &[u32]) -> Result<Vec<Circuit>> {
    let g = c.level(depth)?;
    let mut alive = vec![false; g.len()];
    for &x in cells {
        alive[x as usize] = true;
    }
    circuits_in(g.adjacency(), Some(&alive), CIRCUIT_LIMIT)
}

/// Whether `cells` (at `depth`) project onto a rotation of `circuit` (at `level`).
fn projects_onto(c: &Covering, depth: usize, cells: &[u32], level: usize, circuit: &[u32]) -> Result<bool> {
    if cells.len() != circuit.len() {
        return Ok(false);
    }
    let proj: Vec<u32> = cells
        .iter()
        .map(|&x| c.ancestor(depth, x, level))
        .collect::<Result<_>>()?;
    let k = circuit.len();
    Ok((0..k).any(|r| (0..k).all(|i| proj[i] == circuit[(i + r) % k])))
}

/// Checks the basin at depths `level..=level + d_max`: stable, with a unique
/// circuit of length |p| projecting onto the declared cells.
pub fn attraction_certificate(c: &Covering, o: &OrbitAnnotation, d_max: usize) -> Result<AttractionReport> {
    let mut checks = Vec::new();
    let base = o.level.max(o.basin.depth());
    for d in 0..=d_max {
        let depth = base + d;
        if !c.can_reach(depth) {
            return Ok(AttractionReport {
                checks,
                verdict: AttractionVerdict::Inconclusive { depth },
            });
        }
        let basin = match o.basin.reanchor(c, depth) {
            Ok(b) => b,
            Err(e) if e.is_budget() => {
                return Ok(AttractionReport {
                    checks,
                    verdict: AttractionVerdict::Inconclusive { depth },
                })
            }
            Err(e) => return Err(e),
        };
        let stable = forward_stable(c, &basin)?;
        let circs = induced_circuits(c, depth, basin.cells())?;
        let unique_ok = circs.len() == 1 && projects_onto(c, depth, &circs[0].cells, o.level, &o.circuit)?;
        let ok = stable && unique_ok;
        checks.push(DepthCheck {
            depth,
            stable,
            circuits: circs.len(),
            ok,
        });
        if !ok {
            let reason = if !stable {
                "basin has an escaping edge".to_string()
            } else {
                format!("induced subgraph has {} circuits", circs.len())
            };
            return Ok(AttractionReport {
                checks,
                verdict: AttractionVerdict::Failed { depth, reason },
            });
        }
    }
    Ok(AttractionReport {
        checks,
        verdict: AttractionVerdict::Certified { depth: base + d_max },
    })
}

/// Blocks of `p` whose every reachable cycle lies in blocks projecting into
/// the orbit's circuit cells.
fn maximal_attracted(c: &Covering, p: &Partition, graph: &[Vec<u32>], o: &OrbitAnnotation) -> Result<Vec<bool>> {
    let proj = c.projection(p.depth(), o.level)?;
    let inside: Vec<bool> = p
        .blocks()
        .iter()
        .map(|b| b.iter().all(|&x| o.circuit.contains(&proj[x as usize])))
        .collect();
    let comp = scc(graph, None);
    let ncomp = comp.iter().map(|&x| x as usize + 1).max().unwrap_or(0);
    let cyclic = cyclic_vertices(graph, None);
    let mut good = vec![true; ncomp];
    let mut has_cycle = vec![false; ncomp];
    for b in 0..graph.len() {
        if cyclic[b] {
            has_cycle[comp[b] as usize] = true;
            if !inside[b] {
                good[comp[b] as usize] = false;
            }
        }
    }
    // Tarjan numbers components in reverse topological order
    let mut cdag: Vec<Vec<u32>> = vec![Vec::new(); ncomp];
    for (a, s) in graph.iter().enumerate() {
        for &b in s {
            if comp[a] != comp[b as usize] {
                cdag[comp[a] as usize].push(comp[b as usize]);
            }
        }
    }
    let mut ok = vec![true; ncomp];
    for ci in 0..ncomp {
        let mut v = !has_cycle[ci] || good[ci];
        for &d in &cdag[ci] {
            v &= ok[d as usize];
        }
        ok[ci] = v;
    }
    Ok((0..graph.len()).map(|b| ok[comp[b] as usize]).collect())
}

/// Circuits of length |p| inside `mask` projecting onto the orbit circuit.
fn orbit_circuits(
    c: &Covering,
    p: &Partition,
    graph: &[Vec<u32>],
    mask: &[bool],
    o: &OrbitAnnotation,
) -> Result<Vec<Circuit>> {
    let proj = c.projection(p.depth(), o.level)?;
    let found = short_circuits(graph, o.period, &|b| mask[b as usize]);
    let mut out = Vec::new();
    for circ in found {
        if circ.len() != o.period {
            continue;
        }
        let cells: Vec<u32> = circ.cells.iter().map(|&b| p.block(b as usize)[0]).collect();
        let single = circ.cells.iter().all(|&b| {
            let blk = p.block(b as usize);
            blk.iter().all(|&x| proj[x as usize] == proj[blk[0] as usize])
        });
        let k = o.period;
        let pc: Vec<u32> = cells.iter().map(|&x| proj[x as usize]).collect();
        if single && (0..k).any(|r| (0..k).all(|i| pc[i] == o.circuit[(i + r) % k])) {
            out.push(circ);
        }
    }
    Ok(out)
}

/// Attracted sets of every declared orbit admitted by `tau`, over `p`.
pub fn supercyclical_structure(c: &Covering, p: &Partition, tau: Tau) -> Result<SupercyclicalLevel> {
    let graph = quotient_adjacency(c, p)?;
    let mut orbit_of: Vec<Option<u32>> = vec![None; p.len()];
    for (i, o) in c.orbits().iter().enumerate() {
        if !tau.admits(o.period) {
            continue;
        }
        assign_orbit(c, p, &graph, i, o, &mut orbit_of)?;
    }
    let level = SupercyclicalLevel {
        partition: p.clone(),
        tau,
        orbit_of,
        graph,
    };
    check_undeclared(c, &level)?;
    Ok(level)
}

fn assign_orbit(
    c: &Covering,
    p: &Partition,
    graph: &[Vec<u32>],
    i: usize,
    o: &OrbitAnnotation,
    orbit_of: &mut [Option<u32>],
) -> Result<()> {
    if p.depth() < o.level {
        return Err(Error::precondition(format!(
            "partition depth {} is coarser than orbit {i} level {}",
            p.depth(),
            o.level
        )));
    }
    let m = maximal_attracted(c, p, graph, o)?;
    if orbit_circuits(c, p, graph, &m, o)?.is_empty() {
        return Err(Error::NotPurelyAttracting {
            depth: p.depth(),
            detail: format!("orbit {i} (period {}) has no stable attracted block set", o.period),
        });
    }
    for (b, &inm) in m.iter().enumerate() {
        if inm {
            if let Some(j) = orbit_of[b] {
                return Err(Error::invariant(format!("orbits {j} and {i} share an attracted block")));
            }
            orbit_of[b] = Some(i as u32);
        }
    }
    Ok(())
}

/// Refuses structures whose supercyclical part carries a persistent circuit
/// short enough to be admitted by tau.
fn check_undeclared(c: &Covering, s: &SupercyclicalLevel) -> Result<()> {
    let k = match s.tau {
        Tau::Finite(t) => (t as usize).min(UNDECLARED_SEARCH_CAP),
        Tau::Infinite => UNDECLARED_SEARCH_CAP,
    };
    if k == 0 {
        return Ok(());
    }
    let m = s.depth();
    let deeper = m + 1;
    if !c.can_reach(deeper) {
        return Ok(());
    }
    let g = c.level(deeper)?;
    let bond = c.bond(m)?;
    let inside: Vec<bool> = (0..g.len())
        .map(|x| !s.is_attracted(s.partition.block_of(bond[x]) as usize))
        .collect();
    for circ in short_circuits(g.adjacency(), k, &|x| inside[x as usize]) {
        let mut below: Vec<u32> = circ.cells.iter().map(|&x| bond[x as usize]).collect();
        below.sort_unstable();
        below.dedup();
        if below.len() == circ.len() {
            let names: Vec<String> = circ.cells.iter().map(|&x| g.name(x).to_string()).collect();
            return Err(Error::NotPurelyAttracting {
                depth: deeper,
                detail: format!(
                    "undeclared circuit of length {} in the supercyclical part: [{}]",
                    circ.len(),
                    names.join(", ")
                ),
            });
        }
    }
    Ok(())
}

/// Raises the order past the next declared period, refining the
/// supercyclical part into base cells.
pub fn raise_order(s: &SupercyclicalLevel, c: &Covering) -> Result<SupercyclicalLevel> {
    let Tau::Finite(t) = s.tau else {
        return Err(Error::precondition("order is already infinite"));
    };
    let next = c.orbits().iter().map(|o| o.period as u64).filter(|&q| q > t).min();
    let Some(next) = next else {
        let mut out = s.clone();
        out.tau = Tau::Infinite;
        return Ok(out);
    };
    let after = c.orbits().iter().map(|o| o.period as u64).filter(|&q| q > next).min();
    let tau = after.map_or(Tau::Infinite, |a| Tau::Finite(a - 1));
    let targets: Vec<usize> = (0..c.orbits().len())
        .filter(|&i| c.orbits()[i].period as u64 == next)
        .collect();
    let mut depth = s.depth();
    for &i in &targets {
        let o = &c.orbits()[i];
        depth = depth.max(o.level).max(o.basin.depth());
    }
    let old = s.partition.reanchor(c, depth)?;
    let old_of: Vec<Option<u32>> = (0..old.len())
        .map(|b| {
            let x = old.block(b)[0];
            let orig = s
                .partition
                .block_of(c.ancestor(depth, x, s.depth()).expect("reachable"));
            s.orbit_of[orig as usize]
        })
        .collect();
    for &i in &targets {
        let o = &c.orbits()[i];
        let basin = o.basin.reanchor(c, depth)?;
        if basin
            .cells()
            .iter()
            .any(|&x| old_of[old.block_of(x) as usize].is_some())
        {
            return Err(Error::precondition(format!(
                "basin of orbit {i} meets the attracted part"
            )));
        }
    }
    let mut block_of = vec![0u32; old.block_map().len()];
    let mut next_id = 0u32;
    let mut attracted_id = vec![u32::MAX; old.len()];
    for x in 0..block_of.len() {
        let b = old.block_of(x as u32) as usize;
        if old_of[b].is_some() {
            if attracted_id[b] == u32::MAX {
                attracted_id[b] = next_id;
                next_id += 1;
            }
            block_of[x] = attracted_id[b];
        } else {
            block_of[x] = next_id;
            next_id += 1;
        }
    }
    let part = Partition::from_block_of(depth, block_of)?;
    let graph = quotient_adjacency(c, &part)?;
    let mut orbit_of: Vec<Option<u32>> = (0..part.len())
        .map(|b| old_of[old.block_of(part.block(b)[0]) as usize])
        .collect();
    for &i in &targets {
        let o = &c.orbits()[i];
        let m = maximal_attracted(c, &part, &graph, o)?;
        let free: Vec<bool> = (0..part.len()).map(|b| m[b] && orbit_of[b].is_none()).collect();
        if orbit_circuits(c, &part, &graph, &free, o)?.is_empty() {
            return Err(Error::NotPurelyAttracting {
                depth,
                detail: format!("orbit {i} (period {}) has no stable attracted block set", o.period),
            });
        }
        for b in 0..part.len() {
            if free[b] {
                orbit_of[b] = Some(i as u32);
            }
        }
    }
    let out = SupercyclicalLevel {
        partition: part,
        tau,
        orbit_of,
        graph,
    };
    check_undeclared(c, &out)?;
    Ok(out)
}

/// Longest circuit inside the supercyclical blocks; 0 if none.
pub fn eta(s: &SupercyclicalLevel) -> Result<usize> {
    let mask = s.supercyclical_mask();
    Ok(circuits_in(&s.graph, Some(&mask), CIRCUIT_LIMIT)?
        .iter()
        .map(Circuit::len)
        .max()
        .unwrap_or(0))
}

/// Circuit and in-tree data of each attracted set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttractedShape {
    /// Distance to the circuit for attracted blocks.
    pub delta: Vec<Option<usize>>,
    /// Per orbit index: circuit blocks in cyclic order, and ω.
    pub circuits: Vec<(u32, Vec<u32>, usize)>,
    pub on_circuit: Vec<bool>,
}

/// δ for every attracted block and ω per orbit. Requires each attracted
/// subgraph to be one circuit plus in-trees.
pub fn delta_omega(s: &SupercyclicalLevel) -> Result<AttractedShape> {
    let n = s.len();
    let mut delta: Vec<Option<usize>> = vec![None; n];
    let mut on_circuit = vec![false; n];
    let mut circuits = Vec::new();
    for orbit in s.orbits_present() {
        let blocks = s.attracted(orbit as usize);
        let mask: Vec<bool> = (0..n).map(|b| s.orbit_of[b] == Some(orbit)).collect();
        let circs = circuits_in(&s.graph, Some(&mask), 4)?;
        if circs.len() != 1 {
            return Err(Error::invariant(format!(
                "attracted set of orbit {orbit} has {} circuits",
                circs.len()
            )));
        }
        let circ = &circs[0].cells;
        for &b in circ {
            on_circuit[b as usize] = true;
            delta[b as usize] = Some(0);
        }
        for &b in &blocks {
            if !on_circuit[b as usize] && s.graph[b as usize].len() != 1 {
                return Err(Error::invariant(format!(
                    "attracted block {b} of orbit {orbit} has out-degree {}",
                    s.graph[b as usize].len()
                )));
            }
        }
        let mut omega = 0;
        for &b in &blocks {
            let mut path = Vec::new();
            let mut x = b;
            while delta[x as usize].is_none() {
                path.push(x);
                x = s.graph[x as usize][0];
                if !mask[x as usize] || path.len() > n {
                    return Err(Error::invariant(format!("attracted block {b} escapes its set")));
                }
            }
            let mut dx = delta[x as usize].expect("resolved");
            for &y in path.iter().rev() {
                dx += 1;
                delta[y as usize] = Some(dx);
            }
            omega = omega.max(delta[b as usize].expect("resolved"));
        }
        circuits.push((orbit, circ.clone(), omega));
    }
    Ok(AttractedShape {
        delta,
        circuits,
        on_circuit,
    })
}

/// Repartitions every attracted set into backward preimage layers of its
/// circuit core, one base level below the partition (`n` levels).
pub fn kappa(s: &SupercyclicalLevel, c: &Covering, n: usize) -> Result<SupercyclicalLevel> {
    if n == 0 {
        return Err(Error::precondition("kappa needs n >= 1"));
    }
    let m = s.depth();
    let mut pieces: Vec<(ClopenSet, u32)> = Vec::new();
    for orbit in s.orbits_present() {
        let o = &c.orbits()[orbit as usize];
        for piece in layer_orbit(s, c, o, orbit, m + n)? {
            pieces.push((piece, orbit));
        }
    }
    let mut anchor = m;
    for (p, _) in &pieces {
        anchor = anchor.max(p.depth());
    }
    let mut block_of = vec![u32::MAX; c.level(anchor)?.len()];
    let proj = c.projection(anchor, m)?;
    let mut orbit_of_id: Vec<Option<u32>> = Vec::new();
    let mut id = 0u32;
    let mut super_id = vec![u32::MAX; s.len()];
    for (x, slot) in block_of.iter_mut().enumerate() {
        let b = s.partition.block_of(proj[x]) as usize;
        if !s.is_attracted(b) {
            if super_id[b] == u32::MAX {
                super_id[b] = id;
                orbit_of_id.push(None);
                id += 1;
            }
            *slot = super_id[b];
        }
    }
    for (p, orbit) in &pieces {
        let cells = p.reanchor(c, anchor)?;
        for &x in cells.cells() {
            if block_of[x as usize] != u32::MAX {
                return Err(Error::invariant("backward layers overlap"));
            }
            block_of[x as usize] = id;
        }
        orbit_of_id.push(Some(*orbit));
        id += 1;
    }
    if block_of.contains(&u32::MAX) {
        return Err(Error::invariant("backward layers do not cover the attracted part"));
    }
    let part = Partition::from_block_of(anchor, block_of.clone())?;
    let orbit_of: Vec<Option<u32>> = (0..part.len())
        .map(|b| orbit_of_id[block_of[part.block(b)[0] as usize] as usize])
        .collect();
    let out = SupercyclicalLevel::from_parts(c, part, s.tau, orbit_of)?;
    delta_omega(&out)?;
    Ok(out)
}

/// Core w and its backward layers for one orbit; `base` is the depth of the
/// cells v used to split layers.
fn layer_orbit(
    s: &SupercyclicalLevel,
    c: &Covering,
    o: &OrbitAnnotation,
    orbit: u32,
    base: usize,
) -> Result<Vec<ClopenSet>> {
    let m = s.depth();
    let blocks = s.attracted(orbit as usize);
    let mut region_cells: Vec<u32> = Vec::new();
    for &b in &blocks {
        region_cells.extend_from_slice(s.partition.block(b as usize));
    }
    let region = ClopenSet::new(m, region_cells);
    let mut depth = base;
    let (core, core_parts) = loop {
        if let Some(found) = try_core(s, c, o, &region, depth)? {
            break found;
        }
        depth += 1;
        c.ensure(depth)?;
    };
    let region_d = region.reanchor(c, depth)?;
    let mut out: Vec<ClopenSet> = core_parts.clone();
    let mut frontier: Vec<ClopenSet> = Vec::new();
    for w in &core_parts {
        let pre = preimage_canonical(c, w)?
            .difference(&core, c)?
            .intersection(&region, c)?;
        frontier.extend(split_by_cells(c, &pre, depth)?);
    }
    let limit = region_d.len() * 4 + 64;
    let mut rounds = 0;
    while !frontier.is_empty() {
        rounds += 1;
        if rounds > limit {
            return Err(Error::Budget {
                requested: rounds,
                budget: limit,
            });
        }
        let mut next = Vec::new();
        for x in &frontier {
            let pre = preimage_canonical(c, x)?.intersection(&region, c)?;
            next.extend(split_by_cells(c, &pre, depth)?);
        }
        out.append(&mut frontier);
        frontier = next;
    }
    let mut all = ClopenSet::empty(1);
    for p in &out {
        all = all.union(p, c)?;
    }
    if !all.same_set(&region, c)? {
        return Err(Error::invariant(format!(
            "backward layers of orbit {orbit} miss part of its attracted set"
        )));
    }
    Ok(out)
}

/// Looks for the orbit's circuit among cells at `depth` and checks that its
/// forward closure splits along the circuit blocks into a cycle of sets.
fn try_core(
    s: &SupercyclicalLevel,
    c: &Covering,
    o: &OrbitAnnotation,
    region: &ClopenSet,
    depth: usize,
) -> Result<Option<(ClopenSet, Vec<ClopenSet>)>> {
    let g = c.level(depth)?;
    let cells = region.reanchor(c, depth)?;
    let mut alive = vec![false; g.len()];
    for &x in cells.cells() {
        alive[x as usize] = true;
    }
    let found: Vec<Circuit> = short_circuits(g.adjacency(), o.period, &|x| alive[x as usize])
        .into_iter()
        .filter(|ci| ci.len() == o.period)
        .collect();
    let mut lifts = Vec::new();
    for ci in found {
        if projects_onto(c, depth, &ci.cells, o.level, &o.circuit)? {
            lifts.push(ci);
        }
    }
    if lifts.len() != 1 {
        return Ok(None);
    }
    let lift = &lifts[0].cells;
    let closure = crate::clopen::reach(&g, lift);
    let proj = c.projection(depth, s.depth())?;
    let k = lift.len();
    let hat: Vec<u32> = lift.iter().map(|&x| s.partition.block_of(proj[x as usize])).collect();
    let mut distinct = hat.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != k {
        return Ok(None);
    }
    let mut parts: Vec<Vec<u32>> = vec![Vec::new(); k];
    for &x in &closure {
        let b = s.partition.block_of(proj[x as usize]);
        let Some(l) = hat.iter().position(|&h| h == b) else {
            return Ok(None);
        };
        parts[l].push(x);
    }
    for (l, part) in parts.iter().enumerate() {
        for &x in part {
            if g.succ(x).iter().any(|y| !parts[(l + 1) % k].contains(y)) {
                return Ok(None);
            }
        }
    }
    let core = ClopenSet::new(depth, closure);
    let parts = parts.into_iter().map(|p| ClopenSet::new(depth, p)).collect();
    Ok(Some((core, parts)))
}

/// Splits a set along the base cells at `depth`.
fn split_by_cells(c: &Covering, set: &ClopenSet, depth: usize) -> Result<Vec<ClopenSet>> {
    if set.is_empty() {
        return Ok(Vec::new());
    }
    if set.depth() <= depth {
        let at = set.reanchor(c, depth)?;
        return Ok(at.cells().iter().map(|&x| ClopenSet::new(depth, vec![x])).collect());
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for &x in set.cells() {
        groups.entry(c.ancestor(set.depth(), x, depth)?).or_default().push(x);
    }
    groups
        .into_values()
        .map(|cells| ClopenSet::new(set.depth(), cells).canonical(c))
        .collect()
}
