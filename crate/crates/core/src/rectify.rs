//! Acyclic cuts, divergent-vertex displacement and the marked partition
//! sequence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::circuits::topo_order;
use crate::clopen::Partition;
use crate::covering::Covering;
use crate::dynamics::{kappa, SupercyclicalLevel};
use crate::error::{Error, Result};
use crate::marking::{
    bootstrap_well_mark, relative_violations, well_mark_relative, well_marked_violations, Mark, MarkedLevel,
};

/// The cut graph: blocks outside ℛ plus one copy per marker, which takes
/// over the marker's incoming edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcyclicView {
    pub blocks: usize,
    /// Whether each block survives the removal of ℛ.
    pub present: Vec<bool>,
    /// Original block of each copy vertex `blocks + i`.
    pub copy_of: Vec<u32>,
    /// Adjacency over blocks followed by copies.
    pub succ: Vec<Vec<u32>>,
    pub removed: Vec<u32>,
    pub removed_edges: Vec<(u32, u32)>,
    pub chi: Vec<Mark>,
}

impl AcyclicView {
    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn alive(&self) -> Vec<bool> {
        let mut a = self.present.clone();
        a.resize(self.vertex_count(), true);
        a
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertex_count()];
        for s in &self.succ {
            for &w in s {
                d[w as usize] += 1;
            }
        }
        d
    }

    pub fn is_divergent(&self, v: u32) -> bool {
        self.succ[v as usize].len() >= 2
    }

    /// Copy vertex of a marker block, if any.
    pub fn copy(&self, block: u32) -> Option<u32> {
        self.copy_of
            .iter()
            .position(|&b| b == block)
            .map(|i| (self.blocks + i) as u32)
    }
}

/// Builds the cut graph and checks that it is acyclic.
pub fn build_acyclic_view(level: &MarkedLevel) -> Result<AcyclicView> {
    let g = &level.structure.graph;
    let chi = &level.chi;
    let n = g.len();
    let mut fed = vec![false; n];
    for (v, s) in g.iter().enumerate() {
        if chi[v] != Mark::Zero && s.len() >= 2 {
            for &w in s {
                fed[w as usize] = true;
            }
        }
    }
    let removed_mask: Vec<bool> = (0..n).map(|u| chi[u] == Mark::Zero && !fed[u]).collect();
    let present: Vec<bool> = removed_mask.iter().map(|r| !r).collect();
    let copy_of: Vec<u32> = (0..n as u32)
        .filter(|&u| present[u as usize] && chi[u as usize] == Mark::Star)
        .collect();
    let mut copy_index = vec![u32::MAX; n];
    for (i, &u) in copy_of.iter().enumerate() {
        copy_index[u as usize] = (n + i) as u32;
    }
    let mut succ = vec![Vec::new(); n + copy_of.len()];
    let mut removed_edges = Vec::new();
    for (u, s) in g.iter().enumerate() {
        for &v in s {
            let vi = v as usize;
            let zero_pair = chi[u] == Mark::Zero && chi[vi] == Mark::Zero;
            if removed_mask[vi] || zero_pair || removed_mask[u] {
                removed_edges.push((u as u32, v));
                continue;
            }
            let target = if copy_index[vi] != u32::MAX { copy_index[vi] } else { v };
            succ[u].push(target);
        }
    }
    let mut view_chi = chi.clone();
    view_chi.extend(copy_of.iter().map(|_| Mark::Star));
    let view = AcyclicView {
        blocks: n,
        present,
        copy_of,
        succ,
        removed: (0..n as u32).filter(|&u| removed_mask[u as usize]).collect(),
        removed_edges,
        chi: view_chi,
    };
    if topo_order(&view.succ, Some(&view.alive())).is_none() {
        return Err(Error::invariant("cut graph has a cycle: level is not well marked"));
    }
    Ok(view)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DescentMeasure {
    pub delta: usize,
    pub mu: usize,
    /// Divergent vertices at distance `delta`, ascending.
    pub realizers: Vec<u32>,
}

impl DescentMeasure {
    pub fn key(&self) -> (usize, usize) {
        (self.delta, self.mu)
    }
}

/// Distance from the nearest initial vertex, for every vertex.
pub fn initial_distances(v: &AcyclicView) -> Vec<usize> {
    let alive = v.alive();
    let indeg = v.in_degrees();
    let mut dist = vec![usize::MAX; v.vertex_count()];
    let mut queue = VecDeque::new();
    for x in 0..v.vertex_count() {
        if alive[x] && indeg[x] == 0 {
            dist[x] = 0;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &v.succ[x] {
            let y = y as usize;
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Largest distance from the initial vertices to a divergent vertex, and
/// the number of divergent vertices attaining it.
pub fn delta_mu(v: &AcyclicView) -> DescentMeasure {
    let dist = initial_distances(v);
    let alive = v.alive();
    let mut delta = 0;
    let mut realizers = Vec::new();
    for x in 0..v.vertex_count() {
        if !alive[x] || !v.is_divergent(x as u32) || dist[x] == 0 {
            continue;
        }
        match dist[x].cmp(&delta) {
            std::cmp::Ordering::Greater => {
                delta = dist[x];
                realizers = vec![x as u32];
            }
            std::cmp::Ordering::Equal => realizers.push(x as u32),
            std::cmp::Ordering::Less => {}
        }
    }
    DescentMeasure {
        delta,
        mu: realizers.len(),
        realizers,
    }
}

/// Rebuilds a level over a new partition; `origin[b]` is the old block
/// containing new block b.
fn carry(level: &MarkedLevel, c: &Covering, partition: Partition, origin: &[u32]) -> Result<MarkedLevel> {
    let orbit_of = origin.iter().map(|&o| level.structure.orbit_of[o as usize]).collect();
    let chi = origin.iter().map(|&o| level.chi[o as usize]).collect();
    let structure = SupercyclicalLevel::from_parts(c, partition, level.structure.tau, orbit_of)?;
    Ok(MarkedLevel { structure, chi })
}

/// Splits block `v` into its pieces v ∩ f⁻¹(w), one per out-neighbour w,
/// going one level deeper only when needed.
pub fn split_block(level: &MarkedLevel, v: u32, c: &Covering) -> Result<MarkedLevel> {
    let p = level.partition();
    let m = p.depth();
    let g = c.level(m)?;
    let cells = p.block(v as usize);
    let shallow: Option<Vec<(u32, u32)>> = cells
        .iter()
        .map(|&x| {
            let mut t: Vec<u32> = g.succ(x).iter().map(|&y| p.block_of(y)).collect();
            t.dedup();
            t.sort_unstable();
            t.dedup();
            (t.len() == 1).then(|| (x, t[0]))
        })
        .collect();
    let (depth, groups) = match shallow {
        Some(g) => (m, g),
        None => {
            let ch = c.children(m)?;
            let im = c.image(m)?;
            let mut out = Vec::new();
            for &x in cells {
                for &y in &ch[x as usize] {
                    out.push((y, p.block_of(im[y as usize])));
                }
            }
            (m + 1, out)
        }
    };
    let mut targets: Vec<u32> = groups.iter().map(|&(_, t)| t).collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() < 2 {
        return Err(Error::invariant(format!(
            "block {v} does not split along its out-edges"
        )));
    }
    let proj = c.projection(depth, m)?;
    let mut block_of: Vec<u32> = proj.iter().map(|&x| p.block_of(x)).collect();
    let base = p.len() as u32;
    for &(x, t) in &groups {
        let k = targets.binary_search(&t).expect("target") as u32;
        if k > 0 {
            block_of[x as usize] = base + k - 1;
        }
    }
    let partition = Partition::from_block_of(depth, block_of)?;
    let origin: Vec<u32> = partition
        .blocks()
        .iter()
        .map(|b| p.block_of(proj[b[0] as usize]))
        .collect();
    carry(level, c, partition, &origin)
}

/// One displacement step on a divergent vertex realizing δ > 0.
pub fn displace(level: &MarkedLevel, target: u32, c: &Covering) -> Result<MarkedLevel> {
    let view = build_acyclic_view(level)?;
    let before = delta_mu(&view);
    if before.delta == 0 || !before.realizers.contains(&target) {
        return Err(Error::precondition(format!(
            "block {target} is not a divergent vertex realizing delta"
        )));
    }
    let out = split_block(level, target, c)?;
    let after = delta_mu(&build_acyclic_view(&out)?);
    if after.key() >= before.key() {
        return Err(Error::invariant(format!(
            "displacement did not decrease (delta, mu): {:?} -> {:?}",
            before.key(),
            after.key()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentStep {
    pub delta: usize,
    pub mu: usize,
    /// Block split at this step; `None` on the final measurement.
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rectified {
    pub level: MarkedLevel,
    pub log: Vec<DescentStep>,
    /// Initial divergent blocks split after the descent.
    pub initial_splits: Vec<String>,
}

/// Moves every divergence onto markers: κ₁, then displacement until δ = 0,
/// then splitting of initial divergent non-markers.
pub fn rectify_level(level: &MarkedLevel, c: &Covering) -> Result<Rectified> {
    let k = kappa(&level.structure, c, 1)?;
    let origin = k.partition.parent_map(level.partition(), c)?;
    let chi: Vec<Mark> = (0..k.len())
        .map(|b| {
            if k.is_attracted(b) {
                Mark::Zero
            } else {
                level.chi[origin[b] as usize]
            }
        })
        .collect();
    let mut cur = MarkedLevel { structure: k, chi };
    let mut log = Vec::new();
    let first = delta_mu(&build_acyclic_view(&cur)?);
    let limit = cur.len().max(1) * first.delta.max(1) * 4;
    loop {
        let view = build_acyclic_view(&cur)?;
        let m = delta_mu(&view);
        if m.delta == 0 {
            log.push(DescentStep {
                delta: 0,
                mu: 0,
                split: None,
            });
            break;
        }
        if log.len() >= limit {
            return Err(Error::invariant(format!(
                "descent did not terminate within {limit} steps"
            )));
        }
        let target = m.realizers[0];
        let ids = cur.partition().block_ids(c)?;
        log.push(DescentStep {
            delta: m.delta,
            mu: m.mu,
            split: Some(ids[target as usize].clone()),
        });
        cur = displace(&cur, target, c)?;
    }
    let mut initial_splits = Vec::new();
    loop {
        let view = build_acyclic_view(&cur)?;
        let indeg = view.in_degrees();
        let next = (0..view.blocks as u32).find(|&v| {
            view.present[v as usize]
                && indeg[v as usize] == 0
                && view.is_divergent(v)
                && cur.chi[v as usize] != Mark::Star
        });
        let Some(v) = next else { break };
        initial_splits.push(cur.partition().block_ids(c)?[v as usize].clone());
        cur = split_block(&cur, v, c)?;
    }
    if let Some(v) = well_marked_violations(&cur, c)?.first() {
        return Err(Error::invariant(format!("rectified level is not well marked: {v}")));
    }
    let back = cur.partition().parent_map(level.partition(), c)?;
    for b in 0..cur.len() {
        if !cur.structure.is_attracted(b) && cur.chi[b] != level.chi[back[b] as usize] {
            return Err(Error::invariant("rectification changed an inherited mark"));
        }
    }
    if let Some(b) = non_marker_divergent(&cur).first() {
        return Err(Error::invariant(format!(
            "divergent block {b} is not a marker after rectification"
        )));
    }
    Ok(Rectified {
        level: cur,
        log,
        initial_splits,
    })
}

/// Divergent blocks not marked as markers.
pub fn non_marker_divergent(level: &MarkedLevel) -> Vec<u32> {
    (0..level.len() as u32)
        .filter(|&b| level.structure.graph[b as usize].len() >= 2 && level.chi[b as usize] != Mark::Star)
        .collect()
}

/// Levels of the marked partition sequence with the descent log of each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedCovering {
    pub levels: Vec<MarkedLevel>,
    pub logs: Vec<Vec<DescentStep>>,
}

impl MarkedCovering {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, n: usize) -> &MarkedLevel {
        &self.levels[n - 1]
    }

    /// Trace lines: level, δ, μ and the split block of every iteration.
    pub fn trace(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, log) in self.logs.iter().enumerate() {
            for s in log {
                out.push(format!(
                    "level {} delta={} mu={} split={}",
                    i + 1,
                    s.delta,
                    s.mu,
                    s.split.as_deref().unwrap_or("-")
                ));
            }
        }
        out
    }
}

/// Levels 1..=N: each level is the rectified relative well-marking of the
/// previous one.
pub fn build_marked_sequence(c: &Covering, depth: usize) -> Result<MarkedCovering> {
    if depth == 0 {
        return Err(Error::precondition("depth must be at least 1"));
    }
    let mut levels = Vec::new();
    let mut logs = Vec::new();
    let first = bootstrap_well_mark(c).map_err(|e| e.at("level 1"))?;
    let r = rectify_level(&first, c).map_err(|e| e.at("level 1"))?;
    levels.push(r.level);
    logs.push(r.log);
    for n in 2..=depth {
        let stage = format!("level {n}");
        let prev = levels.last().expect("nonempty");
        let marked = well_mark_relative(prev, c, n).map_err(|e| e.at(&stage))?;
        let r = rectify_level(&marked, c).map_err(|e| e.at(&stage))?;
        if let Some((b, w)) = relative_violations(&r.level, prev, c)?.first() {
            return Err(Error::invariant(format!("block {b} carries the word {w}")).at(&stage));
        }
        levels.push(r.level);
        logs.push(r.log);
    }
    Ok(MarkedCovering { levels, logs })
}
