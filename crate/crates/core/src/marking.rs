//! Krieger markers on the supercyclical part and well-marked partitions.

use serde::{Deserialize, Serialize};

use crate::circuits::{circuits_in, CIRCUIT_LIMIT};
use crate::clopen::{preimage, preimage_canonical, ClopenSet, Partition};
use crate::covering::Covering;
use crate::dynamics::{eta, supercyclical_structure, SupercyclicalLevel, Tau};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Up,
    Star,
    Zero,
    Down,
}

impl Mark {
    pub fn symbol(self) -> char {
        match self {
            Mark::Up => '↑',
            Mark::Star => '*',
            Mark::Zero => '0',
            Mark::Down => '↓',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Up => "up",
            Mark::Star => "star",
            Mark::Zero => "zero",
            Mark::Down => "down",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Mark::Up),
            "star" => Ok(Mark::Star),
            "zero" => Ok(Mark::Zero),
            "down" => Ok(Mark::Down),
            _ => Err(Error::input(format!("unknown mark `{s}`"))),
        }
    }
}

/// Child/parent mark pairs allowed between consecutive levels.
pub const ALLOWED_WORDS: [(Mark, Mark); 5] = [
    (Mark::Star, Mark::Up),
    (Mark::Up, Mark::Up),
    (Mark::Down, Mark::Up),
    (Mark::Down, Mark::Star),
    (Mark::Down, Mark::Down),
];

pub fn word_allowed(child: Mark, parent: Mark) -> bool {
    ALLOWED_WORDS.contains(&(child, parent))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedLevel {
    pub structure: SupercyclicalLevel,
    pub chi: Vec<Mark>,
}

impl MarkedLevel {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.structure.depth()
    }

    pub fn tau(&self) -> Tau {
        self.structure.tau
    }

    pub fn partition(&self) -> &Partition {
        &self.structure.partition
    }

    pub fn stars(&self) -> Vec<u32> {
        (0..self.len() as u32)
            .filter(|&b| self.chi[b as usize] == Mark::Star)
            .collect()
    }
}

/// An (n, t, N)-marker F, anchored at the depth where it was built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerSet {
    pub set: ClopenSet,
    pub n: usize,
    pub t: usize,
    pub big_n: usize,
    /// Number of separated pieces covering the supercyclical part.
    pub pieces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MarkerCheck {
    pub separated: bool,
    pub covers: bool,
}

/// Whether F, f⁻¹F, ..., f⁻ⁿF are pairwise disjoint.
pub fn is_separated(c: &Covering, f: &ClopenSet, n: usize) -> Result<bool> {
    if f.is_empty() {
        return Ok(true);
    }
    let target = f.depth() + n;
    let mut layers = vec![f.reanchor(c, target)?];
    let mut cur = f.clone();
    for _ in 0..n {
        cur = preimage(c, &cur)?;
        layers.push(cur.reanchor(c, target)?);
    }
    let mut seen = vec![false; c.level(target)?.len()];
    for l in &layers {
        for &x in l.cells() {
            if std::mem::replace(&mut seen[x as usize], true) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Union of the supercyclical blocks.
pub fn supercyclical_set(level: &SupercyclicalLevel) -> ClopenSet {
    let mut cells = Vec::new();
    for b in level.supercyclical_blocks() {
        cells.extend_from_slice(level.partition.block(b as usize));
    }
    ClopenSet::new(level.depth(), cells)
}

/// Checks both marker conditions with plain clopen-set arithmetic.
pub fn check_marker(c: &Covering, level: &SupercyclicalLevel, m: &MarkerSet) -> Result<MarkerCheck> {
    let separated = is_separated(c, &m.set, m.n)?;
    let mut target = supercyclical_set(level).canonical(c)?;
    for _ in 0..m.t {
        target = preimage_canonical(c, &target)?;
    }
    let mut cover = m.set.canonical(c)?;
    let mut layer = cover.clone();
    for _ in 0..m.big_n {
        layer = preimage_canonical(c, &layer)?;
        cover = cover.union(&layer, c)?.canonical(c)?;
    }
    let covers = target.is_subset(&cover, c)?;
    Ok(MarkerCheck { separated, covers })
}

/// Preimage relation on supercyclical cells at one depth where f⁻¹ of each
/// such cell is a union of cells of that depth.
struct Relation {
    depth: usize,
    sup: Vec<bool>,
    pre: Vec<Vec<u32>>,
    post: Vec<Vec<u32>>,
    /// Cycle decomposition when `pre` is a permutation of the supercyclical cells.
    perm: Option<PermCycles>,
}

struct PermCycles {
    cycle_of: Vec<u32>,
    pos: Vec<u32>,
    cycles: Vec<Vec<u32>>,
}

impl Relation {
    fn build(c: &Covering, level: &SupercyclicalLevel, depth: usize) -> Result<Option<Self>> {
        let proj = c.projection(depth, level.depth())?;
        let n = proj.len();
        let sup: Vec<bool> = proj
            .iter()
            .map(|&x| !level.is_attracted(level.partition.block_of(x) as usize))
            .collect();
        let images = c.image_preimages(depth)?;
        let bond = c.bond(depth)?;
        let children = c.children(depth)?;
        let mut pre = vec![Vec::new(); n];
        for x in 0..n {
            if !sup[x] {
                continue;
            }
            let mut parents: Vec<u32> = images[x].iter().map(|&w| bond[w as usize]).collect();
            parents.sort_unstable();
            let total = parents.len();
            parents.dedup();
            let full: usize = parents.iter().map(|&p| children[p as usize].len()).sum();
            if full != total {
                return Ok(None);
            }
            if parents.iter().any(|&p| !sup[p as usize]) {
                return Err(Error::invariant("attracted cell maps into the supercyclical part"));
            }
            pre[x] = parents;
        }
        let mut post = vec![Vec::new(); n];
        for (x, ps) in pre.iter().enumerate() {
            for &p in ps {
                post[p as usize].push(x as u32);
            }
        }
        let perm = Self::cycles(&sup, &pre, &post);
        Ok(Some(Self {
            depth,
            sup,
            pre,
            post,
            perm,
        }))
    }

    fn cycles(sup: &[bool], pre: &[Vec<u32>], post: &[Vec<u32>]) -> Option<PermCycles> {
        let n = sup.len();
        if (0..n).any(|x| sup[x] && (pre[x].len() != 1 || post[x].len() != 1)) {
            return None;
        }
        let mut cycle_of = vec![u32::MAX; n];
        let mut pos = vec![0u32; n];
        let mut cycles = Vec::new();
        for s in 0..n {
            if !sup[s] || cycle_of[s] != u32::MAX {
                continue;
            }
            let id = cycles.len() as u32;
            let mut cyc = Vec::new();
            let mut x = s as u32;
            while cycle_of[x as usize] == u32::MAX {
                cycle_of[x as usize] = id;
                pos[x as usize] = cyc.len() as u32;
                cyc.push(x);
                x = pre[x as usize][0];
            }
            cycles.push(cyc);
        }
        Some(PermCycles { cycle_of, pos, cycles })
    }

    /// P^k of a set of cells.
    fn power(&self, set: &[u32], k: usize) -> Vec<u32> {
        if let Some(p) = &self.perm {
            let mut out: Vec<u32> = set
                .iter()
                .map(|&x| {
                    let cyc = &p.cycles[p.cycle_of[x as usize] as usize];
                    cyc[(p.pos[x as usize] as usize + k) % cyc.len()]
                })
                .collect();
            out.sort_unstable();
            out.dedup();
            return out;
        }
        let mut cur = set.to_vec();
        let mut seen: std::collections::HashMap<Vec<u32>, usize> = Default::default();
        let mut history: Vec<Vec<u32>> = Vec::new();
        for i in 0..k {
            if let Some(&j) = seen.get(&cur) {
                let period = i - j;
                return history[j + (k - j) % period].clone();
            }
            seen.insert(cur.clone(), i);
            history.push(cur.clone());
            cur = self.step(&cur, &self.pre);
        }
        cur
    }

    fn step(&self, set: &[u32], rel: &[Vec<u32>]) -> Vec<u32> {
        let mut out: Vec<u32> = set.iter().flat_map(|&x| rel[x as usize].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether `x ∉ P^i(x)` for i = 1..=n.
    fn cell_separated(&self, x: u32, n: usize) -> bool {
        if let Some(p) = &self.perm {
            return p.cycles[p.cycle_of[x as usize] as usize].len() > n;
        }
        let mut cur = vec![x];
        for _ in 0..n {
            cur = self.step(&cur, &self.pre);
            if cur.binary_search(&x).is_ok() {
                return false;
            }
            if cur.is_empty() {
                break;
            }
        }
        true
    }

    fn layers(&self, f: &[u32], count: usize) -> Vec<Vec<u32>> {
        let mut out = vec![f.to_vec()];
        for _ in 1..count {
            let next = self.step(out.last().expect("nonempty"), &self.pre);
            out.push(next);
        }
        out
    }
}

/// Smallest depth at or below `from` where the relation closes and every
/// supercyclical cell is (n+1)-separated.
fn separating_relation(c: &Covering, level: &SupercyclicalLevel, n: usize, from: usize) -> Result<Relation> {
    let mut depth = from.max(level.depth());
    loop {
        c.ensure(depth + 1)?;
        if let Some(rel) = Relation::build(c, level, depth)? {
            if (0..rel.sup.len() as u32).all(|x| !rel.sup[x as usize] || rel.cell_separated(x, n)) {
                return Ok(rel);
            }
        }
        depth += 1;
    }
}

/// Builds an (n, (n+1)m+n, 2n+1)-marker for the supercyclical part.
pub fn krieger_marker(level: &SupercyclicalLevel, c: &Covering, n: usize) -> Result<MarkerSet> {
    let rel = separating_relation(c, level, n, level.depth())?;
    marker_from_relation(&rel, n)
}

fn marker_from_relation(rel: &Relation, n: usize) -> Result<MarkerSet> {
    let cells: Vec<u32> = (0..rel.sup.len() as u32).filter(|&x| rel.sup[x as usize]).collect();
    if cells.is_empty() {
        return Err(Error::precondition("supercyclical part is empty"));
    }
    let m = cells.len();
    let shift = (n + 1) * m;
    let size = rel.sup.len();
    let mut in_f = vec![false; size];
    let mut window = vec![false; size];
    let mut f_cells: Vec<u32> = Vec::new();
    for &u in &cells {
        let shifted = rel.power(&[u], shift);
        let added: Vec<u32> = shifted.into_iter().filter(|&y| !window[y as usize]).collect();
        for &y in &added {
            if in_f[y as usize] {
                continue;
            }
            in_f[y as usize] = true;
            f_cells.push(y);
        }
        for &y in &added {
            let mut back = vec![y];
            let mut fwd = vec![y];
            window[y as usize] = true;
            for _ in 0..n {
                back = rel.step(&back, &rel.pre);
                fwd = rel.step(&fwd, &rel.post);
                for &z in back.iter().chain(&fwd) {
                    window[z as usize] = true;
                }
            }
        }
        if !relation_separated(rel, &f_cells, n) {
            return Err(Error::invariant("greedy marker step lost separation"));
        }
    }
    f_cells.sort_unstable();
    let t = shift + n;
    let big_n = 2 * n + 1;
    let target = rel.power(&cells, t);
    let mut covered = vec![false; size];
    for layer in rel.layers(&f_cells, big_n + 1) {
        for x in layer {
            covered[x as usize] = true;
        }
    }
    if target.iter().any(|&x| !covered[x as usize]) {
        return Err(Error::invariant(
            "marker layers miss part of the shifted supercyclical set",
        ));
    }
    Ok(MarkerSet {
        set: ClopenSet::new(rel.depth, f_cells),
        n,
        t,
        big_n,
        pieces: m,
    })
}

fn relation_separated(rel: &Relation, f: &[u32], n: usize) -> bool {
    let mut seen = vec![false; rel.sup.len()];
    for layer in rel.layers(f, n + 1) {
        for x in layer {
            if std::mem::replace(&mut seen[x as usize], true) {
                return false;
            }
        }
    }
    true
}

/// Mark data of the level being refined; the bootstrap uses a virtual
/// one-block level whose only block is a potential.
struct Predecessor<'a> {
    partition: Partition,
    chi: Vec<Mark>,
    tau: u64,
    eta: usize,
    level: Option<&'a MarkedLevel>,
}

/// A well-marked partition refining base level 1.
pub fn bootstrap_well_mark(c: &Covering) -> Result<MarkedLevel> {
    let pred = Predecessor {
        partition: Partition::trivial(c, 1)?,
        chi: vec![Mark::Up],
        tau: 0,
        eta: 1,
        level: None,
    };
    refine_marked(&pred, c, 1)
}

/// A level well-marked relative to `prev`, refining base level `n`.
pub fn well_mark_relative(prev: &MarkedLevel, c: &Covering, n: usize) -> Result<MarkedLevel> {
    let tau = match prev.tau() {
        Tau::Finite(t) => t,
        Tau::Infinite => u64::MAX,
    };
    let pred = Predecessor {
        partition: prev.partition().clone(),
        chi: prev.chi.clone(),
        tau,
        eta: eta(&prev.structure)?,
        level: Some(prev),
    };
    refine_marked(&pred, c, n)
}

fn refine_marked(pred: &Predecessor<'_>, c: &Covering, n: usize) -> Result<MarkedLevel> {
    let s = 2 * pred.eta;
    let tau = if pred.tau == u64::MAX {
        Tau::Infinite
    } else {
        Tau::Finite((pred.tau + 1).max(s as u64).max(n as u64))
    };
    let mut depth = pred.partition.depth().max(n);
    let first = supercyclical_structure(c, &Partition::singletons(c, depth)?, tau)?;
    if s == 0 || first.supercyclical_blocks().is_empty() {
        return finish(pred, c, first, &[], s)?.ok_or_else(|| Error::invariant("marking without runs cannot fail"));
    }
    let rel = separating_relation(c, &first, s, depth)?;
    let marker = marker_from_relation(&rel, s)?;
    let layers = rel.layers(marker.set.cells(), s);
    let mut idx_e = vec![u32::MAX; rel.sup.len()];
    for (l, layer) in layers.iter().enumerate() {
        for &x in layer {
            idx_e[x as usize] = l as u32;
        }
    }
    depth = depth.max(rel.depth);
    loop {
        let structure = supercyclical_structure(c, &Partition::singletons(c, depth)?, tau)?;
        let proj = c.projection(depth, rel.depth)?;
        let idx: Vec<u32> = proj.iter().map(|&x| idx_e[x as usize]).collect();
        if let Some(level) = finish(pred, c, structure, &idx, s)? {
            return Ok(level);
        }
        depth += 1;
        c.ensure(depth)?;
    }
}

/// Assigns marks on singleton blocks; `idx[x] = l` when cell x lies in f⁻ˡF.
/// `None` when some circuit has no usable run at this depth.
fn finish(
    pred: &Predecessor<'_>,
    c: &Covering,
    structure: SupercyclicalLevel,
    idx: &[u32],
    s: usize,
) -> Result<Option<MarkedLevel>> {
    let n = structure.len();
    let parent = structure.partition.parent_map(&pred.partition, c)?;
    let mut chi: Vec<Mark> = (0..n)
        .map(|b| {
            if structure.is_attracted(b) {
                Mark::Zero
            } else {
                Mark::Down
            }
        })
        .collect();
    if s > 0 {
        let mask = structure.supercyclical_mask();
        let circs = circuits_in(&structure.graph, Some(&mask), CIRCUIT_LIMIT)?;
        let cell = |b: u32| structure.partition.block(b as usize)[0];
        let eta = pred.eta;
        for circ in &circs {
            let cyc = &circ.cells;
            let len = cyc.len();
            let mut done = false;
            for start in 0..len {
                if idx[cell(cyc[start]) as usize] != (s - 1) as u32 {
                    continue;
                }
                let run: Vec<u32> = (0..s).map(|k| cyc[(start + k) % len]).collect();
                let follows = s <= len
                    && run
                        .iter()
                        .enumerate()
                        .all(|(k, &b)| idx[cell(b) as usize] == (s - 1 - k) as u32);
                if !follows {
                    continue;
                }
                let first = &run[..eta];
                let second = &run[s - eta..];
                let pick = |w: &[u32], chi: &[Mark], want: Mark| -> Option<Option<u32>> {
                    if w.iter().any(|&b| chi[b as usize] == want) {
                        return Some(None);
                    }
                    w.iter()
                        .copied()
                        .filter(|&b| pred.chi[parent[b as usize] as usize] == Mark::Up)
                        .min_by_key(|&b| cell(b))
                        .map(Some)
                };
                let (Some(star), Some(up)) = (pick(first, &chi, Mark::Star), pick(second, &chi, Mark::Up)) else {
                    continue;
                };
                if let Some(b) = star {
                    chi[b as usize] = Mark::Star;
                }
                if let Some(b) = up {
                    if chi[b as usize] == Mark::Star {
                        return Err(Error::invariant("marker and potential windows overlap"));
                    }
                    chi[b as usize] = Mark::Up;
                }
                done = true;
                break;
            }
            if !done {
                return Ok(None);
            }
        }
    }
    let level = MarkedLevel { structure, chi };
    let bad = well_marked_violations(&level, c)?;
    if let Some(v) = bad.first() {
        return Err(Error::invariant(format!("marked level is not well marked: {v}")));
    }
    if let Some(prev) = pred.level {
        if let Some((b, w)) = relative_violations(&level, prev, c)?.first() {
            return Err(Error::invariant(format!("block {b} carries the word {w}")));
        }
    }
    Ok(Some(level))
}

/// Violations of the well-marking conditions, as messages.
pub fn well_marked_violations(level: &MarkedLevel, c: &Covering) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let s = &level.structure;
    let ids = s.partition.block_ids(c)?;
    for b in 0..level.len() {
        let zero = level.chi[b] == Mark::Zero;
        if zero != s.is_attracted(b) {
            out.push(format!(
                "block {} has mark {} but attracted = {}",
                ids[b],
                level.chi[b].as_str(),
                s.is_attracted(b)
            ));
        }
    }
    let mask = s.supercyclical_mask();
    for circ in circuits_in(&s.graph, Some(&mask), CIRCUIT_LIMIT)? {
        let has = |m: Mark| circ.cells.iter().any(|&b| level.chi[b as usize] == m);
        if !has(Mark::Star) || !has(Mark::Up) {
            let names: Vec<&str> = circ.cells.iter().map(|&b| ids[b as usize].as_str()).collect();
            out.push(format!("circuit [{}] lacks a marker or a potential", names.join(", ")));
        }
    }
    Ok(out)
}

/// Supercyclical child blocks whose word with the parent mark is not allowed.
pub fn relative_violations(child: &MarkedLevel, parent: &MarkedLevel, c: &Covering) -> Result<Vec<(String, String)>> {
    let map = child.partition().parent_map(parent.partition(), c)?;
    let ids = child.partition().block_ids(c)?;
    let mut out = Vec::new();
    for b in 0..child.len() {
        if child.structure.is_attracted(b) {
            continue;
        }
        let (x, y) = (child.chi[b], parent.chi[map[b] as usize]);
        if !word_allowed(x, y) {
            out.push((ids[b].clone(), format!("{}{}", x.symbol(), y.symbol())));
        }
    }
    Ok(out)
}
