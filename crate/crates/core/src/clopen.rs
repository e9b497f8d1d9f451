//! Clopen sets and partitions, anchored at an explicit base depth.

use std::collections::VecDeque;

use crate::covering::Covering;
use crate::error::{Error, Result};
use crate::graph::LevelGraph;

/// A union of base cells at `depth`. Cells are sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClopenSet {
    depth: usize,
    cells: Vec<u32>,
}

impl ClopenSet {
    pub fn new(depth: usize, mut cells: Vec<u32>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { depth, cells }
    }

    pub fn empty(depth: usize) -> Self {
        Self {
            depth,
            cells: Vec::new(),
        }
    }

    pub fn full(c: &Covering, depth: usize) -> Result<Self> {
        Ok(Self {
            depth,
            cells: (0..c.level(depth)?.len() as u32).collect(),
        })
    }

    pub fn from_names(c: &Covering, depth: usize, names: &[String]) -> Result<Self> {
        let g = c.level(depth)?;
        let mut cells = Vec::with_capacity(names.len());
        for n in names {
            cells.push(
                g.index_of(n)
                    .ok_or_else(|| Error::input(format!("`{n}` is not a cell at depth {depth}")))?,
            );
        }
        Ok(Self::new(depth, cells))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains_cell(&self, cell: u32) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn names(&self, c: &Covering) -> Result<Vec<String>> {
        let g = c.level(self.depth)?;
        Ok(self.cells.iter().map(|&x| g.name(x).to_string()).collect())
    }

    /// Collapses sibling-complete families until none remain.
    pub fn canonical(&self, c: &Covering) -> Result<Self> {
        if self.cells.is_empty() {
            return Ok(Self::empty(1));
        }
        let mut cur = self.clone();
        while cur.depth > 1 {
            match cur.collapse(c)? {
                Some(up) => cur = up,
                None => break,
            }
        }
        Ok(cur)
    }

    /// The same set one level up, if it is a union of full fibres.
    fn collapse(&self, c: &Covering) -> Result<Option<Self>> {
        let d = self.depth - 1;
        let bond = c.bond(d)?;
        let children = c.children(d)?;
        let mut parents: Vec<u32> = self.cells.iter().map(|&x| bond[x as usize]).collect();
        parents.dedup();
        parents.sort_unstable();
        parents.dedup();
        let total: usize = parents.iter().map(|&p| children[p as usize].len()).sum();
        if total != self.cells.len() {
            return Ok(None);
        }
        Ok(Some(Self {
            depth: d,
            cells: parents,
        }))
    }

    /// The same set expressed at `depth`; fails if it is not a union of cells there.
    pub fn reanchor(&self, c: &Covering, depth: usize) -> Result<Self> {
        if depth == self.depth {
            return Ok(self.clone());
        }
        if depth < self.depth {
            let mut cur = self.clone();
            while cur.depth > depth {
                cur = cur.collapse(c)?.ok_or_else(|| {
                    Error::precondition(format!(
                        "set at depth {} is not a union of cells at depth {depth}",
                        self.depth
                    ))
                })?;
            }
            return Ok(cur);
        }
        let mut cells = self.cells.clone();
        for d in self.depth..depth {
            let ch = c.children(d)?;
            let mut next = Vec::with_capacity(cells.len() * 2);
            for &x in &cells {
                next.extend_from_slice(&ch[x as usize]);
            }
            next.sort_unstable();
            cells = next;
        }
        Ok(Self { depth, cells })
    }

    fn aligned(&self, other: &Self, c: &Covering) -> Result<(Self, Self)> {
        let d = self.depth.max(other.depth);
        Ok((self.reanchor(c, d)?, other.reanchor(c, d)?))
    }

    pub fn union(&self, other: &Self, c: &Covering) -> Result<Self> {
        let (a, b) = self.aligned(other, c)?;
        let mut cells = a.cells;
        cells.extend_from_slice(&b.cells);
        Ok(Self::new(a.depth, cells))
    }

    pub fn intersection(&self, other: &Self, c: &Covering) -> Result<Self> {
        let (a, b) = self.aligned(other, c)?;
        let cells = merge(&a.cells, &b.cells, |x, y| x && y);
        Ok(Self { depth: a.depth, cells })
    }

    pub fn difference(&self, other: &Self, c: &Covering) -> Result<Self> {
        let (a, b) = self.aligned(other, c)?;
        let cells = merge(&a.cells, &b.cells, |x, y| x && !y);
        Ok(Self { depth: a.depth, cells })
    }

    pub fn is_subset(&self, other: &Self, c: &Covering) -> Result<bool> {
        Ok(self.difference(other, c)?.is_empty())
    }

    pub fn is_disjoint(&self, other: &Self, c: &Covering) -> Result<bool> {
        Ok(self.intersection(other, c)?.is_empty())
    }

    /// Equality as subsets of the space.
    pub fn same_set(&self, other: &Self, c: &Covering) -> Result<bool> {
        let (a, b) = self.aligned(other, c)?;
        Ok(a.cells == b.cells)
    }
}

fn merge(a: &[u32], b: &[u32], keep: impl Fn(bool, bool) -> bool) -> Vec<u32> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (x, in_a, in_b) = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                (x, true, true)
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                (x, true, false)
            }
            (Some(_), Some(&y)) => {
                j += 1;
                (y, false, true)
            }
            (Some(&x), None) => {
                i += 1;
                (x, true, false)
            }
            (None, Some(&y)) => {
                j += 1;
                (y, false, true)
            }
            (None, None) => unreachable!(),
        };
        if keep(in_a, in_b) {
            out.push(x);
        }
    }
    out
}

/// f⁻¹(u) as a set at depth `u.depth + 1`.
pub fn preimage(c: &Covering, u: &ClopenSet) -> Result<ClopenSet> {
    let pre = c.image_preimages(u.depth)?;
    let mut cells = Vec::new();
    for &x in &u.cells {
        cells.extend_from_slice(&pre[x as usize]);
    }
    Ok(ClopenSet::new(u.depth + 1, cells))
}

/// Canonical form of f⁻¹(u).
pub fn preimage_canonical(c: &Covering, u: &ClopenSet) -> Result<ClopenSet> {
    preimage(c, u)?.canonical(c)
}

/// Smallest union of depth-m cells containing f(u).
pub fn forward_hull(c: &Covering, u: &ClopenSet) -> Result<ClopenSet> {
    let ch = c.children(u.depth)?;
    let im = c.image(u.depth)?;
    let mut cells = Vec::new();
    for &x in &u.cells {
        cells.extend(ch[x as usize].iter().map(|&w| im[w as usize]));
    }
    Ok(ClopenSet::new(u.depth, cells))
}

/// No edge at the set's depth leaves it.
pub fn forward_stable(c: &Covering, u: &ClopenSet) -> Result<bool> {
    let g = c.level(u.depth)?;
    Ok(u.cells.iter().all(|&x| g.succ(x).iter().all(|&y| u.contains_cell(y))))
}

/// Least forward-stable superset at the same depth.
pub fn forward_closure(c: &Covering, u: &ClopenSet) -> Result<ClopenSet> {
    let g = c.level(u.depth)?;
    Ok(ClopenSet::new(u.depth, reach(&g, &u.cells)))
}

/// Vertices reachable from `start` (including it).
pub fn reach(g: &LevelGraph, start: &[u32]) -> Vec<u32> {
    let mut seen = vec![false; g.len()];
    let mut queue: VecDeque<u32> = VecDeque::new();
    for &s in start {
        if !seen[s as usize] {
            seen[s as usize] = true;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in g.succ(x) {
            if !seen[y as usize] {
                seen[y as usize] = true;
                queue.push_back(y);
            }
        }
    }
    (0..g.len() as u32).filter(|&v| seen[v as usize]).collect()
}

/// A partition of the cells at `depth` into blocks, ordered by least cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    depth: usize,
    blocks: Vec<Vec<u32>>,
    block_of: Vec<u32>,
}

impl Partition {
    pub fn from_blocks(c: &Covering, depth: usize, blocks: Vec<Vec<u32>>) -> Result<Self> {
        let n = c.level(depth)?.len();
        let mut blocks: Vec<Vec<u32>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::invariant("partition has an empty block"));
        }
        blocks.sort_by_key(|b| b[0]);
        let mut block_of = vec![u32::MAX; n];
        for (i, b) in blocks.iter().enumerate() {
            for &x in b {
                let slot = block_of
                    .get_mut(x as usize)
                    .ok_or_else(|| Error::invariant(format!("cell {x} out of range at depth {depth}")))?;
                if *slot != u32::MAX {
                    return Err(Error::invariant(format!("cell {x} lies in two blocks")));
                }
                *slot = i as u32;
            }
        }
        if block_of.contains(&u32::MAX) {
            return Err(Error::invariant("partition does not cover its level"));
        }
        Ok(Self {
            depth,
            blocks,
            block_of,
        })
    }

    pub fn from_block_of(depth: usize, block_of: Vec<u32>) -> Result<Self> {
        let nb = block_of.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
        let mut blocks = vec![Vec::new(); nb];
        for (x, &b) in block_of.iter().enumerate() {
            blocks[b as usize].push(x as u32);
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::invariant("partition has an empty block"));
        }
        let mut order: Vec<usize> = (0..nb).collect();
        order.sort_by_key(|&i| blocks[i][0]);
        let mut rank = vec![0u32; nb];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }
        let block_of: Vec<u32> = block_of.iter().map(|&b| rank[b as usize]).collect();
        let blocks = order.into_iter().map(|i| std::mem::take(&mut blocks[i])).collect();
        Ok(Self {
            depth,
            blocks,
            block_of,
        })
    }

    pub fn singletons(c: &Covering, depth: usize) -> Result<Self> {
        let n = c.level(depth)?.len() as u32;
        Ok(Self {
            depth,
            blocks: (0..n).map(|x| vec![x]).collect(),
            block_of: (0..n).collect(),
        })
    }

    pub fn trivial(c: &Covering, depth: usize) -> Result<Self> {
        let n = c.level(depth)?.len() as u32;
        Ok(Self {
            depth,
            blocks: vec![(0..n).collect()],
            block_of: vec![0; n as usize],
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &[u32] {
        &self.blocks[b]
    }

    pub fn block_of(&self, cell: u32) -> u32 {
        self.block_of[cell as usize]
    }

    pub fn block_map(&self) -> &[u32] {
        &self.block_of
    }

    pub fn block_set(&self, b: usize) -> ClopenSet {
        ClopenSet {
            depth: self.depth,
            cells: self.blocks[b].clone(),
        }
    }

    /// Block ids: the name of each block's least cell.
    pub fn block_ids(&self, c: &Covering) -> Result<Vec<String>> {
        let g = c.level(self.depth)?;
        Ok(self.blocks.iter().map(|b| g.name(b[0]).to_string()).collect())
    }

    /// The same partition with every cell replaced by its children at `depth`.
    pub fn reanchor(&self, c: &Covering, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::precondition("partitions only re-anchor downward"));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let proj = c.projection(depth, self.depth)?;
        let block_of: Vec<u32> = proj.iter().map(|&x| self.block_of[x as usize]).collect();
        Self::from_block_of(depth, block_of)
    }

    /// For each block of `self`, the block of `coarse` containing it.
    pub fn parent_map(&self, coarse: &Partition, c: &Covering) -> Result<Vec<u32>> {
        let proj = c.projection(self.depth, coarse.depth)?;
        Ok(self
            .blocks
            .iter()
            .map(|b| coarse.block_of[proj[b[0] as usize] as usize])
            .collect())
    }

    /// Whether every block of `self` lies inside a block of `coarse`.
    pub fn refines(&self, coarse: &Partition, c: &Covering) -> Result<bool> {
        if self.depth < coarse.depth {
            return Ok(false);
        }
        let proj = c.projection(self.depth, coarse.depth)?;
        Ok(self.blocks.iter().all(|b| {
            let t = coarse.block_of[proj[b[0] as usize] as usize];
            b.iter().all(|&x| coarse.block_of[proj[x as usize] as usize] == t)
        }))
    }
}

/// Adjacency of the quotient by `p`, over block indices.
pub fn quotient_adjacency(c: &Covering, p: &Partition) -> Result<Vec<Vec<u32>>> {
    let g = c.level(p.depth)?;
    let mut succ = vec![Vec::new(); p.len()];
    for (a, b) in g.edges() {
        succ[p.block_of[a as usize] as usize].push(p.block_of[b as usize]);
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }
    Ok(succ)
}

/// Quotient graph with vertices named by block ids.
pub fn quotient_graph(c: &Covering, p: &Partition) -> Result<LevelGraph> {
    LevelGraph::from_sorted(p.block_ids(c)?, quotient_adjacency(c, p)?)
}
