//! Finite directed graphs with named, lexicographically ordered vertices.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One level of a covering. Vertex `i` is the `i`-th name in byte order, so
/// index order is the canonical vertex order.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    names: Vec<String>,
    succ: Vec<Vec<u32>>,
    index: HashMap<String, u32>,
}

impl PartialEq for LevelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.succ == other.succ
    }
}

impl Eq for LevelGraph {}

impl LevelGraph {
    /// Builds a graph from names in arbitrary order and edges given by
    /// position in `names`. Returns the graph and the old-to-new index map.
    pub fn from_raw(names: Vec<String>, edges: &[(u32, u32)]) -> Result<(Self, Vec<u32>)> {
        let n = names.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
        let mut perm = vec![0u32; n];
        for (new, &old) in order.iter().enumerate() {
            perm[old as usize] = new as u32;
        }
        let mut sorted = Vec::with_capacity(n);
        let mut names = names;
        for &old in &order {
            sorted.push(std::mem::take(&mut names[old as usize]));
        }
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::input(format!("edge ({a},{b}) out of range")));
            }
            succ[perm[a as usize] as usize].push(perm[b as usize]);
        }
        let g = Self::from_sorted(sorted, succ)?;
        Ok((g, perm))
    }

    /// Builds a graph from names already in byte order.
    pub fn from_sorted(names: Vec<String>, mut succ: Vec<Vec<u32>>) -> Result<Self> {
        if names.len() != succ.len() {
            return Err(Error::input("adjacency length differs from vertex count"));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if i > 0 && names[i - 1] >= *name {
                return Err(Error::input(format!(
                    "vertex names not strictly increasing at `{name}`"
                )));
            }
            index.insert(name.clone(), i as u32);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Self { names, succ, index })
    }

    /// Builds a graph from named edges.
    pub fn from_named(vertices: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let pos: HashMap<&str, u32> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i as u32))
            .collect();
        if pos.len() != vertices.len() {
            return Err(Error::input("duplicate vertex name"));
        }
        let mut idx = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *pos
                .get(a.as_str())
                .ok_or_else(|| Error::input(format!("edge source `{a}` is not a vertex")))?;
            let ib = *pos
                .get(b.as_str())
                .ok_or_else(|| Error::input(format!("edge target `{b}` is not a vertex")))?;
            idx.push((ia, ib));
        }
        Ok(Self::from_raw(vertices, &idx)?.0)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, v: u32) -> &str {
        &self.names[v as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn succ(&self, v: u32) -> &[u32] {
        &self.succ[v as usize]
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.succ
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.succ[a as usize].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a as u32, b)))
    }

    pub fn predecessors(&self) -> Vec<Vec<u32>> {
        reverse(&self.succ)
    }

    pub fn is_forward_complete(&self) -> bool {
        self.succ.iter().all(|s| !s.is_empty())
    }
}

pub fn reverse(succ: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut pred = vec![Vec::new(); succ.len()];
    for (a, s) in succ.iter().enumerate() {
        for &b in s {
            pred[b as usize].push(a as u32);
        }
    }
    pred
}
