//! Circuits (elementary cycles), strongly connected components and related
//! searches over adjacency lists.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{reverse, LevelGraph};

/// Default cap on the number of circuits enumerated in one call.
pub const CIRCUIT_LIMIT: usize = 200_000;

/// An elementary cycle, rotated so its least vertex comes first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Circuit {
    pub cells: Vec<u32>,
}

impl Circuit {
    pub fn new(mut cells: Vec<u32>) -> Self {
        if let Some(pos) = cells.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
            cells.rotate_left(pos);
        }
        Self { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// All circuits of `g` in lexicographic order.
pub fn circuits(g: &LevelGraph) -> Result<Vec<Circuit>> {
    circuits_in(g.adjacency(), None, CIRCUIT_LIMIT)
}

/// Strongly connected component index of each vertex (restricted to `alive`
/// when given; dead vertices get `u32::MAX`).
pub fn scc(succ: &[Vec<u32>], alive: Option<&[bool]>) -> Vec<u32> {
    let n = succ.len();
    let is_alive = |v: usize| alive.is_none_or(|a| a[v]);
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![u32::MAX; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    let mut frames: Vec<(u32, usize)> = Vec::new();
    for root in 0..n {
        if !is_alive(root) || index[root] != u32::MAX {
            continue;
        }
        frames.push((root as u32, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root as u32);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = frames.last_mut() {
            let vu = v as usize;
            if *next < succ[vu].len() {
                let w = succ[vu][*next] as usize;
                *next += 1;
                if !is_alive(w) {
                    continue;
                }
                if index[w] == u32::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    frames.push((w as u32, 0));
                } else if on_stack[w] {
                    low[vu] = low[vu].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    let p = parent as usize;
                    low[p] = low[p].min(low[vu]);
                }
                if low[vu] == index[vu] {
                    loop {
                        let x = stack.pop().expect("tarjan stack") as usize;
                        on_stack[x] = false;
                        comp[x] = ncomp;
                        if x == vu {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Johnson's algorithm on the subgraph induced by `alive`.
pub fn circuits_in(succ: &[Vec<u32>], alive: Option<&[bool]>, limit: usize) -> Result<Vec<Circuit>> {
    let n = succ.len();
    let mut out: Vec<Circuit> = Vec::new();
    let mut blocked = vec![false; n];
    let mut bsets: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut in_scc = vec![false; n];
    let mut mask: Vec<bool> = (0..n).map(|v| alive.is_none_or(|a| a[v])).collect();
    let mut s = 0usize;
    while s < n {
        let comp = scc(succ, Some(&mask));
        let mut sizes = std::collections::HashMap::new();
        for v in s..n {
            if mask[v] {
                *sizes.entry(comp[v]).or_insert(0usize) += 1;
            }
        }
        let start = (s..n).find(|&v| mask[v] && (sizes[&comp[v]] > 1 || succ[v].iter().any(|&w| w as usize == v)));
        let Some(start) = start else { break };
        for v in 0..n {
            in_scc[v] = mask[v] && comp[v] == comp[start];
            if in_scc[v] {
                blocked[v] = false;
                bsets[v].clear();
            }
        }
        circuit_search(succ, &in_scc, start, &mut blocked, &mut bsets, &mut out, limit)?;
        for m in mask.iter_mut().take(start + 1) {
            *m = false;
        }
        s = start + 1;
    }
    out.sort();
    Ok(out)
}

fn circuit_search(
    succ: &[Vec<u32>],
    in_scc: &[bool],
    s: usize,
    blocked: &mut [bool],
    bsets: &mut [Vec<u32>],
    out: &mut Vec<Circuit>,
    limit: usize,
) -> Result<()> {
    struct Frame {
        v: usize,
        next: usize,
        found: bool,
    }
    let mut path: Vec<u32> = vec![s as u32];
    let mut frames = vec![Frame {
        v: s,
        next: 0,
        found: false,
    }];
    blocked[s] = true;
    while let Some(top) = frames.last_mut() {
        let v = top.v;
        if top.next < succ[v].len() {
            let w = succ[v][top.next] as usize;
            top.next += 1;
            if !in_scc[w] {
                continue;
            }
            if w == s {
                out.push(Circuit { cells: path.clone() });
                if out.len() > limit {
                    return Err(Error::Budget {
                        requested: out.len(),
                        budget: limit,
                    });
                }
                top.found = true;
            } else if !blocked[w] {
                blocked[w] = true;
                path.push(w as u32);
                frames.push(Frame {
                    v: w,
                    next: 0,
                    found: false,
                });
            }
        } else {
            let found = top.found;
            if found {
                unblock(v, blocked, bsets);
            } else {
                for &w in &succ[v] {
                    let w = w as usize;
                    if in_scc[w] && !bsets[w].contains(&(v as u32)) {
                        bsets[w].push(v as u32);
                    }
                }
            }
            frames.pop();
            path.pop();
            if let Some(parent) = frames.last_mut() {
                parent.found |= found;
            }
        }
    }
    Ok(())
}

fn unblock(u: usize, blocked: &mut [bool], bsets: &mut [Vec<u32>]) {
    let mut work = vec![u];
    while let Some(x) = work.pop() {
        if !blocked[x] {
            continue;
        }
        blocked[x] = false;
        for w in std::mem::take(&mut bsets[x]) {
            if blocked[w as usize] {
                work.push(w as usize);
            }
        }
    }
}

/// Circuits of length at most `k` through vertices accepted by `allowed`.
/// Components that are a single simple cycle are handled without search.
pub fn short_circuits(succ: &[Vec<u32>], k: usize, allowed: &dyn Fn(u32) -> bool) -> Vec<Circuit> {
    let n = succ.len();
    let alive: Vec<bool> = (0..n as u32).map(allowed).collect();
    let comp = scc(succ, Some(&alive));
    let mut members: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for v in 0..n {
        if alive[v] {
            members.entry(comp[v]).or_default().push(v as u32);
        }
    }
    let pred = reverse(succ);
    let mut out = Vec::new();
    for (cid, vs) in members {
        let inner = |v: u32| {
            succ[v as usize]
                .iter()
                .filter(|&&w| alive[w as usize] && comp[w as usize] == cid)
                .count()
        };
        let trivial = vs.len() == 1 && !succ[vs[0] as usize].contains(&vs[0]);
        if trivial {
            continue;
        }
        if vs.iter().all(|&v| inner(v) == 1) {
            if vs.len() <= k {
                let mut cyc = vec![vs[0]];
                loop {
                    let last = *cyc.last().expect("nonempty");
                    let nxt = *succ[last as usize]
                        .iter()
                        .find(|&&w| alive[w as usize] && comp[w as usize] == cid)
                        .expect("cycle successor");
                    if nxt == vs[0] {
                        break;
                    }
                    cyc.push(nxt);
                }
                out.push(Circuit::new(cyc));
            }
            continue;
        }
        let in_comp = |v: u32| alive[v as usize] && comp[v as usize] == cid;
        for &s in &vs {
            bounded_from(succ, &pred, s, k, &in_comp, &mut out);
        }
    }
    out.sort();
    out
}

fn bounded_from(
    succ: &[Vec<u32>],
    pred: &[Vec<u32>],
    s: u32,
    k: usize,
    in_comp: &dyn Fn(u32) -> bool,
    out: &mut Vec<Circuit>,
) {
    // distance back to s through vertices > s
    let mut dist: std::collections::HashMap<u32, usize> = Default::default();
    dist.insert(s, 0);
    let mut queue = VecDeque::from([s]);
    while let Some(x) = queue.pop_front() {
        let dx = dist[&x];
        if dx >= k {
            continue;
        }
        for &y in &pred[x as usize] {
            if y > s && in_comp(y) && !dist.contains_key(&y) {
                dist.insert(y, dx + 1);
                queue.push_back(y);
            }
        }
    }
    let mut path = vec![s];
    let mut on_path: std::collections::HashSet<u32> = [s].into_iter().collect();
    let mut frames: Vec<(u32, usize)> = vec![(s, 0)];
    while let Some(&mut (v, ref mut next)) = frames.last_mut() {
        if *next < succ[v as usize].len() {
            let w = succ[v as usize][*next];
            *next += 1;
            let len = path.len();
            if w == s {
                out.push(Circuit { cells: path.clone() });
            } else if w > s && !on_path.contains(&w) {
                if let Some(&dw) = dist.get(&w) {
                    if len + dw <= k && len < k {
                        on_path.insert(w);
                        path.push(w);
                        frames.push((w, 0));
                    }
                }
            }
        } else {
            frames.pop();
            if let Some(x) = path.pop() {
                on_path.remove(&x);
            }
        }
    }
}

/// Length of a shortest cycle, if any.
pub fn girth(succ: &[Vec<u32>]) -> Option<usize> {
    let n = succ.len();
    let mut best: Option<usize> = None;
    let mut dist = vec![usize::MAX; n];
    let mut touched = Vec::new();
    for s in 0..n {
        if succ[s].iter().any(|&w| w as usize == s) {
            return Some(1);
        }
        let mut queue = VecDeque::from([s]);
        dist[s] = 0;
        touched.push(s);
        'bfs: while let Some(x) = queue.pop_front() {
            if best.is_some_and(|b| dist[x] + 1 >= b) {
                break;
            }
            for &y in &succ[x] {
                let y = y as usize;
                if y == s {
                    best = Some(best.map_or(dist[x] + 1, |b| b.min(dist[x] + 1)));
                    break 'bfs;
                }
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    touched.push(y);
                    queue.push_back(y);
                }
            }
        }
        for &t in &touched {
            dist[t] = usize::MAX;
        }
        touched.clear();
    }
    best
}

/// Topological order of the subgraph induced by `alive`, or `None` if it has a cycle.
pub fn topo_order(succ: &[Vec<u32>], alive: Option<&[bool]>) -> Option<Vec<u32>> {
    let n = succ.len();
    let is_alive = |v: usize| alive.is_none_or(|a| a[v]);
    let mut indeg = vec![0usize; n];
    for v in 0..n {
        if !is_alive(v) {
            continue;
        }
        for &w in &succ[v] {
            if is_alive(w as usize) {
                indeg[w as usize] += 1;
            }
        }
    }
    let mut queue: VecDeque<u32> = (0..n)
        .filter(|&v| is_alive(v) && indeg[v] == 0)
        .map(|v| v as u32)
        .collect();
    let mut order = Vec::new();
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &succ[v as usize] {
            if is_alive(w as usize) {
                indeg[w as usize] -= 1;
                if indeg[w as usize] == 0 {
                    queue.push_back(w);
                }
            }
        }
    }
    let count = (0..n).filter(|&v| is_alive(v)).count();
    (order.len() == count).then_some(order)
}

pub fn is_acyclic(succ: &[Vec<u32>], alive: Option<&[bool]>) -> bool {
    topo_order(succ, alive).is_some()
}

/// Vertices lying on at least one cycle of the induced subgraph.
pub fn cyclic_vertices(succ: &[Vec<u32>], alive: Option<&[bool]>) -> Vec<bool> {
    let comp = scc(succ, alive);
    let n = succ.len();
    let mut size = std::collections::HashMap::new();
    for v in 0..n {
        if comp[v] != u32::MAX {
            *size.entry(comp[v]).or_insert(0usize) += 1;
        }
    }
    (0..n)
        .map(|v| comp[v] != u32::MAX && (size[&comp[v]] > 1 || succ[v].iter().any(|&w| w as usize == v)))
        .collect()
}
