//! Graph coverings: a tower of level graphs joined by bonding maps, extended
//! lazily by a generator up to a depth budget.

use std::cell::RefCell;
use std::rc::Rc;

use serde::Serialize;

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::fixtures::Generator;
use crate::graph::LevelGraph;

pub const DEFAULT_BUDGET: usize = 64;

/// A level produced by a generator, vertices in generator order.
#[derive(Debug, Clone)]
pub struct RawLevel {
    pub names: Vec<String>,
    pub edges: Vec<(u32, u32)>,
    /// Parent name of each vertex; empty at depth 1.
    pub parents: Vec<String>,
}

/// A declared finite orbit with an attracting neighbourhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitAnnotation {
    pub period: usize,
    pub level: usize,
    /// Cells of p_1, f(p_1), ... at `level`.
    pub circuit: Vec<u32>,
    pub basin: ClopenSet,
}

#[derive(Default)]
struct State {
    levels: Vec<Rc<LevelGraph>>,
    bonds: Vec<Rc<Vec<u32>>>,
    children: Vec<Option<Rc<Vec<Vec<u32>>>>>,
    image: Vec<Option<Rc<Vec<u32>>>>,
    image_pre: Vec<Option<Rc<Vec<Vec<u32>>>>>,
}

pub struct Covering {
    state: RefCell<State>,
    generator: Option<Generator>,
    orbits: Vec<OrbitAnnotation>,
    budget: usize,
}

impl std::fmt::Debug for Covering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Covering")
            .field("materialized", &self.materialized())
            .field("generator", &self.generator)
            .field("orbits", &self.orbits.len())
            .field("budget", &self.budget)
            .finish()
    }
}

impl Covering {
    /// A materialized covering. `bonds[i]` maps level `i + 2` onto level `i + 1`.
    pub fn new(levels: Vec<LevelGraph>, bonds: Vec<Vec<u32>>) -> Result<Self> {
        Self::from_parts(levels, bonds, None, Vec::new(), DEFAULT_BUDGET)
    }

    pub fn from_generator(generator: Generator, budget: usize) -> Result<Self> {
        Self::from_parts(Vec::new(), Vec::new(), Some(generator), Vec::new(), budget)
    }

    pub fn from_parts(
        levels: Vec<LevelGraph>,
        bonds: Vec<Vec<u32>>,
        generator: Option<Generator>,
        orbits: Vec<OrbitAnnotation>,
        budget: usize,
    ) -> Result<Self> {
        if levels.is_empty() && generator.is_none() {
            return Err(Error::input("covering has no levels"));
        }
        if !levels.is_empty() && bonds.len() + 1 != levels.len() {
            return Err(Error::input(format!(
                "{} levels need {} bonds, got {}",
                levels.len(),
                levels.len() - 1,
                bonds.len()
            )));
        }
        for (i, b) in bonds.iter().enumerate() {
            if b.len() != levels[i + 1].len() {
                return Err(Error::input(format!("bond {} is not total", i + 1)));
            }
            if b.iter().any(|&p| p as usize >= levels[i].len()) {
                return Err(Error::input(format!("bond {} leaves its target level", i + 1)));
            }
        }
        let n = levels.len();
        let state = State {
            levels: levels.into_iter().map(Rc::new).collect(),
            bonds: bonds.into_iter().map(Rc::new).collect(),
            children: vec![None; n],
            image: vec![None; n],
            image_pre: vec![None; n],
        };
        let c = Covering {
            state: RefCell::new(state),
            generator,
            orbits,
            budget,
        };
        if n == 0 {
            c.ensure(1)?;
        }
        Ok(c)
    }

    pub fn with_orbits(mut self, orbits: Vec<OrbitAnnotation>) -> Self {
        self.orbits = orbits;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn orbits(&self) -> &[OrbitAnnotation] {
        &self.orbits
    }

    /// Number of levels built so far.
    pub fn materialized(&self) -> usize {
        self.state.borrow().levels.len()
    }

    /// Whether `depth` can be reached without error.
    pub fn can_reach(&self, depth: usize) -> bool {
        depth <= self.materialized() || (self.generator.is_some() && depth <= self.budget)
    }

    pub fn ensure(&self, depth: usize) -> Result<()> {
        if depth == 0 {
            return Err(Error::precondition("depths start at 1"));
        }
        if depth <= self.materialized() {
            return Ok(());
        }
        if depth > self.budget {
            return Err(Error::Budget {
                requested: depth,
                budget: self.budget,
            });
        }
        let Some(generator) = &self.generator else {
            return Err(Error::DepthExhausted {
                requested: depth,
                available: self.materialized(),
            });
        };
        while self.materialized() < depth {
            let d = self.materialized() + 1;
            let raw = generator.raw_level(d)?;
            let (graph, perm) = LevelGraph::from_raw(raw.names, &raw.edges)?;
            let mut st = self.state.borrow_mut();
            if d > 1 {
                let parent_level = &st.levels[d - 2];
                let mut bond = vec![0u32; graph.len()];
                for (old, pname) in raw.parents.iter().enumerate() {
                    let p = parent_level.index_of(pname).ok_or_else(|| {
                        Error::invariant(format!("generator parent `{pname}` missing at depth {}", d - 1))
                    })?;
                    bond[perm[old] as usize] = p;
                }
                st.bonds.push(Rc::new(bond));
            }
            st.levels.push(Rc::new(graph));
            st.children.push(None);
            st.image.push(None);
            st.image_pre.push(None);
        }
        Ok(())
    }

    pub fn level(&self, depth: usize) -> Result<Rc<LevelGraph>> {
        self.ensure(depth)?;
        Ok(self.state.borrow().levels[depth - 1].clone())
    }

    /// Bond from depth `depth + 1` onto depth `depth`.
    pub fn bond(&self, depth: usize) -> Result<Rc<Vec<u32>>> {
        self.ensure(depth + 1)?;
        Ok(self.state.borrow().bonds[depth - 1].clone())
    }

    /// Children at depth `depth + 1` of every cell at `depth`, ascending.
    pub fn children(&self, depth: usize) -> Result<Rc<Vec<Vec<u32>>>> {
        if let Some(ch) = self.cached(depth, |s| &s.children) {
            return Ok(ch);
        }
        let bond = self.bond(depth)?;
        let n = self.level(depth)?.len();
        let mut ch = vec![Vec::new(); n];
        for (child, &p) in bond.iter().enumerate() {
            ch[p as usize].push(child as u32);
        }
        let ch = Rc::new(ch);
        self.state.borrow_mut().children[depth - 1] = Some(ch.clone());
        Ok(ch)
    }

    /// For each cell `w` at depth `depth + 1`, the common parent of its
    /// successors (the cell at `depth` containing f(w)).
    pub fn image(&self, depth: usize) -> Result<Rc<Vec<u32>>> {
        if let Some(im) = self.cached(depth, |s| &s.image) {
            return Ok(im);
        }
        let g = self.level(depth + 1)?;
        let bond = self.bond(depth)?;
        let mut im = Vec::with_capacity(g.len());
        for w in 0..g.len() as u32 {
            let s = g.succ(w);
            let Some(&first) = s.first() else {
                return Err(Error::invariant(format!(
                    "vertex `{}` at depth {} has no successor",
                    g.name(w),
                    depth + 1
                )));
            };
            let p = bond[first as usize];
            if s.iter().any(|&x| bond[x as usize] != p) {
                return Err(Error::invariant(format!(
                    "vertex `{}` at depth {} is not edge-compatible",
                    g.name(w),
                    depth + 1
                )));
            }
            im.push(p);
        }
        let im = Rc::new(im);
        self.state.borrow_mut().image[depth - 1] = Some(im.clone());
        Ok(im)
    }

    /// For each cell at `depth`, the cells at `depth + 1` whose image it is.
    pub fn image_preimages(&self, depth: usize) -> Result<Rc<Vec<Vec<u32>>>> {
        if let Some(pre) = self.cached(depth, |s| &s.image_pre) {
            return Ok(pre);
        }
        let im = self.image(depth)?;
        let n = self.level(depth)?.len();
        let mut pre = vec![Vec::new(); n];
        for (w, &c) in im.iter().enumerate() {
            pre[c as usize].push(w as u32);
        }
        let pre = Rc::new(pre);
        self.state.borrow_mut().image_pre[depth - 1] = Some(pre.clone());
        Ok(pre)
    }

    fn cached<T: ?Sized>(&self, depth: usize, field: impl Fn(&State) -> &Vec<Option<Rc<T>>>) -> Option<Rc<T>> {
        let st = self.state.borrow();
        field(&st).get(depth.wrapping_sub(1)).and_then(|o| o.clone())
    }

    /// Projection of every cell at depth `from` onto depth `to <= from`.
    pub fn projection(&self, from: usize, to: usize) -> Result<Vec<u32>> {
        if to > from || to == 0 {
            return Err(Error::precondition(format!("cannot project depth {from} to {to}")));
        }
        let mut map: Vec<u32> = (0..self.level(from)?.len() as u32).collect();
        for d in (to..from).rev() {
            let b = self.bond(d)?;
            for x in map.iter_mut() {
                *x = b[*x as usize];
            }
        }
        Ok(map)
    }

    /// Ancestor of one cell.
    pub fn ancestor(&self, from: usize, cell: u32, to: usize) -> Result<u32> {
        let mut x = cell;
        for d in (to..from).rev() {
            x = self.bond(d)?[x as usize];
        }
        Ok(x)
    }

    pub fn cell_name(&self, depth: usize, cell: u32) -> Result<String> {
        Ok(self.level(depth)?.name(cell).to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoLevels,
    ForwardIncomplete {
        depth: usize,
        vertex: String,
    },
    NonMorphism {
        depth: usize,
        edge: (String, String),
        image: (String, String),
    },
    NotSurjective {
        depth: usize,
        vertex: String,
    },
    EdgeIncompatible {
        depth: usize,
        vertex: String,
        targets: (String, String),
    },
    Orbit {
        index: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub levels_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every materialized level and bond, and the declared orbits.
pub fn validate_covering(c: &Covering) -> ValidationReport {
    let n = c.materialized();
    let mut report = ValidationReport {
        levels_checked: n,
        violations: Vec::new(),
    };
    if n == 0 {
        report.violations.push(Violation::NoLevels);
        return report;
    }
    for d in 1..=n {
        let g = c.level(d).expect("materialized");
        for v in 0..g.len() as u32 {
            if g.succ(v).is_empty() {
                report.violations.push(Violation::ForwardIncomplete {
                    depth: d,
                    vertex: g.name(v).to_string(),
                });
            }
        }
    }
    for d in 1..n {
        let parent = c.level(d).expect("materialized");
        let child = c.level(d + 1).expect("materialized");
        let bond = c.bond(d).expect("materialized");
        let mut hit = vec![false; parent.len()];
        for &p in bond.iter() {
            hit[p as usize] = true;
        }
        for (p, h) in hit.iter().enumerate() {
            if !h {
                report.violations.push(Violation::NotSurjective {
                    depth: d,
                    vertex: parent.name(p as u32).to_string(),
                });
            }
        }
        for (a, b) in child.edges() {
            let (pa, pb) = (bond[a as usize], bond[b as usize]);
            if !parent.has_edge(pa, pb) {
                report.violations.push(Violation::NonMorphism {
                    depth: d + 1,
                    edge: (child.name(a).into(), child.name(b).into()),
                    image: (parent.name(pa).into(), parent.name(pb).into()),
                });
            }
        }
        for w in 0..child.len() as u32 {
            let s = child.succ(w);
            if let Some(&first) = s.first() {
                if let Some(&other) = s.iter().find(|&&x| bond[x as usize] != bond[first as usize]) {
                    report.violations.push(Violation::EdgeIncompatible {
                        depth: d + 1,
                        vertex: child.name(w).into(),
                        targets: (child.name(first).into(), child.name(other).into()),
                    });
                }
            }
        }
    }
    for (i, o) in c.orbits().iter().enumerate() {
        if let Err(reason) = check_orbit(c, o) {
            report.violations.push(Violation::Orbit { index: i, reason });
        }
    }
    report
}

fn check_orbit(c: &Covering, o: &OrbitAnnotation) -> std::result::Result<(), String> {
    if o.period == 0 || o.circuit.len() != o.period {
        return Err(format!("period {} with {} circuit cells", o.period, o.circuit.len()));
    }
    if o.level > c.materialized() && !c.can_reach(o.level) {
        return Err(format!("level {} unavailable", o.level));
    }
    let g = c.level(o.level).map_err(|e| e.to_string())?;
    let mut seen = o.circuit.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != o.period || seen.iter().any(|&x| x as usize >= g.len()) {
        return Err("circuit cells are not distinct cells".into());
    }
    for i in 0..o.period {
        let (a, b) = (o.circuit[i], o.circuit[(i + 1) % o.period]);
        if !g.has_edge(a, b) {
            return Err(format!("({}, {}) is not an edge", g.name(a), g.name(b)));
        }
    }
    let circuit = ClopenSet::new(o.level, o.circuit.clone());
    let contains = circuit.is_subset(&o.basin, c).map_err(|e| e.to_string())?;
    if !contains {
        return Err("basin does not contain the circuit".into());
    }
    let stable = crate::clopen::forward_stable(c, &o.basin).map_err(|e| e.to_string())?;
    if !stable {
        return Err("basin is not forward-stable".into());
    }
    Ok(())
}

/// Subsequence of levels with composed bonds. Orbits declared at a kept level
/// are carried over; others are dropped.
pub fn telescope(c: &Covering, indices: &[usize]) -> Result<Covering> {
    if indices.is_empty() {
        return Err(Error::precondition("telescope needs at least one index"));
    }
    if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::precondition("indices must be positive and strictly increasing"));
    }
    let mut levels = Vec::new();
    let mut bonds = Vec::new();
    for (k, &d) in indices.iter().enumerate() {
        levels.push((*c.level(d)?).clone());
        if k > 0 {
            bonds.push(c.projection(d, indices[k - 1])?);
        }
    }
    let mut orbits = Vec::new();
    for o in c.orbits() {
        if let Some(k) = indices.iter().position(|&d| d == o.level) {
            let basin = o.basin.reanchor(c, o.level.max(o.basin.depth()))?;
            let keep = basin.depth() == o.level;
            if keep {
                orbits.push(OrbitAnnotation {
                    period: o.period,
                    level: k + 1,
                    circuit: o.circuit.clone(),
                    basin: ClopenSet::new(k + 1, basin.cells().to_vec()),
                });
            }
        }
    }
    Covering::from_parts(levels, bonds, None, orbits, c.budget())
}
