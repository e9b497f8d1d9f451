//! JSON documents for coverings, marked coverings, interval assignments and
//! reports. Big numbers travel as decimal strings.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::clopen::{ClopenSet, Partition};
use crate::covering::{validate_covering, Covering, OrbitAnnotation, DEFAULT_BUDGET};
use crate::dynamics::{SupercyclicalLevel, Tau};
use crate::embed::{ContainerSet, IntervalAssignment, LevelAssignment};
use crate::error::{Error, Result};
use crate::fixtures::Generator;
use crate::graph::LevelGraph;
use crate::marking::{Mark, MarkedLevel};
use crate::rectify::{DescentStep, MarkedCovering};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDoc {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitDoc {
    pub period: usize,
    pub level: usize,
    pub circuit: Vec<String>,
    pub basin: Vec<String>,
    /// Depth of the basin cells when it differs from `level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDoc {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringDoc {
    pub levels: Vec<LevelDoc>,
    /// `bonds[i]` maps each vertex of level i+2 to its parent at level i+1.
    #[serde(default)]
    pub bonds: Vec<BTreeMap<String, String>>,
    #[serde(default)]
    pub orbits: Vec<OrbitDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorDoc>,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::input(format!("line {} column {}: {e}", e.line(), e.column()))
}

pub fn to_json<T: Serialize>(x: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(x).map_err(|e| Error::invariant(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// The first `depth` levels of `c` with bonds, orbits and generator.
pub fn dump_covering(c: &Covering, depth: usize) -> Result<CoveringDoc> {
    let mut levels = Vec::new();
    let mut bonds = Vec::new();
    for d in 1..=depth {
        let g = c.level(d)?;
        levels.push(LevelDoc {
            vertices: g.names().to_vec(),
            edges: g
                .edges()
                .map(|(a, b)| (g.name(a).to_string(), g.name(b).to_string()))
                .collect(),
        });
        if d > 1 {
            let up = c.level(d - 1)?;
            let bond = c.bond(d - 1)?;
            bonds.push(
                (0..g.len() as u32)
                    .map(|v| (g.name(v).to_string(), up.name(bond[v as usize]).to_string()))
                    .collect(),
            );
        }
    }
    let orbits = c
        .orbits()
        .iter()
        .map(|o| {
            let g = c.level(o.level)?;
            Ok(OrbitDoc {
                period: o.period,
                level: o.level,
                circuit: o.circuit.iter().map(|&x| g.name(x).to_string()).collect(),
                basin: o.basin.names(c)?,
                basin_depth: (o.basin.depth() != o.level).then_some(o.basin.depth()),
            })
        })
        .collect::<Result<_>>()?;
    let generator = c.generator().map(|g| GeneratorDoc {
        name: g.name().to_string(),
        params: g.params(),
    });
    Ok(CoveringDoc {
        levels,
        bonds,
        orbits,
        generator,
    })
}

/// Builds and validates a covering from a document.
pub fn covering_from_doc(doc: &CoveringDoc, budget: usize) -> Result<Covering> {
    let mut levels = Vec::new();
    for (i, l) in doc.levels.iter().enumerate() {
        let g = LevelGraph::from_named(l.vertices.clone(), &l.edges).map_err(|e| match e {
            Error::Input(m) => Error::input(format!("level {}: {m}", i + 1)),
            e => e,
        })?;
        levels.push(g);
    }
    if doc.bonds.len() + 1 != levels.len() && !levels.is_empty() {
        return Err(Error::input(format!(
            "{} levels need {} bond maps, got {}",
            levels.len(),
            levels.len() - 1,
            doc.bonds.len()
        )));
    }
    let mut bonds = Vec::new();
    for (i, map) in doc.bonds.iter().enumerate() {
        let (up, down) = (&levels[i], &levels[i + 1]);
        let mut bond = vec![0u32; down.len()];
        for v in 0..down.len() as u32 {
            let name = down.name(v);
            let parent = map
                .get(name)
                .ok_or_else(|| Error::input(format!("vertex `{name}` at level {} has no bond entry", i + 2)))?;
            bond[v as usize] = up
                .index_of(parent)
                .ok_or_else(|| Error::input(format!("bond target `{parent}` missing at level {}", i + 1)))?;
        }
        if let Some(k) = map.keys().find(|k| down.index_of(k).is_none()) {
            return Err(Error::input(format!(
                "bond entry for unknown vertex `{k}` at level {}",
                i + 2
            )));
        }
        bonds.push(bond);
    }
    let generator = doc
        .generator
        .as_ref()
        .map(|g| Generator::from_spec(&g.name, &g.params))
        .transpose()?;
    let c = Covering::from_parts(levels, bonds, generator, Vec::new(), budget)?;
    let mut orbits = Vec::new();
    for (i, o) in doc.orbits.iter().enumerate() {
        let g = c.level(o.level)?;
        let circuit = o
            .circuit
            .iter()
            .map(|n| {
                g.index_of(n)
                    .ok_or_else(|| Error::input(format!("orbit {i}: unknown cell `{n}`")))
            })
            .collect::<Result<_>>()?;
        let basin = ClopenSet::from_names(&c, o.basin_depth.unwrap_or(o.level), &o.basin)?;
        orbits.push(OrbitAnnotation {
            period: o.period,
            level: o.level,
            circuit,
            basin,
        });
    }
    let c = c.with_orbits(orbits);
    let report = validate_covering(&c);
    if let Some(v) = report.violations.first() {
        let witness = serde_json::to_string(v).unwrap_or_default();
        return Err(Error::input(format!("invalid covering: {witness}")));
    }
    Ok(c)
}

pub fn parse_covering(text: &str) -> Result<Covering> {
    parse_covering_with_budget(text, DEFAULT_BUDGET)
}

pub fn parse_covering_with_budget(text: &str, budget: usize) -> Result<Covering> {
    let doc: CoveringDoc = serde_json::from_str(text).map_err(json_error)?;
    covering_from_doc(&doc, budget)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub id: String,
    pub cells: Vec<String>,
    pub mark: Mark,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedLevelDoc {
    pub depth: usize,
    pub tau: serde_json::Value,
    pub blocks: Vec<BlockDoc>,
    #[serde(default)]
    pub log: Vec<DescentStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedCoveringDoc {
    pub levels: Vec<MarkedLevelDoc>,
}

pub fn dump_marked(mc: &MarkedCovering, c: &Covering) -> Result<MarkedCoveringDoc> {
    let mut levels = Vec::new();
    for (i, l) in mc.levels.iter().enumerate() {
        let g = c.level(l.depth())?;
        let ids = l.partition().block_ids(c)?;
        let blocks = (0..l.len())
            .map(|b| BlockDoc {
                id: ids[b].clone(),
                cells: l.partition().block(b).iter().map(|&x| g.name(x).to_string()).collect(),
                mark: l.chi[b],
                orbit: l.structure.orbit_of[b],
            })
            .collect();
        levels.push(MarkedLevelDoc {
            depth: l.depth(),
            tau: serde_json::to_value(l.tau()).map_err(|e| Error::invariant(e.to_string()))?,
            blocks,
            log: mc.logs.get(i).cloned().unwrap_or_default(),
        });
    }
    Ok(MarkedCoveringDoc { levels })
}

fn parse_tau(v: &serde_json::Value) -> Result<Tau> {
    match v {
        serde_json::Value::String(s) if s == "inf" => Ok(Tau::Infinite),
        v => v
            .as_u64()
            .map(Tau::Finite)
            .ok_or_else(|| Error::input(format!("tau must be an integer or \"inf\", got {v}"))),
    }
}

pub fn marked_from_doc(doc: &MarkedCoveringDoc, c: &Covering) -> Result<MarkedCovering> {
    let mut levels = Vec::new();
    let mut logs = Vec::new();
    for l in &doc.levels {
        let g = c.level(l.depth)?;
        let mut blocks = Vec::new();
        for b in &l.blocks {
            let cells = b
                .cells
                .iter()
                .map(|n| {
                    g.index_of(n)
                        .ok_or_else(|| Error::input(format!("unknown cell `{n}` at depth {}", l.depth)))
                })
                .collect::<Result<Vec<u32>>>()?;
            blocks.push(cells);
        }
        let partition = Partition::from_blocks(c, l.depth, blocks).map_err(|e| Error::input(e.to_string()))?;
        let ids = partition.block_ids(c)?;
        let by_id: HashMap<&str, &BlockDoc> = l.blocks.iter().map(|b| (b.id.as_str(), b)).collect();
        let mut chi = Vec::new();
        let mut orbit_of = Vec::new();
        for id in &ids {
            let b = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::input(format!("block id `{id}` does not match its least cell")))?;
            chi.push(b.mark);
            orbit_of.push(b.orbit);
        }
        let structure = SupercyclicalLevel::from_parts(c, partition, parse_tau(&l.tau)?, orbit_of)?;
        levels.push(MarkedLevel { structure, chi });
        logs.push(l.log.clone());
    }
    Ok(MarkedCovering { levels, logs })
}

pub fn parse_marked(text: &str, c: &Covering) -> Result<MarkedCovering> {
    let doc: MarkedCoveringDoc = serde_json::from_str(text).map_err(json_error)?;
    marked_from_doc(&doc, c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frac {
    pub num: String,
    pub den: String,
}

impl Frac {
    fn over(num: &BigInt, den: &str) -> Self {
        Frac {
            num: num.to_string(),
            den: den.to_string(),
        }
    }

    fn num_over(&self, den: &BigUint) -> Result<BigInt> {
        let d: BigUint = self
            .den
            .parse()
            .map_err(|_| Error::input(format!("bad denominator `{}`", self.den)))?;
        if &d != den {
            return Err(Error::input("fraction is not over the level denominator"));
        }
        self.num
            .parse()
            .map_err(|_| Error::input(format!("bad numerator `{}`", self.num)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalDoc {
    pub block: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub mid: Frac,
    pub len: Frac,
    /// ℓ = ε·λ^exp
    pub exp: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerDoc {
    pub mid: Frac,
    pub len: Frac,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerSetDoc {
    pub parent: String,
    pub omega: usize,
    pub boxes: Vec<ContainerDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentLevelDoc {
    pub level: usize,
    pub den: String,
    pub lambda: String,
    pub epsilon: String,
    pub intervals: Vec<IntervalDoc>,
    pub a_edges: Vec<(String, String)>,
    pub containers: Vec<ContainerSetDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub depth: usize,
    pub lambda_surrogate: bool,
    /// Level-1 hull; the normalization is x ↦ (x − lo)/(hi − lo).
    pub hull: Option<(String, String)>,
    pub levels: Vec<AssignmentLevelDoc>,
}

pub fn dump_assignment(a: &IntervalAssignment) -> AssignmentDoc {
    let mut levels = Vec::new();
    for (i, l) in a.levels.iter().enumerate() {
        let den = l.den.to_string();
        let up = i.checked_sub(1).map(|k| &a.levels[k]);
        let intervals = (0..l.len())
            .map(|b| IntervalDoc {
                block: l.ids[b].clone(),
                parent: up.map(|u| u.ids[l.parent[b] as usize].clone()),
                mid: Frac::over(&l.mid[b], &den),
                len: Frac::over(&l.len[b], &den),
                exp: l.len_exp[b],
            })
            .collect();
        let containers = l
            .containers
            .iter()
            .map(|cs| ContainerSetDoc {
                parent: up.map(|u| u.ids[cs.parent as usize].clone()).unwrap_or_default(),
                omega: cs.omega,
                boxes: (0..=cs.omega)
                    .map(|k| ContainerDoc {
                        mid: Frac::over(&cs.mids[k], &den),
                        len: Frac::over(&cs.lens[k], &den),
                        members: cs.members[k].iter().map(|&v| l.ids[v as usize].clone()).collect(),
                    })
                    .collect(),
            })
            .collect();
        levels.push(AssignmentLevelDoc {
            level: i + 1,
            den,
            lambda: l.lambda.to_string(),
            epsilon: l.epsilon.to_string(),
            intervals,
            a_edges: l
                .a_edges
                .iter()
                .map(|&(u, v)| (l.ids[u as usize].clone(), l.ids[v as usize].clone()))
                .collect(),
            containers,
        });
    }
    AssignmentDoc {
        depth: a.depth(),
        lambda_surrogate: a.lambda_surrogate,
        hull: a.hull().map(|(lo, hi)| (lo.to_string(), hi.to_string())),
        levels,
    }
}

fn rational(s: &str) -> Result<BigRational> {
    s.parse().map_err(|_| Error::input(format!("bad rational `{s}`")))
}

pub fn assignment_from_doc(doc: &AssignmentDoc) -> Result<IntervalAssignment> {
    let mut levels: Vec<LevelAssignment> = Vec::new();
    for (i, l) in doc.levels.iter().enumerate() {
        if l.level != i + 1 {
            return Err(Error::input(format!("level {} listed at position {}", l.level, i + 1)));
        }
        let den: BigUint = l
            .den
            .parse()
            .map_err(|_| Error::input(format!("bad denominator `{}`", l.den)))?;
        let ids: Vec<String> = l.intervals.iter().map(|x| x.block.clone()).collect();
        let index: HashMap<&str, u32> = ids.iter().enumerate().map(|(k, s)| (s.as_str(), k as u32)).collect();
        let look = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::input(format!("unknown block `{s}` at level {}", i + 1)))
        };
        let up_index: HashMap<&str, u32> = levels
            .last()
            .map(|u| u.ids.iter().enumerate().map(|(k, s)| (s.as_str(), k as u32)).collect())
            .unwrap_or_default();
        let look_up = |s: &str| {
            up_index
                .get(s)
                .copied()
                .ok_or_else(|| Error::input(format!("unknown parent `{s}` at level {}", i + 1)))
        };
        let mut parent = Vec::new();
        let (mut mid, mut len, mut len_exp) = (Vec::new(), Vec::new(), Vec::new());
        for x in &l.intervals {
            if i > 0 {
                let p = x
                    .parent
                    .as_deref()
                    .ok_or_else(|| Error::input(format!("`{}` has no parent", x.block)))?;
                parent.push(look_up(p)?);
            }
            mid.push(x.mid.num_over(&den)?);
            len.push(x.len.num_over(&den)?);
            len_exp.push(x.exp);
        }
        let a_edges = l
            .a_edges
            .iter()
            .map(|(u, v)| Ok((look(u)?, look(v)?)))
            .collect::<Result<_>>()?;
        let containers = l
            .containers
            .iter()
            .map(|cs| {
                Ok(ContainerSet {
                    parent: look_up(&cs.parent)?,
                    omega: cs.omega,
                    mids: cs.boxes.iter().map(|b| b.mid.num_over(&den)).collect::<Result<_>>()?,
                    lens: cs.boxes.iter().map(|b| b.len.num_over(&den)).collect::<Result<_>>()?,
                    members: cs
                        .boxes
                        .iter()
                        .map(|b| b.members.iter().map(|m| look(m)).collect::<Result<_>>())
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        levels.push(LevelAssignment {
            ids,
            parent,
            den,
            mid,
            len,
            len_exp,
            a_edges,
            containers,
            lambda: rational(&l.lambda)?,
            epsilon: rational(&l.epsilon)?,
        });
    }
    Ok(IntervalAssignment {
        levels,
        lambda_surrogate: doc.lambda_surrogate,
    })
}

pub fn parse_assignment(text: &str) -> Result<IntervalAssignment> {
    let doc: AssignmentDoc = serde_json::from_str(text).map_err(json_error)?;
    assignment_from_doc(&doc)
}

/// Plain-text trace: one line per descent step.
pub fn trace_text(mc: &MarkedCovering) -> String {
    let mut s = String::new();
    for line in mc.trace() {
        s.push_str(&line);
        s.push('\n');
    }
    s
}
