//! Interval assignment over a marked covering: rates, the acyclic graphs
//! A_n, interval lengths, midpoints and attracted-orbit containers. All
//! values at level n are integer numerators over one common denominator.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::circuits::topo_order;
use crate::covering::Covering;
use crate::dynamics::{delta_omega, AttractedShape};
use crate::error::{Error, Result};
use crate::marking::{Mark, MarkedLevel};
use crate::rectify::MarkedCovering;

/// λ_n and ε_{n+1} from ε_n, |V_{n+1}| and |E_n|.
pub fn rates(n: usize, v_next: usize, e_n: usize, eps: &BigRational) -> Result<(BigRational, BigRational)> {
    if n == 0 || v_next == 0 || e_n == 0 {
        return Err(Error::precondition("rates need n, |V_{n+1}| and |E_n| positive"));
    }
    let vp1 = BigInt::from(v_next as u64 + 1);
    let lambda = BigRational::new(BigInt::one(), (BigInt::one() << n) * &vp1);
    let shrink = BigRational::from_integer(BigInt::from(4u8) * (BigInt::one() << (n * e_n)) * &vp1);
    let next = eps * pow(&lambda, e_n) / shrink;
    Ok((lambda, next))
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    BigRational::new(x.numer().pow(e as u32), x.denom().pow(e as u32))
}

/// Prime factorization of a small integer.
type Factors = BTreeMap<u64, u64>;

fn factorize(mut n: u64) -> Factors {
    let mut f = Factors::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            *f.entry(p).or_default() += 1;
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        *f.entry(n).or_default() += 1;
    }
    f
}

fn add_times(a: &mut Factors, b: &Factors, times: u64) {
    for (&p, &e) in b {
        *a.entry(p).or_default() += e * times;
    }
}

fn lcm_into(a: &mut Factors, b: &Factors) {
    for (&p, &e) in b {
        let x = a.entry(p).or_default();
        *x = (*x).max(e);
    }
}

fn minus(a: &Factors, b: &Factors) -> Result<Factors> {
    let mut out = a.clone();
    for (&p, &e) in b {
        let x = out.entry(p).or_default();
        if *x < e {
            return Err(Error::invariant("denominator does not divide the level denominator"));
        }
        *x -= e;
    }
    Ok(out)
}

fn value(f: &Factors) -> BigUint {
    f.iter()
        .fold(BigUint::one(), |acc, (&p, &e)| acc * BigUint::from(p).pow(e as u32))
}

fn two_pow(e: u64) -> Factors {
    let mut f = Factors::new();
    if e > 0 {
        f.insert(2, e);
    }
    f
}

fn div_exact(a: &BigInt, d: &BigInt) -> Result<BigInt> {
    let (q, r) = a.div_rem(d);
    if !r.is_zero() {
        return Err(Error::invariant("inexact division in interval placement"));
    }
    Ok(q)
}

/// The acyclic graph A_n: edges into markers dropped, attracted circuit
/// blocks removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AGraph {
    pub present: Vec<bool>,
    pub succ: Vec<Vec<u32>>,
}

impl AGraph {
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, s)| s.iter().map(move |&v| (u as u32, v)))
            .collect()
    }

    pub fn initial(&self) -> Vec<u32> {
        let mut indeg = vec![0usize; self.succ.len()];
        for s in &self.succ {
            for &v in s {
                indeg[v as usize] += 1;
            }
        }
        (0..self.succ.len() as u32)
            .filter(|&v| self.present[v as usize] && indeg[v as usize] == 0)
            .collect()
    }
}

pub fn acyclic_a_n(level: &MarkedLevel) -> Result<AGraph> {
    let shape = delta_omega(&level.structure)?;
    a_graph(level, &shape)
}

fn a_graph(level: &MarkedLevel, shape: &AttractedShape) -> Result<AGraph> {
    let g = &level.structure.graph;
    let present: Vec<bool> = shape.on_circuit.iter().map(|c| !c).collect();
    let succ: Vec<Vec<u32>> = g
        .iter()
        .enumerate()
        .map(|(u, s)| {
            if !present[u] {
                return Vec::new();
            }
            s.iter()
                .copied()
                .filter(|&v| present[v as usize] && level.chi[v as usize] != Mark::Star)
                .collect()
        })
        .collect();
    if topo_order(&succ, Some(&present)).is_none() {
        return Err(Error::invariant("A_n has a cycle: level does not satisfy S1-S4"));
    }
    Ok(AGraph { present, succ })
}

/// Length exponents a with ℓ = ε_n·λ_n^a, and the orbits whose circuit had
/// no outside in-neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthPlan {
    pub exps: Vec<u32>,
    pub fallback: Vec<u32>,
}

pub fn interval_lengths(level: &MarkedLevel, a: &AGraph, shape: &AttractedShape) -> Result<LengthPlan> {
    let n = a.succ.len();
    let order = topo_order(&a.succ, Some(&a.present)).ok_or_else(|| Error::invariant("A_n has a cycle"))?;
    let mut exps = vec![0u32; n];
    for &u in &order {
        for &v in &a.succ[u as usize] {
            exps[v as usize] = exps[v as usize].max(exps[u as usize] + 1);
        }
    }
    let g = &level.structure.graph;
    let mut fallback = Vec::new();
    for (orbit, circ, _) in &shape.circuits {
        let mut worst: Option<u32> = None;
        for (u, s) in g.iter().enumerate() {
            if shape.on_circuit[u] {
                continue;
            }
            if s.iter().any(|v| circ.contains(v)) {
                worst = Some(worst.map_or(exps[u], |w| w.max(exps[u])));
            }
        }
        let e = match worst {
            Some(w) => w + 1,
            None => {
                fallback.push(*orbit);
                1
            }
        };
        for &b in circ {
            exps[b as usize] = e;
        }
    }
    Ok(LengthPlan { exps, fallback })
}

/// A compact interval given by its midpoint and length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub mid: BigRational,
    pub len: BigRational,
}

impl Interval {
    pub fn left(&self) -> BigRational {
        &self.mid - &self.len / BigInt::from(2)
    }

    pub fn right(&self) -> BigRational {
        &self.mid + &self.len / BigInt::from(2)
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.left() <= other.left() && other.right() <= self.right()
    }

    pub fn disjoint(&self, other: &Interval) -> bool {
        self.right() < other.left() || other.right() < self.left()
    }
}

/// Containers I_k(w), k = 0..=ω, for one attracted-circuit parent w.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerSet {
    pub parent: u32,
    pub omega: usize,
    pub mids: Vec<BigInt>,
    pub lens: Vec<BigInt>,
    /// Children placed in each container, in placement order.
    pub members: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAssignment {
    pub ids: Vec<String>,
    /// Parent block at the previous level; empty at level 1.
    pub parent: Vec<u32>,
    pub den: BigUint,
    pub mid: Vec<BigInt>,
    pub len: Vec<BigInt>,
    pub len_exp: Vec<u32>,
    pub a_edges: Vec<(u32, u32)>,
    pub containers: Vec<ContainerSet>,
    pub lambda: BigRational,
    pub epsilon: BigRational,
}

impl LevelAssignment {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn interval(&self, b: usize) -> Interval {
        let den = BigInt::from(self.den.clone());
        Interval {
            mid: BigRational::new(self.mid[b].clone(), den.clone()),
            len: BigRational::new(self.len[b].clone(), den),
        }
    }

    /// Left and right endpoints as numerators over 2·den.
    pub fn ends2(&self, b: usize) -> (BigInt, BigInt) {
        let m2 = &self.mid[b] << 1;
        (&m2 - &self.len[b], &m2 + &self.len[b])
    }

    pub fn children(&self, parents: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); parents];
        for (v, &w) in self.parent.iter().enumerate() {
            out[w as usize].push(v as u32);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalAssignment {
    pub levels: Vec<LevelAssignment>,
    /// Whether the last λ used |V_N| in place of the unbuilt |V_{N+1}|.
    pub lambda_surrogate: bool,
}

impl IntervalAssignment {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, n: usize) -> &LevelAssignment {
        &self.levels[n - 1]
    }

    pub fn interval(&self, n: usize, b: usize) -> Interval {
        self.level(n).interval(b)
    }

    /// den_n / den_{n-1}, for n ≥ 2.
    pub fn ratio(&self, n: usize) -> Result<BigUint> {
        let (q, r) = self.level(n).den.div_rem(&self.level(n - 1).den);
        if !r.is_zero() {
            return Err(Error::invariant(format!(
                "level {n} denominator is not a multiple of level {}",
                n - 1
            )));
        }
        Ok(q)
    }

    /// Bounds of the level-1 hull; the normalization is x ↦ (x − lo)/(hi − lo).
    pub fn hull(&self) -> Option<(BigRational, BigRational)> {
        let l = self.levels.first()?;
        let lo = (0..l.len()).map(|b| l.interval(b).left()).min()?;
        let hi = (0..l.len()).map(|b| l.interval(b).right()).max()?;
        Some((lo, hi))
    }

    pub fn normalized(&self, i: &Interval) -> Interval {
        match self.hull() {
            Some((lo, hi)) => {
                let w = &hi - &lo;
                Interval {
                    mid: (&i.mid - &lo) / &w,
                    len: &i.len / &w,
                }
            }
            None => i.clone(),
        }
    }

    /// ι_N of the last block of a bonding chain (chain[k] is at level k+1).
    pub fn psi_enclosure(&self, chain: &[u32]) -> Result<Interval> {
        if chain.is_empty() || chain.len() > self.depth() {
            return Err(Error::precondition(
                "chain length must be between 1 and the assignment depth",
            ));
        }
        for (k, &b) in chain.iter().enumerate() {
            let l = self.level(k + 1);
            if b as usize >= l.len() {
                return Err(Error::input(format!("chain block {b} out of range at level {}", k + 1)));
            }
            if k > 0 && l.parent[b as usize] != chain[k - 1] {
                return Err(Error::input(format!(
                    "chain is inconsistent at level {}: {} is not a child of {}",
                    k + 1,
                    l.ids[b as usize],
                    self.level(k).ids[chain[k - 1] as usize]
                )));
            }
        }
        Ok(self.interval(chain.len(), *chain.last().expect("nonempty") as usize))
    }
}

struct Prepared {
    shape: AttractedShape,
    plan: LengthPlan,
    a: AGraph,
    edges: usize,
}

/// Builds ι_1..ι_N for the first `depth` levels of `mc` and checks the
/// nesting and disjointness invariants exactly.
pub fn assign(mc: &MarkedCovering, c: &Covering, depth: usize) -> Result<IntervalAssignment> {
    if depth == 0 || depth > mc.len() {
        return Err(Error::precondition(format!(
            "assignment depth {depth} outside 1..={}",
            mc.len()
        )));
    }
    let prep: Vec<Prepared> = mc.levels[..depth]
        .iter()
        .map(|l| {
            let shape = delta_omega(&l.structure)?;
            let a = a_graph(l, &shape)?;
            let plan = interval_lengths(l, &a, &shape)?;
            let edges = l.structure.graph.iter().map(Vec::len).sum();
            Ok(Prepared { shape, plan, a, edges })
        })
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = mc.levels.iter().map(|l| l.len()).collect();
    let lambda_surrogate = mc.len() <= depth;
    let size_next = |n: usize| if n < sizes.len() { sizes[n] } else { sizes[n - 1] };

    let mut out: Vec<LevelAssignment> = Vec::new();
    let mut eps = BigRational::one();
    let mut e_f = Factors::new();
    let mut d_prev = Factors::new();
    for n in 1..=depth {
        let level = &mc.levels[n - 1];
        let p = &prep[n - 1];
        let v_next = size_next(n);
        let (lambda, eps_next) = rates(n, v_next, p.edges.max(1), &eps)?;
        let mut q_f = two_pow(n as u64);
        add_times(&mut q_f, &factorize(v_next as u64 + 1), 1);
        let q = BigInt::from(value(&q_f));
        let a_max = p.plan.exps.iter().copied().max().unwrap_or(0) as u64;
        let mut need_len = e_f.clone();
        add_times(&mut need_len, &q_f, a_max);
        let ids = level.partition().block_ids(c)?;

        let mut d_f;
        let mut parent = Vec::new();
        let mut containers = Vec::new();
        let mut placement: Vec<(u32, u32, u32, u64)> = Vec::new();
        if n == 1 {
            d_f = need_len.clone();
        } else {
            let prev_level = &mc.levels[n - 2];
            let prev = &prep[n - 2];
            parent = level.partition().parent_map(prev_level.partition(), c)?;
            let mut kids = vec![Vec::new(); prev_level.len()];
            for (v, &w) in parent.iter().enumerate() {
                kids[w as usize].push(v as u32);
            }
            let mut extra = two_pow(1);
            for (w, ch) in kids.iter().enumerate() {
                if ch.is_empty() {
                    return Err(Error::invariant(format!("block {} has no children", w)));
                }
                if prev.shape.on_circuit[w] {
                    let orbit = prev_level.structure.orbit_of[w].expect("circuit block is attracted");
                    let omega = p
                        .shape
                        .circuits
                        .iter()
                        .find(|(o, _, _)| *o == orbit)
                        .map(|(_, _, om)| *om)
                        .ok_or_else(|| Error::invariant("attracted orbit lost between levels"))?;
                    let mut members = vec![Vec::new(); omega + 1];
                    for &v in ch {
                        let dv = p.shape.delta[v as usize]
                            .ok_or_else(|| Error::invariant("child of a circuit block is not attracted"))?;
                        if dv > omega {
                            return Err(Error::invariant("δ exceeds ω"));
                        }
                        members[omega - dv].push(v);
                    }
                    let no = n as u64 * omega as u64;
                    lcm_into(&mut extra, &two_pow(3 + no));
                    for m in &members {
                        if !m.is_empty() {
                            let mut f = two_pow(2 + no);
                            add_times(&mut f, &factorize(m.len() as u64 + 1), 1);
                            lcm_into(&mut extra, &f);
                        }
                    }
                    containers.push(ContainerSet {
                        parent: w as u32,
                        omega,
                        mids: Vec::new(),
                        lens: Vec::new(),
                        members,
                    });
                } else {
                    lcm_into(&mut extra, &factorize(ch.len() as u64 + 1));
                    for (k, &v) in ch.iter().enumerate() {
                        placement.push((v, w as u32, k as u32 + 1, ch.len() as u64));
                    }
                }
            }
            d_f = d_prev.clone();
            add_times(&mut d_f, &extra, 1);
            lcm_into(&mut d_f, &need_len);
        }

        let den = value(&d_f);
        let mut lens_by_exp = vec![BigInt::zero(); a_max as usize + 1];
        lens_by_exp[a_max as usize] = BigInt::from(value(&minus(&d_f, &need_len)?));
        for a in (0..a_max as usize).rev() {
            lens_by_exp[a] = &lens_by_exp[a + 1] * &q;
        }
        let len: Vec<BigInt> = p.plan.exps.iter().map(|&a| lens_by_exp[a as usize].clone()).collect();
        let mut mid = vec![BigInt::zero(); level.len()];
        if n == 1 {
            let d = BigInt::from(den.clone());
            for (i, m) in mid.iter_mut().enumerate() {
                *m = BigInt::from(2 * i as u64) * &d;
            }
        } else {
            let up = out.last().expect("previous level");
            let m_ratio = BigInt::from(value(&minus(&d_f, &d_prev)?));
            let scaled = |w: usize| (&up.mid[w] * &m_ratio, &up.len[w] * &m_ratio);
            for &(v, w, k, kk) in &placement {
                let (rw, lw) = scaled(w as usize);
                let left = rw - div_exact(&lw, &BigInt::from(2))?;
                mid[v as usize] = left + div_exact(&(&lw * BigInt::from(k)), &BigInt::from(kk + 1))?;
            }
            for cs in &mut containers {
                let (rw, lw) = scaled(cs.parent as usize);
                let left = rw - div_exact(&lw, &BigInt::from(2))?;
                let no = n * cs.omega;
                let box_len = div_exact(&lw, &(BigInt::from(4) << no))?;
                for k in 0..=cs.omega {
                    let offset = if k < cs.omega {
                        div_exact(&lw, &(BigInt::from(2) << (k * n)))?
                    } else {
                        div_exact(&lw, &(BigInt::from(8) << no))?
                    };
                    let m = &left + offset;
                    let box_left = &m - div_exact(&box_len, &BigInt::from(2))?;
                    let sk = cs.members[k].len() as u64;
                    for (j, &v) in cs.members[k].iter().enumerate() {
                        let step = div_exact(&(&box_len * BigInt::from(j as u64 + 1)), &BigInt::from(sk + 1))?;
                        mid[v as usize] = &box_left + step;
                    }
                    cs.mids.push(m);
                    cs.lens.push(box_len.clone());
                }
            }
        }
        out.push(LevelAssignment {
            ids,
            parent,
            den,
            mid,
            len,
            len_exp: p.plan.exps.clone(),
            a_edges: p.a.edges(),
            containers,
            lambda,
            epsilon: eps.clone(),
        });
        eps = eps_next;
        add_times(&mut e_f, &q_f, p.edges.max(1) as u64);
        add_times(&mut e_f, &two_pow(2 + n as u64 * p.edges.max(1) as u64), 1);
        add_times(&mut e_f, &factorize(v_next as u64 + 1), 1);
        d_prev = d_f;
    }
    let a = IntervalAssignment {
        levels: out,
        lambda_surrogate,
    };
    let report = crate::verify::geometry_suite(&a)?;
    if let Some(v) = report.violations.first() {
        return Err(Error::invariant(format!("assignment violates {v}")));
    }
    Ok(a)
}

/// Whether each length equals ε_n·λ_n^a for its recorded exponent.
pub fn lengths_match_exponents(a: &IntervalAssignment) -> bool {
    a.levels.iter().all(|l| {
        (0..l.len()).all(|b| {
            let want = &l.epsilon * pow(&l.lambda, l.len_exp[b] as usize);
            l.interval(b).len == want
        })
    })
}
