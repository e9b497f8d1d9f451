use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use zerodim::dynamics::delta_omega;
use zerodim::embed::*;
use zerodim::fixtures::*;
use zerodim::rectify::{build_marked_sequence, MarkedCovering};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pipeline(c: &zerodim::covering::Covering, n: usize) -> (MarkedCovering, IntervalAssignment) {
    let mc = build_marked_sequence(c, n + 1).unwrap();
    let a = assign(&mc, c, n).unwrap();
    (mc, a)
}

#[test]
fn rate_examples() {
    let (lambda, eps2) = rates(1, 4, 3, &BigRational::one()).unwrap();
    assert_eq!(lambda, q(1, 10));
    // (1/10)^3 / (4 * 2^3 * 5)
    assert_eq!(eps2, q(1, 1000 * 4 * 8 * 5));
    assert_eq!(eps2, q(1, 160000));
    assert!(rates(0, 4, 3, &BigRational::one()).is_err());
}

proptest! {
    #[test]
    fn rates_stay_in_unit_interval(n in 1usize..6, v in 1usize..50, e in 1usize..8) {
        let (lambda, eps) = rates(n, v, e, &BigRational::one()).unwrap();
        prop_assert!(lambda > BigRational::zero() && lambda < BigRational::one());
        prop_assert!(eps > BigRational::zero() && eps < lambda);
    }
}

/// Lengths by the min rule over A_n, evaluated by memoized recursion on
/// predecessors.
fn oracle_lengths(
    succ: &[Vec<u32>],
    present: &[bool],
    eps: &BigRational,
    lambda: &BigRational,
) -> Vec<Option<BigRational>> {
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (u, s) in succ.iter().enumerate() {
        for &v in s {
            pred[v as usize].push(u);
        }
    }
    fn go(
        v: usize,
        pred: &[Vec<usize>],
        memo: &mut Vec<Option<BigRational>>,
        eps: &BigRational,
        lambda: &BigRational,
    ) -> BigRational {
        if let Some(x) = &memo[v] {
            return x.clone();
        }
        let x = if pred[v].is_empty() {
            eps.clone()
        } else {
            pred[v]
                .clone()
                .into_iter()
                .map(|w| lambda * go(w, pred, memo, eps, lambda))
                .min()
                .unwrap()
        };
        memo[v] = Some(x.clone());
        x
    }
    let mut memo = vec![None; n];
    for v in 0..n {
        if present[v] {
            go(v, &pred, &mut memo, eps, lambda);
        }
    }
    memo
}

#[test]
fn lengths_follow_min_rule() {
    let mut long_paths = 0;
    for c in [attracting_fix(), odometer(2), attracting_two_orbit()] {
        let (mc, a) = pipeline(&c, 4);
        assert!(lengths_match_exponents(&a));
        for n in 1..=4 {
            let level = mc.level(n);
            let g = acyclic_a_n(level).unwrap();
            let la = a.level(n);
            let want = oracle_lengths(&g.succ, &g.present, &la.epsilon, &la.lambda);
            for v in g.initial() {
                assert_eq!(la.interval(v as usize).len, la.epsilon, "initial vertex at level {n}");
            }
            for (v, w) in want.iter().enumerate() {
                if let Some(w) = w {
                    assert_eq!(&la.interval(v).len, w, "level {n} block {}", la.ids[v]);
                    if *w == &la.epsilon * &la.lambda * &la.lambda * &la.lambda {
                        long_paths += 1;
                    }
                }
            }
            for &(w, v) in &la.a_edges {
                assert!(la.interval(v as usize).len <= &la.lambda * la.interval(w as usize).len);
            }
            let eps = &la.epsilon;
            assert!((0..la.len()).all(|b| &la.interval(b).len <= eps));
        }
    }
    assert!(long_paths > 0);
}

#[test]
fn min_rule_on_hand_level() {
    use zerodim::clopen::Partition;
    use zerodim::dynamics::{supercyclical_structure, Tau};
    use zerodim::graph::LevelGraph;
    use zerodim::marking::{Mark, MarkedLevel};
    let names = ["a", "b", "s"].map(String::from).to_vec();
    let edges = [("s", "a"), ("s", "b"), ("a", "b"), ("b", "s")].map(|(x, y)| (x.to_string(), y.to_string()));
    let c = higher_block(LevelGraph::from_named(names, &edges).unwrap()).unwrap();
    let p = Partition::singletons(&c, 1).unwrap();
    let structure = supercyclical_structure(&c, &p, Tau::Finite(1)).unwrap();
    let chi = vec![Mark::Up, Mark::Down, Mark::Star];
    let level = MarkedLevel { structure, chi };
    let g = acyclic_a_n(&level).unwrap();
    assert_eq!(g.initial(), vec![2]);
    let shape = delta_omega(&level.structure).unwrap();
    // b has in-neighbours s (length eps) and a (length eps * lambda)
    let plan = interval_lengths(&level, &g, &shape).unwrap();
    assert_eq!(plan.exps, vec![1, 2, 0]);
    let (lambda, _) = rates(1, 3, 4, &BigRational::one()).unwrap();
    let want = oracle_lengths(&g.succ, &g.present, &BigRational::one(), &lambda);
    let got: Vec<Option<BigRational>> = plan.exps.iter().map(|&e| Some(pow(&lambda, e))).collect();
    assert_eq!(got, want);
}

fn pow(x: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

#[test]
fn circuit_length_is_lambda_times_min_in_neighbour() {
    let c = attracting_fix();
    let (mc, a) = pipeline(&c, 4);
    for n in 1..=4 {
        let s = &mc.level(n).structure;
        let shape = delta_omega(s).unwrap();
        let la = a.level(n);
        for (_, circ, _) in &shape.circuits {
            let m = (0..la.len())
                .filter(|&u| !shape.on_circuit[u] && s.graph[u].iter().any(|v| circ.contains(v)))
                .map(|u| la.interval(u).len)
                .min()
                .expect("circuit has an outside in-neighbour");
            for &b in circ {
                assert_eq!(la.interval(b as usize).len, &la.lambda * &m);
            }
        }
    }
}

#[test]
fn case_one_midpoints() {
    // three children of a parent of length L sit at L/4, L/2, 3L/4
    let offsets: Vec<BigRational> = (1..=3).map(|k| q(k, 4)).collect();
    assert_eq!(offsets, vec![q(1, 4), q(1, 2), q(3, 4)]);
    let mut seen = 0;
    for c in [odometer(2), attracting_fix()] {
        let (mc, a) = pipeline(&c, 4);
        for n in 2..=4 {
            let shape = delta_omega(&mc.level(n - 1).structure).unwrap();
            let (up, la) = (a.level(n - 1), a.level(n));
            let kids = la.children(up.len());
            for (w, ch) in kids.iter().enumerate() {
                if shape.on_circuit[w] {
                    continue;
                }
                let pw = up.interval(w);
                let k1 = BigInt::from(ch.len() as u64 + 1);
                for (k, &v) in ch.iter().enumerate() {
                    let want = pw.left() + &pw.len * BigInt::from(k as u64 + 1) / &k1;
                    assert_eq!(la.interval(v as usize).mid, want);
                    seen += 1;
                }
                if ch.len() == 1 {
                    assert_eq!(la.interval(ch[0] as usize).mid, pw.mid);
                }
            }
        }
    }
    assert!(seen > 0);
}

#[test]
fn container_placement() {
    let c = attracting_fix();
    let (mc, a) = pipeline(&c, 4);
    let mut checked = 0;
    for n in 2..=4 {
        let (up, la) = (a.level(n - 1), a.level(n));
        let shape = delta_omega(&mc.level(n).structure).unwrap();
        for cs in &la.containers {
            let pw = up.interval(cs.parent as usize);
            let (left, l) = (pw.left(), pw.len.clone());
            let two = |e: usize| BigRational::from_integer(BigInt::one() << e);
            let box_len = &l / BigInt::from(4) / two(n * cs.omega);
            for k in 0..=cs.omega {
                let off = if k < cs.omega {
                    &l / BigInt::from(2) / two(k * n)
                } else {
                    &l / BigInt::from(8) / two(n * cs.omega)
                };
                let den = BigInt::from(la.den.clone());
                assert_eq!(BigRational::new(cs.mids[k].clone(), den.clone()), &left + off);
                assert_eq!(BigRational::new(cs.lens[k].clone(), den), box_len);
                let s = BigInt::from(cs.members[k].len() as u64 + 1);
                for (j, &v) in cs.members[k].iter().enumerate() {
                    assert_eq!(shape.delta[v as usize], Some(cs.omega - k));
                    let want = &left + off_left(&l, k, cs.omega, n) + &box_len * BigInt::from(j as u64 + 1) / &s;
                    assert_eq!(la.interval(v as usize).mid, want);
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

/// Left end of container k relative to the parent's left end.
fn off_left(l: &BigRational, k: usize, omega: usize, n: usize) -> BigRational {
    let two = |e: usize| BigRational::from_integer(BigInt::one() << e);
    let mid = if k < omega {
        l / BigInt::from(2) / two(k * n)
    } else {
        l / BigInt::from(8) / two(n * omega)
    };
    mid - l / BigInt::from(8) / two(n * omega)
}

#[test]
fn container_formula_example() {
    // n = 2, omega = 2, parent [0, 1]
    let l = BigRational::one();
    let mids: Vec<BigRational> = (0..=2).map(|k| off_left(&l, k, 2, 2) + q(1, 128)).collect();
    assert_eq!(mids, vec![q(1, 2), q(1, 8), q(1, 128)]);
}

fn chain_to(a: &IntervalAssignment, b: u32) -> Vec<u32> {
    let mut chain = vec![b];
    for n in (2..=a.depth()).rev() {
        chain.push(a.level(n).parent[*chain.last().unwrap() as usize]);
    }
    chain.reverse();
    chain
}

#[test]
fn psi_enclosures_nest_and_shrink() {
    let c = odometer(2);
    let (_, a) = pipeline(&c, 4);
    for b in [0u32, 5, 100] {
        let chain = chain_to(&a, b);
        for n in 2..=4 {
            let i = a.psi_enclosure(&chain[..n]).unwrap();
            let outer = a.psi_enclosure(&chain[..n - 1]).unwrap();
            assert!(outer.contains(&i));
            assert!(i.len <= q(1, 4i64.pow(n as u32)));
        }
    }
    let x = chain_to(&a, 0);
    let y = chain_to(&a, 255);
    let l = (0..4).find(|&k| x[k] != y[k]).unwrap() + 1;
    let ix = a.psi_enclosure(&x[..l]).unwrap();
    let iy = a.psi_enclosure(&y[..l]).unwrap();
    assert!(ix.disjoint(&iy));
    let mut bad = x.clone();
    bad[3] = if a.level(4).parent[0] == a.level(4).parent[1] {
        200
    } else {
        1
    };
    assert_eq!(a.psi_enclosure(&bad).unwrap_err().exit_code(), 1);
}

#[test]
fn fixed_point_drifts_left() {
    let c = attracting_fix();
    let (mc, a) = pipeline(&c, 4);
    let p: Vec<u32> = (1..=4)
        .map(|n| a.level(n).ids.iter().position(|s| s == "p").unwrap() as u32)
        .collect();
    let mut prev: Option<Interval> = None;
    for n in 1..=4 {
        let i = a.psi_enclosure(&p[..n]).unwrap();
        if let Some(o) = &prev {
            assert!(o.contains(&i));
            assert!(i.mid < o.mid, "level {n}");
            let shape = delta_omega(&mc.level(n).structure).unwrap();
            let cs = a.level(n).containers.iter().find(|cs| cs.parent == p[n - 2]).unwrap();
            assert!(cs.members[cs.omega].contains(&p[n - 1]));
            assert_eq!(shape.delta[p[n - 1] as usize], Some(0));
        }
        prev = Some(i);
    }
}

#[test]
fn single_level_assignment() {
    let c = attracting_fix();
    let mc = build_marked_sequence(&c, 1).unwrap();
    let a = assign(&mc, &c, 1).unwrap();
    assert!(a.lambda_surrogate);
    let l = a.level(1);
    let mids: Vec<BigRational> = (0..l.len()).map(|b| l.interval(b).mid).collect();
    let want: Vec<BigRational> = (0..l.len()).map(|i| q(2 * i as i64, 1)).collect();
    assert_eq!(mids, want);
    let (lo, hi) = a.hull().unwrap();
    assert_eq!(
        a.normalized(&Interval {
            mid: lo.clone(),
            len: BigRational::zero()
        })
        .mid,
        BigRational::zero()
    );
    assert_eq!(
        a.normalized(&Interval {
            mid: hi,
            len: BigRational::zero()
        })
        .mid,
        BigRational::one()
    );
    assert!(assign(&mc, &c, 2).is_err());
}

#[test]
fn level_denominators_nest() {
    let c = attracting_two_orbit();
    let (_, a) = pipeline(&c, 4);
    assert!(!a.lambda_surrogate);
    for n in 2..=4 {
        assert!(a.ratio(n).unwrap() > num_bigint::BigUint::one());
    }
}
