use zerodim::clopen::Partition;
use zerodim::covering::Covering;
use zerodim::dynamics::{supercyclical_structure, Tau};
use zerodim::fixtures::*;
use zerodim::graph::LevelGraph;
use zerodim::marking::*;
use zerodim::rectify::*;

fn named(vs: &[&str], es: &[(&str, &str)]) -> LevelGraph {
    LevelGraph::from_named(
        vs.iter().map(|s| s.to_string()).collect(),
        &es.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

/// Two branches s→a1→a2→x and s→b1→b2→y merging back through x, y, t.
fn two_branch() -> (Covering, MarkedLevel) {
    let g = named(
        &["a1", "a2", "b1", "b2", "s", "t", "x", "y"],
        &[
            ("s", "a1"),
            ("s", "b1"),
            ("a1", "a2"),
            ("a2", "x"),
            ("b1", "b2"),
            ("b2", "y"),
            ("x", "s"),
            ("x", "t"),
            ("y", "s"),
            ("y", "t"),
            ("t", "s"),
        ],
    );
    let c = higher_block(g).unwrap();
    let p = Partition::singletons(&c, 1).unwrap();
    let structure = supercyclical_structure(&c, &p, Tau::Finite(1)).unwrap();
    let ids = p.block_ids(&c).unwrap();
    let chi = ids
        .iter()
        .map(|id| match id.as_str() {
            "s" => Mark::Star,
            "a1" | "b1" => Mark::Up,
            _ => Mark::Down,
        })
        .collect();
    (c, MarkedLevel { structure, chi })
}

#[test]
fn cut_graph_of_two_branch_level() {
    let (c, level) = two_branch();
    assert!(well_marked_violations(&level, &c).unwrap().is_empty());
    let v = build_acyclic_view(&level).unwrap();
    assert!(v.removed.is_empty());
    assert_eq!(v.copy_of, vec![4]);
    let copy = v.copy(4).unwrap();
    for src in [5u32, 6, 7] {
        assert!(v.succ[src as usize].contains(&copy));
    }
    let m = delta_mu(&v);
    assert_eq!((m.delta, m.mu), (3, 2));
    assert_eq!(m.realizers, vec![6, 7]);
}

#[test]
fn descent_sequence_is_lexicographic() {
    let (c, level) = two_branch();
    let r = rectify_level(&level, &c).unwrap();
    let keys: Vec<(usize, usize)> = r.log.iter().map(|s| (s.delta, s.mu)).collect();
    assert_eq!(keys, vec![(3, 2), (3, 1), (2, 2), (2, 1), (1, 2), (1, 1), (0, 0)]);
    let splits: Vec<&str> = r.log.iter().filter_map(|s| s.split.as_deref()).collect();
    assert_eq!(splits[0], "x");
    assert!(splits[1].starts_with("y"), "{splits:?}");
    assert!(r.initial_splits.is_empty());
    assert!(non_marker_divergent(&r.level).is_empty());
    assert!(well_marked_violations(&r.level, &c).unwrap().is_empty());
    assert!(r.level.partition().refines(level.partition(), &c).unwrap());
}

#[test]
fn single_displacement_decreases_measure() {
    let (c, level) = two_branch();
    let next = displace(&level, 6, &c).unwrap();
    let m = delta_mu(&build_acyclic_view(&next).unwrap());
    assert_eq!((m.delta, m.mu), (3, 1));
    assert!(displace(&level, 4, &c).unwrap_err().exit_code() == 2);
    assert!(displace(&level, 0, &c).is_err());
}

#[test]
fn zero_part_is_cut() {
    let c = attracting_fix();
    let level = bootstrap_well_mark(&c).unwrap();
    let r = rectify_level(&level, &c).unwrap();
    let v = build_acyclic_view(&r.level).unwrap();
    let ids = r.level.partition().block_ids(&c).unwrap();
    let removed: Vec<&str> = v.removed.iter().map(|&b| ids[b as usize].as_str()).collect();
    assert!(removed.contains(&"p"), "{removed:?}");
    assert_eq!(r.log.len(), 1);
}

#[test]
fn marked_sequences() {
    for (c, n) in [(odometer(2), 4), (attracting_fix(), 4), (attracting_two_orbit(), 3)] {
        let mc = build_marked_sequence(&c, n).unwrap();
        assert_eq!(mc.len(), n);
        for k in 1..=n {
            let l = mc.level(k);
            assert!(well_marked_violations(l, &c).unwrap().is_empty());
            assert!(non_marker_divergent(l).is_empty());
            assert!(l.tau().admits(k));
            if k > 1 {
                let prev = mc.level(k - 1);
                assert!(l.partition().refines(prev.partition(), &c).unwrap());
                assert!(relative_violations(l, prev, &c).unwrap().is_empty());
            }
        }
        assert!(mc.trace().iter().all(|s| s.starts_with("level ")));
    }
}

#[test]
fn sequence_refuses_shift() {
    let c = full_shift();
    let e = build_marked_sequence(&c, 2).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}
