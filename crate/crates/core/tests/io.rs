use zerodim::embed::{assign, IntervalAssignment};
use zerodim::fixtures::*;
use zerodim::io::*;
use zerodim::rectify::build_marked_sequence;
use zerodim::render::render_svg;

fn roundtrip_covering(c: &zerodim::covering::Covering, depth: usize) {
    let text = to_json(&dump_covering(c, depth).unwrap()).unwrap();
    let back = parse_covering(&text).unwrap();
    let again = to_json(&dump_covering(&back, depth).unwrap()).unwrap();
    assert_eq!(text, again);
    for d in 1..=depth {
        assert_eq!(*c.level(d).unwrap(), *back.level(d).unwrap());
        if d > 1 {
            assert_eq!(*c.bond(d - 1).unwrap(), *back.bond(d - 1).unwrap());
        }
    }
    assert_eq!(c.orbits(), back.orbits());
}

#[test]
fn covering_roundtrip_on_fixtures() {
    for c in [
        odometer(2),
        full_shift(),
        attracting_fix(),
        attracting_two_orbit(),
        merged_orbits(),
    ] {
        roundtrip_covering(&c, 4);
    }
    for seed in 0..5 {
        roundtrip_covering(&random_covering(seed, 4, 30).unwrap(), 4);
    }
}

#[test]
fn covering_without_generator_stops_at_dump_depth() {
    let c = random_covering(3, 3, 20).unwrap();
    let mut doc = dump_covering(&c, 3).unwrap();
    doc.generator = None;
    let back = covering_from_doc(&doc, 64).unwrap();
    assert_eq!(back.level(4).unwrap_err().exit_code(), 4);
}

#[test]
fn missing_bond_entry_names_the_vertex() {
    let c = odometer(2);
    let mut doc = dump_covering(&c, 3).unwrap();
    let orphan = doc.bonds[1].keys().next().unwrap().clone();
    doc.bonds[1].remove(&orphan);
    let e = covering_from_doc(&doc, 64).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains(&orphan), "{e}");
}

#[test]
fn non_morphism_edge_is_rejected() {
    let c = odometer(2);
    let mut doc = dump_covering(&c, 2).unwrap();
    doc.generator = None;
    // 00 -> 01 maps to 0 -> 0, which is not an edge of the level-1 cycle
    let l2 = &mut doc.levels[1];
    let (a, b) = (l2.vertices[0].clone(), l2.vertices[2].clone());
    l2.edges.push((a.clone(), b.clone()));
    let e = covering_from_doc(&doc, 64).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    let msg = e.to_string();
    assert!(
        msg.contains("non-morphism") && msg.contains(&a) && msg.contains(&b),
        "{msg}"
    );
}

#[test]
fn syntax_errors_report_position() {
    let e = parse_covering("{\n  \"levels\": [\n    {\"vertices\": [\"a\"], }\n]}").unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains("line 3"), "{e}");
}

#[test]
fn marked_roundtrip() {
    for c in [attracting_fix(), odometer(2), attracting_two_orbit()] {
        let mc = build_marked_sequence(&c, 3).unwrap();
        let text = to_json(&dump_marked(&mc, &c).unwrap()).unwrap();
        let back = parse_marked(&text, &c).unwrap();
        assert_eq!(back, mc);
        assert_eq!(text, to_json(&dump_marked(&back, &c).unwrap()).unwrap());
    }
}

#[test]
fn marked_dump_format() {
    let c = attracting_fix();
    let mc = build_marked_sequence(&c, 2).unwrap();
    let v: serde_json::Value = serde_json::from_str(&to_json(&dump_marked(&mc, &c).unwrap()).unwrap()).unwrap();
    let l1 = &v["levels"][0];
    assert!(l1["tau"].is_u64());
    let marks: Vec<&str> = l1["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["mark"].as_str().unwrap())
        .collect();
    assert!(marks.iter().all(|m| ["up", "star", "zero", "down"].contains(m)));
    assert!(marks.contains(&"star") && marks.contains(&"zero"));
}

fn assignment(c: &zerodim::covering::Covering, n: usize) -> IntervalAssignment {
    let mc = build_marked_sequence(c, n).unwrap();
    assign(&mc, c, n).unwrap()
}

#[test]
fn assignment_roundtrip() {
    for c in [attracting_fix(), odometer(2)] {
        let a = assignment(&c, 3);
        let text = to_json(&dump_assignment(&a)).unwrap();
        let back = parse_assignment(&text).unwrap();
        assert_eq!(back, a);
        let doc = dump_assignment(&a);
        let l2 = &doc.levels[1];
        assert!(l2.intervals.iter().all(|x| x.mid.den == l2.den && x.len.den == l2.den));
        assert!(l2.intervals.iter().all(|x| x.parent.is_some()));
    }
}

#[test]
fn assignment_parse_rejects_foreign_denominator() {
    let a = assignment(&odometer(2), 2);
    let mut doc = dump_assignment(&a);
    doc.levels[1].intervals[0].len.den = "7".into();
    assert_eq!(assignment_from_doc(&doc).unwrap_err().exit_code(), 1);
}

fn svg_doc(s: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(s).expect("well-formed SVG")
}

#[test]
fn render_single_level() {
    let a = assignment(&odometer(2), 1);
    let s = render_svg(&a);
    let d = svg_doc(&s);
    let rects: Vec<_> = d
        .descendants()
        .filter(|n| n.attribute("class") == Some("interval"))
        .collect();
    assert_eq!(rects.len(), a.level(1).len());
    let mut xs: Vec<(f64, f64)> = rects
        .iter()
        .map(|r| {
            let x: f64 = r.attribute("x").unwrap().parse().unwrap();
            let w: f64 = r.attribute("width").unwrap().parse().unwrap();
            (x, x + w)
        })
        .collect();
    xs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    assert!(xs.windows(2).all(|w| w[0].1 < w[1].0));
}

#[test]
fn render_containers_under_circuit_blocks() {
    let c = attracting_fix();
    let a = assignment(&c, 3);
    let s = render_svg(&a);
    let d = svg_doc(&s);
    let boxes = d
        .descendants()
        .filter(|n| n.attribute("class") == Some("container"))
        .count();
    let expected: usize = a
        .levels
        .iter()
        .flat_map(|l| l.containers.iter())
        .map(|cs| cs.members.iter().filter(|m| !m.is_empty()).count())
        .sum();
    assert!(expected > 0);
    assert_eq!(boxes, expected);
    let odo = render_svg(&assignment(&odometer(2), 3));
    assert_eq!(
        svg_doc(&odo)
            .descendants()
            .filter(|n| n.attribute("class") == Some("container"))
            .count(),
        0
    );
}

#[test]
fn render_empty_assignment() {
    let a = IntervalAssignment {
        levels: Vec::new(),
        lambda_surrogate: false,
    };
    let s = render_svg(&a);
    let d = svg_doc(&s);
    assert_eq!(d.root_element().tag_name().name(), "svg");
    assert_eq!(
        d.descendants()
            .filter(|n| n.attribute("class") == Some("interval"))
            .count(),
        0
    );
}

#[test]
fn dumps_are_deterministic() {
    let c = random_covering(11, 4, 40).unwrap();
    let x = to_json(&dump_covering(&c, 4).unwrap()).unwrap();
    let y = to_json(&dump_covering(&random_covering(11, 4, 40).unwrap(), 4).unwrap()).unwrap();
    assert_eq!(x, y);
    let a1 = to_json(&dump_assignment(&assignment(&attracting_fix(), 3))).unwrap();
    let a2 = to_json(&dump_assignment(&assignment(&attracting_fix(), 3))).unwrap();
    assert_eq!(a1, a2);
}
