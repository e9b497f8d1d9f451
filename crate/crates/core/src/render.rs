//! SVG rendering of an interval assignment: one band per level, children
//! drawn inside their parents with widths on a log₂-length scale.

use std::fmt::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::embed::{IntervalAssignment, LevelAssignment};

const WIDTH: f64 = 1200.0;
const BAND: f64 = 56.0;
const MARGIN: f64 = 24.0;
const LABEL: f64 = 64.0;
/// Longest exact fraction printed in a tooltip.
const EXACT_CHARS: usize = 80;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(53);
    let top = (x >> shift).to_f64().unwrap_or(1.0);
    top.log2() + shift as f64
}

/// log₂ of num/den for positive num.
fn log2_ratio(num: &BigInt, den: &BigUint) -> f64 {
    log2_big(num.magnitude()) - log2_big(den)
}

fn exact_label(num: &BigInt, den: &BigUint) -> Option<String> {
    let r = BigRational::new(num.clone(), BigInt::from(den.clone())).to_string();
    (r.len() <= EXACT_CHARS).then_some(r)
}

/// Horizontal extent of every block, level by level.
fn layout(a: &IntervalAssignment) -> Vec<Vec<(f64, f64)>> {
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    for (i, l) in a.levels.iter().enumerate() {
        let logs: Vec<f64> = (0..l.len()).map(|b| log2_ratio(&l.len[b], &l.den)).collect();
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let weight = |b: usize| 1.0 + (logs[b] - lo);
        let mut ext = vec![(0.0, 0.0); l.len()];
        let groups: Vec<((f64, f64), Vec<u32>)> = if i == 0 {
            vec![((LABEL, WIDTH - MARGIN), (0..l.len() as u32).collect())]
        } else {
            let up = &out[i - 1];
            l.children(up.len())
                .into_iter()
                .enumerate()
                .map(|(w, ch)| (up[w], ch))
                .collect()
        };
        for ((x0, x1), mut ch) in groups {
            ch.sort_by(|&p, &q| l.mid[p as usize].cmp(&l.mid[q as usize]));
            let total: f64 = ch.iter().map(|&v| weight(v as usize)).sum();
            let span = x1 - x0;
            let mut x = x0;
            for &v in &ch {
                let slot = span * weight(v as usize) / total;
                let pad = slot * 0.08;
                ext[v as usize] = (x + pad, x + slot - pad);
                x += slot;
            }
        }
        out.push(ext);
    }
    out
}

fn tooltip(l: &LevelAssignment, b: usize) -> String {
    let log = log2_ratio(&l.len[b], &l.den);
    let mut t = format!("{} len 2^{:.3}", l.ids[b], log);
    if let (Some(m), Some(n)) = (exact_label(&l.mid[b], &l.den), exact_label(&l.len[b], &l.den)) {
        let _ = write!(t, " mid {m} len {n}");
    }
    escape(&t)
}

pub fn render_svg(a: &IntervalAssignment) -> String {
    let ext = layout(a);
    let height = 2.0 * MARGIN + BAND * a.depth() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>"#
    );
    for (i, l) in a.levels.iter().enumerate() {
        let y = MARGIN + BAND * i as f64;
        let _ = writeln!(s, r#"<g class="level" data-level="{}">"#, i + 1);
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}" font-size="12" font-family="monospace">level {}</text>"#,
            y + BAND / 2.0,
            i + 1
        );
        for cs in &l.containers {
            for members in &cs.members {
                if members.is_empty() {
                    continue;
                }
                let x0 = members
                    .iter()
                    .map(|&v| ext[i][v as usize].0)
                    .fold(f64::INFINITY, f64::min);
                let x1 = members
                    .iter()
                    .map(|&v| ext[i][v as usize].1)
                    .fold(f64::NEG_INFINITY, f64::max);
                let _ = writeln!(
                    s,
                    r#"<rect class="container" x="{:.3}" y="{:.1}" width="{:.3}" height="{:.1}" fill="none" stroke="firebrick" stroke-dasharray="3 2"/>"#,
                    x0 - 1.0,
                    y + 4.0,
                    x1 - x0 + 2.0,
                    BAND - 12.0
                );
            }
        }
        for b in 0..l.len() {
            let (x0, x1) = ext[i][b];
            let _ = writeln!(
                s,
                r#"<rect class="interval" x="{:.3}" y="{:.1}" width="{:.3}" height="{:.1}" fill="steelblue" fill-opacity="0.6" stroke="navy" stroke-width="0.5"><title>{}</title></rect>"#,
                x0,
                y + 8.0,
                (x1 - x0).max(0.05),
                BAND - 20.0,
                tooltip(l, b)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}
