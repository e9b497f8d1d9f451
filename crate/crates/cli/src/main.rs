use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use zerodim::covering::{validate_covering, Covering, DEFAULT_BUDGET};
use zerodim::dynamics::{aperiodicity_certificate, periodic_candidates};
use zerodim::embed::{assign, IntervalAssignment};
use zerodim::fixtures::generate;
use zerodim::io::{dump_assignment, dump_marked, parse_assignment, parse_covering_with_budget, to_json, trace_text};
use zerodim::rectify::{build_marked_sequence, MarkedCovering};
use zerodim::render::render_svg;
use zerodim::verify::{contraction_certificate, geometry_suite, negative_detector, structural_suite};
use zerodim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "zerodim",
    version,
    about = "Graph coverings of Cantor systems and exact interval embeddings"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the covering axioms on the materialized levels
    Validate(Opts),
    /// Minimal circuit lengths, periodic candidates and non-attracting orbits
    Analyze(Opts),
    /// Build the marked covering
    Pipeline(Opts),
    /// Build the interval assignment
    Embed(Opts),
    /// Run the structural, geometry and contraction suites
    Verify(Opts),
    /// Draw an assignment as SVG (`--in` takes an assignment dump)
    Render(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    /// Built-in generator name
    #[arg(long = "gen")]
    generator: Option<String>,
    /// Generator parameter, repeatable
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// Input file
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Number of levels to build
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Deepest level a generator may build
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Target contraction exponent
    #[arg(long, default_value_t = 1)]
    exponent: usize,
    /// Output directory for artifacts; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized generators
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Longest period searched for periodic candidates
    #[arg(long, default_value_t = 2)]
    max_period: usize,
}

impl Opts {
    fn check(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::input("--depth must be at least 1"));
        }
        if self.budget < self.depth {
            return Err(Error::input("--budget must be at least --depth"));
        }
        if self.exponent == 0 {
            return Err(Error::input("--exponent must be at least 1"));
        }
        Ok(())
    }

    fn params(&self) -> Result<Value> {
        let mut m = Map::new();
        for p in &self.params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::input(format!("parameter `{p}` is not K=V")))?;
            let v = v.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::from(v));
            m.insert(k.to_string(), v);
        }
        if !m.contains_key("seed") {
            m.insert("seed".into(), Value::from(self.seed));
        }
        Ok(Value::Object(m))
    }

    fn covering(&self) -> Result<Covering> {
        match (&self.generator, &self.input) {
            (Some(name), None) => generate(name, &self.params()?, self.budget),
            (None, Some(path)) => parse_covering_with_budget(&read(path)?, self.budget),
            (Some(_), Some(_)) => Err(Error::input("give either --gen or --in, not both")),
            (None, None) => Err(Error::input("no covering: give --gen NAME or --in FILE")),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

/// Writes artifacts under `--out`, or the primary one to stdout.
struct Sink<'a> {
    out: Option<&'a Path>,
}

impl Sink<'_> {
    fn put(&self, name: &str, body: &str, primary: bool) -> Result<()> {
        match self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::input(format!("{}: {e}", dir.display())))?;
                let p = dir.join(name);
                fs::write(&p, body).map_err(|e| Error::input(format!("{}: {e}", p.display())))?;
                println!("wrote {}", p.display());
            }
            None if primary => print!("{body}"),
            None => {}
        }
        Ok(())
    }
}

fn refuse_non_attracting(c: &Covering, o: &Opts) -> Result<()> {
    let r = negative_detector(c, o.depth, o.max_period).map_err(|e| e.at("negative detector"))?;
    let bad = r.non_attracting();
    if bad.is_empty() {
        return Ok(());
    }
    let detail = bad
        .iter()
        .map(|v| {
            format!(
                "period {} orbit [{}] non-attracting up to depth {}",
                v.period,
                v.circuit.join(" "),
                o.depth
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::NotPurelyAttracting { depth: o.depth, detail })
}

/// Marked covering one level deeper than needed when the budget allows, so
/// the last shrinking rate uses the true next level size.
fn marked(c: &Covering, o: &Opts, extra: usize) -> Result<MarkedCovering> {
    refuse_non_attracting(c, o)?;
    let want = o.depth + extra;
    match build_marked_sequence(c, want) {
        Err(e) if extra > 0 && e.is_budget() => build_marked_sequence(c, o.depth),
        r => r,
    }
    .map_err(|e| e.at("pipeline"))
}

fn embedding(c: &Covering, o: &Opts) -> Result<(MarkedCovering, IntervalAssignment)> {
    let mc = marked(c, o, 1)?;
    let a = assign(&mc, c, o.depth).map_err(|e| e.at("embed"))?;
    Ok((mc, a))
}

fn validate(o: &Opts) -> Result<bool> {
    let c = o.covering()?;
    c.level(o.depth)?;
    let r = validate_covering(&c);
    Sink { out: o.out.as_deref() }.put("validation.json", &to_json(&r)?, o.out.is_none())?;
    if o.out.is_some() {
        println!("levels checked {}, violations {}", r.levels_checked, r.violations.len());
    }
    Ok(r.is_valid())
}

fn analyze(o: &Opts) -> Result<bool> {
    let c = o.covering()?;
    let ap = aperiodicity_certificate(&c, o.depth, None).map_err(|e| e.at("aperiodicity"))?;
    let cands = periodic_candidates(&c, o.max_period, o.depth)?;
    let neg = negative_detector(&c, o.depth, o.max_period)?;
    let nu: Vec<String> = ap.nu.iter().map(|x| x.to_string()).collect();
    println!("nu: {}", nu.join(" "));
    println!("verdict: {}", ap.verdict);
    println!("periodic candidates (period <= {}): {}", o.max_period, cands.len());
    for v in &neg.candidates {
        let status = match v.witness_depth {
            Some(d) => format!("attracting witness at depth {d}"),
            None => format!("non-attracting up to depth {}", o.depth),
        };
        println!(
            "  period {} from depth {} [{}]: {status}",
            v.period,
            v.start,
            v.circuit.join(" ")
        );
    }
    let doc = json!({
        "nu": ap.nu,
        "verdict": ap.verdict.to_string(),
        "candidates": cands.len(),
        "negative_detector": neg,
    });
    if o.out.is_some() {
        Sink { out: o.out.as_deref() }.put("analyze.json", &to_json(&doc)?, false)?;
    }
    Ok(true)
}

fn pipeline(o: &Opts) -> Result<bool> {
    let c = o.covering()?;
    let mc = marked(&c, o, 0)?;
    let sink = Sink { out: o.out.as_deref() };
    sink.put("marked.json", &to_json(&dump_marked(&mc, &c)?)?, true)?;
    sink.put("trace.txt", &trace_text(&mc), false)?;
    if o.out.is_some() {
        for (i, l) in mc.levels.iter().enumerate() {
            println!(
                "level {} depth {} blocks {} tau {} stars {}",
                i + 1,
                l.depth(),
                l.len(),
                l.tau(),
                l.stars().len()
            );
        }
    }
    Ok(true)
}

fn embed(o: &Opts) -> Result<bool> {
    let c = o.covering()?;
    let (_, a) = embedding(&c, o)?;
    Sink { out: o.out.as_deref() }.put("assignment.json", &to_json(&dump_assignment(&a))?, true)?;
    Ok(true)
}

fn verify(o: &Opts) -> Result<bool> {
    let c = o.covering()?;
    let (mc, a) = embedding(&c, o)?;
    let sink = Sink { out: o.out.as_deref() };
    let mut ok = true;

    let s = structural_suite(&mc, &c).map_err(|e| e.at("structural suite"))?;
    println!("structural: {} checks, {} failures", s.checks.len(), s.failures().len());
    for f in s.failures() {
        println!(
            "  FAIL {} level {}: {}",
            f.name,
            f.level,
            f.witness.as_deref().unwrap_or("")
        );
    }
    ok &= s.passed();
    sink.put("structural.json", &to_json(&s)?, false)?;

    let g = geometry_suite(&a).map_err(|e| e.at("geometry suite"))?;
    println!("geometry: {} checks, {} violations", g.checks, g.violations.len());
    ok &= g.passed();
    sink.put("geometry.json", &to_json(&g)?, false)?;

    let n = o.exponent;
    if o.depth >= n + 4 && mc.len() >= o.depth {
        let r = contraction_certificate(&a, &mc, n).map_err(|e| e.at("contraction certificate"))?;
        println!(
            "contraction n={n} N={}: {} pairs, {} eligible, {} certified, {} failures, max ratio {}",
            r.depth,
            r.pairs_total,
            r.pairs_eligible,
            r.pairs_certified,
            r.failure_count,
            r.max_ratio_value()
                .and_then(|x| x.to_f64())
                .map_or("none".to_string(), |x| format!("{x:.6e}"))
        );
        for (reason, k) in &r.ineligible_by_reason {
            println!("  ineligible ({reason}): {k}");
        }
        ok &= r.passed();
        sink.put("contraction.json", &to_json(&r)?, false)?;
    } else {
        println!("contraction n={n}: skipped, needs --depth >= {}", n + 4);
    }
    println!("{}", if ok { "verify: pass" } else { "verify: FAIL" });
    Ok(ok)
}

fn render(o: &Opts) -> Result<bool> {
    let a = match (&o.input, &o.generator) {
        (Some(path), None) => parse_assignment(&read(path)?)?,
        _ => embedding(&o.covering()?, o)?.1,
    };
    Sink { out: o.out.as_deref() }.put("assignment.svg", &render_svg(&a), true)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (o, run): (&Opts, fn(&Opts) -> Result<bool>) = match &cli.cmd {
        Cmd::Validate(o) => (o, validate),
        Cmd::Analyze(o) => (o, analyze),
        Cmd::Pipeline(o) => (o, pipeline),
        Cmd::Embed(o) => (o, embed),
        Cmd::Verify(o) => (o, verify),
        Cmd::Render(o) => (o, render),
    };
    let outcome = o.check().and_then(|_| run(o));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let code = if matches!(cli.cmd, Cmd::Validate(_)) { 1 } else { 2 };
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
