use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfq_core::complex::{attach, bend, bend_sequential, flatten, SegmentComplex};
use cfq_core::constructions::{
    build_theorem_b, build_theorem_b_single_anchor, gapped_graph, gapped_segment, BuildWarning,
};
use cfq_core::curveflat::{cf_initial, cf_iterate, CfTrace};
use cfq_core::distortion::default_steepness;
use cfq_core::io::{
    complex_to_dot, read_attach_threads, read_complex, read_distortion, read_map, read_space, read_triples, to_json,
    trace_to_csv, ComplexJson, LipReportJson, SpaceJson,
};
use cfq_core::lipquot::{verify_index_monotonicity, verify_preimage_inequality};
use cfq_core::rational::{fmt_q, parse_q};
use cfq_core::verify::{reports_to_csv, run_suite, SuiteParams, SUITES};
use cfq_core::{DistortionPL, PseudometricSpace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cfq", version, about = "Exact curve-flat quotients of finite segment complexes")]
struct Cli {
    /// Base seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the (pseudo)metric axioms of a space.
    Validate {
        space: PathBuf,
        /// Also require positivity off the diagonal.
        #[arg(long)]
        metric: bool,
    },
    /// Build a segment complex.
    #[command(subcommand)]
    Build(BuildCmd),
    /// Curve-flat stages of a complex.
    Cf {
        complex: PathBuf,
        #[arg(long, default_value_t = 4)]
        stages: usize,
    },
    /// Bend a space by a list of triples.
    Bend {
        space: PathBuf,
        #[arg(long)]
        triples: PathBuf,
        /// Apply the single-pair formula triple by triple.
        #[arg(long)]
        sequential: bool,
    },
    /// Attach threads to a frame.
    Attach {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        threads: PathBuf,
    },
    /// Lipschitz-quotient report for a map between complexes.
    Lipq {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 2)]
        stages: usize,
    },
    /// Run verification suites.
    Verify {
        /// Suite name or `all`.
        suite: String,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 3)]
        min_points: usize,
        #[arg(long, default_value_t = 6)]
        max_points: usize,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Re-emit a complex as JSON, DOT, or a CSV stage trace.
    Export {
        complex: PathBuf,
        #[arg(long, default_value_t = 4)]
        stages: usize,
    },
}

#[derive(Args)]
struct BuildOpts {
    /// Distortion JSON (inline or a path); defaults to a steep three-piece map.
    #[arg(long)]
    distortion: Option<String>,
    #[arg(long, default_value_t = 1)]
    samples: usize,
}

#[derive(Subcommand)]
enum BuildCmd {
    /// Two points joined by one gapped edge.
    Segment {
        /// Distance between the endpoints.
        #[arg(long)]
        d: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Gapped graph over a metric space.
    GappedGraph {
        space: PathBuf,
        /// Comma-separated point indices; all points when omitted.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Prescribed-index complex over a metric space.
    TheoremB {
        space: PathBuf,
        #[arg(long, default_value_t = 1)]
        alpha: usize,
        #[arg(long, default_value = "1/4")]
        eps: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        /// Attach every thread at a single point.
        #[arg(long)]
        single_anchor: bool,
        #[command(flatten)]
        opts: BuildOpts,
    },
}

enum Failure {
    Usage(String),
    Property(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn read_input(path: &Path) -> Res<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn distortion(arg: &Option<String>, diam: &cfq_core::rational::Q) -> Res<DistortionPL> {
    match arg {
        None => Ok(DistortionPL::steep(diam, &default_steepness())?),
        Some(s) if s.trim_start().starts_with('{') => Ok(read_distortion(s)?),
        Some(p) => Ok(read_distortion(&read_input(Path::new(p))?)?),
    }
}

fn warn(ws: &[BuildWarning]) {
    for w in ws {
        eprintln!("warning: {w:?}");
    }
}

fn emit_complex(cli: &Cli, cx: &SegmentComplex) -> Res<()> {
    let text = match cli.format {
        Format::Dot => complex_to_dot(cx)?,
        _ => to_json(&ComplexJson::of(cx))?,
    };
    emit(&cli.out, &text)
}

fn trace_json(trace: &CfTrace, labels: &[String]) -> serde_json::Value {
    json!({
        "points": labels,
        "fixed_point": trace.fixed_point,
        "stages": trace.states.iter().map(|s| json!({
            "stage": s.stage,
            "dist": SpaceJson::of(&PseudometricSpace::from_matrix(s.materialized.clone())).dist,
        })).collect::<Vec<_>>(),
    })
}

fn trace_output(cli: &Cli, complex: &Path, stages: usize) -> Res<()> {
    let cx = read_complex(&read_input(complex)?)?;
    let labels = flatten(&cx)?.space.labels().to_vec();
    let trace = cf_iterate(cf_initial(&cx)?, stages)?;
    let text = match cli.format {
        Format::Csv => trace_to_csv(&trace, &labels)?,
        Format::Text => {
            let mut s = match trace.fixed_point {
                Some(k) => format!("curve-flat index {k}\n"),
                None => format!("no fixed point within {stages} stages\n"),
            };
            for st in &trace.states {
                s.push_str(&format!("stage {}: diameter {}\n", st.stage, fmt_q(&st.materialized.max_entry())));
            }
            s
        }
        _ => to_json(&trace_json(&trace, &labels))?,
    };
    emit(&cli.out, &text)
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Validate { space, metric } => {
            let s = read_space(&read_input(space)?)?.with_metric_flag(*metric);
            let rep = s.validate();
            let text = if cli.format == Format::Text {
                if rep.is_valid() {
                    "valid\n".to_string()
                } else {
                    rep.violations.iter().map(|v| format!("{v:?}\n")).collect()
                }
            } else {
                to_json(&json!({
                    "valid": rep.is_valid(),
                    "violations": rep.violations.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>(),
                }))?
            };
            emit(&cli.out, &text)?;
            if rep.is_valid() {
                Ok(())
            } else {
                Err(Failure::Property(format!("{} axiom violations", rep.violations.len())))
            }
        }
        Cmd::Build(b) => {
            let cx = match b {
                BuildCmd::Segment { d, opts } => {
                    let d = parse_q(d)?;
                    let w = distortion(&opts.distortion, &d)?;
                    gapped_segment(&d, &w, opts.samples)?
                }
                BuildCmd::GappedGraph { space, subset, opts } => {
                    let m = read_space(&read_input(space)?)?;
                    let w = distortion(&opts.distortion, &m.diameter()?)?;
                    let all: Vec<usize> = (0..m.len()).collect();
                    let g = gapped_graph(&m, &w, subset.as_deref().unwrap_or(&all), opts.samples)?;
                    warn(&g.warnings);
                    g.complex
                }
                BuildCmd::TheoremB {
                    space,
                    alpha,
                    eps,
                    stages,
                    single_anchor,
                    opts,
                } => {
                    let m = read_space(&read_input(space)?)?;
                    let w = distortion(&opts.distortion, &m.diameter()?)?;
                    let eps = parse_q(eps)?;
                    let built = if *single_anchor {
                        build_theorem_b_single_anchor(&m, *alpha, &eps, &w, *stages, opts.samples)?
                    } else {
                        build_theorem_b(&m, *alpha, &eps, &w, *stages, opts.samples)?
                    };
                    warn(&built.warnings);
                    built.complex
                }
            };
            emit_complex(cli, &cx)
        }
        Cmd::Cf { complex, stages } => trace_output(cli, complex, *stages),
        Cmd::Export { complex, stages } => {
            if cli.format == Format::Csv {
                return trace_output(cli, complex, *stages);
            }
            let cx = read_complex(&read_input(complex)?)?;
            emit_complex(cli, &cx)
        }
        Cmd::Bend {
            space,
            triples,
            sequential,
        } => {
            let s = read_space(&read_input(space)?)?;
            let ts = read_triples(&read_input(triples)?)?;
            let b = if *sequential { bend_sequential(&s, &ts)? } else { bend(&s, &ts)? };
            emit(&cli.out, &to_json(&SpaceJson::of(&b))?)
        }
        Cmd::Attach { frame, threads } => {
            let f = read_space(&read_input(frame)?)?;
            let ts = read_attach_threads(&read_input(threads)?)?;
            let a = attach(&f, &ts)?;
            emit(&cli.out, &to_json(&SpaceJson::of(&a.space))?)
        }
        Cmd::Lipq { map, stages } => {
            let m = read_map(&read_input(map)?)?;
            let rep = verify_preimage_inequality(&m, *stages)?;
            let idx = verify_index_monotonicity(&m, *stages + 4)?;
            let src = flatten(&m.source)?.space.labels().to_vec();
            let tgt = flatten(&m.target)?.space.labels().to_vec();
            let body = LipReportJson::of(&rep, &src, &tgt);
            let text = if cli.format == Format::Text {
                let mut s = format!(
                    "lip {}\ncolip {}\nproduct {}\nindex source {:?} target {:?}\n",
                    body.lip, body.colip, body.product, idx.source, idx.target
                );
                s.push_str("stage  x  y  p  lhs  rhs  margin\n");
                for w in &body.witnesses {
                    s.push_str(&format!(
                        "{}  {}  {}  {}  {}  {}  {}\n",
                        w.stage, w.x, w.y, w.p, w.lhs.0, w.rhs.0, w.margin.0
                    ));
                }
                s
            } else {
                to_json(&json!({
                    "report": body,
                    "index": {
                        "source": format!("{:?}", idx.source),
                        "target": format!("{:?}", idx.target),
                        "monotone": idx.holds,
                    }
                }))?
            };
            emit(&cli.out, &text)?;
            if rep.holds() && idx.holds != Some(false) {
                Ok(())
            } else {
                Err(Failure::Property("preimage inequality or index monotonicity failed".into()))
            }
        }
        Cmd::Verify {
            suite,
            instances,
            min_points,
            max_points,
            stages,
            samples,
        } => {
            let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite.as_str()] };
            let params = SuiteParams {
                seed: cli.seed,
                instances: *instances,
                min_points: *min_points,
                max_points: *max_points,
                stages: *stages,
                samples: *samples,
            };
            let mut reports = Vec::new();
            for n in names {
                let r = run_suite(n, &params)?;
                eprintln!("{} {}: {} passed, {} failed", if r.ok() { "PASS" } else { "FAIL" }, r.suite, r.passed, r.failed);
                reports.push(r);
            }
            let text = match cli.format {
                Format::Csv => reports_to_csv(&reports)?,
                _ => to_json(&reports)?,
            };
            emit(&cli.out, &text)?;
            if let (Some(p), false) = (&cli.out, cli.format == Format::Csv) {
                fs::write(p.with_extension("csv"), reports_to_csv(&reports)?)?;
            }
            let failed: usize = reports.iter().map(|r| r.failed).sum();
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Property(format!("{failed} checks failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
