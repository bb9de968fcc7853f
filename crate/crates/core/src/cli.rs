//! Command-line front end: parses flags, resolves the evaluation config,
//! runs one module operation and writes CSV or JSON.

use crate::asympt::{asym_report, determine_e_pq};
use crate::dual::phi_dual;
use crate::error::{Error, Result};
use crate::exact::{build_irrational, ExtReal, Rational};
use crate::gauss::{gauss_brute, reciprocity_rhs, reduce_algorithm, GaussSumSpec};
use crate::geometry::{
    box_dimension_graph, box_dimension_image, content_sum, default_radii, dyadic_scales, local_exponent, refine_curve,
    riemann_r_grid, spectrum_experiment, TimePoint,
};
use crate::modular::build_transform;
use crate::phi::{phi, trace, EvalConfig};
use crate::talbot::{corner_trajectory, psi_smoothed, talbot_profile};
use crate::verify::{run_all, run_criterion};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

/// Environment variable that overrides the term cap.
pub const MAX_TERMS_ENV: &str = "RNDF_MAX_TERMS";

#[derive(Parser, Debug)]
#[command(name = "rndf", version, about = "Riemann's non-differentiable function: evaluation, asymptotics and dimension estimates")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Absolute tolerance for series evaluation.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Term cap per series (overridden by RNDF_MAX_TERMS).
    #[arg(long, global = true)]
    pub max_terms: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the parallel partitions.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Omit wall-clock metadata so outputs are byte-identical across runs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Smaller sample ranges where a command supports it.
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// φ(t) by the direct or dual series.
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, value_enum, default_value_t = Route::Direct)]
        route: Route,
    },
    /// φ on a uniform grid, CSV t,re,im.
    Trace {
        #[arg(long, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long)]
        n: usize,
    },
    /// G(a,b,c) by brute force, with the reciprocal side when b = 0.
    Gauss {
        #[arg(long, allow_hyphen_values = true)]
        a: i64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        b: i64,
        #[arg(long)]
        c: i64,
    },
    /// Reduction of G(p,0,q) to denominator 1 or 2.
    Reduce {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
    },
    /// θ-modular map sending the base point of p/q to 0 or 1.
    Mobius {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
    },
    /// Increments at t_{p,q} against the leading expansion, CSV.
    Asym {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
        #[arg(long, default_value_t = 12)]
        n: usize,
    },
    /// e_{p,q} from the maps and from the limit ratio.
    RootOfUnity {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
    },
    /// Box-counting slope of the graph of R or the image of φ.
    Boxdim {
        #[arg(long, value_enum, default_value_t = BoxMode::Graph)]
        mode: BoxMode,
        /// log2 of the sample count.
        #[arg(long, default_value_t = 21)]
        n_log2: u32,
        /// Scales 2^-coarsest .. 2^-finest.
        #[arg(long, default_value_t = 4)]
        coarsest: i32,
        #[arg(long, default_value_t = 11)]
        finest: i32,
    },
    /// Σ_{q=Q0}^{Qmax} totient(q)/q^{3d/2}.
    Content {
        #[arg(long)]
        q0: u64,
        #[arg(long)]
        qmax: u64,
        #[arg(long)]
        d: f64,
    },
    /// Local Hölder exponent of φ at t = x/(2π).
    Holder {
        /// Decimal x; use --golden or --beta instead for constructed points.
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        golden: bool,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Measured against predicted local exponents, CSV.
    Spectrum {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 4.0, 8.0])]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        depth: usize,
    },
    /// Talbot weights and the smoothed comb, CSV s,re,im.
    Talbot {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
        #[arg(long, default_value_t = 1e-4)]
        sigma: f64,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
    },
    /// Polygonal-corner trajectories, CSV m,t,re,im.
    Corner {
        #[arg(long, value_delimiter = ',', default_values_t = vec![3, 4, 5])]
        m: Vec<u32>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        t0: f64,
        /// End time; one period 2π/M² of the smallest M when absent.
        #[arg(long, allow_hyphen_values = true)]
        t1: Option<f64>,
        #[arg(long, default_value_t = 4096)]
        n: usize,
    },
    /// Runs the ten acceptance checks and prints a pass/fail table.
    VerifyAll {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u8>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Route {
    Direct,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum BoxMode {
    Graph,
    Image,
}

#[derive(Debug, Serialize)]
pub struct ResolvedConfig {
    pub eval: EvalConfig,
    pub jobs: usize,
    pub deterministic: bool,
    pub quick: bool,
    pub out: Option<String>,
}

/// Config after flags and the environment override.
pub fn resolve(global: &Global) -> std::result::Result<ResolvedConfig, String> {
    let mut eval = EvalConfig::default().with_tol(global.tol);
    if !(global.tol > 0.0) {
        return Err(format!("--tol must be positive, got {}", global.tol));
    }
    if let Some(m) = global.max_terms {
        eval.max_terms = m;
    }
    if let Ok(v) = std::env::var(MAX_TERMS_ENV) {
        eval.max_terms = v.trim().parse().map_err(|_| format!("{MAX_TERMS_ENV}={v} is not a count"))?;
    }
    if global.jobs == 0 {
        return Err("--jobs must be ≥ 1".into());
    }
    Ok(ResolvedConfig {
        eval,
        jobs: global.jobs,
        deterministic: global.deterministic,
        quick: global.quick,
        out: global.out.as_ref().map(|p| p.display().to_string()),
    })
}

/// 17 significant digits in exponent form, enough to round-trip any double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

enum Output {
    Json(serde_json::Value),
    Csv { header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Text(String),
}

fn json<T: Serialize>(v: &T) -> Output {
    Output::Json(serde_json::to_value(v).expect("reports serialize"))
}

fn complex_json(z: Complex64) -> serde_json::Value {
    serde_json::json!({ "re": z.re, "im": z.im })
}

/// Parses and runs; returns the process exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    let start = Instant::now();
    let cfg = match resolve(&cli.global) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    eprintln!("config: {}", serde_json::to_string(&cfg).expect("config serializes"));
    // a pool may already exist when called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    let result = execute(&cli.command, &cfg);
    let code = match result {
        Ok((output, failed)) => match write_output(output, cfg.out.as_deref()) {
            Ok(()) => i32::from(failed),
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_precondition() {
                2
            } else {
                1
            }
        }
    };
    if !cfg.deterministic {
        eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    }
    code
}

fn write_output(output: Output, out: Option<&str>) -> std::io::Result<()> {
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match output {
        Output::Json(v) => {
            serde_json::to_writer_pretty(&mut sink, &v)?;
            writeln!(sink)?;
        }
        Output::Csv { header, rows } => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(&header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
            return Ok(());
        }
        Output::Text(t) => write!(sink, "{t}")?,
    }
    sink.flush()
}

fn pq(p: i64, q: i64) -> Result<Rational> {
    Rational::from_i64(p, q)
}

fn execute(cmd: &Command, cfg: &ResolvedConfig) -> Result<(Output, bool)> {
    let ec = &cfg.eval;
    let out = match cmd {
        Command::Eval { t, route } => {
            let z = match route {
                Route::Direct => phi(*t, ec)?,
                Route::Dual => phi_dual(*t, ec.abs_tol, ec.max_terms)?,
            };
            Output::Json(serde_json::json!({ "t": t, "route": route, "tol": ec.abs_tol, "phi": complex_json(z) }))
        }
        Command::Trace { t0, t1, n } => {
            let tr = trace(*t0, *t1, *n, ec)?;
            Output::Csv {
                header: vec!["t", "re", "im"],
                rows: tr.ts.iter().zip(&tr.zs).map(|(t, z)| vec![fmt17(*t), fmt17(z.re), fmt17(z.im)]).collect(),
            }
        }
        Command::Gauss { a, b, c } => {
            let value = gauss_brute(GaussSumSpec { a: *a, b: *b, c: *c })?;
            let mut v = serde_json::json!({ "a": a, "b": b, "c": c, "brute": complex_json(value) });
            if *b == 0 && *a > 0 {
                let rhs = reciprocity_rhs(*a, *c)?;
                v["reciprocal"] = complex_json(rhs);
                v["reciprocity_residual"] = serde_json::json!((value - rhs).norm());
            }
            Output::Json(v)
        }
        Command::Reduce { p, q } => {
            let tr = reduce_algorithm(*p, *q)?;
            let brute = gauss_brute(GaussSumSpec { a: *p, b: 0, c: *q })?;
            let mut v = serde_json::to_value(&tr).expect("trace serializes");
            v["replay"] = complex_json(tr.replay());
            v["replay_residual"] = serde_json::json!((tr.replay() - brute).norm());
            Output::Json(v)
        }
        Command::Mobius { p, q } => {
            let t = build_transform(&pq(*p, *q)?)?;
            let (plus, minus) = t.side_roots()?;
            let mut v = serde_json::to_value(&t).expect("transform serializes");
            v["integer_checks"] = serde_json::json!(t.integer_checks().err().unwrap_or_else(|| "ok".into()));
            v["e_plus"] = serde_json::to_value(plus).expect("root serializes");
            v["e_minus"] = serde_json::to_value(minus).expect("root serializes");
            Output::Json(v)
        }
        Command::Asym { p, q, n } => {
            let rep = asym_report(&pq(*p, *q)?, *n, ec)?;
            eprintln!(
                "fitted exponent: {:.4} (h > 0), {:.4} (h < 0)",
                rep.fitted_exponent, rep.fitted_exponent_minus
            );
            Output::Csv {
                header: vec!["h", "predicted_re", "predicted_im", "actual_re", "actual_im"],
                rows: (0..rep.h_values.len())
                    .map(|i| {
                        vec![
                            fmt17(rep.h_values[i]),
                            fmt17(rep.predicted[i].re),
                            fmt17(rep.predicted[i].im),
                            fmt17(rep.actual[i].re),
                            fmt17(rep.actual[i].im),
                        ]
                    })
                    .collect(),
            }
        }
        Command::RootOfUnity { p, q } => json(&determine_e_pq(&pq(*p, *q)?)?),
        Command::Boxdim { mode, n_log2, coarsest, finest } => {
            let scales = dyadic_scales(*coarsest, *finest);
            let rep = match mode {
                BoxMode::Graph => {
                    let (xs, ys) = riemann_r_grid(*n_log2, ec)?;
                    box_dimension_graph(&xs, &ys, &scales)?
                }
                BoxMode::Image => {
                    if *n_log2 > 26 {
                        return Err(Error::Guard(format!("2^{n_log2} samples exceed 2^26")));
                    }
                    let tr = trace(0.0, 1.0 / (2.0 * PI), 1usize << n_log2, ec)?;
                    let finest_eps = scales.iter().cloned().fold(f64::INFINITY, f64::min);
                    let (_, zs) = refine_curve(&tr.ts, &tr.zs, finest_eps / 4.0, ec)?;
                    box_dimension_image(&zs, &scales)?
                }
            };
            json(&rep)
        }
        Command::Content { q0, qmax, d } => json(&content_sum(*q0, *qmax, *d)?),
        Command::Holder { x, golden, beta, depth } => {
            let point = match (x, golden, beta) {
                (Some(s), false, None) => parse_decimal(s)?,
                (None, true, None) => ExtReal::golden(),
                (None, false, Some(b)) => build_irrational(*b, *depth)?.0,
                _ => return Err(Error::Precondition("give exactly one of --x, --golden, --beta".into())),
            };
            let rep = local_exponent(TimePoint::from_x(&point), &default_radii(), ec)?;
            let mut v = serde_json::to_value(&rep).expect("report serializes");
            v["x"] = serde_json::json!(point.to_string());
            Output::Json(v)
        }
        Command::Spectrum { betas, depth } => {
            let rows = spectrum_experiment(betas, *depth, ec)?;
            Output::Csv {
                header: vec!["beta", "measured", "predicted", "deviation"],
                rows: rows
                    .iter()
                    .map(|r| vec![fmt17(r.beta), fmt17(r.measured), fmt17(r.predicted), fmt17(r.deviation)])
                    .collect(),
            }
        }
        Command::Talbot { p, q, sigma, samples } => {
            let prof = talbot_profile(*p, *q)?;
            eprintln!("profile: {}", serde_json::to_string(&prof).expect("profile serializes"));
            if *samples < 1 {
                return Err(Error::Precondition("--samples must be ≥ 1".into()));
            }
            let rows = (0..*samples)
                .map(|j| {
                    let s = j as f64 / *samples as f64;
                    psi_smoothed(s, *p, *q, *sigma).map(|z| vec![fmt17(s), fmt17(z.re), fmt17(z.im)])
                })
                .collect::<Result<Vec<_>>>()?;
            Output::Csv { header: vec!["s", "re", "im"], rows }
        }
        Command::Corner { m, t0, t1, n } => {
            let m_min = *m.iter().min().ok_or_else(|| Error::Precondition("--m needs a value".into()))?;
            let t1 = t1.unwrap_or(2.0 * PI / (m_min as f64 * m_min as f64));
            let mut rows = Vec::new();
            for &mm in m {
                let tr = corner_trajectory(mm, *t0, t1, *n, ec)?;
                rows.extend(
                    tr.ts
                        .iter()
                        .zip(&tr.zs)
                        .map(|(t, z)| vec![mm.to_string(), fmt17(*t), fmt17(z.re), fmt17(z.im)]),
                );
            }
            Output::Csv { header: vec!["m", "t", "re", "im"], rows }
        }
        Command::VerifyAll { only } => {
            let results = match only {
                Some(id) => vec![run_criterion(*id, cfg.quick)],
                None => run_all(cfg.quick),
            };
            let mut text = String::new();
            for r in &results {
                let line = if cfg.deterministic {
                    format!("[{}] {:>2} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.detail)
                } else {
                    r.line()
                };
                text.push_str(&line);
                text.push('\n');
            }
            let passed = results.iter().filter(|r| r.passed).count();
            text.push_str(&format!("{passed}/{} criteria passed\n", results.len()));
            return Ok((Output::Text(text), passed < results.len()));
        }
    };
    Ok((out, false))
}

/// Decimal string such as "0.6180339887498948482" as an exact ExtReal.
fn parse_decimal(s: &str) -> Result<ExtReal> {
    let bad = || Error::Precondition(format!("--x {s:?} is not a plain decimal"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let mut num: num_bigint::BigInt = digits.parse().map_err(|_| bad())?;
    if neg {
        num = -num;
    }
    let den = num_bigint::BigInt::from(10).pow(frac.len() as u32);
    Ok(ExtReal::from_ratio(&num, &den, frac.len().max(1) as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("rndf-cli-{}-{name}", std::process::id()))
    }

    #[test]
    fn trace_writes_csv_with_header() {
        let path = tmp("curve.csv");
        let code = run_from([
            "rndf", "trace", "--t0", "0", "--t1", "0.1591549", "--n", "65", "--tol", "1e-6", "--deterministic", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,re,im"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 3);
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(text.lines().count(), 66);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn outputs_are_reproducible() {
        let (a, b) = (tmp("a.json"), tmp("b.json"));
        for p in [&a, &b] {
            let code = run_from(["rndf", "reduce", "--p", "3", "--q", "7", "--deterministic", "--out", p.to_str().unwrap()]);
            assert_eq!(code, 0);
        }
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(matches!(v["terminal"][1].as_i64(), Some(1 | 2)));
        assert!(v["replay_residual"].as_f64().unwrap() < 1e-12);
        std::fs::remove_file(a).ok();
        std::fs::remove_file(b).ok();
    }

    #[test]
    fn precondition_errors_exit_two() {
        assert_eq!(run_from(["rndf", "eval", "--t", "0.3", "--max-terms", "10"]), 2);
        assert_eq!(run_from(["rndf", "reduce", "--p", "2", "--q", "4"]), 2);
        assert_eq!(run_from(["rndf", "content", "--q0", "1", "--qmax", "100000000", "--d", "1"]), 2);
        assert_eq!(run_from(["rndf", "eval", "--t", "0.3", "--bogus", "1"]), 2);
        assert_eq!(run_from(["rndf", "corner", "--m", "2"]), 2);
    }

    #[test]
    fn decimal_parsing() {
        let x = parse_decimal("0.125").unwrap();
        assert_eq!(x.to_f64(), 0.125);
        assert_eq!(parse_decimal("-3").unwrap().to_f64(), -3.0);
        assert!(parse_decimal("1e-3").is_err());
        assert!(parse_decimal(".").is_err());
    }

    #[test]
    fn fmt17_round_trips() {
        for x in [0.1, PI, -1e-300, 12345.678901234567] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }
}
