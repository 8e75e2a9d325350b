//! Command-line front end.
//!
//! Exit codes: 0 ultrametric input handled, 1 general-metric input handled,
//! 2 malformed input or bad arguments, 3 not a metric at all, 4 solver
//! failure (capacity exceeded or a negative-type certificate).

use crate::dendrogram::Dendrogram;
use crate::metric::{ArithmeticMode, CsvOrMetricError, FiniteMetric, MetricError, MetricKind};
use crate::rational::{format_decimal, format_f64, format_rational};
use crate::simplex::Simplex;
use crate::solver::{self, SolverError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::path::PathBuf;

pub const EXIT_ULTRAMETRIC: i32 = 0;
pub const EXIT_GENERAL_METRIC: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_NOT_METRIC: i32 = 3;
pub const EXIT_SOLVER_FAILURE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "ultragap",
    version,
    about = "Gap invariants of finite ultrametric spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a distance matrix and report its kind.
    Validate(InputArgs),
    /// Compute the gap at a single exponent, with witness.
    Gap(GapArgs),
    /// Compute the gap over a grid of exponents.
    Curve(CurveArgs),
    /// Exact asymptotic constant from the coterie structure.
    Asymptote(InputArgs),
    /// Constancy classification of the normalized gap.
    Classify(InputArgs),
    /// Certify a constant against the quadratic-form inequality.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Labels header plus a square matrix of distances.
    CsvMatrix,
    /// Labels plus height-indexed partition levels.
    JsonDendrogram,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Float,
    Rational,
}

#[derive(Args)]
struct InputArgs {
    /// Input file path.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv-matrix")]
    format: InputFormat,
    #[arg(long, value_enum, default_value = "rational")]
    mode: Mode,
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Exponent p in [0, 30].
    #[arg(long)]
    p: f64,
    /// Use the randomized oracle with this many trials instead of the
    /// exhaustive solver.
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed; required whenever --trials is given.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Either "a:b:steps" (steps+1 evenly spaced points) or a comma list
    /// "0,1,2,5".
    #[arg(long)]
    grid: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// The constant G to certify.
    #[arg(long, short = 'g')]
    constant: f64,
    #[arg(long)]
    p: f64,
    /// Number of confirming random mean-zero samples.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success.
            let code = if e.exit_code() == 0 {
                0
            } else {
                EXIT_MALFORMED
            };
            eprint!("{e}");
            return code;
        }
    };
    if let Ok(threads) = std::env::var("ULTRAGAP_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global();
        }
    }
    match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Asymptote(a) => cmd_asymptote(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn load_metric(a: &InputArgs) -> Result<FiniteMetric, (i32, String)> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| {
        (
            EXIT_MALFORMED,
            format!("cannot read {}: {e}", a.input.display()),
        )
    })?;
    match a.format {
        InputFormat::CsvMatrix => {
            let mode = match a.mode {
                Mode::Float => ArithmeticMode::Float,
                Mode::Rational => ArithmeticMode::Rational,
            };
            crate::metric::metric_from_csv(&text, mode).map_err(|e| match e {
                CsvOrMetricError::Csv(c) => (EXIT_MALFORMED, c.to_string()),
                CsvOrMetricError::Metric(m) => metric_error(m),
            })
        }
        InputFormat::JsonDendrogram => Dendrogram::from_json(&text)
            .map(|d| d.to_metric())
            .map_err(|e| (EXIT_MALFORMED, e.to_string())),
    }
}

fn metric_error(e: MetricError) -> (i32, String) {
    let code = match e {
        MetricError::NotMetric(_) => EXIT_NOT_METRIC,
        _ => EXIT_MALFORMED,
    };
    (code, e.to_string())
}

fn solver_error(e: SolverError) -> (i32, String, Option<Value>) {
    match e {
        SolverError::NegativeType {
            ref witness,
            gamma,
            p,
        } => {
            let artifact = json!({
                "error": "negative-type failure",
                "p": p,
                "gamma": sig(gamma),
                "witness": witness_json(witness),
            });
            (EXIT_SOLVER_FAILURE, e.to_string(), Some(artifact))
        }
        SolverError::Capacity { .. } => (EXIT_SOLVER_FAILURE, e.to_string(), None),
        SolverError::Metric(m) => {
            let (code, msg) = metric_error(m);
            (code, msg, None)
        }
        other => (EXIT_MALFORMED, other.to_string(), None),
    }
}

/// Round to 12 significant digits and re-parse, so serialized numbers print
/// in the documented precision.
fn sig(x: f64) -> Value {
    json!(format_f64(x).parse::<f64>().unwrap())
}

fn witness_json(w: &Simplex) -> Value {
    Value::Array(w.weights().iter().map(|&x| sig(x)).collect())
}

fn emit(a: &InputArgs, artifact: &str) -> i32 {
    if let Some(path) = &a.out {
        if let Err(e) = std::fs::write(path, artifact) {
            eprintln!("cannot write {}: {e}", path.display());
            return EXIT_MALFORMED;
        }
    } else if artifact.ends_with('\n') {
        print!("{artifact}");
    } else {
        println!("{artifact}");
    }
    kind_exit(None)
}

fn kind_exit(kind: Option<MetricKind>) -> i32 {
    match kind {
        Some(MetricKind::GeneralMetric) => EXIT_GENERAL_METRIC,
        _ => EXIT_ULTRAMETRIC,
    }
}

fn fail(code: i32, msg: &str) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn cmd_validate(a: InputArgs) -> i32 {
    let m = match load_metric(&a) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let violations: Vec<Value> = m
        .ultrametric_violations()
        .iter()
        .map(|v| {
            json!({
                "i": v.i, "j": v.j, "k": v.k,
                "lhs": sig(v.lhs), "rhs": sig(v.rhs),
            })
        })
        .collect();
    let report = json!({
        "kind": m.kind().to_string(),
        "points": m.n(),
        "labels": m.labels(),
        "strong_triangle_violations": violations,
    });
    let code = emit(&a, &serde_json::to_string_pretty(&report).unwrap());
    if code != EXIT_ULTRAMETRIC {
        return code;
    }
    kind_exit(Some(m.kind()))
}

fn cmd_gap(a: GapArgs) -> i32 {
    if a.trials.is_some() && a.seed.is_none() {
        return fail(EXIT_MALFORMED, "--seed is required with --trials");
    }
    let m = match load_metric(&a.input) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let artifact = match a.trials {
        None => match solver::gap(&m, a.p) {
            Ok(r) => json!({
                "p": r.p,
                "value": sig(r.value),
                "witness": witness_json(&r.witness),
                "partitions_explored": r.partitions_explored,
                "scale_applied": sig(r.scale_applied),
            }),
            Err(e) => {
                let (code, msg, artifact) = solver_error(e);
                if let Some(artifact) = artifact {
                    let _ = emit(&a.input, &serde_json::to_string_pretty(&artifact).unwrap());
                }
                return fail(code, &msg);
            }
        },
        Some(trials) => match solver::gap_oracle(&m, a.p, trials, a.seed.unwrap()) {
            Ok(r) => json!({
                "p": a.p,
                "value": sig(r.value),
                "witness": witness_json(&r.witness),
                "trials": r.trials,
                "upper_bound": true,
            }),
            Err(e) => {
                let (code, msg, _) = solver_error(e);
                return fail(code, &msg);
            }
        },
    };
    let code = emit(&a.input, &serde_json::to_string_pretty(&artifact).unwrap());
    if code != EXIT_ULTRAMETRIC {
        return code;
    }
    kind_exit(Some(m.kind()))
}

// The negated comparison is deliberate: NaN grid entries must fail.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid '{text}' is not a:b:steps"));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| format!("bad grid start '{}'", parts[0]))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| format!("bad grid end '{}'", parts[1]))?;
        let steps: usize = parts[2]
            .parse()
            .map_err(|_| format!("bad grid steps '{}'", parts[2]))?;
        if steps == 0 {
            return Err("grid needs at least one step".into());
        }
        (0..=steps)
            .map(|k| a + (b - a) * k as f64 / steps as f64)
            .collect()
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad grid entry '{s}'"))
            })
            .collect::<Result<_, _>>()?
    };
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err("grid must be strictly increasing".into());
    }
    Ok(grid)
}

fn cmd_curve(a: CurveArgs) -> i32 {
    let grid = match parse_grid(&a.grid) {
        Ok(g) => g,
        Err(msg) => return fail(EXIT_MALFORMED, &msg),
    };
    let m = match load_metric(&a.input) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let curve = match solver::gap_curve(&m, &grid) {
        Ok(c) => c,
        Err(e) => {
            let (code, msg, _) = solver_error(e);
            return fail(code, &msg);
        }
    };
    let mut out = String::from("p,gamma,gamma_over_alpha1_p,residual_to_infinity\n");
    for pt in &curve.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_f64(pt.p),
            format_f64(pt.gamma),
            format_f64(pt.normalized),
            format_f64(pt.residual_to_infinity),
        ));
    }
    // Limit line for plotting: the normalized curve converges to this value.
    out.push_str(&format!(
        "inf,,{},0\n",
        format_decimal(&curve.gamma_infinity)
    ));
    let code = emit(&a.input, &out);
    if code != EXIT_ULTRAMETRIC {
        return code;
    }
    kind_exit(Some(m.kind()))
}

fn cmd_asymptote(a: InputArgs) -> i32 {
    let m = match load_metric(&a) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let tree = match Dendrogram::from_metric(&m) {
        Ok(d) => d.tree(),
        Err(e) => {
            let (code, msg) = metric_error(e);
            return fail(code, &msg);
        }
    };
    let ginf = match solver::gamma_infinity(&tree) {
        Ok(g) => g,
        Err(e) => {
            let (code, msg, _) = solver_error(e);
            return fail(code, &msg);
        }
    };
    let artifact = json!({
        "gamma_infinity": format_rational(&ginf),
        "decimal": format_decimal(&ginf),
    });
    emit(&a, &serde_json::to_string_pretty(&artifact).unwrap())
}

fn cmd_classify(a: InputArgs) -> i32 {
    let m = match load_metric(&a) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let report = match solver::classify(&m) {
        Ok(r) => r,
        Err(e) => {
            let (code, msg, _) = solver_error(e);
            return fail(code, &msg);
        }
    };
    let artifact = json!({
        "class": report.class.to_string(),
        "constant": report.is_constant(),
        "gamma_zero": format_rational(&report.gamma_zero),
        "gamma_zero_decimal": format_decimal(&report.gamma_zero),
        "gamma_infinity": format_rational(&report.gamma_infinity),
        "gamma_infinity_decimal": format_decimal(&report.gamma_infinity),
        "coterie_sizes": report.profile.sizes,
        "points_outside_coteries": report.profile.uncovered,
    });
    emit(&a, &serde_json::to_string_pretty(&artifact).unwrap())
}

fn cmd_verify(a: VerifyArgs) -> i32 {
    if a.trials > 0 && a.seed.is_none() {
        return fail(EXIT_MALFORMED, "--seed is required when --trials > 0");
    }
    let m = match load_metric(&a.input) {
        Ok(m) => m,
        Err((code, msg)) => return fail(code, &msg),
    };
    let verdict = match solver::verify_enhanced(&m, a.constant, a.p, a.trials, a.seed.unwrap_or(0))
    {
        Ok(v) => v,
        Err(e) => {
            let (code, msg, _) = solver_error(e);
            return fail(code, &msg);
        }
    };
    let artifact = json!({
        "holds": verdict.holds,
        "constant": sig(a.constant),
        "p": a.p,
        "threshold": sig(verdict.threshold),
        "gap_value": verdict.gap_value.map(sig),
        "witness": verdict.witness.as_ref().map(witness_json),
        "samples_checked": verdict.samples_checked,
        "sample_violations": verdict.sample_violations,
    });
    let code = emit(&a.input, &serde_json::to_string_pretty(&artifact).unwrap());
    if code != EXIT_ULTRAMETRIC {
        return code;
    }
    kind_exit(Some(m.kind()))
}
