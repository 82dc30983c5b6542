//! Command-line front end: traces external rays, builds rational laminations
//! and their pinched-disk models, and runs the tuning pipeline, emitting
//! JSON and SVG artifacts.
//!
//! Exit codes: 0 success, 2 parse errors, 3 numeric truncation (partial
//! output is still written), 4 disconnected Julia set, 5 tuning crossing or
//! consistency failure.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use lamina::angle::Angle;
use lamina::lamination::{build_rational_lamination, pullback_closure, AngleClass, Lamination};
use lamina::model::{extend_model, quotient_model, restricted_quotient_isomorphic, ModelError};
use lamina::poly::{parse_spec, PolynomialSpec};
use lamina::ray::{LandingStatus, TraceError, Tracer, TracerConfig};
use lamina::render::{render_svg, RenderOptions, Underlay};
use lamina::tuning::{strategic_report, verify_order_preserving, verify_semiconjugacy, TuningData};

const EXIT_PARSE: u8 = 2;
const EXIT_TRUNCATED: u8 = 3;
const EXIT_DISCONNECTED: u8 = 4;
const EXIT_TUNING: u8 = 5;

#[derive(Parser)]
#[command(
    name = "lamina",
    version,
    about = "Combinatorial models of polynomial Julia sets: external rays, \
             laminations, pinched-disk quotients, and tuning"
)]
struct Cli {
    /// Worker threads for parallel fan-out (LAMINA_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one external ray and report its landing.
    Trace(TraceArgs),
    /// Build the rational lamination and its pinched-disk model.
    Lam(LamArgs),
    /// Transport a small lamination through tuning data and verify it.
    Tune(TuneArgs),
}

#[derive(Args)]
struct ToleranceArgs {
    /// Newton step-norm convergence threshold.
    #[arg(long, default_value_t = 1e-12)]
    newton_tol: f64,
    /// Cluster diameter below which a trace counts as landed.
    #[arg(long, default_value_t = 1e-6)]
    landing_tol: f64,
    /// Distance below which refined landing points co-land.
    #[arg(long, default_value_t = 1e-6)]
    coland_tol: f64,
    /// Residual bound certifying a refined (pre)periodic point.
    #[arg(long, default_value_t = 1e-9)]
    cert_tol: f64,
    /// Intermediate sub-steps per potential level.
    #[arg(long, default_value_t = 8)]
    substeps: u32,
    /// Iteration budget for the connectedness test.
    #[arg(long, default_value_t = 256)]
    budget: u32,
}

impl ToleranceArgs {
    fn tracer_config(&self) -> TracerConfig {
        TracerConfig {
            substeps: self.substeps,
            newton_tol: self.newton_tol,
            landing_tol: self.landing_tol,
            colanding_tol: self.coland_tol,
            certification_tol: self.cert_tol,
            connectivity_budget: self.budget,
            ..TracerConfig::default()
        }
    }

    fn meta(&self) -> serde_json::Value {
        json!({
            "newton_tol": self.newton_tol,
            "landing_tol": self.landing_tol,
            "coland_tol": self.coland_tol,
            "cert_tol": self.cert_tol,
            "substeps": self.substeps,
            "budget": self.budget,
        })
    }
}

#[derive(Args)]
struct TraceArgs {
    /// Polynomial: coefficient list "1,0,-1" or quadratic shorthand "c=-1".
    #[arg(long)]
    poly: String,
    /// Ray angle as a reduced fraction p/q.
    #[arg(long)]
    angle: String,
    /// Potential levels to descend.
    #[arg(long, default_value_t = 96)]
    depth: u32,
    /// Output JSON file; the SVG overlay lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Escape-time raster resolution for the SVG background.
    #[arg(long, default_value_t = 256)]
    underlay_res: u32,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct LamArgs {
    #[arg(long)]
    poly: String,
    /// Largest angle denominator to land.
    #[arg(long, default_value_t = 12)]
    max_den: u32,
    #[arg(long, default_value_t = 96)]
    depth: u32,
    /// Directory for lamination.json, model.json, lamination.svg, run.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 256)]
    underlay_res: u32,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct TuneArgs {
    /// Tuning data JSON: {"theta_minus":"1/3","theta_plus":"2/3","n":2,"d":2,"k":2}.
    #[arg(long)]
    data: PathBuf,
    /// Small (tuned) lamination JSON.
    #[arg(long)]
    sub_lam: PathBuf,
    /// Ambient lamination JSON; default is the pullback closure of the
    /// characteristic leaf.
    #[arg(long)]
    ambient: Option<PathBuf>,
    /// Pullback levels for the default ambient lamination.
    #[arg(long, default_value_t = 2)]
    ambient_levels: u32,
    /// Run the exact verification reports and fail on any violation.
    #[arg(long)]
    check: bool,
    /// Polynomial for the numeric placement report (optional).
    #[arg(long)]
    poly: Option<String>,
    /// Anchor sample size for the verification reports.
    #[arg(long, default_value_t = 40)]
    samples: usize,
    /// Seed for the anchor sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 96)]
    depth: u32,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let width = std::env::var("LAMINA_THREADS")
        .ok()
        .and_then(|w| w.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(width) = width {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(width)
            .build_global();
    }
    let result = match cli.command {
        Command::Trace(args) => cmd_trace(args),
        Command::Lam(args) => cmd_lam(args),
        Command::Tune(args) => cmd_tune(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn parse_poly(s: &str) -> Result<PolynomialSpec, CliError> {
    parse_spec(s).map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))
}

fn parse_angle(s: &str) -> Result<Angle, CliError> {
    s.parse()
        .map_err(|e: lamina::angle::AngleError| CliError::new(EXIT_PARSE, e.to_string()))
}

fn build_tracer(spec: PolynomialSpec, config: TracerConfig) -> Result<Tracer, CliError> {
    Tracer::with_config(spec, config).map_err(|e| match e {
        TraceError::Disconnected(report) => CliError::new(
            EXIT_DISCONNECTED,
            format!(
                "the Julia set is disconnected (escaping critical points: {:?}); only \
                 connected Julia sets are modeled here - the finest finitely Suslinian \
                 model of a disconnected set is not implemented",
                report.escaping_critical_points
            ),
        ),
        other => CliError::new(1, other.to_string()),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::new(1, format!("cannot create {parent:?}: {e}")))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::new(1, format!("cannot write {path:?}: {e}")))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::new(1, format!("serialization failed: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

fn cmd_trace(args: TraceArgs) -> Result<(), CliError> {
    let spec = parse_poly(&args.poly)?;
    let angle = parse_angle(&args.angle)?;
    let tracer = build_tracer(spec.clone(), args.tolerances.tracer_config())?;

    let traced = tracer
        .trace_ray(&angle, args.depth)
        .map_err(|e| CliError::new(1, e.to_string()))?;
    let landing = tracer
        .land(&angle, args.depth)
        .map_err(|e| CliError::new(1, e.to_string()))?;

    let mut value = serde_json::to_value(&traced.trace)
        .map_err(|e| CliError::new(1, e.to_string()))?;
    value["landing"] =
        serde_json::to_value(&landing).map_err(|e| CliError::new(1, e.to_string()))?;
    value["config"] = json!({
        "command": "trace",
        "version": env!("CARGO_PKG_VERSION"),
        "poly": args.poly,
        "angle": angle.to_string(),
        "depth": args.depth,
        "tolerances": args.tolerances.meta(),
    });
    write_json(&args.out, &value)?;

    let options = RenderOptions {
        underlay: Some(Underlay {
            spec,
            resolution: args.underlay_res,
            max_iter: 100,
        }),
        ..RenderOptions::default()
    };
    let svg = render_svg(
        &Lamination::empty(tracer.degree()),
        None,
        std::slice::from_ref(&traced.trace),
        &options,
    );
    write_file(&args.out.with_extension("svg"), &svg)?;

    if landing.status != LandingStatus::Landed {
        return Err(CliError::new(
            EXIT_TRUNCATED,
            format!(
                "ray {angle} did not certifiably land within the budget ({:?}); partial \
                 output was written. Near irrationally indifferent (Cremer-type) cycles \
                 external rays may fail to land and the locally connected model can \
                 degenerate to a point.",
                landing.status
            ),
        ));
    }
    Ok(())
}

fn cmd_lam(args: LamArgs) -> Result<(), CliError> {
    let spec = parse_poly(&args.poly)?;
    let tracer = build_tracer(spec.clone(), args.tolerances.tracer_config())?;

    let lam = build_rational_lamination(&tracer, args.max_den, args.depth)
        .map_err(|e| CliError::new(1, e.to_string()))?;
    let model = quotient_model(&lam).map_err(|e| CliError::new(1, e.to_string()))?;

    let lam_value = serde_json::to_value(&lam).map_err(|e| CliError::new(1, e.to_string()))?;
    write_json(&args.out_dir.join("lamination.json"), &lam_value)?;
    let model_value = serde_json::to_value(&model).map_err(|e| CliError::new(1, e.to_string()))?;
    write_json(&args.out_dir.join("model.json"), &model_value)?;

    let options = RenderOptions {
        underlay: Some(Underlay {
            spec,
            resolution: args.underlay_res,
            max_iter: 100,
        }),
        ..RenderOptions::default()
    };
    let svg = render_svg(&lam, Some(&model), &[], &options);
    write_file(&args.out_dir.join("lamination.svg"), &svg)?;

    write_json(
        &args.out_dir.join("run.json"),
        &json!({
            "command": "lam",
            "version": env!("CARGO_PKG_VERSION"),
            "poly": args.poly,
            "max_den": args.max_den,
            "depth": args.depth,
            "tolerances": args.tolerances.meta(),
            "warnings": lam.warnings(),
        }),
    )?;
    Ok(())
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("cannot read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| {
        // Malformed JSON is a parse error; well-formed JSON with inconsistent
        // tuning content is a consistency failure.
        let code = if e.is_syntax() || e.is_eof() {
            EXIT_PARSE
        } else {
            EXIT_TUNING
        };
        CliError::new(code, format!("{path:?}: {e}"))
    })
}

/// Deterministic seeded anchor sample of distinct rational angles, sorted.
/// Denominators range up to 64, widened when more samples are requested
/// than that range can supply.
fn sample_angles(count: usize, seed: u64) -> Vec<Angle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_den = 64u64.max(count as u64);
    let mut seen = HashSet::new();
    let mut out: Vec<Angle> = Vec::with_capacity(count);
    while out.len() < count {
        let den = rng.gen_range(1..=max_den);
        let num = rng.gen_range(0..den.max(1));
        let angle = Angle::from_ints(num, den).expect("den >= 1");
        if seen.insert(angle.clone()) {
            out.push(angle);
        }
    }
    out.sort();
    out
}

fn cmd_tune(args: TuneArgs) -> Result<(), CliError> {
    let tuning: TuningData = read_json_file(&args.data)?;
    let sub: Lamination = read_json_file(&args.sub_lam)?;

    let ambient = match &args.ambient {
        Some(path) => read_json_file::<Lamination>(path)?,
        None => {
            if tuning.is_degenerate_pair() {
                Lamination::empty(tuning.ambient_degree())
            } else {
                let leaf = AngleClass::new(vec![
                    tuning.theta_minus().clone(),
                    tuning.theta_plus().clone(),
                ])
                .map_err(|e| CliError::new(EXIT_TUNING, e.to_string()))?;
                pullback_closure(
                    &Lamination::empty(tuning.ambient_degree()),
                    &[leaf],
                    args.ambient_levels,
                )
                .map_err(|e| CliError::new(EXIT_TUNING, e.to_string()))?
            }
        }
    };

    let extended = extend_model(&sub, &tuning, &ambient).map_err(|e| match e {
        ModelError::ImageCrossing(_, _)
        | ModelError::ImageOverlap(_)
        | ModelError::ImageNotInvariant(_)
        | ModelError::AmbientLinked(_, _) => CliError::new(EXIT_TUNING, e.to_string()),
        other => CliError::new(1, other.to_string()),
    })?;

    let extended_value =
        serde_json::to_value(&extended).map_err(|e| CliError::new(1, e.to_string()))?;
    write_json(&args.out_dir.join("extended.json"), &extended_value)?;

    let samples = sample_angles(args.samples, args.seed);
    let images: Vec<Angle> = samples.iter().map(|a| tuning.tuning_p(a)).collect();
    let semi = verify_semiconjugacy(&tuning, &images);
    let order = verify_order_preserving(&tuning, &samples);
    let isomorphic = restricted_quotient_isomorphic(&sub, &tuning, &extended)
        .map_err(|e| CliError::new(1, e.to_string()))?;

    let strategic = match &args.poly {
        Some(poly) => {
            let spec = parse_poly(poly)?;
            let tracer = build_tracer(spec, args.tolerances.tracer_config())?;
            let report = strategic_report(&tuning, &tracer, &samples, args.depth)
                .map_err(|e| CliError::new(1, e.to_string()))?;
            Some(report)
        }
        None => None,
    };

    let report_value = json!({
        "semiconjugacy": semi,
        "order": order,
        "factorization_isomorphic": isomorphic,
        "strategic": strategic,
        "extended_classes": extended.classes().len(),
    });
    write_json(&args.out_dir.join("report.json"), &report_value)?;
    write_json(
        &args.out_dir.join("run.json"),
        &json!({
            "command": "tune",
            "version": env!("CARGO_PKG_VERSION"),
            "data": args.data.display().to_string(),
            "sub_lam": args.sub_lam.display().to_string(),
            "ambient": args.ambient.as_ref().map(|p| p.display().to_string()),
            "ambient_levels": args.ambient_levels,
            "samples": args.samples,
            "seed": args.seed,
            "depth": args.depth,
            "check": args.check,
            "tolerances": args.tolerances.meta(),
        }),
    )?;

    if args.check {
        let mut problems = Vec::new();
        if !semi.ok {
            problems.push(format!(
                "semiconjugacy failed on {} samples",
                semi.failures.len()
            ));
        }
        if !order.ok {
            problems.push("order preservation failed".to_string());
        }
        if !isomorphic {
            problems.push("restricted quotient is not isomorphic to the small model".to_string());
        }
        if let Some(report) = &strategic {
            if !report.order_preserved {
                problems.push("strategic order preservation failed".to_string());
            }
        }
        if !problems.is_empty() {
            return Err(CliError::new(EXIT_TUNING, problems.join("; ")));
        }
    }
    Ok(())
}
