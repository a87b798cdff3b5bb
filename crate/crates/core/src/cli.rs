//! Command-line front end. Each subcommand loads its inputs, calls into the
//! library and writes the result as canonical JSON (or CSV for trajectories).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::construct::{build_op, verify_constraints, ComplementStrategy, ConstructedOp};
use crate::dynamics::{
    boundary_fixed_point_audit, existence_probe, face_map_audit, face_map_audit_all, fixed_point_search_with, iterate,
    FixedPointOptions, ProbeReport, DEFAULT_MAX_FACE_SIZE,
};
use crate::error::{Error, Result};
use crate::heredity::validate_tensor;
use crate::io::{builtin, canonical_json, constructed_spec, index_map_from, load_spec, read_json, LoadedOp, QsoSpec};
use crate::opcheck::{characterize, pi_volterra_equivalence, randomized_op_test, Verdict, DEFAULT_TRIALS};
use crate::orthosys::{profile, validate_system, OrthogonalSystem};
use crate::qso::{evaluate, IndexMap};
use crate::rng::DEFAULT_SEED;
use crate::simplex::{IndexSet, SimplexVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_OP: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditChoice {
    Face,
    Boundary,
    Existence,
}

fn parse_window(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 2 {
        return Err(format!("window must be at least 2, got {n}"));
    }
    Ok(n)
}

#[derive(Debug, Parser)]
#[command(
    name = "opqso",
    version,
    about = "Build, check and simulate orthogonal-preserving quadratic stochastic operators"
)]
pub struct RunConfig {
    /// Base seed for every randomized step.
    #[arg(long, global = true, env = "OPQSO_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Window for built-in examples; checked against files otherwise.
    #[arg(long, global = true, value_parser = parse_window)]
    pub window: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct OpSource {
    /// Operator spec file.
    #[arg(long)]
    pub op: Option<PathBuf>,
    /// Built-in example, `name[:window]`.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SystemSource {
    /// Orthogonal system file.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Built-in example whose system is used.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct AnySource {
    #[arg(long)]
    pub op: Option<PathBuf>,
    #[arg(long)]
    pub builtin: Option<String>,
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Averaging weight; 1 is plain Picard iteration.
    #[arg(long, default_value_t = 0.5)]
    pub relaxation: f64,
}

impl SearchArgs {
    fn options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            relaxation: self.relaxation,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check tensor well-formedness (and construction constraints, or a system).
    Validate {
        #[command(flatten)]
        source: AnySource,
    },
    /// Build the operator of a system, write its spec and print a report.
    Construct {
        #[command(flatten)]
        source: SystemSource,
        /// JSON array of member indices, one per basis coordinate.
        #[arg(long)]
        pi: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Decide whether the operator preserves orthogonality.
    CheckOp {
        #[command(flatten)]
        source: OpSource,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Iterate the operator from a start vector.
    Simulate {
        #[command(flatten)]
        source: OpSource,
        /// Start vector; the window barycenter when omitted.
        #[arg(long)]
        x0: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Search for a fixed point by averaged iteration.
    FixedPoint {
        #[command(flatten)]
        source: OpSource,
        #[arg(long)]
        x0: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Sampled face and fixed-point audits of a constructed operator.
    Audit {
        #[command(flatten)]
        source: OpSource,
        #[arg(long, value_enum)]
        kind: AuditChoice,
        /// Face to audit, e.g. `1,2`; all small faces when omitted.
        #[arg(long)]
        alpha: Option<String>,
        /// Samples per face (default 50 for face, 20 for boundary).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_FACE_SIZE)]
        max_face_size: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Profile an orthogonal system.
    AnalyzeSystem {
        #[command(flatten)]
        source: SystemSource,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Schema(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Parse `args` (including the program name) and run.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => dispatch(cfg),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_IO,
            }
        }
    }
}

pub fn dispatch(cfg: RunConfig) -> i32 {
    let result = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cfg)),
            Err(e) => Err(Error::Schema(format!("thread pool: {e}"))),
        },
        None => run(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<()> {
    write_out(cfg.out.as_deref(), &canonical_json(value)?)
}

fn json_only(cfg: &RunConfig, what: &str) -> Result<()> {
    match cfg.format {
        Format::Json => Ok(()),
        Format::Csv => Err(Error::Schema(format!("{what} only writes json"))),
    }
}

fn check_window(cfg: &RunConfig, found: usize) -> Result<()> {
    match cfg.window {
        Some(w) if w != found => Err(Error::WindowMismatch { left: w, right: found }),
        _ => Ok(()),
    }
}

fn load_op(cfg: &RunConfig, op: Option<&Path>, name: Option<&str>) -> Result<LoadedOp> {
    match (op, name) {
        (Some(path), _) => {
            let spec: QsoSpec = read_json(path)?;
            check_window(cfg, spec.window)?;
            load_spec(&spec)
        }
        (None, Some(name)) => Ok(builtin(name, cfg.window)?.op),
        (None, None) => Err(Error::Schema("no operator given".into())),
    }
}

fn load_system(cfg: &RunConfig, path: Option<&Path>, name: Option<&str>) -> Result<OrthogonalSystem> {
    match (path, name) {
        (Some(path), _) => {
            let s: OrthogonalSystem = read_json(path)?;
            check_window(cfg, s.window())?;
            Ok(s)
        }
        (None, Some(name)) => builtin(name, cfg.window)?
            .system
            .ok_or_else(|| Error::Schema(format!("builtin '{name}' has no orthogonal system"))),
        (None, None) => Err(Error::Schema("no system given".into())),
    }
}

fn require_constructed(op: LoadedOp) -> Result<ConstructedOp> {
    op.constructed
        .ok_or_else(|| Error::HypothesisNotMet("audits need a constructed operator".into()))
}

fn start_vector(path: Option<&Path>, window: usize) -> Result<SimplexVector> {
    match path {
        Some(p) => read_json(p),
        None => SimplexVector::barycenter(&IndexSet::range(window), window),
    }
}

fn parse_alpha(s: &str, window: usize) -> Result<IndexSet> {
    let indices = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Schema(format!("bad index '{t}' in --alpha")))
        })
        .collect::<Result<Vec<_>>>()?;
    IndexSet::within(indices, window)
}

fn run(cfg: &RunConfig) -> Result<i32> {
    match &cfg.command {
        Command::Validate { source } => {
            json_only(cfg, "validate")?;
            if let Some(path) = &source.system {
                let s = load_system(cfg, Some(path), None)?;
                let report = validate_system(&s);
                let valid = report.is_valid();
                emit(cfg, &json!({ "system": report, "valid": valid }))?;
                return Ok(if valid { EXIT_OK } else { EXIT_INVALID });
            }
            let op = load_op(cfg, source.op.as_deref(), source.builtin.as_deref())?;
            let tensor = validate_tensor(&op.tensor);
            let constraints = op.constructed.as_ref().map(verify_constraints);
            let valid = tensor.is_valid() && constraints.as_ref().is_none_or(|c| c.is_valid());
            emit(
                cfg,
                &json!({ "tensor": tensor, "constraints": constraints, "valid": valid }),
            )?;
            Ok(if valid { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Construct { source, pi, strategy } => {
            json_only(cfg, "construct")?;
            let system = load_system(cfg, source.system.as_deref(), source.builtin.as_deref())?;
            let pi = match pi {
                Some(p) => index_map_from(read_json(p)?, system.len())?,
                None => IndexMap::identity(system.window()),
            };
            let strategy: ComplementStrategy = match strategy {
                Some(p) => read_json(p)?,
                None => ComplementStrategy::new(),
            };
            let op = build_op(&system, &pi, &strategy)?;
            let tensor = validate_tensor(&op.tensor);
            let constraints = verify_constraints(&op);
            let op_report = characterize(&op.tensor);
            let code = if !(tensor.is_valid() && constraints.is_valid()) {
                EXIT_INVALID
            } else if !op_report.is_op() {
                EXIT_NOT_OP
            } else {
                EXIT_OK
            };
            if let Some(path) = &cfg.out {
                write_out(Some(path), &canonical_json(&constructed_spec(&op))?)?;
            }
            let report = json!({
                "window": op.window(),
                "complement": op.complement(),
                "tensor": tensor,
                "constraints": constraints,
                "op": op_report,
            });
            write_out(None, &canonical_json(&report)?)?;
            Ok(code)
        }
        Command::CheckOp { source, trials } => {
            json_only(cfg, "check-op")?;
            let op = load_op(cfg, source.op.as_deref(), source.builtin.as_deref())?;
            let exact = characterize(&op.tensor);
            let randomized = randomized_op_test(&op.tensor, *trials, cfg.seed);
            let verdict = if exact.is_op() && randomized.is_op() {
                Verdict::Op
            } else {
                Verdict::NotOp
            };
            let equivalence = pi_volterra_equivalence(&op.tensor);
            emit(
                cfg,
                &json!({
                    "verdict": verdict,
                    "exact": exact,
                    "randomized": randomized,
                    "equivalence": equivalence,
                    "seed": cfg.seed,
                }),
            )?;
            Ok(if verdict == Verdict::Op { EXIT_OK } else { EXIT_NOT_OP })
        }
        Command::Simulate { source, x0, steps } => {
            let op = load_op(cfg, source.op.as_deref(), source.builtin.as_deref())?;
            let x0 = start_vector(x0.as_deref(), op.tensor.window())?;
            let traj = iterate(&op.tensor, &x0, *steps)?;
            match cfg.format {
                Format::Json => emit(cfg, &traj)?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    let csv_err = |e: csv::Error| Error::Io(format!("csv: {e}"));
                    w.write_record(["step", "index", "value"]).map_err(csv_err)?;
                    for (s, x) in traj.steps.iter().enumerate() {
                        for (k, v) in x.iter() {
                            w.write_record([s.to_string(), k.to_string(), v.to_string()])
                                .map_err(csv_err)?;
                        }
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(format!("csv: {e}")))?;
                    let text = String::from_utf8(bytes).map_err(|e| Error::Io(format!("csv: {e}")))?;
                    write_out(cfg.out.as_deref(), &text)?;
                    if let Some(path) = &cfg.out {
                        let sidecar = json!({
                            "residuals": traj.residuals,
                            "in_window_mass": traj.in_window_mass,
                            "supports": traj.supports,
                        });
                        write_out(Some(&sidecar_path(path)), &canonical_json(&sidecar)?)?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::FixedPoint { source, x0, search } => {
            json_only(cfg, "fixed-point")?;
            let op = load_op(cfg, source.op.as_deref(), source.builtin.as_deref())?;
            let x0 = start_vector(x0.as_deref(), op.tensor.window())?;
            let result = fixed_point_search_with(|x| evaluate(&op.tensor, x), &x0, &search.options())?;
            emit(cfg, &result)?;
            Ok(EXIT_OK)
        }
        Command::Audit {
            source,
            kind,
            alpha,
            samples,
            max_face_size,
            search,
        } => {
            json_only(cfg, "audit")?;
            let op = require_constructed(load_op(cfg, source.op.as_deref(), source.builtin.as_deref())?)?;
            match kind {
                AuditChoice::Face => {
                    let samples = samples.unwrap_or(50);
                    let report = match alpha {
                        Some(a) => face_map_audit(&op, &parse_alpha(a, op.window())?, samples, cfg.seed)?,
                        None => face_map_audit_all(&op, *max_face_size, samples, cfg.seed)?,
                    };
                    emit(cfg, &report)?;
                    Ok(if report.passed { EXIT_OK } else { EXIT_NOT_OP })
                }
                AuditChoice::Boundary => {
                    let report = boundary_fixed_point_audit(&op, samples.unwrap_or(20), *max_face_size, cfg.seed)?;
                    emit(cfg, &report)?;
                    Ok(if report.passed { EXIT_OK } else { EXIT_NOT_OP })
                }
                AuditChoice::Existence => {
                    let report = existence_probe(&op, &search.options())?;
                    emit(cfg, &report)?;
                    Ok(match report {
                        ProbeReport::NotFound { .. } => EXIT_NOT_OP,
                        _ => EXIT_OK,
                    })
                }
            }
        }
        Command::AnalyzeSystem { source } => {
            json_only(cfg, "analyze-system")?;
            let system = load_system(cfg, source.system.as_deref(), source.builtin.as_deref())?;
            let validation = validate_system(&system);
            let valid = validation.is_valid();
            let mut doc = serde_json::to_value(profile(&system))?;
            if let serde_json::Value::Object(map) = &mut doc {
                map.insert("window".into(), json!(system.window()));
                map.insert("members".into(), json!(system.len()));
                map.insert("validation".into(), serde_json::to_value(&validation)?);
            }
            emit(cfg, &doc)?;
            Ok(if valid { EXIT_OK } else { EXIT_INVALID })
        }
    }
}

/// `traj.csv` → `traj.sidecar.json` in the same directory.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    csv_path.with_file_name(format!("{stem}.sidecar.json"))
}
