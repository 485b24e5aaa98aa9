//! Command-line front end. Every command writes one JSON report.
//!
//! Exit status: 0 success, 1 audited quantity fails `--threshold`,
//! 2 unreadable or malformed input (no report written), 3 domain error
//! (a report carrying the error is written).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::audit::{
    audit_privacy, audit_privacy_with_pairs, audit_utility, impossibility_lower_bound,
    propose_centers,
};
use crate::covering::{build_upm, default_depth, greedy_net, max_packing};
use crate::demo::{pipeline_demo, DemoConfig};
use crate::error::Error;
use crate::io::{
    load_map, load_measure, load_mechanism, load_space, read_json, HierarchyDoc, LoadError,
    MeasureDoc, MechanismDoc, SpaceDoc,
};
use crate::mechanism::{
    calibrate_beta, min_database_size, privacy_bound, sample_many, tabulate, tradeoff_upper_bound,
    ExpMechParams,
};
use crate::metric::{validate_metric, FiniteMetricSpace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Parser)]
#[command(
    name = "metricdp",
    version,
    about = "Exponential mechanisms over finite metric spaces"
)]
pub struct RunConfig {
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Check the metric axioms of a space file.
    Validate {
        #[arg(long)]
        space: PathBuf,
    },
    /// Greedy r-net and the matching (r/2)-packing.
    Net {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        r: f64,
    },
    /// Level-weighted covering measure and its cover hierarchy.
    BuildMeasure {
        #[arg(long)]
        space: PathBuf,
        /// Truncation depth L (default: enough levels to separate every pair).
        #[arg(long = "depth", short = 'L')]
        depth: Option<usize>,
        /// Rescale the measure to total mass 1.
        #[arg(long)]
        normalize: bool,
    },
    /// β = max(0, (2/γ) ln(1/(δm))).
    Calibrate {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        m: f64,
    },
    /// Full mechanism table for a map, base measure and β.
    Tabulate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        beta: f64,
    },
    /// Seeded draws from the mechanism at one input.
    Sample {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        x: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Exact privacy level of a mechanism table; passes if ε ≤ threshold.
    AuditPrivacy {
        #[arg(long)]
        mech: PathBuf,
        /// Input space of the table.
        #[arg(long)]
        space: PathBuf,
        /// Output space (only its labels matter; defaults to a discrete space on the table's outputs).
        #[arg(long)]
        output_space: Option<PathBuf>,
        /// Include the per-pair matrix.
        #[arg(long)]
        pairs: bool,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Worst-case ball mass at radius γ; passes if it is ≥ threshold.
    AuditUtility {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Disjoint-ball lower bound on the table's privacy level; passes if it is ≤ threshold.
    LowerBound {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// Comma-separated input labels (default: proposed from a greedy packing).
        #[arg(long, value_delimiter = ',')]
        centers: Option<Vec<String>>,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Constructive privacy cost of (γ, δ)-utility with a given base; passes if ε ≤ threshold.
    Tradeoff {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        /// Target ε for the minimum database size under sensitivity 1/N.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// End-to-end pipeline on one space plus the discrete-family lower bounds.
    Demo {
        /// Space file (default: 5-point grid).
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long = "depth", short = 'L')]
        depth: Option<usize>,
    },
}

impl Command {
    fn seed(&self) -> Option<u64> {
        match self {
            Command::Sample { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Result of [`run`]: the exit status and the report written, if any.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: i32,
    pub report: Option<Value>,
}

pub const STATUS_OK: i32 = 0;
pub const STATUS_THRESHOLD: i32 = 1;
pub const STATUS_PARSE: i32 = 2;
pub const STATUS_DOMAIN: i32 = 3;

enum Failure {
    Parse(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse { .. } => Failure::Parse(e.to_string()),
            LoadError::Domain { source, .. } => Failure::Domain(source),
        }
    }
}

/// Command payload plus an optional threshold verdict.
struct Success {
    payload: Map<String, Value>,
    passed: Option<bool>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

fn verdict(threshold: Option<f64>, pass: impl FnOnce(f64) -> bool) -> Option<bool> {
    threshold.map(pass)
}

fn params_for(map: &Path, measure: &Path, beta: f64) -> Result<ExpMechParams, Failure> {
    let map = load_map(map)?;
    let base = load_measure(measure)?;
    Ok(ExpMechParams::new(base, beta, map)?)
}

fn dispatch(command: &Command) -> Result<Success, Failure> {
    let done = |payload: Value| Success {
        payload: object(payload),
        passed: None,
    };
    match command {
        Command::Validate { space } => {
            let doc: SpaceDoc = read_json(space)?;
            if let SpaceDoc::Explicit { dist, .. } = &doc {
                let report = validate_metric(dist)?;
                if !report.is_ok() {
                    return Err(Failure::Domain(Error::MetricViolation(report)));
                }
            }
            let built = doc.build()?;
            Ok(done(
                json!({ "ok": true, "points": built.len(), "diameter": diameter_or_zero(&built) }),
            ))
        }
        Command::Net { space, r } => {
            let x = load_space(space)?;
            let net = greedy_net(&x, *r)?;
            let packing = max_packing(&x, r / 2.0)?;
            Ok(done(
                json!({ "r": r, "net": net, "packing_radius": r / 2.0, "packing_size": packing.len() }),
            ))
        }
        Command::BuildMeasure {
            space,
            depth,
            normalize,
        } => {
            let x = Arc::new(load_space(space)?);
            let depth = depth.unwrap_or_else(|| default_depth(&x));
            let (raw, hier) = build_upm(x, depth)?;
            let total_mass = raw.total_mass();
            let mu = if *normalize { raw.normalize()? } else { raw };
            let mut payload = object(to_value(&MeasureDoc::from_measure(&mu)));
            payload.insert("total_mass".into(), json!(total_mass));
            payload.insert(
                "hierarchy".into(),
                to_value(&HierarchyDoc::from_hierarchy(&hier)),
            );
            Ok(Success {
                payload,
                passed: None,
            })
        }
        Command::Calibrate { gamma, delta, m } => {
            let beta = calibrate_beta(*gamma, *delta, *m)?;
            Ok(done(
                json!({ "beta": beta, "epsilon_bound": privacy_bound(beta, 1.0) }),
            ))
        }
        Command::Tabulate { map, measure, beta } => {
            let params = params_for(map, measure, *beta)?;
            let table = tabulate(&params)?;
            let mut payload = object(to_value(&MechanismDoc::from_table(&table)));
            payload.insert("lipschitz_c".into(), json!(params.map().lipschitz_c()));
            payload.insert(
                "privacy_bound".into(),
                json!(privacy_bound(*beta, params.map().lipschitz_c())),
            );
            Ok(Success {
                payload,
                passed: None,
            })
        }
        Command::Sample {
            map,
            measure,
            beta,
            x,
            seed,
            count,
        } => {
            let params = params_for(map, measure, *beta)?;
            let samples = sample_many(&params, x, *seed, *count)?;
            Ok(done(json!({ "x": x, "samples": samples })))
        }
        Command::AuditPrivacy {
            mech,
            space,
            output_space,
            pairs,
            threshold,
        } => {
            let input = Arc::new(load_space(space)?);
            let output = match output_space {
                Some(p) => Arc::new(load_space(p)?),
                None => {
                    let doc: MechanismDoc = read_json(mech)?;
                    Arc::new(FiniteMetricSpace::from_fn(doc.outputs, |i, j| {
                        if i == j {
                            0.0
                        } else {
                            1.0
                        }
                    })?)
                }
            };
            let table = load_mechanism(mech, input.clone(), output)?;
            let report = if *pairs {
                audit_privacy_with_pairs(&table, &input)?
            } else {
                audit_privacy(&table, &input)?
            };
            let passed = verdict(*threshold, |t| report.epsilon_max.value() <= t);
            Ok(Success {
                payload: object(to_value(&report)),
                passed,
            })
        }
        Command::AuditUtility {
            mech,
            map,
            gamma,
            threshold,
        } => {
            let map = load_map(map)?;
            let table = load_mechanism(mech, map.domain().clone(), map.codomain().clone())?;
            let report = audit_utility(&table, &map, *gamma)?;
            let passed = verdict(*threshold, |t| report.min_mass >= t);
            Ok(Success {
                payload: object(to_value(&report)),
                passed,
            })
        }
        Command::LowerBound {
            mech,
            map,
            centers,
            r,
            threshold,
        } => {
            let map = load_map(map)?;
            let table = load_mechanism(mech, map.domain().clone(), map.codomain().clone())?;
            let centers = match centers {
                Some(c) => c.clone(),
                None => propose_centers(&map, *r)?,
            };
            let refs: Vec<&str> = centers.iter().map(String::as_str).collect();
            let bound = impossibility_lower_bound(&table, &map, &refs, *r)?;
            let k = centers.len() as f64;
            let diameter = diameter_or_zero(map.domain());
            let mut payload = object(to_value(&bound));
            payload.insert("centers".into(), json!(centers));
            payload.insert("pigeonhole_bound".into(), json!((k / 2.0).ln() / diameter));
            let passed = verdict(*threshold, |t| bound.eps_lower.value() <= t);
            Ok(Success { payload, passed })
        }
        Command::Tradeoff {
            measure,
            gamma,
            delta,
            eps,
            threshold,
        } => {
            let base = load_measure(measure)?;
            let t = tradeoff_upper_bound(&base, *gamma, *delta)?;
            let mut payload = object(to_value(&t));
            if let Some(target) = eps {
                payload.insert(
                    "min_database_size".into(),
                    json!(min_database_size(*target, *gamma, *delta, t.m)?),
                );
            }
            let passed = verdict(*threshold, |th| t.epsilon <= th);
            Ok(Success { payload, passed })
        }
        Command::Demo {
            space,
            gamma,
            delta,
            depth,
        } => {
            let space = match space {
                Some(p) => load_space(p)?,
                None => FiniteMetricSpace::grid(5)?,
            };
            let report = pipeline_demo(&DemoConfig {
                space: Arc::new(space),
                gamma: *gamma,
                delta: *delta,
                depth: *depth,
            })?;
            Ok(done(to_value(&report)))
        }
    }
}

fn diameter_or_zero(space: &FiniteMetricSpace) -> f64 {
    space.diameter().unwrap_or(0.0)
}

fn error_value(error: &Error) -> Value {
    let mut e = json!({ "kind": error.kind(), "message": error.to_string() });
    if let Error::MetricViolation(report) = error {
        e["violations"] = to_value(&report.violations);
    }
    e
}

fn envelope(command: &Command, status: &str) -> Map<String, Value> {
    let mut m = object(to_value(command));
    m.insert("version".into(), json!(VERSION));
    m.insert("seed".into(), json!(command.seed()));
    m.insert("status".into(), json!(status));
    m
}

/// Runs one command and builds its report without touching the filesystem output.
pub fn execute(config: &RunConfig) -> Outcome {
    match dispatch(&config.command) {
        Ok(Success { payload, passed }) => {
            let (status, label) = match passed {
                Some(false) => (STATUS_THRESHOLD, "fail"),
                Some(true) => (STATUS_OK, "pass"),
                None => (STATUS_OK, "ok"),
            };
            let mut report = envelope(&config.command, label);
            if let Some(p) = passed {
                report.insert("passed".into(), json!(p));
            }
            // payload keys never collide with the envelope's
            report.extend(payload);
            Outcome {
                status,
                report: Some(Value::Object(report)),
            }
        }
        Err(Failure::Parse(message)) => {
            eprintln!("error: {message}");
            Outcome {
                status: STATUS_PARSE,
                report: None,
            }
        }
        Err(Failure::Domain(error)) => {
            eprintln!("error: {error}");
            let mut report = envelope(&config.command, "error");
            report.insert("error".into(), error_value(&error));
            Outcome {
                status: STATUS_DOMAIN,
                report: Some(Value::Object(report)),
            }
        }
    }
}

/// Writes `text` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Executes the command and writes its report to `--out` or stdout.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = execute(config);
    let Some(report) = outcome.report else {
        return outcome.status;
    };
    let mut text = serde_json::to_string_pretty(&report).expect("JSON values serialize");
    text.push('\n');
    let written = match &config.out {
        Some(path) => write_atomic(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return STATUS_PARSE;
    }
    outcome.status
}
