//! Subcommands. Each returns the process exit code:
//! 0 success, 2 configuration or usage error, 3 evaluation error,
//! 4 missing frame fields.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use subcurv::brackets::{curl_matrix, rank_at_points, two_form_rank, DEFAULT_MAX_DEPTH};
use subcurv::calculus::Rational;
use subcurv::geometry::{MeanCurvature, DEFAULT_EPS_SING};
use subcurv::smp::run_scenario;
use subcurv::{Error, GridSpec, VectorFieldExpr};

use crate::config::{parse_point, parse_rational, Config, ConfigError};
use crate::registry::{builtin, BUILTINS};
use crate::report::{fmt17, grid_json, num, rank_json, render, scenario_csv, scenario_json, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVAL: i32 = 3;
pub const EXIT_FRAMES: i32 = 4;

pub const EPS_SING_VAR: &str = "SUBCURV_EPS_SING";

#[derive(Parser, Debug)]
#[command(name = "subcurv", version, about = "Horizontal p-mean curvature, bracket ranks and comparison scenarios")]
pub struct Cli {
    /// Worker threads for grid sweeps (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate H_{φ,p} of a configured function at a point or over a grid.
    Curvature(CurvatureArgs),
    /// Bracket-generating rank of frames, named fields or a surface's tangent distribution.
    Rank(RankArgs),
    /// Run or list comparison scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub function: String,
    /// Rational exponent, e.g. 0, 1 or 1/2.
    #[arg(long, default_value = "0")]
    pub p: String,
    /// Comma-separated point.
    #[arg(long, conflicts_with = "grid", allow_hyphen_values = true)]
    pub at: Option<String>,
    /// Grid points per axis over the function's box.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Names of [field ...] sections.
    #[arg(long, num_args = 1.., conflicts_with = "surface")]
    pub fields: Vec<String>,
    /// Name of a [function ...] section whose level set is examined.
    #[arg(long)]
    pub surface: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub depth: usize,
}

#[derive(Subcommand, Debug)]
pub enum ScenarioCommand {
    /// Run a builtin scenario by name, or the [scenario] of a config file.
    Run(RunArgs),
    /// List builtin scenarios.
    List,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    pub name: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// A failure with its exit code and one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Curvature(a) => curvature(a, out),
        Command::Rank(a) => rank(a, out, err),
        Command::Scenario(ScenarioCommand::List) => list(out),
        Command::Scenario(ScenarioCommand::Run(a)) => scenario(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(Config::parse(&text)?)
}

/// `ε_sing` from the environment, else the default.
pub fn eps_sing() -> Result<f64, Failure> {
    match std::env::var(EPS_SING_VAR) {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(Failure::config(format!("{EPS_SING_VAR} must be a positive number, got '{s}'"))),
        },
        Err(_) => Ok(DEFAULT_EPS_SING),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| Failure::config(format!("cannot write output: {e}"))),
    }
}

fn point_arg(at: &str, dim: usize) -> Result<Vec<f64>, Failure> {
    let p = parse_point(at)?;
    if p.len() != dim {
        return Err(Failure::config(format!("point has {} coordinates, structure has {dim}", p.len())));
    }
    Ok(p)
}

fn curvature(a: &CurvatureArgs, out: &mut dyn Write) -> Outcome {
    let cfg = load(&a.config)?;
    let s = cfg.structure()?;
    let f = cfg.function(&a.function)?;
    let p: Rational = parse_rational(&a.p).ok_or_else(|| Failure::config(format!("--p expects a rational number, got '{}'", a.p)))?;
    if p < Rational::from_integer(0) {
        return Err(Failure::config("--p must be >= 0"));
    }
    let eps = eps_sing()?;
    let eval_fail = |e: Error| Failure { code: EXIT_EVAL, message: e.to_string() };
    let h = MeanCurvature::new(s, &f.expr, p).map_err(eval_fail)?;
    match (&a.at, a.grid) {
        (Some(at), _) => {
            let x = point_arg(at, s.dim())?;
            let value = h.eval(&x, eps).map_err(eval_fail)?;
            emit(&format!("{}\n", fmt17(value)), a.out.as_deref(), out)
        }
        (None, Some(n)) => {
            let domain = f.domain.clone().ok_or_else(|| Failure::config(format!("[function {}] has no box", f.name)))?;
            let grid = GridSpec::uniform(domain, n).map_err(Failure::config)?;
            let values: Vec<(Option<f64>, Option<f64>)> = grid.map(|_, x| (h.eval(x, eps).ok(), h.conorm(x).ok()));
            let text = match a.format {
                Format::Json => {
                    let mut o = Map::new();
                    o.insert("schema_version".into(), json!(SCHEMA_VERSION));
                    o.insert("structure".into(), json!(s.name));
                    o.insert("function".into(), json!({ "name": f.name, "expr": f.source }));
                    o.insert("p".into(), json!(p.to_string()));
                    o.insert("eps_sing".into(), num(eps));
                    o.insert("grid".into(), grid_json(&grid));
                    let rows = (0..grid.len())
                        .map(|i| {
                            let (hv, c) = values[i];
                            json!({
                                "point": grid.point(i).into_iter().map(num).collect::<Vec<_>>(),
                                "H": hv.map_or(Value::Null, num),
                                "conorm": c.map_or(Value::Null, num),
                            })
                        })
                        .collect();
                    o.insert("values".into(), Value::Array(rows));
                    render(&Value::Object(o))
                }
                Format::Csv => {
                    let mut t = String::new();
                    for c in s.coords.names() {
                        t.push_str(c);
                        t.push(',');
                    }
                    t.push_str("H,conorm,singular\n");
                    for (i, (hv, c)) in values.iter().enumerate() {
                        for x in grid.point(i) {
                            t.push_str(&fmt17(x));
                            t.push(',');
                        }
                        let cell = |v: &Option<f64>| v.map_or_else(String::new, fmt17);
                        t.push_str(&format!("{},{},{}\n", cell(hv), cell(c), u8::from(hv.is_none())));
                    }
                    t
                }
            };
            emit(&text, a.out.as_deref(), out)
        }
        (None, None) => Err(Failure::config("curvature needs --at or --grid")),
    }
}

fn rank(a: &RankArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = load(&a.config)?;
    let s = cfg.structure()?;
    let dim = s.dim();
    let x = match &a.at {
        Some(at) => point_arg(at, dim)?,
        None => vec![0.0; dim],
    };
    let frames_fail = |e: Error| match e {
        Error::MissingFrames => Failure { code: EXIT_FRAMES, message: format!("structure '{}' has no frame fields", s.name) },
        other => Failure { code: EXIT_EVAL, message: other.to_string() },
    };
    let (source, fields, target): (Value, Vec<VectorFieldExpr>, usize) = if let Some(name) = &a.surface {
        let f = cfg.function(name)?;
        let fields = subcurv::brackets::tangent_distribution_fields(s, &f.expr).map_err(frames_fail)?;
        (json!({ "surface": name }), fields, dim - 1)
    } else if !a.fields.is_empty() {
        let fields = a
            .fields
            .iter()
            .map(|n| cfg.fields.get(n).cloned().ok_or_else(|| Failure::config(format!("no [field {n}] section"))))
            .collect::<Result<Vec<_>, _>>()?;
        (json!({ "fields": a.fields }), fields, dim)
    } else {
        (json!("frames"), s.frames().map_err(frames_fail)?.to_vec(), dim)
    };
    let report = rank_at_points(&fields, std::slice::from_ref(&x), a.depth, target)
        .map_err(|e| Failure { code: EXIT_EVAL, message: e.to_string() })?
        .remove(0);
    let hormander = report.rank >= target;
    let mut verdicts = vec![format!(
        "hormander: {} (rank {} of {target})",
        if hormander { "yes" } else { "no" },
        report.rank
    )];
    let two_form = match (s.frames.as_ref(), s.null_coforms.as_slice()) {
        (Some(frames), [theta]) => {
            let basis: Result<Vec<Vec<f64>>, Error> = frames.iter().map(|e| e.eval(&x)).collect();
            basis.and_then(|b| two_form_rank(&curl_matrix(theta, dim), &x, Some(&b))).ok()
        }
        _ => None,
    };
    match two_form {
        Some(k) => verdicts.push(format!(
            "two_form_rank: {k} (needs >= 3; condition {})",
            if k >= 3 { "holds" } else { "fails" }
        )),
        None => verdicts.push("two_form_rank: unavailable".to_string()),
    }
    let mut o = Map::new();
    o.insert("schema_version".into(), json!(SCHEMA_VERSION));
    o.insert("structure".into(), json!(s.name));
    o.insert("source".into(), source);
    o.insert("target".into(), json!(target));
    o.insert("rank".into(), rank_json(&report));
    o.insert("hormander".into(), json!(hormander));
    o.insert("two_form_rank".into(), json!(two_form));
    o.insert("verdicts".into(), json!(verdicts));
    for v in &verdicts {
        let _ = writeln!(err, "{v}");
    }
    emit(&render(&Value::Object(o)), None, out)
}

fn list(out: &mut dyn Write) -> Outcome {
    let width = BUILTINS.iter().map(|b| b.name.len()).max().unwrap_or(0);
    let text: String = BUILTINS.iter().map(|b| format!("{:width$}  {}\n", b.name, b.description)).collect();
    emit(&text, None, out)
}

fn scenario(a: &RunArgs, out: &mut dyn Write) -> Outcome {
    let mut sc = match (&a.name, &a.config) {
        (Some(name), _) => builtin(name)
            .ok_or_else(|| Failure::config(format!("unknown scenario '{name}' (see `subcurv scenario list`)")))?
            .scenario()?,
        (None, Some(path)) => load(path)?.scenario.ok_or_else(|| Failure::config("config has no [scenario] section"))?,
        (None, None) => return Err(Failure::config("scenario run needs a NAME or --config")),
    };
    if std::env::var_os(EPS_SING_VAR).is_some() {
        sc.tolerances.eps_sing = eps_sing()?;
    }
    let report = run_scenario(&sc).map_err(Failure::config)?;
    let text = match a.format {
        Format::Json => render(&scenario_json(&report)),
        Format::Csv => scenario_csv(&report),
    };
    emit(&text, a.out.as_deref(), out)
}
