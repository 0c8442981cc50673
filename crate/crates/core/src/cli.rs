//! The `amdp` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::absorption::{uniformity_report, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::mdp::{check_condition_s, validate_model, MdpModel, Strategy, StrategyFamily};
use crate::number::Number;
use crate::occupation::{occupation, Solver, Truncation};
use crate::report::{Body, Claim, Format, OccupationSummary, ReportDocument, Status, ZooListing};
use crate::reproduce::reproduce;
use crate::spaces::StatePoint;
use crate::topology::check_convergence;
use crate::zoo::{self, ZooEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "amdp", version, about = "Occupation measures and topology checks for absorbing MDPs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalFlags {
    #[arg(long, value_enum, default_value_t = OutputFormat::Json, global = true)]
    pub format: OutputFormat,
    /// Convergence tolerance; datasets carry their own default.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 64, global = true)]
    pub trunc_states: usize,
    #[arg(long, default_value_t = 256, global = true)]
    pub trunc_stages: usize,
    /// Exact rational output (default).
    #[arg(long, global = true, conflicts_with = "float")]
    pub exact: bool,
    /// Floating-point output.
    #[arg(long, global = true)]
    pub float: bool,
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Md,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Md => Format::Md,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelSource {
    /// Built-in model.
    #[arg(long, conflicts_with = "model")]
    pub zoo: Option<String>,
    /// Model file (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StrategyChoice {
    /// Strategy name or family index; `const:<action>` plays one action everywhere.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Strategy file (JSON).
    #[arg(long, conflicts_with = "strategy")]
    pub strategy_file: Option<PathBuf>,
    /// Initial state: `atom` or `segment@coordinate`.
    #[arg(long)]
    pub x0: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Unroll,
    Countable,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List or export built-in models.
    Zoo {
        #[command(subcommand)]
        action: ZooCommand,
    },
    /// Check a model for structural problems.
    Validate {
        #[command(flatten)]
        source: ModelSource,
    },
    /// Occupation measure of a strategy.
    Occupation {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        choice: StrategyChoice,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Tail sums and the uniform-absorption verdict over a strategy family.
    Absorption {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        choice: StrategyChoice,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 48)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Convergence of a built-in dataset against test batteries.
    Convergence {
        #[arg(long)]
        zoo: String,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        battery: Option<String>,
    },
    /// Run the reproduction suite.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(crate::reproduce::TARGETS))]
        target: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ZooCommand {
    List,
    /// Write a built-in model in the model file format.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Loaded {
    Zoo(Box<ZooEntry>),
    File(Box<MdpModel>),
}

impl Loaded {
    fn model(&self) -> &MdpModel {
        match self {
            Loaded::Zoo(e) => &e.model,
            Loaded::File(m) => m,
        }
    }
}

fn load(source: &ModelSource) -> Result<Loaded> {
    match (&source.zoo, &source.model) {
        (Some(name), _) => Ok(Loaded::Zoo(Box::new(zoo::by_name(name)?))),
        (None, Some(path)) => Ok(Loaded::File(Box::new(MdpModel::from_json(&std::fs::read_to_string(path)?)?))),
        (None, None) => Err(Error::UnknownName("one of --zoo or --model is required".into())),
    }
}

fn strategy(loaded: &Loaded, choice: &StrategyChoice) -> Result<Strategy> {
    if let Some(path) = &choice.strategy_file {
        let s: Strategy = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate(loaded.model())?;
        return Ok(s);
    }
    let key = choice.strategy.as_deref();
    if let Some(action) = key.and_then(|k| k.strip_prefix("const:")) {
        return Strategy::deterministic_stationary(loaded.model(), format!("const:{action}"), |_| {
            Some(action.to_string())
        });
    }
    match (loaded, key) {
        (Loaded::Zoo(e), Some(k)) => e.strategy(k),
        (Loaded::Zoo(e), None) => {
            e.strategies.first().cloned().ok_or_else(|| Error::UnknownName(format!("{} needs --strategy", e.name)))
        }
        (Loaded::File(_), _) => {
            Err(Error::UnknownName("model files need --strategy-file or --strategy const:<action>".into()))
        }
    }
}

fn initial(loaded: &Loaded, choice: &StrategyChoice) -> Result<StatePoint> {
    let x0 = match (&choice.x0, loaded) {
        (Some(s), _) => s.parse()?,
        (None, Loaded::Zoo(e)) => e.x0.clone(),
        (None, Loaded::File(_)) => return Err(Error::UnknownName("model files need --x0".into())),
    };
    x0.check(&loaded.model().states)?;
    Ok(x0)
}

fn solver(loaded: &Loaded, method: Option<MethodArg>, g: &GlobalFlags) -> Solver {
    let trunc = Truncation { max_state_index: g.trunc_states, max_stages: g.trunc_stages, ..Truncation::default() };
    match (method, loaded) {
        (Some(MethodArg::Unroll), _) => Solver::Unroll { horizon: g.trunc_stages },
        (Some(MethodArg::Countable), _) => Solver::Countable(trunc),
        (None, Loaded::Zoo(e)) => match &e.solver {
            Solver::Countable(_) => Solver::Countable(trunc),
            s => s.clone(),
        },
        (None, Loaded::File(m)) if m.is_atomic() => Solver::Countable(trunc),
        (None, Loaded::File(_)) => Solver::Unroll { horizon: g.trunc_stages },
    }
}

fn listing(e: &ZooEntry) -> ZooListing {
    ZooListing {
        name: e.name.clone(),
        summary: e.summary.clone(),
        strategies: e.strategies.iter().map(|s| s.name.clone()).collect(),
        families: e
            .families
            .iter()
            .map(|f| match f.range() {
                Some(r) => format!("{} ({}..={})", f.label, r.start(), r.end()),
                None => f.label.clone(),
            })
            .collect(),
        batteries: e.batteries.iter().map(|b| b.name.clone()).collect(),
        datasets: e.datasets.iter().map(|d| d.name.clone()).collect(),
    }
}

/// Execute a parsed command; `Ok(None)` means output was already written.
fn execute(cli: &Cli, invocation: Vec<String>, out: &mut dyn Write) -> Result<Option<ReportDocument>> {
    let g = &cli.global;
    let stamp = !g.no_timestamp;
    let doc = |body: Body, claims: Vec<Claim>| ReportDocument::new(invocation.clone(), body, claims, stamp);
    Ok(Some(match &cli.command {
        Command::Zoo { action: ZooCommand::List } => {
            let entries = zoo::all()?.iter().map(listing).collect();
            doc(Body::ZooList { entries }, vec![])
        }
        Command::Zoo { action: ZooCommand::Export { name, out: path } } => {
            let text = zoo::by_name(name)?.model.to_json()? + "\n";
            match path {
                Some(p) => std::fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            return Ok(None);
        }
        Command::Validate { source } => {
            let loaded = load(source)?;
            let m = loaded.model();
            let diagnostics = validate_model(m);
            let claims = vec![Claim {
                id: "validate".into(),
                status: Status::from_bool(diagnostics.is_empty()),
                label: format!("model {} is well formed", m.name),
                expected: "0 diagnostics".into(),
                computed: format!("{} diagnostics", diagnostics.len()),
                anchor: "structural checks".into(),
            }];
            let condition_s = check_condition_s(m)?;
            doc(Body::Validation { model: m.name.clone(), diagnostics, condition_s: Box::new(condition_s) }, claims)
        }
        Command::Occupation { source, choice, method } => {
            let loaded = load(source)?;
            let pi = strategy(&loaded, choice)?;
            let x0 = initial(&loaded, choice)?;
            let occ = occupation(loaded.model(), &pi, &x0, &solver(&loaded, *method, g))?;
            let summary = OccupationSummary::new(&loaded.model().name, &pi.name, &x0.to_string(), &occ, g.float);
            doc(Body::Occupation(Box::new(summary)), vec![])
        }
        Command::Absorption { source, choice, family, n_max, epsilon } => {
            let loaded = load(source)?;
            let x0 = initial(&loaded, choice)?;
            let fam = match (&loaded, family) {
                (Loaded::Zoo(e), Some(label)) => e.family(label)?.clone(),
                (Loaded::Zoo(e), None) if choice.strategy.is_none() && choice.strategy_file.is_none() => e
                    .families
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::UnknownName(format!("{} has no strategy family", e.name)))?,
                _ => StrategyFamily::explicit("single", vec![strategy(&loaded, choice)?]),
            };
            let eps = Number::float(*epsilon);
            let r = uniformity_report(loaded.model(), &fam, &x0, *n_max, &eps, &solver(&loaded, None, g))?;
            doc(Body::Absorption(Box::new(r)), vec![])
        }
        Command::Convergence { zoo: name, dataset, battery } => {
            let e = zoo::by_name(name)?;
            let datasets = match dataset {
                Some(d) => vec![e.dataset(d)?.clone()],
                None => e.datasets.clone(),
            };
            let batteries = match battery {
                Some(b) => vec![e.battery(b)?.clone()],
                None => e.batteries.clone(),
            };
            let mut reports = Vec::new();
            for d in &datasets {
                let (seq, limit) = e.dataset_measures(d)?;
                for b in &batteries {
                    reports.push(check_convergence(&seq, &limit, b, g.tol.unwrap_or(d.tol))?);
                }
            }
            doc(Body::Convergence { reports }, vec![])
        }
        Command::Reproduce { target } => doc(Body::Reproduction, reproduce(target)?),
    }))
}

/// Run with explicit arguments (including the program name) and streams;
/// returns the exit code.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let invocation: Vec<String> = std::iter::once("amdp".to_string())
        .chain(args.iter().skip(1).filter(|a| *a != "--no-timestamp").cloned())
        .collect();
    match execute(&cli, invocation, out) {
        Ok(None) => EXIT_OK,
        Ok(Some(doc)) => {
            let text = match doc.render(cli.global.format.into()) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_FAILURE;
                }
            };
            let _ = out.write_all(text.as_bytes());
            if matches!(cli.command, Command::Reproduce { .. }) {
                for c in &doc.claims {
                    let _ = writeln!(err, "{}", c.line());
                }
            }
            if doc.all_pass() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e @ Error::UnknownName(_)) => {
            let _ = writeln!(err, "usage error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().map(|s| s.to_string()).collect(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        assert_eq!(call(&["amdp", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["amdp", "reproduce", "nowhere"]).0, EXIT_USAGE);
        assert_eq!(call(&["amdp", "validate", "--zoo", "missing"]).0, EXIT_USAGE);
    }

    #[test]
    fn zoo_list_and_validate() {
        let (code, out, _) = call(&["amdp", "zoo", "list", "--no-timestamp"]);
        assert_eq!(code, 0);
        for n in zoo::NAMES {
            assert!(out.contains(n));
        }
        let (code, out, _) = call(&["amdp", "validate", "--zoo", "example2", "--format", "md", "--no-timestamp"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("0 diagnostic"));
    }

    #[test]
    fn occupation_output_is_deterministic() {
        let args = ["amdp", "occupation", "--zoo", "example2", "--strategy", "psi^5", "--no-timestamp"];
        let (code, a, _) = call(&args);
        assert_eq!(code, 0);
        assert_eq!(a, call(&args).1);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["body"]["total_mass"], "39/16");
        assert!(v.get("timestamp").is_none());
    }

    #[test]
    fn float_output() {
        let (code, out, _) =
            call(&["amdp", "occupation", "--zoo", "example2", "--strategy", "4", "--float", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("cell,mass"));
        assert!(out.contains("b_1,1"));
    }
}
