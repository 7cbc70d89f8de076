use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use bellcheck::behavior::behavior_from_model;
use bellcheck::chsh::{binarize, chsh_values, postselected_correlations, zero_to_coin, ChshReport, PostSelectionReport};
use bellcheck::fine::{check_no_signalling, find_joint, JointVerdict};
use bellcheck::flatten::{bell_average, product_flatten, uniform_reduce, Refinement};
use bellcheck::io::{parse_model, print_model, ModelFile, CONTEXT_KEYS};
use bellcheck::loophole::{quantum_singlet_behavior, search_postselection_violation, AngleSet, SearchConfig};
use bellcheck::montecarlo::{
    estimate_correlations, from_contextual, independence_diagnostic, simulate, write_csv, SettingSource,
    SimulationOptions,
};
use bellcheck::{counterexample_model, BehaviorTable, CorrelationQuad, Error, Rational};

#[derive(Parser)]
#[command(name = "bellcheck", version, about = "Exact and simulated checks of local hidden-variable models of Bell tests")]
struct Cli {
    /// Output format; defaults to csv for `simulate` and json elsewhere.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel modules.
    #[arg(long, global = true, env = "BELL_THREADS", default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model or behavior file.
    Validate { file: PathBuf },
    /// Exact correlation quad of a model or behavior file.
    Exact { file: PathBuf },
    /// Rewrite a contextual model as a single-space model.
    Flatten {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Product)]
        method: Method,
        #[arg(long, value_enum, default_value_t = RefinementArg::Common)]
        refinement: RefinementArg,
    },
    /// All eight CHSH values of a quad or a model file.
    Chsh(ChshArgs),
    /// Joint-distribution test for a binary behavior.
    Fine {
        file: PathBuf,
        /// Allowed marginal deviation for the no-signalling check.
        #[arg(long, default_value = "0")]
        tolerance: Rational,
    },
    /// Seeded Monte Carlo run of the causal model.
    Simulate(SimulateArgs),
    /// Search for a ternary model that violates CHSH after post-selection.
    Search(SearchArgs),
    /// The two-valued counterexample model and its verdicts.
    DemoCounterexample,
    /// The singlet behavior at given analyzer angles.
    DemoQuantum {
        /// θ_x θ_x' θ_y θ_y' in radians; defaults to 0 π/2 π/4 3π/4.
        #[arg(long, num_args = 4, allow_negative_numbers = true)]
        angles: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Product,
    Uniform,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefinementArg {
    Common,
    Lcm,
}

#[derive(Args)]
struct ChshArgs {
    /// Correlations E(x,y) E(x,y') E(x',y) E(x',y').
    #[arg(long, num_args = 4, conflicts_with = "file", allow_hyphen_values = true)]
    quad: Option<Vec<Rational>>,
    #[arg(required_unless_present = "quad")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Setting pmf over xy xy' x'y x'y', comma separated.
    #[arg(long, value_delimiter = ',')]
    bias: Option<Vec<Rational>>,
    /// Share randomness between settings and the hidden variable.
    #[arg(long)]
    confound: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = SearchConfig::default().budget)]
    budget: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = SearchConfig::default().source_atoms)]
    source_atoms: usize,
    #[arg(long, default_value_t = SearchConfig::default().instrument_atoms)]
    instrument_atoms: usize,
    /// Minimum coincidence rate per context.
    #[arg(long, default_value = "3/10")]
    min_rate: Rational,
    /// Strict upper bound on every detection rate; `none` disables it.
    #[arg(long, default_value = "2/3")]
    max_detection: String,
    #[arg(long, default_value_t = SearchConfig::default().restarts)]
    restarts: usize,
    /// Also write the winning model file here.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

/// Exit statuses.
const VALIDATION_FAILURE: u8 = 1;
const USAGE_ERROR: u8 = 2;

enum Failure {
    Validation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type Outcome = Result<Artifact, Failure>;

enum Artifact {
    Json(Value),
    /// Already rendered text.
    Raw(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(USAGE_ERROR);
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();

    match run(&cli).and_then(|a| emit(&cli, a)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(VALIDATION_FAILURE)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}

fn emit(cli: &Cli, artifact: Artifact) -> Result<(), Failure> {
    let text = match artifact {
        Artifact::Json(v) => match cli.format.unwrap_or(Format::Json) {
            Format::Json => serde_json::to_string_pretty(&v).expect("json values serialize") + "\n",
            Format::Text => render_text(&v, 0),
            Format::Csv => return Err(Failure::Usage("csv output is only available for `simulate`".into())),
        },
        Artifact::Raw(s) => s,
    };
    let io_err = |e: std::io::Error| Failure::Usage(e.to_string());
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(io_err),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io_err),
    }
}

fn render_text(v: &Value, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    let mut out = String::new();
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) | Value::Array(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        out.push_str(&render_text(v, indent + 1));
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", scalar(v))),
                }
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            out.push_str(&format!("{pad}{}\n", items.iter().map(scalar).collect::<Vec<_>>().join(" ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                out.push_str(&format!("{pad}[{i}]\n"));
                out.push_str(&render_text(item, indent + 1));
            }
        }
        _ => out.push_str(&format!("{pad}{}\n", scalar(v))),
    }
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A float as a decimal string with 17 significant digits.
fn decimal(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp).max(0) as usize, x)
    } else {
        format!("{x:.16e}")
    }
}

fn quad_json(q: &CorrelationQuad) -> Value {
    let values = q.values();
    let mut map = serde_json::Map::new();
    for (k, v) in CONTEXT_KEYS.iter().zip(values) {
        map.insert(k.to_string(), json!(v.to_string()));
    }
    Value::Object(map)
}

fn chsh_json(report: &ChshReport) -> Value {
    let names = [["x", "x'"].map(String::from), ["y", "y'"].map(String::from)];
    json!({
        "values": report.values.iter().map(|v| json!({
            "flipped": CONTEXT_KEYS[v.flipped],
            "sign": v.sign,
            "combination": v.describe(&names[0], &names[1]),
            "value": v.value.to_string(),
        })).collect::<Vec<_>>(),
        "max_abs": report.max_abs.to_string(),
        "max_abs_decimal": decimal(report.max_abs.to_f64()),
        "satisfied": report.satisfied,
    })
}

fn postselection_json(r: &PostSelectionReport) -> Value {
    let opt = |v: &Option<Rational>| v.as_ref().map_or(Value::Null, |v| json!(v.to_string()));
    let strings = |v: &[Rational]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>();
    let mut conditional = serde_json::Map::new();
    let mut rates = serde_json::Map::new();
    for (k, key) in CONTEXT_KEYS.iter().enumerate() {
        conditional.insert(key.to_string(), opt(&r.conditional[k]));
        rates.insert(key.to_string(), json!(r.coincidence_rate[k].to_string()));
    }
    json!({
        "raw_quad": quad_json(&r.raw_quad),
        "raw_chsh": chsh_json(&r.raw_chsh()),
        "conditional_quad": conditional,
        "conditional_chsh": r.conditional_chsh().as_ref().map_or(Value::Null, chsh_json),
        "coincidence_rate": rates,
        "alice_detection": strings(&r.alice_detection),
        "bob_detection": strings(&r.bob_detection),
    })
}

fn behavior_json(b: &BehaviorTable) -> Value {
    serde_json::from_str(&print_model(&ModelFile::Behavior(b.clone()))).expect("printed documents are json")
}

fn joint_json(v: &JointVerdict) -> Value {
    match v {
        JointVerdict::Feasible { joint } => json!({
            "verdict": "feasible",
            "joint": joint.entries().map(|(o, p)| json!({"outcomes": o, "mass": p.to_string()})).collect::<Vec<_>>(),
        }),
        JointVerdict::Infeasible { certificate } => {
            let names = [["x", "x'"].map(String::from), ["y", "y'"].map(String::from)];
            json!({
                "verdict": "infeasible",
                "certificate": {
                    "flipped": CONTEXT_KEYS[certificate.flipped],
                    "sign": certificate.sign,
                    "combination": certificate.describe(&names[0], &names[1]),
                    "value": certificate.value.to_string(),
                },
            })
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if cli.format == Some(Format::Csv) && !matches!(cli.command, Command::Simulate(_)) {
        return Err(Failure::Usage("csv output is only available for `simulate`".into()));
    }
    match &cli.command {
        Command::Validate { file } => {
            let parsed = parse_model(file)?;
            Ok(Artifact::Json(json!({"command": "validate", "kind": parsed.kind(), "valid": true})))
        }
        Command::Exact { file } => {
            let parsed = parse_model(file)?;
            let quad = match &parsed {
                ModelFile::Contextual(m) => m.quad()?,
                ModelFile::Flat(f) => f.quad(),
                ModelFile::Averaged(a) => a.quad(),
                ModelFile::Behavior(b) => b.quad(),
            };
            Ok(Artifact::Json(json!({"command": "exact", "kind": parsed.kind(), "quad": quad_json(&quad)})))
        }
        Command::Flatten { file, method, refinement } => {
            let ModelFile::Contextual(m) = parse_model(file)? else {
                return Err(Failure::Validation("flatten needs a contextual model".into()));
            };
            let out = match method {
                Method::Product => ModelFile::Flat(product_flatten(&m)?),
                Method::Uniform => {
                    let r = match refinement {
                        RefinementArg::Common => Refinement::Common,
                        RefinementArg::Lcm => Refinement::Lcm,
                    };
                    ModelFile::Flat(uniform_reduce(&m, r)?)
                }
                Method::Average => ModelFile::Averaged(bell_average(&m)?),
            };
            let doc: Value = serde_json::from_str(&print_model(&out)).expect("printed documents are json");
            Ok(Artifact::Json(doc))
        }
        Command::Chsh(args) => chsh_command(args),
        Command::Fine { file, tolerance } => {
            let (behavior, reduced) = match parse_model(file)? {
                ModelFile::Behavior(b) => (b, false),
                ModelFile::Contextual(m) => {
                    let reduced = if m.is_point_valued() { zero_to_coin(&m)? } else { binarize(&m)? };
                    (behavior_from_model(&reduced)?, reduced != m)
                }
                ModelFile::Flat(_) | ModelFile::Averaged(_) => {
                    return Err(Failure::Validation("fine needs a behavior or contextual model file".into()))
                }
            };
            let ns = check_no_signalling(&behavior, tolerance)?;
            let verdict = if ns.holds { Some(find_joint(&behavior)?) } else { None };
            let no_signalling = json!({
                "holds": ns.holds,
                "max_deviation": ns.max_deviation.to_string(),
                "tolerance": ns.tolerance.to_string(),
            });
            Ok(Artifact::Json(json!({
                "command": "fine",
                "reduced_to_binary": reduced,
                "no_signalling": no_signalling,
                "chsh": chsh_json(&chsh_values(&behavior.quad())?),
                "result": verdict.as_ref().map_or(json!({"verdict": "signalling"}), joint_json),
            })))
        }
        Command::Simulate(args) => simulate_command(cli, args),
        Command::Search(args) => search_command(args),
        Command::DemoCounterexample => {
            let m = counterexample_model();
            let quad = m.quad()?;
            let [e11, e12, e21, e22] = quad.values();
            // E(A₁B₁) - E(A₋₁B₁) + E(A₁B₋₁) + E(A₋₁B₋₁)
            let combination = &e11 - &e21 + &e12 + &e22;
            let behavior = behavior_from_model(&m)?;
            let model: Value = serde_json::from_str(&print_model(&ModelFile::Contextual(m))).expect("json");
            Ok(Artifact::Json(json!({
                "command": "demo-counterexample",
                "model": model,
                "quad": quad_json(&quad),
                "combination": {
                    "expression": "E(+1,+1) - E(-1,+1) + E(+1,-1) + E(-1,-1)",
                    "value": combination.to_string(),
                },
                "chsh": chsh_json(&chsh_values(&quad)?),
                "fine": joint_json(&find_joint(&behavior)?),
            })))
        }
        Command::DemoQuantum { angles } => {
            let angles = match angles.as_deref() {
                None => AngleSet::chsh_optimal(),
                Some(&[a, b, c, d]) => AngleSet { theta_x: a, theta_x_prime: b, theta_y: c, theta_y_prime: d },
                Some(_) => unreachable!("clap enforces four angles"),
            };
            let behavior = quantum_singlet_behavior(&angles)?;
            let quad = behavior.quad();
            let decimals: serde_json::Map<String, Value> = CONTEXT_KEYS
                .iter()
                .zip(quad.to_f64())
                .map(|(k, v)| (k.to_string(), json!(decimal(v))))
                .collect();
            Ok(Artifact::Json(json!({
                "command": "demo-quantum",
                "angles": ([angles.theta_x, angles.theta_x_prime, angles.theta_y, angles.theta_y_prime].map(decimal)),
                "behavior": behavior_json(&behavior),
                "quad": quad_json(&quad),
                "quad_decimal": decimals,
                "chsh": chsh_json(&chsh_values(&quad)?),
                "fine": joint_json(&find_joint(&behavior)?),
            })))
        }
    }
}

fn chsh_command(args: &ChshArgs) -> Outcome {
    let (quad, postselection) = match (&args.quad, &args.file) {
        (Some(values), _) => {
            let values: [Rational; 4] = values.clone().try_into().expect("clap enforces four values");
            (CorrelationQuad::new(values), None)
        }
        (None, Some(file)) => match parse_model(file)? {
            ModelFile::Contextual(m) => {
                let quad = m.quad()?;
                let post = if m.is_point_valued() {
                    let b = behavior_from_model(&m)?;
                    b.has_zero_outcomes().then(|| postselected_correlations(&b))
                } else {
                    None
                };
                (quad, post)
            }
            ModelFile::Flat(f) => (f.quad(), None),
            ModelFile::Averaged(a) => (a.quad(), None),
            ModelFile::Behavior(b) => {
                let post = b.has_zero_outcomes().then(|| postselected_correlations(&b));
                (b.quad(), post)
            }
        },
        (None, None) => unreachable!("clap requires a quad or a file"),
    };
    let report = chsh_values(&quad)?;
    Ok(Artifact::Json(json!({
        "command": "chsh",
        "quad": quad_json(&quad),
        "chsh": chsh_json(&report),
        "postselection": postselection.as_ref().map_or(Value::Null, postselection_json),
    })))
}

fn simulate_command(cli: &Cli, args: &SimulateArgs) -> Outcome {
    let ModelFile::Contextual(model) = parse_model(&args.model)? else {
        return Err(Failure::Validation("simulate needs a contextual model".into()));
    };
    let settings = match &args.bias {
        None => SettingSource::default(),
        Some(pmf) => {
            let pmf: [Rational; 4] = pmf
                .clone()
                .try_into()
                .map_err(|_| Failure::Usage("--bias needs four comma-separated probabilities".into()))?;
            SettingSource::from_context_pmf(pmf)?
        }
    };
    let dag = from_contextual(&model, settings)?;
    let opts = SimulationOptions { confound: args.confound, ..Default::default() };
    let sim = simulate(&dag, args.trials, args.seed, &opts)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&dag, &sim.records, &mut buf).expect("writing to memory");
            Ok(Artifact::Raw(String::from_utf8(buf).expect("csv is utf-8")))
        }
        Format::Json | Format::Text => {
            let exact = dag.exact_quad();
            let estimates: Vec<Value> = estimate_correlations(&sim.records)
                .iter()
                .zip(CONTEXT_KEYS)
                .map(|(e, key)| match e {
                    Some(e) => json!({
                        "context": key,
                        "count": e.count,
                        "estimate": decimal(e.estimate),
                        "std_error": decimal(e.std_error),
                    }),
                    None => json!({"context": key, "count": 0, "estimate": null, "std_error": null}),
                })
                .collect();
            let diagnostic = independence_diagnostic(&sim.records, Some(&sim.hidden_trace));
            let records: Vec<Value> = sim
                .records
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    json!({
                        "trial": t,
                        "a": dag.alice_labels[r.a as usize],
                        "b": dag.bob_labels[r.b as usize],
                        "x": r.x,
                        "y": r.y,
                    })
                })
                .collect();
            Ok(Artifact::Json(json!({
                "command": "simulate",
                "trials": args.trials,
                "seed": args.seed,
                "confound": args.confound,
                "exact_quad": quad_json(&exact),
                "estimates": estimates,
                "independence": diagnostic.map_or(Value::Null, |d| json!({
                    "feature": d.feature,
                    "statistic": decimal(d.statistic),
                    "degrees_of_freedom": d.degrees_of_freedom,
                    "p_value": decimal(d.p_value),
                })),
                "records": records,
            })))
        }
    }
}

fn search_command(args: &SearchArgs) -> Outcome {
    let max_detection_rate = match args.max_detection.as_str() {
        "none" => None,
        s => Some(s.parse::<Rational>().map_err(|e| Failure::Usage(e.to_string()))?),
    };
    let config = SearchConfig {
        source_atoms: args.source_atoms,
        instrument_atoms: args.instrument_atoms,
        budget: args.budget,
        seed: args.seed,
        restarts: args.restarts,
        min_coincidence_rate: args.min_rate.clone(),
        max_detection_rate,
        ..Default::default()
    };
    let result = search_postselection_violation(&config)?;
    let model_text = print_model(&ModelFile::Contextual(result.model.clone()));
    if let Some(path) = &args.model_out {
        std::fs::write(path, &model_text).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let model: Value = serde_json::from_str(&model_text).expect("printed documents are json");
    let d = &result.detection;
    let strings = |v: &[Rational]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>();
    Ok(Artifact::Json(json!({
        "command": "search",
        "config": {
            "seed": config.seed,
            "budget": config.budget,
            "restarts": config.restarts,
            "source_atoms": config.source_atoms,
            "instrument_atoms": config.instrument_atoms,
            "min_coincidence_rate": config.min_coincidence_rate.to_string(),
            "max_detection_rate": config.max_detection_rate.as_ref().map(|r| r.to_string()),
            "grid": config.grid,
        },
        "violating": result.violating,
        "constraints_met": result.constraints_met,
        "postselected_max_abs": result.postselected_max_abs.as_ref().map(|r| r.to_string()),
        "postselected_max_abs_decimal": result.postselected_max_abs.as_ref().map(|r| decimal(r.to_f64())),
        "report": postselection_json(&result.report),
        "detection": {
            "alice": strings(&d.alice),
            "bob": strings(&d.bob),
            "versus_two_thirds": d.versus_two_thirds,
        },
        "history": result
            .history()
            .into_iter()
            .map(|h| if h.is_finite() { json!(decimal(h)) } else { Value::Null })
            .collect::<Vec<_>>(),
        "model": model,
    })))
}
