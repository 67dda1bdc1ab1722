//! Command-line front end: check a property, generate benchmark models, or
//! cross-check with the memoryless-deterministic enumeration oracle.
//!
//! Exit codes: 0 = a verdict was computed (including Inconclusive),
//! 1 = output I/O failure, 2 = usage error, 3 = invalid model or property,
//! 4 = resource budget exceeded.

use clap::{Args, Parser, Subcommand, ValueEnum};
use relreach_core::gen::{figures, hampath, rt, ts, vn, GenError, GeneratedInstance};
use relreach_core::oracle::md_check;
use relreach_core::solver::SolverError;
use relreach_core::{
    dump_unfoldings, fmt_rat, parse_rat, report_json, run_check, CheckConfig, Mdp, Mode,
    NormalizedQuery, Rat,
};
use relreach_core::check::CheckError;
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "relreach",
    version,
    about = "Check relational reachability properties of Markov decision processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a property against a model
    Check(CheckArgs),
    /// Write a benchmark or counterexample model with its property
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Decide by enumerating memoryless deterministic scheduler tuples
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Rational arithmetic; verdicts are always conclusive
    Exact,
    /// Certified interval bounds up to --tolerance
    Approx,
}

#[derive(Args)]
struct CheckArgs {
    /// Model file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Property file (text)
    #[arg(long)]
    property: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Approx)]
    mode: ModeArg,
    /// Width bound for the reported value intervals (default 1/1000000)
    #[arg(long)]
    tolerance: Option<String>,
    /// Write a scheduler witness or counterexample (JSON); exact mode only
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write each combination's unfolded model with its rewards (JSON)
    #[arg(long)]
    dump_unfolding: Option<PathBuf>,
    /// Print the result as JSON on stdout (timings still go to stderr)
    #[arg(long)]
    json: bool,
    /// Worker threads (overrides RELREACH_JOBS)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    /// Model file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Property file (text)
    #[arg(long)]
    property: PathBuf,
    /// Maximum number of scheduler tuples to enumerate
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    /// Print the result as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Family {
    /// Biased-coin extractor: 2n-bit rounds with per-flip bias choice
    Vn {
        /// Zeros required per round (the round length is 2n)
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "59/100")]
        p_lo: String,
        #[arg(long, default_value = "61/100")]
        p_hi: String,
        /// Tolerance in the generated property
        #[arg(long, default_value = "0")]
        eps: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write expected.json
        #[arg(long)]
        expected: bool,
    },
    /// Grid pursuit: robot on a fixed route, adversarial janitor
    Rt {
        /// Grid side length
        #[arg(long)]
        n: usize,
        /// Janitor start cell "X,Y"; omit for the janitor-free chain
        #[arg(long)]
        janitor: Option<String>,
        #[arg(long, default_value = "9/10")]
        move_success: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expected: bool,
    },
    /// Two-thread interleaving leaking a counter through the final write
    Ts {
        #[arg(long)]
        h1: usize,
        #[arg(long)]
        h2: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expected: bool,
    },
    /// Hamiltonian-path gadget built from a graph file
    Hampath {
        /// Graph file: lines "U V" (edge) or a lone vertex name; # comments
        #[arg(long)]
        graph: PathBuf,
        /// Start vertex name
        #[arg(long)]
        init: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expected: bool,
    },
    /// The four fixed separation instances, one subdirectory each
    Figures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expected: bool,
    },
}

enum Failure {
    Usage(String),
    Invalid(String),
    Budget(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Invalid(_) => 3,
            Failure::Budget(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) | Failure::Budget(m) | Failure::Io(m) => {
                f.write_str(m)
            }
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Check(args) => cmd_check(args),
        Command::Generate { family } => cmd_generate(family),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn load_model(path: &Path) -> Result<Mdp, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Mdp::from_json(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_query(path: &Path, mdp: &Mdp) -> Result<NormalizedQuery, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let query = relreach_core::parse_query(&text, mdp)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(query.normalize())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serializes");
    text.push('\n');
    write_text(path, &text)
}

fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let jobs = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RELREACH_JOBS") {
            Ok(s) => Some(s.parse::<usize>().map_err(|_| {
                Failure::Usage(format!("RELREACH_JOBS must be a positive integer, got {s:?}"))
            })?),
            Err(_) => None,
        },
    };
    if jobs == Some(0) {
        return Err(Failure::Usage("worker thread count must be at least 1".into()));
    }
    Ok(jobs)
}

fn map_check_err(e: CheckError) -> Failure {
    match e {
        CheckError::Pipeline(e) => Failure::Invalid(e.to_string()),
        CheckError::Quotient(e) => Failure::Invalid(e.to_string()),
        CheckError::Solver(e) => match e {
            SolverError::IterationCapExceeded { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        },
        CheckError::WitnessNeedsExactMode => Failure::Usage(e.to_string()),
        CheckError::Parallelism(m) => Failure::Io(m),
    }
}

fn cmd_check(args: CheckArgs) -> CliResult {
    let t_start = Instant::now();
    let mdp = load_model(&args.model)?;
    let query = load_query(&args.property, &mdp)?;

    let parse_tol = |text: &String| {
        parse_rat(text).map_err(|e| Failure::Usage(format!("--tolerance {text:?}: {e}")))
    };
    let (mode, tolerance) = match (args.mode, &args.tolerance) {
        (ModeArg::Exact, None) => (Mode::Exact, Rat::from_integer(0.into())),
        (ModeArg::Exact, Some(t)) => {
            let t = parse_tol(t)?;
            if t != Rat::from_integer(0.into()) {
                return Err(Failure::Usage(
                    "exact mode admits no tolerance; drop --tolerance or use --mode approx"
                        .into(),
                ));
            }
            (Mode::Exact, t)
        }
        (ModeArg::Approx, None) => (Mode::Approx, parse_rat("1/1000000").unwrap()),
        (ModeArg::Approx, Some(t)) => {
            let t = parse_tol(t)?;
            if t <= Rat::from_integer(0.into()) {
                return Err(Failure::Usage(format!(
                    "--tolerance must be positive, got {}",
                    fmt_rat(&t)
                )));
            }
            (Mode::Approx, t)
        }
    };
    if args.witness.is_some() && mode == Mode::Approx {
        return Err(Failure::Usage(
            "witness synthesis requires --mode exact".into(),
        ));
    }

    let config = CheckConfig {
        mode,
        tolerance,
        max_iterations: 1_000_000,
        jobs: resolve_jobs(args.jobs)?,
        want_witness: args.witness.is_some(),
    };

    if let Some(path) = &args.dump_unfolding {
        let dump = dump_unfoldings(&mdp, &query).map_err(map_check_err)?;
        write_json(path, &dump)?;
        eprintln!("unfoldings written to {}", path.display());
    }

    let report = run_check(&mdp, &query, &config).map_err(map_check_err)?;
    let value = report_json(&query, &config, &report);

    if let Some(path) = &args.witness {
        match &value["witness"] {
            serde_json::Value::Null => {
                eprintln!("no witness: the checked direction does not hold")
            }
            w => {
                write_json(path, w)?;
                eprintln!("witness written to {}", path.display());
            }
        }
    }

    if args.json {
        println!("{}", serde_json::to_string_pretty(&value).expect("JSON"));
    } else {
        println!("verdict: {}", report.verdict);
        println!(
            "v_max: [{}, {}]",
            fmt_rat(&report.v_max.lower),
            fmt_rat(&report.v_max.upper)
        );
        if let Some(v) = &report.v_min {
            println!("v_min: [{}, {}]", fmt_rat(&v.lower), fmt_rat(&v.upper));
        }
        if let Some(w) = &report.witness {
            let role = &value["witness"]["role"];
            match &w.lambda {
                Some(l) => println!(
                    "{}: mix with weight {} on the minimizing tuple, achieving {}",
                    role.as_str().unwrap_or("witness"),
                    fmt_rat(l),
                    fmt_rat(&w.achieved)
                ),
                None => println!(
                    "{}: pure scheduler tuple achieving {}",
                    role.as_str().unwrap_or("witness"),
                    fmt_rat(&w.achieved)
                ),
            }
        }
    }

    let t = &report.timings;
    eprintln!(
        "model: {} states, {} transitions; combinations: {}",
        report.model_states,
        report.model_transitions,
        report.combinations.len()
    );
    eprintln!(
        "timings: unfold {:?}, quotient {:?}, solve {:?}, aggregate {:?}, total {:?}",
        t.unfold,
        t.mec,
        t.solve,
        t.aggregate,
        t_start.elapsed()
    );
    Ok(())
}

fn map_param_err(e: GenError) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_instance(dir: &Path, inst: &GeneratedInstance, expected: bool) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut model = inst.mdp.to_json();
    model.push('\n');
    write_text(&dir.join("model.json"), &model)?;
    write_text(&dir.join("property.txt"), &format!("{}\n", inst.property))?;
    if expected {
        let value = json!({
            "name": inst.name,
            "notes": inst.notes,
            "expected": inst.expected.iter().map(|e| json!({
                "engine": e.engine.as_str(),
                "verdict": e.verdict.as_str(),
                "source": e.source,
            })).collect::<Vec<_>>(),
        });
        write_json(&dir.join("expected.json"), &value)?;
    }
    eprintln!(
        "wrote {}: {} states, {} transitions",
        dir.display(),
        inst.mdp.num_states(),
        inst.mdp.num_transitions()
    );
    Ok(())
}

fn cmd_generate(family: Family) -> CliResult {
    match family {
        Family::Vn {
            n,
            p_lo,
            p_hi,
            eps,
            out,
            expected,
        } => {
            let parse = |name: &str, text: &str| {
                parse_rat(text).map_err(|e| Failure::Usage(format!("--{name} {text:?}: {e}")))
            };
            let inst = vn::gen_von_neumann(
                n,
                parse("p-lo", &p_lo)?,
                parse("p-hi", &p_hi)?,
                parse("eps", &eps)?,
            )
            .map_err(map_param_err)?;
            write_instance(&out, &inst, expected)
        }
        Family::Rt {
            n,
            janitor,
            move_success,
            out,
            expected,
        } => {
            let janitor = match &janitor {
                None => None,
                Some(text) => {
                    let parts: Vec<&str> = text.split(',').collect();
                    let cell = match parts.as_slice() {
                        [x, y] => x
                            .trim()
                            .parse::<usize>()
                            .ok()
                            .zip(y.trim().parse::<usize>().ok()),
                        _ => None,
                    };
                    Some(cell.ok_or_else(|| {
                        Failure::Usage(format!("--janitor must be \"X,Y\", got {text:?}"))
                    })?)
                }
            };
            let move_success = parse_rat(&move_success).map_err(|e| {
                Failure::Usage(format!("--move-success {move_success:?}: {e}"))
            })?;
            let inst = rt::gen_robot_tag(n, janitor, move_success).map_err(map_param_err)?;
            write_instance(&out, &inst, expected)
        }
        Family::Ts {
            h1,
            h2,
            out,
            expected,
        } => {
            let inst = ts::gen_thread_scheduling(h1, h2).map_err(map_param_err)?;
            write_instance(&out, &inst, expected)
        }
        Family::Hampath {
            graph,
            init,
            out,
            expected,
        } => {
            let text = fs::read_to_string(&graph)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", graph.display())))?;
            let digraph = hampath::parse_graph(&text)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", graph.display())))?;
            let v_init = digraph.vertex(&init).ok_or_else(|| {
                Failure::Invalid(format!("{}: no vertex named {init:?}", graph.display()))
            })?;
            let inst =
                hampath::gen_hampath_reduction(&digraph, v_init).map_err(|e| match e {
                    GenError::EmptyGraph => {
                        Failure::Invalid(format!("{}: graph has no vertices", graph.display()))
                    }
                    other => map_param_err(other),
                })?;
            write_instance(&out, &inst, expected)
        }
        Family::Figures { out, expected } => {
            for inst in figures::gen_figures() {
                write_instance(&out.join(&inst.name), &inst, expected)?;
            }
            Ok(())
        }
    }
}

fn cmd_oracle(args: OracleArgs) -> CliResult {
    let mdp = load_model(&args.model)?;
    let query = load_query(&args.property, &mdp)?;
    let t0 = Instant::now();
    let out = md_check(&mdp, &query, args.budget).map_err(|e| Failure::Budget(e.to_string()))?;

    let witness_value = out.witness.as_ref().map(|scheds| {
        scheds
            .iter()
            .zip(&query.sched_vars)
            .map(|(sched, var)| {
                json!({
                    "sched_var": var,
                    "choices": sched
                        .choice
                        .iter()
                        .enumerate()
                        .map(|(s, &a)| json!(mdp.actions[s][a].name))
                        .collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>()
    });
    if args.json {
        let value = json!({
            "verdict": out.verdict.as_str(),
            "policies_per_var": out.policies_per_var,
            "witness": witness_value,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("JSON"));
    } else {
        println!("verdict: {}", out.verdict);
        if let Some(scheds) = &out.witness {
            for (sched, var) in scheds.iter().zip(&query.sched_vars) {
                let names: Vec<&str> = sched
                    .choice
                    .iter()
                    .enumerate()
                    .map(|(s, &a)| mdp.actions[s][a].name.as_str())
                    .collect();
                println!("witness {var}: {}", names.join(" "));
            }
        }
    }
    eprintln!(
        "enumerated {} scheduler choices per variable in {:?}",
        out.policies_per_var,
        t0.elapsed()
    );
    Ok(())
}
