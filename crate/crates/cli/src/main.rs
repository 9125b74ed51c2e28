//! `ctgen`: parse, simulate, falsify and validate compositional proofs of
//! synchronous dataflow programs.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 objective not reached
//! or validation failed, 3 solver failure or exhausted budget.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use serde::Deserialize;
use tracing_subscriber::EnvFilter;

use ctgen_core::algebra::Library;
use ctgen_core::engine::{self, EngineError, Objective, Slot};
use ctgen_core::frontend::script::{parse_node_expr, parse_pred, parse_property, parse_template};
use ctgen_core::frontend::{load_file, TypedProgram};
use ctgen_core::ir::{Valuation, Value};
use ctgen_core::proof::{load_script, validate_proofs, Outcome};
use ctgen_core::semantics::{elaborate_node, simulate, Node};
use ctgen_core::smt::{SmtError, SolverConfig};
use ctgen_core::templates::{self, TemplateArg, TemplateInst};

const EXIT_FAILED: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ctgen",
    version,
    about = "Compositional test generation for synchronous dataflow programs"
)]
struct Cli {
    /// Solver command line, e.g. "z3 -in".
    #[arg(long, global = true, env = "CTGEN_SOLVER")]
    solver: Option<String>,
    /// Per-query solver timeout in seconds; 0 disables it.
    #[arg(long, global = true, env = "CTGEN_SOLVER_TIMEOUT")]
    timeout: Option<f64>,
    /// Overall time budget in seconds.
    #[arg(long, global = true, env = "CTGEN_BUDGET")]
    budget: Option<f64>,
    /// Directory receiving one .smt2 file per solver query.
    #[arg(long, global = true, env = "CTGEN_DUMP_SMT")]
    dump_smt: Option<PathBuf>,
    /// Maximum number of concurrent solver sessions.
    #[arg(long, short = 'j', global = true, env = "CTGEN_JOBS")]
    jobs: Option<usize>,
    /// TOML configuration file; `ctgen.toml` in the working directory is
    /// read when present.
    #[arg(long, global = true, env = "CTGEN_CONFIG")]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse, typecheck and elaborate every node of a program.
    Check { file: PathBuf },
    /// Simulate a deterministic node and print its trace as CSV.
    Sim {
        file: PathBuf,
        /// Node name or node expression.
        #[arg(long)]
        node: String,
        /// CSV with a `round` column and one column per input.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Number of rounds; defaults to the number of input rows.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Search for the shortest input sequence reaching an objective.
    Falsify {
        file: PathBuf,
        /// Node name or node expression.
        #[arg(long)]
        node: String,
        /// Predicate such as `C >= 2`, or a property such as `FOut@10 /\ FOut@20`.
        #[arg(long)]
        obj: String,
        /// Input templates, `;`-separated: `In:Square` or `In:Square(_, _, -1, 1)`.
        #[arg(long)]
        templates: Option<String>,
        /// Largest bound tried.
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        /// Monitor equations over the node's wires, e.g. `D = Delay<<10>>(false, FOut);`.
        #[arg(long)]
        monitor: Option<String>,
        /// Directory for `<name>.csv` and `<name>.json`; the CSV goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "testcase")]
        name: String,
    },
    /// Validate a proof script.
    Prove {
        script: PathBuf,
        /// Write the machine-readable report here (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write counterexample traces of failed leaves into this directory.
        #[arg(long)]
        cex_dir: Option<PathBuf>,
    },
    /// Print the point predicate of a node's state after a simulated round,
    /// for use as a Temp intermediate state.
    Assist {
        file: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        round: usize,
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    solver: Option<String>,
    timeout: Option<f64>,
    budget: Option<f64>,
    dump_dir: Option<PathBuf>,
    jobs: Option<usize>,
    verbose: Option<u8>,
}

/// Effective settings after flags > env > config file > defaults.
#[derive(Debug)]
struct Config {
    solver: SolverConfig,
    budget: Option<Duration>,
    jobs: usize,
    verbose: u8,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let file = match &cli.config {
        Some(p) => Some(p.clone()),
        None => Some(PathBuf::from("ctgen.toml")).filter(|p| p.exists()),
    };
    let fc: FileConfig = match file {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("invalid configuration {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let mut solver = match cli.solver.as_ref().or(fc.solver.as_ref()) {
        Some(cmd) => SolverConfig::from_command_line(cmd)
            .ok_or_else(|| anyhow!("the solver command is empty"))?,
        None => SolverConfig::default(),
    };
    if let Some(t) = cli.timeout.or(fc.timeout) {
        if t < 0.0 {
            bail!("the solver timeout must not be negative");
        }
        solver.timeout = (t > 0.0).then(|| Duration::from_secs_f64(t));
    }
    solver.dump_dir = cli.dump_smt.clone().or(fc.dump_dir);
    let budget = match cli.budget.or(fc.budget) {
        Some(b) if b <= 0.0 => bail!("the time budget must be positive"),
        b => b.map(Duration::from_secs_f64),
    };
    let jobs = cli
        .jobs
        .or(fc.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(Config {
        solver,
        budget,
        jobs,
        verbose: cli.verbose.max(fc.verbose.unwrap_or(0)),
    })
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved here for
    // unreached objectives and failed proofs.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {:#}", e);
            return ExitCode::from(1);
        }
    };
    let level = match cfg.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("CTGEN_LOG").unwrap_or_else(|_| EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Some(b) = cfg.budget {
        std::thread::spawn(move || {
            std::thread::sleep(b);
            eprintln!("error: time budget of {:.1} s exhausted", b.as_secs_f64());
            std::process::exit(EXIT_SOLVER as i32);
        });
    }
    match run(cli.cmd, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(if is_solver_failure(&e) {
                EXIT_SOLVER
            } else {
                1
            })
        }
    }
}

fn is_solver_failure(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<SmtError>() || matches!(c.downcast_ref::<EngineError>(), Some(EngineError::Smt(_)))
    })
}

fn run(cmd: Cmd, cfg: &Config) -> Result<ExitCode> {
    match cmd {
        Cmd::Check { file } => cmd_check(&file),
        Cmd::Sim {
            file,
            node,
            inputs,
            steps,
        } => cmd_sim(&file, &node, inputs.as_deref(), steps),
        Cmd::Falsify {
            file,
            node,
            obj,
            templates,
            kmax,
            monitor,
            out,
            name,
        } => cmd_falsify(
            cfg,
            &file,
            &node,
            &obj,
            templates.as_deref(),
            kmax,
            monitor.as_deref(),
            out.as_deref(),
            &name,
        ),
        Cmd::Prove {
            script,
            json,
            cex_dir,
        } => cmd_prove(cfg, &script, json.as_deref(), cex_dir.as_deref()),
        Cmd::Assist {
            file,
            node,
            round,
            inputs,
        } => cmd_assist(&file, &node, round, inputs.as_deref()),
    }
}

fn load(file: &Path) -> Result<TypedProgram> {
    load_file(file).with_context(|| format!("in {}", file.display()))
}

fn cmd_check(file: &Path) -> Result<ExitCode> {
    let prog = load(file)?;
    let mut failed = false;
    println!(
        "{:<20} {:>6} {:>7} {:>6} {:>6}",
        "node", "inputs", "outputs", "states", "locals"
    );
    for decl in prog
        .nodes
        .iter()
        .filter(|d| !templates::is_template(&d.name))
    {
        match elaborate_node(&prog, &decl.name) {
            Ok(n) => println!(
                "{:<20} {:>6} {:>7} {:>6} {:>6}",
                n.name,
                n.inputs.len(),
                n.outputs.len(),
                n.states.len(),
                n.locals.len()
            ),
            Err(e) => {
                failed = true;
                eprintln!("error: node `{}`: {}", decl.name, e);
            }
        }
    }
    Ok(ExitCode::from(if failed { 1 } else { 0 }))
}

fn target(lib: &Library, expr: &str) -> Result<Node> {
    let e = parse_node_expr(expr).with_context(|| format!("in node expression `{}`", expr))?;
    Ok(lib.eval(&e)?)
}

/// Input rows for `n` from a CSV with a `round` column; extra columns are
/// ignored so exported test cases can be replayed on larger systems.
fn read_inputs(path: &Path, n: &Node) -> Result<Vec<Valuation>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| anyhow!("{} is empty", path.display()))?
        .split(',')
        .map(str::trim)
        .collect();
    let cols: Vec<(usize, &ctgen_core::ir::Var)> = n
        .inputs
        .iter()
        .map(|v| {
            header
                .iter()
                .position(|h| *h == v.name)
                .map(|i| (i, v))
                .ok_or_else(|| anyhow!("{} has no column for input `{}`", path.display(), v.name))
        })
        .collect::<Result<_>>()?;
    lines
        .enumerate()
        .map(|(row, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let mut val = Valuation::new();
            for (i, v) in &cols {
                let cell = cells.get(*i).copied().unwrap_or("");
                let x = Value::parse(cell, v.ty).ok_or_else(|| {
                    anyhow!(
                        "{}:{}: bad {} value `{}` for `{}`",
                        path.display(),
                        row + 2,
                        v.ty,
                        cell,
                        v.name
                    )
                })?;
                val.insert(v.name.clone(), x);
            }
            Ok(val)
        })
        .collect()
}

fn input_rows(n: &Node, inputs: Option<&Path>, steps: Option<usize>) -> Result<Vec<Valuation>> {
    let mut rows = match inputs {
        Some(p) => read_inputs(p, n)?,
        None if n.inputs.is_empty() => vec![Valuation::new(); steps.unwrap_or(0)],
        None => bail!("node `{}` has inputs; pass them with --inputs", n.name),
    };
    if let Some(s) = steps {
        if s > rows.len() {
            bail!("--steps {} exceeds the {} input rows", s, rows.len());
        }
        rows.truncate(s);
    }
    Ok(rows)
}

fn cmd_sim(
    file: &Path,
    node: &str,
    inputs: Option<&Path>,
    steps: Option<usize>,
) -> Result<ExitCode> {
    let lib = Library::new(load(file)?);
    let n = target(&lib, node)?;
    let rows = input_rows(&n, inputs, steps)?;
    let trace = simulate(&n, &rows)?;
    print!("{}", trace.to_csv());
    Ok(ExitCode::SUCCESS)
}

fn cmd_assist(file: &Path, node: &str, round: usize, inputs: Option<&Path>) -> Result<ExitCode> {
    let lib = Library::new(load(file)?);
    let n = target(&lib, node)?;
    let rows = input_rows(
        &n,
        inputs,
        if inputs.is_none() {
            Some(round + 1)
        } else {
            None
        },
    )?;
    println!("{}", engine::temp_split_assist(&n, &rows, round)?);
    Ok(ExitCode::SUCCESS)
}

fn parse_objective(text: &str) -> Result<Objective> {
    match parse_property(text) {
        Ok(p) => Ok(Objective::Property(p)),
        Err(pe) => parse_pred(text)
            .map(Objective::Reach)
            .map_err(|e| anyhow!("invalid objective `{}`: {} ({})", text, e, pe)),
    }
}

fn parse_slots(text: &str) -> Result<Vec<Slot>> {
    let mut out = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (input, spec) = item
            .split_once(':')
            .ok_or_else(|| anyhow!("template slot `{}` is not of the form INPUT:TEMPLATE", item))?;
        let spec = spec.trim();
        let template = if spec.contains('(') {
            parse_template(spec)?
        } else {
            let sig =
                templates::signature(spec).ok_or_else(|| anyhow!("unknown template `{}`", spec))?;
            TemplateInst {
                name: spec.into(),
                statics: vec![],
                args: vec![TemplateArg::Symbolic; sig.len()],
            }
        };
        out.push(Slot {
            input: input.trim().into(),
            template,
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_falsify(
    cfg: &Config,
    file: &Path,
    node: &str,
    obj: &str,
    templates: Option<&str>,
    kmax: usize,
    monitor: Option<&str>,
    out: Option<&Path>,
    name: &str,
) -> Result<ExitCode> {
    let lib = Library::new(load(file)?);
    let expr = parse_node_expr(node).with_context(|| format!("in node expression `{}`", node))?;
    let obj = parse_objective(obj)?;
    let slots = parse_slots(templates.unwrap_or(""))?;
    let s = &cfg.solver;
    let tc = match monitor {
        Some(m) => engine::falsify_with_monitor(s, &lib, &expr, m, &slots, &obj, kmax)?,
        None if slots.is_empty() => engine::falsify(s, &lib.eval(&expr)?, &obj, kmax)?,
        None => engine::synthesize(s, &lib, &expr, &slots, &obj, kmax)?,
    };
    let Some(tc) = tc else {
        println!("none: `{}` is not reachable within {} rounds", obj, kmax);
        return Ok(ExitCode::from(EXIT_FAILED));
    };
    eprintln!("objective `{}` reached at round {}", tc.objective, tc.round);
    if let Some(g) = &tc.generator {
        eprintln!("generator: {}", g);
    }
    for (k, v) in &tc.params {
        eprintln!("  {} = {}", k, v);
    }
    match out {
        Some(dir) => {
            let (csv, json) = tc.write(dir, name)?;
            println!("{}", csv.display());
            println!("{}", json.display());
        }
        None => print!("{}", tc.to_csv()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_prove(
    cfg: &Config,
    script: &Path,
    json: Option<&Path>,
    cex_dir: Option<&Path>,
) -> Result<ExitCode> {
    let (lib, s) = load_script(script)?;
    let report = validate_proofs(&lib, &cfg.solver, &s.proofs, cfg.jobs);
    let to_stdout = json == Some(Path::new("-"));
    if to_stdout {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.human());
        if let Some(p) = json {
            std::fs::write(p, report.to_json())
                .with_context(|| format!("cannot write {}", p.display()))?;
        }
    }
    if let Some(dir) = cex_dir {
        for n in &report.nodes {
            if let Outcome::Leaf {
                verdict: engine::Verdict::Counterexample { trace, .. },
            } = &n.outcome
            {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(format!("node-{}.csv", n.id));
                std::fs::write(&p, trace.to_csv())?;
                eprintln!(
                    "counterexample for node {} written to {}",
                    n.id,
                    p.display()
                );
            }
        }
    }
    Ok(ExitCode::from(if report.ok {
        0
    } else if report.solver_failed() {
        EXIT_SOLVER
    } else {
        EXIT_FAILED
    }))
}
