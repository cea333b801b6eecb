//! `ehatp`: plan, replay and benchmark epistemic human-aware task plans.

mod bench;
mod simulate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ehatp::dsl::{has_errors, parse_domain, parse_problem, validate, Diagnostic, DomainModel, ProblemInstance};
use ehatp::solver::{solve, Metrics, SolveError};

#[derive(Parser)]
#[command(name = "ehatp", version, about = "Epistemic human-aware task planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a joint policy and write it as JSON.
    Plan {
        #[arg(short = 'd', long)]
        domain: PathBuf,
        #[arg(short = 'p', long)]
        problem: PathBuf,
        #[arg(short = 'o', long)]
        out: PathBuf,
        /// Also write a one-row metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Replay a policy against its problem.
    Simulate {
        #[arg(short = 'P', long)]
        policy: PathBuf,
        /// Follow every human alternative.
        #[arg(long, group = "mode")]
        exhaustive: bool,
        /// Pick the human's action at each AND node from standard input.
        #[arg(long, group = "mode")]
        interactive: bool,
        /// Follow one random human alternative per AND node.
        #[arg(long, group = "mode")]
        random: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the shipped instances and compare with the reference table.
    Bench {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(short = 'o', long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Suite {
    Table1,
    All,
}

/// Exit status: 0 success, 1 input diagnostics or I/O trouble, 2 no plan or
/// a failing replay.
pub(crate) enum Outcome {
    Ok,
    Diagnostics,
    Failed,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> ExitCode {
        match o {
            Outcome::Ok => ExitCode::SUCCESS,
            Outcome::Diagnostics => ExitCode::from(1),
            Outcome::Failed => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Plan {
            domain,
            problem,
            out,
            metrics,
        } => cmd_plan(&domain, &problem, &out, metrics.as_deref()),
        Command::Simulate {
            policy,
            exhaustive: _,
            interactive,
            random,
            seed,
        } => {
            let mode = if interactive {
                simulate::Mode::Interactive
            } else if random {
                simulate::Mode::Random(seed)
            } else {
                simulate::Mode::Exhaustive
            };
            simulate::cmd_simulate(&policy, mode)
        }
        Command::Bench { suite, out } => bench::cmd_bench(suite, &out),
    }
    .into()
}

fn report(diags: &[Diagnostic], file: &Path) {
    for d in diags {
        eprintln!("{}", d.render(&file.display().to_string()));
    }
}

/// Reads, parses and validates a domain/problem pair, printing diagnostics.
pub(crate) fn load(domain: &Path, problem: &Path) -> Option<(DomainModel, ProblemInstance)> {
    let read = |p: &Path| match fs::read_to_string(p) {
        Ok(t) => Some(t),
        Err(e) => {
            eprintln!("{}: {e}", p.display());
            None
        }
    };
    let dom_text = read(domain)?;
    let prob_text = read(problem)?;
    let dom = parse_domain(&dom_text).map_err(|d| report(&d, domain)).ok()?;
    let prob = parse_problem(&prob_text, &dom).map_err(|d| report(&d, problem)).ok()?;
    let diags = validate(&dom, &prob);
    report(&diags, problem);
    if has_errors(&diags) {
        return None;
    }
    Some((dom, prob))
}

pub(crate) const METRICS_HEADER: [&str; 7] = ["instance", "K", "comm", "states", "maxW", "leaves", "time_ms"];

pub(crate) fn metrics_record(label: &str, prob: &ProblemInstance, m: &Metrics) -> [String; 7] {
    [
        label.to_string(),
        prob.k.to_string(),
        if prob.comm_allowed { "Y" } else { "N" }.to_string(),
        m.states.to_string(),
        m.max_worlds.to_string(),
        m.leaves.to_string(),
        m.time_ms.to_string(),
    ]
}

pub(crate) fn write_csv(path: &Path, rows: &[[String; 7]]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_plan(domain: &Path, problem: &Path, out: &Path, metrics: Option<&Path>) -> Outcome {
    let Some((dom, prob)) = load(domain, problem) else {
        return Outcome::Diagnostics;
    };
    let sol = match solve(&prob, &dom) {
        Ok(s) => s,
        Err(SolveError::NoSolution { metrics: m }) => {
            eprintln!(
                "error: no joint solution for `{}` ({} states explored, at most {} worlds)",
                prob.name, m.states, m.max_worlds
            );
            return Outcome::Failed;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::Failed;
        }
    };
    let mut policy = sol.policy;
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string();
    policy.domain_file = Some(abs(domain));
    policy.problem_file = Some(abs(problem));
    if let Err(e) = fs::write(out, policy.to_json() + "\n") {
        eprintln!("{}: {e}", out.display());
        return Outcome::Diagnostics;
    }
    if let Some(path) = metrics {
        if let Err(e) = write_csv(path, &[metrics_record(&prob.name, &prob, &sol.metrics)]) {
            eprintln!("{}: {e}", path.display());
            return Outcome::Diagnostics;
        }
    }
    eprintln!(
        "{}: states={} maxW={} leaves={} time_ms={}",
        prob.name, sol.metrics.states, sol.metrics.max_worlds, sol.metrics.leaves, sol.metrics.time_ms
    );
    Outcome::Ok
}
