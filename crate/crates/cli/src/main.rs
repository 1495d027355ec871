//! `lab`: run experiments, diagnostics, and the acceptance suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use uclab::diagnostics::{run_diagnostic, Condition, DiagnosticSpec, SetFamily, CAVEAT};
use uclab::exec::Exec;
use uclab::harness::{parse_config, run_experiment, write_trace};
use uclab::learners::RuleKind;
use uclab::online::OnlineRuleKind;
use uclab::processes::ProcessSpec;
use uclab::spaces::{LossKind, LossSpace, ValueSpace};
use uclab::suite::run_suite;
use uclab::LabError;

#[derive(Parser)]
#[command(name = "lab", version, about = "Universal-consistency simulation laboratory")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write trace.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-horizon diagnostic curves for one process.
    Diag {
        /// c1, c2, c3 or crf.
        #[arg(long)]
        condition: String,
        /// A process name (default parameters) or a JSON process object.
        #[arg(long)]
        process: String,
        /// singletons, tails:K, dyadic-heads:K, or sets separated by ';'.
        #[arg(long)]
        sets: String,
        /// Comma-separated sample lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<usize>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample length, when longer than the last checkpoint.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run the acceptance criteria.
    Suite {
        /// Only this criterion id.
        #[arg(long)]
        filter: Option<u32>,
    },
    /// List processes, rules, or losses.
    List { what: Listing },
}

#[derive(Clone, Copy, ValueEnum)]
enum Listing {
    Processes,
    Rules,
    Losses,
}

enum Failure {
    Error(LabError),
    Criteria,
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match dispatch(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("lab: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command, exec: Exec) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => run(&config, out, exec)?,
        Command::Diag {
            condition,
            process,
            sets,
            checkpoints,
            seeds,
            out,
            horizon,
        } => {
            let spec = DiagnosticSpec {
                condition: condition.parse::<Condition>()?,
                process: parse_process(&process)?,
                sets: sets.parse::<SetFamily>()?,
                checkpoints,
                seeds,
                horizon,
            };
            diag(&spec, out.as_deref(), exec)?
        }
        Command::Suite { filter } => {
            let report = run_suite(filter, exec)?;
            for c in &report.criteria {
                println!("{c}");
            }
            if !report.all_passed() {
                return Err(Failure::Criteria);
            }
        }
        Command::List { what } => list(what),
    }
    Ok(())
}

fn run(config: &Path, out: Option<PathBuf>, exec: Exec) -> Result<(), LabError> {
    let text = std::fs::read_to_string(config).map_err(|e| LabError::io(config.display(), e))?;
    let cfg = parse_config(&text)?;
    for w in cfg.warnings() {
        eprintln!("lab: warning: {w}");
    }
    let dir = out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let trace = run_experiment(&cfg, exec)?;
    write_trace(&trace, &cfg, &dir)?;
    println!(
        "{} rows, digest {}, written to {}",
        trace.records.len(),
        trace.config_digest,
        dir.display()
    );
    Ok(())
}

fn parse_process(arg: &str) -> Result<ProcessSpec, LabError> {
    let spec = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| LabError::config("process", e.to_string()))?
    } else {
        ProcessSpec::catalog()
            .into_iter()
            .find(|p| p.name() == arg)
            .ok_or_else(|| LabError::usage(format!("unknown process {arg:?}; see `lab list processes`")))?
    };
    spec.validate()?;
    Ok(spec)
}

fn diag(spec: &DiagnosticSpec, out: Option<&Path>, exec: Exec) -> Result<(), LabError> {
    let report = run_diagnostic(spec, exec)?;
    println!("# {CAVEAT}");
    println!("condition,process,checkpoint,set,mean");
    for m in &report.means {
        let set = m.set.map(|s| s.to_string()).unwrap_or_default();
        println!("{},{},{},{},{}", report.condition, report.process, m.checkpoint, set, m.mean);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir.display(), e))?;
        let path = dir.join("diag.json");
        let text = serde_json::to_string_pretty(&report).expect("reports serialize");
        std::fs::write(&path, text + "\n").map_err(|e| LabError::io(path.display(), e))?;
    }
    Ok(())
}

fn list(what: Listing) {
    match what {
        Listing::Processes => {
            for p in ProcessSpec::catalog() {
                let defaults = serde_json::to_string(&p).expect("specs serialize");
                println!("{:<16} {:<5} {defaults}", p.name(), p.space().to_string());
            }
        }
        Listing::Rules => {
            for r in RuleKind::ALL {
                println!("{:<18} {}", r.name(), r.describe());
            }
            for r in OnlineRuleKind::ALL {
                println!("{:<18} {}", format!("online:{}", r.name()), r.describe());
            }
        }
        Listing::Losses => {
            let values = [
                ValueSpace::Binary,
                ValueSpace::Labels { k: 3 },
                ValueSpace::Natural,
                ValueSpace::UnitReal,
            ];
            for v in values {
                for l in [LossKind::ZeroOne, LossKind::Absolute, LossKind::Squared] {
                    let s = LossSpace::new(v, l);
                    println!("{:<28} sup {}", s.to_string(), s.sup_loss());
                }
            }
        }
    }
}
