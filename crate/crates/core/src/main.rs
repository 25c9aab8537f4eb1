use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kappa_elim::experiment::{run_experiment, RunConfig};
use kappa_elim::report::{emit_plots, load_results, PlotKind};
use kappa_elim::search::compare_n_best;
use kappa_elim::stat_tests::TestKind;
use kappa_elim::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "kappa-elim", version, about = "Backward feature elimination on two models with prediction agreement tracking")]
struct Cli {
    /// Worker threads for candidate fits (defaults to all cores).
    #[arg(long, global = true, env = "KAPPA_ELIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Test consecutive pairs among each model's n best iterations.
    CompareNBest {
        results: PathBuf,
        #[arg(long)]
        n: usize,
        /// mcnemar_binomial, mcnemar_chisquare or t_test
        #[arg(long)]
        test: TestKind,
    },
    /// Write an SVG plot and its data CSV.
    Plot {
        results: PathBuf,
        /// agreeability_curves or dual_axis
        #[arg(long)]
        kind: PlotKind,
        /// Defaults to the directory holding the results file.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Error kinds that come from bad user input rather than a failed run.
fn is_user_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidParameter(_) | Error::TaskMismatch(..))
}

fn report(e: &Error) -> ExitCode {
    let (kind, code) = if is_user_error(e) {
        ("config", EXIT_CONFIG)
    } else {
        ("runtime", EXIT_RUNTIME)
    };
    let details: Vec<String> = match e {
        Error::Config(items) => items.clone(),
        _ => {
            let mut chain = Vec::new();
            let mut source = std::error::Error::source(e);
            while let Some(s) = source {
                chain.push(s.to_string());
                source = s.source();
            }
            chain
        }
    };
    let body = serde_json::json!({
        "error": { "kind": kind, "message": e.to_string(), "details": details }
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

/// Prints a line to stdout; a closed pipe is not an error.
fn say(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, out_dir, seed } => {
            let mut cfg = RunConfig::from_file(&config).map_err(|e| match e {
                Error::Io { .. } => Error::Config(vec![e.to_string()]),
                other => other,
            })?;
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let criterion = cfg.criterion;
            let out = run_experiment(&cfg, |it| say(it.summary_line(criterion)))?;
            say(format_args!("wrote {}", out.results_json.display()));
            say(format_args!("wrote {}", out.results_csv.display()));
            say(format_args!("wrote {}", out.manifest.display()));
        }
        Command::CompareNBest { results, n, test } => {
            let run = load_results(&results)?;
            let res = compare_n_best(&run, n, test)?;
            say(serde_json::to_string_pretty(&res)?);
        }
        Command::Plot { results, kind, out_dir } => {
            let run = load_results(&results)?;
            let dir = out_dir.unwrap_or_else(|| results.parent().map(PathBuf::from).unwrap_or_default());
            let files = emit_plots(&run, kind, dir)?;
            say(format_args!("wrote {}", files.svg.display()));
            say(format_args!("wrote {}", files.data.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(&Error::Config(vec!["--threads must be positive".into()]));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&Error::Config(vec![format!("--threads: {e}")]));
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
