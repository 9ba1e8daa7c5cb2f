//! `symlens`: check, synthesize, apply, and measure simple symmetric
//! string lenses defined over regular-language formats.

mod app;

use app::{CliError, SynthFlags};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use symlens::syntax::LensOp;

#[derive(Parser)]
#[command(name = "symlens", version, about = "Simple symmetric string lenses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck a definition file and run its test statements.
    Check {
        file: PathBuf,
    },
    /// Resolve synth directives and print the file with lenses inlined.
    Synth {
        file: PathBuf,
        /// Per-directive wall-clock budget in seconds.
        #[arg(long)]
        timeout: Option<u64>,
        /// Per-directive cap on searched expression pairs.
        #[arg(long)]
        max_expansions: Option<usize>,
        /// Random seed recorded with the search.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the resolved file here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Trace the search frontier per pop.
        #[arg(long)]
        verbose: bool,
    },
    /// Run one lens operation on whole-file strings.
    Apply {
        file: PathBuf,
        #[arg(long)]
        lens: String,
        /// One of createR, createL, putR, putL.
        #[arg(long)]
        op: String,
        /// File holding the edited side.
        #[arg(long)]
        input: PathBuf,
        /// File holding the other side's current contents (puts only).
        #[arg(long)]
        old: Option<PathBuf>,
    },
    /// Print the entropy of a named expression in bits.
    Entropy {
        file: PathBuf,
        #[arg(long)]
        regex: String,
        /// Cross-check with the mean surprisal of this many samples.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Check { file } => {
            let report = app::run_check(&read(&file)?)?;
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            if report.failures.is_empty() {
                eprintln!("ok: {} tests", report.tests_run);
                Ok(())
            } else {
                Err(CliError::User(format!(
                    "{} of {} tests failed",
                    report.failures.len(),
                    report.tests_run
                )))
            }
        }
        Command::Synth {
            file,
            timeout,
            max_expansions,
            seed,
            output,
            verbose,
        } => {
            let flags = SynthFlags {
                timeout_secs: timeout,
                max_expansions,
                seed,
                verbose,
            };
            let report = app::run_synth(&read(&file)?, &flags)?;
            for (name, cost, distance) in &report.synthesized {
                eprintln!("synthesized {name}: cost {cost:.6}, distance {distance}");
            }
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            match output {
                Some(path) => std::fs::write(&path, &report.output)
                    .map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{}", report.output),
            }
            if report.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::NoLens(format!(
                    "{} directives failed",
                    report.failures.len()
                )))
            }
        }
        Command::Apply {
            file,
            lens,
            op,
            input,
            old,
        } => {
            let op = LensOp::from_name(&op)
                .ok_or_else(|| CliError::User(format!("unknown operation `{op}`")))?;
            let input_text = read(&input)?;
            let old_text = old.map(|p| read(&p)).transpose()?;
            let out = app::run_apply(
                &read(&file)?,
                &lens,
                op,
                &input_text,
                old_text.as_deref(),
                &SynthFlags::default(),
            )?;
            print!("{out}");
            Ok(())
        }
        Command::Entropy {
            file,
            regex,
            sample,
            seed,
        } => {
            let report = app::run_entropy(&read(&file)?, &regex, sample, seed)?;
            println!("{:.6}", report.bits);
            if let Some(s) = report.sampled {
                println!("sampled: {s:.6}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
