use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};

use collab_ref::planner::DEFAULT_MAX_DEPTH;
use collab_ref::scenario::load_scenario;
use collab_ref::sim::{run_dialogue, RunOptions, Transcript};
use collab_ref::term::IdGen;

#[derive(Parser)]
#[command(
    name = "collab-ref",
    about = "Replay referring dialogues against a collaborating agent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its transcript.
    Run {
        scenario: PathBuf,
        /// Include evaluation traces and the final plans.
        #[arg(long)]
        trace: bool,
        /// Deepest embedded referring expression construction may build.
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        /// Write the transcript here instead of stdout.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run every `.scenario` file in a directory; fail if any expectation fails.
    Check { dir: PathBuf },
}

fn run_file(path: &Path, opts: RunOptions) -> Transcript {
    let ids = IdGen::new();
    match load_scenario(path, &ids) {
        Ok(sc) => run_dialogue(&sc, ids, opts),
        Err(e) => Transcript {
            name: path.display().to_string(),
            fault: Some(e),
            ..Transcript::default()
        },
    }
}

fn check(dir: &Path) -> Result<bool, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("no .scenario files in {}", dir.display()));
    }
    let results: Vec<Transcript> = thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| s.spawn(move || run_file(f, RunOptions::default())))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread"))
            .collect()
    });
    let mut all_ok = true;
    for (file, t) in files.iter().zip(&results) {
        if t.ok() {
            println!("ok   {}", file.display());
        } else {
            all_ok = false;
            println!("FAIL {}", file.display());
            for m in &t.mismatches {
                println!("     {m}");
            }
            if let Some(f) = &t.fault {
                println!("     {f}");
            }
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            trace,
            max_depth,
            transcript,
        } => {
            let t = run_file(&scenario, RunOptions { trace, max_depth });
            let text = t.render();
            match transcript {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &text) {
                        eprintln!("{}: {e}", path.display());
                        return ExitCode::FAILURE;
                    }
                }
                None => print!("{text}"),
            }
            if t.ok() {
                ExitCode::SUCCESS
            } else {
                for m in &t.mismatches {
                    eprintln!("mismatch {m}");
                }
                if let Some(f) = &t.fault {
                    eprintln!("error: {f}");
                }
                ExitCode::FAILURE
            }
        }
        Command::Check { dir } => match check(&dir) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
