use std::io::{self, IsTerminal};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pmx_core::program::{describe_error, dump_ir, repl, run_program, Options};
use pmx_core::DEFAULT_FUEL;

#[derive(Parser)]
#[command(name = "pmx", version, about = "Extensible pattern matching for S-expression programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program, printing the value of each toplevel expression.
    Run {
        file: PathBuf,
        /// Print a trace of every match execution.
        #[arg(long)]
        trace: bool,
        /// Print the automaton of every match before running it.
        #[arg(long)]
        dump_ir: bool,
        /// Bound on nested expander rewrites.
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Print the compiled automata of a program without running it.
    Ir {
        file: PathBuf,
        /// Only the K-th match form (0-based, in source order).
        #[arg(long = "match", value_name = "K")]
        index: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Interactive session, one form per line.
    Repl {
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        #[arg(long)]
        trace: bool,
    },
}

fn read(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {}", path.display(), e);
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { file, trace, dump_ir, fuel } => {
            let text = match read(&file) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let report = run_program(&text, Options { dump_ir, trace, fuel });
            for line in &report.outputs {
                println!("{}", line);
            }
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {}: got {}, expected {}", c.source, c.actual, c.expected);
            }
            if let Some(e) = &report.error {
                eprintln!("{}", describe_error(e));
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Command::Ir { file, index, fuel } => {
            let text = match read(&file) {
                Ok(t) => t,
                Err(code) => return code,
            };
            match dump_ir(&text, index, fuel) {
                Ok(dump) if dump.is_empty() && index.is_some() => {
                    eprintln!("error: no match form with index {}", index.unwrap_or(0));
                    ExitCode::from(2)
                }
                Ok(dump) => {
                    print!("{}", dump);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}", describe_error(&e));
                    ExitCode::from(2)
                }
            }
        }
        Command::Repl { fuel, trace } => {
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            let options = Options { fuel, trace, ..Options::default() };
            match repl(stdin.lock(), &mut io::stdout(), &mut io::stderr(), options, prompt) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {}", e);
                    ExitCode::from(1)
                }
            }
        }
    }
}
