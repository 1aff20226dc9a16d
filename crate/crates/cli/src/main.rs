mod args;
mod output;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, RunConfig};
use run::Failure;

const EXIT_NEGATIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }

    if let Some(path) = &cli.verify {
        return match output::verify(path) {
            Ok(v) if v.problems.is_empty() => {
                eprintln!("verified: {}", v.checked.join(", "));
                ExitCode::SUCCESS
            }
            Ok(v) => {
                for p in &v.problems {
                    eprintln!("mismatch: {p}");
                }
                ExitCode::from(EXIT_NEGATIVE)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_USAGE)
            }
        };
    }

    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given");
        return ExitCode::from(EXIT_USAGE);
    };
    let cfg = RunConfig { seed: cli.seed, command };
    let out = match run::execute(&cfg) {
        Ok(o) => o,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(Failure::Negative(e)) => {
            eprintln!("{}: {e:#}", cfg.command.name());
            return ExitCode::from(EXIT_NEGATIVE);
        }
    };
    eprintln!("{}: {}", cfg.command.name(), out.summary);
    let ok = out.ok;
    let (doc, blobs) = output::assemble(&cfg, out, cli.out.as_deref());
    match &cli.out {
        Some(prefix) => match output::write_all(prefix, &doc, &blobs) {
            Ok(json_path) => eprintln!("wrote {}", json_path.display()),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => println!("{}", serde_json::to_string_pretty(&doc).expect("serializable document")),
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    }
}
