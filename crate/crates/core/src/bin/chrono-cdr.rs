use std::path::PathBuf;
use std::process::ExitCode;

use chrono_cdr::config::RunConfig;
use chrono_cdr::pipeline::{self, Subcommand};
use chrono_cdr::Error;
use clap::Parser;

/// Circadian indicators from Call Detail Records.
#[derive(Debug, Parser)]
#[command(name = "chrono-cdr", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,

    /// Run configuration (flat dotted keys).
    #[arg(long)]
    config: PathBuf,

    /// Worker threads; results are identical for any value.
    #[arg(long)]
    threads: Option<usize>,

    /// Print errors as a JSON object on stderr.
    #[arg(long)]
    json_errors: bool,
}

fn report(err: &Error, cmd: Subcommand, json: bool) {
    if json {
        let mut obj = serde_json::json!({
            "error": err.kind(),
            "message": err.to_string(),
            "subcommand": cmd.as_str(),
            "exit_code": err.exit_code(),
        });
        if let Error::MissingArtifact { path, producer } = err {
            obj["path"] = path.display().to_string().into();
            obj["producer"] = producer.clone().into();
        }
        eprintln!("{obj}");
    } else {
        eprintln!("chrono-cdr {}: {err}", cmd.as_str());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|cfg| pipeline::run(cli.subcommand, &cfg, cli.threads));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, cli.subcommand, cli.json_errors);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
