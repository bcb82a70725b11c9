use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dpaudit_cli::{self as cli, Format};

#[derive(Parser)]
#[command(name = "dpaudit", version, about = "Check and run differentially private analysis plans")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text, global = true)]
    format: FormatArg,

    /// Colour in text output: always, never or auto.
    #[arg(long, env = "DPAUDIT_COLOR", default_value = "auto", global = true)]
    color: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a plan and print the report.
    Check {
        plan: PathBuf,
        /// Exit 1 when there are warnings but no violations.
        #[arg(long)]
        strict_warnings: bool,
        /// Signal-to-sensitivity ratio below which M4 warns.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Verify, then execute a plan over a CSV dataset.
    Run {
        plan: PathBuf,
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip noise: release exact values (for testing only).
        #[arg(long)]
        no_noise: bool,
        /// Run even when verification finds violations.
        #[arg(long)]
        allow_invalid: bool,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        /// Write every node's value to this file as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare a node's brute-force sensitivity on a small dataset with its bound.
    Oracle {
        plan: PathBuf,
        data: PathBuf,
        /// Aggregate or noise node id.
        node: String,
        #[arg(long, default_value_t = 16)]
        max_units: usize,
        /// Largest number of rows given to a synthetic added unit.
        #[arg(long, default_value_t = 6)]
        max_added_rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate neighbours on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Describe an error class (M1-M5) with a wrong/fixed example.
    Explain { code: String },
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let format = match args.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    let color = format == Format::Text && cli::color_enabled(&args.color);
    let out = match args.command {
        Command::Check { plan, strict_warnings, threshold } => {
            cli::check(&cli::CheckArgs { plan, format, strict_warnings, threshold, color })
        }
        Command::Run { plan, data, seed, no_noise, allow_invalid, threshold, trace } => {
            cli::run(&cli::RunArgs { plan, data, seed, no_noise, allow_invalid, threshold, format, trace, color })
        }
        Command::Oracle { plan, data, node, max_units, max_added_rows, seed, sequential } => cli::oracle(&cli::OracleArgs {
            plan,
            data,
            node,
            format,
            config: cli::oracle_config(max_units, max_added_rows, seed, sequential),
        }),
        Command::Explain { code } => cli::explain_code(&code, format),
    };
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.code as u8)
}
