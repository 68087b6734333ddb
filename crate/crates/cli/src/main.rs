use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikecert_cli::figures::{reproduce, Figure};
use spikecert_cli::{cmd_certify, cmd_criteria, cmd_experiment, cmd_solve, load_config, Outcome, Overrides};

#[derive(Parser)]
#[command(name = "spikecert", version, about = "Dual certificates and determinant criteria for positive spike recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Uniform scan grid size.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dot-path override, e.g. `policy.margin_tol=1e-6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the precertificate of a spike configuration.
    Certify(Common),
    /// Evaluate the bordered determinant criterion.
    Criteria(Common),
    /// Solve the positive BLASSO.
    Solve(Common),
    /// Run the support-stability noise ladder.
    Experiment(Common),
    /// Write the CSV bundle for one figure.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let with_config = |c: &Common| {
        let ov = Overrides {
            grid: c.grid,
            seed: c.seed,
            set: c.set.clone(),
        };
        load_config(&c.config, &ov)
    };
    match &cli.command {
        Command::Certify(c) => cmd_certify(&with_config(c)?, c.out.as_deref()),
        Command::Criteria(c) => cmd_criteria(&with_config(c)?, c.out.as_deref()),
        Command::Solve(c) => cmd_solve(&with_config(c)?, c.out.as_deref()),
        Command::Experiment(c) => cmd_experiment(&with_config(c)?, c.out.as_deref()),
        Command::Reproduce { figure, out, grid } => {
            let mut policy = spikecert::certificates::ScanPolicy::default();
            if let Some(g) = grid {
                policy.grid_points = *g;
            }
            policy.validate()?;
            reproduce(*figure, &policy, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the generic failure code; 2 is reserved for negative verdicts.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.summary).expect("serializable summary");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
