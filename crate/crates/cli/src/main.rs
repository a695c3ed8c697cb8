//! Command-line front end for the freeway simulator: run scenarios,
//! compare ramp-metering controllers, sweep parameters, validate files.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rampsim::control::ControllerKind;
use rampsim::runner::{
    compare_scenarios, load_scenario, resolve_output_dir, run_scenario, sweep_scenario,
};
use rampsim::Scenario;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "rampsim",
    version,
    about = "Macroscopic freeway simulation with ramp metering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write log, metrics and plots.
    Run {
        /// Scenario file path, or the name of a bundled scenario.
        scenario: String,
        /// Override the controller kind (none|alinea|ip|pi).
        #[arg(long)]
        controller: Option<String>,
        /// Artifact directory (defaults to the scenario's choice).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the measurement-noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario once per controller kind and compare the runs.
    Compare {
        scenario: String,
        /// Comma-separated kinds; the first is the baseline.
        #[arg(long, required = true)]
        controllers: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenario for each value of one parameter.
    Sweep {
        scenario: String,
        /// Dotted path into the scenario, e.g. controller.alpha.
        #[arg(long, required = true)]
        param: String,
        /// Comma-separated numeric values.
        #[arg(long, required = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        scenario: String,
        /// Print the effective configuration (defaults filled in).
        #[arg(long)]
        show_effective: bool,
    },
}

fn parse_kinds(arg: &str) -> Result<Vec<ControllerKind>> {
    arg.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| ControllerKind::from_str(s).map_err(anyhow::Error::msg))
        .collect()
}

fn summarize(scenario: &Scenario) -> String {
    format!(
        "{} ({} segments, {} ramps, horizon {} s, controller {})",
        scenario.name,
        scenario.segments.len(),
        scenario.ramps.len(),
        scenario.horizon_s,
        scenario.controller.kind
    )
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            controller,
            out,
            seed,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(kind) = controller {
                s.controller.kind = ControllerKind::from_str(&kind).map_err(anyhow::Error::msg)?;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let dir = resolve_output_dir(out.as_deref(), &s);
            let artifacts = run_scenario(&s, &dir)
                .with_context(|| format!("running {}", s.name))?;
            print!("{}", artifacts.report.render_text());
            println!(
                "wrote {} files to {}",
                artifacts.files.len(),
                artifacts.dir.display()
            );
        }
        Command::Compare {
            scenario,
            controllers,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let kinds = parse_kinds(&controllers)?;
            if kinds.is_empty() {
                bail!("--controllers needs at least one kind");
            }
            let dir = out.unwrap_or_else(|| resolve_output_dir(None, &s).join("compare"));
            let artifacts = compare_scenarios(&s, &kinds, &dir)
                .with_context(|| format!("comparing controllers on {}", s.name))?;
            print!("{}", artifacts.comparison.render_text());
            println!("artifacts in {}", artifacts.dir.display());
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad sweep value \"{v}\""))
                })
                .collect::<Result<_>>()?;
            let dir = out.unwrap_or_else(|| resolve_output_dir(None, &s).join("sweep"));
            let artifacts = sweep_scenario(&s, &param, &values, &dir)
                .with_context(|| format!("sweeping {param} on {}", s.name))?;
            println!(
                "{} runs, summary in {}",
                artifacts.runs.len(),
                artifacts.dir.join("sweep.csv").display()
            );
        }
        Command::Validate {
            scenario,
            show_effective,
        } => {
            let s = load_scenario(&scenario)?;
            if show_effective {
                print!("{}", s.to_json_pretty());
            } else {
                println!("ok: {}", summarize(&s));
            }
        }
    }
    Ok(())
}
