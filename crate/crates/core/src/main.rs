use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use d2dsim::geometry::ScenarioKind;
use d2dsim::modeselect::MsPolicy;
use d2dsim::powerctl::PcScheme;
use d2dsim::sim::{self, Overrides, SimConfig};

#[derive(Parser)]
#[command(name = "d2dsim", version = d2dsim::VERSION, about = "Monte Carlo simulator for relay-assisted D2D communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write CDFs, scatter point and summary.
    Run(Common),
    /// Run utility maximization at several omegas plus the baselines.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated omega values.
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
        omegas: Vec<f64>,
    },
    /// Write the node positions and routes of one drop as CSV.
    Dump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        drop_index: usize,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; keys not given take the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long, value_enum)]
    mode_selection: Option<MsPolicy>,
    #[arg(long, value_enum)]
    power_control: Option<PcScheme>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScenarioArg {
    Proximity,
    RangeExtension,
}

impl Common {
    fn load(&self) -> Result<SimConfig, sim::ConfigError> {
        let overrides = Overrides {
            scenario: self.scenario.map(|s| match s {
                ScenarioArg::Proximity => ScenarioKind::Proximity,
                ScenarioArg::RangeExtension => ScenarioKind::RangeExtension,
            }),
            mode_selection: self.mode_selection,
            power_control: self.power_control,
            omega: self.omega,
            drops: self.drops,
            seed: self.seed,
            output_dir: self.out.clone(),
        };
        match &self.config {
            Some(path) => SimConfig::from_file(path, &overrides),
            None => SimConfig::from_json_str("{}", &overrides),
        }
    }
}

fn report_failures(r: &sim::RunReport) {
    if !r.failures.is_empty() {
        eprintln!(
            "{} / {}: {} of {} drops failed",
            r.config.power_control.as_str(),
            r.config.omega,
            r.failures.len(),
            r.config.drops
        );
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let workers = sim::workers_from_env()?;
    match cli.command {
        Command::Run(common) => {
            let config = common.load()?;
            let report = sim::simulate(&config, workers)?;
            report_failures(&report);
            sim::emit_outputs(&report, &config.output_dir)?;
            println!("wrote {}", config.output_dir.display());
        }
        Command::Sweep { common, omegas } => {
            let config = common.load()?;
            if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err("omega values must be positive".into());
            }
            let reports = sim::sweep(&config, &omegas, workers)?;
            reports.iter().for_each(report_failures);
            sim::emit_sweep(&config, &reports, &config.output_dir)?;
            println!("wrote {}", config.output_dir.display());
        }
        Command::Dump { common, drop_index } => {
            let config = common.load()?;
            let drop = sim::prepare_drop(&config, drop_index)?;
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("deployment.csv"), drop.deployment.layout.to_csv())?;
            std::fs::write(config.output_dir.join("routes.csv"), drop.routing.to_csv(&drop.plan.links))?;
            println!("wrote {}", config.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
