use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcs_cli::bench::{format_paired, format_summary, run_bench};
use dcs_cli::configfile::load_config;
use dcs_cli::presets::{preset, PRESET_NAMES};
use dcs_cli::run::{execute, output_root};
use dcs_cli::{dump, plot, CliError, Result};
use dcs_core::activeloop::analyze_proxy_failure;

#[derive(Parser)]
#[command(name = "dcs", version, about = "Conservative-search active learning for biological sequence design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root (default: $DCS_OUT_DIR, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark preset over several seeds.
    Bench {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        preset: String,
        /// Number of seeds.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for independent cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the number of rounds of every method.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots from one or more rounds.csv files.
    Plot {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Write every sequence and its oracle score as CSV.
    OracleDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified proxy rank correlation by distance from the initial data.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        distances: Vec<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = execute(&cfg, &output_root(out.as_deref()))?;
            if let Some(last) = summary.logs.last() {
                println!(
                    "round {}: top-k max {:.4} mean {:.4} diversity {:.3} novelty {:.3}",
                    last.round, last.topk.max, last.topk.mean, last.topk.diversity, last.topk.novelty
                );
            }
            println!("{}", summary.dir.display());
        }
        Command::Bench { preset: name, seeds, seed, jobs, rounds, out } => {
            let mut p = preset(&name)?;
            if let Some(r) = rounds {
                p = p.map_configs(|c| c.rounds = r);
            }
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let result = run_bench(&p, &seeds, jobs, &output_root(out.as_deref()))?;
            print!("{}", format_summary(&result.summary));
            if let Some((a, b, rows)) = &result.paired {
                println!();
                print!("{}", format_paired(a, b, rows));
            }
            println!("{}", result.dir.display());
        }
        Command::Plot { reports, out } => {
            for f in plot::plot_reports(&reports, &out)? {
                println!("{}", f.display());
            }
        }
        Command::OracleDump { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut buf = Vec::new();
            let rows = dump::dump_oracle(&cfg, &mut buf)?;
            std::fs::write(&out, buf)?;
            println!("{rows} sequences written to {}", out.display());
        }
        Command::Analyze { config, seed, distances } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            println!("stratum,size,spearman");
            for s in analyze_proxy_failure::<f64>(&cfg, &distances)? {
                println!("{},{},{:.4}", s.label(), s.size, s.spearman);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(inner) = &e {
                log::debug!("{inner:?}");
            }
            ExitCode::FAILURE
        }
    }
}
