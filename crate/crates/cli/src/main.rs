//! `hostcap`: power-flow feasibility checks, scenario pools and
//! active-learning hosting-capacity runs from the command line.
//!
//! Exit status: 0 on success, 2 for invalid input or configuration, 3 when
//! the power flow diverges, 4 when no scenario is feasible.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hostcap::active::{QueryStrategy, StrategyKind};
use hostcap::commands;
use hostcap::experiment::{Experiment, ExperimentConfig, FilePool, PoolSpec};
use hostcap::grid::{Network, SolverOptions};
use hostcap::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hostcap", version, about = "Hosting-capacity analysis for radial feeders")]
struct Cli {
    /// Seed overriding the one in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scenario evaluation (default: all cores).
    #[arg(long, global = true, env = "HOSTCAP_WORKERS")]
    workers: Option<usize>,

    /// Feasibility threshold overriding the config (fraction of steps that must pass).
    #[arg(long, global = true)]
    eps_bar: Option<f64>,

    /// Output file (`solve`, `generate`) or directory (other commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one power-flow snapshot; prints CSV unless --out is given.
    Solve {
        #[arg(long)]
        network: PathBuf,
        /// CSV with header `bus,p_kw,q_kvar` (generation positive).
        #[arg(long)]
        injections: PathBuf,
    },
    /// Generate a scenario pool as JSON Lines.
    Generate {
        /// Pool configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Label every scenario in the pool.
    Eval {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Use this JSON Lines pool instead of the configured one.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Run one active-learning episode.
    Learn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pool: Option<PathBuf>,
        /// uniform, entropy or info_density (default: first configured).
        #[arg(long)]
        strategy: Option<StrategyKind>,
        /// Density exponent for info_density.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Compare query strategies on a shared pool and oracle.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Run every configured strategy for all episodes and write the report.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pool: Option<PathBuf>,
    },
}

fn load_experiment(cli: &Cli, config: &PathBuf, pool: Option<&PathBuf>) -> Result<Experiment> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(eps) = cli.eps_bar {
        cfg.eps_bar = eps;
    }
    if let Some(path) = pool {
        cfg.pool = PoolSpec::File(FilePool { path: path.clone() });
    }
    Experiment::from_config(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| Error::ConfigInvalid("--out is required for this command".into()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::ConfigInvalid("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
    }
    if let Some(eps) = cli.eps_bar {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::ConfigInvalid(format!("--eps-bar {eps} outside [0, 1]")));
        }
    }
    match &cli.command {
        Command::Solve { network, injections } => match &cli.out {
            Some(out) => {
                commands::cmd_solve(network, injections, out)?;
            }
            None => {
                let net = Network::load(network)?;
                let (p, q) = commands::read_injections(&net, injections)?;
                let sol = commands::solve_kw(&net, &p, &q, SolverOptions::default())?;
                commands::write_solution_csv(std::io::stdout().lock(), &net, &sol)?;
            }
        },
        Command::Generate { config, network, clusters } => {
            let out = out_dir(cli)?;
            let pool = commands::cmd_generate(config, network, clusters.as_deref(), cli.seed, &out)?;
            eprintln!("wrote {} scenarios to {}", pool.len(), out.display());
        }
        Command::Eval { config, pool } => {
            let exp = load_experiment(cli, config, pool.as_ref())?;
            let summary = commands::cmd_eval(&exp, &out_dir(cli)?)?;
            print_json(&serde_json::json!({
                "n_scenarios": summary.n_scenarios,
                "eps_bar": summary.eps_bar,
                "feasible_fraction": summary.feasible_fraction,
                "max_combined": summary.hc.as_ref().map(|h| h.max_combined),
                "max_total_kw": summary.hc.as_ref().map(|h| h.max_total_kw),
            }))?;
        }
        Command::Learn { config, pool, strategy, beta } => {
            let exp = load_experiment(cli, config, pool.as_ref())?;
            let strategy = strategy.map(|kind| QueryStrategy { kind, beta: *beta });
            let file = commands::cmd_learn(&exp, strategy, &out_dir(cli)?)?;
            print_json(&serde_json::json!({
                "labels_requested": file.history.labels_requested(),
                "max_ev_count": file.hc.max_ev_count,
                "max_pv_kw": file.hc.max_pv_kw,
                "max_combined": file.hc.max_combined,
                "max_total_kw": file.hc.max_total_kw,
            }))?;
        }
        Command::Compare { config, pool } | Command::Report { config, pool } => {
            let exp = load_experiment(cli, config, pool.as_ref())?;
            let out = out_dir(cli)?;
            let run = if matches!(cli.command, Command::Compare { .. }) {
                commands::cmd_compare(&exp, &out)?
            } else {
                commands::cmd_report(&exp, &out)?
            };
            for s in &run.report.strategies {
                eprintln!(
                    "{:<13} combined {:>10.3} ± {:<8.3} total_kw {:>10.3} ± {:.3}",
                    s.strategy.kind.as_str(),
                    s.hc_mean.combined,
                    s.hc_std.combined,
                    s.hc_mean.total_kw,
                    s.hc_std.total_kw
                );
            }
            for t in &run.timing {
                eprintln!("{:<13} {:.3} s/episode", t.strategy.as_str(), t.mean_seconds);
            }
            eprintln!("report written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
