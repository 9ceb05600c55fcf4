//! Command-line harness for the beamforming Monte Carlo experiments.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rrbeam::harness::{
    complexity_counts, grid_search, run_scenario, sweep_rank, write_csv, write_sweep_csv,
    AvgDomain, HarnessError, ParamGrid, RunOptions, COMPLEXITY_ALGORITHMS,
};
use rrbeam::scenarios;

#[derive(Parser)]
#[command(name = "rrbeam", about = "Robust reduced-rank LCMV beamforming harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override
    #[arg(long)]
    trials: Option<usize>,
    /// Worker thread count (defaults to all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Output path (defaults to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Domain in which per-trial SINR curves are averaged
    #[arg(long, value_parser = parse_avg_domain, default_value = "db")]
    avg_domain: AvgDomain,
    /// Write a JSON run manifest next to the CSV output
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit the per-snapshot mean SINR CSV
    Run {
        /// Built-in scenario name or JSON file path
        scenario: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Re-run a scenario's RJIO algorithms across a list of ranks
    SweepRank {
        scenario: String,
        /// Ranks, e.g. "1..8" or "1,2,4,8"
        #[arg(long, default_value = "1..8")]
        ranks: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exhaustive hyperparameter search over a candidate grid file
    GridSearch {
        scenario: String,
        /// JSON grid file: {"candidates": [[algorithm spec, ...], ...]}
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Print the arithmetic complexity table entries at (M, D)
    Complexity {
        #[arg(long = "M", alias = "m")]
        m: usize,
        #[arg(long = "D", alias = "d")]
        d: usize,
    },
    /// List bundled scenarios
    ListScenarios,
}

fn parse_avg_domain(s: &str) -> Result<AvgDomain, String> {
    match s {
        "db" => Ok(AvgDomain::Db),
        "linear" => Ok(AvgDomain::Linear),
        other => Err(format!("unknown averaging domain '{other}' (db|linear)")),
    }
}

fn parse_ranks(text: &str) -> Result<Vec<usize>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad rank '{lo}'"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad rank '{hi}'"))?;
        if lo == 0 || hi < lo {
            return Err(format!("bad rank range '{text}'"));
        }
        Ok((lo..=hi).collect())
    } else {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad rank '{t}'"))
            })
            .collect()
    }
}

fn run_options(common: &CommonOpts) -> RunOptions {
    RunOptions {
        seed_override: common.seed,
        trials_override: common.trials,
        trial_offset: 0,
        workers: common.workers,
        avg_domain: common.avg_domain,
    }
}

fn open_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn exit_code_for(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::DivergenceThreshold { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { scenario, common } => {
            let s = scenarios::load(&scenario)?;
            let out = run_scenario(&s, &run_options(&common))?;
            let mut writer = open_out(&common.out)?;
            write_csv(&mut writer, &out.traces)?;
            if let Some(path) = &common.manifest {
                std::fs::write(path, serde_json::to_string_pretty(&out.manifest).unwrap())?;
            }
            out.check_divergence_threshold()
        }
        Command::SweepRank {
            scenario,
            ranks,
            common,
        } => {
            let s = scenarios::load(&scenario)?;
            let ranks = parse_ranks(&ranks).map_err(HarnessError::Config)?;
            let rows = sweep_rank(&s, &ranks, &run_options(&common))?;
            let mut writer = open_out(&common.out)?;
            write_sweep_csv(&mut writer, &rows)?;
            Ok(())
        }
        Command::GridSearch {
            scenario,
            grid,
            common,
        } => {
            let s = scenarios::load(&scenario)?;
            let text = std::fs::read_to_string(&grid)
                .map_err(|e| HarnessError::Config(format!("cannot read grid file: {e}")))?;
            let grid: ParamGrid =
                serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
            let best = grid_search(&s, &grid, &run_options(&common))?;
            let mut writer = open_out(&common.out)?;
            writeln!(
                writer,
                "{}",
                serde_json::to_string_pretty(&best).expect("specs serialize")
            )?;
            Ok(())
        }
        Command::Complexity { m, d } => {
            println!("algorithm,M,D,additions,multiplications");
            for alg in COMPLEXITY_ALGORITHMS {
                let (add, mult) = complexity_counts(alg, m, d)?;
                println!("{alg},{m},{d},{add},{mult}");
            }
            Ok(())
        }
        Command::ListScenarios => {
            for name in scenarios::BUILTIN_NAMES {
                let s = scenarios::load(name)?;
                println!(
                    "{name}: M={}, N={}, trials={}, algorithms={}",
                    s.geometry.num_sensors,
                    s.num_snapshots,
                    s.num_trials,
                    s.algorithms.len()
                );
            }
            Ok(())
        }
    }
}
