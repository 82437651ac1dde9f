use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tickalloc::commands::{self, Overrides};
use tickalloc::CliError;
use tickalloc_core::backtest::StrategyKind;

#[derive(Parser)]
#[command(
    name = "tickalloc",
    version,
    about = "Optimal tick-level liquidity provisioning: solve, estimate, and backtest over file-based market data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run-configuration JSON; flags below override same-named fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Recorded in outputs for reproducibility.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Total capital in stable units.
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Annualized volatility of the price model.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Hold horizon in days.
    #[arg(long, global = true)]
    horizon_days: Option<f64>,
    /// Training window in days.
    #[arg(long, global = true)]
    train_days: Option<f64>,
    /// Rolling stride in days.
    #[arg(long, global = true)]
    stride_days: Option<f64>,
    /// Half-width of the uniform range strategy as a fraction of price.
    #[arg(long, global = true)]
    range_pct: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            d: self.d,
            sigma: self.sigma,
            horizon_days: self.horizon_days,
            train_days: self.train_days,
            stride_days: self.stride_days,
            range_pct: self.range_pct,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-revenue allocation from a market-conditions file.
    Waterfill {
        /// Market-conditions JSON.
        #[arg(long)]
        conditions: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full estimate-then-solve pipeline from a snapshot and swap history.
    Optimize {
        /// Liquidity-snapshot CSV.
        #[arg(long)]
        snapshot: PathBuf,
        /// Swap-event CSV (training history).
        #[arg(long)]
        swaps: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Allocations across ascending capital levels, long-format CSV.
    Sweep {
        /// Market-conditions JSON.
        #[arg(long)]
        conditions: PathBuf,
        /// Comma-separated ascending capital levels.
        #[arg(long, value_delimiter = ',', required = true)]
        d_list: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Rolling train/test strategy comparison.
    Backtest {
        /// Liquidity-snapshot CSV.
        #[arg(long)]
        snapshot: PathBuf,
        /// Swap-event CSV spanning the full backtest range.
        #[arg(long)]
        swaps: PathBuf,
        /// Strategy subset (tick_by_tick, range, delta_neutral).
        #[arg(long, value_delimiter = ',', default_values = ["tick_by_tick", "range", "delta_neutral"])]
        strategies: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimators only: emits the per-tick fee forecast and expected returns.
    Estimate {
        /// Liquidity-snapshot CSV.
        #[arg(long)]
        snapshot: PathBuf,
        /// Swap-event CSV (training history).
        #[arg(long)]
        swaps: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategyKind>, CliError> {
    names
        .iter()
        .map(|name| match name.as_str() {
            "tick_by_tick" => Ok(StrategyKind::TickByTick),
            "range" => Ok(StrategyKind::UniformRange),
            "delta_neutral" => Ok(StrategyKind::DeltaNeutral),
            other => Err(CliError::usage(format!(
                "unknown strategy \"{other}\" (expected tick_by_tick, range, or delta_neutral)"
            ))),
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Waterfill { conditions, common } => {
            let overrides = common.overrides();
            let config = commands::resolve_config(common.config.as_deref(), &overrides)?;
            commands::cmd_waterfill(&conditions, &common.out, &config, &overrides)?;
        }
        Command::Optimize {
            snapshot,
            swaps,
            common,
        } => {
            let overrides = common.overrides();
            let config = commands::resolve_config(common.config.as_deref(), &overrides)?;
            commands::cmd_optimize(&snapshot, &swaps, &common.out, &config)?;
        }
        Command::Sweep {
            conditions,
            d_list,
            common,
        } => {
            let overrides = common.overrides();
            let config = commands::resolve_config(common.config.as_deref(), &overrides)?;
            commands::cmd_sweep(&conditions, &d_list, &common.out, &config, &overrides)?;
        }
        Command::Backtest {
            snapshot,
            swaps,
            strategies,
            common,
        } => {
            let overrides = common.overrides();
            let config = commands::resolve_config(common.config.as_deref(), &overrides)?;
            let strategies = parse_strategies(&strategies)?;
            commands::cmd_backtest(&snapshot, &swaps, &common.out, &config, &strategies)?;
        }
        Command::Estimate {
            snapshot,
            swaps,
            common,
        } => {
            let overrides = common.overrides();
            let config = commands::resolve_config(common.config.as_deref(), &overrides)?;
            commands::cmd_estimate(&snapshot, &swaps, &common.out, &config)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            // Machine-readable error line on stderr.
            eprintln!(
                "{}",
                serde_json::json!({
                    "kind": error.kind(),
                    "message": error.to_string(),
                    "exit_code": error.exit_code(),
                })
            );
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
