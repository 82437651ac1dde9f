//! Implementations behind the five subcommands. Each takes parsed inputs and
//! writes its outputs under an output directory; the binary maps errors to
//! exit codes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tickalloc_core::backtest::{
    rolling_backtest, strategy_tick_by_tick, Snapshot, StrategyKind,
};
use tickalloc_core::maxreturn::capital_sweep;
use tickalloc_core::reserves::price_mass_gbm;
use tickalloc_core::volume::{
    consistency_check, fit_volume_shape, predict_fees_a, ConsistencyReport, SwapEvent,
};
use tickalloc_core::waterfill::solve_waterfill;
use tickalloc_core::{validate_conditions, MarketConditions};

use crate::error::CliError;
use crate::formats::{
    self, AllocationFile, AuditBundle, BacktestAudit, RunConfig, SCHEMA_VERSION,
};

/// Flag-level overrides applied on top of the config file; flags win.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub d: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon_days: Option<f64>,
    pub train_days: Option<f64>,
    pub stride_days: Option<f64>,
    pub range_pct: Option<f64>,
}

/// Loads the config file if given, then applies flag overrides.
pub fn resolve_config(
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<RunConfig, CliError> {
    let mut config = match config_path {
        Some(path) => formats::read_run_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(d) = overrides.d {
        config.d = d;
    }
    if let Some(sigma) = overrides.sigma {
        config.sigma_annual = sigma;
    }
    if let Some(horizon) = overrides.horizon_days {
        config.horizon_days = horizon;
    }
    if let Some(train) = overrides.train_days {
        config.train_days = train;
    }
    if let Some(stride) = overrides.stride_days {
        config.stride_days = stride;
    }
    if let Some(range_pct) = overrides.range_pct {
        config.range_pct = range_pct;
    }
    config.validate()?;
    Ok(config)
}

fn conditions_with_overrides(
    path: &Path,
    overrides: &Overrides,
    epsilon_b: f64,
) -> Result<MarketConditions, CliError> {
    let mut raw = formats::read_conditions(path)?;
    if let Some(d) = overrides.d {
        raw.d = d;
    }
    validate_conditions(&raw, epsilon_b).map_err(CliError::Core)
}

/// `waterfill`: maximum-revenue allocation from a market-conditions file.
pub fn cmd_waterfill(
    conditions_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
    overrides: &Overrides,
) -> Result<AllocationFile, CliError> {
    let conditions = conditions_with_overrides(conditions_path, overrides, config.epsilon_b)?;
    let alloc = solve_waterfill(&conditions.a, &conditions.b, conditions.d)?;
    let file = AllocationFile {
        schema_version: SCHEMA_VERSION,
        tick_ids: conditions.ticks.iter().map(|t| t.id.clone()).collect(),
        x: alloc.x.clone(),
        dual: alloc.dual,
        objective: alloc.objective,
        kkt_residual: alloc.kkt_residual,
    };
    formats::write_allocation(&out_dir.join("allocation.json"), &file)?;
    formats::write_allocation_csv(
        &out_dir.join("allocation.csv"),
        &conditions.ticks,
        &alloc.x,
        &conditions.b,
    )?;
    Ok(file)
}

fn open_price_from_history(events: &[SwapEvent], fallback: f64) -> f64 {
    events
        .iter()
        .max_by_key(|e| e.timestamp)
        .map(|e| e.price_after)
        .unwrap_or(fallback)
}

/// Restricts history to the training window ending at the latest event.
fn train_window(events: &[SwapEvent], train_days: f64) -> Vec<SwapEvent> {
    let Some(t_end) = events.iter().map(|e| e.timestamp).max() else {
        return Vec::new();
    };
    let cutoff = t_end as f64 - train_days * 86_400.0;
    events
        .iter()
        .filter(|e| (e.timestamp as f64) > cutoff)
        .cloned()
        .collect()
}

fn load_market_data(
    snapshot_path: &Path,
    swaps_path: &Path,
) -> Result<(Snapshot, Vec<SwapEvent>), CliError> {
    let (ticks, liquidity_value) = formats::read_snapshot(snapshot_path)?;
    if ticks.is_empty() {
        return Err(CliError::schema(
            snapshot_path.display().to_string(),
            "snapshot contains no ticks".to_string(),
        ));
    }
    let events = formats::read_swaps(swaps_path)?;
    for event in &events {
        event.validate().map_err(CliError::Core)?;
    }
    let mid = ticks[ticks.len() / 2].mid_price();
    let current_price = open_price_from_history(&events, mid);
    Ok((
        Snapshot {
            ticks,
            liquidity_value,
            current_price,
        },
        events,
    ))
}

/// `optimize`: full estimate-then-solve pipeline with an audit bundle.
pub fn cmd_optimize(
    snapshot_path: &Path,
    swaps_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<(AllocationFile, AuditBundle), CliError> {
    let (snapshot, events) = load_market_data(snapshot_path, swaps_path)?;
    let backtest_config = config.to_backtest_config()?;
    let open_price = snapshot.current_price;
    let train = train_window(&events, config.train_days);
    let fit = strategy_tick_by_tick(&train, &snapshot, &backtest_config, open_price)?;

    let mass = price_mass_gbm(
        open_price,
        config.sigma_annual,
        config.horizon_days,
        config.grid_size,
        config.span_sigmas,
        config.drift,
    )?;
    let consistency = consistency_check(&fit.a, &snapshot.ticks, &mass, open_price);

    let objective: f64 = fit
        .a
        .iter()
        .zip(&fit.b)
        .zip(&fit.c)
        .zip(&fit.x)
        .map(|(((ai, bi), ci), xi)| ai * xi / (xi + bi) + ci * xi)
        .sum();
    let allocation = AllocationFile {
        schema_version: SCHEMA_VERSION,
        tick_ids: snapshot.ticks.iter().map(|t| t.id.clone()).collect(),
        x: fit.x.clone(),
        dual: fit.dual,
        objective,
        kkt_residual: fit.kkt_residual,
    };
    let audit = AuditBundle {
        schema_version: SCHEMA_VERSION,
        tick_ids: allocation.tick_ids.clone(),
        a: fit.a.clone(),
        b: fit.b.clone(),
        c: fit.c.clone(),
        d: config.d,
        open_price,
        sigma_volume: fit.sigma_volume,
        total_volume: fit.total_volume,
        dual: fit.dual,
        kkt_residual: fit.kkt_residual,
        consistency,
    };
    formats::write_allocation(&out_dir.join("allocation.json"), &allocation)?;
    formats::write_allocation_csv(&out_dir.join("allocation.csv"), &snapshot.ticks, &fit.x, &fit.b)?;
    formats::write_audit(&out_dir.join("audit.json"), &audit)?;
    Ok((allocation, audit))
}

/// Estimator-only output of the `estimate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub schema_version: u32,
    pub tick_ids: Vec<String>,
    pub open_price: f64,
    /// Forecast fee revenue per tick over the horizon, stable units.
    pub a: Vec<f64>,
    /// Expected per-unit reserve return per tick.
    pub c: Vec<f64>,
    pub sigma_volume: f64,
    pub total_volume: f64,
    pub consistency: ConsistencyReport,
}

/// `estimate`: runs the estimators only and emits the (a, c) vectors.
pub fn cmd_estimate(
    snapshot_path: &Path,
    swaps_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<EstimateFile, CliError> {
    let (snapshot, events) = load_market_data(snapshot_path, swaps_path)?;
    let open_price = snapshot.current_price;
    let train = train_window(&events, config.train_days);
    let (sigma_volume, total_train) =
        fit_volume_shape(&train, &snapshot.ticks, &snapshot.liquidity_value)?;
    let total_volume = total_train * config.horizon_days / config.train_days;
    let a = predict_fees_a(
        open_price,
        sigma_volume,
        total_volume,
        &snapshot.ticks,
        config.mass_normalization()?,
    )?;
    let curves: Vec<_> = snapshot
        .ticks
        .iter()
        .map(|t| tickalloc_core::reserves::reserve_value_curve(t, open_price))
        .collect::<Result<_, _>>()
        .map_err(CliError::Core)?;
    let mass = price_mass_gbm(
        open_price,
        config.sigma_annual,
        config.horizon_days,
        config.grid_size,
        config.span_sigmas,
        config.drift,
    )?;
    let c = tickalloc_core::reserves::expected_return_c(&mass, &curves)?;
    let consistency = consistency_check(&a, &snapshot.ticks, &mass, open_price);

    let file = EstimateFile {
        schema_version: SCHEMA_VERSION,
        tick_ids: snapshot.ticks.iter().map(|t| t.id.clone()).collect(),
        open_price,
        a,
        c,
        sigma_volume,
        total_volume,
        consistency,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serialization cannot fail");
    text.push('\n');
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir.display().to_string(), e))?;
    let path = out_dir.join("estimate.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(file)
}

pub fn read_estimate(path: &Path) -> Result<EstimateFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))
}

/// Sweep metadata emitted next to the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMeta {
    pub schema_version: u32,
    pub d_list: Vec<f64>,
    pub duals: Vec<f64>,
    /// Every tick funded at one capital level stays funded at every larger
    /// level.
    pub support_monotone: bool,
}

/// `sweep`: allocations across ascending capital levels, long-format CSV.
pub fn cmd_sweep(
    conditions_path: &Path,
    d_list: &[f64],
    out_dir: &Path,
    config: &RunConfig,
    overrides: &Overrides,
) -> Result<SweepMeta, CliError> {
    if d_list.is_empty() {
        return Err(CliError::usage("sweep requires a non-empty --d-list"));
    }
    let conditions = conditions_with_overrides(conditions_path, overrides, config.epsilon_b)?;
    let allocations = capital_sweep(&conditions.a, &conditions.b, &conditions.c, d_list, true)?;

    let support_monotone = allocations.windows(2).all(|pair| {
        pair[0]
            .x
            .iter()
            .zip(&pair[1].x)
            .all(|(small, large)| *small <= 0.0 || *large > 0.0)
    });
    let meta = SweepMeta {
        schema_version: SCHEMA_VERSION,
        d_list: d_list.to_vec(),
        duals: allocations.iter().map(|a| a.dual).collect(),
        support_monotone,
    };
    let xs: Vec<Vec<f64>> = allocations.into_iter().map(|a| a.x).collect();
    formats::write_sweep_csv(&out_dir.join("sweep.csv"), d_list, &conditions.ticks, &xs, &conditions.b)?;
    let mut text = serde_json::to_string_pretty(&meta).expect("serialization cannot fail");
    text.push('\n');
    let path = out_dir.join("sweep_meta.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(meta)
}

/// `backtest`: rolling train/test strategy comparison table.
pub fn cmd_backtest(
    snapshot_path: &Path,
    swaps_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
    strategies: &[StrategyKind],
) -> Result<BacktestAudit, CliError> {
    if strategies.is_empty() {
        return Err(CliError::usage("backtest requires at least one strategy"));
    }
    let (snapshot, events) = load_market_data(snapshot_path, swaps_path)?;
    let backtest_config = config.to_backtest_config()?;
    let table = rolling_backtest(&snapshot, &events, &backtest_config, strategies)?;
    let audit = BacktestAudit {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        table,
    };
    formats::write_backtest_csv(&out_dir.join("backtest.csv"), &audit.table)?;
    formats::write_backtest_audit(&out_dir.join("backtest_audit.json"), &audit)?;
    Ok(audit)
}
