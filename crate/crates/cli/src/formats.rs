//! File formats: market conditions, allocations, and audit bundles as JSON;
//! swap events, liquidity snapshots, and result tables as CSV.
//!
//! JSON schemas carry a top-level `schema_version` (currently 1). Numbers are
//! serialized with the shortest round-trip representation, so every emitted
//! file re-ingests to a bit-identical in-memory value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tickalloc_core::backtest::{BacktestConfig, BacktestTable, Snapshot};
use tickalloc_core::volume::{ConsistencyReport, MassNormalization, SwapEvent};
use tickalloc_core::{MarketConditions, TickSpec};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn check_version(path: &str, version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::schema(
            path,
            format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn write_string(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(path.display().to_string(), e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    out.push('\n');
    out
}

/// Market conditions (a, b, c, d) with their candidate ticks, as one JSON
/// document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub ticks: Vec<TickSpec>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub current_price: f64,
}

impl ConditionsFile {
    pub fn from_conditions(conditions: &MarketConditions) -> Self {
        ConditionsFile {
            schema_version: SCHEMA_VERSION,
            ticks: conditions.ticks.clone(),
            a: conditions.a.clone(),
            b: conditions.b.clone(),
            c: conditions.c.clone(),
            d: conditions.d,
            current_price: conditions.current_price,
        }
    }

    pub fn into_conditions(self) -> MarketConditions {
        MarketConditions {
            ticks: self.ticks,
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            current_price: self.current_price,
        }
    }
}

pub fn read_conditions(path: &Path) -> Result<MarketConditions, CliError> {
    let text = read_to_string(path)?;
    let file: ConditionsFile = from_json(path, &text)?;
    check_version(&path.display().to_string(), file.schema_version)?;
    Ok(file.into_conditions())
}

pub fn write_conditions(path: &Path, conditions: &MarketConditions) -> Result<(), CliError> {
    write_string(path, &to_json_pretty(&ConditionsFile::from_conditions(conditions)))
}

/// Solved allocation, keyed by tick id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub tick_ids: Vec<String>,
    pub x: Vec<f64>,
    pub dual: f64,
    pub objective: f64,
    pub kkt_residual: f64,
}

pub fn read_allocation(path: &Path) -> Result<AllocationFile, CliError> {
    let text = read_to_string(path)?;
    let file: AllocationFile = from_json(path, &text)?;
    check_version(&path.display().to_string(), file.schema_version)?;
    Ok(file)
}

pub fn write_allocation(path: &Path, allocation: &AllocationFile) -> Result<(), CliError> {
    write_string(path, &to_json_pretty(allocation))
}

/// Allocation as CSV for plotting: one row per tick.
pub fn write_allocation_csv(
    path: &Path,
    ticks: &[TickSpec],
    x: &[f64],
    b: &[f64],
) -> Result<(), CliError> {
    let mut rows = String::from("tick_id,price_lo,price_hi,x,b\n");
    for ((tick, xi), bi) in ticks.iter().zip(x).zip(b) {
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            tick.id, tick.price_lo, tick.price_hi, xi, bi
        ));
    }
    write_string(path, &rows)
}

/// Estimate-then-solve provenance emitted next to every `optimize` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBundle {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub tick_ids: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub open_price: f64,
    pub sigma_volume: f64,
    pub total_volume: f64,
    pub dual: f64,
    pub kkt_residual: f64,
    pub consistency: ConsistencyReport,
}

pub fn read_audit(path: &Path) -> Result<AuditBundle, CliError> {
    let text = read_to_string(path)?;
    let file: AuditBundle = from_json(path, &text)?;
    check_version(&path.display().to_string(), file.schema_version)?;
    Ok(file)
}

pub fn write_audit(path: &Path, audit: &AuditBundle) -> Result<(), CliError> {
    write_string(path, &to_json_pretty(audit))
}

/// Run configuration; every field can be overridden by a same-named flag and
/// flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Total capital in stable units.
    pub d: f64,
    pub horizon_days: f64,
    pub train_days: f64,
    pub stride_days: f64,
    pub sigma_annual: f64,
    pub drift: f64,
    pub range_pct: f64,
    pub epsilon_b: f64,
    /// Quadrature cell count for the price mass (odd).
    pub grid_size: usize,
    /// Quadrature half-width in standard deviations.
    pub span_sigmas: f64,
    /// Whether the in-range Gaussian volume mass is renormalized to the
    /// candidate set ("renormalize") or left truncated ("truncate").
    pub normalization: String,
    /// All pipeline stages are deterministic; the seed is recorded in outputs
    /// so runs remain reproducible if stochastic stages are ever added.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = BacktestConfig::default();
        RunConfig {
            schema_version: SCHEMA_VERSION,
            d: base.capital,
            horizon_days: base.horizon_days,
            train_days: base.train_days,
            stride_days: base.stride_days,
            sigma_annual: base.sigma_annual,
            drift: base.drift_annual,
            range_pct: base.range_pct,
            epsilon_b: base.epsilon_b,
            grid_size: base.grid_size,
            span_sigmas: base.span_sigmas,
            normalization: "renormalize".into(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.d.is_finite() || self.d < 0.0 {
            return Err(CliError::usage(format!(
                "d must be finite and >= 0, got {}",
                self.d
            )));
        }
        let positive = [
            ("horizon_days", self.horizon_days),
            ("train_days", self.train_days),
            ("stride_days", self.stride_days),
            ("sigma_annual", self.sigma_annual),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(CliError::usage(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.range_pct.is_finite() || self.range_pct <= 0.0 || self.range_pct >= 1.0 {
            return Err(CliError::usage(format!(
                "range_pct must be in (0, 1), got {}",
                self.range_pct
            )));
        }
        self.mass_normalization()?;
        Ok(())
    }

    pub fn mass_normalization(&self) -> Result<MassNormalization, CliError> {
        match self.normalization.as_str() {
            "renormalize" => Ok(MassNormalization::Renormalize),
            "truncate" => Ok(MassNormalization::Truncate),
            other => Err(CliError::usage(format!(
                "normalization must be \"renormalize\" or \"truncate\", got \"{other}\""
            ))),
        }
    }

    pub fn to_backtest_config(&self) -> Result<BacktestConfig, CliError> {
        Ok(BacktestConfig {
            capital: self.d,
            horizon_days: self.horizon_days,
            train_days: self.train_days,
            stride_days: self.stride_days,
            sigma_annual: self.sigma_annual,
            drift_annual: self.drift,
            range_pct: self.range_pct,
            epsilon_b: self.epsilon_b,
            grid_size: self.grid_size,
            span_sigmas: self.span_sigmas,
            normalization: self.mass_normalization()?,
            ..BacktestConfig::default()
        })
    }
}

pub fn read_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read_to_string(path)?;
    let config: RunConfig = from_json(path, &text)?;
    check_version(&path.display().to_string(), config.schema_version)?;
    Ok(config)
}

pub fn write_run_config(path: &Path, config: &RunConfig) -> Result<(), CliError> {
    write_string(path, &to_json_pretty(config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SwapRow {
    timestamp: i64,
    pool_id: String,
    price_before: f64,
    price_after: f64,
    volume_stable: f64,
}

pub fn read_swaps(path: &Path) -> Result<Vec<SwapEvent>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))?;
    let mut events = Vec::new();
    for record in reader.deserialize() {
        let row: SwapRow =
            record.map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))?;
        events.push(SwapEvent {
            timestamp: row.timestamp,
            pool_id: row.pool_id,
            price_before: row.price_before,
            price_after: row.price_after,
            volume_stable: row.volume_stable,
        });
    }
    Ok(events)
}

pub fn write_swaps(path: &Path, events: &[SwapEvent]) -> Result<(), CliError> {
    let mut rows = String::from("timestamp,pool_id,price_before,price_after,volume_stable\n");
    for e in events {
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            e.timestamp, e.pool_id, e.price_before, e.price_after, e.volume_stable
        ));
    }
    write_string(path, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotRow {
    tick_id: String,
    pool_id: String,
    price_lo: f64,
    price_hi: f64,
    fee_rate: f64,
    liquidity_value_stable: f64,
}

/// Reads the liquidity snapshot; the current price is attached later from
/// swap history or configuration.
pub fn read_snapshot(path: &Path) -> Result<(Vec<TickSpec>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))?;
    let mut ticks = Vec::new();
    let mut liquidity = Vec::new();
    for record in reader.deserialize() {
        let row: SnapshotRow =
            record.map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))?;
        let tick = TickSpec::new(row.tick_id, row.pool_id, row.price_lo, row.price_hi, row.fee_rate)
            .map_err(CliError::Core)?;
        if !row.liquidity_value_stable.is_finite() || row.liquidity_value_stable < 0.0 {
            return Err(CliError::schema(
                path.display().to_string(),
                format!(
                    "tick `{}`: liquidity_value_stable must be finite and >= 0, got {}",
                    tick.id, row.liquidity_value_stable
                ),
            ));
        }
        liquidity.push(row.liquidity_value_stable);
        ticks.push(tick);
    }
    Ok((ticks, liquidity))
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<(), CliError> {
    let mut rows = String::from("tick_id,pool_id,price_lo,price_hi,fee_rate,liquidity_value_stable\n");
    for (tick, liq) in snapshot.ticks.iter().zip(&snapshot.liquidity_value) {
        rows.push_str(&format!(
            "{},{},{},{},{},{}\n",
            tick.id, tick.pool_id, tick.price_lo, tick.price_hi, tick.fee_rate, liq
        ));
    }
    write_string(path, &rows)
}

/// Long-format sweep table, one row per (capital level, tick).
pub fn write_sweep_csv(
    path: &Path,
    d_list: &[f64],
    ticks: &[TickSpec],
    allocations: &[Vec<f64>],
    b: &[f64],
) -> Result<(), CliError> {
    let mut rows = String::from("d,tick_id,x,b\n");
    for (d, x) in d_list.iter().zip(allocations) {
        for ((tick, xi), bi) in ticks.iter().zip(x).zip(b) {
            rows.push_str(&format!("{},{},{},{}\n", d, tick.id, xi, bi));
        }
    }
    write_string(path, &rows)
}

/// Result table in the comparison layout: one row per window with per-strategy
/// return columns, then mean and std footer rows.
pub fn write_backtest_csv(path: &Path, table: &BacktestTable) -> Result<(), CliError> {
    let mut rows = String::from("window,train_label,test_label,open_price,close_price");
    for strategy in &table.strategies {
        rows.push_str(&format!(",{strategy}_return_pct"));
    }
    rows.push('\n');
    for (w, (window, results)) in table.windows.iter().zip(&table.results).enumerate() {
        rows.push_str(&format!(
            "{},{},{},{},{}",
            w + 1,
            window.train_label,
            window.test_label,
            window.open_price,
            window.close_price
        ));
        for result in results {
            rows.push_str(&format!(",{}", result.return_pct));
        }
        rows.push('\n');
    }
    for (label, values) in [("mean", &table.mean), ("std", &table.std)] {
        rows.push_str(&format!("{label},,,,"));
        for v in values {
            rows.push_str(&format!(",{v}"));
        }
        rows.push('\n');
    }
    write_string(path, &rows)
}

/// Per-window accounting detail accompanying the backtest table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestAudit {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    pub table: BacktestTable,
}

pub fn read_backtest_audit(path: &Path) -> Result<BacktestAudit, CliError> {
    let text = read_to_string(path)?;
    let file: BacktestAudit = from_json(path, &text)?;
    check_version(&path.display().to_string(), file.schema_version)?;
    Ok(file)
}

pub fn write_backtest_audit(path: &Path, audit: &BacktestAudit) -> Result<(), CliError> {
    write_string(path, &to_json_pretty(audit))
}
