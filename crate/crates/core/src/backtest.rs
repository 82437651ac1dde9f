//! Rolling train/test evaluation of provisioning strategies.
//!
//! Each window fits a strategy on the preceding `S` days of swap history,
//! holds the resulting allocation for `T` days of replayed market data, and
//! accounts performance as pro rata fee income plus reserve revaluation at
//! the closing price, optionally with a delta-neutral hedge. Windows advance
//! every `R` days.
//!
//! Provisioned liquidity does not alter the replayed price path or volume;
//! large `x` relative to `b` dilutes fees only through the pro rata share
//! `x/(x+b)`, which is held fixed over the window (no rebalancing). Liquidity
//! along swap paths is the opening snapshot's, static within a window.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::maxreturn::solve_max_return;
use crate::reserves::{expected_return_c, price_mass_gbm, reserve_value_curve};
use crate::types::{validate_conditions, CoreError, MarketConditions, TickSpec};
use crate::volume::{attribute_swap, fit_volume_shape, predict_fees_a, MassNormalization, SwapEvent};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

const SECS_PER_DAY: f64 = 86_400.0;

/// Opening state of the candidate set: ticks, liquidity value per tick, and
/// the current price.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Snapshot {
    pub ticks: Vec<TickSpec>,
    pub liquidity_value: Vec<f64>,
    pub current_price: f64,
}

/// Which portfolio the delta-neutral hedge is sized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HedgeBase {
    /// Hedge the uniform range portfolio (default).
    #[default]
    Range,
    /// Hedge the tick-by-tick portfolio.
    TickByTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StrategyKind {
    TickByTick,
    UniformRange,
    DeltaNeutral,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::TickByTick => "tick_by_tick",
            StrategyKind::UniformRange => "range",
            StrategyKind::DeltaNeutral => "delta_neutral",
        }
    }

    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::TickByTick,
        StrategyKind::UniformRange,
        StrategyKind::DeltaNeutral,
    ];
}

/// Estimation and solve settings for one backtest run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BacktestConfig {
    /// Capital per window, stable units.
    pub capital: f64,
    /// Test-window length `T`, days.
    pub horizon_days: f64,
    /// Train-window length `S`, days.
    pub train_days: f64,
    /// Stride `R` between window starts, days.
    pub stride_days: f64,
    pub sigma_annual: f64,
    pub drift_annual: f64,
    /// Half-width of the uniform range strategy's band, fraction of price.
    pub range_pct: f64,
    pub epsilon_b: f64,
    pub grid_size: usize,
    pub span_sigmas: f64,
    pub normalization: MassNormalization,
    pub hedge_base: HedgeBase,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            capital: 1_000_000.0,
            horizon_days: 7.0,
            train_days: 7.0,
            stride_days: 4.0,
            sigma_annual: 0.8,
            drift_annual: 0.0,
            range_pct: 0.10,
            epsilon_b: crate::types::DEFAULT_EPSILON_B,
            grid_size: crate::reserves::DEFAULT_GRID_SIZE,
            span_sigmas: crate::reserves::DEFAULT_SPAN_SIGMAS,
            normalization: MassNormalization::Renormalize,
            hedge_base: HedgeBase::Range,
        }
    }
}

/// One train/test window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Window {
    pub train_start: i64,
    pub test_start: i64,
    pub test_end: i64,
    /// Opaque labels carried through for reporting.
    pub train_label: String,
    pub test_label: String,
    pub open_price: f64,
    pub close_price: f64,
}

/// Accounting for one strategy over one window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PeriodResult {
    pub strategy: String,
    pub fee_income: f64,
    pub reserve_pnl: f64,
    pub hedge_pnl: f64,
    pub return_pct: f64,
}

impl PeriodResult {
    fn new(strategy: &str, fee_income: f64, reserve_pnl: f64, hedge_pnl: f64, d: f64) -> Self {
        let total = fee_income + reserve_pnl + hedge_pnl;
        PeriodResult {
            strategy: strategy.to_string(),
            fee_income,
            reserve_pnl,
            hedge_pnl,
            return_pct: if d > 0.0 { total / d } else { 0.0 },
        }
    }
}

/// Tick-by-tick fit output: the allocation plus the intermediate market
/// conditions for audit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TickByTickFit {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma_volume: f64,
    pub total_volume: f64,
    pub dual: f64,
    pub kkt_residual: f64,
}

/// Full estimate-then-solve pipeline for one window.
pub fn strategy_tick_by_tick(
    train_events: &[SwapEvent],
    snapshot: &Snapshot,
    config: &BacktestConfig,
    open_price: f64,
) -> Result<TickByTickFit, CoreError> {
    let (sigma_volume, total_train) =
        fit_volume_shape(train_events, &snapshot.ticks, &snapshot.liquidity_value)?;
    if total_train <= 0.0 {
        return Err(CoreError::EmptyEvents);
    }
    // The fit covers the train window; rescale its size to the hold horizon.
    let total_forecast = total_train * config.horizon_days / config.train_days;
    let a = predict_fees_a(
        open_price,
        sigma_volume,
        total_forecast,
        &snapshot.ticks,
        config.normalization,
    )?;

    let curves: Vec<_> = snapshot
        .ticks
        .iter()
        .map(|t| reserve_value_curve(t, open_price))
        .collect::<Result<_, _>>()?;
    let mass = price_mass_gbm(
        open_price,
        config.sigma_annual,
        config.horizon_days,
        config.grid_size,
        config.span_sigmas,
        config.drift_annual,
    )?;
    let c = expected_return_c(&mass, &curves)?;

    let conditions = validate_conditions(
        &MarketConditions {
            ticks: snapshot.ticks.clone(),
            a,
            b: snapshot.liquidity_value.clone(),
            c,
            d: config.capital,
            current_price: open_price,
        },
        config.epsilon_b,
    )?;
    let alloc = solve_max_return(&conditions.a, &conditions.b, &conditions.c, conditions.d)?;
    Ok(TickByTickFit {
        x: alloc.x,
        a: conditions.a,
        b: conditions.b,
        c: conditions.c,
        sigma_volume,
        total_volume: total_forecast,
        dual: alloc.dual,
        kkt_residual: alloc.kkt_residual,
    })
}

/// Emulates one uniform range position spanning `p0 * (1 +- pct)`: capital is
/// split across intersecting ticks proportionally to price-range overlap.
pub fn strategy_uniform_range(
    p0: f64,
    pct: f64,
    d: f64,
    ticks: &[TickSpec],
) -> Result<Vec<f64>, CoreError> {
    if !pct.is_finite() || !(0.0..1.0).contains(&pct) {
        return Err(CoreError::InvalidParameter {
            name: "range_pct",
            value: pct,
        });
    }
    let mut x = vec![0.0; ticks.len()];
    if pct == 0.0 {
        let Some(i) = ticks.iter().position(|t| t.contains(p0)) else {
            return Err(CoreError::EmptyRangeIntersection);
        };
        x[i] = d;
        return Ok(x);
    }
    let band_lo = p0 * (1.0 - pct);
    let band_hi = p0 * (1.0 + pct);
    let mut total = 0.0;
    for (i, tick) in ticks.iter().enumerate() {
        let overlap = (tick.price_hi.min(band_hi) - tick.price_lo.max(band_lo)).max(0.0);
        x[i] = overlap;
        total += overlap;
    }
    if total <= 0.0 {
        return Err(CoreError::EmptyRangeIntersection);
    }
    for xi in &mut x {
        *xi *= d / total;
    }
    Ok(x)
}

/// Sizes the short hedge to the asset-side value of the opening reserves.
///
/// Returns the allocation unchanged plus the hedge notional; hedge PnL at
/// close is `notional * (1 - close/open)`.
pub fn strategy_delta_neutral(
    base: &[f64],
    ticks: &[TickSpec],
    open_price: f64,
) -> Result<(Vec<f64>, f64), CoreError> {
    let mut notional = 0.0;
    for (xi, tick) in base.iter().zip(ticks) {
        if *xi > 0.0 {
            let curve = reserve_value_curve(tick, open_price)?;
            notional += xi * curve.asset_fraction_at_open();
        }
    }
    Ok((base.to_vec(), notional))
}

/// Replays one test window against a held allocation.
pub fn run_period(
    strategy: &str,
    x: &[f64],
    snapshot: &Snapshot,
    test_events: &[SwapEvent],
    window: &Window,
    hedge_notional: Option<f64>,
) -> Result<PeriodResult, CoreError> {
    let ticks = &snapshot.ticks;
    if x.len() != ticks.len() {
        return Err(CoreError::DimensionMismatch {
            name: "x",
            expected: ticks.len(),
            got: x.len(),
        });
    }
    let d: f64 = x.iter().sum();

    let mut fees = vec![0.0; ticks.len()];
    for event in test_events {
        let pool_indices: Vec<usize> = (0..ticks.len())
            .filter(|&i| ticks[i].pool_id == event.pool_id)
            .collect();
        let pool_ticks: Vec<TickSpec> = pool_indices.iter().map(|&i| ticks[i].clone()).collect();
        let pool_liq: Vec<f64> = pool_indices
            .iter()
            .map(|&i| snapshot.liquidity_value[i])
            .collect();
        let attributed = attribute_swap(event, &pool_ticks, &pool_liq)?;
        for (k, &i) in pool_indices.iter().enumerate() {
            fees[i] += attributed[k] * ticks[i].fee_rate;
        }
    }

    let mut fee_income = 0.0;
    let mut reserve_pnl = 0.0;
    for i in 0..ticks.len() {
        let denom = x[i] + snapshot.liquidity_value[i];
        if x[i] > 0.0 && denom > 0.0 {
            fee_income += x[i] / denom * fees[i];
        }
        if x[i] > 0.0 {
            let curve = reserve_value_curve(&ticks[i], window.open_price)?;
            reserve_pnl += x[i] * (curve.value_at(window.close_price) - 1.0);
        }
    }
    let hedge_pnl = hedge_notional
        .map(|n| n * (1.0 - window.close_price / window.open_price))
        .unwrap_or(0.0);

    Ok(PeriodResult::new(
        strategy,
        fee_income,
        reserve_pnl,
        hedge_pnl,
        d,
    ))
}

/// Result table in the layout of the strategy-comparison experiment: one row
/// per window, one column per strategy, mean and standard-deviation footer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BacktestTable {
    pub strategies: Vec<String>,
    pub windows: Vec<Window>,
    /// `results[w][s]` is strategy `s` in window `w`.
    pub results: Vec<Vec<PeriodResult>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn price_at(events: &[SwapEvent], before: f64, fallback: f64) -> f64 {
    events
        .iter()
        .filter(|e| (e.timestamp as f64) < before)
        .max_by_key(|e| e.timestamp)
        .map(|e| e.price_after)
        .unwrap_or(fallback)
}

/// Rolling walk-forward backtest over sorted swap history.
pub fn rolling_backtest(
    snapshot: &Snapshot,
    events: &[SwapEvent],
    config: &BacktestConfig,
    strategies: &[StrategyKind],
) -> Result<BacktestTable, CoreError> {
    for (name, v) in [
        ("train_days", config.train_days),
        ("horizon_days", config.horizon_days),
        ("stride_days", config.stride_days),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(CoreError::InvalidParameter { name, value: v });
        }
    }
    if events.is_empty() {
        return Err(CoreError::EmptyEvents);
    }
    let mut events: Vec<SwapEvent> = events.to_vec();
    events.sort_by_key(|e| e.timestamp);

    let t0 = events.first().unwrap().timestamp as f64;
    let t_end = events.last().unwrap().timestamp as f64;
    let span_days = (t_end - t0) / SECS_PER_DAY;
    let need = config.train_days + config.horizon_days;
    if span_days + 1e-9 < need {
        return Err(CoreError::InsufficientData {
            need,
            have: span_days,
        });
    }

    let mut windows = Vec::new();
    let mut results = Vec::new();
    let mut k = 0usize;
    loop {
        let test_start = t0 + (config.train_days + k as f64 * config.stride_days) * SECS_PER_DAY;
        let test_end = test_start + config.horizon_days * SECS_PER_DAY;
        if test_end > t_end + 0.5 {
            break;
        }
        let train_start = test_start - config.train_days * SECS_PER_DAY;
        let train: Vec<SwapEvent> = events
            .iter()
            .filter(|e| (e.timestamp as f64) >= train_start && (e.timestamp as f64) < test_start)
            .cloned()
            .collect();
        let test: Vec<SwapEvent> = events
            .iter()
            .filter(|e| (e.timestamp as f64) >= test_start && (e.timestamp as f64) <= test_end)
            .cloned()
            .collect();

        let open_price = price_at(&events, test_start, snapshot.current_price);
        let close_price = price_at(&events, test_end + 0.5, open_price);
        let window = Window {
            train_start: train_start as i64,
            test_start: test_start as i64,
            test_end: test_end as i64,
            train_label: (train_start as i64).to_string(),
            test_label: (test_start as i64).to_string(),
            open_price,
            close_price,
        };

        let mut row = Vec::with_capacity(strategies.len());
        for &strategy in strategies {
            let result = match strategy {
                StrategyKind::TickByTick => {
                    let fit = strategy_tick_by_tick(&train, snapshot, config, open_price)?;
                    run_period(strategy.label(), &fit.x, snapshot, &test, &window, None)?
                }
                StrategyKind::UniformRange => {
                    let x = strategy_uniform_range(
                        open_price,
                        config.range_pct,
                        config.capital,
                        &snapshot.ticks,
                    )?;
                    run_period(strategy.label(), &x, snapshot, &test, &window, None)?
                }
                StrategyKind::DeltaNeutral => {
                    let base = match config.hedge_base {
                        HedgeBase::Range => strategy_uniform_range(
                            open_price,
                            config.range_pct,
                            config.capital,
                            &snapshot.ticks,
                        )?,
                        HedgeBase::TickByTick => {
                            strategy_tick_by_tick(&train, snapshot, config, open_price)?.x
                        }
                    };
                    let (x, notional) =
                        strategy_delta_neutral(&base, &snapshot.ticks, open_price)?;
                    run_period(strategy.label(), &x, snapshot, &test, &window, Some(notional))?
                }
            };
            row.push(result);
        }
        windows.push(window);
        results.push(row);
        k += 1;
    }

    let n = windows.len() as f64;
    let mut mean = vec![0.0; strategies.len()];
    let mut std = vec![0.0; strategies.len()];
    for (s, m) in mean.iter_mut().enumerate() {
        *m = results.iter().map(|row| row[s].return_pct).sum::<f64>() / n;
    }
    if windows.len() > 1 {
        for (s, sd) in std.iter_mut().enumerate() {
            let var = results
                .iter()
                .map(|row| {
                    let dev = row[s].return_pct - mean[s];
                    dev * dev
                })
                .sum::<f64>()
                / (n - 1.0);
            *sd = sqrt(var);
        }
    }

    Ok(BacktestTable {
        strategies: strategies.iter().map(|s| s.label().to_string()).collect(),
        windows,
        results,
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn snapshot() -> Snapshot {
        let edges = [90.0, 94.0, 98.0, 102.0, 106.0, 110.0];
        let ticks: Vec<TickSpec> = edges
            .windows(2)
            .enumerate()
            .map(|(k, w)| TickSpec::new(format!("t{k}"), "p", w[0], w[1], 0.0005).unwrap())
            .collect();
        Snapshot {
            liquidity_value: vec![1e6; ticks.len()],
            ticks,
            current_price: 100.0,
        }
    }

    fn window(open: f64, close: f64) -> Window {
        Window {
            train_start: 0,
            test_start: 7 * 86_400,
            test_end: 14 * 86_400,
            train_label: "0".into(),
            test_label: "604800".into(),
            open_price: open,
            close_price: close,
        }
    }

    #[test]
    fn range_equal_split_inside_band() {
        // Band +-10% of 100 covers [90, 110]: all five equal-width ticks.
        let snap = snapshot();
        let x = strategy_uniform_range(100.0, 0.10, 1000.0, &snap.ticks).unwrap();
        for &xi in &x {
            assert!((xi - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn range_partial_edge_tick() {
        // Band [96, 104] half-covers ticks [94,98) and [102,106).
        let snap = snapshot();
        let x = strategy_uniform_range(100.0, 0.04, 800.0, &snap.ticks).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[4], 0.0);
        assert!((x[2] - 2.0 * x[1]).abs() < 1e-9);
        assert!((x[1] - x[3]).abs() < 1e-12);
    }

    #[test]
    fn range_degenerate_band() {
        let snap = snapshot();
        let x = strategy_uniform_range(100.0, 0.0, 500.0, &snap.ticks).unwrap();
        assert_eq!(x[2], 500.0);
        assert_eq!(x.iter().sum::<f64>(), 500.0);
    }

    #[test]
    fn range_empty_intersection() {
        let snap = snapshot();
        assert!(matches!(
            strategy_uniform_range(500.0, 0.01, 1.0, &snap.ticks),
            Err(CoreError::EmptyRangeIntersection)
        ));
    }

    #[test]
    fn hedge_regimes() {
        let snap = snapshot();
        // All capital below the price: pure stable, no hedge.
        let (_, notional) =
            strategy_delta_neutral(&[1.0, 1.0, 0.0, 0.0, 0.0], &snap.ticks, 120.0).unwrap();
        assert!(notional.abs() < 1e-12);
        // All capital above the price: pure asset, full hedge.
        let (_, notional) =
            strategy_delta_neutral(&[0.0, 0.0, 0.0, 1.0, 1.0], &snap.ticks, 80.0).unwrap();
        assert!((notional - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_swaps_flat_close_returns_zero() {
        let snap = snapshot();
        let result = run_period(
            "range",
            &[200.0; 5],
            &snap,
            &[],
            &window(100.0, 100.0),
            None,
        )
        .unwrap();
        assert_eq!(result.fee_income, 0.0);
        assert_eq!(result.reserve_pnl, 0.0);
        assert_eq!(result.return_pct, 0.0);
    }

    #[test]
    fn pro_rata_half_share() {
        // x = b on a single tick: half the tick's fees.
        let mut snap = snapshot();
        snap.liquidity_value = vec![1000.0; 5];
        let events = [SwapEvent {
            timestamp: 8 * 86_400,
            pool_id: "p".into(),
            price_before: 99.0,
            price_after: 101.0,
            volume_stable: 10_000.0,
        }];
        let x = [0.0, 0.0, 1000.0, 0.0, 0.0];
        let result = run_period("x", &x, &snap, &events, &window(100.0, 100.0), None).unwrap();
        assert!((result.fee_income - 0.5 * 10_000.0 * 0.0005).abs() < 1e-12);
    }

    #[test]
    fn hedge_pnl_zero_when_flat() {
        let snap = snapshot();
        let result = run_period(
            "dn",
            &[200.0; 5],
            &snap,
            &[],
            &window(100.0, 100.0),
            Some(123.0),
        )
        .unwrap();
        assert_eq!(result.hedge_pnl, 0.0);
    }

    #[test]
    fn accounting_identity() {
        let snap = snapshot();
        let events = [SwapEvent {
            timestamp: 8 * 86_400,
            pool_id: "p".into(),
            price_before: 99.0,
            price_after: 103.0,
            volume_stable: 5e5,
        }];
        let x = [100.0, 200.0, 300.0, 250.0, 150.0];
        let result =
            run_period("x", &x, &snap, &events, &window(100.0, 103.0), Some(400.0)).unwrap();
        let d: f64 = x.iter().sum();
        let identity = (result.fee_income + result.reserve_pnl + result.hedge_pnl) / d;
        assert!((result.return_pct - identity).abs() <= 1e-9);
    }

    fn synthetic_events(days: usize) -> Vec<SwapEvent> {
        // Deterministic zig-zag around 100 with a few multi-tick swaps.
        let mut events = Vec::new();
        for day in 0..days {
            for j in 0..4 {
                let t = (day * 4 + j) as i64 * 21_600;
                let phase = ((day * 4 + j) % 7) as f64;
                let p_before = 97.0 + phase;
                let p_after = 97.0 + ((day * 4 + j + 3) % 7) as f64;
                events.push(SwapEvent {
                    timestamp: t,
                    pool_id: "p".into(),
                    price_before: p_before,
                    price_after: if p_after == p_before {
                        p_after + 0.5
                    } else {
                        p_after
                    },
                    volume_stable: 1e5 + 1e4 * phase,
                });
            }
        }
        events
    }

    #[test]
    fn window_arithmetic() {
        let snap = snapshot();
        let config = BacktestConfig {
            capital: 1e5,
            grid_size: 257,
            ..BacktestConfig::default()
        };
        // 25 days, S = T = 7, R = 4 -> floor((25 - 14) / 4) + 1 = 3 windows.
        let events = synthetic_events(26);
        let span_days = (events.last().unwrap().timestamp - events[0].timestamp) as f64 / 86_400.0;
        assert!(span_days >= 25.0);
        let events: Vec<SwapEvent> = events
            .into_iter()
            .filter(|e| e.timestamp <= 25 * 86_400)
            .collect();
        let table =
            rolling_backtest(&snap, &events, &config, &StrategyKind::ALL).unwrap();
        assert_eq!(table.windows.len(), 3);
        assert_eq!(table.results[0].len(), 3);
    }

    #[test]
    fn exactly_one_window_at_boundary() {
        let snap = snapshot();
        let config = BacktestConfig {
            capital: 1e5,
            grid_size: 257,
            ..BacktestConfig::default()
        };
        let events: Vec<SwapEvent> = synthetic_events(15)
            .into_iter()
            .filter(|e| e.timestamp <= 14 * 86_400)
            .collect();
        let table = rolling_backtest(&snap, &events, &config, &[StrategyKind::UniformRange])
            .unwrap();
        assert_eq!(table.windows.len(), 1);
    }

    #[test]
    fn insufficient_data_rejected() {
        let snap = snapshot();
        let config = BacktestConfig::default();
        let events: Vec<SwapEvent> = synthetic_events(5);
        assert!(matches!(
            rolling_backtest(&snap, &events, &config, &[StrategyKind::UniformRange]),
            Err(CoreError::InsufficientData { .. })
        ));
    }

    #[test]
    fn deterministic_replay() {
        let snap = snapshot();
        let config = BacktestConfig {
            capital: 1e5,
            grid_size: 257,
            ..BacktestConfig::default()
        };
        let events = synthetic_events(20);
        let t1 = rolling_backtest(&snap, &events, &config, &StrategyKind::ALL).unwrap();
        let t2 = rolling_backtest(&snap, &events, &config, &StrategyKind::ALL).unwrap();
        assert_eq!(t1, t2);
    }
}
