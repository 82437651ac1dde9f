//! Domain types shared by the solvers, estimators, and backtester.
//!
//! Everything is denominated in stable units. On-chain liquidity must be
//! converted to value at the current price before it enters `b`, so that the
//! pro rata share `x/(x+b)` is dimensionally sound.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Canonical fee tiers: 1, 5, 30, 100 basis points.
pub const FEE_TIERS: [f64; 4] = [0.0001, 0.0005, 0.0030, 0.0100];

/// Default relative floor applied to `b` entries, as a fraction of `max(d, 1)`.
pub const DEFAULT_EPSILON_B: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("vector `{name}` has length {got}, expected {expected}")]
    DimensionMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("`{name}` contains a negative or non-finite entry at index {index}: {value}")]
    InvalidEntry {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("capital d must be finite and >= 0, got {0}")]
    InvalidCapital(f64),
    #[error("invalid tick `{id}`: {reason}")]
    InvalidTick { id: String, reason: &'static str },
    #[error("ticks `{first}` and `{second}` from pool `{pool}` have overlapping price ranges")]
    OverlappingTicks {
        pool: String,
        first: String,
        second: String,
    },
    #[error("all fee forecasts are zero with d > 0: the objective is constant and has no unique maximizer")]
    DegenerateObjective,
    #[error("allocation is infeasible: {reason}")]
    InfeasibleAllocation { reason: &'static str },
    #[error(
        "dual bisection did not converge: bracket [{nu_lo}, {nu_hi}], demand gap {demand_gap} after {iterations} iterations"
    )]
    BisectionFailed {
        nu_lo: f64,
        nu_hi: f64,
        demand_gap: f64,
        iterations: usize,
    },
    #[error("capital sweep entry {index} failed: {source}")]
    SweepEntry {
        index: usize,
        source: Box<CoreError>,
    },
    #[error("iteration budget of {max_iters} exhausted (last improvement {last_improvement})")]
    IterationBudget {
        max_iters: usize,
        last_improvement: f64,
    },
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("reserve curves share open price {expected} but curve {index} has {got}")]
    MismatchedOpenPrice {
        expected: f64,
        got: f64,
        index: usize,
    },
    #[error("swap path [{lo}, {hi}] is not covered by the candidate ticks (gap near {gap_at})")]
    PathNotCovered { lo: f64, hi: f64, gap_at: f64 },
    #[error("tick `{id}` is crossed by a swap but has zero liquidity (inconsistent snapshot)")]
    ZeroLiquidityOnPath { id: String },
    #[error("empty swap-event window")]
    EmptyEvents,
    #[error("volume mass over the candidate set is zero (sigma {sigma}, p0 {p0} outside all ranges)")]
    NoVolumeMass { sigma: f64, p0: f64 },
    #[error("insufficient data: {need} days required, {have} days available")]
    InsufficientData { need: f64, have: f64 },
    #[error("no candidate tick intersects the requested range")]
    EmptyRangeIntersection,
}

/// One candidate price range with its fee rate and source pool.
///
/// Prices are stable-per-asset. Ticks may come from different pools, fee
/// tiers, or networks; only ticks sharing a `pool_id` must not overlap.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TickSpec {
    pub id: String,
    pub pool_id: String,
    pub price_lo: f64,
    pub price_hi: f64,
    pub fee_rate: f64,
}

impl TickSpec {
    pub fn new(
        id: impl Into<String>,
        pool_id: impl Into<String>,
        price_lo: f64,
        price_hi: f64,
        fee_rate: f64,
    ) -> Result<Self, CoreError> {
        let tick = TickSpec {
            id: id.into(),
            pool_id: pool_id.into(),
            price_lo,
            price_hi,
            fee_rate,
        };
        tick.validate()?;
        Ok(tick)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let invalid = |reason| CoreError::InvalidTick {
            id: self.id.clone(),
            reason,
        };
        if !(self.price_lo.is_finite() && self.price_lo > 0.0) {
            return Err(invalid("price_lo must be finite and > 0"));
        }
        if !(self.price_hi.is_finite() && self.price_hi > self.price_lo) {
            return Err(invalid("price_hi must be finite and > price_lo"));
        }
        if !(self.fee_rate.is_finite() && self.fee_rate > 0.0 && self.fee_rate <= 0.01) {
            return Err(invalid("fee_rate must lie in (0, 0.01]"));
        }
        Ok(())
    }

    pub fn mid_price(&self) -> f64 {
        0.5 * (self.price_lo + self.price_hi)
    }

    pub fn width(&self) -> f64 {
        self.price_hi - self.price_lo
    }

    /// Half-open containment: `price_lo <= p < price_hi`.
    pub fn contains(&self, p: f64) -> bool {
        self.price_lo <= p && p < self.price_hi
    }
}

/// Uniswap-convention geometric tick range: `1.0001^index .. 1.0001^(index+spacing)`.
pub fn tick_range_from_index(index: i32, spacing: u32) -> (f64, f64) {
    (
        crate::math::powi(1.0001, index),
        crate::math::powi(1.0001, index + spacing as i32),
    )
}

/// The vectors `(a, b, c)` plus capital `d` for one solve.
///
/// `a`: forecast fee revenue per tick; `b`: existing liquidity value per tick;
/// `c`: expected per-unit reserve return; all in candidate-set order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MarketConditions {
    pub ticks: Vec<TickSpec>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub current_price: f64,
}

fn check_vector(name: &'static str, v: &[f64], expected: usize) -> Result<(), CoreError> {
    if v.len() != expected {
        return Err(CoreError::DimensionMismatch {
            name,
            expected,
            got: v.len(),
        });
    }
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(CoreError::InvalidEntry { name, index, value });
        }
    }
    Ok(())
}

fn check_no_same_pool_overlap(ticks: &[TickSpec]) -> Result<(), CoreError> {
    let mut order: Vec<usize> = (0..ticks.len()).collect();
    order.sort_unstable_by(|&i, &j| {
        ticks[i]
            .pool_id
            .cmp(&ticks[j].pool_id)
            .then(ticks[i].price_lo.total_cmp(&ticks[j].price_lo))
    });
    for pair in order.windows(2) {
        let (prev, next) = (&ticks[pair[0]], &ticks[pair[1]]);
        if prev.pool_id == next.pool_id && next.price_lo < prev.price_hi {
            return Err(CoreError::OverlappingTicks {
                pool: prev.pool_id.clone(),
                first: prev.id.clone(),
                second: next.id.clone(),
            });
        }
    }
    Ok(())
}

/// Validates market conditions and clamps each `b_i` to
/// `max(b_i, epsilon_b * max(d, 1))`.
///
/// The clamp guards the discontinuity of `x/(x+b)` at `b = 0`; the
/// perturbation is below solver tolerance. Idempotent on its own output.
pub fn validate_conditions(
    raw: &MarketConditions,
    epsilon_b: f64,
) -> Result<MarketConditions, CoreError> {
    let n = raw.ticks.len();
    for tick in &raw.ticks {
        tick.validate()?;
    }
    check_no_same_pool_overlap(&raw.ticks)?;
    check_vector("a", &raw.a, n)?;
    check_vector("b", &raw.b, n)?;
    check_vector("c", &raw.c, n)?;
    if !raw.d.is_finite() || raw.d < 0.0 {
        return Err(CoreError::InvalidCapital(raw.d));
    }
    if !raw.current_price.is_finite() || raw.current_price <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "current_price",
            value: raw.current_price,
        });
    }
    if !epsilon_b.is_finite() || epsilon_b < 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "epsilon_b",
            value: epsilon_b,
        });
    }
    let floor = epsilon_b * raw.d.max(1.0);
    let mut out = raw.clone();
    for b in &mut out.b {
        *b = b.max(floor);
    }
    Ok(out)
}

/// Solver output: provisioned value per tick plus the dual variable and a KKT
/// certificate residual.
///
/// `dual` is the water level `u` for the revenue problem and the multiplier
/// `nu` for the return problem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Allocation {
    pub x: Vec<f64>,
    pub dual: f64,
    pub objective: f64,
    pub kkt_residual: f64,
}
