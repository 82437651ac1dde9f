//! Tick-by-tick liquidity provisioning for concentrated-liquidity AMMs.
//!
//! Given a candidate set of ticks with market conditions `(a, b, c)` — forecast
//! fees, existing liquidity, and expected per-unit reserve return — and total
//! capital `d`, this crate computes the optimal value to provision to each tick:
//!
//! - [`waterfill::solve_waterfill`] maximizes fee revenue alone via the exact
//!   water-filling closed form.
//! - [`maxreturn::solve_max_return`] maximizes total return (fees plus reserve
//!   revaluation) via analytic dual bisection.
//!
//! Parameter estimation lives in [`reserves`] (GBM price mass and reserve-value
//! curves giving `c`) and [`volume`] (swap attribution and Gaussian volume
//! shape fitting giving `a`). [`backtest`] replays historical swaps through
//! rolling train/test windows to compare provisioning strategies.
//!
//! The crate is `no_std` compatible (`alloc` required); disable the default
//! `std` feature for embedded or wasm targets.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backtest;
pub(crate) mod math;
pub mod maxreturn;
pub mod reserves;
pub mod types;
pub mod volume;
pub mod waterfill;

pub use types::{
    tick_range_from_index, validate_conditions, Allocation, CoreError, MarketConditions, TickSpec,
    DEFAULT_EPSILON_B, FEE_TIERS,
};
