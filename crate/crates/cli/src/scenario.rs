//! Bundled synthetic market scenarios.
//!
//! The capital-sweep scenario combines a Gaussian fee forecast centered at
//! the current price, an existing-liquidity profile with two low-liquidity
//! wells, and an expected-reserve-return vector that dips at and below the
//! current price (zero-drift price model over a one-week horizon). As capital
//! grows the optimal allocation migrates from the fee peak into the wells and
//! away from the current-price tick.

use tickalloc_core::backtest::Snapshot;
use tickalloc_core::reserves::{
    expected_return_c, price_mass_gbm, reserve_value_curve, DEFAULT_GRID_SIZE, DEFAULT_SPAN_SIGMAS,
};
use tickalloc_core::volume::SwapEvent;
use tickalloc_core::{MarketConditions, TickSpec};

/// Current price shared by all bundled scenarios, stable units per asset.
pub const SCENARIO_P0: f64 = 2780.0;
/// Annualized volatility used for the expected-return vector.
pub const SCENARIO_SIGMA: f64 = 0.8;
/// Hold horizon in days.
pub const SCENARIO_HORIZON_DAYS: f64 = 7.0;
/// Candidate ticks per scenario.
pub const SCENARIO_TICKS: usize = 41;

/// Capital-sweep scenario in scaled units (existing liquidity near 1 per
/// tick); capital `d` is meant to sweep roughly 0.2 to 10.
pub fn sweep_scenario(d: f64) -> MarketConditions {
    let ticks = log_ladder("well", SCENARIO_P0, 0.10, SCENARIO_TICKS, 0.0030);
    let n = ticks.len();

    // Existing liquidity: flat baseline with two wells flanking the current
    // price.
    let b: Vec<f64> = ticks
        .iter()
        .map(|t| {
            let rel = t.mid_price() / SCENARIO_P0;
            let well = (0.984..0.998).contains(&rel) || (1.002..1.016).contains(&rel);
            if well {
                0.05
            } else {
                1.0
            }
        })
        .collect();

    // Fee forecast: Gaussian in price centered at p0, fixed total.
    let shape_sigma = 0.055 * SCENARIO_P0;
    let mut a: Vec<f64> = ticks
        .iter()
        .map(|t| {
            let z = (t.mid_price() - SCENARIO_P0) / shape_sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = a.iter().sum();
    let a_total = 2.0;
    for ai in &mut a {
        *ai *= a_total / total;
    }

    let curves: Vec<_> = ticks
        .iter()
        .map(|t| reserve_value_curve(t, SCENARIO_P0).expect("valid scenario tick"))
        .collect();
    let mass = price_mass_gbm(
        SCENARIO_P0,
        SCENARIO_SIGMA,
        SCENARIO_HORIZON_DAYS,
        DEFAULT_GRID_SIZE,
        DEFAULT_SPAN_SIGMAS,
        0.0,
    )
    .expect("valid scenario price model");
    let c = expected_return_c(&mass, &curves).expect("matching curves");

    debug_assert_eq!(c.len(), n);
    MarketConditions {
        ticks,
        a,
        b,
        c,
        d,
        current_price: SCENARIO_P0,
    }
}

/// Log-spaced tick ladder covering `p0 * (1 ± half_width)`.
pub fn log_ladder(pool: &str, p0: f64, half_width: f64, n: usize, fee_rate: f64) -> Vec<TickSpec> {
    let lo = (1.0 - half_width).ln();
    let hi = (1.0 + half_width).ln();
    let step = (hi - lo) / n as f64;
    (0..n)
        .map(|k| {
            TickSpec::new(
                format!("{pool}-{k:02}"),
                pool,
                p0 * (lo + step * k as f64).exp(),
                p0 * (lo + step * (k + 1) as f64).exp(),
                fee_rate,
            )
            .expect("valid ladder tick")
        })
        .collect()
}

/// Deterministic synthetic swap history: a smooth two-frequency oscillation
/// of the log price sampled hourly, with volume modulated on a third
/// frequency. No randomness, so fixtures regenerate bit-identically.
pub fn synthetic_history(days: f64, start_timestamp: i64) -> (Snapshot, Vec<SwapEvent>) {
    let p0 = SCENARIO_P0;
    let ticks = log_ladder("main", p0, 0.12, 49, 0.0030);
    // Heavier liquidity near the current price, lighter in the wings, with
    // one low-liquidity well below the open.
    let liquidity: Vec<f64> = ticks
        .iter()
        .map(|t| {
            let rel = t.mid_price() / p0;
            let z = rel.ln() / 0.05;
            let base = 4.0e6 * (1.0 + 3.0 * (-0.5 * z * z).exp());
            if (0.985..1.015).contains(&rel) {
                0.08 * base
            } else {
                base
            }
        })
        .collect();

    let hours = (days * 24.0).round() as i64;
    let price = |h: i64| -> f64 {
        let t = h as f64 / 24.0;
        let log_dev = 0.045 * (core::f64::consts::TAU * t / 9.0).sin()
            + 0.020 * (core::f64::consts::TAU * t / 2.3 + 1.0).sin();
        p0 * log_dev.exp()
    };
    let mut events = Vec::with_capacity(hours as usize);
    for h in 0..hours {
        let t = h as f64 / 24.0;
        let volume = 2.5e6 * (1.0 + 0.4 * (core::f64::consts::TAU * t / 1.7).cos());
        events.push(SwapEvent {
            timestamp: start_timestamp + 3600 * h,
            pool_id: "main".into(),
            price_before: price(h),
            price_after: price(h + 1),
            volume_stable: volume,
        });
    }
    let current_price = price(hours);
    (
        Snapshot {
            ticks,
            liquidity_value: liquidity,
            current_price,
        },
        events,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_scenario_is_well_formed() {
        let conditions = sweep_scenario(1.0);
        let validated =
            tickalloc_core::validate_conditions(&conditions, tickalloc_core::DEFAULT_EPSILON_B)
                .unwrap();
        assert_eq!(validated.ticks.len(), SCENARIO_TICKS);
        assert!(validated.c.iter().all(|&ci| ci > 0.9 && ci < 1.1));
        let current = validated
            .ticks
            .iter()
            .position(|t| t.contains(SCENARIO_P0))
            .unwrap();
        // The dip: the current tick expects a lower reserve return than the
        // top of the range.
        assert!(validated.c[current] < validated.c[SCENARIO_TICKS - 1]);
    }

    #[test]
    fn history_is_covered_by_the_ladder() {
        let (snapshot, events) = synthetic_history(25.0, 0);
        assert_eq!(events.len(), 600);
        let lo = snapshot.ticks.first().unwrap().price_lo;
        let hi = snapshot.ticks.last().unwrap().price_hi;
        for e in &events {
            assert!(e.price_before >= lo && e.price_before < hi);
            assert!(e.price_after >= lo && e.price_after < hi);
        }
        // Regenerating yields the identical sequence.
        let (_, again) = synthetic_history(25.0, 0);
        assert_eq!(events, again);
    }
}
