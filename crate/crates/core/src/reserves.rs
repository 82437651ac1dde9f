//! Reserve-value curves and the expected per-unit reserve return `c`.
//!
//! A position of unit liquidity `L` on range `[l, h]` holds, at clamped price
//! `p_hat = clamp(p, l, h)`, asset `L * (1/sqrt(p_hat) - 1/sqrt(h))` and
//! stable `L * (sqrt(p_hat) - sqrt(l))` (constant-product in-range math).
//! The curve reports position value per unit of opening capital, so `L`
//! cancels: below the range it is linear in price (pure asset), above it is
//! constant (pure stable), and `r(open_price) = 1` exactly.
//!
//! Next-period price mass comes from geometric Brownian motion discretized on
//! a log-price grid; `c_i` is the quadrature `sum_k mass_k * r_i(grid_k)`.
//!
//! The curve interface is per tick, so candidate sets mixing protocols with
//! different swap criteria can plug in other curve shapes; only the
//! constant-product model ships.

use alloc::vec::Vec;

use crate::math::{exp, ln, normal_cdf, sqrt};
use crate::types::{CoreError, TickSpec};

/// Default quadrature grid size.
pub const DEFAULT_GRID_SIZE: usize = 4097;
/// Default grid half-width in units of `sigma * sqrt(tau)`.
pub const DEFAULT_SPAN_SIGMAS: f64 = 8.0;
/// Absolute floor on the grid half-width in log-price, so a degenerate
/// (near-zero) volatility concentrates all mass in one cell.
pub const MIN_LOG_HALF_WIDTH: f64 = 1e-5;

/// Deterministic value-of-reserves function for one tick, normalized to 1 at
/// the open price.
#[derive(Debug, Clone, PartialEq)]
pub struct ReserveCurve {
    tick: TickSpec,
    open_price: f64,
    sqrt_lo: f64,
    sqrt_hi: f64,
    value_open: f64,
}

impl ReserveCurve {
    pub fn tick(&self) -> &TickSpec {
        &self.tick
    }

    pub fn open_price(&self) -> f64 {
        self.open_price
    }

    /// Position value per unit liquidity at price `p`.
    fn raw_value(&self, p: f64) -> f64 {
        let p_hat = p.clamp(self.tick.price_lo, self.tick.price_hi);
        let sqrt_p_hat = sqrt(p_hat);
        let asset = 1.0 / sqrt_p_hat - 1.0 / self.sqrt_hi;
        let stable = sqrt_p_hat - self.sqrt_lo;
        p * asset + stable
    }

    /// Return of reserves `r(p)`: value at `p` per unit of value at the open
    /// price.
    pub fn value_at(&self, p: f64) -> f64 {
        if p == self.open_price {
            return 1.0;
        }
        self.raw_value(p) / self.value_open
    }

    /// Fraction of the opening position value held as asset.
    pub fn asset_fraction_at_open(&self) -> f64 {
        let p_hat = self.open_price.clamp(self.tick.price_lo, self.tick.price_hi);
        let asset = self.open_price * (1.0 / sqrt(p_hat) - 1.0 / self.sqrt_hi);
        asset / self.value_open
    }
}

/// Builds the constant-product reserve curve for a tick at a given open price.
pub fn reserve_value_curve(tick: &TickSpec, open_price: f64) -> Result<ReserveCurve, CoreError> {
    tick.validate()?;
    if !open_price.is_finite() || open_price <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "open_price",
            value: open_price,
        });
    }
    let mut curve = ReserveCurve {
        tick: tick.clone(),
        open_price,
        sqrt_lo: sqrt(tick.price_lo),
        sqrt_hi: sqrt(tick.price_hi),
        value_open: 1.0,
    };
    let value_open = curve.raw_value(open_price);
    // Cannot vanish for l < h and positive prices.
    debug_assert!(value_open > 0.0);
    curve.value_open = value_open;
    Ok(curve)
}

/// Discretized next-period price distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMass {
    /// Ascending log-price sample points (cell centers).
    pub log_grid: Vec<f64>,
    /// Probability weight per cell; sums to 1, edge cells absorb the tails.
    pub mass: Vec<f64>,
    pub horizon_days: f64,
    pub sigma_annual: f64,
    pub p0: f64,
}

impl PriceMass {
    pub fn price(&self, k: usize) -> f64 {
        exp(self.log_grid[k])
    }

    /// Mean price under the mass.
    pub fn mean_price(&self) -> f64 {
        self.log_grid
            .iter()
            .zip(&self.mass)
            .map(|(&lg, &m)| m * exp(lg))
            .sum()
    }

    /// Standard deviation of price under the mass.
    pub fn std_price(&self) -> f64 {
        let mean = self.mean_price();
        let var: f64 = self
            .log_grid
            .iter()
            .zip(&self.mass)
            .map(|(&lg, &m)| {
                let p = exp(lg) - mean;
                m * p * p
            })
            .sum();
        sqrt(var.max(0.0))
    }

    /// Median price, linearly interpolated on the cumulative mass.
    pub fn median_price(&self) -> f64 {
        let mut cum = 0.0;
        for (k, &m) in self.mass.iter().enumerate() {
            if cum + m >= 0.5 {
                let half = if k == 0 {
                    self.log_grid[0]
                } else {
                    0.5 * (self.log_grid[k - 1] + self.log_grid[k])
                };
                let width = if k == 0 {
                    0.0
                } else {
                    self.log_grid[k] - self.log_grid[k - 1]
                };
                let frac = if m > 0.0 { (0.5 - cum) / m } else { 0.0 };
                return exp(half + frac * width);
            }
            cum += m;
        }
        exp(*self.log_grid.last().expect("non-empty grid"))
    }
}

/// Discretizes `log P_T ~ Normal(log p0 + (mu - sigma^2/2) tau, sigma^2 tau)`
/// with `tau = horizon_days / 365` onto `grid_size` cells spanning
/// `span_sigmas` standard deviations each side; the edge cells absorb the
/// tails so the mass telescopes to exactly 1.
pub fn price_mass_gbm(
    p0: f64,
    sigma_annual: f64,
    horizon_days: f64,
    grid_size: usize,
    span_sigmas: f64,
    drift_annual: f64,
) -> Result<PriceMass, CoreError> {
    if !p0.is_finite() || p0 <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "p0",
            value: p0,
        });
    }
    if !sigma_annual.is_finite() || sigma_annual <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "sigma_annual",
            value: sigma_annual,
        });
    }
    if !horizon_days.is_finite() || horizon_days <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "horizon_days",
            value: horizon_days,
        });
    }
    if grid_size < 3 || grid_size.is_multiple_of(2) {
        return Err(CoreError::InvalidParameter {
            name: "grid_size (odd, >= 3)",
            value: grid_size as f64,
        });
    }
    if !span_sigmas.is_finite() || span_sigmas <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "span_sigmas",
            value: span_sigmas,
        });
    }
    if !drift_annual.is_finite() {
        return Err(CoreError::InvalidParameter {
            name: "drift_annual",
            value: drift_annual,
        });
    }

    let tau = horizon_days / 365.0;
    let s = sigma_annual * sqrt(tau);
    let center = ln(p0) + (drift_annual - 0.5 * sigma_annual * sigma_annual) * tau;
    let half_width = (span_sigmas * s).max(MIN_LOG_HALF_WIDTH);

    let m = grid_size;
    let step = 2.0 * half_width / m as f64;
    let mut log_grid = Vec::with_capacity(m);
    let mut mass = Vec::with_capacity(m);
    let mut cdf_prev = 0.0;
    for k in 0..m {
        log_grid.push(center - half_width + (k as f64 + 0.5) * step);
        let cdf_next = if k + 1 == m {
            1.0
        } else {
            normal_cdf((-half_width + (k as f64 + 1.0) * step) / s)
        };
        mass.push(cdf_next - cdf_prev);
        cdf_prev = cdf_next;
    }

    Ok(PriceMass {
        log_grid,
        mass,
        horizon_days,
        sigma_annual,
        p0,
    })
}

/// Expected per-unit reserve return `c_i = sum_k mass_k * r_i(grid_k)`, in
/// candidate-set order.
pub fn expected_return_c(mass: &PriceMass, curves: &[ReserveCurve]) -> Result<Vec<f64>, CoreError> {
    for (index, curve) in curves.iter().enumerate() {
        if curve.open_price != mass.p0 {
            return Err(CoreError::MismatchedOpenPrice {
                expected: mass.p0,
                got: curve.open_price,
                index,
            });
        }
    }
    let prices: Vec<f64> = mass.log_grid.iter().map(|&lg| exp(lg)).collect();
    Ok(curves
        .iter()
        .map(|curve| {
            prices
                .iter()
                .zip(&mass.mass)
                .map(|(&p, &m)| m * curve.value_at(p))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(lo: f64, hi: f64) -> TickSpec {
        TickSpec::new("t", "p", lo, hi, 0.0005).unwrap()
    }

    #[test]
    fn normalized_at_open() {
        for (lo, hi, open) in [(1.0, 2.0, 1.5), (1.0, 2.0, 0.5), (1.0, 2.0, 3.0)] {
            let curve = reserve_value_curve(&tick(lo, hi), open).unwrap();
            assert_eq!(curve.value_at(open), 1.0);
        }
    }

    #[test]
    fn all_stable_regime_constant() {
        // Lower-range tick: price already above the range, all stable.
        let curve = reserve_value_curve(&tick(1.0, 1.5), 2.0).unwrap();
        for p in [1.5, 1.8, 2.5, 10.0] {
            assert!((curve.value_at(p) - 1.0).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn all_asset_regime_linear() {
        // Higher-range tick: price below the range, value linear in p.
        let curve = reserve_value_curve(&tick(3.0, 4.0), 2.0).unwrap();
        assert!((curve.value_at(1.0) - 0.5).abs() < 1e-12);
        assert!((curve.value_at(0.5) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_price() {
        let curve = reserve_value_curve(&tick(1.4, 1.9), 1.6).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..1000 {
            let p = 0.5 + 3.0 * k as f64 / 999.0;
            let r = curve.value_at(p);
            assert!(r >= prev - 1e-14, "non-monotone at p = {p}");
            prev = r;
        }
    }

    #[test]
    fn asset_fraction_regimes() {
        // Range entirely above the open price: pure asset.
        let above = reserve_value_curve(&tick(3.0, 4.0), 2.0).unwrap();
        assert!((above.asset_fraction_at_open() - 1.0).abs() < 1e-12);
        // Range entirely below: pure stable.
        let below = reserve_value_curve(&tick(1.0, 1.5), 2.0).unwrap();
        assert!(below.asset_fraction_at_open().abs() < 1e-12);
        // Straddling: strictly between.
        let mid = reserve_value_curve(&tick(1.5, 3.0), 2.0).unwrap();
        let frac = mid.asset_fraction_at_open();
        assert!(frac > 0.0 && frac < 1.0);
    }

    #[test]
    fn gbm_mass_sums_to_one() {
        let mass = price_mass_gbm(2780.0, 0.8, 7.0, 101, 8.0, 0.0).unwrap();
        let total: f64 = mass.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(mass.mass.iter().all(|&m| m >= 0.0));
        assert!(mass
            .log_grid
            .windows(2)
            .all(|w| w[1] > w[0]));
    }

    #[test]
    fn gbm_degenerate_sigma_concentrates() {
        let mass = price_mass_gbm(100.0, 1e-9, 7.0, DEFAULT_GRID_SIZE, 8.0, 0.0).unwrap();
        let center_cell = mass
            .mass
            .iter()
            .enumerate()
            .max_by(|p, q| p.1.total_cmp(q.1))
            .unwrap();
        assert!(*center_cell.1 >= 1.0 - 1e-6);
        let p_at_peak = mass.price(center_cell.0);
        assert!((p_at_peak / 100.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gbm_rejects_bad_inputs() {
        assert!(price_mass_gbm(0.0, 0.8, 7.0, 101, 8.0, 0.0).is_err());
        assert!(price_mass_gbm(100.0, 0.0, 7.0, 101, 8.0, 0.0).is_err());
        assert!(price_mass_gbm(100.0, 0.8, 0.0, 101, 8.0, 0.0).is_err());
        assert!(price_mass_gbm(100.0, 0.8, 7.0, 100, 8.0, 0.0).is_err());
        assert!(price_mass_gbm(100.0, 0.8, 7.0, 1, 8.0, 0.0).is_err());
    }

    #[test]
    fn point_mass_gives_unit_c() {
        let mass = price_mass_gbm(2.0, 1e-9, 7.0, 101, 8.0, 0.0).unwrap();
        let curves = [
            reserve_value_curve(&tick(1.0, 1.5), 2.0).unwrap(),
            reserve_value_curve(&tick(1.9, 2.1), 2.0).unwrap(),
            reserve_value_curve(&tick(3.0, 4.0), 2.0).unwrap(),
        ];
        let c = expected_return_c(&mass, &curves).unwrap();
        for ci in c {
            assert!((ci - 1.0).abs() < 1e-6, "c = {ci}");
        }
    }

    #[test]
    fn lower_tick_with_mass_above_is_unit() {
        // All mass far above the tick's range: constant-value regime.
        let mass = price_mass_gbm(2.0, 0.05, 7.0, 101, 8.0, 0.0).unwrap();
        let curve = reserve_value_curve(&tick(0.5, 0.6), 2.0).unwrap();
        let c = expected_return_c(&mass, &[curve]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_open_price_rejected() {
        let mass = price_mass_gbm(2.0, 0.8, 7.0, 101, 8.0, 0.0).unwrap();
        let curve = reserve_value_curve(&tick(1.0, 1.5), 2.1).unwrap();
        assert!(matches!(
            expected_return_c(&mass, &[curve]),
            Err(CoreError::MismatchedOpenPrice { .. })
        ));
    }
}
