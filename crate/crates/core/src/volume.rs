//! Swap-history transforms producing the per-tick fee forecast `a`.
//!
//! Swaps that start in tick `i` and end in tick `j` generate volume in every
//! tick along the price path; [`attribute_swap`] splits the path at tick
//! boundaries, weights each segment by `L * |sqrt(p_exit) - sqrt(p_enter)|`,
//! and normalizes so the event's stable volume is conserved exactly.
//! [`fit_volume_shape`] reduces an event window to a volume-weighted price
//! standard deviation, and [`predict_fees_a`] turns that Gaussian shape plus
//! total size into the fee forecast by integrating over each candidate range
//! and scaling by its fee tier.
//!
//! Volume is stable-denominated throughout; asset-denominated inputs must be
//! converted at the pre-swap price during ingestion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{normal_cdf, sqrt};
use crate::reserves::PriceMass;
use crate::types::{CoreError, TickSpec};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One historical swap: pre/post price and stable-denominated volume.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SwapEvent {
    /// Unix seconds.
    pub timestamp: i64,
    pub pool_id: String,
    pub price_before: f64,
    pub price_after: f64,
    pub volume_stable: f64,
}

impl SwapEvent {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, v) in [
            ("price_before", self.price_before),
            ("price_after", self.price_after),
            ("volume_stable", self.volume_stable),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }
}

/// Attributed volume per tick for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeProfile {
    pub per_tick_volume: Vec<f64>,
    pub window_days: f64,
    pub total: f64,
}

/// How Gaussian volume mass outside the candidate set is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MassNormalization {
    /// Renormalize over the candidate set so total forecast volume is
    /// conserved (default).
    Renormalize,
    /// Truncate: mass outside the candidate ranges is dropped.
    Truncate,
}

const COVERAGE_TOL: f64 = 1e-9;

/// Splits one swap's volume across the ticks its price path crosses.
///
/// `ticks` must be same-pool candidates covering the path; `liquidity` is the
/// opening-snapshot liquidity value per tick. The output vector is aligned
/// with `ticks` and sums to `event.volume_stable` exactly.
pub fn attribute_swap(
    event: &SwapEvent,
    ticks: &[TickSpec],
    liquidity: &[f64],
) -> Result<Vec<f64>, CoreError> {
    event.validate()?;
    if liquidity.len() != ticks.len() {
        return Err(CoreError::DimensionMismatch {
            name: "liquidity",
            expected: ticks.len(),
            got: liquidity.len(),
        });
    }
    let lo = event.price_before.min(event.price_after);
    let hi = event.price_before.max(event.price_after);
    let n = ticks.len();

    if lo == hi {
        // Degenerate path: all volume on the containing tick.
        let holder = ticks
            .iter()
            .position(|t| t.contains(lo))
            .or_else(|| ticks.iter().position(|t| t.price_hi == lo));
        let Some(i) = holder else {
            return Err(CoreError::PathNotCovered { lo, hi, gap_at: lo });
        };
        let mut out = vec![0.0; n];
        out[i] = event.volume_stable;
        return Ok(out);
    }

    // Collect crossed segments sorted by price.
    let mut segments: Vec<(usize, f64, f64)> = Vec::new();
    for (i, tick) in ticks.iter().enumerate() {
        let seg_lo = tick.price_lo.max(lo);
        let seg_hi = tick.price_hi.min(hi);
        if seg_hi > seg_lo {
            segments.push((i, seg_lo, seg_hi));
        }
    }
    segments.sort_unstable_by(|p, q| p.1.total_cmp(&q.1));

    // Coverage check: segments must tile [lo, hi] without gaps.
    let mut cursor = lo;
    for &(_, seg_lo, seg_hi) in &segments {
        if seg_lo > cursor + COVERAGE_TOL * hi {
            return Err(CoreError::PathNotCovered {
                lo,
                hi,
                gap_at: cursor,
            });
        }
        cursor = cursor.max(seg_hi);
    }
    if cursor < hi - COVERAGE_TOL * hi {
        return Err(CoreError::PathNotCovered {
            lo,
            hi,
            gap_at: cursor,
        });
    }

    let mut weights = vec![0.0; n];
    let mut total_weight = 0.0;
    for &(i, seg_lo, seg_hi) in &segments {
        if liquidity[i] <= 0.0 {
            return Err(CoreError::ZeroLiquidityOnPath {
                id: ticks[i].id.clone(),
            });
        }
        let w = liquidity[i] * (sqrt(seg_hi) - sqrt(seg_lo));
        weights[i] += w;
        total_weight += w;
    }

    let mut out = vec![0.0; n];
    let mut last = 0usize;
    for i in 0..n {
        out[i] = event.volume_stable * weights[i] / total_weight;
        if out[i] > 0.0 {
            last = i;
        }
    }
    // Close the budget on the last funded index so the plain left-to-right
    // sum reproduces the volume exactly. `prefix + share` is monotone in the
    // share, so bisect for the value that rounds to the volume. When rounding
    // ties leave no such share, nudge the largest earlier entry down by one
    // ulp of the prefix and retry; every adjustment stays within a few
    // roundings of the proportional attribution.
    let volume = event.volume_stable;
    let close = |prefix: f64| -> Option<f64> {
        if prefix >= volume {
            return None;
        }
        if prefix + volume == volume {
            return Some(volume);
        }
        let mut lo = 0.0f64;
        let mut hi = volume;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return None;
            }
            let total = prefix + mid;
            if total == volume {
                return Some(mid);
            }
            if total < volume {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    let anchor = (0..last).filter(|&i| out[i] > 0.0).fold(None, |best, i| {
        match best {
            Some(j) if out[j] >= out[i] => Some(j),
            _ => Some(i),
        }
    });
    for _ in 0..64 {
        let prefix: f64 = out[..last].iter().sum();
        if let Some(share) = close(prefix) {
            out[last] = share;
            break;
        }
        let Some(p) = anchor else { break };
        let step = prefix - prefix.next_down();
        let next = out[p] - step;
        if next <= 0.0 {
            break;
        }
        out[p] = next;
    }
    Ok(out)
}

/// Attributes every event and accumulates the per-tick volume profile.
pub fn accumulate_profile(
    events: &[SwapEvent],
    ticks: &[TickSpec],
    liquidity: &[f64],
) -> Result<VolumeProfile, CoreError> {
    if events.is_empty() {
        return Err(CoreError::EmptyEvents);
    }
    let mut per_tick_volume = vec![0.0; ticks.len()];
    for event in events {
        // Attribution runs against the event's own pool only.
        let pool_indices: Vec<usize> = (0..ticks.len())
            .filter(|&i| ticks[i].pool_id == event.pool_id)
            .collect();
        let pool_ticks: Vec<TickSpec> = pool_indices.iter().map(|&i| ticks[i].clone()).collect();
        let pool_liq: Vec<f64> = pool_indices.iter().map(|&i| liquidity[i]).collect();
        let attributed = attribute_swap(event, &pool_ticks, &pool_liq)?;
        for (k, &i) in pool_indices.iter().enumerate() {
            per_tick_volume[i] += attributed[k];
        }
    }
    let total = per_tick_volume.iter().sum();
    let span_secs = events.iter().map(|e| e.timestamp).max().unwrap()
        - events.iter().map(|e| e.timestamp).min().unwrap();
    Ok(VolumeProfile {
        per_tick_volume,
        window_days: span_secs as f64 / 86_400.0,
        total,
    })
}

/// Fits the Gaussian volume shape: volume-weighted standard deviation of tick
/// mid-prices, plus total attributed volume over the window.
pub fn fit_volume_shape(
    events: &[SwapEvent],
    ticks: &[TickSpec],
    liquidity: &[f64],
) -> Result<(f64, f64), CoreError> {
    let profile = accumulate_profile(events, ticks, liquidity)?;
    let total = profile.total;
    if total <= 0.0 {
        return Err(CoreError::EmptyEvents);
    }
    let mean: f64 = ticks
        .iter()
        .zip(&profile.per_tick_volume)
        .map(|(t, &v)| v * t.mid_price())
        .sum::<f64>()
        / total;
    let var: f64 = ticks
        .iter()
        .zip(&profile.per_tick_volume)
        .map(|(t, &v)| {
            let dev = t.mid_price() - mean;
            v * dev * dev
        })
        .sum::<f64>()
        / total;
    Ok((sqrt(var.max(0.0)), total))
}

fn gaussian_tick_mass(p0: f64, sigma: f64, tick: &TickSpec) -> f64 {
    if sigma == 0.0 {
        return if tick.contains(p0) { 1.0 } else { 0.0 };
    }
    normal_cdf((tick.price_hi - p0) / sigma) - normal_cdf((tick.price_lo - p0) / sigma)
}

/// Per-tick fee forecast: Gaussian volume shape centered at the current
/// price, scaled by total volume, times each tick's fee tier.
pub fn predict_fees_a(
    p0: f64,
    sigma_volume: f64,
    total_volume: f64,
    ticks: &[TickSpec],
    normalization: MassNormalization,
) -> Result<Vec<f64>, CoreError> {
    if !sigma_volume.is_finite() || sigma_volume < 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "sigma_volume",
            value: sigma_volume,
        });
    }
    if !total_volume.is_finite() || total_volume < 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "total_volume",
            value: total_volume,
        });
    }
    let raw: Vec<f64> = ticks
        .iter()
        .map(|t| gaussian_tick_mass(p0, sigma_volume, t))
        .collect();
    let raw_total: f64 = raw.iter().sum();
    if raw_total <= 0.0 && total_volume > 0.0 {
        return Err(CoreError::NoVolumeMass {
            sigma: sigma_volume,
            p0,
        });
    }
    Ok(ticks
        .iter()
        .zip(&raw)
        .map(|(t, &m)| {
            let mass = match normalization {
                MassNormalization::Renormalize => {
                    if raw_total > 0.0 {
                        m / raw_total
                    } else {
                        0.0
                    }
                }
                MassNormalization::Truncate => m,
            };
            t.fee_rate * total_volume * mass
        })
        .collect())
}

/// Non-fatal diagnostic comparing the volume model behind `a` with the price
/// model behind `c`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConsistencyReport {
    pub volume_center: f64,
    pub volume_spread: f64,
    pub price_center: f64,
    pub price_spread: f64,
    /// Centers differ by more than one tick width.
    pub center_offset_flag: bool,
    /// Spread ratio outside [1/3, 3].
    pub spread_ratio_flag: bool,
}

/// Checks that the fee forecast `a` and the price mass used for `c` imply
/// consistent centers and spreads. Warnings only, never an error.
pub fn consistency_check(
    a: &[f64],
    ticks: &[TickSpec],
    mass: &PriceMass,
    p0: f64,
) -> ConsistencyReport {
    // Deflate fees back to volume to recover the fitted shape.
    let volumes: Vec<f64> = a
        .iter()
        .zip(ticks)
        .map(|(&ai, t)| ai / t.fee_rate)
        .collect();
    let total: f64 = volumes.iter().sum();
    let (volume_center, volume_spread) = if total > 0.0 {
        let mean = ticks
            .iter()
            .zip(&volumes)
            .map(|(t, &v)| v * t.mid_price())
            .sum::<f64>()
            / total;
        let var = ticks
            .iter()
            .zip(&volumes)
            .map(|(t, &v)| {
                let dev = t.mid_price() - mean;
                v * dev * dev
            })
            .sum::<f64>()
            / total;
        (mean, sqrt(var.max(0.0)))
    } else {
        (p0, 0.0)
    };

    let price_center = mass.mean_price();
    let price_spread = mass.std_price();

    let reference_width = ticks
        .iter()
        .find(|t| t.contains(p0))
        .map(|t| t.width())
        .unwrap_or_else(|| {
            let sum: f64 = ticks.iter().map(|t| t.width()).sum();
            sum / ticks.len().max(1) as f64
        });
    let center_offset_flag = (volume_center - price_center).abs() > reference_width;
    let ratio = if price_spread > 0.0 {
        volume_spread / price_spread
    } else if volume_spread > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let spread_ratio_flag = !(1.0 / 3.0..=3.0).contains(&ratio);

    ConsistencyReport {
        volume_center,
        volume_spread,
        price_center,
        price_spread,
        center_offset_flag,
        spread_ratio_flag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(prices: &[f64], fee: f64) -> Vec<TickSpec> {
        prices
            .windows(2)
            .enumerate()
            .map(|(k, w)| TickSpec::new(alloc::format!("t{k}"), "p", w[0], w[1], fee).unwrap())
            .collect()
    }

    fn event(pb: f64, pa: f64, volume: f64) -> SwapEvent {
        SwapEvent {
            timestamp: 0,
            pool_id: "p".into(),
            price_before: pb,
            price_after: pa,
            volume_stable: volume,
        }
    }

    #[test]
    fn single_tick_swap() {
        let ticks = ladder(&[1.0, 1.02, 1.0404], 0.0005);
        let out = attribute_swap(&event(1.005, 1.015, 100.0), &ticks, &[5.0, 5.0]).unwrap();
        assert_eq!(out, vec![100.0, 0.0]);
    }

    #[test]
    fn two_tick_split_matches_hand_weights() {
        let ticks = ladder(&[1.0, 1.02, 1.0404], 0.0005);
        let out = attribute_swap(&event(1.0, 1.04, 100.0), &ticks, &[7.0, 7.0]).unwrap();
        let w0 = libm::sqrt(1.02) - 1.0;
        let w1 = libm::sqrt(1.04) - libm::sqrt(1.02);
        let expected0 = 100.0 * w0 / (w0 + w1);
        assert!((out[0] - expected0).abs() < 1e-9);
        assert_eq!(out[0] + out[1], 100.0);
    }

    #[test]
    fn degenerate_path_lands_on_containing_tick() {
        let ticks = ladder(&[1.0, 1.02, 1.0404], 0.0005);
        let out = attribute_swap(&event(1.03, 1.03, 42.0), &ticks, &[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.0, 42.0]);
    }

    #[test]
    fn direction_symmetric() {
        let ticks = ladder(&[1.0, 1.02, 1.0404, 1.0612], 0.0005);
        let liq = [3.0, 9.0, 2.0];
        let fwd = attribute_swap(&event(1.01, 1.05, 77.0), &ticks, &liq).unwrap();
        let rev = attribute_swap(&event(1.05, 1.01, 77.0), &ticks, &liq).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn uncovered_path_rejected() {
        let ticks = ladder(&[1.0, 1.02], 0.0005);
        assert!(matches!(
            attribute_swap(&event(1.0, 1.05, 10.0), &ticks, &[1.0]),
            Err(CoreError::PathNotCovered { .. })
        ));
    }

    #[test]
    fn zero_liquidity_on_crossed_tick_rejected() {
        let ticks = ladder(&[1.0, 1.02, 1.0404], 0.0005);
        assert!(matches!(
            attribute_swap(&event(1.0, 1.04, 10.0), &ticks, &[1.0, 0.0]),
            Err(CoreError::ZeroLiquidityOnPath { .. })
        ));
    }

    #[test]
    fn shape_fit_degenerate_spread() {
        let ticks = ladder(&[1.0, 1.02, 1.0404], 0.0005);
        let events = [event(1.01, 1.015, 50.0), event(1.012, 1.01, 30.0)];
        let (sigma, total) = fit_volume_shape(&events, &ticks, &[1.0, 1.0]).unwrap();
        assert_eq!(sigma, 0.0);
        assert_eq!(total, 80.0);
    }

    #[test]
    fn shape_fit_two_point_distribution() {
        // Equal volume at mid-prices 90 and 110 -> sigma 10.
        let ticks = [
            TickSpec::new("lo", "p", 85.0, 95.0, 0.0005).unwrap(),
            TickSpec::new("hi", "p", 105.0, 115.0, 0.0005).unwrap(),
        ];
        let events = [event(90.0, 90.0, 40.0), event(110.0, 110.0, 40.0)];
        let (sigma, total) = fit_volume_shape(&events, &ticks, &[1.0, 1.0]).unwrap();
        assert!((sigma - 10.0).abs() < 1e-12);
        assert_eq!(total, 80.0);
    }

    #[test]
    fn empty_window_rejected() {
        let ticks = ladder(&[1.0, 1.02], 0.0005);
        assert!(matches!(
            fit_volume_shape(&[], &ticks, &[1.0]),
            Err(CoreError::EmptyEvents)
        ));
    }

    #[test]
    fn fees_single_tick_all_mass() {
        let ticks = ladder(&[0.9, 1.1], 0.0005);
        let a = predict_fees_a(1.0, 0.01, 1e6, &ticks, MassNormalization::Renormalize).unwrap();
        assert!((a[0] - 500.0).abs() < 1e-9);
    }

    #[test]
    fn fees_symmetric_ticks_equal() {
        let ticks = ladder(&[0.8, 1.0, 1.2], 0.0005);
        let a = predict_fees_a(1.0, 0.05, 1e6, &ticks, MassNormalization::Renormalize).unwrap();
        assert!((a[0] - a[1]).abs() < 1e-9 * a[0]);
    }

    #[test]
    fn fees_conserve_total_single_tier() {
        let ticks = ladder(&[0.9, 0.95, 1.0, 1.05, 1.1], 0.0005);
        let a = predict_fees_a(1.0, 0.3, 1e6, &ticks, MassNormalization::Renormalize).unwrap();
        let sum: f64 = a.iter().sum();
        assert!((sum - 0.0005 * 1e6).abs() < 1e-9 * sum);
    }

    #[test]
    fn fees_zero_sigma_outside_ranges_rejected() {
        let ticks = ladder(&[0.9, 1.1], 0.0005);
        assert!(matches!(
            predict_fees_a(2.0, 0.0, 1e6, &ticks, MassNormalization::Renormalize),
            Err(CoreError::NoVolumeMass { .. })
        ));
    }

    #[test]
    fn truncate_mode_leaks_mass() {
        let ticks = ladder(&[0.99, 1.01], 0.0005);
        let trunc = predict_fees_a(1.0, 0.5, 1e6, &ticks, MassNormalization::Truncate).unwrap();
        let renorm = predict_fees_a(1.0, 0.5, 1e6, &ticks, MassNormalization::Renormalize).unwrap();
        assert!(trunc[0] < renorm[0]);
        assert!((renorm[0] - 500.0).abs() < 1e-9 * 500.0);
    }

    #[test]
    fn consistency_self_consistent() {
        let ticks = ladder(&[2500.0, 2600.0, 2700.0, 2800.0, 2900.0, 3000.0], 0.0005);
        let mass = crate::reserves::price_mass_gbm(2750.0, 0.8, 7.0, 401, 8.0, 0.0).unwrap();
        let sigma_price = mass.std_price();
        let a = predict_fees_a(2750.0, sigma_price, 1e6, &ticks, MassNormalization::Renormalize)
            .unwrap();
        let report = consistency_check(&a, &ticks, &mass, 2750.0);
        assert!(!report.center_offset_flag, "{report:?}");
        assert!(!report.spread_ratio_flag, "{report:?}");
    }

    #[test]
    fn consistency_center_offset_flagged() {
        let ticks = ladder(&[2500.0, 2600.0, 2700.0, 2800.0, 2900.0, 3000.0], 0.0005);
        let mass = crate::reserves::price_mass_gbm(3025.0, 0.8, 7.0, 401, 8.0, 0.0).unwrap();
        let sigma_price = mass.std_price();
        let a = predict_fees_a(2750.0, sigma_price, 1e6, &ticks, MassNormalization::Renormalize)
            .unwrap();
        let report = consistency_check(&a, &ticks, &mass, 2750.0);
        assert!(report.center_offset_flag, "{report:?}");
    }

    #[test]
    fn consistency_spread_ratio_flagged() {
        let ticks = ladder(&[2500.0, 2600.0, 2700.0, 2800.0, 2900.0, 3000.0], 0.0005);
        let mass = crate::reserves::price_mass_gbm(2750.0, 0.8, 7.0, 401, 8.0, 0.0).unwrap();
        let sigma_volume = mass.std_price() / 10.0;
        let a = predict_fees_a(2750.0, sigma_volume, 1e6, &ticks, MassNormalization::Renormalize)
            .unwrap();
        let report = consistency_check(&a, &ticks, &mass, 2750.0);
        assert!(report.spread_ratio_flag, "{report:?}");
    }
}
