//! Exact maximum-revenue solver.
//!
//! The revenue problem maximizes `sum_i a_i * x_i / (x_i + b_i)` over the
//! scaled simplex `{x >= 0, sum x = d}`. Its solution is a water-filling:
//! `x_i = max(0, w_i * (u - h_i))` with height `h_i = sqrt(b_i / a_i)` and
//! width `w_i = sqrt(a_i * b_i)`, where the water level `u` solves
//! `sum_i max(0, w_i * (u - h_i)) = d`. The left side is piecewise linear and
//! non-decreasing in `u`, so the level is found by an exact segment solve
//! rather than bisection.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::types::{Allocation, CoreError};

/// One mound of the water-filling landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillBreakpoint {
    pub tick_index: usize,
    /// `sqrt(b_i / a_i)`
    pub height: f64,
    /// `sqrt(a_i * b_i)`
    pub width: f64,
}

/// Breakpoints for all ticks with `a_i > 0`, unsorted.
///
/// Ticks with `a_i = 0` have an infinite breakpoint height and never receive
/// capital; they are excluded.
pub fn breakpoints(a: &[f64], b: &[f64]) -> Vec<WaterfillBreakpoint> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|&(_, (&ai, _))| ai > 0.0)
        .map(|(tick_index, (&ai, &bi))| WaterfillBreakpoint {
            tick_index,
            height: sqrt(bi / ai),
            width: sqrt(ai * bi),
        })
        .collect()
}

/// Revenue objective `sum_i a_i * x_i / (x_i + b_i)`.
pub fn objective_revenue(a: &[f64], b: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(x)
        .map(|((&ai, &bi), &xi)| {
            if xi + bi > 0.0 {
                ai * xi / (xi + bi)
            } else {
                0.0
            }
        })
        .sum()
}

fn check_inputs(a: &[f64], b: &[f64], d: f64) -> Result<(), CoreError> {
    if b.len() != a.len() {
        return Err(CoreError::DimensionMismatch {
            name: "b",
            expected: a.len(),
            got: b.len(),
        });
    }
    if !d.is_finite() || d < 0.0 {
        return Err(CoreError::InvalidCapital(d));
    }
    Ok(())
}

/// Solves the maximum-revenue problem exactly.
///
/// Inputs are assumed validated (`b > 0` after clamping). Returns the
/// allocation together with the water level `u` as the dual variable and a
/// KKT residual certificate.
pub fn solve_waterfill(a: &[f64], b: &[f64], d: f64) -> Result<Allocation, CoreError> {
    check_inputs(a, b, d)?;
    let n = a.len();

    let mut bps = breakpoints(a, b);
    if bps.is_empty() {
        if d > 0.0 {
            return Err(CoreError::DegenerateObjective);
        }
        return Ok(Allocation {
            x: vec![0.0; n],
            dual: 0.0,
            objective: 0.0,
            kkt_residual: 0.0,
        });
    }
    bps.sort_unstable_by(|p, q| p.height.total_cmp(&q.height));

    // Walk the sorted breakpoints accumulating slope W = sum w_i and
    // intercept S = sum w_i * h_i of f(u) = W*u - S, and solve within the
    // bracketing segment. Ties in height fall out naturally: a candidate
    // level u <= next height yields zero water on the next mound.
    let mut level = bps[0].height;
    if d > 0.0 {
        let mut slope = 0.0;
        let mut intercept = 0.0;
        for (k, bp) in bps.iter().enumerate() {
            slope += bp.width;
            intercept += bp.width * bp.height;
            let candidate = (d + intercept) / slope;
            if k + 1 == bps.len() || candidate <= bps[k + 1].height {
                level = candidate;
                break;
            }
        }
    }

    let mut x = vec![0.0; n];
    for bp in &bps {
        x[bp.tick_index] = (bp.width * (level - bp.height)).max(0.0);
    }
    // Remove round-off drift in the budget before certifying.
    let total: f64 = x.iter().sum();
    if total > 0.0 && d > 0.0 {
        let correction = d / total;
        for xi in &mut x {
            *xi *= correction;
        }
    }

    let kkt_residual = verify_kkt_revenue(a, b, d, &x, 1e-9)?;
    Ok(Allocation {
        objective: objective_revenue(a, b, &x),
        dual: level,
        x,
        kkt_residual,
    })
}

/// KKT residual of the revenue problem at a candidate allocation.
///
/// With gradient `g_i = a_i b_i / (x_i + b_i)^2` and `nu` the largest active
/// gradient, the returned residual is the maximum of:
/// - the relative budget gap `|sum x - d| / max(d, 1)` and any negativity in `x`,
/// - the stationarity violation `g_i - nu` over inactive ticks (clipped at 0),
/// - the active-set gradient spread, scaled by `x_i / max(d, 1)` per the
///   complementary-slackness product.
pub fn verify_kkt_revenue(
    a: &[f64],
    b: &[f64],
    d: f64,
    x: &[f64],
    tol: f64,
) -> Result<f64, CoreError> {
    check_inputs(a, b, d)?;
    if x.len() != a.len() {
        return Err(CoreError::DimensionMismatch {
            name: "x",
            expected: a.len(),
            got: x.len(),
        });
    }
    let scale = d.max(1.0);
    let total: f64 = x.iter().sum();
    if x.iter().any(|&xi| xi < -tol * scale) || (total - d).abs() > tol.max(1e-8) * scale {
        return Err(CoreError::InfeasibleAllocation {
            reason: "x must be nonnegative and sum to d",
        });
    }

    let grad = |i: usize| a[i] * b[i] / ((x[i] + b[i]) * (x[i] + b[i]));
    let mut nu = f64::NEG_INFINITY;
    let mut any_active = false;
    for (i, &xi) in x.iter().enumerate() {
        if xi > 0.0 {
            any_active = true;
            nu = nu.max(grad(i));
        }
    }
    if !any_active {
        // Zero allocation: feasible only when d is (numerically) zero, and
        // every multiplier choice nu >= max g is then consistent.
        return Ok((total - d).abs() / scale);
    }

    let mut residual = (total - d).abs() / scale;
    for (i, &xi) in x.iter().enumerate() {
        let g = grad(i);
        if xi > 0.0 {
            // Complementary slackness: x_i * (nu - g_i) = 0.
            residual = residual.max(xi / scale * (nu - g));
        } else {
            residual = residual.max((g - nu).max(0.0));
        }
        residual = residual.max(-xi / scale);
    }
    Ok(residual)
}
