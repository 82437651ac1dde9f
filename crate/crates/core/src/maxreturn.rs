//! Maximum-return solver via analytic dual bisection.
//!
//! The return problem maximizes `sum_i (a_i * x_i / (x_i + b_i) + c_i * x_i)`
//! over `{x >= 0, sum x = d}`. Per-tick stationarity at multiplier `nu` gives
//! the closed form `x_i(nu) = max(0, sqrt(a_i b_i / (nu - c_i)) - b_i)`, so
//! the equality constraint reduces to a one-dimensional root find in `nu` on
//! a monotone demand curve. Each dual evaluation is O(n) and no external
//! convex-programming dependency is needed.
//!
//! [`projected_gradient_oracle`] is an independent first-order method (SPG
//! with nonmonotone line search) kept solely for cross-validation of the
//! analytic route.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, ln, sqrt};
use crate::types::{Allocation, CoreError};
use crate::waterfill::objective_revenue;

/// Relative demand-gap tolerance for the bisection.
pub const DEMAND_TOL: f64 = 1e-10;
/// Iteration cap for the bisection.
pub const MAX_BISECT_ITERS: usize = 200;

/// State of the dual bisection bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBracket {
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub iterations: usize,
    /// `|sum x(nu) - d|` at the returned multiplier, stable units.
    pub demand_gap: f64,
}

/// Return objective `sum_i (a_i * x_i / (x_i + b_i) + c_i * x_i)`.
pub fn objective_return(a: &[f64], b: &[f64], c: &[f64], x: &[f64]) -> f64 {
    objective_revenue(a, b, x) + c.iter().zip(x).map(|(&ci, &xi)| ci * xi).sum::<f64>()
}

fn check_inputs(a: &[f64], b: &[f64], c: &[f64], d: f64) -> Result<(), CoreError> {
    for (name, v) in [("b", b), ("c", c)] {
        if v.len() != a.len() {
            return Err(CoreError::DimensionMismatch {
                name,
                expected: a.len(),
                got: v.len(),
            });
        }
    }
    if !d.is_finite() || d < 0.0 {
        return Err(CoreError::InvalidCapital(d));
    }
    Ok(())
}

/// Per-tick demand at multiplier `nu = c_floor + t`, summed over ticks with
/// `a_i > 0`.
///
/// `delta_i = c_floor - c_i >= 0` is precomputed so the steep region
/// `nu -> c_floor` keeps full relative precision in `t` instead of
/// cancelling inside `nu - c_i`.
fn demand(a: &[f64], b: &[f64], delta: &[f64], t: f64, x: Option<&mut [f64]>) -> f64 {
    let mut total = 0.0;
    let mut x = x;
    for i in 0..a.len() {
        let xi = if a[i] > 0.0 {
            (sqrt(a[i] * b[i] / (t + delta[i])) - b[i]).max(0.0)
        } else {
            0.0
        };
        total += xi;
        if let Some(buf) = x.as_deref_mut() {
            buf[i] = xi;
        }
    }
    total
}

/// Solves the maximum-return problem; `hint` is an upper bound on the dual
/// from a previous solve at smaller capital.
pub fn solve_max_return_detailed(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: f64,
    hint: Option<f64>,
) -> Result<(Allocation, DualBracket), CoreError> {
    check_inputs(a, b, c, d)?;
    let n = a.len();

    let finish = |x: Vec<f64>, dual: f64, bracket: DualBracket| -> Result<(Allocation, DualBracket), CoreError> {
        let kkt_residual = verify_kkt_return(a, b, c, d, &x, 1e-9)?;
        let objective = objective_return(a, b, c, &x);
        Ok((
            Allocation {
                x,
                dual,
                objective,
                kkt_residual,
            },
            bracket,
        ))
    };

    let grad_at_zero = |i: usize| a[i] / b[i] + c[i];
    if d == 0.0 {
        let dual = (0..n)
            .map(grad_at_zero)
            .fold(0.0f64, f64::max);
        let bracket = DualBracket {
            nu_lo: dual,
            nu_hi: dual,
            iterations: 0,
            demand_gap: 0.0,
        };
        return finish(vec![0.0; n], dual, bracket);
    }

    if a.iter().all(|&ai| ai == 0.0) {
        // Linear objective: all capital to the best reserve return, ties
        // split equally.
        let c_max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..n).filter(|&i| c[i] == c_max).collect();
        let mut x = vec![0.0; n];
        let share = d / winners.len() as f64;
        for &i in &winners {
            x[i] = share;
        }
        let bracket = DualBracket {
            nu_lo: c_max,
            nu_hi: c_max,
            iterations: 0,
            demand_gap: 0.0,
        };
        return finish(x, c_max, bracket);
    }

    // Rescale (a, b, d) to O(1); a/b ratios, c, and nu are scale-invariant,
    // the allocation scales linearly.
    let a_max = a.iter().copied().fold(0.0f64, f64::max);
    let b_max = b.iter().copied().fold(0.0f64, f64::max);
    let scale = d.max(a_max).max(b_max);
    let sa: Vec<f64> = a.iter().map(|v| v / scale).collect();
    let sb: Vec<f64> = b.iter().map(|v| v / scale).collect();
    let sd = d / scale;

    let nu_ceiling = (0..n)
        .filter(|&i| a[i] > 0.0)
        .map(grad_at_zero)
        .fold(f64::NEG_INFINITY, f64::max);
    let c_floor = (0..n)
        .filter(|&i| a[i] > 0.0)
        .map(|i| c[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let delta: Vec<f64> = c.iter().map(|&ci| (c_floor - ci).max(0.0)).collect();

    // Bisect in log t, t = nu - c_floor: the demand curve is near-vertical
    // as t -> 0 and geometric bisection resolves it at full relative
    // precision.
    let t_max = (nu_ceiling - c_floor).max(f64::MIN_POSITIVE);
    let mut s_hi = ln(t_max);
    let mut s_lo = ln(1e-300f64);
    if let Some(h) = hint {
        // The dual is non-increasing in d, so a previous solve at smaller
        // capital bounds this one from above.
        let t_hint = (h - c_floor) * (1.0 + 1e-9) + 1e-300;
        if t_hint > 0.0 && t_hint < t_max && demand(&sa, &sb, &delta, t_hint, None) <= sd {
            s_hi = ln(t_hint);
        }
    }
    if demand(&sa, &sb, &delta, exp(s_lo), None) < sd {
        return Err(CoreError::BisectionFailed {
            nu_lo: c_floor,
            nu_hi: c_floor + t_max,
            demand_gap: (demand(&sa, &sb, &delta, exp(s_lo), None) - sd) * scale,
            iterations: 0,
        });
    }

    let tol = DEMAND_TOL * sd.max(1.0 / scale);
    let mut iterations = 0;
    let mut t = exp(0.5 * (s_lo + s_hi));
    let mut gap = f64::INFINITY;
    while iterations < MAX_BISECT_ITERS {
        let s = 0.5 * (s_lo + s_hi);
        t = exp(s);
        let supply = demand(&sa, &sb, &delta, t, None);
        gap = supply - sd;
        iterations += 1;
        // Run the bracket down to machine resolution in log t; stopping at
        // the demand tolerance alone leaves a budget correction large
        // enough to disturb the KKT certificate on steep instances.
        if gap == 0.0 || s_hi - s_lo <= 2e-15 {
            break;
        }
        if supply > sd {
            s_lo = s;
        } else {
            s_hi = s;
        }
    }

    let mut x = vec![0.0; n];
    let total = demand(&sa, &sb, &delta, t, Some(&mut x));
    if total <= 0.0 || (total - sd).abs() > tol.max(1e-6 * sd.max(1.0 / scale)) {
        return Err(CoreError::BisectionFailed {
            nu_lo: c_floor + exp(s_lo),
            nu_hi: c_floor + exp(s_hi),
            demand_gap: gap * scale,
            iterations,
        });
    }
    let nu = c_floor + t;
    let nu_lo = c_floor + exp(s_lo);
    let nu_hi = c_floor + exp(s_hi);
    // Exact budget: distribute the residual gap proportionally and unscale.
    let correction = sd / total * scale;
    for xi in &mut x {
        *xi *= correction;
    }

    let bracket = DualBracket {
        nu_lo,
        nu_hi,
        iterations,
        demand_gap: gap.abs() * scale,
    };
    finish(x, nu, bracket)
}

/// Solves the maximum-return problem. See [`solve_max_return_detailed`] for
/// the bracket diagnostics.
pub fn solve_max_return(a: &[f64], b: &[f64], c: &[f64], d: f64) -> Result<Allocation, CoreError> {
    solve_max_return_detailed(a, b, c, d, None).map(|(alloc, _)| alloc)
}

/// KKT residual of the return problem at a candidate allocation.
///
/// Gradient `grad_i = a_i b_i / (x_i + b_i)^2 + c_i`; `nu` is the largest
/// gradient over the active set. The residual is the maximum of the relative
/// budget gap, any inactive tick whose gradient exceeds `nu`, and the
/// active-set gradient spread.
pub fn verify_kkt_return(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: f64,
    x: &[f64],
    tol: f64,
) -> Result<f64, CoreError> {
    check_inputs(a, b, c, d)?;
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

    let grad = |i: usize| {
        let denom = x[i] + b[i];
        let curvy = if denom > 0.0 {
            a[i] * b[i] / (denom * denom)
        } else {
            0.0
        };
        curvy + c[i]
    };
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    if active.is_empty() {
        return Ok((total - d).abs() / scale);
    }
    let nu = active
        .iter()
        .map(|&i| grad(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let active_min = active
        .iter()
        .map(|&i| grad(i))
        .fold(f64::INFINITY, f64::min);

    let mut residual = (total - d).abs() / scale;
    residual = residual.max(nu - active_min);
    for (i, &xi) in x.iter().enumerate() {
        if xi <= 0.0 {
            residual = residual.max((grad(i) - nu).max(0.0));
        }
        residual = residual.max(-xi / scale);
    }
    Ok(residual)
}

/// Euclidean projection onto `{x >= 0, sum x = d}`.
pub fn project_simplex(v: &[f64], d: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|p, q| q.total_cmp(p));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - d) / (j + 1) as f64;
        if j + 1 == sorted.len() || sorted[j + 1] <= t {
            tau = t;
            break;
        }
    }
    v.iter().map(|&u| (u - tau).max(0.0)).collect()
}

/// Independent first-order check of the return problem: spectral projected
/// gradient ascent on the simplex with a nonmonotone (Grippo) line search.
///
/// Used as a test oracle only; its objective must match [`solve_max_return`]
/// within the cross-validation tolerance, but it never feeds the analytic
/// solver.
pub fn projected_gradient_oracle(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: f64,
    max_iters: usize,
    tol: f64,
) -> Result<Allocation, CoreError> {
    check_inputs(a, b, c, d)?;
    let n = a.len();
    if n == 0 || d == 0.0 {
        return Ok(Allocation {
            x: vec![0.0; n],
            dual: 0.0,
            objective: 0.0,
            kkt_residual: 0.0,
        });
    }

    let a_max = a.iter().copied().fold(0.0f64, f64::max);
    let b_max = b.iter().copied().fold(0.0f64, f64::max);
    let scale = d.max(a_max).max(b_max);
    let sa: Vec<f64> = a.iter().map(|v| v / scale).collect();
    let sb: Vec<f64> = b.iter().map(|v| v / scale).collect();
    let sd = d / scale;

    let f = |x: &[f64]| objective_return(&sa, &sb, c, x);
    let grad = |x: &[f64], g: &mut [f64]| {
        for i in 0..n {
            let denom = x[i] + sb[i];
            g[i] = if denom > 0.0 {
                sa[i] * sb[i] / (denom * denom)
            } else {
                0.0
            } + c[i];
        }
    };

    let mut x = vec![sd / n as f64; n];
    let mut g = vec![0.0; n];
    let mut fx = f(&x);
    grad(&x, &mut g);

    let mut lambda = 1.0;
    let mut history = [f64::NEG_INFINITY; 10];
    history[0] = fx;
    let mut stalled = 0usize;
    let mut last_improvement;

    for iter in 0..max_iters {
        let trial: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| xi + lambda * gi).collect();
        let mut direction = project_simplex(&trial, sd);
        for (di, &xi) in direction.iter_mut().zip(&x) {
            *di -= xi;
        }
        let slope: f64 = direction.iter().zip(&g).map(|(&di, &gi)| di * gi).sum();
        let dir_norm = direction
            .iter()
            .fold(0.0f64, |acc, &di| acc.max(di.abs()));
        if dir_norm <= 1e-15 * sd.max(1.0) || slope <= 0.0 {
            break;
        }

        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let mut x_new;
        let mut f_new;
        loop {
            x_new = x
                .iter()
                .zip(&direction)
                .map(|(&xi, &di)| xi + alpha * di)
                .collect::<Vec<f64>>();
            f_new = f(&x_new);
            if f_new >= f_ref + 1e-4 * alpha * slope || alpha < 1e-14 {
                break;
            }
            alpha *= 0.5;
        }

        let mut g_new = vec![0.0; n];
        grad(&x_new, &mut g_new);
        // Barzilai-Borwein step for the next iterate; concavity makes
        // <s, y> negative.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = x_new[i] - x[i];
            let y = g_new[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        // Cap the step so the projection input stays within a few orders of
        // the budget; far larger trials already saturate at the same vertex
        // but lose the budget below one ulp inside the projection.
        let g_max = g_new.iter().fold(0.0f64, |acc, &gi| acc.max(gi.abs()));
        let lambda_cap = if g_max > 0.0 {
            (1e3 * sd / g_max).max(1e-10)
        } else {
            1e12
        };
        lambda = if sy < 0.0 {
            (ss / -sy).clamp(1e-10, lambda_cap)
        } else {
            lambda_cap
        };

        last_improvement = f_new - fx;
        if last_improvement.abs() <= tol * fx.abs().max(1e-3) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x = x_new;
        g = g_new;
        fx = f_new;
        history[(iter + 1) % history.len()] = fx;
        if stalled >= 30 {
            break;
        }
        if iter + 1 == max_iters {
            return Err(CoreError::IterationBudget {
                max_iters,
                last_improvement,
            });
        }
    }

    // Remove any budget drift accumulated through inexact projections.
    let total: f64 = x.iter().sum();
    let correction = if total > 0.0 { sd / total } else { 1.0 };
    let x: Vec<f64> = x.iter().map(|&xi| xi * correction * scale).collect();
    let kkt_residual = verify_kkt_return(a, b, c, d, &x, 1e-6)?;
    Ok(Allocation {
        objective: objective_return(a, b, c, &x),
        dual: 0.0,
        x,
        kkt_residual,
    })
}

/// One solve per capital level, reusing each dual as a bracket hint for the
/// next (capital levels must be ascending).
///
/// With `use_hints` disabled the entries are independent and may be solved in
/// parallel by the caller.
pub fn capital_sweep(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d_list: &[f64],
    use_hints: bool,
) -> Result<Vec<Allocation>, CoreError> {
    for pair in d_list.windows(2) {
        if pair[1] < pair[0] {
            return Err(CoreError::InvalidParameter {
                name: "d_list (must be ascending)",
                value: pair[1],
            });
        }
    }
    let mut out = Vec::with_capacity(d_list.len());
    let mut hint = None;
    for (index, &d) in d_list.iter().enumerate() {
        let (alloc, _) = solve_max_return_detailed(a, b, c, d, if use_hints { hint } else { None })
            .map_err(|source| CoreError::SweepEntry {
                index,
                source: Box::new(source),
            })?;
        if d > 0.0 {
            hint = Some(alloc.dual);
        }
        out.push(alloc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_split() {
        let alloc = solve_max_return(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert!((alloc.x[0] - 1.0).abs() < 1e-9);
        assert!((alloc.x[1] - 1.0).abs() < 1e-9);
        assert!(alloc.kkt_residual <= 1e-8);
    }

    #[test]
    fn corner_beats_linear_tick() {
        // Reduced objective x1/(1+x1) - 0.1*x1 + 1 still ascends at x1 = 1,
        // so the nonlinear tick takes all capital.
        let (a, b, c, d) = ([1.0, 0.0], [1.0, 1.0], [0.9, 1.0], 1.0);
        let alloc = solve_max_return(&a, &b, &c, d).unwrap();
        assert!((alloc.x[0] - 1.0).abs() < 1e-9, "x = {:?}", alloc.x);
        assert!(alloc.x[1].abs() < 1e-12);

        // Line search along the 1-D slice confirms the corner.
        let best = (0..=100_000)
            .map(|k| k as f64 * 1e-5)
            .map(|x0| objective_return(&a, &b, &c, &[x0, 1.0 - x0]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(alloc.objective >= best - 1e-8);
    }

    #[test]
    fn all_linear_goes_to_best_return() {
        let alloc = solve_max_return(&[0.0, 0.0], &[1.0, 1.0], &[1.1, 0.9], 1.0).unwrap();
        assert_eq!(alloc.x, vec![1.0, 0.0]);
        assert!((alloc.dual - 1.1).abs() < 1e-15);
    }

    #[test]
    fn all_linear_ties_split_equally() {
        let alloc = solve_max_return(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[0.9, 1.1, 1.1], 3.0)
            .unwrap();
        assert_eq!(alloc.x, vec![0.0, 1.5, 1.5]);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective_return(&[1.0], &[1.0], &[2.0], &[0.0]), 0.0);
        assert!((objective_return(&[1.0], &[1.0], &[2.0], &[1.0]) - 2.5).abs() < 1e-15);
        assert!((objective_return(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_standard_form() {
        // The minimization form sum(a_i b_i/(x_i+b_i) - c_i x_i - a_i),
        // negated, equals the return objective.
        let (a, b, c) = ([2.0, 0.7], [0.3, 1.9], [1.2, 0.8]);
        let x = [0.4, 1.1];
        let standard: f64 = (0..2)
            .map(|i| a[i] * b[i] / (x[i] + b[i]) - c[i] * x[i] - a[i])
            .sum();
        let direct = objective_return(&a, &b, &c, &x);
        assert!((direct - (-standard)).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn kkt_flags_uniform_on_skewed_instance() {
        let residual =
            verify_kkt_return(&[10.0, 0.1], &[0.1, 10.0], &[1.0, 1.0], 1.0, &[0.5, 0.5], 1e-9)
                .unwrap();
        assert!(residual > 1e-2, "residual {residual}");
    }

    #[test]
    fn kkt_zero_capital() {
        let residual = verify_kkt_return(&[1.0], &[1.0], &[1.0], 0.0, &[0.0], 1e-9).unwrap();
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn oracle_matches_solver_on_corner() {
        let (a, b, c, d) = ([1.0, 0.0], [1.0, 1.0], [0.9, 1.0], 1.0);
        let oracle = projected_gradient_oracle(&a, &b, &c, d, 50_000, 1e-14).unwrap();
        assert!((oracle.x[0] - 1.0).abs() < 1e-6, "x = {:?}", oracle.x);
    }

    #[test]
    fn oracle_symmetric() {
        let oracle =
            projected_gradient_oracle(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], 2.0, 50_000, 1e-14)
                .unwrap();
        assert!((oracle.x[0] - 1.0).abs() < 1e-6);
        assert!((oracle.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sweep_requires_ascending_capital() {
        assert!(capital_sweep(&[1.0], &[1.0], &[1.0], &[2.0, 1.0], true).is_err());
    }

    #[test]
    fn sweep_single_zero() {
        let out = capital_sweep(&[1.0], &[1.0], &[1.0], &[0.0], true).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].x, vec![0.0]);
    }

    #[test]
    fn sweep_support_monotone() {
        let (a, b, c) = ([3.0, 0.5, 7.0], [0.4, 2.0, 1.0], [1.0, 1.02, 0.98]);
        let out = capital_sweep(&a, &b, &c, &[1.0, 2.0, 5.0, 20.0], true).unwrap();
        for pair in out.windows(2) {
            for i in 0..3 {
                if pair[0].x[i] > 0.0 {
                    assert!(pair[1].x[i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn projection_basics() {
        let p = project_simplex(&[0.5, 0.5], 1.0);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = project_simplex(&[10.0, 0.0], 1.0);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_simplex(&[-1.0, -1.0], 2.0);
        assert_eq!(p, vec![1.0, 1.0]);
        let sum: f64 = project_simplex(&[0.3, 2.7, -0.4, 1.1], 1.7).iter().sum();
        assert!((sum - 1.7).abs() < 1e-12);
    }
}
