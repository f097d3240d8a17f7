//! Euclidean projections onto the follower feasible set
//! `E = {e : 0 <= e_n <= E_n, sum e <= E_def}` and onto `E ∩ H` for a
//! half-space `H = {y : <g, y - z> <= 0}`.
//!
//! Both reduce to scalar multipliers: the budget multiplier `lambda` enters
//! every coordinate as a common shift and the half-space multiplier `mu` as a
//! shift along `-g`. `lambda` is found exactly by a search over the breakpoints
//! of the piecewise-linear clamped sum; `mu` by a safeguarded secant search on
//! the likewise piecewise-linear cut value.
//!
//! The half-space projection works with the displacement `d = y - x` rather
//! than with `y` itself. Near a solution the cut value `<g, y - z>` is many
//! orders of magnitude smaller than `<g, y>`, and only the displacement form
//! resolves it in double precision.

const MAX_DOUBLINGS: usize = 200;
const MAX_SECANT_STEPS: usize = 200;

#[inline]
fn shift(v: f64, lambda: f64, lo: f64, hi: f64) -> f64 {
    (v - lambda).max(lo).min(hi)
}

/// `clamp(x - lambda, 0, upper)`.
#[inline]
pub(crate) fn project_coordinate(x: f64, lambda: f64, upper: f64) -> f64 {
    shift(x, lambda, 0.0, upper)
}

/// `x + clamp(-mu g - lambda, -x, upper - x)`, kept inside `[0, upper]`.
#[inline]
pub(crate) fn halfspace_coordinate(x: f64, g: f64, mu: f64, lambda: f64, upper: f64) -> f64 {
    (x + shift(-(mu * g), lambda, -x, upper - x)).max(0.0).min(upper)
}

fn shifted_sum(v: &[f64], lo: &[f64], hi: &[f64], lambda: f64) -> f64 {
    v.iter()
        .zip(lo)
        .zip(hi)
        .map(|((&v, &l), &h)| shift(v, lambda, l, h))
        .sum()
}

/// Smallest `lambda >= 0` with `sum clamp(v - lambda, lo, hi) <= total`.
///
/// The clamped sum is piecewise linear and non-increasing in `lambda` with
/// breakpoints at `v - hi` and `v - lo`; the bracketing breakpoints are located
/// by bisection over the sorted list and the root is then solved for exactly.
/// The result is nudged upwards until the sum as evaluated meets the bound.
fn budget_shift_in(v: &[f64], lo: &[f64], hi: &[f64], total: f64) -> f64 {
    if shifted_sum(v, lo, hi, 0.0) <= total {
        return 0.0;
    }
    let mut points: Vec<f64> = v
        .iter()
        .zip(lo)
        .zip(hi)
        .flat_map(|((&v, &l), &h)| [v - h, v - l])
        .filter(|&b| b > 0.0)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    // first breakpoint at which the sum is within budget
    let (mut a, mut b) = (0usize, points.len() - 1);
    while a < b {
        let mid = (a + b) / 2;
        if shifted_sum(v, lo, hi, points[mid]) <= total {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let right = points[a];
    let left = if a == 0 { 0.0 } else { points[a - 1] };
    let at_left = shifted_sum(v, lo, hi, left);
    let at_right = shifted_sum(v, lo, hi, right);
    let mut lambda = if at_left > at_right {
        (left + (at_left - total) * (right - left) / (at_left - at_right)).clamp(left, right)
    } else {
        right
    };
    for _ in 0..8 {
        if shifted_sum(v, lo, hi, lambda) <= total {
            return lambda;
        }
        lambda = lambda.next_up();
    }
    // rounding keeps the interpolated root infeasible: bisect towards `right`
    let (mut below, mut above) = (lambda, right);
    loop {
        let mid = 0.5 * (below + above);
        if mid <= below || mid >= above {
            return above;
        }
        if shifted_sum(v, lo, hi, mid) <= total {
            above = mid;
        } else {
            below = mid;
        }
    }
}

/// Budget multiplier of the projection of `x` onto the box-plus-budget set.
pub(crate) fn budget_shift(x: &[f64], upper: &[f64], budget: f64) -> f64 {
    let zeros = vec![0.0; x.len()];
    budget_shift_in(x, &zeros, upper, budget)
}

/// Projection of `x` onto the box-plus-budget set.
pub(crate) fn project_box_budget(x: &[f64], upper: &[f64], budget: f64) -> Vec<f64> {
    let lambda = budget_shift(x, upper, budget);
    x.iter()
        .zip(upper)
        .map(|(&v, &u)| project_coordinate(v, lambda, u))
        .collect()
}

struct Cut<'a> {
    g: &'a [f64],
    lo: Vec<f64>,
    hi: Vec<f64>,
    room: f64,
    violation: f64,
}

impl Cut<'_> {
    /// `(lambda, <g, d> + violation)` for the displacement at `mu`. The value
    /// is lowered by a rounding allowance so that a cut which coincides with
    /// the budget face reads as satisfied on that face.
    fn value(&self, mu: f64) -> (f64, f64) {
        let moved: Vec<f64> = self.g.iter().map(|&g| -(mu * g)).collect();
        let lambda = budget_shift_in(&moved, &self.lo, &self.hi, self.room);
        let (inner, magnitude) = moved
            .iter()
            .zip(self.g)
            .zip(self.lo.iter().zip(&self.hi))
            .map(|((&m, &g), (&l, &h))| g * shift(m, lambda, l, h))
            .fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
        let allowance = 1e-12 * (self.violation.abs() + magnitude);
        (lambda, inner + self.violation - allowance)
    }
}

/// Multipliers `(lambda, mu)` of the projection of `x ∈ E` onto `E ∩ H`, where
/// `violation = <g, x - z> > 0` is how far `x` lies outside the half-space.
///
/// For fixed `mu` the displacement minimising `|d|^2 / 2 + mu <g, d>` over
/// `x + d ∈ E` is a budget-shifted clamp of `-mu g`, and the cut value is
/// non-increasing in `mu`. The root is bracketed by doubling from the
/// unconstrained step and refined by an Illinois-type secant iteration.
pub(crate) fn halfspace_shifts(x: &[f64], g: &[f64], violation: f64, upper: &[f64], budget: f64) -> (f64, f64) {
    let cut = Cut {
        g,
        lo: x.iter().map(|&v| -v).collect(),
        hi: x.iter().zip(upper).map(|(&v, &u)| u - v).collect(),
        room: budget - x.iter().sum::<f64>(),
        violation,
    };
    let start = cut.value(0.0);
    if start.1 <= 0.0 {
        return (start.0, 0.0);
    }
    let norm_sq: f64 = g.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return (start.0, 0.0);
    }

    let (mut lo, mut f_lo) = (0.0_f64, start.1);
    let mut hi = violation / norm_sq;
    let mut upper_end = cut.value(hi);
    let mut best = (upper_end.1, upper_end.0, hi);
    let mut doublings = 0;
    while upper_end.1 > 0.0 {
        // A cut that supports `E` at a face is only met in the limit, and for
        // huge `mu` rounding erodes the displacement: keep the lowest value.
        if doublings == MAX_DOUBLINGS || !(hi * 2.0).is_finite() {
            return (best.1, best.2);
        }
        (lo, f_lo) = (hi, upper_end.1);
        hi *= 2.0;
        upper_end = cut.value(hi);
        if upper_end.1 < best.0 {
            best = (upper_end.1, upper_end.0, hi);
        }
        doublings += 1;
    }
    let mut f_hi = upper_end.1;
    let accept = 1e-10 * violation;
    let mut side = 0i8;
    for _ in 0..MAX_SECANT_STEPS {
        if f_hi >= -accept {
            break;
        }
        let mut mid = lo + f_lo * (hi - lo) / (f_lo - f_hi);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
        }
        let probe = cut.value(mid);
        if probe.1 > 0.0 {
            (lo, f_lo) = (mid, probe.1);
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            (hi, f_hi, upper_end) = (mid, probe.1, probe);
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    (upper_end.0, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project_cut(x: &[f64], g: &[f64], beta: f64, upper: &[f64], budget: f64) -> Vec<f64> {
        let violation: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() - beta;
        let (lambda, mu) = halfspace_shifts(x, g, violation, upper, budget);
        (0..x.len())
            .map(|i| halfspace_coordinate(x[i], g[i], mu, lambda, upper[i]))
            .collect()
    }

    #[test]
    fn feasible_points_are_fixed() {
        let upper = [10.0, 20.0, 5.0];
        let x = [3.0, 7.5, 5.0];
        assert_eq!(project_box_budget(&x, &upper, 100.0), x.to_vec());
        assert_eq!(project_box_budget(&x, &upper, 15.5), x.to_vec());
    }

    #[test]
    fn box_clamp_when_budget_is_slack() {
        let upper = [10.0, 20.0, 30.0];
        let x = [15.0, 25.0, 35.0];
        assert_eq!(project_box_budget(&x, &upper, 1000.0), upper.to_vec());
    }

    #[test]
    fn budget_binding_splits_evenly() {
        let y = project_box_budget(&[10.0, 10.0], &[10.0, 10.0], 10.0);
        assert_eq!(y, vec![5.0, 5.0]);
    }

    #[test]
    fn budget_shift_is_exact_across_breakpoints() {
        let x = [12.0, 3.0, 7.0, -2.0];
        let upper = [10.0, 10.0, 5.0, 10.0];
        let y = project_box_budget(&x, &upper, 9.0);
        assert!(y.iter().sum::<f64>() <= 9.0);
        assert!((y.iter().sum::<f64>() - 9.0).abs() < 1e-12);
        assert_eq!(y, vec![7.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn halfspace_inactive_leaves_point() {
        let upper = [10.0, 10.0];
        let x = [4.0, 4.0];
        let (lambda, mu) = halfspace_shifts(&x, &[1.0, 1.0], -92.0, &upper, 10.0);
        assert_eq!((lambda, mu), (0.0, 0.0));
    }

    #[test]
    fn halfspace_cut_is_respected() {
        // y_0 <= 3
        let y = project_cut(&[6.0, 2.0], &[1.0, 0.0], 3.0, &[10.0, 10.0], 10.0);
        assert!((y[0] - 3.0).abs() < 1e-9 && y[0] <= 3.0 + 1e-12);
        assert_eq!(y[1], 2.0);
    }

    #[test]
    fn cut_parallel_to_budget_face() {
        // sum y >= 10 together with sum y <= 10
        let y = project_cut(&[6.0, 2.0], &[-1.0, -1.0], -10.0, &[10.0, 10.0], 10.0);
        assert!((y[0] - 7.0).abs() < 1e-6 && (y[1] - 3.0).abs() < 1e-6, "{y:?}");
    }

    #[test]
    fn tiny_violation_is_resolved() {
        let x = [400.0, 300.0];
        let g = [-80.0, -80.0 + 1e-7];
        let (lambda, mu) = halfspace_shifts(&x, &g, 1e-12, &[500.0, 500.0], 700.0);
        assert!(mu > 0.0);
        let y: Vec<f64> = (0..2)
            .map(|i| halfspace_coordinate(x[i], g[i], mu, lambda, 500.0))
            .collect();
        assert!(y.iter().sum::<f64>() <= 700.0 + 1e-9);
    }
}
