//! Dormand–Prince 5(4) integrator with PI step-size control and the
//! classical fourth-order continuous extension.
//!
//! The state is a fixed-size array, so a whole integration runs without
//! allocating. Accepted steps are handed to an observer, which can sample the
//! dense interpolant and stop the integration early.

use core::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::math;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th- and 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options<const N: usize> {
    pub rel_tol: f64,
    /// Per-component absolute tolerance.
    pub abs_tol: [f64; N],
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl<const N: usize> Options<N> {
    pub fn new(rel_tol: f64, abs_tol: [f64; N]) -> Self {
        Options {
            rel_tol,
            abs_tol,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step, with the coefficients of its dense interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    /// Interpolated state at `t ∈ [t0, t1]`.
    pub fn dense(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        core::array::from_fn(|i| {
            c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Solution<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// True when the observer stopped the integration before `t_end`.
    pub stopped: bool,
    pub stats: Stats,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    core::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    opts: &Options<N>,
) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let sc = opts.abs_tol[i] + opts.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        sum += r * r;
    }
    math::sqrt(sum / N as f64)
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` (which may lie before
/// `t0`).
///
/// `observer` sees every accepted step in order and may return
/// `ControlFlow::Break` to stop; the returned solution then holds the end of
/// that step.
pub fn integrate<const N: usize, F, O>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Options<N>,
    observer: O,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(&Step<N>) -> ControlFlow<()>,
{
    integrate_capped(f, t0, y0, t_end, opts, |_| f64::INFINITY, observer)
}

/// As [`integrate`], with `cap(y)` bounding the step taken from state `y`.
pub fn integrate_capped<const N: usize, F, C, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Options<N>,
    mut cap: C,
    mut observer: O,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    C: FnMut(&[f64; N]) -> f64,
    O: FnMut(&Step<N>) -> ControlFlow<()>,
{
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const ALPHA: f64 = 0.2 - 0.75 * BETA;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    if t == t_end {
        return Ok(Solution { t, y, stopped: false, stats });
    }

    let mut k1 = f(t, &y)?;
    stats.evaluations += 1;

    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => initial_step(&mut f, t, &y, &k1, dir, opts, &mut stats)?,
    };
    h = h.min(opts.max_step).min((t_end - t).abs());

    let mut err_old: f64 = 1.0e-4;
    let mut rejected_last = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepLimit { t, max_steps: opts.max_steps });
        }
        h = h.min(cap(&y));
        let remaining = (t_end - t).abs();
        let mut last = false;
        // absorb a round-off sliver into the final step
        if h >= remaining * (1.0 - 1e-9) {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1e-300) || !h.is_finite() {
            return Err(Error::StepFailure { t, step: h });
        }
        let hs = dir * h;

        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t_end } else { t + hs };
        let k7 = f(t_new, &y_new)?;
        stats.evaluations += 6;

        let err_vec: [f64; N] = core::array::from_fn(|i| {
            hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err = error_norm(&err_vec, &y, &y_new, opts);

        if err <= 1.0 {
            stats.accepted += 1;
            let cont = {
                let c0 = y;
                let c1: [f64; N] = core::array::from_fn(|i| y_new[i] - y[i]);
                let c2: [f64; N] = core::array::from_fn(|i| hs * k1[i] - c1[i]);
                let c3: [f64; N] = core::array::from_fn(|i| c1[i] - hs * k7[i] - c2[i]);
                let c4: [f64; N] = core::array::from_fn(|i| {
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                });
                [c0, c1, c2, c3, c4]
            };
            let step = Step { t0: t, t1: t_new, y0: y, y1: y_new, cont };
            t = t_new;
            y = y_new;
            k1 = k7;

            if observer(&step).is_break() {
                return Ok(Solution { t, y, stopped: true, stats });
            }
            if last {
                return Ok(Solution { t, y, stopped: false, stats });
            }

            let err_c = err.max(1e-10);
            let mut fac = SAFETY * math::powf(err_c, -ALPHA) * math::powf(err_old, BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_old = err_c;
            rejected_last = false;
            h = (h * fac).min(opts.max_step);
        } else {
            stats.rejected += 1;
            rejected_last = true;
            let fac = (SAFETY * math::powf(err, -0.2)).max(FAC_MIN);
            h *= fac;
        }
    }
}

/// Starting step from the Hairer–Nørsett–Wanner heuristic.
fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    dy: &[f64; N],
    dir: f64,
    opts: &Options<N>,
    stats: &mut Stats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let scale: [f64; N] = core::array::from_fn(|i| opts.abs_tol[i] + opts.rel_tol * y[i].abs());
    let rms = |v: &[f64; N]| {
        let mut s = 0.0;
        for i in 0..N {
            let r = v[i] / scale[i];
            s += r * r;
        }
        math::sqrt(s / N as f64)
    };
    let d0 = rms(y);
    let d1 = rms(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: [f64; N] = core::array::from_fn(|i| y[i] + dir * h0 * dy[i]);
    let dy1 = f(t + dir * h0, &y1)?;
    stats.evaluations += 1;
    let diff: [f64; N] = core::array::from_fn(|i| dy1[i] - dy[i]);
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        math::powf(0.01 / d1.max(d2), 0.2)
    };
    Ok((100.0 * h0).min(h1).min(opts.max_step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn run<F>(f: F, y0: [f64; 2], t_end: f64, tol: f64) -> (Solution<2>, Vec<Step<2>>)
    where
        F: FnMut(f64, &[f64; 2]) -> Result<[f64; 2]>,
    {
        let mut steps = Vec::new();
        let opts = Options::new(tol, [tol; 2]);
        let sol = integrate(f, 0.0, y0, t_end, &opts, |s| {
            steps.push(*s);
            ControlFlow::Continue(())
        })
        .unwrap();
        (sol, steps)
    }

    fn oscillator(_t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn harmonic_oscillator_endpoint() {
        let t_end = 10.0;
        let (sol, _) = run(oscillator, [1.0, 0.0], t_end, 1e-10);
        assert_eq!(sol.t, t_end);
        assert!((sol.y[0] - math::cos(t_end)).abs() < 1e-8);
        assert!((sol.y[1] + math::sin(t_end)).abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        let (sol, _) = run(oscillator, [1.0, 0.0], -3.0, 1e-10);
        assert_eq!(sol.t, -3.0);
        assert!((sol.y[0] - math::cos(3.0)).abs() < 1e-8);
        assert!((sol.y[1] - math::sin(3.0)).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_fourth_order() {
        // error of the interpolant inside a step should fall ~h⁵ with the step
        let mut errs = Vec::new();
        for h in [0.2, 0.1] {
            let opts = Options {
                initial_step: Some(h),
                max_step: h,
                ..Options::new(1.0, [1.0; 2])
            };
            let mut worst: f64 = 0.0;
            integrate(oscillator, 0.0, [1.0, 0.0], 2.0, &opts, |s| {
                for j in 1..10 {
                    let t = s.t0 + (s.t1 - s.t0) * j as f64 / 10.0;
                    let y = s.dense(t);
                    worst = worst.max((y[0] - math::cos(t)).abs());
                }
                ControlFlow::Continue(())
            })
            .unwrap();
            errs.push(worst);
        }
        let order = math::ln(errs[0] / errs[1]) / math::ln(2.0);
        assert!(errs[0] < 1e-5, "{errs:?}");
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn dense_output_matches_endpoints() {
        let (_, steps) = run(oscillator, [1.0, 0.0], 5.0, 1e-9);
        for s in &steps {
            let a = s.dense(s.t0);
            let b = s.dense(s.t1);
            for i in 0..2 {
                assert!((a[i] - s.y0[i]).abs() < 1e-14);
                assert!((b[i] - s.y1[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tighter_tolerance_takes_more_steps() {
        let (a, _) = run(oscillator, [1.0, 0.0], 20.0, 1e-6);
        let (b, _) = run(oscillator, [1.0, 0.0], 20.0, 1e-11);
        assert!(b.stats.accepted > a.stats.accepted);
        assert!((b.y[0] - math::cos(20.0)).abs() < 1e-8);
    }

    #[test]
    fn observer_can_stop() {
        let mut n = 0;
        let opts = Options::new(1e-8, [1e-8; 2]);
        let sol = integrate(oscillator, 0.0, [1.0, 0.0], 100.0, &opts, |s| {
            n += 1;
            if s.y1[0] < 0.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert!(sol.stopped);
        assert!(sol.t < 3.0 && sol.t > 1.0);
        assert_eq!(n, sol.stats.accepted);
    }

    #[test]
    fn rhs_errors_propagate() {
        let opts = Options::new(1e-8, [1e-8; 2]);
        let r = integrate(
            |t, y: &[f64; 2]| {
                if t > 0.5 {
                    Err(Error::NearResonance { detuning: 0.0, guard_band: 1.0 })
                } else {
                    Ok([y[1], -y[0]])
                }
            },
            0.0,
            [1.0, 0.0],
            1.0,
            &opts,
            |_| ControlFlow::Continue(()),
        );
        assert!(matches!(r, Err(Error::NearResonance { .. })));
    }

    #[test]
    fn singular_rhs_reports_step_failure() {
        // y' = 1/(1 − t) blows up at t = 1
        let opts = Options::new(1e-10, [1e-10; 1]);
        let r = integrate(
            |t, _y: &[f64; 1]| Ok([1.0 / (1.0 - t) / (1.0 - t)]),
            0.0,
            [0.0],
            2.0,
            &opts,
            |_| ControlFlow::Continue(()),
        );
        assert!(matches!(r, Err(Error::StepFailure { .. }) | Err(Error::StepLimit { .. })));
    }
}
