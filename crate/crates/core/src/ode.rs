//! Adaptive Dormand–Prince 5(4) integrator for complex matrix-valued ODEs.
//!
//! The state is any fixed-size `nalgebra` matrix of `Complex64`, so the same
//! stepper drives vectors (means), 6×6 propagators and 6×6 second moments.
//! Integration may run forward or backward in time.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative/absolute tolerance pair and the hard step-size cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64, h_max: f64) -> Self {
        StepControl {
            rtol,
            atol,
            h_max,
            max_steps: 500_000_000,
        }
    }
}

// Butcher tableau.
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

// Difference between 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

type State<const R: usize, const C: usize> = SMatrix<Complex64, R, C>;

#[inline]
fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn error_norm<const R: usize, const C: usize>(
    err: &State<R, C>,
    y0: &State<R, C>,
    y1: &State<R, C>,
    ctl: &StepControl,
) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let sc = ctl.atol + ctl.rtol * a.norm().max(b.norm());
        let r = e.norm() / sc;
        acc += r * r;
    }
    (acc / (R * C) as f64).sqrt()
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end`, landing exactly on each
/// of `stops` (which must be ordered in the direction of integration and lie
/// within the interval) and invoking `observe` there.
///
/// `t_end` itself is always a landing point; it is reported to `observe` only
/// if it also appears in `stops`.
pub fn integrate<const R: usize, const C: usize, F, O>(
    f: F,
    t0: f64,
    y0: State<R, C>,
    t_end: f64,
    stops: &[f64],
    ctl: &StepControl,
    mut observe: O,
) -> Result<State<R, C>>
where
    F: Fn(f64, &State<R, C>) -> State<R, C>,
    O: FnMut(f64, &State<R, C>) -> Result<()>,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut stop_iter = stops.iter().copied().peekable();

    // Observations requested at the start point.
    while let Some(&s) = stop_iter.peek() {
        if (s - t0) * dir <= 0.0 {
            observe(t0, &y)?;
            stop_iter.next();
        } else {
            break;
        }
    }
    if span == 0.0 {
        return Ok(y);
    }

    let mut h = (0.01 * span).min(ctl.h_max).min(1e-2);
    let mut k1 = f(t, &y);
    let mut steps: u64 = 0;

    loop {
        let target = stop_iter.peek().copied().unwrap_or(t_end);
        let remaining = (target - t) * dir;
        if remaining <= 0.0 {
            if stop_iter.peek().is_some() {
                observe(t, &y)?;
                stop_iter.next();
                continue;
            }
            return Ok(y);
        }

        let clipped = h >= remaining;
        let step = if clipped { remaining } else { h };
        let hs = step * dir;

        let k2 = f(t + C2 * hs, &(y + k1 * Complex64::from(hs * A21)));
        let k3 = f(
            t + C3 * hs,
            &(y + (k1 * re(A31) + k2 * re(A32)) * Complex64::from(hs)),
        );
        let k4 = f(
            t + C4 * hs,
            &(y + (k1 * re(A41) + k2 * re(A42) + k3 * re(A43)) * Complex64::from(hs)),
        );
        let k5 = f(
            t + C5 * hs,
            &(y + (k1 * re(A51) + k2 * re(A52) + k3 * re(A53) + k4 * re(A54)) * Complex64::from(hs)),
        );
        let k6 = f(
            t + hs,
            &(y + (k1 * re(A61) + k2 * re(A62) + k3 * re(A63) + k4 * re(A64) + k5 * re(A65)) * Complex64::from(hs)),
        );
        let y_new = y + (k1 * re(A71) + k3 * re(A73) + k4 * re(A74) + k5 * re(A75) + k6 * re(A76)) * Complex64::from(hs);
        let t_new = if clipped { target } else { t + hs };
        let k7 = f(t_new, &y_new);
        let err = (k1 * re(E1) + k3 * re(E3) + k4 * re(E4) + k5 * re(E5) + k6 * re(E6) + k7 * re(E7)) * Complex64::from(hs);

        let en = error_norm(&err, &y, &y_new, ctl);
        let fac = if en == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * en.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };

        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::StepSizeUnderflow { t, h: step });
        }

        if en <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            // A step shortened only to land on a stop must not shrink the
            // next proposal.
            let proposal = step * fac;
            h = (if clipped { h.max(proposal) } else { proposal }).min(ctl.h_max);
        } else {
            h = (step * fac.min(1.0)).min(ctl.h_max);
            if h <= 1e-13 * t.abs().max(1.0) || !h.is_finite() {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
    }
}
