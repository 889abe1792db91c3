//! Adaptive Dormand–Prince 5(4) integrator for small real systems.
//!
//! The state is a fixed-size array so trajectories stay on the stack; the
//! classical ensemble and the Mathieu solver both run through this.

use crate::error::{Error, Result};

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

// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrator state. The step size carries over between calls, so a long
/// run split into sampling intervals does not restart from a tiny step.
#[derive(Debug, Clone)]
pub struct Dopri5<const D: usize> {
    tol: Tolerance,
    h: f64,
    h_min: f64,
    pub stats: Stats,
}

impl<const D: usize> Dopri5<D> {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            h: 0.0,
            h_min: 1e-14,
            stats: Stats::default(),
        }
    }

    pub fn with_min_step(mut self, h_min: f64) -> Self {
        self.h_min = h_min;
        self
    }

    fn error_norm(&self, y: &[f64; D], y_new: &[f64; D], err: &[f64; D]) -> f64 {
        let mut acc = 0.0;
        for i in 0..D {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            let e = err[i] / sc;
            acc += e * e;
        }
        (acc / D as f64).sqrt()
    }

    /// Advances `y` from `t0` to `t1` (either direction). The final step is
    /// clamped so the integration ends exactly on `t1`.
    pub fn integrate<F>(&mut self, f: F, t0: f64, t1: f64, y: &mut [f64; D]) -> Result<()>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        self.integrate_projected(f, |_| false, t0, t1, y)
    }

    /// As [`integrate`](Self::integrate), with `project` applied to every
    /// accepted state. It returns whether it moved the state, in which case
    /// the first stage of the next step is re-evaluated.
    pub fn integrate_projected<F, P>(&mut self, mut f: F, mut project: P, t0: f64, t1: f64, y: &mut [f64; D]) -> Result<()>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
        P: FnMut(&mut [f64; D]) -> bool,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        if self.h == 0.0 {
            self.h = (span.abs() * 1e-3).min(1e-2);
        }
        let mut t = t0;
        let mut k1 = f(t, y);
        self.stats.evaluations += 1;

        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 0.0 {
                break;
            }
            let clamped = self.h >= remaining;
            let h = dir * if clamped { remaining } else { self.h };

            let mut tmp = [0.0; D];
            for i in 0..D {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = f(t + C2 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = f(t + C3 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = f(t + C4 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = f(t + C5 * h, &tmp);
            for i in 0..D {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = f(t + h, &tmp);
            let mut y_new = [0.0; D];
            for i in 0..D {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let k7 = f(t + h, &y_new);
            self.stats.evaluations += 6;

            let mut err = [0.0; D];
            for i in 0..D {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
            }
            let en = self.error_norm(y, &y_new, &err);
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };

            if en <= 1.0 {
                self.stats.accepted += 1;
                t = if clamped { t1 } else { t + h };
                *y = y_new;
                if project(y) {
                    k1 = f(t, y);
                    self.stats.evaluations += 1;
                } else {
                    k1 = k7;
                }
                // a clamped step says nothing about the natural step size
                if !clamped || factor < 1.0 {
                    self.h = h.abs() * factor;
                }
            } else {
                self.stats.rejected += 1;
                self.h = h.abs() * factor.min(1.0);
                if self.h < self.h_min {
                    return Err(Error::StepUnderflow {
                        t,
                        dt: self.h,
                        dt_min: self.h_min,
                        error: en,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let mut ode = Dopri5::<2>::new(Tolerance::new(1e-11, 1e-13));
        let mut y = [1.0, 0.0];
        ode.integrate(|_, y| [y[1], -y[0]], 0.0, 10.0, &mut y).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn projection_keeps_the_radius_of_a_rotation() {
        let rot = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut plain = [1.0, 0.0];
        Dopri5::<2>::new(Tolerance::new(1e-6, 1e-9))
            .integrate(rot, 0.0, 1000.0, &mut plain)
            .unwrap();
        let mut ode = Dopri5::<2>::new(Tolerance::new(1e-6, 1e-9));
        let mut y = [1.0, 0.0];
        ode.integrate_projected(
            rot,
            |y| {
                let r = y[0].hypot(y[1]);
                y[0] /= r;
                y[1] /= r;
                true
            },
            0.0,
            1000.0,
            &mut y,
        )
        .unwrap();
        assert!((plain[0].hypot(plain[1]) - 1.0).abs() > 1e-6);
        assert!((y[0].hypot(y[1]) - 1.0).abs() < 1e-14);
        assert!((y[0] - 1000f64.cos()).abs() < 1e-2);
    }

    #[test]
    fn backward_integration_returns_to_start() {
        let mut ode = Dopri5::<2>::new(Tolerance::new(1e-12, 1e-14));
        let mut y = [0.3, -0.7];
        let f = |t: f64, y: &[f64; 2]| [y[1], -(1.0 + 0.5 * t.cos()) * y[0]];
        ode.integrate(f, 0.0, 5.0, &mut y).unwrap();
        ode.integrate(f, 5.0, 0.0, &mut y).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-9 && (y[1] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn zero_interval_is_identity() {
        let mut ode = Dopri5::<1>::new(Tolerance::new(1e-9, 1e-12));
        let mut y = [2.5];
        ode.integrate(|_, y| [y[0]], 1.0, 1.0, &mut y).unwrap();
        assert_eq!(y, [2.5]);
        assert_eq!(ode.stats.evaluations, 0);
    }
}
