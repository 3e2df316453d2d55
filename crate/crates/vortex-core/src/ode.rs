//! Embedded Dormand-Prince 5(4) stepper with adaptive error control.
//!
//! Fifth-order propagation with a fourth-order embedded estimate driving the
//! step size.  The state is a fixed-size array so the hot loop stays
//! allocation-free.

use crate::error::Error;
use crate::Result;

/// Step-size control parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Initial step; when absent a fixed fraction of the span is used.
    pub h_init: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1e-2,
            h_init: None,
        }
    }
}

/// Where an integration ended up.
#[derive(Debug, Clone, Copy)]
pub enum Outcome<const N: usize> {
    /// Reached `t1`.
    Completed { y: [f64; N] },
    /// The accept callback requested a halt.
    Halted { t: f64, y: [f64; N] },
}

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

// Dormand-Prince tableau.
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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = rhs(t, y)` from `t0` to `t1 > t0`.
///
/// `on_accept` runs after every accepted step; returning `false` halts the
/// integration at that step (used for domain-exit detection).
pub fn integrate<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    ctrl: &StepControl,
    mut on_accept: impl FnMut(f64, &[f64; N]) -> bool,
) -> Result<Outcome<N>> {
    if !(t1 > t0) {
        return Err(Error::Invalid(format!(
            "integration span [{t0}, {t1}] must be forward"
        )));
    }
    if !(ctrl.rtol > 0.0 && ctrl.atol > 0.0 && ctrl.max_step > 0.0) {
        return Err(Error::Invalid(
            "tolerances and max step must be positive".into(),
        ));
    }

    let span = t1 - t0;
    let h_floor = 1e-14 * span.max(t0.abs()).max(t1.abs()).max(1.0);
    let mut h = ctrl
        .h_init
        .unwrap_or(span / 128.0)
        .min(ctrl.max_step)
        .min(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);

    loop {
        let last = h >= t1 - t;
        if last {
            h = t1 - t;
        }

        let mut y2 = [0.0; N];
        for i in 0..N {
            y2[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = rhs(t + C2 * h, &y2);
        let mut y3 = [0.0; N];
        for i in 0..N {
            y3[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = rhs(t + C3 * h, &y3);
        let mut y4 = [0.0; N];
        for i in 0..N {
            y4[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = rhs(t + C4 * h, &y4);
        let mut y5 = [0.0; N];
        for i in 0..N {
            y5[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = rhs(t + C5 * h, &y5);
        let mut y6 = [0.0; N];
        for i in 0..N {
            y6[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = rhs(t + h, &y6);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let t_new = if last { t1 } else { t + h };
        let k7 = rhs(t_new, &y_new);

        let mut err_sq = 0.0;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / N as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            if !on_accept(t, &y) {
                return Ok(Outcome::Halted { t, y });
            }
            if last {
                return Ok(Outcome::Completed { y });
            }
            let scale = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
            };
            h = (h * scale).min(ctrl.max_step);
        } else {
            let scale = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0)
            } else {
                0.25
            };
            h *= scale;
            if h < h_floor {
                return Err(Error::StepFailure { t });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let ctrl = StepControl {
            max_step: 0.2,
            ..StepControl::default()
        };
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            1.0,
            [1.0],
            &ctrl,
            |_, _| true,
        )
        .unwrap();
        match out {
            Outcome::Completed { y } => {
                assert_relative_eq!(y[0], std::f64::consts::E, max_relative = 1e-9)
            }
            _ => panic!("expected completion"),
        }
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let ctrl = StepControl {
            max_step: 0.05,
            ..StepControl::default()
        };
        let out = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            std::f64::consts::TAU,
            [1.0, 0.0],
            &ctrl,
            |_, _| true,
        )
        .unwrap();
        match out {
            Outcome::Completed { y } => {
                assert_relative_eq!(y[0], 1.0, max_relative = 1e-9);
                assert!(y[1].abs() < 1e-9);
            }
            _ => panic!("expected completion"),
        }
    }

    #[test]
    fn blow_up_reports_step_failure() {
        // y' = y² from y(0) = 2 blows up at t = 0.5.
        let ctrl = StepControl::default();
        let res = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            1.0,
            [2.0],
            &ctrl,
            |_, _| true,
        );
        assert!(matches!(res, Err(Error::StepFailure { t }) if (t - 0.5).abs() < 1e-3));
    }

    #[test]
    fn halt_callback_stops_early() {
        let ctrl = StepControl {
            max_step: 0.01,
            ..StepControl::default()
        };
        let out = integrate(
            |_, _: &[f64; 1]| [1.0],
            0.0,
            1.0,
            [0.0],
            &ctrl,
            |_, y| y[0] < 0.5,
        )
        .unwrap();
        match out {
            Outcome::Halted { t, .. } => assert!((0.5..0.53).contains(&t)),
            _ => panic!("expected halt"),
        }
    }

    #[test]
    fn accepted_times_are_monotone() {
        let ctrl = StepControl::default();
        let mut prev = 0.0;
        integrate(
            |t, _: &[f64; 1]| [(10.0 * t).sin()],
            0.0,
            1.0,
            [0.0],
            &ctrl,
            |t, _| {
                assert!(t > prev);
                prev = t;
                true
            },
        )
        .unwrap();
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn rejects_backward_span() {
        let ctrl = StepControl::default();
        assert!(integrate(|_, _: &[f64; 1]| [0.0], 1.0, 0.0, [0.0], &ctrl, |_, _| true).is_err());
    }
}
