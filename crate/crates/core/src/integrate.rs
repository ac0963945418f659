//! Adaptive Dormand–Prince 5(4) integration with an optional projection hook
//! applied after every accepted step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the 5th-order solution and the
/// embedded error estimate.
fn dp_step<F>(rhs: &mut F, t: f64, y: &[f64], h: f64, k: &mut [Vec<f64>; 7]) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let mut tmp = vec![0.0; n];
    rhs(t, y, &mut k[0])?;
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        rhs(t + C[s] * h, &tmp, &mut k[s])?;
    }
    let mut y5 = vec![0.0; n];
    let mut err = vec![0.0; n];
    for i in 0..n {
        let mut s5 = 0.0;
        let mut s4 = 0.0;
        for s in 0..7 {
            s5 += B5[s] * k[s][i];
            s4 += B4[s] * k[s][i];
        }
        y5[i] = y[i] + h * s5;
        err[i] = h * (s5 - s4);
    }
    Ok((y5, err))
}

/// Single fixed step of size `h` (negative allowed), 5th order accurate.
pub fn fixed_step<F>(mut rhs: F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; y.len()]);
    Ok(dp_step(&mut rhs, t, y, h, &mut k)?.0)
}

/// Adaptive integrator that remembers its step size between calls, so a
/// trajectory sampled on a grid is integrated as one continuous run.
pub struct Integrator {
    pub opts: IntegratorOptions,
    h: Option<f64>,
    pub steps: usize,
}

impl Integrator {
    pub fn new(opts: IntegratorOptions) -> Self {
        Integrator {
            opts,
            h: None,
            steps: 0,
        }
    }

    /// Advance `y` from `t0` to `t1`; `project` runs after each accepted step.
    pub fn run<F, P>(&mut self, mut rhs: F, mut project: P, t0: f64, y: &mut Vec<f64>, t1: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
        P: FnMut(&mut [f64]),
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let o = self.opts;
        let mut h = self.h.unwrap_or_else(|| (0.01 * span.abs()).min(o.max_step).max(1e-6));
        let mut t = t0;
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; y.len()]);
        let mut count = 0usize;
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-15 * t1.abs().max(1.0) {
                break;
            }
            h = h.min(o.max_step);
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let (ynew, err) = dp_step(&mut rhs, t, y, dir * step, &mut k)?;
            let mut sum = 0.0;
            for i in 0..y.len() {
                let sc = o.abs_tol + o.rel_tol * y[i].abs().max(ynew[i].abs());
                sum += (err[i] / sc).powi(2);
            }
            let e = (sum / y.len() as f64).sqrt();
            if !e.is_finite() {
                return Err(Error::Integration {
                    t,
                    msg: "non-finite state".into(),
                });
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                *y = ynew;
                project(y);
                t = if last { t1 } else { t + dir * step };
                if !last {
                    h = step * factor;
                }
                count += 1;
                self.steps += 1;
                if count > o.max_steps {
                    return Err(Error::Integration {
                        t,
                        msg: "too many steps".into(),
                    });
                }
            } else {
                h = step * factor.min(1.0);
                if h < o.min_step {
                    return Err(Error::Integration {
                        t,
                        msg: "step size underflow".into(),
                    });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut it = Integrator::new(IntegratorOptions::default());
        let mut y = vec![1.0];
        it.run(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            |_| {},
            0.0,
            &mut y,
            2.0,
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let mut it = Integrator::new(IntegratorOptions::default());
        let mut y = vec![1.0, 0.0];
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        it.run(rhs, |_| {}, 0.0, &mut y, -1.3).unwrap();
        assert!((y[0] - 1.3f64.cos()).abs() < 1e-10);
        assert!((y[1] - 1.3f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn zero_span_is_identity() {
        let mut it = Integrator::new(IntegratorOptions::default());
        let mut y = vec![0.25, -3.0];
        it.run(
            |_, _, dy| {
                dy.fill(1.0);
                Ok(())
            },
            |_| {},
            1.0,
            &mut y,
            1.0,
        )
        .unwrap();
        assert_eq!(y, vec![0.25, -3.0]);
    }

    #[test]
    fn blow_up_reports_failure() {
        let mut it = Integrator::new(IntegratorOptions::default());
        let mut y = vec![1.0];
        let r = it.run(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            |_| {},
            0.0,
            &mut y,
            2.0,
        );
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0];
            Ok(())
        };
        let e1 = (fixed_step(rhs, 0.0, &[1.0], 0.1).unwrap()[0] - 0.1f64.exp()).abs();
        let e2 = (fixed_step(rhs, 0.0, &[1.0], 0.05).unwrap()[0] - 0.05f64.exp()).abs();
        // local error O(h^6)
        assert!(e1 / e2 > 40.0, "ratio {}", e1 / e2);
    }
}
