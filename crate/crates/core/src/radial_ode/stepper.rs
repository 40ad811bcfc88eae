//! Dormand-Prince 5(4) integrator with embedded error control.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    /// Relative tolerance per component.
    pub rtol: f64,
    /// Components are measured against `rtol·(|y_i| + floor·‖y‖_∞)`.
    pub floor: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { rtol: 1e-12, floor: 1e-3, max_steps: 1_000_000 }
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

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction), starting
/// with step magnitude `h_guess`. Returns the final state and the last
/// accepted step magnitude.
pub fn integrate<F>(f: &F, t0: f64, y0: &DVector<f64>, t1: f64, h_guess: f64, ctl: &StepControl) -> Result<(DVector<f64>, f64)>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok((y0.clone(), h_guess));
    }
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = h_guess.abs().min(span).max(span * 1e-12);
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    let mut k1 = f(t, &y);
    let mut last_h = h;
    for _ in 0..ctl.max_steps {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            return Ok((y, last_h));
        }
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        k.clear();
        k.push(k1.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys.axpy(dir * step * A[s][j], kj, 1.0);
                }
            }
            k.push(f(t + dir * step * C[s], &ys));
        }
        let mut y5 = y.clone();
        let mut err = DVector::zeros(y.len());
        for s in 0..7 {
            if B5[s] != 0.0 {
                y5.axpy(dir * step * B5[s], &k[s], 1.0);
            }
            err.axpy(dir * step * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let scale_all = y.amax().max(y5.amax());
        let mut en = 0.0f64;
        for i in 0..y.len() {
            let sc = ctl.rtol * (y[i].abs().max(y5[i].abs()) + ctl.floor * scale_all);
            let r = if sc > 0.0 { err[i].abs() / sc } else { 0.0 };
            en = en.max(r);
        }
        if !en.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite state".into() });
        }
        if en <= 1.0 {
            t = if last { t1 } else { t + dir * step };
            y = y5;
            k1 = k[6].clone();
            last_h = step;
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < 1e-14 * t.abs().max(span) {
            return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
        }
    }
    Err(Error::Integration { t, reason: format!("exceeded {} steps", ctl.max_steps) })
}
