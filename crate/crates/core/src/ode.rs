//! Adaptive Dormand-Prince 5(4) integrator for small first-order systems.

use crate::{Error, Result};

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
// 5th order weights equal the last row of A (FSAL); these are the 4th order ones
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step as a fraction of the interval.
    pub initial_step: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, max_steps: 100_000, initial_step: 1e-3 }
    }
}

/// Integrate `y' = f(x, y)` from `x0` to `x1`, calling `observe` after every
/// accepted step (and once at `x0`). Returns the state at `x1`.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut observe: impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N]> {
    let span = x1 - x0;
    if span == 0.0 {
        observe(x0, &y0);
        return Ok(y0);
    }
    let dir = span.signum();
    let mut h = opts.initial_step * span.abs();
    let mut x = x0;
    let mut y = y0;
    observe(x, &y);
    let mut k = [[0.0; N]; 7];
    k[0] = f(x, &y);

    for _ in 0..opts.max_steps {
        if (x1 - x) * dir <= 0.0 {
            return Ok(y);
        }
        let last = h >= (x1 - x).abs();
        if last {
            h = (x1 - x).abs();
        }
        let step = dir * h;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                *v += step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(x + C[s] * step, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let incr5: f64 = (0..6).map(|j| A[6][j] * k[j][i]).sum();
            let incr4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
            y5[i] += step * incr5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((step * (incr5 - incr4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integrator(format!("non-finite state near x = {x}")));
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + step };
            y = y5;
            k[0] = k[6];
            observe(x, &y);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * span.abs() {
            return Err(Error::Integrator(format!("step size underflow near x = {x}")));
        }
    }
    Err(Error::Integrator(format!("step budget of {} exhausted", opts.max_steps)))
}
