//! Fixed-step RK4 and adaptive Dormand-Prince 4(5) integration.
//!
//! The right-hand side signature is `f(t, x, dx)` writing the derivative into
//! `dx`. Controls are bound into the closure by the caller (zero-order hold
//! between controller samples).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}: required step {h} below minimum")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {0}")]
    NonFiniteState(f64),
}

/// One classical RK4 step of size `h` from `(t, x)`, writing the result into `x`.
pub fn rk4_step(f: &dyn Fn(f64, &[f64], &mut [f64]), t: f64, x: &mut [f64], h: f64) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate over `[t0, t0 + duration]` with `steps` fixed RK4 steps.
pub fn rk4_integrate(
    f: &dyn Fn(f64, &[f64], &mut [f64]),
    t0: f64,
    x0: &[f64],
    duration: f64,
    steps: usize,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let h = duration / steps as f64;
    for k in 0..steps {
        rk4_step(f, t0 + k as f64 * h, &mut x, h);
    }
    x
}

// Dormand-Prince 5(4) coefficients (the ode45 pair).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of `x` over `[t0, t0 + duration]`.
///
/// Error per step is controlled to `atol + rtol·|x|` componentwise (RMS norm).
/// Returns the final state.
pub fn rk45_integrate(
    f: &dyn Fn(f64, &[f64], &mut [f64]),
    t0: f64,
    x0: &[f64],
    duration: f64,
    atol: f64,
    rtol: f64,
) -> Result<Vec<f64>, IntegrationError> {
    if duration == 0.0 {
        return Ok(x0.to_vec());
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut t = t0;
    let t_end = t0 + duration;
    let mut h = duration / 10.0;
    let h_min = duration.abs() * 1e-14;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut x5 = vec![0.0; n];

    let mut steps = 0usize;
    while t < t_end {
        if steps > 1_000_000 {
            return Err(IntegrationError::StepSizeUnderflow { t, h });
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        for s in 0..7 {
            for i in 0..n {
                tmp[i] = x[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    tmp[i] += h * A[s][j] * kj[i];
                }
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &tmp, &mut tail[0]);
        }
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut y5 = x[i];
            let mut y4 = x[i];
            for s in 0..7 {
                y5 += h * B5[s] * k[s][i];
                y4 += h * B4[s] * k[s][i];
            }
            x5[i] = y5;
            let scale = atol + rtol * x[i].abs().max(y5.abs());
            let e = (y5 - y4) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            return Err(IntegrationError::NonFiniteState(t));
        }
        if err <= 1.0 {
            t += h;
            x.copy_from_slice(&x5);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(IntegrationError::NonFiniteState(t));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < h_min {
            return Err(IntegrationError::StepSizeUnderflow { t, h });
        }
    }
    Ok(x)
}
