//! Adaptive Dormand-Prince 5(4) integration of the matrix equation `X' = A(t) X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings { rtol: 1e-10, atol: 1e-14, max_steps: 200_000 }
    }
}

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

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// b - b*, the embedded 4th order error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `X' = A(t) X` from `(from, x0)` to `to >= from`.
pub fn integrate<F>(generator: &F, from: f64, to: f64, x0: Mat, settings: &IntegratorSettings) -> Result<Mat>
where
    F: Fn(f64) -> Mat + ?Sized,
{
    if to == from {
        return Ok(x0);
    }
    let fail = |reason: String| Error::IntegrationFailure { from, to, reason };
    let span = to - from;
    let mut t = from;
    let mut x = x0;
    let mut k1 = generator(t) * &x;
    let mut h = initial_step(generator, t, &x, &k1, span, settings);
    let mut steps = 0usize;
    let min_step = 1e-14 * to.abs().max(1.0);

    while t < to {
        if steps >= settings.max_steps {
            return Err(fail(format!("exceeded {} steps", settings.max_steps)));
        }
        let last = t + h >= to;
        if last {
            h = to - t;
        }
        let k2 = generator(t + C2 * h) * (&x + &k1 * (A21 * h));
        let k3 = generator(t + C3 * h) * (&x + (&k1 * A31 + &k2 * A32) * h);
        let k4 = generator(t + C4 * h) * (&x + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h);
        let k5 = generator(t + C5 * h) * (&x + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h);
        let t_next = if last { to } else { t + h };
        let k6 = generator(t_next) * (&x + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h);
        let x_next = &x + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = generator(t_next) * &x_next;
        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut acc = 0.0;
        for i in 0..err_vec.len() {
            let scale = settings.atol + settings.rtol * x[i].abs().max(x_next[i].abs());
            acc += (err_vec[i] / scale).powi(2);
        }
        let err = (acc / err_vec.len().max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(fail(format!("non-finite error estimate at t = {t}")));
        }
        steps += 1;
        if err <= 1.0 {
            t = t_next;
            x = x_next;
            k1 = k7;
            if last {
                break;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < min_step {
                return Err(fail(format!("step size underflow at t = {t}")));
            }
        }
    }
    Ok(x)
}

fn initial_step<F>(generator: &F, t: f64, x: &Mat, k1: &Mat, span: f64, s: &IntegratorSettings) -> f64
where
    F: Fn(f64) -> Mat + ?Sized,
{
    let scale = |m: &Mat| -> f64 {
        let mut acc = 0.0;
        for i in 0..m.len() {
            let sc = s.atol + s.rtol * x[i].abs();
            acc += (m[i] / sc).powi(2);
        }
        (acc / m.len().max(1) as f64).sqrt()
    };
    let d0 = scale(x);
    let d1 = scale(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let x1 = x + k1 * h0;
    let k2 = generator(t + h0) * &x1;
    let d2 = scale(&(k2 - k1)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_power_law() {
        let a = |t: f64| Mat::from_element(1, 1, -1.0 / t);
        let x = integrate(&a, 1.0, 10.0, Mat::identity(1, 1), &IntegratorSettings::default()).unwrap();
        assert!((x[(0, 0)] - 0.1).abs() < 1e-10);
    }

    #[test]
    fn zero_generator_is_identity() {
        let a = |_t: f64| Mat::zeros(2, 2);
        let x = integrate(&a, 1.0, 7.0, Mat::identity(2, 2), &IntegratorSettings::default()).unwrap();
        assert_eq!(x, Mat::identity(2, 2));
    }

    #[test]
    fn step_budget_is_enforced() {
        let a = |t: f64| Mat::from_element(1, 1, (50.0 * t).sin() * 40.0);
        let settings = IntegratorSettings { max_steps: 3, ..Default::default() };
        let r = integrate(&a, 1.0, 100.0, Mat::identity(1, 1), &settings);
        assert!(matches!(r, Err(Error::IntegrationFailure { .. })));
    }
}
