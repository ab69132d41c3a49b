//! Adaptive Gauss-Kronrod quadrature and an adaptive Dormand-Prince ODE integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance for time integrals.
pub const QUAD_ABS_TOL: f64 = 1e-10;
/// Maximum number of subintervals.
pub const QUAD_MAX_SEGMENTS: usize = 1 << 14;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7-K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integral of f from a to b (signed: a > b gives the negative of the reversed integral).
///
/// Global adaptive bisection of the panel with the largest error estimate until the
/// summed estimate falls below `abs_tol` (or below 64 ulps of the result, which is the
/// floor set by rounding).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, abs_tol).map(|v| -v);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    loop {
        if !(total.is_finite() && total_err.is_finite()) {
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: total_err,
            });
        }
        let floor = 64.0 * f64::EPSILON * total.abs();
        if total_err <= abs_tol.max(floor) {
            return Ok(total);
        }
        if heap.len() >= QUAD_MAX_SEGMENTS {
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The panel cannot be split any further.
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: total_err,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        if total_err < 0.0 {
            // Accumulated cancellation; recompute from the panels.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
}

/// Settings for [`dopri45`].
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance {
            rtol: 1e-12,
            atol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

/// Integrate y' = f(t, y) from t0 to t1 (either direction) with the Dormand-Prince 5(4) pair.
///
/// `f(t, y, dy)` writes the derivative into `dy`.
pub fn dopri45<F>(f: F, t0: f64, y0: &[f64], t1: f64, tol: OdeTolerance) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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

    let n = y0.len();
    let mut y = y0.to_vec();
    if t0 == t1 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = span.min(1e-2 * span.max(1e-8));
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut steps = 0usize;
    f(t, &y, &mut k[0]);
    while (t1 - t) * dir > 0.0 {
        if steps >= tol.max_steps {
            return Err(Error::NoConvergence {
                iterations: steps,
                last_step: h,
            });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;
        for s in 1..7 {
            for idx in 0..n {
                let mut acc = y[idx];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][r] * kr[idx];
                }
                stage[idx] = acc;
            }
            f(t + C[s] * hs, &stage, &mut k[s]);
        }
        let mut err = 0.0f64;
        for idx in 0..n {
            let mut s5 = y[idx];
            let mut s4 = y[idx];
            for s in 0..7 {
                s5 += hs * B5[s] * k[s][idx];
                s4 += hs * B4[s] * k[s][idx];
            }
            y5[idx] = s5;
            let scale = tol.atol + tol.rtol * y[idx].abs().max(s5.abs());
            err = err.max(((s5 - s4) / scale).abs());
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&y5);
            // FSAL: the last stage is the derivative at the new point.
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * span {
            return Err(Error::NoConvergence {
                iterations: steps,
                last_step: h,
            });
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_polynomial_and_exp() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.exp(), 1.0, 0.0, 1e-12).unwrap();
        assert!((v + (1.0f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn quadrature_kink() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-11).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
    }

    #[test]
    fn quadrature_gives_up_on_singularity() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn ode_backward_exponential() {
        let y = dopri45(
            |_, y, dy| dy[0] = -0.3 * y[0],
            10.0,
            &[1.0],
            0.0,
            OdeTolerance::default(),
        )
        .unwrap();
        assert!((y[0] - 3.0f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn ode_system() {
        // Harmonic oscillator over one period.
        let tau = 2.0 * std::f64::consts::PI;
        let y = dopri45(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            tau,
            OdeTolerance::default(),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }
}
