//! Explicit Runge-Kutta integrators for small complex systems.
//!
//! [`dopri5`] is the adaptive Dormand-Prince 5(4) pair with local
//! extrapolation and its fourth-order continuous extension for sampling
//! between steps. [`rk4`] is the classical fixed-step scheme, kept as an
//! independent second integrator for cross-checks.

use num_complex::Complex64;

use super::{IntegratorConfig, PropagatorError};

pub type State<const N: usize> = [Complex64; N];

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

// error weights: fifth-order minus embedded fourth-order solution
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_STEPS: usize = 50_000_000;

fn combine<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        let c = h * coef;
        for i in 0..N {
            out[i] += k[i] * c;
        }
    }
    out
}

fn error_norm<const N: usize>(
    err: &State<N>,
    y0: &State<N>,
    y1: &State<N>,
    cfg: &IntegratorConfig,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        for (e, a, b) in [
            (err[i].re, y0[i].re, y1[i].re),
            (err[i].im, y0[i].im, y1[i].im),
        ] {
            let scale = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            acc += (e / scale).powi(2);
        }
    }
    (acc / (2 * N) as f64).sqrt()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), PropagatorError> {
    if grid.is_empty() {
        return Err(PropagatorError::InvalidGrid("empty time grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(PropagatorError::InvalidGrid("non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PropagatorError::InvalidGrid(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Integrates `rhs` with the adaptive Dormand-Prince 5(4) pair and returns the
/// solution at every time in `grid` (the first entry is `y0` at `grid[0]`).
pub fn dopri5<const N: usize, F>(
    mut rhs: F,
    grid: &[f64],
    y0: State<N>,
    cfg: &IntegratorConfig,
) -> Result<Vec<State<N>>, PropagatorError>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    let t_end = *grid.last().unwrap();
    let mut t = grid[0];
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&mut rhs, t, &y, &k1, cfg).min(cfg.max_step);
    let mut next = 1;
    let mut steps = 0usize;

    while next < grid.len() {
        if steps >= MAX_STEPS {
            return Err(PropagatorError::StepUnderflow { t });
        }
        steps += 1;
        h = h.min(cfg.max_step).min(t_end - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(PropagatorError::StepUnderflow { t });
        }

        let k2 = rhs(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * h,
            &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * h,
            &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &combine(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = combine(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t + h, &y1);

        let err = combine(
            &[Complex64::new(0.0, 0.0); N],
            h,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let e = error_norm(&err, &y, &y1, cfg);
        if !e.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }

        if e <= 1.0 {
            let t1 = t + h;
            // sample every requested time inside (t, t1]
            while next < grid.len() && grid[next] <= t1 {
                let ts = grid[next];
                if ts == t1 {
                    out.push(y1);
                } else {
                    let theta = (ts - t) / h;
                    out.push(dense(&y, &y1, &k1, &k3, &k4, &k5, &k6, &k7, h, theta));
                }
                next += 1;
            }
            t = t1;
            y = y1;
            k1 = k7;
            let factor = if e == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= factor;
        } else {
            h *= (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dense<const N: usize>(
    y0: &State<N>,
    y1: &State<N>,
    k1: &State<N>,
    k3: &State<N>,
    k4: &State<N>,
    k5: &State<N>,
    k6: &State<N>,
    k7: &State<N>,
    h: f64,
    theta: f64,
) -> State<N> {
    let mut out = [Complex64::new(0.0, 0.0); N];
    let theta1 = 1.0 - theta;
    for i in 0..N {
        let r1 = y0[i];
        let r2 = y1[i] - y0[i];
        let r3 = k1[i] * h - r2;
        let r4 = r2 - k7[i] * h - r3;
        let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        out[i] = r1 + (r2 + (r3 + (r4 + r5 * theta1) * theta) * theta1) * theta;
    }
    out
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &State<N>,
    f0: &State<N>,
    cfg: &IntegratorConfig,
) -> f64
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    let scale = |v: &State<N>, i: usize| cfg.abs_tol + cfg.rel_tol * v[i].norm();
    let rms = |v: &State<N>, w: &State<N>| {
        ((0..N)
            .map(|i| (v[i].norm() / scale(w, i)).powi(2))
            .sum::<f64>()
            / N as f64)
            .sqrt()
    };
    let d0 = rms(y, y);
    let d1 = rms(f0, y);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = combine(y, h0, &[(1.0, f0)]);
    let f1 = rhs(t + h0, &y1);
    let mut diff = [Complex64::new(0.0, 0.0); N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms(&diff, y) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Classical fourth-order Runge-Kutta with steps no longer than `max_step`,
/// landing exactly on every grid time.
pub fn rk4<const N: usize, F>(
    mut rhs: F,
    grid: &[f64],
    y0: State<N>,
    max_step: f64,
) -> Result<Vec<State<N>>, PropagatorError>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    check_grid(grid)?;
    if !(max_step > 0.0 && max_step.is_finite()) {
        return Err(PropagatorError::InvalidConfig(
            "max_step must be > 0".into(),
        ));
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    let mut y = y0;
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let n = (span / max_step).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for s in 0..n {
            let t = w[0] + s as f64 * h;
            let k1 = rhs(t, &y);
            let k2 = rhs(t + 0.5 * h, &combine(&y, h, &[(0.5, &k1)]));
            let k3 = rhs(t + 0.5 * h, &combine(&y, h, &[(0.5, &k2)]));
            let k4 = rhs(t + h, &combine(&y, h, &[(1.0, &k3)]));
            y = combine(
                &y,
                h,
                &[
                    (1.0 / 6.0, &k1),
                    (1.0 / 3.0, &k2),
                    (1.0 / 3.0, &k3),
                    (1.0 / 6.0, &k4),
                ],
            );
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(rel_tol: f64) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            max_step: 1.0,
            ..IntegratorConfig::default()
        }
    }

    // y' = i·w·y, exact y = exp(i w t)
    fn rotation(w: f64) -> impl FnMut(f64, &State<1>) -> State<1> {
        move |_, y| [Complex64::i() * w * y[0]]
    }

    #[test]
    fn dopri5_tracks_rotation_and_samples_between_steps() {
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.0137).collect();
        let out = dopri5(
            rotation(3.0),
            &grid,
            [Complex64::new(1.0, 0.0)],
            &cfg(1e-10),
        )
        .unwrap();
        let max_err = grid
            .iter()
            .zip(&out)
            .map(|(&t, y)| (y[0] - Complex64::from_polar(1.0, 3.0 * t)).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "{max_err:e}");
    }

    #[test]
    fn dense_output_is_consistent_on_sparse_and_dense_grids() {
        let sparse = [0.0, 5.0];
        let dense_grid: Vec<f64> = (0..=500).map(|k| k as f64 * 0.01).collect();
        let f = |t: f64, y: &State<2>| {
            [
                Complex64::i() * (1.0 + 0.3 * t.sin()) * y[1],
                Complex64::i() * y[0] - 0.1 * y[1],
            ]
        };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let a = dopri5(f, &sparse, y0, &cfg(1e-11)).unwrap();
        let b = dopri5(f, &dense_grid, y0, &cfg(1e-11)).unwrap();
        let last_a = a.last().unwrap();
        let last_b = b.last().unwrap();
        for i in 0..2 {
            assert!((last_a[i] - last_b[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let grid = [0.0, 2.0];
        let exact = Complex64::from_polar(1.0, 2.0 * 2.0);
        let err = |h: f64| {
            let out = rk4(rotation(2.0), &grid, [Complex64::new(1.0, 0.0)], h).unwrap();
            (out[1][0] - exact).norm()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn rejects_bad_grid() {
        let r = dopri5(
            rotation(1.0),
            &[0.0, 1.0, 0.5],
            [Complex64::new(1.0, 0.0)],
            &cfg(1e-8),
        );
        assert!(matches!(r, Err(PropagatorError::InvalidGrid(_))));
        let r = dopri5(rotation(1.0), &[], [Complex64::new(1.0, 0.0)], &cfg(1e-8));
        assert!(r.is_err());
    }

    #[test]
    fn single_point_grid_returns_initial_state() {
        let y0 = [Complex64::new(0.3, 0.4)];
        let out = dopri5(rotation(1.0), &[2.0], y0, &cfg(1e-8)).unwrap();
        assert_eq!(out, vec![y0]);
    }
}
