//! Polar form ψ = R·e^{iS} of 1D wavefunctions (ħ = 1) and the two real
//! equations it satisfies:
//!
//! ```text
//! ∂ₜS + (∂ₓS)²/2m + V + U = 0,      U = −(1/2m) ∂ₓ²R / R
//! ∂ₜ(R²) + ∂ₓ(R² ∂ₓS / m) = 0
//! ```
//!
//! Frames come from a Strang-split spectral solver; residuals use second-order
//! central differences in x and t. Points where R falls below a floor are
//! masked, since U diverges at nodes.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default mask floor relative to max R.
pub const DEFAULT_R_FLOOR: f64 = 1e-8;
/// Edge density allowed relative to the peak density.
pub const EDGE_LEAKAGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydroError {
    #[error("validation: {field}: {constraint}")]
    Invalid {
        field: &'static str,
        constraint: String,
    },
    #[error("edge leakage at t = {t}: edge density {edge:e} exceeds {limit:e}")]
    EdgeLeakage { t: f64, edge: f64, limit: f64 },
    #[error("insufficient frames: need at least 3, got {0}")]
    InsufficientFrames(usize),
    #[error("frames are not uniformly spaced in time or do not share a grid")]
    IncompatibleFrames,
}

fn invalid(field: &'static str, constraint: impl Into<String>) -> HydroError {
    HydroError::Invalid {
        field,
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWavefunction {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<Complex64>,
    pub mass: f64,
    pub t: f64,
}

impl GridWavefunction {
    pub fn new(
        x_min: f64,
        dx: f64,
        values: Vec<Complex64>,
        mass: f64,
        t: f64,
    ) -> Result<Self, HydroError> {
        let psi = Self {
            x_min,
            dx,
            values,
            mass,
            t,
        };
        psi.validate()?;
        Ok(psi)
    }

    /// Samples `f` at `x_min + i·dx` for `i < n`.
    pub fn from_fn(
        x_min: f64,
        dx: f64,
        n: usize,
        mass: f64,
        t: f64,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, HydroError> {
        let values = (0..n).map(|i| f(x_min + i as f64 * dx)).collect();
        Self::new(x_min, dx, values, mass, t)
    }

    pub fn validate(&self) -> Result<(), HydroError> {
        let n = self.values.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(invalid(
                "n_points",
                format!("must be a power of two >= 16, got {n}"),
            ));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(invalid("dx", "must be finite and > 0"));
        }
        if !self.x_min.is_finite() {
            return Err(invalid("x_min", "must be finite"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", "must be finite and > 0"));
        }
        if !self.norm().is_finite() {
            return Err(invalid("values", "norm must be finite"));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.x(i)).collect()
    }

    /// ∑|ψ|² dx.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.x_min == other.x_min
            && self.dx == other.dx
            && self.n_points() == other.n_points()
            && self.mass == other.mass
    }

    fn edge_density(&self) -> (f64, f64) {
        let n = self.n_points();
        let edge = self.values[0].norm_sqr().max(self.values[n - 1].norm_sqr());
        let peak = self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        (edge, peak)
    }

    fn check_edges(&self) -> Result<(), HydroError> {
        let (edge, peak) = self.edge_density();
        let limit = EDGE_LEAKAGE * peak;
        if edge > limit {
            return Err(HydroError::EdgeLeakage {
                t: self.t,
                edge,
                limit,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PotentialSpec {
    Free,
    /// ½ m ω₀² (x − x_c)².
    Harmonic {
        mass: f64,
        omega0: f64,
        #[serde(default)]
        center: f64,
    },
    /// One value per grid point.
    Tabulated {
        values: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<(), HydroError> {
        match self {
            Self::Free => Ok(()),
            Self::Harmonic {
                mass,
                omega0,
                center,
            } => {
                if !(*mass > 0.0 && mass.is_finite()) {
                    return Err(invalid("potential.mass", "must be finite and > 0"));
                }
                if !omega0.is_finite() || !center.is_finite() {
                    return Err(invalid(
                        "potential.omega0",
                        "omega0 and center must be finite",
                    ));
                }
                Ok(())
            }
            Self::Tabulated { values } => {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(invalid("potential.values", "must be finite"))
                }
            }
        }
    }

    /// V at every point of the grid of `psi`.
    pub fn sample(&self, psi: &GridWavefunction) -> Result<Vec<f64>, HydroError> {
        self.validate()?;
        let n = psi.n_points();
        Ok(match self {
            Self::Free => vec![0.0; n],
            Self::Harmonic {
                mass,
                omega0,
                center,
            } => (0..n)
                .map(|i| 0.5 * mass * omega0 * omega0 * (psi.x(i) - center).powi(2))
                .collect(),
            Self::Tabulated { values } => {
                if values.len() != n {
                    return Err(invalid(
                        "potential.values",
                        format!("expected {n} values, got {}", values.len()),
                    ));
                }
                values.clone()
            }
        })
    }
}

/// Angular wavenumbers in FFT order.
fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let dk = TAU / (n as f64 * dx);
    (0..n)
        .map(|j| {
            let j = if j < n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            j * dk
        })
        .collect()
}

/// Strang-split propagation from `psi0.t` to `psi0.t + t_final`, returning
/// the initial frame and every `stride`-th step. The step count is
/// `round(t_final/dt)` and the step is adjusted to land on `t_final`.
pub fn split_step_frames(
    psi0: &GridWavefunction,
    potential: &PotentialSpec,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<GridWavefunction>, HydroError> {
    psi0.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be finite and > 0"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(invalid("t_final", "must be finite and >= 0"));
    }
    if stride == 0 {
        return Err(invalid("stride", "must be >= 1"));
    }
    let v = potential.sample(psi0)?;
    psi0.check_edges()?;

    let steps = (t_final / dt).round() as usize;
    let dt = if steps == 0 {
        dt
    } else {
        t_final / steps as f64
    };
    let n = psi0.n_points();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let kinetic: Vec<Complex64> = wavenumbers(n, psi0.dx)
        .iter()
        .map(|k| Complex64::from_polar(scale, -k * k * dt / (2.0 * psi0.mass)))
        .collect();
    let half_potential: Vec<Complex64> = v
        .iter()
        .map(|vi| Complex64::from_polar(1.0, -vi * dt / 2.0))
        .collect();

    let mut frames = vec![psi0.clone()];
    let mut psi = psi0.values.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len()];
    for step in 1..=steps {
        for (p, h) in psi.iter_mut().zip(&half_potential) {
            *p *= h;
        }
        forward.process_with_scratch(&mut psi, &mut scratch);
        for (p, k) in psi.iter_mut().zip(&kinetic) {
            *p *= k;
        }
        inverse.process_with_scratch(&mut psi, &mut scratch);
        for (p, h) in psi.iter_mut().zip(&half_potential) {
            *p *= h;
        }
        let frame = GridWavefunction {
            values: psi.clone(),
            t: psi0.t + step as f64 * dt,
            ..psi0.clone()
        };
        frame.check_edges()?;
        if step % stride == 0 {
            frames.push(frame);
        }
    }
    Ok(frames)
}

/// [`split_step_frames`] keeping every step.
pub fn split_step_solve(
    psi0: &GridWavefunction,
    potential: &PotentialSpec,
    t_final: f64,
    dt: f64,
) -> Result<Vec<GridWavefunction>, HydroError> {
    split_step_frames(psi0, potential, t_final, dt, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarFields {
    pub x_min: f64,
    pub dx: f64,
    pub t: f64,
    pub r: Vec<f64>,
    /// Phase, unwrapped left to right within each valid region.
    pub s: Vec<f64>,
    pub valid: Vec<bool>,
}

impl PolarFields {
    /// Half-open index ranges of the connected valid regions.
    pub fn regions(&self) -> Vec<(usize, usize)> {
        mask_regions(&self.valid)
    }

    /// R·e^{iS} at every point (masked points included).
    pub fn reconstruct(&self) -> Vec<Complex64> {
        self.r
            .iter()
            .zip(&self.s)
            .map(|(&r, &s)| Complex64::from_polar(r, s))
            .collect()
    }
}

fn mask_regions(valid: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in valid.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, valid.len()));
    }
    out
}

fn wrap(angle: f64) -> f64 {
    let w = (angle + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// R = |ψ| and S = arg ψ, masked where R < `r_floor_rel`·max R.
pub fn polar_decompose(psi: &GridWavefunction, r_floor_rel: f64) -> PolarFields {
    let r: Vec<f64> = psi.values.iter().map(|v| v.norm()).collect();
    let r_max = r.iter().copied().fold(0.0, f64::max);
    let floor = r_floor_rel * r_max;
    let valid: Vec<bool> = r.iter().map(|&x| x > 0.0 && x >= floor).collect();
    let mut s: Vec<f64> = psi.values.iter().map(|v| v.arg()).collect();
    for (start, end) in mask_regions(&valid) {
        for i in start + 1..end {
            s[i] = s[i - 1] + wrap(s[i] - s[i - 1]);
        }
    }
    PolarFields {
        x_min: psi.x_min,
        dx: psi.dx,
        t: psi.t,
        r,
        s,
        valid,
    }
}

fn interior(valid: &[bool], i: usize, reach: usize) -> bool {
    i >= reach && i + reach < valid.len() && (i - reach..=i + reach).all(|j| valid[j])
}

/// U = −(1/2m) ∂ₓ²R / R at interior valid points.
pub fn quantum_potential(fields: &PolarFields, mass: f64) -> Vec<Option<f64>> {
    let r = &fields.r;
    let h2 = fields.dx * fields.dx;
    (0..r.len())
        .map(|i| {
            interior(&fields.valid, i, 1)
                .then(|| -(r[i + 1] - 2.0 * r[i] + r[i - 1]) / (h2 * r[i]) / (2.0 * mass))
        })
        .collect()
}

/// p = ∂ₓS at interior valid points.
pub fn momentum_field(fields: &PolarFields) -> Vec<Option<f64>> {
    let s = &fields.s;
    (0..s.len())
        .map(|i| interior(&fields.valid, i, 1).then(|| (s[i + 1] - s[i - 1]) / (2.0 * fields.dx)))
        .collect()
}

/// v = ∂ₓS / m.
pub fn velocity_field(fields: &PolarFields, mass: f64) -> Vec<Option<f64>> {
    momentum_field(fields)
        .into_iter()
        .map(|p| p.map(|p| p / mass))
        .collect()
}

/// Pointwise residual per interior frame and its L2 norm `(∑ r² dx)^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    /// Times of the interior frames the residual is evaluated at.
    pub times: Vec<f64>,
    pub fields: Vec<Vec<Option<f64>>>,
    pub l2: Vec<f64>,
    /// Root mean square of the per-frame norms.
    pub l2_rms: f64,
    /// Largest per-frame norm.
    pub l2_max: f64,
}

impl Residual {
    fn from_fields(times: Vec<f64>, fields: Vec<Vec<Option<f64>>>, dx: f64) -> Self {
        let l2: Vec<f64> = fields
            .iter()
            .map(|f| (f.iter().flatten().map(|r| r * r).sum::<f64>() * dx).sqrt())
            .collect();
        let l2_rms = (l2.iter().map(|x| x * x).sum::<f64>() / l2.len() as f64).sqrt();
        let l2_max = l2.iter().copied().fold(0.0, f64::max);
        Self {
            times,
            fields,
            l2,
            l2_rms,
            l2_max,
        }
    }
}

fn check_frames(frames: &[GridWavefunction]) -> Result<f64, HydroError> {
    if frames.len() < 3 {
        return Err(HydroError::InsufficientFrames(frames.len()));
    }
    let dt = frames[1].t - frames[0].t;
    if !(dt > 0.0) {
        return Err(HydroError::IncompatibleFrames);
    }
    for w in frames.windows(2) {
        if !w[0].same_grid(&w[1]) || ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1e-300) {
            return Err(HydroError::IncompatibleFrames);
        }
    }
    Ok(dt)
}

/// (S(t+dt) − S(t−dt)) at points valid in both neighbours, with the 2π
/// ambiguity of each region fixed at its largest-R point by the phase of
/// ψ(t+dt)·ψ*(t−dt).
fn phase_increment(
    before: &GridWavefunction,
    after: &GridWavefunction,
    fb: &PolarFields,
    fa: &PolarFields,
) -> Vec<Option<f64>> {
    let both: Vec<bool> = fb
        .valid
        .iter()
        .zip(&fa.valid)
        .map(|(a, b)| *a && *b)
        .collect();
    let mut out = vec![None; both.len()];
    for (start, end) in mask_regions(&both) {
        let anchor = (start..end)
            .max_by(|&a, &b| (fa.r[a] * fb.r[a]).total_cmp(&(fa.r[b] * fb.r[b])))
            .unwrap();
        let reference = (after.values[anchor] * before.values[anchor].conj()).arg();
        let raw = fa.s[anchor] - fb.s[anchor];
        let shift = TAU * ((raw - reference) / TAU).round();
        for (i, slot) in out.iter_mut().enumerate().take(end).skip(start) {
            *slot = Some(fa.s[i] - fb.s[i] - shift);
        }
    }
    out
}

/// ∂ₜS + (∂ₓS)²/2m + V + U on the interior frames.
pub fn hj_residual(
    frames: &[GridWavefunction],
    potential: &PotentialSpec,
) -> Result<Residual, HydroError> {
    hj_residual_with_floor(frames, potential, DEFAULT_R_FLOOR)
}

pub fn hj_residual_with_floor(
    frames: &[GridWavefunction],
    potential: &PotentialSpec,
    r_floor_rel: f64,
) -> Result<Residual, HydroError> {
    let dt = check_frames(frames)?;
    let v = potential.sample(&frames[0])?;
    let mass = frames[0].mass;
    let polar: Vec<PolarFields> = frames
        .iter()
        .map(|f| polar_decompose(f, r_floor_rel))
        .collect();
    let mut fields = Vec::with_capacity(frames.len() - 2);
    let mut times = Vec::with_capacity(frames.len() - 2);
    for j in 1..frames.len() - 1 {
        let ds = phase_increment(&frames[j - 1], &frames[j + 1], &polar[j - 1], &polar[j + 1]);
        let u = quantum_potential(&polar[j], mass);
        let p = momentum_field(&polar[j]);
        let field = (0..v.len())
            .map(|i| match (ds[i], u[i], p[i]) {
                (Some(ds), Some(u), Some(p)) => {
                    Some(ds / (2.0 * dt) + p * p / (2.0 * mass) + v[i] + u)
                }
                _ => None,
            })
            .collect();
        fields.push(field);
        times.push(frames[j].t);
    }
    Ok(Residual::from_fields(times, fields, frames[0].dx))
}

/// ∂ₜ(R²) + ∂ₓ(R² ∂ₓS / m) on the interior frames.
pub fn continuity_residual(frames: &[GridWavefunction], mass: f64) -> Result<Residual, HydroError> {
    continuity_residual_with_floor(frames, mass, DEFAULT_R_FLOOR)
}

pub fn continuity_residual_with_floor(
    frames: &[GridWavefunction],
    mass: f64,
    r_floor_rel: f64,
) -> Result<Residual, HydroError> {
    let dt = check_frames(frames)?;
    if !(mass > 0.0) {
        return Err(invalid("mass", "must be > 0"));
    }
    let polar: Vec<PolarFields> = frames
        .iter()
        .map(|f| polar_decompose(f, r_floor_rel))
        .collect();
    let dx = frames[0].dx;
    let mut fields = Vec::with_capacity(frames.len() - 2);
    let mut times = Vec::with_capacity(frames.len() - 2);
    for j in 1..frames.len() - 1 {
        let (before, here, after) = (&polar[j - 1], &polar[j], &polar[j + 1]);
        let p = momentum_field(here);
        let flux: Vec<Option<f64>> = p
            .iter()
            .zip(&here.r)
            .map(|(p, r)| p.map(|p| r * r * p / mass))
            .collect();
        let field = (0..here.r.len())
            .map(|i| {
                if i == 0 || i + 1 >= here.r.len() || !before.valid[i] || !after.valid[i] {
                    return None;
                }
                match (flux[i - 1], flux[i + 1]) {
                    (Some(left), Some(right)) => {
                        let drho = (after.r[i].powi(2) - before.r[i].powi(2)) / (2.0 * dt);
                        Some(drho + (right - left) / (2.0 * dx))
                    }
                    _ => None,
                }
            })
            .collect();
        fields.push(field);
        times.push(frames[j].t);
    }
    Ok(Residual::from_fields(times, fields, dx))
}

/// Analytic free Gaussian packet of initial width σ, center x₀ and mean
/// wavenumber k₀, evolved for time `t`.
pub fn free_gaussian(x: f64, t: f64, mass: f64, sigma: f64, x0: f64, k0: f64) -> Complex64 {
    let i = Complex64::i();
    let spread = Complex64::new(1.0, t / (2.0 * mass * sigma * sigma));
    let velocity = k0 / mass;
    let shifted = x - x0 - velocity * t;
    let norm = (TAU * sigma * sigma).powf(-0.25) / spread.sqrt();
    let envelope = (-(shifted * shifted) / (4.0 * sigma * sigma * spread)).exp();
    let plane = (i * (k0 * (x - x0) - k0 * k0 * t / (2.0 * mass))).exp();
    norm * envelope * plane
}

/// Harmonic-oscillator eigenfunction n ∈ {0, 1} centered at `center`.
pub fn harmonic_state(x: f64, n: usize, mass: f64, omega0: f64, center: f64) -> Complex64 {
    let a = mass * omega0;
    let y = x - center;
    let ground = (a / PI).powf(0.25) * (-a * y * y / 2.0).exp();
    let value = match n {
        0 => ground,
        _ => ground * (2.0 * a).sqrt() * y,
    };
    Complex64::new(value, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, half_width: f64) -> (f64, f64) {
        (-half_width, 2.0 * half_width / n as f64)
    }

    #[test]
    fn validation() {
        assert!(
            GridWavefunction::new(0.0, 0.1, vec![Complex64::new(0.0, 0.0); 12], 1.0, 0.0).is_err()
        );
        assert!(
            GridWavefunction::new(0.0, 0.0, vec![Complex64::new(0.0, 0.0); 16], 1.0, 0.0).is_err()
        );
        let e = GridWavefunction::new(0.0, 0.1, vec![Complex64::new(0.0, 0.0); 16], -1.0, 0.0)
            .unwrap_err();
        assert!(e.to_string().contains("mass"));
    }

    #[test]
    fn wavenumbers_are_in_fft_order() {
        let k = wavenumbers(8, 0.5);
        let dk = TAU / 4.0;
        assert_eq!(k[0], 0.0);
        assert_abs_diff_eq!(k[1], dk, epsilon = 1e-15);
        assert_abs_diff_eq!(k[4], -4.0 * dk, epsilon = 1e-15);
        assert_abs_diff_eq!(k[7], -dk, epsilon = 1e-15);
    }

    #[test]
    fn plane_wave_polar() {
        let (x0, dx) = grid(256, 8.0);
        let psi = GridWavefunction::from_fn(x0, dx, 256, 1.0, 0.0, |x| {
            Complex64::from_polar(1.0, 3.0 * x)
        })
        .unwrap();
        let polar = polar_decompose(&psi, DEFAULT_R_FLOOR);
        assert!(polar.valid.iter().all(|&v| v));
        let s0 = polar.s[0];
        for (i, &s) in polar.s.iter().enumerate() {
            assert_abs_diff_eq!(polar.r[i], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s - s0, 3.0 * (psi.x(i) - psi.x(0)), epsilon = 1e-11);
        }
        for p in momentum_field(&polar).into_iter().flatten() {
            assert_abs_diff_eq!(p, 3.0, epsilon = 1e-10);
        }
        for u in quantum_potential(&polar, 1.0).into_iter().flatten() {
            assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn real_gaussian_has_flat_phase() {
        let (x0, dx) = grid(128, 10.0);
        let psi = GridWavefunction::from_fn(x0, dx, 128, 1.0, 0.0, |x| {
            harmonic_state(x, 0, 1.0, 1.0, 0.0)
        })
        .unwrap();
        let polar = polar_decompose(&psi, DEFAULT_R_FLOOR);
        for (&s, &v) in polar.s.iter().zip(&polar.valid) {
            if v {
                assert_eq!(s, 0.0);
            }
        }
        assert!(momentum_field(&polar)
            .into_iter()
            .flatten()
            .all(|p| p == 0.0));
    }

    #[test]
    fn node_splits_valid_region() {
        // grid points straddle the node symmetrically, and one lands on it
        let n = 129 - 1;
        let (x0, dx) = grid(n, 6.0);
        let psi =
            GridWavefunction::from_fn(x0, dx, n, 1.0, 0.0, |x| harmonic_state(x, 1, 1.0, 1.0, 0.0))
                .unwrap();
        let polar = polar_decompose(&psi, DEFAULT_R_FLOOR);
        let regions = polar.regions();
        assert_eq!(regions.len(), 2, "{regions:?}");
        for (start, end) in regions {
            let s0 = polar.s[start];
            assert!(polar.s[start..end].iter().all(|&s| s == s0));
        }
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert_abs_diff_eq!(wrap(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let n = 1024;
        let (x0, dx) = grid(n, 40.0);
        let (m, sigma, xc, k0) = (1.0, 1.5, -5.0, 1.0);
        let psi0 = GridWavefunction::from_fn(x0, dx, n, m, 0.0, |x| {
            free_gaussian(x, 0.0, m, sigma, xc, k0)
        })
        .unwrap();
        let frames = split_step_solve(&psi0, &PotentialSpec::Free, 5.0, 0.05).unwrap();
        assert_eq!(frames.len(), 101);
        let last = frames.last().unwrap();
        assert_abs_diff_eq!(last.t, 5.0, epsilon = 1e-12);
        let err = last
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - free_gaussian(last.x(i), last.t, m, sigma, xc, k0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn free_gaussian_quantum_potential() {
        // U = −(1/2m) R″/R for R ∝ exp(−y²/(2s²)) with s² = |a|²/Re(a), a = 2σ²(1 + iτ)
        // compared over the bulk: the stencil error grows like (x/s²)⁴ in the tails
        let n = 16384;
        let (x0, dx) = grid(n, 15.0);
        let (m, sigma, t) = (1.0, 1.0, 2.0);
        let psi =
            GridWavefunction::from_fn(x0, dx, n, m, t, |x| free_gaussian(x, t, m, sigma, 0.0, 0.0))
                .unwrap();
        let polar = polar_decompose(&psi, 1e-2);
        let a = Complex64::new(2.0 * sigma * sigma, t / m);
        let s2 = a.norm_sqr() / a.re;
        for (i, u) in quantum_potential(&polar, m).into_iter().enumerate() {
            if let Some(u) = u {
                let y = psi.x(i);
                let exact = -(y * y / (s2 * s2) - 1.0 / s2) / (2.0 * m);
                assert!((u - exact).abs() < 1e-6, "x = {y}: {u} vs {exact}");
            }
        }
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let n = 512;
        let (x0, dx) = grid(n, 10.0);
        let pot = PotentialSpec::Harmonic {
            mass: 1.0,
            omega0: 1.0,
            center: 0.0,
        };
        let psi0 =
            GridWavefunction::from_fn(x0, dx, n, 1.0, 0.0, |x| harmonic_state(x, 0, 1.0, 1.0, 0.0))
                .unwrap();
        // the splitting error in the density scales as dt²
        let frames = split_step_frames(&psi0, &pot, 1.0, 2e-5, 12500).unwrap();
        assert_eq!(frames.len(), 5);
        for f in &frames[1..] {
            let drift = f
                .values
                .iter()
                .zip(&psi0.values)
                .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-10, "{drift}");
        }
    }

    #[test]
    fn windowed_plane_wave_keeps_norm() {
        let n = 2048;
        let (x0, dx) = grid(n, 60.0);
        let psi0 = GridWavefunction::from_fn(x0, dx, n, 1.0, 0.0, |x| {
            Complex64::from_polar((-(x / 8.0).powi(4)).exp(), 2.0 * x)
        })
        .unwrap();
        let frames = split_step_solve(&psi0, &PotentialSpec::Free, 1.0, 0.01).unwrap();
        let n0 = psi0.norm();
        for f in &frames {
            assert!((f.norm() - n0).abs() < 1e-12 * n0);
        }
    }

    #[test]
    fn leakage_is_detected() {
        let n = 256;
        let (x0, dx) = grid(n, 10.0);
        let psi0 = GridWavefunction::from_fn(x0, dx, n, 1.0, 0.0, |x| {
            free_gaussian(x, 0.0, 1.0, 1.0, 0.0, 6.0)
        })
        .unwrap();
        let err = split_step_solve(&psi0, &PotentialSpec::Free, 10.0, 0.01).unwrap_err();
        assert!(err.to_string().contains("edge leakage"), "{err}");
    }

    #[test]
    fn residuals_need_three_frames() {
        let (x0, dx) = grid(64, 10.0);
        let psi = GridWavefunction::from_fn(x0, dx, 64, 1.0, 0.0, |x| {
            harmonic_state(x, 0, 1.0, 1.0, 0.0)
        })
        .unwrap();
        let frames = vec![psi.clone(), GridWavefunction { t: 1.0, ..psi }];
        let err = hj_residual(&frames, &PotentialSpec::Free).unwrap_err();
        assert!(err.to_string().contains("insufficient frames"));
        assert!(continuity_residual(&frames, 1.0).is_err());
    }

    #[test]
    fn tabulated_potential_must_match_grid() {
        let (x0, dx) = grid(64, 10.0);
        let psi = GridWavefunction::from_fn(x0, dx, 64, 1.0, 0.0, |x| {
            harmonic_state(x, 0, 1.0, 1.0, 0.0)
        })
        .unwrap();
        let pot = PotentialSpec::Tabulated {
            values: vec![0.0; 10],
        };
        assert!(pot.sample(&psi).is_err());
    }
}
