//! Brute-force propagation of the driven, damped two-level Schrödinger equation.
//!
//! With Ω(t) = μE₀(t) and the bare Hamiltonian
//! `ω_g|g⟩⟨g| + ω_e|e⟩⟨e| − μE(t)(|g⟩⟨e| + h.c.) − i(γ/2)|e⟩⟨e|`:
//!
//! ```text
//! i ċ_g = ω_g c_g − Ω cos Φ · c_e
//! i ċ_e = ω_e c_e − Ω cos Φ · c_g − i(γ/2) c_e
//! ```
//!
//! [`full_field_propagate`] integrates these as written (internally in the
//! interaction picture, which is an exact change of variables).
//! [`rwa_propagate`] drops the counter-rotating terms in the frame
//! `a_g = c_g e^{iω_g t}`, `a_e = c_e e^{i(ω_g+ω)t}`. Both return bare-frame
//! trajectories.

pub mod integrator;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::model::{DrivingField, TwoLevelSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("step-size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4).
    #[default]
    Dopri5,
    /// Fixed-step classical RK4 with step `max_step`.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    pub max_step: f64,
    pub method: Method,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            method: Method::Dopri5,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(PropagatorError::InvalidConfig(format!(
                    "{name} must lie in (0, 1e-2], got {v}"
                )));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(PropagatorError::InvalidConfig(
                "max_step must be > 0".into(),
            ));
        }
        if self.method == Method::Rk4 && !self.max_step.is_finite() {
            return Err(PropagatorError::InvalidConfig(
                "rk4 needs a finite max_step".into(),
            ));
        }
        Ok(())
    }
}

/// Bare-basis amplitudes (c_g, c_e).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelState {
    pub c_g: Complex64,
    pub c_e: Complex64,
}

impl TwoLevelState {
    pub fn new(c_g: Complex64, c_e: Complex64) -> Self {
        Self { c_g, c_e }
    }

    pub fn ground() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn excited() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_g.norm_sqr() + self.c_e.norm_sqr()
    }

    pub fn excited_population(&self) -> f64 {
        self.c_e.norm_sqr()
    }

    pub fn ground_population(&self) -> f64 {
        self.c_g.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Bare,
    /// `a_g = c_g e^{iω_g t}`, `a_e = c_e e^{i(ω_g+ω)t}` for the stored ω_g and ω.
    Rotating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<TwoLevelState>,
    pub frame: Frame,
}

impl TwoLevelTrajectory {
    pub fn new(times: Vec<f64>, states: Vec<TwoLevelState>, frame: Frame) -> Self {
        debug_assert_eq!(times.len(), states.len());
        Self {
            times,
            states,
            frame,
        }
    }

    pub fn last(&self) -> &TwoLevelState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest |N(t) − N(t₀)| along the trajectory.
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.states[0].norm_sqr();
        self.states
            .iter()
            .map(|s| (s.norm_sqr() - n0).abs())
            .fold(0.0, f64::max)
    }

    /// Converts between the bare frame and the rotating frame referenced to
    /// `omega_g` and the carrier `omega`.
    pub fn into_frame(self, target: Frame, omega_g: f64, omega: f64) -> Self {
        if target == self.frame {
            return self;
        }
        let sign = if target == Frame::Rotating { 1.0 } else { -1.0 };
        let states = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| {
                TwoLevelState::new(
                    s.c_g * Complex64::from_polar(1.0, sign * omega_g * t),
                    s.c_e * Complex64::from_polar(1.0, sign * (omega_g + omega) * t),
                )
            })
            .collect();
        Self {
            times: self.times,
            states,
            frame: target,
        }
    }
}

/// Anything that drives the transition: a carrier ω and a complex Rabi
/// envelope Ω(t)e^{iφ(t)}. The real coupling is Re(Ω e^{iφ} e^{iωt}) = Ω cos Φ.
pub trait Drive: Sync {
    fn carrier(&self) -> f64;
    fn rabi_phasor(&self, mu: f64, t: f64) -> Complex64;
}

impl Drive for DrivingField {
    fn carrier(&self) -> f64 {
        self.carrier
    }

    fn rabi_phasor(&self, mu: f64, t: f64) -> Complex64 {
        let amplitude = mu * self.envelope.derivative(t, 0).unwrap_or(0.0);
        let phi = self.phase.derivative(t, 0).unwrap_or(0.0);
        Complex64::from_polar(amplitude, phi)
    }
}

fn run<F>(
    rhs: F,
    grid: &[f64],
    y0: [Complex64; 2],
    cfg: &IntegratorConfig,
) -> Result<Vec<[Complex64; 2]>, PropagatorError>
where
    F: FnMut(f64, &[Complex64; 2]) -> [Complex64; 2],
{
    cfg.validate()?;
    match cfg.method {
        Method::Dopri5 => integrator::dopri5(rhs, grid, y0, cfg),
        Method::Rk4 => integrator::rk4(rhs, grid, y0, cfg.max_step),
    }
}

/// Integrates the full (non-RWA) equations with the real field Ω(t)cos Φ(t).
pub fn full_field_propagate<D: Drive + ?Sized>(
    system: &TwoLevelSystem,
    drive: &D,
    initial: TwoLevelState,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<TwoLevelTrajectory, PropagatorError> {
    integrator::check_grid(grid)?;
    let w0 = system.transition();
    let w = drive.carrier();
    let half_gamma = system.gamma() / 2.0;
    let i = Complex64::i();
    let t0 = grid[0];
    // b_g = c_g e^{iω_g t}, b_e = c_e e^{iω_e t}
    let y0 = [
        initial.c_g * Complex64::from_polar(1.0, system.omega_g * t0),
        initial.c_e * Complex64::from_polar(1.0, system.omega_e * t0),
    ];
    let rhs = |t: f64, b: &[Complex64; 2]| {
        let coupling = (drive.rabi_phasor(system.mu, t) * Complex64::from_polar(1.0, w * t)).re;
        let rot = Complex64::from_polar(1.0, w0 * t);
        [
            i * coupling * rot.conj() * b[1],
            i * coupling * rot * b[0] - half_gamma * b[1],
        ]
    };
    let raw = run(rhs, grid, y0, cfg)?;
    let states = grid
        .iter()
        .zip(raw)
        .map(|(&t, b)| {
            TwoLevelState::new(
                b[0] * Complex64::from_polar(1.0, -system.omega_g * t),
                b[1] * Complex64::from_polar(1.0, -system.omega_e * t),
            )
        })
        .collect();
    Ok(TwoLevelTrajectory::new(grid.to_vec(), states, Frame::Bare))
}

/// Integrates the rotating-wave equations
///
/// ```text
/// i ȧ_g = −(Ω/2) e^{iφ} a_e
/// i ȧ_e = Δω a_e − (Ω/2) e^{−iφ} a_g − i(γ/2) a_e
/// ```
///
/// and returns the trajectory in the bare frame.
pub fn rwa_propagate<D: Drive + ?Sized>(
    system: &TwoLevelSystem,
    drive: &D,
    initial: TwoLevelState,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<TwoLevelTrajectory, PropagatorError> {
    integrator::check_grid(grid)?;
    let w = drive.carrier();
    let detuning = system.transition() - w;
    let half_gamma = system.gamma() / 2.0;
    let i = Complex64::i();
    let t0 = grid[0];
    let y0 = [
        initial.c_g * Complex64::from_polar(1.0, system.omega_g * t0),
        initial.c_e * Complex64::from_polar(1.0, (system.omega_g + w) * t0),
    ];
    let rhs = |t: f64, a: &[Complex64; 2]| {
        let half_p = drive.rabi_phasor(system.mu, t) / 2.0;
        [
            i * half_p * a[1],
            -i * detuning * a[1] + i * half_p.conj() * a[0] - half_gamma * a[1],
        ]
    };
    let raw = run(rhs, grid, y0, cfg)?;
    let states = raw
        .into_iter()
        .map(|a| TwoLevelState::new(a[0], a[1]))
        .collect();
    Ok(
        TwoLevelTrajectory::new(grid.to_vec(), states, Frame::Rotating).into_frame(
            Frame::Bare,
            system.omega_g,
            w,
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryComparison {
    pub max_amplitude_error: f64,
    pub max_population_error: f64,
    /// Final phase difference per component (g, e), unwrapped in time and
    /// reported in (−π, π].
    pub final_phase_error: [f64; 2],
}

fn unwrapped_phases(values: impl Iterator<Item = Complex64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        let raw = v.arg();
        match out.last() {
            None => out.push(raw),
            Some(&prev) => {
                let jump = ((raw - prev) / (2.0 * PI)).round();
                out.push(raw - 2.0 * PI * jump);
            }
        }
    }
    out
}

fn wrap_pi(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Elementwise comparison of two trajectories sampled on the same grid and frame.
pub fn compare_trajectories(
    a: &TwoLevelTrajectory,
    b: &TwoLevelTrajectory,
) -> Result<TrajectoryComparison, PropagatorError> {
    if a.frame != b.frame {
        return Err(PropagatorError::GridMismatch("frames differ".into()));
    }
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| x != y) {
        return Err(PropagatorError::GridMismatch("time grids differ".into()));
    }
    let mut amp = 0.0f64;
    let mut pop = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        amp = amp.max((x.c_g - y.c_g).norm()).max((x.c_e - y.c_e).norm());
        pop = pop
            .max((x.ground_population() - y.ground_population()).abs())
            .max((x.excited_population() - y.excited_population()).abs());
    }
    let final_phase = |pick: fn(&TwoLevelState) -> Complex64| {
        let pa = unwrapped_phases(a.states.iter().map(pick));
        let pb = unwrapped_phases(b.states.iter().map(pick));
        wrap_pi(pa.last().unwrap() - pb.last().unwrap())
    };
    Ok(TrajectoryComparison {
        max_amplitude_error: amp,
        max_population_error: pop,
        final_phase_error: [final_phase(|s| s.c_g), final_phase(|s| s.c_e)],
    })
}

/// Evenly spaced grid of `samples` points over `[t0, t1]`.
pub fn uniform_grid(t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let h = (t1 - t0) / (samples - 1) as f64;
            (0..samples)
                .map(|k| {
                    if k == samples - 1 {
                        t1
                    } else {
                        t0 + k as f64 * h
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnvelopeSpec, PhaseSpec};

    fn tight() -> IntegratorConfig {
        IntegratorConfig::with_tolerance(1e-11, 1e-13)
    }

    fn constant_field(carrier: f64, peak: f64) -> DrivingField {
        DrivingField::new(
            carrier,
            EnvelopeSpec::Constant { peak },
            PhaseSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn free_evolution_without_field() {
        let s = TwoLevelSystem::lossless(0.7, 3.0, 1.0).unwrap();
        let f = constant_field(3.0, 0.0);
        let grid = uniform_grid(0.0, 10.0, 51);
        for traj in [
            full_field_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap(),
            rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap(),
        ] {
            for (&t, st) in traj.times.iter().zip(&traj.states) {
                assert!((st.c_g - Complex64::from_polar(1.0, -0.7 * t)).norm() < 1e-12);
                assert_eq!(st.c_e.norm(), 0.0);
            }
        }
    }

    #[test]
    fn resonant_rabi_flop() {
        let omega = 0.8;
        let s = TwoLevelSystem::lossless(0.0, 10.0, 1.0).unwrap();
        let f = constant_field(10.0, omega);
        let grid = uniform_grid(0.0, 20.0, 201);
        let traj = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        for (&t, st) in traj.times.iter().zip(&traj.states) {
            let exact = (omega * t / 2.0).sin().powi(2);
            assert!((st.excited_population() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn detuned_generalized_rabi() {
        // Δω = 3, Ω = 4: P_e = (16/25) sin²(5t/2)
        let s = TwoLevelSystem::lossless(0.0, 13.0, 1.0).unwrap();
        let f = constant_field(10.0, 4.0);
        let grid = uniform_grid(0.0, 5.0, 101);
        let traj = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        let mut peak = 0.0f64;
        for (&t, st) in traj.times.iter().zip(&traj.states) {
            let exact = 16.0 / 25.0 * (2.5 * t).sin().powi(2);
            assert!((st.excited_population() - exact).abs() < 1e-9);
            peak = peak.max(st.excited_population());
        }
        assert!(peak <= 16.0 / 25.0 + 1e-9);
    }

    #[test]
    fn hermitian_full_field_conserves_norm() {
        let s = TwoLevelSystem::lossless(0.0, 20.0, 1.0).unwrap();
        let f = DrivingField::new(
            19.5,
            EnvelopeSpec::gaussian(1.0, 10.0, 3.0),
            PhaseSpec::linear_chirp(0.2, 0.05),
        )
        .unwrap();
        let grid = uniform_grid(0.0, 20.0, 401);
        let traj = full_field_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        assert!(traj.max_norm_drift() < 1e-9, "{:e}", traj.max_norm_drift());
    }

    #[test]
    fn damping_is_monotone() {
        let s = TwoLevelSystem::new(0.0, 10.0, 1.0, 0.3, 0.0).unwrap();
        let f = constant_field(10.0, 1.0);
        let grid = uniform_grid(0.0, 30.0, 601);
        let traj = full_field_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1].norm_sqr() <= w[0].norm_sqr() + 1e-9);
        }
        assert!(traj.last().norm_sqr() < 0.5);
    }

    #[test]
    fn rk4_and_dopri5_agree() {
        let s = TwoLevelSystem::new(0.0, 10.5, 1.0, 0.05, 0.02).unwrap();
        let f = DrivingField::new(
            10.0,
            EnvelopeSpec::gaussian(1.2, 5.0, 2.0),
            PhaseSpec::linear_chirp(0.0, 0.1),
        )
        .unwrap();
        let grid = uniform_grid(0.0, 10.0, 101);
        let a = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        let rk = IntegratorConfig {
            method: Method::Rk4,
            max_step: 5e-3,
            ..tight()
        };
        let b = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &rk).unwrap();
        let cmp = compare_trajectories(&a, &b).unwrap();
        assert!(cmp.max_amplitude_error < 1e-9, "{cmp:?}");
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let s = TwoLevelSystem::lossless(0.0, 10.0, 1.0).unwrap();
        let f = DrivingField::new(
            9.0,
            EnvelopeSpec::gaussian(2.0, 5.0, 2.0),
            PhaseSpec::default(),
        )
        .unwrap();
        let grid = uniform_grid(0.0, 10.0, 21);
        let solve = |tol: f64| {
            let cfg = IntegratorConfig::with_tolerance(tol, tol * 1e-2);
            full_field_propagate(&s, &f, TwoLevelState::ground(), &grid, &cfg).unwrap()
        };
        let reference = solve(1e-12);
        let err = |tol: f64| {
            compare_trajectories(&solve(tol), &reference)
                .unwrap()
                .max_amplitude_error
        };
        let loose = err(1e-6);
        let tight = err(1e-8);
        assert!(loose / tight >= 10.0, "{loose:e} {tight:e}");
    }

    #[test]
    fn compare_identity_and_global_phase() {
        let s = TwoLevelSystem::lossless(0.0, 10.0, 1.0).unwrap();
        let f = constant_field(10.0, 1.0);
        let grid = uniform_grid(0.0, 3.0, 31);
        let a = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        let same = compare_trajectories(&a, &a).unwrap();
        assert_eq!(same.max_amplitude_error, 0.0);
        assert_eq!(same.max_population_error, 0.0);
        assert_eq!(same.final_phase_error, [0.0, 0.0]);

        let rot = Complex64::from_polar(1.0, PI / 7.0);
        let mut b = a.clone();
        for st in &mut b.states {
            st.c_g *= rot;
            st.c_e *= rot;
        }
        let cmp = compare_trajectories(&b, &a).unwrap();
        assert!((cmp.max_amplitude_error - (rot - 1.0).norm()).abs() < 1e-12);
        assert!(cmp.max_population_error < 1e-15);
        assert!((cmp.final_phase_error[0] - PI / 7.0).abs() < 1e-12);
    }

    #[test]
    fn compare_rejects_mismatched_grids() {
        let s = TwoLevelSystem::lossless(0.0, 10.0, 1.0).unwrap();
        let f = constant_field(10.0, 1.0);
        let a = rwa_propagate(
            &s,
            &f,
            TwoLevelState::ground(),
            &uniform_grid(0.0, 1.0, 5),
            &tight(),
        )
        .unwrap();
        let b = rwa_propagate(
            &s,
            &f,
            TwoLevelState::ground(),
            &uniform_grid(0.0, 1.0, 6),
            &tight(),
        )
        .unwrap();
        assert!(matches!(
            compare_trajectories(&a, &b),
            Err(PropagatorError::GridMismatch(_))
        ));
    }

    #[test]
    fn frame_round_trip() {
        let s = TwoLevelSystem::lossless(0.3, 10.0, 1.0).unwrap();
        let f = constant_field(9.0, 1.0);
        let grid = uniform_grid(0.0, 3.0, 31);
        let a = rwa_propagate(&s, &f, TwoLevelState::ground(), &grid, &tight()).unwrap();
        let back =
            a.clone()
                .into_frame(Frame::Rotating, 0.3, 9.0)
                .into_frame(Frame::Bare, 0.3, 9.0);
        assert!(compare_trajectories(&a, &back).unwrap().max_amplitude_error < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::with_tolerance(0.0, 1e-8)
            .validate()
            .is_err());
        assert!(IntegratorConfig::with_tolerance(0.1, 1e-8)
            .validate()
            .is_err());
        let bad = IntegratorConfig {
            max_step: -1.0,
            ..IntegratorConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
