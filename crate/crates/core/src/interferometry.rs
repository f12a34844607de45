//! Two phase-locked pulses and the excited population as a function of their
//! relative constant phase δ.
//!
//! The first pulse is the base field; the second is the same pulse delayed by
//! τ with its phase law shifted by δ. After both pulses the system is read out
//! in |e⟩. Scanning δ over one period produces a fringe whose contrast is the
//! visibility `(max − min)/(max + min)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DrivingField, ModelError, TwoLevelSystem};
use crate::propagator::{
    full_field_propagate, rwa_propagate, Drive, IntegratorConfig, PropagatorError, TwoLevelState,
};

/// Largest area (∫Ω dt per pulse) still treated as weak.
pub const WEAK_AREA: f64 = 0.05 * PI;
/// Single-pulse excitation above which the pair is no longer perturbative.
pub const WEAK_POPULATION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum InterferometryError {
    #[error("validation: {field}: {constraint}")]
    Invalid {
        field: &'static str,
        constraint: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

fn invalid(field: &'static str, constraint: impl Into<String>) -> InterferometryError {
    InterferometryError::Invalid {
        field,
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Rwa,
    FullField,
}

fn unit() -> f64 {
    1.0
}

/// Base pulse, delay and relative phase of a phase-locked pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsePairConfig {
    pub base: DrivingField,
    /// Delay τ between the pulse centers. Zero merges the pulses.
    pub delay: f64,
    /// Relative phase δ of the second pulse, reduced to [0, 2π).
    #[serde(default)]
    pub relative_phase: f64,
    /// Peak of the second pulse relative to the first.
    #[serde(default = "unit")]
    pub second_amplitude: f64,
    #[serde(default)]
    pub engine: Engine,
}

impl PulsePairConfig {
    pub fn new(
        base: DrivingField,
        delay: f64,
        relative_phase: f64,
    ) -> Result<Self, InterferometryError> {
        let pair = Self {
            base,
            delay,
            relative_phase,
            second_amplitude: 1.0,
            engine: Engine::Rwa,
        };
        pair.validate()?;
        Ok(pair.with_relative_phase(relative_phase))
    }

    pub fn validate(&self) -> Result<(), InterferometryError> {
        self.base.validate()?;
        let duration = self
            .base
            .envelope
            .effective_duration()
            .ok_or_else(|| invalid("base.envelope", "must be a bounded pulse, not constant"))?;
        if !self.delay.is_finite() || self.delay < 0.0 {
            return Err(invalid("delay", "must be finite and >= 0"));
        }
        if self.delay != 0.0 && self.delay <= duration {
            return Err(invalid(
                "delay",
                format!("must exceed the pulse duration {duration} (or be 0 to merge the pulses)"),
            ));
        }
        if !self.relative_phase.is_finite() {
            return Err(invalid("relative_phase", "must be finite"));
        }
        if !self.second_amplitude.is_finite() || self.second_amplitude < 0.0 {
            return Err(invalid("second_amplitude", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn with_relative_phase(&self, delta: f64) -> Self {
        Self {
            relative_phase: reduce_phase(delta),
            ..self.clone()
        }
    }

    /// ∫Ω dt of the first pulse.
    pub fn pulse_area(&self, system: &TwoLevelSystem) -> f64 {
        system.mu * self.base.envelope.area().unwrap_or(f64::INFINITY)
    }

    pub fn first(&self) -> DrivingField {
        self.base.clone()
    }

    pub fn second(&self) -> DrivingField {
        let delayed = self.base.delayed(self.delay);
        DrivingField {
            carrier: delayed.carrier,
            envelope: delayed.envelope.scaled(self.second_amplitude),
            phase: delayed.phase.offset_by(self.relative_phase),
        }
    }

    pub fn pair(&self) -> PulsePair {
        PulsePair {
            first: self.first(),
            second: self.second(),
        }
    }

    /// Start and end of the propagation window covering both pulses.
    pub fn window(&self) -> (f64, f64) {
        let half = 0.5 * self.base.envelope.effective_duration().unwrap_or(0.0);
        let center = self.base.envelope.center().unwrap_or(0.0);
        (center - half, center + self.delay + half)
    }
}

/// Reduces an angle to [0, 2π). `rem_euclid` alone can round a tiny negative
/// angle up to exactly 2π.
pub fn reduce_phase(delta: f64) -> f64 {
    let r = delta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// The summed drive of both pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct PulsePair {
    pub first: DrivingField,
    pub second: DrivingField,
}

impl Drive for PulsePair {
    fn carrier(&self) -> f64 {
        self.first.carrier
    }

    fn rabi_phasor(&self, mu: f64, t: f64) -> Complex64 {
        self.first.rabi_phasor(mu, t) + self.second.rabi_phasor(mu, t)
    }
}

fn final_excited<D: Drive + ?Sized>(
    system: &TwoLevelSystem,
    drive: &D,
    window: (f64, f64),
    engine: Engine,
    cfg: &IntegratorConfig,
    step_cap: f64,
) -> Result<f64, InterferometryError> {
    let cfg = IntegratorConfig {
        max_step: cfg.max_step.min(step_cap),
        ..*cfg
    };
    let grid = [window.0, window.1];
    let traj = match engine {
        Engine::Rwa => rwa_propagate(system, drive, TwoLevelState::ground(), &grid, &cfg)?,
        Engine::FullField => {
            full_field_propagate(system, drive, TwoLevelState::ground(), &grid, &cfg)?
        }
    };
    Ok(traj.last().excited_population())
}

fn step_cap(pair: &PulsePairConfig) -> f64 {
    pair.base.envelope.effective_duration().unwrap_or(1.0) / 50.0
}

/// Final excited population after both pulses, starting from |g⟩.
pub fn pulse_pair_population(
    system: &TwoLevelSystem,
    pair: &PulsePairConfig,
    cfg: &IntegratorConfig,
) -> Result<f64, InterferometryError> {
    pair.validate()?;
    final_excited(
        system,
        &pair.pair(),
        pair.window(),
        pair.engine,
        cfg,
        step_cap(pair),
    )
}

/// Excited population after the first pulse alone.
pub fn single_pulse_population(
    system: &TwoLevelSystem,
    pair: &PulsePairConfig,
    cfg: &IntegratorConfig,
) -> Result<f64, InterferometryError> {
    pair.validate()?;
    let (start, _) = pair.window();
    let end = start + pair.base.envelope.effective_duration().unwrap_or(0.0);
    final_excited(
        system,
        &pair.base,
        (start, end),
        pair.engine,
        cfg,
        step_cap(pair),
    )
}

/// A warning message when the pair is outside the weak-field regime.
pub fn weak_field_warning(
    system: &TwoLevelSystem,
    pair: &PulsePairConfig,
    cfg: &IntegratorConfig,
) -> Result<Option<String>, InterferometryError> {
    let single = single_pulse_population(system, pair, cfg)?;
    Ok((single > WEAK_POPULATION)
        .then(|| format!("single-pulse excited population {single:.4} exceeds {WEAK_POPULATION}")))
}

/// Least-squares fit P(δ) ≈ A + B cos(δ + δ₀) with B ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeRecord {
    pub deltas: Vec<f64>,
    pub populations: Vec<f64>,
    pub visibility: f64,
    /// Constructive relative phase: the maximum of the fitted fringe, or the
    /// sampled maximum when the fringe is flat.
    pub delta_star: f64,
    pub fit: Option<CosineFit>,
}

/// `n` equally spaced phases covering [0, 2π).
pub fn uniform_phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// `(max − min)/(max + min)` of the sampled populations; 0 for an all-zero record.
pub fn visibility(populations: &[f64]) -> f64 {
    let max = populations
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = populations.iter().copied().fold(f64::INFINITY, f64::min);
    if populations.is_empty() || max + min == 0.0 {
        return 0.0;
    }
    (max - min) / (max + min)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Fits `A + c cos δ + s sin δ` by normal equations. `None` with fewer than
/// three distinct phases.
pub fn fit_cosine(deltas: &[f64], populations: &[f64]) -> Option<CosineFit> {
    if deltas.len() != populations.len() || deltas.len() < 3 {
        return None;
    }
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&d, &p) in deltas.iter().zip(populations) {
        let basis = [1.0, d.cos(), d.sin()];
        for r in 0..3 {
            rhs[r] += basis[r] * p;
            for c in 0..3 {
                normal[r][c] += basis[r] * basis[c];
            }
        }
    }
    let det = det3(normal);
    if det.abs() < 1e-12 * (deltas.len() as f64).powi(3) {
        return None;
    }
    let mut coef = [0.0; 3];
    for (k, slot) in coef.iter_mut().enumerate() {
        let mut m = normal;
        for r in 0..3 {
            m[r][k] = rhs[r];
        }
        *slot = det3(m) / det;
    }
    let [offset, c, s] = coef;
    // c cos δ + s sin δ = B cos(δ + δ₀) with B cos δ₀ = c, B sin δ₀ = −s
    let amplitude = c.hypot(s);
    let phase = (-s).atan2(c);
    let max_residual = deltas
        .iter()
        .zip(populations)
        .map(|(&d, &p)| (p - offset - amplitude * (d + phase).cos()).abs())
        .fold(0.0, f64::max);
    Some(CosineFit {
        offset,
        amplitude,
        phase,
        max_residual,
    })
}

/// Final excited population for every δ in `deltas`, evaluated in parallel.
pub fn phase_scan(
    system: &TwoLevelSystem,
    pair: &PulsePairConfig,
    deltas: &[f64],
    cfg: &IntegratorConfig,
) -> Result<FringeRecord, InterferometryError> {
    pair.validate()?;
    if deltas.is_empty() {
        return Err(invalid("deltas", "must be non-empty"));
    }
    let populations = deltas
        .par_iter()
        .map(|&d| pulse_pair_population(system, &pair.with_relative_phase(d), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = fit_cosine(deltas, &populations);
    let flat = populations
        .iter()
        .all(|&p| (p - populations[0]).abs() <= 1e-12 * populations[0].abs().max(1e-300));
    let delta_star = match fit {
        Some(f) if !flat && f.amplitude > 0.0 => reduce_phase(-f.phase),
        _ => {
            let (k, _) =
                populations
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc },
                    );
            reduce_phase(deltas[k])
        }
    };
    Ok(FringeRecord {
        deltas: deltas.to_vec(),
        visibility: if flat { 0.0 } else { visibility(&populations) },
        populations,
        delta_star,
        fit,
    })
}
