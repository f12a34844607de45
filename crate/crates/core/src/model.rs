//! Physical system and driving field.
//!
//! Everything is in natural units with ħ = 1, so frequencies and energies share
//! the unit rad/time. Envelopes and phases are closed-form so that every time
//! derivative used by the dressed-state formulas is exact up to
//! [`MAX_DERIVATIVE_ORDER`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Highest time derivative the envelope and phase registries provide.
pub const MAX_DERIVATIVE_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("derivative order exceeded: requested {requested}, maximum {max}")]
    DerivativeOrderExceeded { requested: usize, max: usize },
    #[error("validation: {field}: {constraint}")]
    Invalid {
        field: &'static str,
        constraint: String,
    },
}

fn invalid(field: &'static str, constraint: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field,
        constraint: constraint.into(),
    }
}

fn check_order(order: usize) -> Result<(), ModelError> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(ModelError::DerivativeOrderExceeded {
            requested: order,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    Ok(())
}

/// Bare two-level system with complex damping γ = γ′ − iγ″ on the excited level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSystem {
    pub omega_g: f64,
    pub omega_e: f64,
    pub mu: f64,
    #[serde(default)]
    pub gamma_re: f64,
    #[serde(default)]
    pub gamma_im: f64,
}

impl TwoLevelSystem {
    pub fn new(
        omega_g: f64,
        omega_e: f64,
        mu: f64,
        gamma_re: f64,
        gamma_im: f64,
    ) -> Result<Self, ModelError> {
        let system = Self {
            omega_g,
            omega_e,
            mu,
            gamma_re,
            gamma_im,
        };
        system.validate()?;
        Ok(system)
    }

    /// Undamped system.
    pub fn lossless(omega_g: f64, omega_e: f64, mu: f64) -> Result<Self, ModelError> {
        Self::new(omega_g, omega_e, mu, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("omega_g", self.omega_g),
            ("omega_e", self.omega_e),
            ("mu", self.mu),
            ("gamma_re", self.gamma_re),
            ("gamma_im", self.gamma_im),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.omega_e <= self.omega_g {
            return Err(invalid("omega_e", "must exceed omega_g"));
        }
        if self.gamma_re < 0.0 {
            return Err(invalid("gamma_re", "must be >= 0"));
        }
        if self.mu < 0.0 {
            return Err(invalid("mu", "must be >= 0"));
        }
        Ok(())
    }

    /// Bare transition frequency ω_e − ω_g.
    pub fn transition(&self) -> f64 {
        self.omega_e - self.omega_g
    }

    /// γ = γ′ − iγ″.
    pub fn gamma(&self) -> Complex64 {
        Complex64::new(self.gamma_re, -self.gamma_im)
    }
}

/// Real field envelope E₀(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum EnvelopeSpec {
    Constant {
        peak: f64,
    },
    /// `peak · exp(−(t − center)² / width²)`
    Gaussian {
        peak: f64,
        center: f64,
        width: f64,
    },
    /// `peak · sech((t − center) / width)`
    Sech {
        peak: f64,
        center: f64,
        width: f64,
    },
    /// Plateau of length `plateau` centred on `center`, with cos² ramps of
    /// duration `width` on each side. C¹ at the joins.
    FlatTopCos2 {
        peak: f64,
        center: f64,
        width: f64,
        plateau: f64,
    },
}

impl EnvelopeSpec {
    pub fn gaussian(peak: f64, center: f64, width: f64) -> Self {
        Self::Gaussian {
            peak,
            center,
            width,
        }
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Self::Constant { peak }
            | Self::Gaussian { peak, .. }
            | Self::Sech { peak, .. }
            | Self::FlatTopCos2 { peak, .. } => peak,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let peak = self.peak();
        if !peak.is_finite() || peak < 0.0 {
            return Err(invalid("envelope.peak", "must be finite and >= 0"));
        }
        match *self {
            Self::Constant { .. } => {}
            Self::Gaussian { center, width, .. } | Self::Sech { center, width, .. } => {
                if !center.is_finite() {
                    return Err(invalid("envelope.center", "must be finite"));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(invalid("envelope.width", "must be finite and > 0"));
                }
            }
            Self::FlatTopCos2 {
                center,
                width,
                plateau,
                ..
            } => {
                if !center.is_finite() {
                    return Err(invalid("envelope.center", "must be finite"));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(invalid("envelope.width", "must be finite and > 0"));
                }
                if !(plateau.is_finite() && plateau >= 0.0) {
                    return Err(invalid("envelope.plateau", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// `order`-th time derivative of E₀ at `t`.
    pub fn derivative(&self, t: f64, order: usize) -> Result<f64, ModelError> {
        check_order(order)?;
        Ok(match *self {
            Self::Constant { peak } => {
                if order == 0 {
                    peak
                } else {
                    0.0
                }
            }
            Self::Gaussian {
                peak,
                center,
                width,
            } => {
                let u = (t - center) / width;
                peak * (-1.0 / width).powi(order as i32) * hermite(order, u) * (-u * u).exp()
            }
            Self::Sech {
                peak,
                center,
                width,
            } => {
                let u = (t - center) / width;
                let poly = sech_derivative_poly(order);
                let th = u.tanh();
                let p = poly.iter().rev().fold(0.0, |acc, &c| acc * th + c);
                peak * width.powi(-(order as i32)) * sech(u) * p
            }
            Self::FlatTopCos2 {
                peak,
                center,
                width,
                plateau,
            } => {
                let rise_end = center - 0.5 * plateau;
                let fall_start = center + 0.5 * plateau;
                let anchor = if t < rise_end - width || t > fall_start + width {
                    return Ok(0.0);
                } else if t < rise_end {
                    rise_end
                } else if t <= fall_start {
                    return Ok(if order == 0 { peak } else { 0.0 });
                } else {
                    fall_start
                };
                // cos²(κ(t − anchor)) = (1 + cos(2κ(t − anchor))) / 2
                let kappa = PI / (2.0 * width);
                let arg = 2.0 * kappa * (t - anchor);
                if order == 0 {
                    peak * 0.5 * (1.0 + arg.cos())
                } else {
                    peak * 0.5
                        * (2.0 * kappa).powi(order as i32)
                        * (arg + order as f64 * PI / 2.0).cos()
                }
            }
        })
    }

    /// ∫E₀ dt over the whole pulse; `None` for an unbounded envelope.
    pub fn area(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::Gaussian { peak, width, .. } => Some(peak * width * PI.sqrt()),
            Self::Sech { peak, width, .. } => Some(peak * width * PI),
            Self::FlatTopCos2 {
                peak,
                width,
                plateau,
                ..
            } => Some(peak * (plateau + width)),
        }
    }

    /// Width of the region where the envelope exceeds 1e−6 of its peak;
    /// `None` for an unbounded envelope.
    pub fn effective_duration(&self) -> Option<f64> {
        const LEVEL: f64 = 1e-6;
        match *self {
            Self::Constant { .. } => None,
            Self::Gaussian { width, .. } => Some(2.0 * width * (1.0 / LEVEL).ln().sqrt()),
            Self::Sech { width, .. } => Some(2.0 * width * (1.0 / LEVEL).acosh()),
            Self::FlatTopCos2 { width, plateau, .. } => Some(plateau + 2.0 * width),
        }
    }

    pub fn center(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::Gaussian { center, .. }
            | Self::Sech { center, .. }
            | Self::FlatTopCos2 { center, .. } => Some(center),
        }
    }

    /// Envelope delayed by `delay`.
    pub fn delayed(&self, delay: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Constant { .. } => {}
            Self::Gaussian { center, .. }
            | Self::Sech { center, .. }
            | Self::FlatTopCos2 { center, .. } => *center += delay,
        }
        out
    }

    /// Envelope with the peak multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Constant { peak }
            | Self::Gaussian { peak, .. }
            | Self::Sech { peak, .. }
            | Self::FlatTopCos2 { peak, .. } => *peak *= factor,
        }
        out
    }
}

/// Physicists' Hermite polynomial H_n(x).
fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn sech(u: f64) -> f64 {
    // cosh overflows near |u| = 710; sech is exactly representable as 0 there anyway
    1.0 / u.cosh()
}

/// Coefficients (ascending in tanh u) of P_n with d^n/du^n sech u = sech u · P_n(tanh u).
fn sech_derivative_poly(order: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for _ in 0..order {
        // d/du [sech · P(T)] = sech · (−T·P + (1 − T²)·P′)
        let mut next = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            next[k + 1] -= c;
            if k > 0 {
                let d = c * k as f64;
                next[k - 1] += d;
                next[k + 1] -= d;
            }
        }
        p = next;
    }
    p
}

/// Slowly varying part φ(t) of the optical phase Φ(t) = ωt + φ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PhaseSpec {
    Constant {
        phi0: f64,
    },
    /// `phi0 + rate·(t − t_ref)`
    LinearChirp {
        phi0: f64,
        rate: f64,
        #[serde(default)]
        t_ref: f64,
    },
    /// `phi0 + rate·(t − t_ref) + chirp·(t − t_ref)²`
    QuadraticChirp {
        phi0: f64,
        rate: f64,
        chirp: f64,
        #[serde(default)]
        t_ref: f64,
    },
    /// `phi0 + depth·sin(frequency·t + offset)`
    Sinusoidal {
        phi0: f64,
        depth: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Default for PhaseSpec {
    fn default() -> Self {
        Self::Constant { phi0: 0.0 }
    }
}

impl PhaseSpec {
    pub fn constant(phi0: f64) -> Self {
        Self::Constant { phi0 }
    }

    pub fn linear_chirp(phi0: f64, rate: f64) -> Self {
        Self::LinearChirp {
            phi0,
            rate,
            t_ref: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let values: Vec<(&'static str, f64)> = match *self {
            Self::Constant { phi0 } => vec![("phase.phi0", phi0)],
            Self::LinearChirp { phi0, rate, t_ref } => vec![
                ("phase.phi0", phi0),
                ("phase.rate", rate),
                ("phase.t_ref", t_ref),
            ],
            Self::QuadraticChirp {
                phi0,
                rate,
                chirp,
                t_ref,
            } => vec![
                ("phase.phi0", phi0),
                ("phase.rate", rate),
                ("phase.chirp", chirp),
                ("phase.t_ref", t_ref),
            ],
            Self::Sinusoidal {
                phi0,
                depth,
                frequency,
                offset,
            } => vec![
                ("phase.phi0", phi0),
                ("phase.depth", depth),
                ("phase.frequency", frequency),
                ("phase.offset", offset),
            ],
        };
        for (name, v) in values {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// `order`-th time derivative of φ at `t`.
    pub fn derivative(&self, t: f64, order: usize) -> Result<f64, ModelError> {
        check_order(order)?;
        Ok(match *self {
            Self::Constant { phi0 } => {
                if order == 0 {
                    phi0
                } else {
                    0.0
                }
            }
            Self::LinearChirp { phi0, rate, t_ref } => match order {
                0 => phi0 + rate * (t - t_ref),
                1 => rate,
                _ => 0.0,
            },
            Self::QuadraticChirp {
                phi0,
                rate,
                chirp,
                t_ref,
            } => {
                let s = t - t_ref;
                match order {
                    0 => phi0 + rate * s + chirp * s * s,
                    1 => rate + 2.0 * chirp * s,
                    2 => 2.0 * chirp,
                    _ => 0.0,
                }
            }
            Self::Sinusoidal {
                phi0,
                depth,
                frequency,
                offset,
            } => {
                let arg = frequency * t + offset + order as f64 * PI / 2.0;
                let d = depth * frequency.powi(order as i32) * arg.sin();
                if order == 0 {
                    phi0 + d
                } else {
                    d
                }
            }
        })
    }

    /// Same phase law with the constant part shifted by `delta`.
    pub fn offset_by(&self, delta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Constant { phi0 }
            | Self::LinearChirp { phi0, .. }
            | Self::QuadraticChirp { phi0, .. }
            | Self::Sinusoidal { phi0, .. } => *phi0 += delta,
        }
        out
    }

    /// Phase law delayed by `delay`: the result evaluates φ(t − delay).
    pub fn delayed(&self, delay: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Constant { .. } => {}
            Self::LinearChirp { t_ref, .. } | Self::QuadraticChirp { t_ref, .. } => *t_ref += delay,
            Self::Sinusoidal {
                frequency, offset, ..
            } => *offset -= *frequency * delay,
        }
        out
    }
}

/// Classical field E(t) = E₀(t)·cos(ωt + φ(t)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingField {
    pub carrier: f64,
    pub envelope: EnvelopeSpec,
    #[serde(default)]
    pub phase: PhaseSpec,
}

impl DrivingField {
    pub fn new(carrier: f64, envelope: EnvelopeSpec, phase: PhaseSpec) -> Result<Self, ModelError> {
        let field = Self {
            carrier,
            envelope,
            phase,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.carrier.is_finite() && self.carrier >= 0.0) {
            return Err(invalid("field.carrier", "must be finite and >= 0"));
        }
        self.envelope.validate()?;
        self.phase.validate()
    }

    pub fn with_phase(&self, phase: PhaseSpec) -> Self {
        Self {
            phase,
            ..self.clone()
        }
    }

    pub fn with_envelope(&self, envelope: EnvelopeSpec) -> Self {
        Self {
            envelope,
            ..self.clone()
        }
    }

    /// The same pulse, delayed by `delay` on a phase-locked carrier.
    pub fn delayed(&self, delay: f64) -> Self {
        Self {
            carrier: self.carrier,
            envelope: self.envelope.delayed(delay),
            phase: self.phase.delayed(delay),
        }
    }
}

/// Initial constant material phases φ_g and φ_e.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialPhases {
    #[serde(default)]
    pub phi_g: f64,
    #[serde(default)]
    pub phi_e: f64,
}

impl InitialPhases {
    pub fn new(phi_g: f64, phi_e: f64) -> Result<Self, ModelError> {
        if !phi_g.is_finite() {
            return Err(invalid("phi_g", "must be finite"));
        }
        if !phi_e.is_finite() {
            return Err(invalid("phi_e", "must be finite"));
        }
        Ok(Self { phi_g, phi_e })
    }
}

/// ∂ₜⁿ Ω(t) with Ω = μE₀(t).
pub fn rabi_frequency(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
    order: usize,
) -> Result<f64, ModelError> {
    Ok(system.mu * field.envelope.derivative(t, order)?)
}

/// Order 0: Φ(t) = ωt + φ(t). Higher orders: ∂ₜⁿ Φ(t).
pub fn optical_phase(field: &DrivingField, t: f64, order: usize) -> Result<f64, ModelError> {
    let phi = field.phase.derivative(t, order)?;
    Ok(match order {
        0 => field.carrier * t + phi,
        1 => field.carrier + phi,
        _ => phi,
    })
}

/// Δω̃ = Δω − iγ/2 = (Δω − γ″/2) − iγ′/2, with Δω = ω_e − ω_g − ω.
pub fn complex_detuning(system: &TwoLevelSystem, field: &DrivingField) -> Complex64 {
    let detuning = system.transition() - field.carrier;
    Complex64::new(detuning, 0.0) - Complex64::i() * system.gamma() / 2.0
}

/// E(t) = E₀(t)·cos Φ(t).
pub fn instantaneous_field(field: &DrivingField, t: f64) -> f64 {
    // order 0 never exceeds the registry limit
    let envelope = field.envelope.derivative(t, 0).unwrap_or(0.0);
    let phase = optical_phase(field, t, 0).unwrap_or(0.0);
    envelope * phase.cos()
}
