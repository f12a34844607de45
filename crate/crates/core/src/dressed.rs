//! Closed-form dressed-state structure of the driven, damped two-level system.
//!
//! Eliminating the excited amplitude from the rotating-wave equations gives
//! `ä_g + iD ȧ_g + (Ω²/4) a_g = 0` with the effective complex detuning
//!
//! ```text
//! D = Δω̃′ = Δω̃ − ∂ₜφ + iΩ⁻¹∂ₜΩ
//! ```
//!
//! The dressed frequencies follow from
//!
//! ```text
//! Ω̃′  = [D² + Ω² − 2i∂ₜD]^{1/2}
//! Λ±  = (D ± Ω̃′)/2,      Λ̃′± = Λ± − (i/2)Ω̃′⁻¹∂ₜΩ̃′
//! ω_G = ω_g + Λ̃′₋,       ω_E = ω_e − Λ̃′₋
//! ω̃′_E = ω_E − ∂ₜφ − γ″/2 − i(γ′/2 − Ω⁻¹∂ₜΩ)
//! ```
//!
//! and the four material phases are cumulative integrals of ω_G and ω̃′_E with
//! additive constants that depend on which bare state the system starts in.
//! Phases are complex; the imaginary part carries the accumulated amplitude
//! growth or decay.
//!
//! The square root is continued from the weak-field limit Ω̃′ → D (so that
//! Λ₋ → 0 and ω_G → ω_g as Ω → 0) and tracked by continuity along time grids.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{complex_detuning, DrivingField, InitialPhases, ModelError, TwoLevelSystem};
use crate::propagator::{Frame, TwoLevelState, TwoLevelTrajectory};

/// Dressed quantities are defined only where Ω(t) ≥ this fraction of peak Ω.
pub const OMEGA_FLOOR_FRACTION: f64 = 1e-9;
/// Below this |Ω̃′| the Λ̃′ derivative correction is undefined.
pub const BRANCH_FLOOR: f64 = 1e-12;
/// Highest order n accepted by [`adiabatic_report`]; it needs ∂ₜ^{n+1}.
pub const MAX_ADIABATIC_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DressedError {
    #[error("field below floor at t = {t}: Omega = {omega:e} < {floor:e}")]
    FieldBelowFloor { t: f64, omega: f64, floor: f64 },
    #[error("degenerate generalized Rabi frequency at t = {t}")]
    DegenerateRabi { t: f64 },
    #[error("non-monotone grid at index {index}")]
    NonMonotoneGrid { index: usize },
    #[error("adiabatic order {0} exceeds the supported maximum {MAX_ADIABATIC_ORDER}")]
    OrderTooHigh(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which column of the phase table applies: the bare state the system starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialConditionBranch {
    #[default]
    Ground,
    Excited,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveFrequencies {
    /// D = Δω̃ − ∂ₜφ + iΩ⁻¹∂ₜΩ.
    pub effective_detuning: Complex64,
    /// Ω̃′.
    pub gen_rabi: Complex64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub lambda_tilde_plus: Complex64,
    pub lambda_tilde_minus: Complex64,
    pub omega_G: Complex64,
    pub omega_E: Complex64,
    /// ω̃′_E.
    pub omega_E_eff: Complex64,
}

/// Φ_{G,r}, Φ_{G,v}, Φ_{E,r}, Φ_{E,v} at time `t`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedPhaseSet {
    pub t: f64,
    pub phi_G_r: Complex64,
    pub phi_G_v: Complex64,
    pub phi_E_r: Complex64,
    pub phi_E_v: Complex64,
}

impl DressedPhaseSet {
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.phi_G_r, self.phi_G_v, self.phi_E_r, self.phi_E_v]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderMargin {
    pub n: usize,
    /// max over the grid of ratio(n, k) for k = 0..=n+1.
    pub per_k: Vec<f64>,
    /// max over k.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticityReport {
    pub orders: Vec<OrderMargin>,
    pub margin: f64,
}

impl AdiabaticityReport {
    pub fn order(&self, n: usize) -> Option<&OrderMargin> {
        self.orders.iter().find(|o| o.n == n)
    }
}

/// Ω(t) and φ(t) with their derivatives at one instant.
struct Local {
    omega: [f64; 6],
    phi: [f64; 6],
    /// derivatives of g = Ω⁻¹∂ₜΩ, orders 0..=4
    log_rate: [f64; 5],
}

impl Local {
    fn at(system: &TwoLevelSystem, field: &DrivingField, t: f64) -> Result<Self, DressedError> {
        let mut omega = [0.0; 6];
        let mut phi = [0.0; 6];
        for k in 0..6 {
            omega[k] = system.mu * field.envelope.derivative(t, k)?;
            phi[k] = field.phase.derivative(t, k)?;
        }
        Ok(Self {
            log_rate: log_rate_derivatives(&omega),
            omega,
            phi,
        })
    }

    fn d(&self, detuning: Complex64) -> [Complex64; 3] {
        let i = Complex64::i();
        [
            detuning - self.phi[1] + i * self.log_rate[0],
            -self.phi[2] + i * self.log_rate[1],
            -self.phi[3] + i * self.log_rate[2],
        ]
    }
}

/// Derivatives of g = Ω′/Ω from Ω^{(m+1)} = Σⱼ C(m, j) g^{(j)} Ω^{(m−j)}.
/// A vanishing field gives g ≡ 0.
fn log_rate_derivatives(omega: &[f64; 6]) -> [f64; 5] {
    let mut g = [0.0; 5];
    if omega[0] == 0.0 {
        return g;
    }
    for m in 0..5 {
        let mut rest = 0.0;
        let mut binom = 1.0;
        for j in 0..m {
            rest += binom * g[j] * omega[m - j];
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        g[m] = (omega[m + 1] - rest) / omega[0];
    }
    g
}

fn peak_omega(system: &TwoLevelSystem, field: &DrivingField) -> f64 {
    system.mu * field.envelope.peak()
}

fn check_floor(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
    omega: f64,
) -> Result<(), DressedError> {
    let floor = OMEGA_FLOOR_FRACTION * peak_omega(system, field);
    if !(omega > 0.0 && omega >= floor) {
        return Err(DressedError::FieldBelowFloor { t, omega, floor });
    }
    Ok(())
}

/// Sign of the root: continuous with `reference` when given, otherwise the
/// weak-field continuation Ω̃′ → D.
fn choose_root(root: Complex64, detuning: Complex64, reference: Option<Complex64>) -> Complex64 {
    match reference {
        Some(prev) => {
            if (root - prev).norm() <= (root + prev).norm() {
                root
            } else {
                -root
            }
        }
        None => {
            let score = if detuning.norm() > 0.0 {
                (root * detuning.conj()).re
            } else if root.re != 0.0 {
                root.re
            } else {
                root.im
            };
            if score >= 0.0 {
                root
            } else {
                -root
            }
        }
    }
}

fn frequencies(
    system: &TwoLevelSystem,
    field: &DrivingField,
    local: &Local,
    t: f64,
    reference: Option<Complex64>,
    need_correction: bool,
) -> Result<EffectiveFrequencies, DressedError> {
    let i = Complex64::i();
    let [d, d1, d2] = local.d(complex_detuning(system, field));
    let omega = local.omega[0];
    let omega1 = local.omega[1];
    let radicand = d * d + omega * omega - 2.0 * i * d1;
    let s = choose_root(radicand.sqrt(), d, reference);

    let lambda_plus = (d + s) / 2.0;
    let lambda_minus = if (d + s).norm() >= (d - s).norm() && (d + s).norm() > 0.0 {
        // (D − s)/2 without cancellation when Ω ≪ |D|
        (2.0 * i * d1 - omega * omega) / (2.0 * (d + s))
    } else {
        (d - s) / 2.0
    };

    let correction = if s.norm() < BRANCH_FLOOR {
        let static_field = d1 == Complex64::new(0.0, 0.0) && omega1 == 0.0 && d2.norm() == 0.0;
        if need_correction && !static_field {
            return Err(DressedError::DegenerateRabi { t });
        }
        Complex64::new(0.0, 0.0)
    } else {
        let s1 = (d * d1 + omega * omega1 - i * d2) / s;
        -0.5 * i * s1 / s
    };

    let lambda_tilde_plus = lambda_plus + correction;
    let lambda_tilde_minus = lambda_minus + correction;
    let omega_g = system.omega_g + lambda_tilde_minus;
    let omega_e = system.omega_e - lambda_tilde_minus;
    let omega_e_eff = omega_e
        - local.phi[1]
        - system.gamma_im / 2.0
        - i * (system.gamma_re / 2.0 - local.log_rate[0]);

    Ok(EffectiveFrequencies {
        effective_detuning: d,
        gen_rabi: s,
        lambda_plus,
        lambda_minus,
        lambda_tilde_plus,
        lambda_tilde_minus,
        omega_G: omega_g,
        omega_E: omega_e,
        omega_E_eff: omega_e_eff,
    })
}

/// Effective complex detuning D = Δω̃ − ∂ₜφ + iΩ⁻¹∂ₜΩ at `t`.
pub fn effective_detuning(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<Complex64, DressedError> {
    let local = Local::at(system, field, t)?;
    Ok(local.d(complex_detuning(system, field))[0])
}

/// Ω̃′ at `t`, on the branch that reduces to D in the weak-field limit.
pub fn generalized_rabi(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<Complex64, DressedError> {
    let local = Local::at(system, field, t)?;
    Ok(frequencies(system, field, &local, t, None, false)?.gen_rabi)
}

/// All auxiliary dressed frequencies at `t`.
pub fn level_shifts(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<EffectiveFrequencies, DressedError> {
    let local = Local::at(system, field, t)?;
    frequencies(system, field, &local, t, None, true)
}

/// ω̃′_E at `t`.
pub fn effective_excited_frequency(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<Complex64, DressedError> {
    let local = Local::at(system, field, t)?;
    check_floor(system, field, t, local.omega[0])?;
    Ok(frequencies(system, field, &local, t, None, true)?.omega_E_eff)
}

fn check_grid(grid: &[f64]) -> Result<(), DressedError> {
    if grid.is_empty() {
        return Err(DressedError::NonMonotoneGrid { index: 0 });
    }
    for (k, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(DressedError::NonMonotoneGrid { index: k + 1 });
        }
    }
    Ok(())
}

/// Frequencies at every grid point plus the cumulative integrals of ω_G and
/// ω̃′_E from `grid[0]`, by composite Simpson with the integrand evaluated at
/// interval midpoints.
struct Integrated {
    at_nodes: Vec<EffectiveFrequencies>,
    /// (Ω, Ω⁻¹∂ₜΩ) at each node
    omega_nodes: Vec<(f64, f64)>,
    int_g: Vec<Complex64>,
    int_e: Vec<Complex64>,
}

fn integrate(
    system: &TwoLevelSystem,
    field: &DrivingField,
    grid: &[f64],
) -> Result<Integrated, DressedError> {
    check_grid(grid)?;
    let mut reference = None;
    let eval = |t: f64, reference: &mut Option<Complex64>| {
        let local = Local::at(system, field, t)?;
        check_floor(system, field, t, local.omega[0])?;
        let f = frequencies(system, field, &local, t, *reference, true)?;
        *reference = Some(f.gen_rabi);
        Ok::<_, DressedError>((f, (local.omega[0], local.log_rate[0])))
    };

    let (first, omega0) = eval(grid[0], &mut reference)?;
    let mut at_nodes = vec![first];
    let mut omega_nodes = vec![omega0];
    let zero = Complex64::new(0.0, 0.0);
    let mut int_g = vec![zero];
    let mut int_e = vec![zero];
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let (mid, _) = eval(0.5 * (w[0] + w[1]), &mut reference)?;
        let (end, omega_end) = eval(w[1], &mut reference)?;
        let start = at_nodes.last().unwrap();
        let g = h / 6.0 * (start.omega_G + 4.0 * mid.omega_G + end.omega_G);
        let e = h / 6.0 * (start.omega_E_eff + 4.0 * mid.omega_E_eff + end.omega_E_eff);
        int_g.push(int_g.last().unwrap() + g);
        int_e.push(int_e.last().unwrap() + e);
        at_nodes.push(end);
        omega_nodes.push(omega_end);
    }
    Ok(Integrated {
        at_nodes,
        omega_nodes,
        int_g,
        int_e,
    })
}

fn phase_sets(
    field: &DrivingField,
    phases: &InitialPhases,
    branch: InitialConditionBranch,
    grid: &[f64],
    integrated: &Integrated,
) -> Result<Vec<DressedPhaseSet>, DressedError> {
    let carrier = field.carrier;
    grid.iter()
        .enumerate()
        .map(|(k, &t)| {
            let phi = field.phase.derivative(t, 0)?;
            let optical = carrier * t;
            let ig = integrated.int_g[k];
            let ie = integrated.int_e[k];
            Ok(match branch {
                InitialConditionBranch::Ground => {
                    let base = phases.phi_g;
                    DressedPhaseSet {
                        t,
                        phi_G_r: base + ig,
                        phi_G_v: (base + phi) + (ig + optical),
                        phi_E_r: (base + phi) + ie,
                        phi_E_v: base + (ie - optical),
                    }
                }
                InitialConditionBranch::Excited => {
                    let base = phases.phi_e;
                    DressedPhaseSet {
                        t,
                        phi_E_r: base + ie,
                        phi_E_v: (base - phi) + (ie - optical),
                        phi_G_r: (base - phi) + ig,
                        phi_G_v: base + (ig + optical),
                    }
                }
            })
        })
        .collect()
}

/// The four cumulative material phases on `grid`, with `grid[0]` as the time
/// origin of the integrals.
///
/// Ground branch: `Φ_{G,r} = φ_g + ∫ω_G`, `Φ_{G,v} = φ_g + φ(t) + ∫(ω_G + ω)`,
/// `Φ_{E,r} = φ_g + φ(t) + ∫ω̃′_E`, `Φ_{E,v} = φ_g + ∫(ω̃′_E − ω)`.
/// Excited branch: φ_e replaces φ_g, and φ(t) moves to the excited-real and
/// ground-real components with a minus sign.
pub fn dressed_phases(
    system: &TwoLevelSystem,
    field: &DrivingField,
    phases: &InitialPhases,
    branch: InitialConditionBranch,
    grid: &[f64],
) -> Result<Vec<DressedPhaseSet>, DressedError> {
    let integrated = integrate(system, field, grid)?;
    phase_sets(field, phases, branch, grid, &integrated)
}

/// Instantaneous-diagonalization amplitudes (real component, virtual
/// component) of the rotating-wave Hamiltonian with complex detuning:
/// `(cos θ̃/2, ± sin θ̃/2)` with `tan θ̃ = Ω/Δω̃`, the sign being negative for
/// the excited branch.
pub fn dressed_amplitudes(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
    branch: InitialConditionBranch,
) -> Result<(Complex64, Complex64), DressedError> {
    let omega = system.mu * field.envelope.derivative(t, 0)?;
    check_floor(system, field, t, omega)?;
    let detuning = complex_detuning(system, field);
    let root = choose_root((detuning * detuning + omega * omega).sqrt(), detuning, None);
    // tan(θ̃/2) = Ω / (Ω̃ + Δω̃)
    let tan_half = omega / (root + detuning);
    let cos_half = (1.0 + tan_half * tan_half).sqrt().inv();
    let sin_half = tan_half * cos_half;
    Ok(match branch {
        InitialConditionBranch::Ground => (cos_half, sin_half),
        InitialConditionBranch::Excited => (cos_half, -sin_half),
    })
}

/// Bare-basis trajectory built from the dressed components that share a bare
/// basis vector: for the ground branch `c_g` from |G⟩_r and `c_e` from |G⟩_v;
/// for the excited branch `c_e` from |E⟩_r and `c_g` from |E⟩_v.
///
/// The real-component amplitude is fixed by the initial mixing at `grid[0]`;
/// its later evolution is carried by the imaginary part of the complex phase.
/// On the excited branch it is additionally scaled by `Ω(t₀)/Ω(t)`, which
/// cancels the modulus growth from the `iΩ⁻¹∂ₜΩ` term inside ω̃′_E.
/// The virtual component follows from the rotating-wave coupling equation
/// applied to the real one: `−2Λ̃′₋/Ω` (ground) or `2(Δω̃ − μ)/Ω` with
/// `μ = ω̃′_E − iΩ⁻¹∂ₜΩ − ω_g − ω` (excited) times the real amplitude.
pub fn assemble_bare_state(
    system: &TwoLevelSystem,
    field: &DrivingField,
    phases: &InitialPhases,
    branch: InitialConditionBranch,
    grid: &[f64],
) -> Result<TwoLevelTrajectory, DressedError> {
    let integrated = integrate(system, field, grid)?;
    let sets = phase_sets(field, phases, branch, grid, &integrated)?;
    let (real_amp, _) = dressed_amplitudes(system, field, grid[0], branch)?;
    let detuning = complex_detuning(system, field);
    let i = Complex64::i();
    let omega_start = integrated.omega_nodes[0].0;
    let states = sets
        .iter()
        .zip(&integrated.at_nodes)
        .zip(&integrated.omega_nodes)
        .map(|((set, freq), &(omega, log_rate))| match branch {
            InitialConditionBranch::Ground => {
                let ratio = -2.0 * freq.lambda_tilde_minus / omega;
                TwoLevelState::new(
                    real_amp * (-i * set.phi_G_r).exp(),
                    real_amp * ratio * (-i * set.phi_G_v).exp(),
                )
            }
            InitialConditionBranch::Excited => {
                // ω̃′_E carries +iΩ⁻¹∂ₜΩ, which grows the modulus as Ω(t);
                // the amplitude absorbs it so that only the net decay remains.
                let amp = real_amp * (omega_start / omega);
                let rate = freq.omega_E_eff - i * log_rate - system.omega_g - field.carrier;
                let ratio = 2.0 * (detuning - rate) / omega;
                TwoLevelState::new(
                    amp * ratio * (-i * set.phi_E_v).exp(),
                    amp * (-i * set.phi_E_r).exp(),
                )
            }
        })
        .collect();
    Ok(TwoLevelTrajectory::new(grid.to_vec(), states, Frame::Bare))
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        f64::INFINITY
    } else {
        numerator / denominator
    }
}

/// Generalized adiabatic condition: for each n ≤ `n_max` and k ∈ [0, n+1],
/// the grid maximum of
///
/// ```text
/// |∂ₜⁿ(∂ₜφ − iΩ⁻¹∂ₜΩ)| / (|Δω̃|^{n+1−k} |Ω(t)|^k)
/// ```
///
/// A vanishing denominator with a nonzero numerator is reported as +∞.
pub fn adiabatic_report(
    system: &TwoLevelSystem,
    field: &DrivingField,
    grid: &[f64],
    n_max: usize,
) -> Result<AdiabaticityReport, DressedError> {
    if n_max > MAX_ADIABATIC_ORDER {
        return Err(DressedError::OrderTooHigh(n_max));
    }
    check_grid(grid)?;
    let detuning = complex_detuning(system, field).norm();
    let mut per_order: Vec<Vec<f64>> = (0..=n_max).map(|n| vec![0.0; n + 2]).collect();
    for &t in grid {
        let local = Local::at(system, field, t)?;
        let omega = local.omega[0];
        check_floor(system, field, t, omega)?;
        for (n, row) in per_order.iter_mut().enumerate() {
            let numerator = Complex64::new(local.phi[n + 1], -local.log_rate[n]).norm();
            for (k, slot) in row.iter_mut().enumerate() {
                let denominator = detuning.powi((n + 1 - k) as i32) * omega.abs().powi(k as i32);
                *slot = slot.max(ratio(numerator, denominator));
            }
        }
    }
    let orders: Vec<OrderMargin> = per_order
        .into_iter()
        .enumerate()
        .map(|(n, per_k)| OrderMargin {
            n,
            worst: per_k.iter().copied().fold(0.0, f64::max),
            per_k,
        })
        .collect();
    let margin = orders.iter().map(|o| o.worst).fold(0.0, f64::max);
    Ok(AdiabaticityReport { orders, margin })
}

/// The "usual" condition value |Δω̃⁻¹ Ω⁻¹∂ₜΩ| (field-amplitude part only).
pub fn usual_adiabatic_value(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<f64, DressedError> {
    let local = Local::at(system, field, t)?;
    check_floor(system, field, t, local.omega[0])?;
    Ok(ratio(
        local.log_rate[0].abs(),
        complex_detuning(system, field).norm(),
    ))
}

/// The Born-Fock value |∂ₜΩ⁻¹| = |Ω⁻²∂ₜΩ|.
pub fn born_fock_value(
    system: &TwoLevelSystem,
    field: &DrivingField,
    t: f64,
) -> Result<f64, DressedError> {
    let local = Local::at(system, field, t)?;
    check_floor(system, field, t, local.omega[0])?;
    Ok((local.omega[1] / (local.omega[0] * local.omega[0])).abs())
}
