use std::f64::consts::PI;

use phasedyn::dressed::{dressed_phases, effective_detuning, level_shifts, InitialConditionBranch};
use phasedyn::hydro::{
    free_gaussian, momentum_field, polar_decompose, quantum_potential, GridWavefunction,
    DEFAULT_R_FLOOR,
};
use phasedyn::interferometry::{
    pulse_pair_population, reduce_phase, single_pulse_population, PulsePairConfig,
};
use phasedyn::model::{
    complex_detuning, optical_phase, DrivingField, EnvelopeSpec, InitialPhases, PhaseSpec,
    TwoLevelSystem,
};
use phasedyn::propagator::{rwa_propagate, uniform_grid, IntegratorConfig, TwoLevelState};
use phasedyn::Complex64;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

#[derive(Debug, Clone)]
struct Setup {
    system: TwoLevelSystem,
    field: DrivingField,
    grid: Vec<f64>,
}

fn phase_shape() -> impl Strategy<Value = PhaseSpec> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(PhaseSpec::constant),
        (-3.0..3.0f64, -0.05..0.05f64).prop_map(|(p, r)| PhaseSpec::linear_chirp(p, r)),
        (-3.0..3.0f64, -0.05..0.05f64, -2e-3..2e-3f64).prop_map(|(phi0, rate, chirp)| {
            PhaseSpec::QuadraticChirp {
                phi0,
                rate,
                chirp,
                t_ref: 0.0,
            }
        }),
    ]
}

fn setup() -> impl Strategy<Value = Setup> {
    (
        0.0..2.0f64,
        2.0..6.0f64,
        0.0..0.3f64,
        -0.1..0.1f64,
        0.3..1.5f64,
        4.0..10.0f64,
        phase_shape(),
    )
        .prop_map(|(omega_g, detuning, g_re, g_im, peak, width, phase)| {
            let carrier = 10.0;
            let system =
                TwoLevelSystem::new(omega_g, omega_g + carrier + detuning, 1.0, g_re, g_im)
                    .unwrap();
            let field = DrivingField::new(carrier, EnvelopeSpec::gaussian(peak, 0.0, width), phase)
                .unwrap();
            let grid = uniform_grid(-2.0 * width, 2.0 * width, 201);
            Setup {
                system,
                field,
                grid,
            }
        })
}

fn branch() -> impl Strategy<Value = InitialConditionBranch> {
    prop_oneof![
        Just(InitialConditionBranch::Ground),
        Just(InitialConditionBranch::Excited),
    ]
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn own_initial_phase_shifts_every_component(
        s in setup(),
        branch in branch(),
        phi_g in -3.0..3.0f64,
        phi_e in -3.0..3.0f64,
        c in -5.0..5.0f64,
    ) {
        let run = |g, e| {
            dressed_phases(&s.system, &s.field, &InitialPhases::new(g, e).unwrap(), branch, &s.grid)
                .unwrap()
        };
        let base = run(phi_g, phi_e);
        let (shifted, ignored) = match branch {
            InitialConditionBranch::Ground => (run(phi_g + c, phi_e), run(phi_g, phi_e + c)),
            InitialConditionBranch::Excited => (run(phi_g, phi_e + c), run(phi_g + c, phi_e)),
        };
        prop_assert_eq!(&ignored, &base);
        for (a, b) in base.iter().zip(&shifted) {
            for (p, q) in a.as_array().into_iter().zip(b.as_array()) {
                prop_assert!((q - p - c).norm() <= 1e-12, "{} vs {}", p, q);
            }
        }
    }

    #[test]
    fn constant_optical_offset_moves_two_ground_components(
        s in setup(),
        delta in -PI..PI,
    ) {
        let phases = InitialPhases::new(0.4, -0.9).unwrap();
        let shifted = s.field.with_phase(s.field.phase.offset_by(delta));
        let g = InitialConditionBranch::Ground;
        let a = dressed_phases(&s.system, &s.field, &phases, g, &s.grid).unwrap();
        let b = dressed_phases(&s.system, &shifted, &phases, g, &s.grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(y.phi_G_r, x.phi_G_r);
            prop_assert_eq!(y.phi_E_v, x.phi_E_v);
            prop_assert!((y.phi_G_v - x.phi_G_v - delta).norm() <= 1e-12);
            prop_assert!((y.phi_E_r - x.phi_E_r - delta).norm() <= 1e-12);
        }
    }

    #[test]
    fn virtual_and_real_differ_by_the_optical_phase(s in setup(), branch in branch()) {
        let phases = InitialPhases::new(0.2, 1.3).unwrap();
        let sets = dressed_phases(&s.system, &s.field, &phases, branch, &s.grid).unwrap();
        for set in &sets {
            let total = optical_phase(&s.field, set.t, 0).unwrap();
            let scale = 1e-13 * (1.0 + set.phi_G_v.norm().max(set.phi_E_v.norm()));
            match branch {
                InitialConditionBranch::Ground => {
                    prop_assert!((set.phi_G_v - set.phi_G_r - total).norm() <= scale);
                }
                InitialConditionBranch::Excited => {
                    prop_assert!((set.phi_E_v - set.phi_E_r + total).norm() <= scale);
                }
            }
        }
    }

    #[test]
    fn level_shifts_sum_and_split(s in setup(), k in 0usize..201) {
        let t = s.grid[k];
        let f = level_shifts(&s.system, &s.field, t).unwrap();
        let d = effective_detuning(&s.system, &s.field, t).unwrap();
        let scale = 1e-12 * (1.0 + d.norm() + f.gen_rabi.norm());
        prop_assert!((f.lambda_plus + f.lambda_minus - d).norm() <= scale);
        prop_assert!((f.lambda_plus - f.lambda_minus - f.gen_rabi).norm() <= scale);
        let shift_plus = f.lambda_tilde_plus - f.lambda_plus;
        let shift_minus = f.lambda_tilde_minus - f.lambda_minus;
        prop_assert!((shift_plus - shift_minus).norm() <= scale);
    }

    #[test]
    fn static_fields_split_the_bare_detuning(
        omega_g in 0.0..2.0f64,
        detuning in -5.0..5.0f64,
        g_re in 0.0..0.5f64,
        g_im in -0.2..0.2f64,
        peak in 0.1..3.0f64,
        phi0 in -3.0..3.0f64,
    ) {
        prop_assume!(detuning.abs() > 0.1);
        let carrier = 10.0;
        let system =
            TwoLevelSystem::new(omega_g, omega_g + carrier + detuning, 1.0, g_re, g_im).unwrap();
        let field = DrivingField::new(
            carrier,
            EnvelopeSpec::Constant { peak },
            PhaseSpec::constant(phi0),
        )
        .unwrap();
        let f = level_shifts(&system, &field, 0.0).unwrap();
        let bare = complex_detuning(&system, &field);
        prop_assert!((f.lambda_plus + f.lambda_minus - bare).norm() <= 1e-12 * (1.0 + bare.norm()));
        let root = (bare * bare + peak * peak).sqrt();
        prop_assert!(
            (f.gen_rabi - root).norm() <= 1e-12 * root.norm()
                || (f.gen_rabi + root).norm() <= 1e-12 * root.norm()
        );
        prop_assert_eq!(f.lambda_tilde_minus, f.lambda_minus);
    }

    #[test]
    fn quadrature_is_converged_on_fine_grids(s in setup()) {
        let phases = InitialPhases::new(0.1, 0.0).unwrap();
        let g = InitialConditionBranch::Ground;
        let (t0, t1) = (s.grid[0], s.grid[200]);
        let coarse = dressed_phases(&s.system, &s.field, &phases, g, &uniform_grid(t0, t1, 801)).unwrap();
        let fine = dressed_phases(&s.system, &s.field, &phases, g, &uniform_grid(t0, t1, 1601)).unwrap();
        for (k, c) in coarse.iter().enumerate() {
            for (p, q) in c.as_array().into_iter().zip(fine[2 * k].as_array()) {
                prop_assert!((p - q).norm() < 1e-8, "{}: {} vs {}", c.t, p, q);
            }
        }
    }

    #[test]
    fn resonant_rabi_matches_closed_form(rabi in 0.2..3.0f64, t1 in 1.0..20.0f64) {
        let system = TwoLevelSystem::lossless(0.0, 7.0, 1.0).unwrap();
        let field =
            DrivingField::new(7.0, EnvelopeSpec::Constant { peak: rabi }, PhaseSpec::default()).unwrap();
        let grid = uniform_grid(0.0, t1, 41);
        let cfg = IntegratorConfig::with_tolerance(1e-11, 1e-13);
        let traj = rwa_propagate(&system, &field, TwoLevelState::ground(), &grid, &cfg).unwrap();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let exact = (rabi * t / 2.0).sin().powi(2);
            prop_assert!((state.excited_population() - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn lossy_norm_never_grows(g_re in 0.01..1.0f64, detuning in -2.0..2.0f64, rabi in 0.2..2.0f64) {
        let system = TwoLevelSystem::new(0.0, 7.0 + detuning, 1.0, g_re, 0.0).unwrap();
        let field =
            DrivingField::new(7.0, EnvelopeSpec::Constant { peak: rabi }, PhaseSpec::default()).unwrap();
        let grid = uniform_grid(0.0, 15.0, 301);
        let cfg = IntegratorConfig::default();
        let traj = rwa_propagate(&system, &field, TwoLevelState::ground(), &grid, &cfg).unwrap();
        for w in traj.states.windows(2) {
            prop_assert!(w[1].norm_sqr() <= w[0].norm_sqr() + 1e-9);
        }
    }
}

fn wave(n: usize, sigma: f64, x0: f64, k0: f64) -> GridWavefunction {
    let dx = 30.0 / n as f64;
    GridWavefunction::from_fn(-15.0, dx, n, 1.0, 0.0, |x| {
        free_gaussian(x, 0.0, 1.0, sigma, x0, k0)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn polar_fields_rebuild_the_wavefunction(
        sigma in 0.8..2.0f64,
        x0 in -3.0..3.0f64,
        k0 in -2.0..2.0f64,
    ) {
        let psi = wave(1024, sigma, x0, k0);
        let fields = polar_decompose(&psi, DEFAULT_R_FLOOR);
        for ((a, b), ok) in fields.reconstruct().iter().zip(&psi.values).zip(&fields.valid) {
            if *ok {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn quantum_potential_ignores_complex_scale(
        sigma in 0.8..2.0f64,
        k0 in -2.0..2.0f64,
        modulus in 1e-3..1e3f64,
        angle in -PI..PI,
    ) {
        let psi = wave(1024, sigma, 0.5, k0);
        let c = Complex64::from_polar(modulus, angle);
        let mut scaled = psi.clone();
        scaled.values.iter_mut().for_each(|v| *v *= c);
        let u = quantum_potential(&polar_decompose(&psi, DEFAULT_R_FLOOR), 1.0);
        let w = quantum_potential(&polar_decompose(&scaled, DEFAULT_R_FLOOR), 1.0);
        prop_assert_eq!(u.iter().filter(|v| v.is_some()).count(), w.iter().filter(|v| v.is_some()).count());
        for (a, b) in u.iter().zip(&w) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn plane_wave_factor_boosts_momentum(
        sigma in 0.8..2.0f64,
        k0 in -1.5..1.5f64,
        boost in -2.0..2.0f64,
    ) {
        let psi = wave(2048, sigma, 0.0, k0);
        let mut boosted = psi.clone();
        for (i, v) in boosted.values.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, boost * psi.x(i));
        }
        let p = momentum_field(&polar_decompose(&psi, DEFAULT_R_FLOOR));
        let q = momentum_field(&polar_decompose(&boosted, DEFAULT_R_FLOOR));
        for (a, b) in p.iter().zip(&q) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((b - a - boost).abs() <= 1e-8, "{}", b - a - boost);
            }
        }
    }
}

fn weak_pair(area: f64, detuning: f64, delay: f64) -> (TwoLevelSystem, PulsePairConfig) {
    let width = 5.0;
    let system = TwoLevelSystem::lossless(0.0, 10.0 + detuning, 1.0).unwrap();
    let peak = area / (width * PI.sqrt());
    let base = DrivingField::new(
        10.0,
        EnvelopeSpec::gaussian(peak, 0.0, width),
        PhaseSpec::default(),
    )
    .unwrap();
    (system, PulsePairConfig::new(base, delay, 0.0).unwrap())
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn only_the_relative_phase_is_observable(
        common in -PI..PI,
        delta in 0.0..2.0 * PI,
        detuning in -0.2..0.2f64,
    ) {
        let cfg = IntegratorConfig::with_tolerance(1e-11, 1e-14);
        let (system, pair) = weak_pair(0.04 * PI, detuning, 60.0);
        let pair = pair.with_relative_phase(delta);
        let mut shifted = pair.clone();
        shifted.base = pair.base.with_phase(pair.base.phase.offset_by(common));
        let a = pulse_pair_population(&system, &pair, &cfg).unwrap();
        let b = pulse_pair_population(&system, &shifted, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-6), "{} vs {}", a, b);
    }

    #[test]
    fn weak_pulse_populations_scale_with_area_squared(
        delta in 0.0..2.0 * PI,
        detuning in -0.2..0.2f64,
        area in 0.01 * PI..0.05 * PI,
    ) {
        let cfg = IntegratorConfig::with_tolerance(1e-11, 1e-16);
        let (system, full) = weak_pair(area, detuning, 60.0);
        let (_, half) = weak_pair(area / 2.0, detuning, 60.0);
        let a = pulse_pair_population(&system, &full.with_relative_phase(delta), &cfg).unwrap();
        let b = pulse_pair_population(&system, &half.with_relative_phase(delta), &cfg).unwrap();
        prop_assume!(a > 1e-4 * area * area);
        prop_assert!((b / a - 0.25).abs() <= 0.05 * 0.25, "ratio {}", b / a);
    }

    #[test]
    fn constructive_pair_is_four_single_pulses(area in 0.01 * PI..0.05 * PI) {
        let cfg = IntegratorConfig::with_tolerance(1e-11, 1e-16);
        let (system, pair) = weak_pair(area, 0.0, 80.0);
        let single = single_pulse_population(&system, &pair, &cfg).unwrap();
        let both = pulse_pair_population(&system, &pair.with_relative_phase(0.0), &cfg).unwrap();
        prop_assert!((both / single - 4.0).abs() <= 0.02 * 4.0, "{}", both / single);
    }

    #[test]
    fn relative_phase_is_taken_modulo_two_pi(delta in -20.0..20.0f64) {
        let r = reduce_phase(delta);
        prop_assert!((0.0..2.0 * PI).contains(&r));
        let turns = (delta - r) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}
