use phasedyn::hydro::{
    continuity_residual, free_gaussian, harmonic_state, hj_residual, split_step_frames,
    split_step_solve, GridWavefunction, PotentialSpec,
};
use phasedyn::Complex64;

fn harmonic() -> PotentialSpec {
    PotentialSpec::Harmonic {
        mass: 1.0,
        omega0: 1.0,
        center: 0.0,
    }
}

fn moving_gaussian() -> Vec<GridWavefunction> {
    let n = 1024;
    let psi0 = GridWavefunction::from_fn(-20.0, 40.0 / n as f64, n, 1.0, 0.0, |x| {
        free_gaussian(x, 0.0, 1.0, 1.0, -3.0, 1.5)
    })
    .unwrap();
    split_step_solve(&psi0, &PotentialSpec::Free, 1.0, 0.01).unwrap()
}

#[test]
fn stationary_harmonic_frames_satisfy_both_equations() {
    // exact eigenstate evolution ψ₀(x)e^{−iEt}; the quantum potential's
    // stencil error grows like dx²x⁴ in the tails, hence the fine grid
    let n = 1 << 16;
    let dx = 11.0 / n as f64;
    let frames: Vec<GridWavefunction> = (0..4)
        .map(|j| {
            let t = 0.05 * j as f64;
            GridWavefunction::from_fn(-5.5, dx, n, 1.0, t, |x| {
                harmonic_state(x, 0, 1.0, 1.0, 0.0) * Complex64::from_polar(1.0, -0.5 * t)
            })
            .unwrap()
        })
        .collect();
    let hj = hj_residual(&frames, &harmonic()).unwrap();
    let ct = continuity_residual(&frames, 1.0).unwrap();
    assert!(hj.l2_max <= 1e-6, "{:e}", hj.l2_max);
    assert!(ct.l2_max <= 1e-8, "{:e}", ct.l2_max);
}

#[test]
fn solver_keeps_the_harmonic_ground_state_stationary() {
    let n = 512;
    let dx = 20.0 / n as f64;
    let psi0 = GridWavefunction::from_fn(-10.0, dx, n, 1.0, 0.0, |x| {
        harmonic_state(x, 0, 1.0, 1.0, 0.0)
    })
    .unwrap();
    let frames = split_step_frames(&psi0, &harmonic(), 0.5, 1e-3, 100).unwrap();
    let ct = continuity_residual(&frames, 1.0).unwrap();
    assert!(ct.l2_max <= 1e-8, "{:e}", ct.l2_max);
}

#[test]
fn plane_wave_frames_have_no_residual() {
    let k = 3.0;
    let n = 256;
    let dx = 16.0 / n as f64;
    let frames: Vec<GridWavefunction> = (0..5)
        .map(|j| {
            let t = 0.01 * j as f64;
            GridWavefunction::from_fn(-8.0, dx, n, 1.0, t, |x| {
                Complex64::from_polar(1.0, k * x - k * k * t / 2.0)
            })
            .unwrap()
        })
        .collect();
    let hj = hj_residual(&frames, &PotentialSpec::Free).unwrap();
    assert!(hj.l2_max <= 1e-10, "{:e}", hj.l2_max);
}

#[test]
fn solver_frames_keep_their_norm() {
    let frames = moving_gaussian();
    let n0 = frames[0].norm();
    for f in &frames {
        assert!((f.norm() - n0).abs() <= 1e-10, "{:e}", f.norm() - n0);
    }
}

#[test]
fn amplitude_and_phase_are_both_needed() {
    let frames = moving_gaussian();
    let hj = hj_residual(&frames, &PotentialSpec::Free).unwrap();
    let ct = continuity_residual(&frames, 1.0).unwrap();

    // keep R, drop S
    let amplitude_only: Vec<GridWavefunction> = frames
        .iter()
        .map(|f| {
            let mut g = f.clone();
            g.values
                .iter_mut()
                .for_each(|v| *v = Complex64::new(v.norm(), 0.0));
            g
        })
        .collect();
    let hj_r = hj_residual(&amplitude_only, &PotentialSpec::Free).unwrap();
    let ct_r = continuity_residual(&amplitude_only, 1.0).unwrap();

    // keep S, flatten R to the packet's peak value
    let phase_only: Vec<GridWavefunction> = frames
        .iter()
        .map(|f| {
            let peak = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let mut g = f.clone();
            g.values
                .iter_mut()
                .for_each(|v| *v = Complex64::from_polar(peak, v.arg()));
            g
        })
        .collect();
    let ct_s = continuity_residual(&phase_only, 1.0).unwrap();
    let hj_s = hj_residual(&phase_only, &PotentialSpec::Free).unwrap();

    for broken in [hj_r.l2_rms, hj_s.l2_rms] {
        assert!(broken > 100.0 * hj.l2_rms, "{broken:e} vs {:e}", hj.l2_rms);
    }
    for broken in [ct_r.l2_rms, ct_s.l2_rms] {
        assert!(broken > 100.0 * ct.l2_rms, "{broken:e} vs {:e}", ct.l2_rms);
    }
}
