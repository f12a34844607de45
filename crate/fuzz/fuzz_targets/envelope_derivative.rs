#![no_main]

use libfuzzer_sys::fuzz_target;
use phasedyn::model::{EnvelopeSpec, PhaseSpec, MAX_DERIVATIVE_ORDER};

fuzz_target!(|input: (u8, [f64; 4], u8, [f64; 4], f64)| {
    let (env_tag, e, phase_tag, p, t) = input;
    let envelope = match env_tag % 4 {
        0 => EnvelopeSpec::Constant { peak: e[0] },
        1 => EnvelopeSpec::Gaussian { peak: e[0], center: e[1], width: e[2] },
        2 => EnvelopeSpec::Sech { peak: e[0], center: e[1], width: e[2] },
        _ => EnvelopeSpec::FlatTopCos2 { peak: e[0], center: e[1], width: e[2], plateau: e[3] },
    };
    let phase = match phase_tag % 4 {
        0 => PhaseSpec::Constant { phi0: p[0] },
        1 => PhaseSpec::LinearChirp { phi0: p[0], rate: p[1], t_ref: p[2] },
        2 => PhaseSpec::QuadraticChirp { phi0: p[0], rate: p[1], chirp: p[2], t_ref: p[3] },
        _ => PhaseSpec::Sinusoidal { phi0: p[0], depth: p[1], frequency: p[2], offset: p[3] },
    };
    let order_limit = MAX_DERIVATIVE_ORDER + 1;
    for order in 0..=order_limit {
        let _ = phase.validate().map(|_| phase.derivative(t, order));
    }
    if envelope.validate().is_err() || !t.is_finite() {
        return;
    }
    for order in 0..=order_limit {
        let value = envelope.derivative(t, order);
        assert_eq!(value.is_err(), order > MAX_DERIVATIVE_ORDER);
    }
    let value = envelope.derivative(t, 0).unwrap();
    let peak = envelope.peak();
    if value.is_finite() {
        // subnormal peaks carry only absolute precision
        let slack = 1e-12 * peak + f64::MIN_POSITIVE;
        assert!(value >= -slack && value <= peak + slack, "{value} vs {peak}");
    }
});
