use std::f64::consts::PI;

use maglev_core::control::{
    closed_loop_psd, measured_psd_with_squashing, optimal_gain, run_in_loop, variance_and_teff, BandpassSpec,
    InLoopSpec,
};
use maglev_core::physics::{OscillatorMode, KB};

mod common;
use common::{hann_smeared, quadrature};

const F0: f64 = 1000.0;
const S_EE: f64 = 1e-22;

fn mode() -> OscillatorMode {
    OscillatorMode::from_frequency(6e-9, F0, 2.0 * PI * F0).unwrap()
}

// bath chosen so S_FN/(m²ω₀²S_εε) = 900 (rad/s)²
fn bath_temperature(m: &OscillatorMode) -> f64 {
    let s_fn = 900.0 * (m.mass() * m.omega0()).powi(2) * S_EE;
    s_fn / (2.0 * m.mass() * m.gamma() * KB)
}

fn spec(gamma_fb: f64, min_duration: f64, seed: u64) -> InLoopSpec {
    let m = mode();
    let total = m.gamma() + gamma_fb;
    InLoopSpec {
        mode: m,
        bath_temperature: bath_temperature(&m),
        s_ee: S_EE,
        feedback: BandpassSpec {
            center: F0,
            bandwidth: 20.0 * F0,
            gamma_fb,
            // one step of actuation delay plus half a step from the difference
            phase: PI / 2.0 + 2.0 * PI * F0 * 1.5 / 1e5,
            force_limit: 1.0,
        },
        sample_rate: 1e5,
        settle: 8.0 / total,
        duration: (400.0 / total).max(min_duration),
        segment_length: 1 << 14,
        seed,
    }
}

#[test]
fn optimal_gain_of_the_fixture() {
    let m = mode();
    let s_fn = 2.0 * m.mass() * m.gamma() * KB * bath_temperature(&m);
    let g = optimal_gain(s_fn, S_EE, &m).unwrap();
    assert!((g / (901f64.sqrt() - 1.0) - 1.0).abs() < 1e-9);
}

#[test]
fn closed_form_variance_matches_quadrature() {
    for &q in &[10.0, 100.0, 1e4] {
        let m = OscillatorMode::from_frequency(6e-9, F0, q).unwrap();
        let s_fn = 1e-30;
        for &g in &[0.0, 0.1 * m.gamma(), 3.0 * m.gamma()] {
            let closed = variance_and_teff(&m, g, s_fn, S_EE).unwrap().variance;
            let numeric = quadrature(|w| closed_loop_psd(w, &m, g, s_fn, S_EE), m.omega0(), m.gamma() + g);
            let tol = if q >= 100.0 { 0.01 } else { 0.1 };
            assert!((numeric / closed - 1.0).abs() < tol, "Q={q} g={g}: {numeric} vs {closed}");
        }
    }
}

#[test]
fn simulated_variance_follows_theory_over_three_decades() {
    let m = mode();
    let s_fn = 2.0 * m.mass() * m.gamma() * KB * bath_temperature(&m);
    for (i, &g) in [0.3, 3.0, 30.0, 300.0].iter().enumerate() {
        let r = run_in_loop(&spec(g, 4.0, 100 + i as u64)).unwrap();
        let theory = variance_and_teff(&m, g, s_fn, S_EE).unwrap().variance;
        assert!((r.variance / theory - 1.0).abs() < 0.2, "γ_fb={g}: sim {} vs {theory}", r.variance);
        assert_eq!(r.clipped, 0);
    }
}

#[test]
fn in_loop_spectra_show_squashing() {
    let m = mode();
    let s_fn = 2.0 * m.mass() * m.gamma() * KB * bath_temperature(&m);
    let g_opt = optimal_gain(s_fn, S_EE, &m).unwrap();
    for (i, &g) in [3.0, 30.0, 300.0].iter().enumerate() {
        let r = run_in_loop(&spec(g, 100.0, 200 + i as u64)).unwrap();
        let est = &r.measured;
        let n = 1usize << 14;
        let fs = 1e5;
        let mut worst: (f64, f64) = (0.0, 0.0);
        for (f, p) in est.frequencies.iter().zip(&est.psd) {
            if *f < F0 / 2.0 || *f > 2.0 * F0 {
                continue;
            }
            let expected = hann_smeared(|x| measured_psd_with_squashing(2.0 * PI * x, &m, g, s_fn, S_EE), *f, n, fs);
            let dev = (p / expected - 1.0).abs();
            if dev > worst.0 {
                worst = (dev, *f);
            }
        }
        assert!(worst.0 < 0.15, "γ_fb={g}: worst {worst:?}");
        let at_peak = est.band_mean(0.98 * F0, 1.02 * F0);
        if g > g_opt {
            assert!(at_peak < 2.0 * S_EE, "γ_fb={g}: no dip");
        } else if g < g_opt {
            assert!(at_peak > 2.0 * S_EE);
        }
    }
}
