use std::f64::consts::PI;

use maglev_core::phaselock::{demodulate, LockConfig, LockedReadout};
use maglev_core::sensing::{shot_noise_psd, LaserSpec};
use maglev_core::spectra::{noise_floor, WelchAccumulator, Window};

const LAMBDA: f64 = 637e-9;
const RATE: f64 = 200e3;

fn laser() -> LaserSpec {
    LaserSpec::new(LAMBDA, 1e7, 1e7).unwrap()
}

#[test]
fn motionless_particle_shows_the_shot_noise_floor() {
    let mut readout = LockedReadout::new(laser(), LockConfig::disabled(RATE), 3).unwrap();
    let mut welch = WelchAccumulator::new(4096, RATE, Window::Hann).unwrap();
    for i in 0..400_000 {
        let s = readout.measure(i as f64 / RATE, 0.0, 0.0).unwrap();
        welch.push(s.displacement_estimate(LAMBDA));
    }
    let floor = noise_floor(&welch.finish().unwrap(), (1e3, 50e3), &[]).unwrap();
    let expected = (2.0 * shot_noise_psd(LAMBDA, 1e7).unwrap()).sqrt();
    assert!((floor / expected - 1.0).abs() < 0.1, "{floor} vs {expected}");
}

fn tracked_amplitude(cfg: LockConfig, amplitude: f64, f: f64) -> f64 {
    let mut readout = LockedReadout::new(laser(), cfg, 5).unwrap();
    let periods = 20.0;
    let settle = (0.01 * RATE) as usize;
    let n = (periods * RATE / f).round() as usize;
    let mut est = Vec::with_capacity(n);
    for i in 0..settle + n {
        let t = i as f64 / RATE;
        let s = readout.measure(t, amplitude * (2.0 * PI * f * t).sin(), 0.0).unwrap();
        if i >= settle {
            est.push(s.displacement_estimate(LAMBDA));
        }
    }
    demodulate(&est, RATE, f)
}

#[test]
fn lock_extends_linear_range_to_five_wavelengths() {
    let cfg = LockConfig::new(20e3, RATE);
    for &a in &[LAMBDA / 80.0, LAMBDA / 8.0, LAMBDA, 5.0 * LAMBDA] {
        let got = tracked_amplitude(cfg, a, 217.0);
        assert!((got / a - 1.0).abs() < 0.05, "amplitude {a}: got {got}");
    }
}

#[test]
fn open_loop_readout_is_linear_only_below_an_eighth_wavelength() {
    let cfg = LockConfig::disabled(RATE);
    let small = tracked_amplitude(cfg, LAMBDA / 80.0, 217.0);
    assert!((small / (LAMBDA / 80.0) - 1.0).abs() < 0.05);
    let large = tracked_amplitude(cfg, LAMBDA / 4.0, 217.0);
    assert!((large / (LAMBDA / 4.0) - 1.0).abs() > 0.05, "{large}");
}

#[test]
fn linearized_output_has_no_mean_offset_over_whole_periods() {
    for &hz_per_volt in &[2000.0, 8000.0, 30000.0] {
        let cfg = LockConfig::from_hz_per_volt(hz_per_volt, RATE);
        let mut readout = LockedReadout::new(laser(), cfg, 9).unwrap();
        let (a, f) = (LAMBDA / 16.0, 200.0);
        let per = (RATE / f) as usize;
        let mut acc = 0.0;
        let n = 50 * per;
        for i in 0..n {
            let t = i as f64 / RATE;
            let z = a * (2.0 * PI * f * t).sin();
            let s = readout.measure(t, z, 0.0).unwrap();
            acc += s.linearized_output(LAMBDA) - z;
        }
        let mean = acc / n as f64;
        assert!(mean.abs() < 0.01 * a, "{hz_per_volt} Hz/V: mean offset {mean}");
    }
}
