use std::f64::consts::PI;

use maglev_core::control::{measured_psd_with_squashing, min_variance, optimal_gain, variance_and_teff};
use maglev_core::feasibility::{
    critical_field, cavity_cq, decoherence_rates, freespace_cq, min_input_flux_cavity, min_input_flux_freespace,
    quench_temperature, CavitySpec, ThermalInput,
};
use maglev_core::physics::{
    equilibrium_displacement, photon_energy, probe_force, trap_frequency, OscillatorMode, HBAR, KB,
};
use maglev_core::sensing::{expected_ports, imprecision_backaction, interferometer_counts, LaserSpec, PhotonStatistics};
use maglev_core::spectra::{estimate_psd, Window};
use maglev_core::rng_from_seed;
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn mode_strategy() -> impl Strategy<Value = OscillatorMode> {
    (log_uniform(1e-10, 1e-7), log_uniform(10.0, 1000.0), log_uniform(1e2, 1e8))
        .prop_map(|(m, f, q)| OscillatorMode::from_frequency(m, f, q).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #[test]
    fn quadrupled_density_halves_trap_frequency(b in log_uniform(1.0, 1e4), rho in log_uniform(1e3, 3e4)) {
        let f1 = trap_frequency(b, rho).unwrap();
        let f4 = trap_frequency(b, 4.0 * rho).unwrap();
        prop_assert!(rel(f4, f1 / 2.0) < 1e-14);
    }

    #[test]
    fn probe_force_chain_is_spring_force(mode in mode_strategy(), b_ext in log_uniform(1e-9, 1e-4), grad in log_uniform(1.0, 1e3)) {
        let dz = equilibrium_displacement(b_ext, grad).unwrap();
        let f = probe_force(&mode, dz);
        let direct = mode.mass() * mode.omega0().powi(2) * b_ext / grad;
        prop_assert!(rel(f, direct) < 1e-12);
    }

    #[test]
    fn mode_round_trip(m in log_uniform(1e-10, 1e-7), f in log_uniform(1.0, 1e4), q in log_uniform(1.0, 1e9)) {
        let mode = OscillatorMode::from_frequency(m, f, q).unwrap();
        prop_assert!(rel(mode.gamma() * mode.q(), mode.omega0()) < 1e-14);
        prop_assert!(rel(mode.omega0(), 2.0 * PI * f) < 1e-14);
    }

    #[test]
    fn imprecision_backaction_is_heisenberg_limited(lambda in log_uniform(2e-7, 2e-6), n in log_uniform(1.0, 1e20)) {
        let (imp, ba) = imprecision_backaction(2.0 * PI / lambda, n);
        prop_assert!(rel(imp * ba, HBAR * HBAR / 4.0) < 1e-12);
    }

    #[test]
    fn total_detected_flux_ignores_position(z in -1e-5..1e-5f64, phase in -PI..PI, n_det in log_uniform(1e4, 1e9)) {
        let laser = LaserSpec::new(637e-9, n_det, n_det).unwrap();
        let (a0, b0) = expected_ports(0.0, 0.0, &laser, 0.0, 1e-5);
        let (a, b) = expected_ports(z, phase, &laser, 0.0, 1e-5);
        prop_assert!(rel(a + b, a0 + b0) < 1e-12);
    }

    #[test]
    fn difference_never_exceeds_sum(z in -1e-6..1e-6f64, seed in any::<u64>()) {
        let laser = LaserSpec::new(637e-9, 1e7, 1e7).unwrap();
        let mut rng = rng_from_seed(seed);
        let rec = interferometer_counts(0.0, z, 0.0, &laser, 0.0, 5e-6, &PhotonStatistics::default(), &mut rng);
        prop_assert!(rec.count_diff().unsigned_abs() <= rec.count_sum());
    }

    #[test]
    fn cooled_variance_never_beats_the_optimum(
        mode in mode_strategy(),
        s_fn in log_uniform(1e-32, 1e-22),
        s_ee in log_uniform(1e-26, 1e-16),
        scale in log_uniform(1e-3, 1e3),
    ) {
        let best = min_variance(s_fn, s_ee, &mode).unwrap();
        prop_assume!(best.gamma_opt > 0.0);
        let at_opt = variance_and_teff(&mode, best.gamma_opt, s_fn, s_ee).unwrap().variance;
        let elsewhere = variance_and_teff(&mode, best.gamma_opt * scale, s_fn, s_ee).unwrap().variance;
        prop_assert!(elsewhere >= at_opt * (1.0 - 1e-12));
        prop_assert!(rel(best.exact, at_opt) < 1e-9);
    }

    #[test]
    fn squashing_crossover_sits_at_optimal_gain(mode in mode_strategy(), s_fn in log_uniform(1e-32, 1e-22), s_ee in log_uniform(1e-26, 1e-16)) {
        let g = optimal_gain(s_fn, s_ee, &mode).unwrap();
        prop_assume!(g > 1e-6 * mode.gamma());
        let w = mode.omega0();
        let at = measured_psd_with_squashing(w, &mode, g, s_fn, s_ee) - s_ee;
        let below = measured_psd_with_squashing(w, &mode, 0.9 * g, s_fn, s_ee) - s_ee;
        let above = measured_psd_with_squashing(w, &mode, 1.1 * g, s_fn, s_ee) - s_ee;
        prop_assert!(below > 0.0);
        prop_assert!(above < 0.0);
        prop_assert!(at.abs() < 1e-9 * s_ee);
    }

    #[test]
    fn quantum_cooperativity_is_cooperativity_over_occupation(
        mode in mode_strategy(),
        t in log_uniform(1e-3, 300.0),
        lambda in log_uniform(4e-7, 2e-6),
        n_in in log_uniform(1e6, 1e20),
    ) {
        let k = 2.0 * PI / lambda;
        let s_fba = 4.0 * HBAR * HBAR * k * k * n_in;
        let (_, gamma_ba) = decoherence_rates(&mode, t, s_fba);
        let c_om = gamma_ba / mode.gamma();
        let n_th = KB * t / (HBAR * mode.omega0());
        let c_q = freespace_cq(&mode, ThermalInput::Temperature(t), lambda, n_in);
        prop_assert!(rel(c_q, c_om / n_th) < 1e-12);
    }

    #[test]
    fn quench_round_trip(h0 in log_uniform(1e3, 1e6), frac in 0.0..0.999f64, t_c in 1.0..20.0f64) {
        let h = frac * h0;
        let t = quench_temperature(h, h0, t_c).unwrap();
        prop_assert!(t > 0.0 && t <= t_c);
        prop_assert!((critical_field(t, h0, t_c) - h).abs() <= 1e-9 * h0);
    }

    #[test]
    fn power_is_flux_times_photon_energy(mode in mode_strategy(), t in log_uniform(1e-3, 10.0), eta in 0.2..1.0f64, finesse in log_uniform(1e3, 1e6)) {
        let fs = min_input_flux_freespace(&mode, ThermalInput::Temperature(t), 637e-9, eta).unwrap();
        prop_assert!(rel(fs.power, fs.n_in * 2.0 * PI * HBAR * maglev_core::physics::C_LIGHT / 637e-9) < 1e-12);
        let cav = CavitySpec::new(1.55e-6, 0.01, finesse, eta).unwrap();
        let c = min_input_flux_cavity(&mode, ThermalInput::Temperature(t), &cav).unwrap();
        prop_assert!(rel(c.power, c.n_in * photon_energy(1.55e-6)) < 1e-12);
    }

    #[test]
    fn cavity_requirement_is_length_independent(mode in mode_strategy(), finesse in log_uniform(1e3, 1e6), l_exp in -3.0..-1.0f64) {
        let thermal = ThermalInput::Temperature(0.015);
        let short = CavitySpec::new(1.55e-6, 10f64.powf(l_exp), finesse, 0.75).unwrap();
        let long = CavitySpec::new(1.55e-6, 10f64.powf(l_exp + 2.0), finesse, 0.75).unwrap();
        let a = min_input_flux_cavity(&mode, thermal, &short).unwrap().n_in;
        let b = min_input_flux_cavity(&mode, thermal, &long).unwrap().n_in;
        prop_assert!(rel(a, b) < 1e-4);
        prop_assert!(cavity_cq(&mode, thermal, &short, a) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psd_scales_with_the_square_of_the_input(a in log_uniform(1e-12, 1e6), seed in any::<u64>()) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| a * v).collect();
        let px = estimate_psd(&x, 1000.0, 512, Window::Hann).unwrap();
        let py = estimate_psd(&y, 1000.0, 512, Window::Hann).unwrap();
        for (p, q) in px.psd.iter().zip(&py.psd) {
            prop_assert!((q - a * a * p).abs() <= 1e-12 * a * a * p.abs().max(1e-300));
        }
    }
}
