//! Stochastic time-domain simulation of the trapped particle.
//!
//! Each axis is an independent damped harmonic oscillator driven by white
//! thermal force noise, deterministic sinusoidal drives and a feedback force.
//! Integration is exact for the linear SDE: the state is propagated with the
//! oscillator's transition matrix and the noise is injected with the exact
//! one-step covariance, forces being held constant across a step.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::{self, Write};

use rand_distr::{Distribution, StandardNormal};

use crate::physics::{OscillatorMode, KB};
use crate::{rng_from_seed, Error, Result, SimRng};

/// Two-sided thermal force PSD 2γ m k_B T [N²/Hz].
pub fn thermal_force_psd(mode: &OscillatorMode, temperature: f64) -> f64 {
    2.0 * mode.gamma() * mode.mass() * KB * temperature
}

/// Expected phonon occupation during a ring-up, n(t) = n₀ + Γ_th·t.
pub fn ring_up_energy(n0: f64, gamma_th: f64, t: f64) -> f64 {
    n0 + gamma_th * t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integrator step [s].
    pub dt: f64,
    /// Trajectory record rate [Hz]; must divide the integrator rate.
    pub sample_rate: f64,
    pub duration: f64,
    pub seed: u64,
    /// Modes for x, y, z. Inactive axes stay at rest.
    pub modes: [Option<OscillatorMode>; 3],
    /// Effective environmental temperature [K].
    pub bath_temperature: f64,
    /// Steps between a controller update and the application of its force.
    pub feedback_delay: usize,
    /// Excursion [m] beyond which the run is declared unstable.
    pub instability_bound: f64,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, seed: u64, modes: [Option<OscillatorMode>; 3]) -> Self {
        Self {
            dt,
            sample_rate: 1.0 / dt,
            duration,
            seed,
            modes,
            bath_temperature: 0.0,
            feedback_delay: 1,
            instability_bound: 1e-3,
        }
    }

    /// Single active axis.
    pub fn single_axis(axis: usize, mode: OscillatorMode, dt: f64, duration: f64, seed: u64) -> Self {
        let mut modes = [None; 3];
        modes[axis] = Some(mode);
        Self::new(dt, duration, seed, modes)
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.bath_temperature = t;
        self
    }

    pub fn with_sample_rate(mut self, rate: f64) -> Self {
        self.sample_rate = rate;
        self
    }

    pub fn with_delay(mut self, steps: usize) -> Self {
        self.feedback_delay = steps;
        self
    }

    /// Checks every invariant and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= 0.0) {
            problems.push("duration must be non-negative".to_string());
        }
        if self.modes.iter().all(Option::is_none) {
            problems.push("at least one axis must be active".to_string());
        }
        let f_max = self
            .modes
            .iter()
            .flatten()
            .map(OscillatorMode::frequency)
            .fold(0.0, f64::max);
        if f_max > 0.0 && self.dt > 1.0 / (50.0 * f_max) * (1.0 + 1e-9) {
            problems.push(format!(
                "dt = {:e} s gives fewer than 50 steps per period of the {f_max} Hz mode",
                self.dt
            ));
        }
        if !(self.sample_rate > 0.0) || self.sample_rate * self.dt > 1.0 + 1e-9 {
            problems.push(format!(
                "sample rate {} Hz exceeds the integrator rate {} Hz",
                self.sample_rate,
                1.0 / self.dt
            ));
        } else {
            let ratio = 1.0 / (self.sample_rate * self.dt);
            if (ratio - ratio.round()).abs() > 1e-6 * ratio {
                problems.push(format!(
                    "integrator rate is not an integer multiple of the sample rate ({ratio})"
                ));
            }
        }
        if !(self.bath_temperature >= 0.0) {
            problems.push("bath temperature must be non-negative".to_string());
        }
        if !(self.instability_bound > 0.0) {
            problems.push("instability bound must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Integrator steps per recorded sample.
    pub fn decimation(&self) -> usize {
        (1.0 / (self.sample_rate * self.dt)).round().max(1.0) as usize
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OscState {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub t: f64,
}

impl OscState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn displaced(axis: usize, x: f64) -> Self {
        let mut s = Self::default();
        s.x[axis] = x;
        s
    }
}

/// F(t) = amplitude · sin(2π f t + phase) on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineDrive {
    pub axis: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl SineDrive {
    pub fn force(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t + self.phase).sin()
    }
}

/// A causal controller: sees the state at each step and returns the force it
/// commands. Measurement models live inside the implementation.
pub trait Feedback {
    fn update(&mut self, state: &OscState) -> Result<[f64; 3]>;
}

pub struct NoFeedback;

impl Feedback for NoFeedback {
    fn update(&mut self, _state: &OscState) -> Result<[f64; 3]> {
        Ok([0.0; 3])
    }
}

impl<F> Feedback for F
where
    F: FnMut(&OscState) -> [f64; 3],
{
    fn update(&mut self, state: &OscState) -> Result<[f64; 3]> {
        Ok(self(state))
    }
}

/// State transition matrix of x'' + γx' + ω₀²x = 0 over time `s`.
fn transition(omega0: f64, gamma: f64, s: f64) -> [[f64; 2]; 2] {
    let disc = 0.25 * gamma * gamma - omega0 * omega0;
    let (c, sn) = if disc < 0.0 {
        let wd = (-disc).sqrt();
        ((wd * s).cos(), (wd * s).sin() / wd)
    } else if disc > 0.0 {
        let wd = disc.sqrt();
        ((wd * s).cosh(), (wd * s).sinh() / wd)
    } else {
        (1.0, s)
    };
    let e = (-0.5 * gamma * s).exp();
    [
        [e * (c + 0.5 * gamma * sn), e * sn],
        [-e * omega0 * omega0 * sn, e * (c - 0.5 * gamma * sn)],
    ]
}

// 8-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Covariance of the noise accumulated over one step, ∫₀ʰ g gᵀ ds · D with g
/// the velocity-impulse response and D = 2γk_BT/m.
fn step_covariance(omega0: f64, gamma: f64, diffusion: f64, h: f64) -> [f64; 3] {
    let rate = omega0.max(gamma);
    let panels = ((rate * h) / 0.5).ceil().max(1.0) as usize;
    let width = h / panels as f64;
    let mut acc = [0.0; 3];
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            for sgn in [-1.0, 1.0] {
                let s = mid + sgn * node * 0.5 * width;
                let phi = transition(omega0, gamma, s);
                let (g0, g1) = (phi[0][1], phi[1][1]);
                let w = weight * 0.5 * width;
                acc[0] += w * g0 * g0;
                acc[1] += w * g0 * g1;
                acc[2] += w * g1 * g1;
            }
        }
    }
    acc.map(|a| a * diffusion)
}

#[derive(Debug, Clone)]
struct AxisPropagator {
    phi: [[f64; 2]; 2],
    /// Cholesky factor (l11, l21, l22) of the step covariance.
    chol: [f64; 3],
    compliance: f64,
    noisy: bool,
}

impl AxisPropagator {
    fn new(mode: &OscillatorMode, temperature: f64, h: f64) -> Self {
        let (w0, g) = (mode.omega0(), mode.gamma());
        let phi = transition(w0, g, h);
        let diffusion = 2.0 * g * KB * temperature / mode.mass();
        let noisy = diffusion > 0.0;
        let chol = if noisy {
            let [s11, s12, s22] = step_covariance(w0, g, diffusion, h);
            let l11 = s11.sqrt();
            let l21 = s12 / l11;
            let l22 = (s22 - l21 * l21).max(0.0).sqrt();
            [l11, l21, l22]
        } else {
            [0.0; 3]
        };
        Self {
            phi,
            chol,
            compliance: 1.0 / (mode.mass() * w0 * w0),
            noisy,
        }
    }

    #[inline]
    fn advance(&self, x: &mut f64, v: &mut f64, force: f64, rng: &mut SimRng) {
        let xp = force * self.compliance;
        let dx = *x - xp;
        let nx = self.phi[0][0] * dx + self.phi[0][1] * *v + xp;
        let nv = self.phi[1][0] * dx + self.phi[1][1] * *v;
        if self.noisy {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            *x = nx + self.chol[0] * a;
            *v = nv + self.chol[1] * a + self.chol[2] * b;
        } else {
            *x = nx;
            *v = nv;
        }
    }
}

/// Step-by-step integrator. Stage logic (pulsed kicks, controller swaps)
/// drives this directly; [`simulate`] wraps it for the common case.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    axes: [Option<AxisPropagator>; 3],
    state: OscState,
    rng: SimRng,
    pending: VecDeque<[f64; 3]>,
    drives: Vec<SineDrive>,
    last_feedback: [f64; 3],
    steps_taken: u64,
}

impl Simulator {
    pub fn new(config: SimConfig, state0: OscState) -> Result<Self> {
        config.validate()?;
        let axes = config
            .modes
            .map(|m| m.map(|m| AxisPropagator::new(&m, config.bath_temperature, config.dt)));
        let pending = std::iter::repeat([0.0; 3]).take(config.feedback_delay).collect();
        Ok(Self {
            rng: rng_from_seed(config.seed),
            config,
            axes,
            state: state0,
            pending,
            drives: Vec::new(),
            last_feedback: [0.0; 3],
            steps_taken: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &OscState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn mode(&self, axis: usize) -> Option<&OscillatorMode> {
        self.config.modes[axis].as_ref()
    }

    pub fn set_drives(&mut self, drives: Vec<SineDrive>) {
        self.drives = drives;
    }

    /// Feedback force applied during the most recent step.
    pub fn last_feedback(&self) -> [f64; 3] {
        self.last_feedback
    }

    /// Change the bath temperature from now on (e.g. to model a new stage).
    pub fn set_bath_temperature(&mut self, t: f64) {
        self.config.bath_temperature = t;
        let (cfg, axes) = (&self.config, &mut self.axes);
        for (slot, mode) in axes.iter_mut().zip(cfg.modes.iter()) {
            *slot = mode.map(|m| AxisPropagator::new(&m, t, cfg.dt));
        }
    }

    /// Drop any queued feedback (controller switched off).
    pub fn clear_pending(&mut self) {
        for f in self.pending.iter_mut() {
            *f = [0.0; 3];
        }
    }

    /// Instantaneous momentum kick [N·s].
    pub fn apply_impulse(&mut self, axis: usize, impulse: f64) {
        if let Some(mode) = self.config.modes[axis] {
            self.state.v[axis] += impulse / mode.mass();
        }
    }

    /// Advance one step. `commanded` is the controller output computed from
    /// the current state; it is applied after the configured delay.
    pub fn step(&mut self, commanded: [f64; 3]) -> Result<()> {
        self.pending.push_back(commanded);
        let feedback = self.pending.pop_front().unwrap_or([0.0; 3]);
        self.last_feedback = feedback;
        let h = self.config.dt;
        let t_mid = self.state.t + 0.5 * h;
        for axis in 0..3 {
            let Some(prop) = &self.axes[axis] else { continue };
            let mut force = feedback[axis];
            for d in self.drives.iter().filter(|d| d.axis == axis) {
                force += d.force(t_mid);
            }
            let (x, v) = (&mut self.state.x[axis], &mut self.state.v[axis]);
            prop.advance(x, v, force, &mut self.rng);
        }
        self.steps_taken += 1;
        self.state.t = self.steps_taken as f64 * h;
        self.check()
    }

    fn check(&self) -> Result<()> {
        for axis in 0..3 {
            let (x, v) = (self.state.x[axis], self.state.v[axis]);
            if !x.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite { time: self.state.t });
            }
            if x.abs() > self.config.instability_bound {
                return Err(Error::Unstable {
                    time: self.state.t,
                    axis,
                    excursion: x.abs(),
                    bound: self.config.instability_bound,
                });
            }
        }
        Ok(())
    }

    /// Run `n` steps under `feedback`, calling `observe` after every step.
    pub fn run<F, O>(&mut self, n: usize, feedback: &mut F, mut observe: O) -> Result<()>
    where
        F: Feedback + ?Sized,
        O: FnMut(&OscState, [f64; 3]),
    {
        for _ in 0..n {
            let cmd = feedback.update(&self.state)?;
            self.step(cmd)?;
            observe(&self.state, self.last_feedback);
        }
        Ok(())
    }
}

/// Uniformly sampled record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub feedback: Vec<[f64; 3]>,
    /// Axis whose feedback force is exported in the `F_fb` column.
    pub feedback_axis: usize,
    pub config: SimConfig,
}

impl Trajectory {
    fn with_config(config: SimConfig) -> Self {
        Self {
            times: Vec::new(),
            positions: Vec::new(),
            velocities: Vec::new(),
            feedback: Vec::new(),
            feedback_axis: 2,
            config,
        }
    }

    fn push(&mut self, s: &OscState, f: [f64; 3]) {
        self.times.push(s.t);
        self.positions.push(s.x);
        self.velocities.push(s.v);
        self.feedback.push(f);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn axis_positions(&self, axis: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[axis]).collect()
    }

    pub fn axis_velocities(&self, axis: usize) -> Vec<f64> {
        self.velocities.iter().map(|p| p[axis]).collect()
    }

    /// CSV with header `t,x,y,z,vx,vy,vz,F_fb`, SI units.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y,z,vx,vy,vz,F_fb")?;
        for i in 0..self.len() {
            let (p, v) = (self.positions[i], self.velocities[i]);
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[i], p[0], p[1], p[2], v[0], v[1], v[2], self.feedback[i][self.feedback_axis]
            )?;
        }
        Ok(())
    }
}

/// Run a full simulation and return the decimated trajectory.
pub fn simulate<F: Feedback + ?Sized>(
    config: &SimConfig,
    state0: OscState,
    feedback: &mut F,
    drives: &[SineDrive],
) -> Result<Trajectory> {
    let mut sim = Simulator::new(config.clone(), state0)?;
    sim.set_drives(drives.to_vec());
    let dec = config.decimation();
    let mut traj = Trajectory::with_config(config.clone());
    traj.push(&state0, [0.0; 3]);
    let mut k = 0usize;
    sim.run(config.steps(), feedback, |s, f| {
        k += 1;
        if k % dec == 0 {
            traj.push(s, f);
        }
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(f: f64, q: f64) -> OscillatorMode {
        OscillatorMode::from_frequency(6e-9, f, q).unwrap()
    }

    #[test]
    fn thermal_psd_examples() {
        let m = mode(160.0, 2.6e7);
        assert_eq!(thermal_force_psd(&m, 0.0), 0.0);
        let expected = 2.0 * (2.0 * PI * 160.0 / 2.6e7) * 6e-9 * KB * 3.0;
        assert!((thermal_force_psd(&m, 3.0) / expected - 1.0).abs() < 1e-14);
        let m2 = mode(160.0, 1.3e7);
        assert!((thermal_force_psd(&m2, 3.0) / thermal_force_psd(&m, 3.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ring_up_examples() {
        assert_eq!(ring_up_energy(7.0, 6.4e12, 0.0), 7.0);
        assert!((ring_up_energy(0.0, 6.4e12, 10.0) - 6.4e13).abs() < 1.0);
    }

    #[test]
    fn transition_matches_free_oscillation() {
        let w = 2.0 * PI * 100.0;
        let phi = transition(w, 0.0, 1e-3);
        assert!((phi[0][0] - (w * 1e-3).cos()).abs() < 1e-14);
        assert!((phi[0][1] - (w * 1e-3).sin() / w).abs() < 1e-14);
    }

    #[test]
    fn transition_is_continuous_across_critical_damping() {
        let w = 10.0;
        let under = transition(w, 2.0 * w * (1.0 - 1e-7), 0.05);
        let crit = transition(w, 2.0 * w, 0.05);
        let over = transition(w, 2.0 * w * (1.0 + 1e-7), 0.05);
        for i in 0..2 {
            for j in 0..2 {
                assert!((under[i][j] - crit[i][j]).abs() < 1e-6);
                assert!((over[i][j] - crit[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn step_covariance_reaches_stationary_value() {
        // Composing the one-step map with its covariance must leave the
        // stationary covariance invariant: Σ∞ = Φ Σ∞ Φᵀ + Σ(h).
        let (w, g, kt_over_m) = (2.0 * PI * 50.0, 3.0, 1.7e-3);
        let h = 1e-4;
        let phi = transition(w, g, h);
        let cov = step_covariance(w, g, 2.0 * g * kt_over_m, h);
        let sxx = kt_over_m / (w * w);
        let svv = kt_over_m;
        let p11 = phi[0][0] * phi[0][0] * sxx + phi[0][1] * phi[0][1] * svv + cov[0];
        let p12 = phi[0][0] * phi[1][0] * sxx + phi[0][1] * phi[1][1] * svv + cov[1];
        let p22 = phi[1][0] * phi[1][0] * sxx + phi[1][1] * phi[1][1] * svv + cov[2];
        assert!((p11 / sxx - 1.0).abs() < 1e-10);
        assert!(p12.abs() / (sxx * svv).sqrt() < 1e-10);
        assert!((p22 / svv - 1.0).abs() < 1e-10);
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let mut cfg = SimConfig::single_axis(2, mode(160.0, 10.0), 1e-3, 1.0, 1);
        cfg.sample_rate = 1e4;
        cfg.bath_temperature = -1.0;
        let Err(Error::Config(msg)) = cfg.validate() else { panic!() };
        assert!(msg.contains("50 steps"));
        assert!(msg.contains("sample rate"));
        assert!(msg.contains("temperature"));
    }

    #[test]
    fn undamped_free_oscillation() {
        let m = mode(100.0, 1e15);
        let dt = 1.0 / (100.0 * 200.0);
        let cfg = SimConfig::single_axis(0, m, dt, 0.05, 3);
        let traj = simulate(&cfg, OscState::displaced(0, 1e-6), &mut NoFeedback, &[]).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.positions) {
            let expected = 1e-6 * (m.omega0() * t).cos();
            assert!((p[0] - expected).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn resonant_drive_steady_state() {
        // Analytic steady state of m x'' + mγx' + mω₀²x = F₀ sin ω₀t is a
        // quadrature response of amplitude F₀/(mγω₀).
        let m = mode(50.0, 20.0);
        let f0 = 1e-12;
        let dt = 1.0 / (50.0 * 400.0);
        let cfg = SimConfig::single_axis(2, m, dt, 3.0, 1);
        let drive = SineDrive {
            axis: 2,
            amplitude: f0,
            frequency: 50.0,
            phase: 0.0,
        };
        let traj = simulate(&cfg, OscState::at_rest(), &mut NoFeedback, &[drive]).unwrap();
        let tail = &traj.positions[traj.len() * 2 / 3..];
        let peak = tail.iter().map(|p| p[2].abs()).fold(0.0, f64::max);
        let expected = f0 / (m.mass() * m.gamma() * m.omega0());
        assert!((peak / expected - 1.0).abs() < 2e-3, "{peak} vs {expected}");
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let m = mode(160.0, 50.0);
        let cfg = SimConfig::single_axis(2, m, 1e-4, 0.2, 99).with_temperature(300.0);
        let a = simulate(&cfg, OscState::at_rest(), &mut NoFeedback, &[]).unwrap();
        let b = simulate(&cfg, OscState::at_rest(), &mut NoFeedback, &[]).unwrap();
        assert_eq!(a, b);
        let mut cfg2 = cfg.clone();
        cfg2.seed = 100;
        let c = simulate(&cfg2, OscState::at_rest(), &mut NoFeedback, &[]).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn wrong_sign_feedback_aborts() {
        let m = mode(100.0, 100.0);
        let cfg = SimConfig::single_axis(0, m, 1e-4, 10.0, 1);
        let mut anti = |s: &OscState| [m.mass() * 200.0 * s.v[0], 0.0, 0.0];
        let err = simulate(&cfg, OscState::displaced(0, 1e-6), &mut anti, &[]).unwrap_err();
        assert!(matches!(err, Error::Unstable { axis: 0, .. }));
    }

    #[test]
    fn decimated_record_is_uniform() {
        let m = mode(100.0, 100.0);
        let cfg = SimConfig::single_axis(0, m, 1e-4, 0.1, 1).with_sample_rate(1e3);
        let traj = simulate(&cfg, OscState::displaced(0, 1e-7), &mut NoFeedback, &[]).unwrap();
        assert_eq!(traj.len(), 101);
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - 1e-3).abs() < 1e-12);
        }
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y,z,vx,vy,vz,F_fb\n"));
        assert_eq!(text.lines().count(), 102);
    }

    #[test]
    fn feedback_delay_shifts_force() {
        let m = mode(100.0, 100.0);
        let cfg = SimConfig::single_axis(0, m, 1e-4, 5e-4, 1).with_delay(2);
        let mut sim = Simulator::new(cfg, OscState::at_rest()).unwrap();
        let mut seen = Vec::new();
        let mut k = 0;
        let mut fb = |_: &OscState| {
            k += 1;
            [k as f64 * 1e-18, 0.0, 0.0]
        };
        sim.run(5, &mut fb, |_, f| seen.push((f[0] * 1e18).round())).unwrap();
        assert_eq!(seen, vec![0.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
