//! Feedback controllers and closed-loop cooling theory.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use crate::dynamics::{NoFeedback, OscState, SimConfig, Simulator};
use crate::physics::{OscillatorMode, HBAR, KB};
use crate::sensing::{intensity_counts, BeamProfile, CameraSpec, PhotonStatistics};
use crate::spectra::{SpectrumEstimate, WelchAccumulator, Window};
use crate::{derive_seed, rng_from_seed, Error, Result, SimRng};

fn inverse_susceptibility_sq(omega: f64, omega0: f64, damping: f64) -> f64 {
    (omega0 * omega0 - omega * omega).powi(2) + omega * omega * damping * damping
}

/// In-loop displacement PSD under velocity feedback with measurement noise
/// `s_ee` [m²/Hz] and force noise `s_fn` [N²/Hz].
pub fn closed_loop_psd(omega: f64, mode: &OscillatorMode, gamma_fb: f64, s_fn: f64, s_ee: f64) -> f64 {
    let m = mode.mass();
    let num = s_fn + omega * omega * m * m * gamma_fb * gamma_fb * s_ee;
    num / (m * m * inverse_susceptibility_sq(omega, mode.omega0(), mode.gamma() + gamma_fb))
}

/// PSD of the in-loop measurement record x + σ. `s_ss` may depend on ω.
pub fn measured_psd_with_squashing(omega: f64, mode: &OscillatorMode, gamma_fb: f64, s_fn: f64, s_ss: f64) -> f64 {
    let m = mode.mass();
    let bare = inverse_susceptibility_sq(omega, mode.omega0(), mode.gamma());
    let closed = inverse_susceptibility_sq(omega, mode.omega0(), mode.gamma() + gamma_fb);
    (s_fn + m * m * bare * s_ss) / (m * m * closed)
}

/// Feedback damping that minimizes the in-loop variance [rad/s].
pub fn optimal_gain(s_fn: f64, s_ee: f64, mode: &OscillatorMode) -> Result<f64> {
    if s_ee == 0.0 {
        return Err(Error::NoiselessMeasurement);
    }
    if !(s_ee > 0.0) || !(s_fn >= 0.0) {
        return Err(Error::Domain("noise PSDs must be non-negative".into()));
    }
    let (m, w, g) = (mode.mass(), mode.omega0(), mode.gamma());
    let r = s_fn / (m * m * w * w * s_ee);
    Ok(r / ((r + g * g).sqrt() + g))
}

/// Cooled state in two conventions: `rms` treats ⟨x²⟩ as the variance,
/// `amplitude` treats sqrt(⟨x²⟩) as a peak amplitude (variance ⟨x²⟩/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooledState {
    pub variance: f64,
    pub rms: f64,
    pub t_eff: f64,
    pub n_bar: f64,
    pub t_eff_amplitude: f64,
    pub n_bar_amplitude: f64,
}

fn occupation(variance: f64, mode: &OscillatorMode) -> f64 {
    variance * mode.mass() * mode.omega0() / HBAR - 0.5
}

/// High-Q closed-form variance with effective temperature and occupation.
pub fn variance_and_teff(mode: &OscillatorMode, gamma_fb: f64, s_fn: f64, s_ee: f64) -> Result<CooledState> {
    let (m, w, g) = (mode.mass(), mode.omega0(), mode.gamma());
    let total = g + gamma_fb;
    if !(total > 0.0) {
        return Err(Error::Domain(format!("total damping {total} must be positive")));
    }
    let variance = s_fn / (2.0 * m * m * w * w * total) + gamma_fb * gamma_fb * s_ee / (2.0 * total);
    let t_eff = m * w * w * variance / KB;
    Ok(CooledState {
        variance,
        rms: variance.sqrt(),
        t_eff,
        n_bar: occupation(variance, mode),
        t_eff_amplitude: t_eff / 2.0,
        n_bar_amplitude: occupation(variance / 2.0, mode),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinVariance {
    /// Variance at the optimal gain, γ_opt·S_εε [m²].
    pub exact: f64,
    /// High-gain approximation sqrt(S_FN S_εε/(m²ω₀²)) [m²].
    pub approx: f64,
    /// Occupation limit sqrt(S_εε S_FN)/ℏ − ½.
    pub n_min: f64,
    pub gamma_opt: f64,
}

pub fn min_variance(s_fn: f64, s_ee: f64, mode: &OscillatorMode) -> Result<MinVariance> {
    let gamma_opt = optimal_gain(s_fn, s_ee, mode)?;
    let (m, w) = (mode.mass(), mode.omega0());
    Ok(MinVariance {
        exact: gamma_opt * s_ee,
        approx: (s_fn * s_ee / (m * m * w * w)).sqrt(),
        n_min: (s_ee * s_fn).sqrt() / HBAR - 0.5,
        gamma_opt,
    })
}

/// Second-order bandpass section (bilinear transform, unit gain and zero
/// phase at the centre frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
}

impl Biquad {
    pub fn bandpass(center: f64, bandwidth: f64, sample_rate: f64) -> Result<Self> {
        if !(center > 0.0) || !(bandwidth > 0.0) || !(center < 0.5 * sample_rate) {
            return Err(Error::Config(format!(
                "bandpass needs 0 < centre < Nyquist and bandwidth > 0 (centre {center} Hz, bandwidth {bandwidth} Hz)"
            )));
        }
        let w0 = 2.0 * PI * center / sample_rate;
        let q = center / bandwidth;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Ok(Self {
            b: [alpha / a0, 0.0, -alpha / a0],
            a: [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
        })
    }

    /// Complex response at normalized angular frequency w = 2πf/fs.
    pub fn response(&self, w: f64) -> (f64, f64) {
        let z1 = (w.cos(), -w.sin());
        let z2 = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * z1.0 + self.b[2] * z2.0, self.b[1] * z1.1 + self.b[2] * z2.1);
        let den = (1.0 + self.a[0] * z1.0 + self.a[1] * z2.0, self.a[0] * z1.1 + self.a[1] * z2.1);
        let d2 = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d2,
            (num.1 * den.0 - num.0 * den.1) / d2,
        )
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.b[1] * self.x[0] + self.b[2] * self.x[1] - self.a[0] * self.y[0] - self.a[1] * self.y[1];
        self.x = [x, self.x[0]];
        self.y = [y, self.y[0]];
        y
    }

    pub fn reset(&mut self) {
        self.x = [0.0; 2];
        self.y = [0.0; 2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub center: f64,
    pub bandwidth: f64,
    /// Equivalent velocity damping at the centre frequency [rad/s].
    pub gamma_fb: f64,
    /// Phase advance at the centre frequency; π/2 is pure damping.
    pub phase: f64,
    pub force_limit: f64,
}

impl BandpassSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.center > 0.0) || !(self.bandwidth > 0.0) {
            return Err(Error::Config("bandpass centre and bandwidth must be positive".into()));
        }
        if !self.force_limit.is_finite() || !(self.force_limit > 0.0) {
            return Err(Error::Config("force limit must be finite and positive".into()));
        }
        if !self.gamma_fb.is_finite() || !self.phase.is_finite() {
            return Err(Error::Config("gain and phase must be finite".into()));
        }
        Ok(())
    }
}

/// Bandpass-filtered displacement with gain and phase shift, producing
/// F = −m·γ_fb·(ω_c·cos θ·y + sin θ·ẏ).
#[derive(Debug, Clone)]
pub struct BandpassFeedback {
    pub spec: BandpassSpec,
    mass: f64,
    sample_rate: f64,
    filter: Biquad,
    prev: f64,
    pub clipped: u64,
}

impl BandpassFeedback {
    pub fn new(spec: BandpassSpec, mass: f64, sample_rate: f64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            filter: Biquad::bandpass(spec.center, spec.bandwidth, sample_rate)?,
            spec,
            mass,
            sample_rate,
            prev: 0.0,
            clipped: 0,
        })
    }

    /// Force for one measured displacement sample.
    pub fn update(&mut self, measured: f64) -> f64 {
        let y = self.filter.process(measured);
        let ydot = (y - self.prev) * self.sample_rate;
        self.prev = y;
        let wc = 2.0 * PI * self.spec.center;
        let (s, c) = self.spec.phase.sin_cos();
        let f = -self.mass * self.spec.gamma_fb * (wc * c * y + s * ydot);
        if f.abs() > self.spec.force_limit {
            self.clipped += 1;
            f.signum() * self.spec.force_limit
        } else {
            f
        }
    }

    pub fn reset(&mut self) {
        self.filter.reset();
        self.prev = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsedQuadrantFeedback {
    /// Snapshot separation as a fraction of the radial period.
    pub separation: f64,
    /// Radial periods between the second snapshot and the kick.
    pub wait_periods: f64,
    /// Smallest deliverable impulse [N·s].
    pub impulse_quantum: f64,
    /// Largest kick in units of the quantum.
    pub max_quanta: u32,
    pub iterations: usize,
}

impl PulsedQuadrantFeedback {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0 && self.separation < 0.5) {
            return Err(Error::Config(format!("snapshot separation {} not in (0, 0.5)", self.separation)));
        }
        if !(self.wait_periods >= 0.0) || !(self.impulse_quantum > 0.0) || !self.impulse_quantum.is_finite() {
            return Err(Error::Config("wait must be non-negative and impulse quantum finite and positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulsedIteration {
    pub t: f64,
    /// True radial amplitude sqrt(x² + (v/ω)²) per axis after the kick [m].
    pub amplitude: [f64; 2],
    /// Combined radial RMS, sqrt(A_x² + A_y²)/√2 [m].
    pub rms: f64,
    pub impulse: [f64; 2],
}

fn amplitude(x: f64, v: f64, omega: f64) -> f64 {
    x.hypot(v / omega)
}

fn radial_snapshot(sim: &Simulator) -> [f64; 2] {
    [sim.state().x[0], sim.state().x[1]]
}

/// Camera-based pulsed cooling of both radial axes. Each iteration takes two
/// snapshots, estimates the velocity from them, waits, and kicks.
pub fn run_pulsed_camera_cooling(
    sim: &mut Simulator,
    camera: &CameraSpec,
    cfg: &PulsedQuadrantFeedback,
    rng: &mut SimRng,
) -> Result<Vec<PulsedIteration>> {
    cfg.validate()?;
    camera.validate()?;
    let modes = [0, 1].map(|a| sim.mode(a).copied());
    let [Some(mx), Some(my)] = modes else {
        return Err(Error::Config("pulsed camera cooling needs both radial axes active".into()));
    };
    let omega = [mx.omega0(), my.omega0()];
    let mass = [mx.mass(), my.mass()];
    let period = 2.0 * PI / omega[0];
    let dt = sim.dt();
    let sep_steps = ((cfg.separation * period / dt).round() as usize).max(1);
    let wait_steps = (cfg.wait_periods * period / dt).round() as usize;
    let delta = sep_steps as f64 * dt;
    let wait = wait_steps as f64 * dt;

    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let p1 = camera.snapshot(radial_snapshot(sim), rng)?;
        sim.run(sep_steps, &mut NoFeedback, |_, _| {})?;
        let p2 = camera.snapshot(radial_snapshot(sim), rng)?;
        sim.run(wait_steps, &mut NoFeedback, |_, _| {})?;
        let mut impulse = [0.0; 2];
        for axis in 0..2 {
            let (w, m) = (omega[axis], mass[axis]);
            let (s, c) = (w * delta).sin_cos();
            let v2 = w * (p2[axis] * c - p1[axis]) / s;
            let v_kick = -w * p2[axis] * (w * wait).sin() + v2 * (w * wait).cos();
            let quanta = ((m * v_kick.abs()) / cfg.impulse_quantum).round().min(cfg.max_quanta as f64);
            impulse[axis] = -v_kick.signum() * quanta * cfg.impulse_quantum;
            sim.apply_impulse(axis, impulse[axis]);
        }
        let st = sim.state();
        let amp = [0, 1].map(|a| amplitude(st.x[a], st.v[a], omega[a]));
        history.push(PulsedIteration {
            t: st.t,
            amplitude: amp,
            rms: amp[0].hypot(amp[1]) / 2f64.sqrt(),
            impulse,
        });
    }
    Ok(history)
}

/// Intensity readout conditions for one radial axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityStage {
    pub axis: usize,
    pub profile: BeamProfile,
    pub duration: f64,
    /// Photon counting bin; equals the simulator step.
    pub stats: PhotonStatistics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmplitudeHistory {
    /// End time of each oscillation period [s].
    pub times: Vec<f64>,
    /// Peak |x| within each period [m].
    pub amplitude: Vec<f64>,
    /// RMS displacement over the final quarter of the stage [m].
    pub final_rms: f64,
    pub clipped: u64,
}

/// Radial damping from the intensity of a beam parked on its slope.
pub fn run_intensity_cooling(
    sim: &mut Simulator,
    stage: &IntensityStage,
    fb: &mut BandpassFeedback,
    rng: &mut SimRng,
) -> Result<AmplitudeHistory> {
    stage.profile.validate()?;
    let axis = stage.axis;
    if axis > 1 {
        return Err(Error::Config("intensity cooling acts on radial axes 0 or 1".into()));
    }
    let mode = *sim
        .mode(axis)
        .ok_or_else(|| Error::Config(format!("axis {axis} is not active")))?;
    let dt = sim.dt();
    let bin = dt;
    let op_flux = stage.profile.expected_flux([0.0, 0.0]);
    if !(op_flux > 0.0) {
        return Err(Error::Config("no light at the trap centre".into()));
    }
    // signed relative slope along the stage axis at the trap centre
    let s = stage.profile.sigma();
    let slope = stage.profile.offset[axis] / (s * s);
    if slope == 0.0 {
        return Err(Error::Config("beam is centred on the trap; no linear intensity slope".into()));
    }
    let period_steps = ((2.0 * PI / mode.omega0()) / dt).round().max(1.0) as usize;
    let steps = (stage.duration / dt).round() as usize;
    let tail_start = steps - steps / 4;
    let mut history = AmplitudeHistory::default();
    let start_amp = amplitude(sim.state().x[axis], sim.state().v[axis], mode.omega0());
    let mut peak = 0.0f64;
    let mut rising = 0usize;
    let (mut tail_sum, mut tail_n) = (0.0, 0usize);
    fb.reset();
    for k in 0..steps {
        let st = *sim.state();
        let counts = intensity_counts([st.x[0], st.x[1]], &stage.profile, bin, &stage.stats, rng);
        let measured = (counts as f64 / (op_flux * bin) - 1.0) / slope;
        let mut force = [0.0; 3];
        force[axis] = fb.update(measured);
        sim.step(force)?;
        let x = sim.state().x[axis];
        peak = peak.max(x.abs());
        if k >= tail_start {
            tail_sum += x * x;
            tail_n += 1;
        }
        if (k + 1) % period_steps == 0 {
            let last = history.amplitude.last().copied();
            rising = match last {
                Some(prev) if peak > prev => rising + 1,
                _ => 0,
            };
            history.times.push(sim.state().t);
            history.amplitude.push(peak);
            if rising >= 10 && peak > 2.0 * start_amp.max(f64::MIN_POSITIVE) {
                let from = history.amplitude[history.amplitude.len() - 11];
                return Err(Error::AntiDamping { axis, from, to: peak });
            }
            peak = 0.0;
        }
    }
    history.final_rms = if tail_n > 0 { (tail_sum / tail_n as f64).sqrt() } else { 0.0 };
    history.clipped = fb.clipped;
    Ok(history)
}

/// Single-axis run with bandpass feedback acting on the position plus white
/// measurement noise of two-sided PSD `s_ee`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InLoopSpec {
    pub mode: OscillatorMode,
    pub bath_temperature: f64,
    pub s_ee: f64,
    pub feedback: BandpassSpec,
    pub sample_rate: f64,
    pub settle: f64,
    pub duration: f64,
    pub segment_length: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct InLoopResult {
    /// Variance of the true position after settling [m²].
    pub variance: f64,
    /// One-sided PSD of the in-loop record x + σ.
    pub measured: SpectrumEstimate,
    /// One-sided PSD of the true position.
    pub position: SpectrumEstimate,
    pub clipped: u64,
}

pub fn run_in_loop(spec: &InLoopSpec) -> Result<InLoopResult> {
    if !(spec.s_ee >= 0.0) {
        return Err(Error::Config("measurement noise PSD must be non-negative".into()));
    }
    let axis = 2;
    let dt = 1.0 / spec.sample_rate;
    let cfg = SimConfig::single_axis(axis, spec.mode, dt, spec.settle + spec.duration, spec.seed)
        .with_temperature(spec.bath_temperature);
    let mut sim = Simulator::new(cfg, OscState::at_rest())?;
    let mut fb = BandpassFeedback::new(spec.feedback, spec.mode.mass(), spec.sample_rate)?;
    let noise = Normal::new(0.0, (spec.s_ee * spec.sample_rate).sqrt())
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, 0x6d65_6173));
    let settle_steps = (spec.settle * spec.sample_rate).round() as usize;
    let steps = (spec.duration * spec.sample_rate).round() as usize;

    let mut measured = WelchAccumulator::new(spec.segment_length, spec.sample_rate, Window::Hann)?;
    let mut position = WelchAccumulator::new(spec.segment_length, spec.sample_rate, Window::Hann)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut settling = |s: &OscState| [0.0, 0.0, fb.update(s.x[axis] + noise.sample(&mut rng))];
    sim.run(settle_steps, &mut settling, |_, _| {})?;
    let mut ctrl = |s: &OscState| {
        let y = s.x[axis] + noise.sample(&mut rng);
        measured.push(y);
        [0.0, 0.0, fb.update(y)]
    };
    sim.run(steps, &mut ctrl, |s, _| {
        let x = s.x[axis];
        sum += x;
        sum_sq += x * x;
        position.push(x);
    })?;
    let n = steps as f64;
    let mean = sum / n;
    Ok(InLoopResult {
        variance: sum_sq / n - mean * mean,
        measured: measured.finish()?,
        position: position.finish()?,
        clipped: fb.clipped,
    })
}
