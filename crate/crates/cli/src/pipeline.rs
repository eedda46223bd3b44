//! The staged cooling sequence: lift-off, camera pulses, intensity damping,
//! interferometric feedback, calibration and ring-up.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use maglev_core::control::{
    min_variance, run_intensity_cooling, run_pulsed_camera_cooling, variance_and_teff, BandpassFeedback,
    BandpassSpec, IntensityStage, PulsedQuadrantFeedback,
};
use maglev_core::dynamics::{thermal_force_psd, Feedback, NoFeedback, OscState, SimConfig, Simulator, SineDrive, Trajectory};
use maglev_core::feasibility::decoherence_rates;
use maglev_core::phaselock::{mirror_calibration_run, LockConfig, LockedReadout, MirrorRun};
use maglev_core::physics::{
    equilibrium_displacement, gradient_for_frequency, probe_force, OscillatorMode, ParticleSpec, HBAR,
};
use maglev_core::sensing::{
    write_detector_records, BeamProfile, CameraSpec, DetectorRecord, LaserSpec, PhotonStatistics, RoughnessProcess,
    RoughnessSpec,
};
use maglev_core::spectra::{
    fit_ring_up, noise_floor, probe_tone_calibration, probe_tone_response_per_ampere, ProbeCoil, ProbeToneSeries,
    SpectrumEstimate, WelchAccumulator, Window,
};
use maglev_core::{derive_seed, rng_from_seed, Error as CoreError, SimRng};
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::error::CliError;
use crate::manifest::{Manifest, ManifestKind, OutputDir, StageStatus, StageSummary};
use crate::scenario::Scenario;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DETECTOR_FILE: &str = "detector.csv";
pub const INLOOP_FILE: &str = "inloop_spectrum.csv";
pub const POSITION_FILE: &str = "position_spectrum.csv";
pub const CAMERA_FILE: &str = "camera.csv";
pub const INTENSITY_FILE: &str = "intensity.csv";
pub const PROBE_FILE: &str = "probe_tone.csv";
pub const FLOOR_FILE: &str = "floor_spectrum.csv";
pub const FRINGE_FILE: &str = "fringes.csv";
pub const RINGUP_FILE: &str = "ringup.csv";
pub const SCENARIO_FILE: &str = "scenario.txt";

const AXIAL: usize = 2;

/// Physical objects derived from a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub particle: ParticleSpec,
    /// Radial x, radial y, axial.
    pub modes: [OscillatorMode; 3],
    pub temperature: f64,
    pub laser: LaserSpec,
    pub lock: LockConfig,
    pub roughness: Option<RoughnessSpec>,
    pub record_rate: f64,
}

impl Setup {
    pub fn from_scenario(s: &Scenario) -> Result<Self, CliError> {
        let (density, radius) = (s.num("particle.density"), s.num("particle.radius"));
        let particle = match s.num("particle.mass") {
            m if m > 0.0 => ParticleSpec::with_mass(density, radius, m)?,
            _ => ParticleSpec::new(density, radius)?,
        };
        let m = particle.mass();
        let q = s.num("trap.q");
        let radial = OscillatorMode::from_frequency(m, s.num("trap.radial_frequency"), q)?;
        let axial = OscillatorMode::from_frequency(m, s.num("trap.axial_frequency"), q)?;
        let record_rate = s.num("laser.record_rate");
        let laser = LaserSpec::new(
            s.num("laser.wavelength"),
            s.num("laser.input_flux"),
            s.num("laser.detected_flux"),
        )?
        .with_local_oscillator(s.num("laser.reference_flux"))?;
        let mut lock = if s.flag("lock.enabled") {
            LockConfig::from_hz_per_volt(s.num("lock.gain"), record_rate)
        } else {
            LockConfig::disabled(record_rate)
        };
        lock.loss_window = s.int("lock.loss_window") as usize;
        lock.loss_threshold = s.num("lock.loss_threshold");
        lock.validate()?;
        let roughness = if s.num("roughness.surface_rms") > 0.0 {
            let spec = RoughnessSpec {
                sigma_r: s.num("roughness.surface_rms"),
                rotation_rate: s.num("roughness.rotation_rate"),
                correlation_length: s.num("roughness.correlation_length"),
                particle_radius: radius,
                target_asd: s.num("roughness.target_asd"),
                target_frequency: axial.frequency(),
            };
            spec.validate()?;
            Some(spec)
        } else {
            None
        };
        Ok(Self {
            particle,
            modes: [radial, radial, axial],
            temperature: s.num("environment.temperature"),
            laser,
            lock,
            roughness,
            record_rate,
        })
    }

    pub fn axial(&self) -> OscillatorMode {
        self.modes[AXIAL]
    }

    /// Two-sided apparent-displacement noise of the full estimate at ω.
    pub fn measurement_psd(&self, omega: f64) -> Result<f64, CliError> {
        let rough = self.roughness.map(|r| r.psd(omega)).unwrap_or(0.0);
        Ok(rough + self.laser.shot_noise_psd()?)
    }
}

/// Energy-equivalent RMS displacement sqrt(mean((x² + (v/ω)²)/2)) over `axes`.
pub fn state_rms(state: &OscState, modes: &[OscillatorMode; 3], axes: &[usize]) -> f64 {
    let sum: f64 = axes
        .iter()
        .map(|&a| {
            let w = modes[a].omega0();
            0.5 * (state.x[a].powi(2) + (state.v[a] / w).powi(2))
        })
        .sum();
    (sum / axes.len() as f64).sqrt()
}

struct Ctx<'a> {
    scn: &'a Scenario,
    setup: Setup,
    state: OscState,
    seed: u64,
}

struct StageOutput {
    status: StageStatus,
    exit_rms: f64,
    details: BTreeMap<String, Json>,
}

impl StageOutput {
    fn new(status: StageStatus, exit_rms: f64) -> Self {
        Self {
            status,
            exit_rms,
            details: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl Into<Json>) -> Self {
        self.set(key, value);
        self
    }

    fn set(&mut self, key: &str, value: impl Into<Json>) {
        let v = value.into();
        // JSON has no NaN or infinity
        let v = match v.as_f64() {
            Some(x) if !x.is_finite() => Json::Null,
            _ => v,
        };
        self.details.insert(key.to_string(), v);
    }
}

fn stage_axes(name: &str) -> &'static [usize] {
    match name {
        "liftoff" | "camera" | "intensity" => &[0, 1],
        _ => &[AXIAL],
    }
}

pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    /// First stage failure; the manifest is written regardless.
    pub error: Option<CliError>,
}

/// Execute the scenario's stages in order and write all outputs under `out`.
pub fn run_scenario(scn: &Scenario, out: &Path) -> Result<RunOutcome, CliError> {
    let setup = Setup::from_scenario(scn)?;
    let mut dir = OutputDir::create(out)?;
    dir.write_bytes(SCENARIO_FILE, scn.to_text().as_bytes())?;
    let mut manifest = Manifest::new(ManifestKind::Run, scn.hash(), scn.seed());
    let a = scn.num("camera.initial_amplitude");
    let w_r = setup.modes[0].omega0();
    let state = OscState {
        x: [a, 0.0, 0.0],
        v: [0.0, w_r * a, 0.0],
        t: 0.0,
    };
    let mut ctx = Ctx {
        scn,
        setup,
        state,
        seed: scn.seed(),
    };
    let mut error = None;
    for name in scn.stages() {
        let axes = stage_axes(&name);
        let entry = state_rms(&ctx.state, &ctx.setup.modes, axes);
        let result = match name.as_str() {
            "liftoff" => Ok(StageOutput::new(StageStatus::Ok, entry).with("note", "contact release is not modelled")),
            "camera" => camera_stage(&mut ctx, &mut dir),
            "intensity" => intensity_stage(&mut ctx, &mut dir),
            "interferometric" => interferometric_stage(&mut ctx, &mut dir),
            "calibration" => calibration_stage(&mut ctx, &mut dir),
            "ringup" => ringup_stage(&mut ctx, &mut dir),
            other => unreachable!("stage '{other}' passed validation"),
        };
        match result {
            Ok(o) => manifest.stages.push(StageSummary {
                name: name.clone(),
                status: o.status,
                entry_rms_m: entry,
                exit_rms_m: Some(o.exit_rms),
                details: o.details,
                error: None,
            }),
            Err(e) => {
                let e = match e {
                    CliError::Core(c) => CliError::stage(&name, c),
                    other => other,
                };
                manifest.stages.push(StageSummary {
                    name: name.clone(),
                    status: StageStatus::Aborted,
                    entry_rms_m: entry,
                    exit_rms_m: None,
                    details: BTreeMap::new(),
                    error: Some(e.to_string()),
                });
                error = Some(e);
                break;
            }
        }
    }
    manifest.complete = error.is_none();
    let manifest_path = dir.finish(&mut manifest)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
        error,
    })
}

fn sim_config(ctx: &Ctx, dt: f64, stream: u64, modes: [Option<OscillatorMode>; 3]) -> SimConfig {
    SimConfig::new(dt, 0.0, derive_seed(ctx.seed, stream), modes)
        .with_temperature(ctx.setup.temperature)
        .with_delay(ctx.scn.int("sim.feedback_delay") as usize)
}

fn free_run(sim: &mut Simulator, duration: f64) -> Result<(), CoreError> {
    let steps = (duration / sim.dt()).round() as usize;
    sim.run(steps, &mut NoFeedback, |_, _| {})
}

fn camera_stage(ctx: &mut Ctx, dir: &mut OutputDir) -> Result<StageOutput, CliError> {
    let s = ctx.scn;
    let modes = ctx.setup.modes.map(Some);
    let mut sim = Simulator::new(sim_config(ctx, s.num("sim.radial_dt"), 1, modes), ctx.state)?;
    let pulses = PulsedQuadrantFeedback {
        separation: s.num("camera.separation"),
        wait_periods: s.num("camera.wait_periods"),
        impulse_quantum: s.num("camera.impulse_quantum"),
        max_quanta: s.int("camera.max_quanta") as u32,
        iterations: s.int("camera.iterations") as usize,
    };
    if !s.flag("camera.enabled") {
        let period = 1.0 / ctx.setup.modes[0].frequency();
        let per_iteration = (pulses.separation + pulses.wait_periods) * period;
        free_run(&mut sim, per_iteration * pulses.iterations as f64)?;
        ctx.state = *sim.state();
        let exit = state_rms(&ctx.state, &ctx.setup.modes, &[0, 1]);
        return Ok(StageOutput::new(StageStatus::Disabled, exit));
    }
    let camera = CameraSpec {
        pixel_pitch: s.num("camera.pixel_pitch"),
        centroid_noise: s.num("camera.centroid_noise"),
        field_of_view: s.num("camera.field_of_view"),
    };
    let mut rng = rng_from_seed(derive_seed(ctx.seed, 11));
    let history = run_pulsed_camera_cooling(&mut sim, &camera, &pulses, &mut rng)?;
    dir.write_with(CAMERA_FILE, |w| {
        writeln!(w, "# pulsed camera cooling; amplitudes are true oscillation amplitudes after each kick")?;
        writeln!(w, "iteration,t_s,amplitude_x_m,amplitude_y_m,rms_amplitude_m,impulse_x_Ns,impulse_y_Ns")?;
        for (i, h) in history.iter().enumerate() {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                i + 1,
                h.t,
                h.amplitude[0],
                h.amplitude[1],
                h.rms,
                h.impulse[0],
                h.impulse[1]
            )?;
        }
        Ok(())
    })?;
    ctx.state = *sim.state();
    let final_amp = history.last().map(|h| h.rms).unwrap_or(f64::NAN);
    let below = history.iter().position(|h| h.rms < 1e-6).map(|i| i + 1);
    let exit = state_rms(&ctx.state, &ctx.setup.modes, &[0, 1]);
    Ok(StageOutput::new(StageStatus::Ok, exit)
        .with("iterations", history.len())
        .with("final_rms_amplitude_m", final_amp)
        .with("iterations_to_1um", below.map(Json::from).unwrap_or(Json::Null)))
}

fn intensity_stage(ctx: &mut Ctx, dir: &mut OutputDir) -> Result<StageOutput, CliError> {
    let s = ctx.scn;
    let modes = ctx.setup.modes.map(Some);
    let dt = s.num("sim.radial_dt");
    let mut sim = Simulator::new(sim_config(ctx, dt, 2, modes), ctx.state)?;
    let duration = s.num("intensity.duration");
    if !s.flag("intensity.enabled") {
        free_run(&mut sim, 2.0 * duration)?;
        ctx.state = *sim.state();
        let exit = state_rms(&ctx.state, &ctx.setup.modes, &[0, 1]);
        return Ok(StageOutput::new(StageStatus::Disabled, exit));
    }
    let mut rng = rng_from_seed(derive_seed(ctx.seed, 12));
    let mut rows = Vec::new();
    let mut finals = [0.0; 2];
    let mut clipped = 0;
    for axis in 0..2 {
        let stage = IntensityStage {
            axis,
            profile: BeamProfile::on_slope(axis, s.num("intensity.fwhm"), s.num("intensity.peak_flux")),
            duration,
            stats: PhotonStatistics::default(),
        };
        let spec = BandpassSpec {
            center: ctx.setup.modes[axis].frequency(),
            bandwidth: s.num("intensity.bandwidth"),
            gamma_fb: s.num("intensity.gamma_fb"),
            phase: s.num("intensity.phase"),
            force_limit: s.num("intensity.force_limit"),
        };
        let mut fb = BandpassFeedback::new(spec, ctx.setup.particle.mass(), 1.0 / dt)?;
        let history = run_intensity_cooling(&mut sim, &stage, &mut fb, &mut rng)?;
        finals[axis] = history.final_rms;
        clipped += history.clipped;
        rows.extend(history.times.iter().zip(&history.amplitude).map(|(t, a)| (axis, *t, *a)));
    }
    dir.write_with(INTENSITY_FILE, |w| {
        writeln!(w, "# intensity-readout damping, one radial axis after the other")?;
        writeln!(w, "# peak_amplitude_m is the largest |x| within each oscillation period")?;
        writeln!(w, "axis,t_s,peak_amplitude_m")?;
        for (axis, t, a) in &rows {
            writeln!(w, "{axis},{t:e},{a:e}")?;
        }
        Ok(())
    })?;
    ctx.state = *sim.state();
    // exit amplitude is the RMS each axis held while under control; the axis
    // cooled first rewarms while the second one is being damped
    let exit = (0.5 * (finals[0].powi(2) + finals[1].powi(2))).sqrt();
    Ok(StageOutput::new(StageStatus::Ok, exit)
        .with("final_rms_x_m", finals[0])
        .with("final_rms_y_m", finals[1])
        .with("radial_rms_at_end_m", state_rms(&ctx.state, &ctx.setup.modes, &[0, 1]))
        .with("clipped_updates", clipped))
}

/// Interferometer, phase lock, roughness and optional bandpass feedback on
/// the axial displacement estimate.
struct ReadoutLoop {
    readout: LockedReadout,
    roughness: Option<RoughnessProcess>,
    rng: SimRng,
    feedback: Option<BandpassFeedback>,
    wavelength: f64,
    estimate: f64,
    residual: f64,
}

impl ReadoutLoop {
    fn new(setup: &Setup, feedback: Option<BandpassFeedback>, seed: u64) -> Result<Self, CoreError> {
        let readout = LockedReadout::new(setup.laser, setup.lock, derive_seed(seed, 1))?;
        let mut rng = rng_from_seed(derive_seed(seed, 2));
        let dt = 1.0 / setup.record_rate;
        let roughness = setup
            .roughness
            .map(|spec| RoughnessProcess::new(&spec, dt, &mut rng))
            .transpose()?;
        Ok(Self {
            readout,
            roughness,
            rng,
            feedback,
            wavelength: setup.laser.wavelength(),
            estimate: 0.0,
            residual: 0.0,
        })
    }

    fn clipped(&self) -> u64 {
        self.feedback.as_ref().map(|f| f.clipped).unwrap_or(0)
    }
}

impl Feedback for ReadoutLoop {
    fn update(&mut self, state: &OscState) -> Result<[f64; 3], CoreError> {
        let phase = match &mut self.roughness {
            Some(r) => {
                r.next(&mut self.rng);
                r.phase(&self.readout.laser)
            }
            None => 0.0,
        };
        let lock = self.readout.measure(state.t, state.x[AXIAL], phase)?;
        self.estimate = lock.displacement_estimate(self.wavelength);
        self.residual = lock.residual_output(self.wavelength);
        let force = self.feedback.as_mut().map(|f| f.update(self.estimate)).unwrap_or(0.0);
        Ok([0.0, 0.0, force])
    }
}

fn axial_feedback(s: &Scenario, prefix: &str, center: f64, gamma_fb: f64, setup: &Setup) -> Result<BandpassFeedback, CoreError> {
    let spec = BandpassSpec {
        center,
        bandwidth: s.num("interferometric.bandwidth"),
        gamma_fb,
        phase: s.num(&format!("{prefix}.phase")),
        force_limit: s.num("interferometric.force_limit"),
    };
    BandpassFeedback::new(spec, setup.particle.mass(), setup.record_rate)
}

fn interferometric_stage(ctx: &mut Ctx, dir: &mut OutputDir) -> Result<StageOutput, CliError> {
    let s = ctx.scn;
    let setup = ctx.setup.clone();
    let settle = s.num("interferometric.settle");
    let duration = s.num("interferometric.duration");
    if !s.flag("interferometric.enabled") {
        let modes = setup.modes.map(Some);
        let mut sim = Simulator::new(sim_config(ctx, s.num("sim.radial_dt"), 3, modes), ctx.state)?;
        free_run(&mut sim, settle + duration)?;
        ctx.state = *sim.state();
        let exit = state_rms(&ctx.state, &setup.modes, &[AXIAL]);
        return Ok(StageOutput::new(StageStatus::Disabled, exit));
    }
    let rate = setup.record_rate;
    let mode = setup.axial();
    let gamma_fb = s.num("interferometric.gamma_fb");
    let fb = axial_feedback(s, "interferometric", mode.frequency(), gamma_fb, &setup)?;
    let mut lp = ReadoutLoop::new(&setup, Some(fb), derive_seed(ctx.seed, 3))?;
    let cfg = sim_config(ctx, 1.0 / rate, 4, setup.modes.map(Some));
    let mut sim = Simulator::new(cfg.clone(), ctx.state)?;

    let segment = s.int("interferometric.segment_length") as usize;
    let mut measured = WelchAccumulator::new(segment, rate, Window::Hann)?;
    let mut position = WelchAccumulator::new(segment, rate, Window::Hann)?;
    let decimation = (rate / s.num("sim.trajectory_rate")).round() as usize;
    let mut traj = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        feedback: Vec::new(),
        feedback_axis: AXIAL,
        config: cfg.with_sample_rate(rate / decimation as f64),
    };
    let max_records = s.int("sim.detector_records") as usize;
    let mut records: Vec<DetectorRecord> = Vec::with_capacity(max_records);
    let settle_steps = (settle * rate).round() as usize;
    let record_steps = (duration * rate).round() as usize;
    let w0 = mode.omega0();
    let mut energy_sum = 0.0;
    for k in 0..settle_steps + record_steps {
        let z = sim.state().x[AXIAL];
        let cmd = lp.update(sim.state())?;
        if k >= settle_steps {
            measured.push(lp.estimate);
            position.push(z);
            if records.len() < max_records {
                records.extend(lp.readout.last_record().copied());
            }
        }
        sim.step(cmd)?;
        let st = sim.state();
        if k >= settle_steps {
            energy_sum += 0.5 * (st.x[AXIAL].powi(2) + (st.v[AXIAL] / w0).powi(2));
        }
        if (k + 1) % decimation == 0 {
            traj.times.push(st.t);
            traj.positions.push(st.x);
            traj.velocities.push(st.v);
            traj.feedback.push(sim.last_feedback());
        }
    }
    ctx.state = *sim.state();
    let measured = measured.finish()?;
    let position = position.finish()?;
    dir.write_with(TRAJECTORY_FILE, |w| traj.write_csv(w))?;
    dir.write_with(DETECTOR_FILE, |w| write_detector_records(w, &records))?;
    dir.write_with(INLOOP_FILE, |w| {
        writeln!(w, "# in-loop displacement estimate, gamma_fb_rad_per_s = {gamma_fb:e}")?;
        measured.write_csv(w)
    })?;
    dir.write_with(POSITION_FILE, |w| {
        writeln!(w, "# true axial position (out of loop), gamma_fb_rad_per_s = {gamma_fb:e}")?;
        position.write_csv(w)
    })?;

    let rms = (energy_sum / record_steps.max(1) as f64).sqrt();
    let s_fn = thermal_force_psd(&mode, setup.temperature);
    let s_ee = setup.measurement_psd(w0)?;
    let best = min_variance(s_fn, s_ee, &mode)?;
    let predicted = variance_and_teff(&mode, gamma_fb, s_fn, s_ee)?;
    Ok(StageOutput::new(StageStatus::Ok, rms)
        .with("gamma_fb_rad_per_s", gamma_fb)
        .with("measured_rms_m", rms)
        .with("predicted_rms_m", predicted.rms)
        .with("min_rms_m", best.exact.sqrt())
        .with("ratio_to_min", rms / best.exact.sqrt())
        .with("gamma_opt_rad_per_s", best.gamma_opt)
        .with("s_ee_m2_per_hz", s_ee)
        .with("s_fn_n2_per_hz", s_fn)
        .with("feedback_clipped", lp.clipped())
        .with("lock_saturated_updates", lp.readout.state().saturated_updates))
}

/// One axial run with the lock engaged and weak feedback; returns the
/// spectrum of the residual (pre-compensation) signal.
fn residual_run(
    ctx: &Ctx,
    mode: OscillatorMode,
    drive: Option<SineDrive>,
    stream: u64,
) -> Result<SpectrumEstimate, CoreError> {
    let s = ctx.scn;
    let setup = &ctx.setup;
    let rate = setup.record_rate;
    let fb = axial_feedback(s, "interferometric", mode.frequency(), s.num("calibration.gamma_fb"), setup)?;
    let seed = derive_seed(ctx.seed, stream);
    let mut lp = ReadoutLoop::new(setup, Some(fb), seed)?;
    let mut cfg = sim_config(ctx, 1.0 / rate, 0, [None, None, Some(mode)]);
    cfg.seed = derive_seed(seed, 3);
    let mut sim = Simulator::new(cfg, ctx.state)?;
    sim.set_drives(drive.into_iter().collect());
    let mut welch = WelchAccumulator::new(s.int("interferometric.segment_length") as usize, rate, Window::Hann)?;
    let settle = (s.num("calibration.settle") * rate).round() as usize;
    let steps = (s.num("calibration.duration") * rate).round() as usize;
    for k in 0..settle + steps {
        let cmd = lp.update(sim.state())?;
        if k >= settle {
            welch.push(lp.residual);
        }
        sim.step(cmd)?;
    }
    welch.finish()
}

fn calibration_stage(ctx: &mut Ctx, dir: &mut OutputDir) -> Result<StageOutput, CliError> {
    let s = ctx.scn;
    let setup = &ctx.setup;
    let density = setup.particle.density();
    let mass = setup.particle.mass();
    let q = setup.axial().q();
    let drive_f = s.num("calibration.drive_frequency");
    let coil = ProbeCoil {
        field_per_ampere: s.num("calibration.field_per_ampere"),
        relative_uncertainty: s.num("calibration.coil_uncertainty"),
        drive_frequency: drive_f,
    };
    let traps = s.list("calibration.trap_frequencies").to_vec();
    let currents = s.list("calibration.currents").to_vec();
    let jobs: Vec<(usize, usize)> = (0..traps.len())
        .flat_map(|i| (0..currents.len()).map(move |j| (i, j)))
        .collect();
    let ctx_ref: &Ctx = ctx;
    let tones: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<f64, CoreError> {
            let mode = setup.axial().retuned(traps[i])?;
            let b_z = gradient_for_frequency(traps[i], density)?;
            let dz = equilibrium_displacement(coil.field_per_ampere * currents[j], b_z)?;
            let drive = SineDrive {
                axis: AXIAL,
                amplitude: probe_force(&mode, dz),
                frequency: drive_f,
                phase: 0.0,
            };
            let est = residual_run(ctx_ref, mode, Some(drive), 100 + (i * 64 + j) as u64)?;
            Ok(est.tone_rms(drive_f))
        })
        .collect::<Result<_, _>>()?;
    let series: Vec<ProbeToneSeries> = traps
        .iter()
        .enumerate()
        .map(|(i, &f)| ProbeToneSeries {
            trap_frequency: f,
            currents: currents.clone(),
            measured: tones[i * currents.len()..(i + 1) * currents.len()].to_vec(),
        })
        .collect();
    let predicted: Vec<f64> = traps
        .iter()
        .map(|&f| probe_tone_response_per_ampere(&coil, f, mass, density, q))
        .collect::<Result<_, _>>()?;
    let cal = probe_tone_calibration(&series, &coil, mass, density, q)?;
    dir.write_with(PROBE_FILE, |w| {
        writeln!(w, "# probe-tone calibration at drive_frequency_Hz = {drive_f:e}")?;
        writeln!(w, "# tone_rms_m: RMS tone in the residual lock signal; predicted_rms_m: modelled true motion")?;
        writeln!(w, "# factor = {:e} +- {:e} (relative)", cal.factor, cal.uncertainty)?;
        writeln!(w, "trap_frequency_Hz,current_A,tone_rms_m,predicted_rms_m")?;
        for (i, ser) in series.iter().enumerate() {
            for (c, m) in ser.currents.iter().zip(&ser.measured) {
                writeln!(w, "{:e},{:e},{:e},{:e}", ser.trap_frequency, c, m, predicted[i] * c)?;
            }
        }
        Ok(())
    })?;

    let floor_est = residual_run(ctx_ref, setup.axial(), None, 99)?;
    let band = s.list("analysis.floor_band");
    let residual_floor = noise_floor(&floor_est, (band[0], band[1]), &[])?;
    let floor = residual_floor * cal.factor;
    dir.write_with(FLOOR_FILE, |w| {
        writeln!(w, "# residual lock signal scaled by the probe-tone factor {:e}", cal.factor)?;
        floor_est.scaled(cal.factor).write_csv(w)
    })?;

    let mut mirror_run = MirrorRun::new(s.num("calibration.mirror_amplitude"), drive_f);
    mirror_run.amplitude_tolerance = s.num("calibration.mirror_tolerance");
    mirror_run.periods = s.int("calibration.mirror_periods") as usize;
    let mirror = mirror_calibration_run(&mirror_run, &setup.laser, &setup.lock, derive_seed(ctx.seed, 98))?;
    let sigma = ((cal.factor * cal.uncertainty).powi(2) + (mirror.suppression * mirror.uncertainty).powi(2)).sqrt();
    let agree = (cal.factor - mirror.suppression).abs() <= sigma;

    write_fringes(ctx_ref, dir)?;
    let exit = state_rms(&ctx.state, &ctx.setup.modes, &[AXIAL]);
    Ok(StageOutput::new(StageStatus::Ok, exit)
        .with("probe_factor", cal.factor)
        .with("probe_uncertainty", cal.uncertainty)
        .with("probe_r_squared", cal.r_squared)
        .with("mirror_suppression", mirror.suppression)
        .with("mirror_uncertainty", mirror.uncertainty)
        .with("calibrations_agree", agree)
        .with("residual_floor_m_per_rthz", residual_floor)
        .with("floor_m_per_rthz", floor)
        .with("floor_band_hz", json!([band[0], band[1]])))
}

/// Open-loop fringes against the locked output for a large sinusoidal motion.
fn write_fringes(ctx: &Ctx, dir: &mut OutputDir) -> Result<(), CliError> {
    let s = ctx.scn;
    let setup = &ctx.setup;
    let rate = setup.record_rate;
    let (a, f) = (s.num("calibration.fringe_amplitude"), s.num("calibration.fringe_frequency"));
    let mut open = LockedReadout::new(setup.laser, LockConfig::disabled(rate), derive_seed(ctx.seed, 96))?;
    let mut locked = LockedReadout::new(setup.laser, setup.lock, derive_seed(ctx.seed, 97))?;
    let wl = setup.laser.wavelength();
    let n = (4.0 * rate / f).round() as usize;
    let every = ((rate / s.num("sim.trajectory_rate")).round() as usize).max(1);
    let mut rows = Vec::with_capacity(n / every + 1);
    for i in 0..n {
        let t = i as f64 / rate;
        let z = a * (2.0 * PI * f * t).sin();
        let e_open = open.measure(t, z, 0.0)?.error;
        let st = locked.measure(t, z, 0.0)?;
        if i % every == 0 {
            rows.push((t, z, e_open, st.error, st.displacement_estimate(wl)));
        }
    }
    dir.write_with(FRINGE_FILE, |w| {
        writeln!(w, "# sinusoidal motion of amplitude {a:e} m at {f:e} Hz")?;
        writeln!(w, "# *_error: normalized detector difference (sin of the residual phase)")?;
        writeln!(w, "t_s,z_m,unlocked_error,locked_error,locked_estimate_m")?;
        for (t, z, eo, el, est) in &rows {
            writeln!(w, "{t:e},{z:e},{eo:e},{el:e},{est:e}")?;
        }
        Ok(())
    })
}

fn ringup_stage(ctx: &mut Ctx, dir: &mut OutputDir) -> Result<StageOutput, CliError> {
    let s = ctx.scn;
    let mode = ctx.setup.axial();
    let dt = s.num("sim.radial_dt");
    let interval = s.num("ringup.interval");
    let per_sample = ((interval / dt).round() as usize).max(1);
    let samples = (s.num("ringup.duration") / (per_sample as f64 * dt)).round() as usize + 1;
    let repeats = s.int("ringup.repeats") as usize;
    if repeats == 0 {
        return Err(CliError::Invalid(vec!["ringup.repeats must be at least 1".into()]));
    }
    let quantum = HBAR * mode.omega0();
    let start = ctx.state;
    let ctx_ref: &Ctx = ctx;
    let runs: Vec<(Vec<f64>, OscState)> = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<_, CoreError> {
            let cfg = sim_config(ctx_ref, dt, 1000 + r as u64, [None, None, Some(mode)]);
            let mut sim = Simulator::new(cfg, start)?;
            let mut n = Vec::with_capacity(samples);
            n.push(mode.energy(start.x[AXIAL], start.v[AXIAL]) / quantum);
            for _ in 1..samples {
                sim.run(per_sample, &mut NoFeedback, |_, _| {})?;
                let st = sim.state();
                n.push(mode.energy(st.x[AXIAL], st.v[AXIAL]) / quantum);
            }
            Ok((n, *sim.state()))
        })
        .collect::<Result<_, _>>()?;
    let times: Vec<f64> = (0..samples).map(|i| (i * per_sample) as f64 * dt).collect();
    let mut mean = vec![0.0; samples];
    let mut sq = vec![0.0; samples];
    for (n, _) in &runs {
        for i in 0..samples {
            mean[i] += n[i] / repeats as f64;
            sq[i] += n[i] * n[i] / repeats as f64;
        }
    }
    let sem: Vec<f64> = (0..samples)
        .map(|i| ((sq[i] - mean[i] * mean[i]).max(0.0) / repeats as f64).sqrt())
        .collect();
    dir.write_with(RINGUP_FILE, |w| {
        writeln!(w, "# free evolution from the cooled state, {repeats} repeats; energy from the true state")?;
        writeln!(w, "t_s,mean_phonons,sem_phonons")?;
        for i in 0..samples {
            writeln!(w, "{:e},{:e},{:e}", times[i], mean[i], sem[i])?;
        }
        Ok(())
    })?;
    let fit = fit_ring_up(&times, &mean)?;
    let (expected, _) = decoherence_rates(&mode, ctx.setup.temperature, 0.0);
    ctx.state = runs[0].1;
    let last = *mean.last().expect("at least one sample");
    let exit = (last * quantum / (mode.mass() * mode.omega0().powi(2))).sqrt();
    Ok(StageOutput::new(StageStatus::Ok, exit)
        .with("fitted_rate_per_s", fit.gamma_th)
        .with("expected_rate_per_s", expected)
        .with("rate_ratio", fit.gamma_th / expected)
        .with("n0_phonons", fit.n0)
        .with("r_squared", fit.r_squared)
        .with("changepoint_s", fit.changepoint.map(Json::from).unwrap_or(Json::Null)))
}
