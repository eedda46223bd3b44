//! Optical readout models: balanced interferometric phase readout, the
//! off-centre intensity readout of radial motion, camera snapshots, and the
//! imprecision / back-action pair.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::physics::HBAR;
use crate::{Error, Result, SimRng};

/// Two-sided shot-noise displacement PSD λ²/(64π² n_det) [m²/Hz].
pub fn shot_noise_psd(wavelength: f64, n_det: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    if !(n_det > 0.0) {
        return Err(Error::Domain(format!("detected flux must be positive, got {n_det}")));
    }
    Ok(wavelength * wavelength / (64.0 * PI * PI * n_det))
}

/// Imprecision 1/(16k²n) and back-action 4ℏ²k²n PSDs for input flux `n_in`.
pub fn imprecision_backaction(k: f64, n_in: f64) -> (f64, f64) {
    let s_imp = 1.0 / (16.0 * k * k * n_in);
    let s_ba = 4.0 * HBAR * HBAR * k * k * n_in;
    (s_imp, s_ba)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    wavelength: f64,
    n_in: f64,
    n_det: f64,
    /// Reference-arm photon flux reaching the detectors [1/s]. The signal
    /// interferes with this arm, so the fringe contrast scales as
    /// sqrt(n_lo·n_det).
    n_lo: f64,
}

impl LaserSpec {
    pub const DEFAULT_LO_FLUX: f64 = 1e9;

    pub fn new(wavelength: f64, n_in: f64, n_det: f64) -> Result<Self> {
        let spec = Self {
            wavelength,
            n_in,
            n_det,
            n_lo: Self::DEFAULT_LO_FLUX,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_local_oscillator(mut self, n_lo: f64) -> Result<Self> {
        self.n_lo = n_lo;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        if !(self.n_det >= 0.0) || !(self.n_in >= self.n_det) {
            return Err(Error::Config(format!(
                "need 0 <= n_det <= n_in, got n_det = {}, n_in = {}",
                self.n_det, self.n_in
            )));
        }
        if !(self.n_lo > 0.0) {
            return Err(Error::Config("reference flux must be positive".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn n_in(&self) -> f64 {
        self.n_in
    }

    pub fn n_det(&self) -> f64 {
        self.n_det
    }

    pub fn n_lo(&self) -> f64 {
        self.n_lo
    }

    pub fn eta_det(&self) -> f64 {
        if self.n_in > 0.0 {
            self.n_det / self.n_in
        } else {
            0.0
        }
    }

    /// Optical phase 4πz/λ for a displacement `z` in reflection.
    pub fn phase_of(&self, z: f64) -> f64 {
        4.0 * PI * z / self.wavelength
    }

    /// Expected `count_diff` at sin φ = 1, i.e. the fringe half-contrast.
    pub fn fringe_amplitude(&self, bin: f64) -> f64 {
        2.0 * (self.n_lo * self.n_det).sqrt() * bin
    }

    pub fn shot_noise_psd(&self) -> Result<f64> {
        shot_noise_psd(self.wavelength, self.n_det)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    pub s_xx_imp: f64,
    pub s_fba: f64,
    pub s_excess: f64,
    pub s_fth: f64,
    pub eta_det: f64,
}

impl NoiseBudget {
    pub fn validate(&self) -> Result<()> {
        let psds = [self.s_xx_imp, self.s_fba, self.s_excess, self.s_fth];
        if psds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise PSDs must be non-negative".into()));
        }
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(Error::Config(format!("detection efficiency {} not in (0, 1]", self.eta_det)));
        }
        Ok(())
    }

    /// Total measurement-noise PSD S_εε = S_imp/η + S_excess.
    pub fn measurement_psd(&self) -> f64 {
        self.s_xx_imp / self.eta_det + self.s_excess
    }

    /// Total force-noise PSD seen by the oscillator.
    pub fn force_psd(&self) -> f64 {
        self.s_fth + self.s_fba
    }
}

/// Photon-count sampler: Poisson, switching to a rounded Gaussian above
/// `gaussian_threshold` expected counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStatistics {
    pub gaussian_threshold: f64,
}

impl Default for PhotonStatistics {
    fn default() -> Self {
        Self {
            gaussian_threshold: 1000.0,
        }
    }
}

impl PhotonStatistics {
    pub fn sample(&self, mean: f64, rng: &mut SimRng) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        if mean > self.gaussian_threshold {
            let g: f64 = StandardNormal.sample(rng);
            (mean + mean.sqrt() * g).round().max(0.0) as u64
        } else {
            Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRecord {
    pub t: f64,
    pub port_a: u64,
    pub port_b: u64,
    pub bin: f64,
}

impl DetectorRecord {
    pub fn count_sum(&self) -> u64 {
        self.port_a + self.port_b
    }

    pub fn count_diff(&self) -> i64 {
        self.port_a as i64 - self.port_b as i64
    }
}

/// Expected counts in the two ports over one bin.
pub fn expected_ports(z: f64, phase_ref: f64, laser: &LaserSpec, roughness_phase: f64, bin: f64) -> (f64, f64) {
    let phi = laser.phase_of(z) + phase_ref + roughness_phase;
    let mean = 0.5 * (laser.n_lo + laser.n_det) * bin;
    let swing = 0.5 * laser.fringe_amplitude(bin) * phi.sin();
    (mean + swing, mean - swing)
}

/// One photon-counting bin of the balanced interferometer.
pub fn interferometer_counts(
    t: f64,
    z: f64,
    phase_ref: f64,
    laser: &LaserSpec,
    roughness_phase: f64,
    bin: f64,
    stats: &PhotonStatistics,
    rng: &mut SimRng,
) -> DetectorRecord {
    let (ea, eb) = expected_ports(z, phase_ref, laser, roughness_phase, bin);
    DetectorRecord {
        t,
        port_a: stats.sample(ea, rng),
        port_b: stats.sample(eb, rng),
        bin,
    }
}

/// Export records as `t,sum,diff` with the bin width in a header comment.
pub fn write_detector_records<W: Write>(mut w: W, records: &[DetectorRecord]) -> io::Result<()> {
    let bin = records.first().map_or(0.0, |r| r.bin);
    writeln!(w, "# bin_s = {bin:e}")?;
    writeln!(w, "t,sum,diff")?;
    for r in records {
        writeln!(w, "{:e},{},{}", r.t, r.count_sum(), r.count_diff())?;
    }
    Ok(())
}

/// Parameters of the surface-roughness excess-noise process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughnessSpec {
    pub sigma_r: f64,
    pub rotation_rate: f64,
    pub correlation_length: f64,
    pub particle_radius: f64,
    /// One-sided apparent-displacement ASD [m/√Hz] at `target_frequency`.
    pub target_asd: f64,
    pub target_frequency: f64,
}

impl RoughnessSpec {
    pub fn new(sigma_r: f64, particle_radius: f64, target_frequency: f64) -> Self {
        Self {
            sigma_r,
            rotation_rate: 66.7,
            correlation_length: 1e-6,
            particle_radius,
            target_asd: 955e-12,
            target_frequency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r >= 0.0) {
            return Err(Error::Config("roughness must be non-negative".into()));
        }
        let positive = [
            self.rotation_rate,
            self.correlation_length,
            self.particle_radius,
            self.target_frequency,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.target_asd >= 0.0) {
            return Err(Error::Config("roughness process parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn correlation_time(&self) -> f64 {
        self.correlation_length / (self.particle_radius * self.rotation_rate)
    }

    /// Stationary rms of the apparent displacement [m].
    pub fn displacement_rms(&self) -> f64 {
        if self.sigma_r == 0.0 {
            return 0.0;
        }
        let tau = self.correlation_time();
        let wt = 2.0 * PI * self.target_frequency * tau;
        (self.target_asd * self.target_asd * (1.0 + wt * wt) / (4.0 * tau)).sqrt()
    }

    /// Two-sided apparent-displacement PSD at angular frequency ω [m²/Hz].
    pub fn psd(&self, omega: f64) -> f64 {
        let tau = self.correlation_time();
        let s = self.displacement_rms();
        2.0 * s * s * tau / (1.0 + (omega * tau).powi(2))
    }
}

/// Exponentially correlated apparent-displacement process, sampled exactly.
#[derive(Debug, Clone)]
pub struct RoughnessProcess {
    decay: f64,
    kick: f64,
    sigma: f64,
    value: f64,
}

impl RoughnessProcess {
    pub fn new(spec: &RoughnessSpec, dt: f64, rng: &mut SimRng) -> Result<Self> {
        spec.validate()?;
        let sigma = spec.displacement_rms();
        let decay = (-dt / spec.correlation_time()).exp();
        let g: f64 = StandardNormal.sample(rng);
        Ok(Self {
            decay,
            kick: sigma * (1.0 - decay * decay).sqrt(),
            sigma,
            value: sigma * g,
        })
    }

    pub fn rms(&self) -> f64 {
        self.sigma
    }

    /// Advance one step and return the apparent displacement [m].
    pub fn next(&mut self, rng: &mut SimRng) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let g: f64 = StandardNormal.sample(rng);
        self.value = self.decay * self.value + self.kick * g;
        self.value
    }

    /// Phase seen by the interferometer for the current value.
    pub fn phase(&self, laser: &LaserSpec) -> f64 {
        laser.phase_of(self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile {
    /// Beam centre relative to the trap centre, (x, y) [m].
    pub offset: [f64; 2],
    pub fwhm: f64,
    pub peak_flux: f64,
}

impl BeamProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) || !(self.peak_flux >= 0.0) {
            return Err(Error::Config("beam FWHM must be positive and flux non-negative".into()));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt())
    }

    /// Beam placed with its inflection point on the trap centre along `axis`.
    pub fn on_slope(axis: usize, fwhm: f64, peak_flux: f64) -> Self {
        let mut offset = [0.0; 2];
        let s = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
        offset[axis] = -s;
        Self {
            offset,
            fwhm,
            peak_flux,
        }
    }

    /// Expected detected flux with the particle at `pos` [1/s].
    pub fn expected_flux(&self, pos: [f64; 2]) -> f64 {
        let s = self.sigma();
        let dx = pos[0] - self.offset[0];
        let dy = pos[1] - self.offset[1];
        self.peak_flux * (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
    }

    /// Relative slope (1/I)·dI/dr at the inflection point, as a magnitude per peak.
    pub fn inflection_slope(&self) -> f64 {
        2.0 * (2.0 * 2f64.ln()).sqrt() / (self.fwhm * std::f64::consts::E.sqrt())
    }
}

/// Sum-channel count for the intensity readout.
pub fn intensity_counts(pos: [f64; 2], profile: &BeamProfile, bin: f64, stats: &PhotonStatistics, rng: &mut SimRng) -> u64 {
    stats.sample(profile.expected_flux(pos) * bin, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Zero is classified as positive.
    fn of(v: f64) -> Self {
        if v >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Quadrant of a radial position, (sign x, sign y).
pub fn quadrant(pos: [f64; 2]) -> (Sign, Sign) {
    (Sign::of(pos[0]), Sign::of(pos[1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub pixel_pitch: f64,
    pub centroid_noise: f64,
    /// Half-width of the square field of view [m].
    pub field_of_view: f64,
}

impl CameraSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch > 0.0) || !(self.centroid_noise >= 0.0) || !(self.field_of_view > 0.0) {
            return Err(Error::Config("camera pitch and field of view must be positive".into()));
        }
        Ok(())
    }

    /// Measured centroid of a particle at `pos`.
    pub fn snapshot(&self, pos: [f64; 2], rng: &mut SimRng) -> Result<[f64; 2]> {
        if pos.iter().any(|p| !(p.abs() <= self.field_of_view)) {
            return Err(Error::ParticleLost { x: pos[0], y: pos[1] });
        }
        let noise = Normal::new(0.0, self.centroid_noise).map_err(|e| Error::Config(e.to_string()))?;
        Ok(pos.map(|p| (p / self.pixel_pitch).round() * self.pixel_pitch + noise.sample(rng)))
    }
}
