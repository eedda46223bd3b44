//! Physical constants and the static physics of particle and trap.

use std::f64::consts::PI;

use crate::{Error, Result};

/// CODATA 2018 constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Vacuum permeability [T·m/A].
    pub mu0: f64,
    /// Boltzmann constant [J/K].
    pub kb: f64,
    /// Reduced Planck constant [J·s].
    pub hbar: f64,
    /// Speed of light [m/s].
    pub c_light: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    mu0: 1.256_637_062_12e-6,
    kb: 1.380_649e-23,
    hbar: 1.054_571_817e-34,
    c_light: 299_792_458.0,
};

pub const MU0: f64 = CODATA.mu0;
pub const KB: f64 = CODATA.kb;
pub const HBAR: f64 = CODATA.hbar;
pub const C_LIGHT: f64 = CODATA.c_light;

/// Low-temperature heat capacity law `c(T) = coeff · T³` [J·kg⁻¹·K⁻⁴].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCapacity {
    /// Phonon plus electron contribution.
    pub combined: f64,
    /// Electron contribution only.
    pub electron: f64,
}

/// Lead, the dominant constituent of the PbSn spheres.
pub const LEAD_HEAT_CAPACITY: HeatCapacity = HeatCapacity {
    combined: 0.0115,
    electron: 0.0010,
};

/// Material and geometric description of the levitated superconductor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    density: f64,
    radius: f64,
    mass: f64,
    pub reflectivity: f64,
    /// Critical temperature [K].
    pub t_c: f64,
    /// Zero-temperature critical field [A/m].
    pub h0: f64,
    pub heat_capacity: HeatCapacity,
    /// RMS surface roughness [m].
    pub roughness: f64,
}

impl ParticleSpec {
    /// Sphere with mass derived from density and radius.
    pub fn new(density: f64, radius: f64) -> Result<Self> {
        if !(density > 0.0) || !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "density ({density}) and radius ({radius}) must be positive"
            )));
        }
        Ok(Self {
            density,
            radius,
            mass: density * sphere_volume(radius),
            reflectivity: 0.63,
            t_c: 7.2,
            h0: 6.4e4,
            heat_capacity: LEAD_HEAT_CAPACITY,
            roughness: 50e-9,
        })
    }

    /// Sphere of given mass and radius; density follows.
    pub fn from_mass_and_radius(mass: f64, radius: f64) -> Result<Self> {
        if !(mass > 0.0) || !(radius > 0.0) {
            return Err(Error::Domain("mass and radius must be positive".into()));
        }
        Self::new(mass / sphere_volume(radius), radius)
    }

    /// Explicit mass, checked against density × volume to 0.1 %.
    pub fn with_mass(density: f64, radius: f64, mass: f64) -> Result<Self> {
        let p = Self::new(density, radius)?;
        if ((mass - p.mass) / p.mass).abs() > 1e-3 {
            return Err(Error::Config(format!(
                "mass {mass:e} kg inconsistent with density·volume {:e} kg",
                p.mass
            )));
        }
        Ok(Self { mass, ..p })
    }

    /// The 100 µm PbSn solder ball used in the experiment.
    pub fn pbsn_sphere() -> Self {
        Self::new(1.1e4, 50e-6).expect("constant parameters")
    }

    pub fn density(&self) -> f64 {
        self.density
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.reflectivity) {
            problems.push(format!("reflectivity {} outside [0, 1]", self.reflectivity));
        }
        if !(self.t_c > 0.0) {
            problems.push("critical temperature must be positive".to_string());
        }
        if !(self.h0 > 0.0) {
            problems.push("critical field must be positive".to_string());
        }
        if !(self.roughness >= 0.0) {
            problems.push("roughness must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

fn sphere_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3)
}

/// Anti-Helmholtz trap: per-axis field gradient per ampere and coil current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec {
    /// [T·m⁻¹·A⁻¹] for x, y, z.
    gradient_per_ampere: [f64; 3],
    /// [A]
    pub current: f64,
}

impl TrapSpec {
    /// Azimuthally symmetric trap; the axial coefficient is twice the radial.
    pub fn anti_helmholtz(radial_gradient_per_ampere: f64, current: f64) -> Result<Self> {
        Self::new(
            [
                radial_gradient_per_ampere,
                radial_gradient_per_ampere,
                2.0 * radial_gradient_per_ampere,
            ],
            current,
        )
    }

    pub fn new(gradient_per_ampere: [f64; 3], current: f64) -> Result<Self> {
        let [gx, gy, gz] = gradient_per_ampere;
        if !(gx > 0.0 && gy > 0.0 && gz > 0.0) {
            return Err(Error::Config("gradient coefficients must be positive".into()));
        }
        for g in [gx, gy] {
            if ((gz - 2.0 * g) / gz).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "axial gradient coefficient {gz} must be twice each radial coefficient ({g})"
                )));
            }
        }
        if !(current >= 0.0) {
            return Err(Error::Config("trap current must be non-negative".into()));
        }
        Ok(Self {
            gradient_per_ampere,
            current,
        })
    }

    pub fn gradient_per_ampere(&self) -> [f64; 3] {
        self.gradient_per_ampere
    }

    /// Field gradients b_i [T/m] at the configured current.
    pub fn gradients(&self) -> [f64; 3] {
        self.gradient_per_ampere.map(|g| g * self.current)
    }

    /// Per-axis trap frequencies [Hz].
    pub fn frequencies(&self, density: f64) -> Result<[f64; 3]> {
        let b = self.gradients();
        Ok([
            trap_frequency(b[0], density)?,
            trap_frequency(b[1], density)?,
            trap_frequency(b[2], density)?,
        ])
    }

    /// Current that puts the axial mode at `f_axial` [Hz].
    pub fn current_for_axial_frequency(&self, f_axial: f64, density: f64) -> Result<f64> {
        Ok(gradient_for_frequency(f_axial, density)? / self.gradient_per_ampere[2])
    }
}

/// Trap frequency f_i = sqrt(3/(8π²μ₀ρ))·b_i [Hz].
pub fn trap_frequency(gradient: f64, density: f64) -> Result<f64> {
    if !(density > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {density}")));
    }
    if !(gradient >= 0.0) {
        return Err(Error::Domain(format!("gradient must be non-negative, got {gradient}")));
    }
    Ok(frequency_per_gradient(density) * gradient)
}

/// Inverse of [`trap_frequency`]: the gradient that produces `frequency`.
pub fn gradient_for_frequency(frequency: f64, density: f64) -> Result<f64> {
    if !(density > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {density}")));
    }
    if !(frequency >= 0.0) {
        return Err(Error::Domain("frequency must be non-negative".into()));
    }
    Ok(frequency / frequency_per_gradient(density))
}

fn frequency_per_gradient(density: f64) -> f64 {
    (3.0 / (8.0 * PI * PI * MU0 * density)).sqrt()
}

/// Equilibrium shift Δz = B_ext / (dB/dz) of the trap minimum under a uniform
/// offset field.
pub fn equilibrium_displacement(b_ext: f64, axial_gradient: f64) -> Result<f64> {
    if !(axial_gradient > 0.0) {
        return Err(Error::Domain(format!(
            "axial gradient must be positive, got {axial_gradient}"
        )));
    }
    Ok(b_ext / axial_gradient)
}

/// Per-axis harmonic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorMode {
    mass: f64,
    omega0: f64,
    gamma: f64,
    q: f64,
    z_zpf: f64,
    p_zpf: f64,
}

impl OscillatorMode {
    /// From mass [kg], frequency [Hz] and quality factor.
    pub fn from_frequency(mass: f64, f0: f64, q: f64) -> Result<Self> {
        Self::from_angular(mass, 2.0 * PI * f0, q)
    }

    pub fn from_angular(mass: f64, omega0: f64, q: f64) -> Result<Self> {
        if !(mass > 0.0) || !(omega0 > 0.0) || !(q > 0.0) {
            return Err(Error::Domain(format!(
                "mode requires positive mass, frequency and Q (m={mass}, ω0={omega0}, Q={q})"
            )));
        }
        Ok(Self {
            mass,
            omega0,
            gamma: omega0 / q,
            q,
            z_zpf: (HBAR / (2.0 * mass * omega0)).sqrt(),
            p_zpf: (HBAR * mass * omega0 / 2.0).sqrt(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    /// [rad/s]
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    /// [Hz]
    pub fn frequency(&self) -> f64 {
        self.omega0 / (2.0 * PI)
    }
    /// Energy damping rate γ = ω₀/Q [rad/s].
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn z_zpf(&self) -> f64 {
        self.z_zpf
    }
    pub fn p_zpf(&self) -> f64 {
        self.p_zpf
    }

    /// Same mass and Q at a different frequency [Hz].
    pub fn retuned(&self, f0: f64) -> Result<Self> {
        Self::from_frequency(self.mass, f0, self.q)
    }

    /// Mean thermal occupation in the high-temperature limit, k_B T/(ℏω₀).
    pub fn thermal_occupation(&self, temperature: f64) -> f64 {
        KB * temperature / (HBAR * self.omega0)
    }

    /// Motional energy of a phase-space point [J].
    pub fn energy(&self, x: f64, v: f64) -> f64 {
        0.5 * self.mass * (v * v + self.omega0 * self.omega0 * x * x)
    }
}

/// Force F = m ω_z² Δz exerted by a trap-minimum shift Δz.
pub fn probe_force(mode: &OscillatorMode, dz: f64) -> f64 {
    mode.mass * mode.omega0 * mode.omega0 * dz
}

/// Minimum separation between trap and drive frequency for the off-resonant
/// response formula to be used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceExclusion {
    /// Required |f_z − f_dr| in units of the mechanical linewidth γ/2π.
    pub linewidths: f64,
}

impl Default for ResonanceExclusion {
    fn default() -> Self {
        Self { linewidths: 5.0 }
    }
}

/// Signed off-resonant response F₀/(m·√2·(ω_z² − ω_dr²)).
///
/// The √2 makes this the RMS amplitude of the driven motion, which is what the
/// integrated spectral power of the response tone measures.
pub fn driven_response(
    f0_force: f64,
    mode: &OscillatorMode,
    omega_dr: f64,
    exclusion: ResonanceExclusion,
) -> Result<f64> {
    let separation_hz = (mode.omega0 - omega_dr).abs() / (2.0 * PI);
    let threshold_hz = exclusion.linewidths * mode.gamma / (2.0 * PI);
    let denom = mode.omega0 * mode.omega0 - omega_dr * omega_dr;
    // validity: γ²ω_dr ≪ (ω₀² − ω_dr²)²
    if separation_hz < threshold_hz || denom == 0.0 {
        return Err(Error::NearResonantDrive {
            separation_hz,
            threshold_hz,
        });
    }
    Ok(f0_force / (mode.mass * 2f64.sqrt() * denom))
}

/// Magnitude of [`driven_response`].
pub fn driven_response_amplitude(
    f0_force: f64,
    mode: &OscillatorMode,
    omega_dr: f64,
    exclusion: ResonanceExclusion,
) -> Result<f64> {
    driven_response(f0_force, mode, omega_dr, exclusion).map(f64::abs)
}

/// Photon energy 2πℏc/λ [J].
pub fn photon_energy(wavelength: f64) -> f64 {
    2.0 * PI * HBAR * C_LIGHT / wavelength
}
