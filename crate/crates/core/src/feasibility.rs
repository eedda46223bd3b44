//! Ground-state cooling budgets, cavity design and the quench/lifetime model.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::physics::{photon_energy, HeatCapacity, OscillatorMode, C_LIGHT, HBAR, KB};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavitySpec {
    pub wavelength: f64,
    pub length: f64,
    pub finesse: f64,
    /// External coupling rate as a fraction of κ.
    pub coupling_fraction: f64,
    pub eta_det: f64,
}

impl CavitySpec {
    pub fn new(wavelength: f64, length: f64, finesse: f64, eta_det: f64) -> Result<Self> {
        let c = Self {
            wavelength,
            length,
            finesse,
            coupling_fraction: 1.0,
            eta_det,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) || !(self.length > 0.0) || !(self.finesse > 0.0) {
            return Err(Error::Config("cavity wavelength, length and finesse must be positive".into()));
        }
        if !(self.coupling_fraction > 0.0 && self.coupling_fraction <= 1.0) {
            return Err(Error::Config("need 0 < κ_ext ≤ κ".into()));
        }
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(Error::Config("detector efficiency must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Total loss rate κ = cπ/(F·L) [rad/s].
    pub fn kappa(&self) -> f64 {
        C_LIGHT * PI / (self.finesse * self.length)
    }

    pub fn kappa_ext(&self) -> f64 {
        self.coupling_fraction * self.kappa()
    }

    pub fn omega_cav(&self) -> f64 {
        2.0 * PI * C_LIGHT / self.wavelength
    }

    /// Frequency pull G = ω_cav/L [rad/s/m].
    pub fn pull(&self) -> f64 {
        self.omega_cav() / self.length
    }

    /// Bare coupling g = z_zpf·G [rad/s].
    pub fn coupling(&self, mode: &OscillatorMode) -> f64 {
        mode.z_zpf() * self.pull()
    }

    pub fn eta(&self) -> f64 {
        self.eta_det * self.coupling_fraction
    }

    /// Mean intracavity photons for input flux `n_in`, 4n_in/κ.
    pub fn intracavity_photons(&self, n_in: f64) -> f64 {
        4.0 * n_in / self.kappa()
    }

    fn sideband_factor(&self, mode: &OscillatorMode) -> f64 {
        1.0 + 4.0 * mode.omega0().powi(2) / self.kappa().powi(2)
    }

    /// Imprecision and back-action PSDs at intracavity occupation `n_cav`.
    pub fn noise_pair(&self, n_cav: f64, mode: &OscillatorMode) -> (f64, f64) {
        let (k, g, s) = (self.kappa(), self.pull(), self.sideband_factor(mode));
        let imp = k * s / (16.0 * self.eta() * n_cav * g * g);
        let ba = 4.0 * HBAR * HBAR * g * g * n_cav / (k * s);
        (imp, ba)
    }
}

/// Thermal decoherence Γ_th = n_th·γ and back-action rate S_Fba/(2ℏmω₀).
pub fn decoherence_rates(mode: &OscillatorMode, temperature: f64, s_fba: f64) -> (f64, f64) {
    let gamma_th = mode.thermal_occupation(temperature) * mode.gamma();
    let gamma_ba = s_fba / (2.0 * HBAR * mode.mass() * mode.omega0());
    (gamma_th, gamma_ba)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateCheck {
    pub satisfied: bool,
    /// C_q(9η − 1) − 1.
    pub margin: f64,
}

pub fn ground_state_condition(c_q: f64, eta: f64) -> Result<GroundStateCheck> {
    if !(eta > 1.0 / 9.0) {
        return Err(Error::Unsatisfiable { eta });
    }
    let margin = c_q * (9.0 * eta - 1.0) - 1.0;
    Ok(GroundStateCheck {
        satisfied: margin > 0.0,
        margin,
    })
}

/// Either a bath temperature or a measured thermal decoherence rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalInput {
    Temperature(f64),
    DecoherenceRate(f64),
}

impl ThermalInput {
    pub fn gamma_th(&self, mode: &OscillatorMode) -> f64 {
        match *self {
            ThermalInput::Temperature(t) => decoherence_rates(mode, t, 0.0).0,
            ThermalInput::DecoherenceRate(g) => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxRequirement {
    pub n_in: f64,
    pub power: f64,
}

impl FluxRequirement {
    fn new(n_in: f64, wavelength: f64) -> Self {
        Self {
            n_in,
            power: n_in * photon_energy(wavelength),
        }
    }
}

/// Free-space quantum cooperativity C_q = Γ_ba/Γ_th for input flux `n_in`.
pub fn freespace_cq(mode: &OscillatorMode, thermal: ThermalInput, wavelength: f64, n_in: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    let s_fba = 4.0 * HBAR * HBAR * k * k * n_in;
    let (_, gamma_ba) = decoherence_rates(mode, 0.0, s_fba);
    gamma_ba / thermal.gamma_th(mode)
}

/// Smallest free-space input flux that satisfies the ground-state condition.
pub fn min_input_flux_freespace(mode: &OscillatorMode, thermal: ThermalInput, wavelength: f64, eta: f64) -> Result<FluxRequirement> {
    ground_state_condition(0.0, eta)?;
    let k = 2.0 * PI / wavelength;
    // C_q is linear in n_in: C_q = 2ℏk²n_in / (mω₀Γ_th)
    let per_photon = 2.0 * HBAR * k * k / (mode.mass() * mode.omega0() * thermal.gamma_th(mode));
    let n_in = 1.0 / (per_photon * (9.0 * eta - 1.0));
    Ok(FluxRequirement::new(n_in, wavelength))
}

/// Cavity quantum cooperativity 16 g² n_in / (κ² Γ_th).
pub fn cavity_cq(mode: &OscillatorMode, thermal: ThermalInput, cavity: &CavitySpec, n_in: f64) -> f64 {
    let g = cavity.coupling(mode);
    let k = cavity.kappa();
    4.0 * g * g * cavity.intracavity_photons(n_in) / (k * thermal.gamma_th(mode))
}

/// Smallest cavity input flux that satisfies the ground-state condition.
pub fn min_input_flux_cavity(mode: &OscillatorMode, thermal: ThermalInput, cavity: &CavitySpec) -> Result<FluxRequirement> {
    cavity.validate()?;
    let eta = cavity.eta();
    ground_state_condition(0.0, eta)?;
    let per_photon = cavity_cq(mode, thermal, cavity, 1.0);
    let n_in = 1.0 / (per_photon * (9.0 * eta - 1.0));
    Ok(FluxRequirement::new(n_in, cavity.wavelength))
}

/// Optimal-feedback occupation for each input flux, from the full budget
/// (imprecision + excess, back-action + thermal + excess force).
pub fn cooled_occupation_vs_flux(
    mode: &OscillatorMode,
    temperature: f64,
    cavity: &CavitySpec,
    n_in_grid: &[f64],
    excess: ExcessNoise,
) -> Result<Vec<(f64, f64)>> {
    cavity.validate()?;
    let s_th = 2.0 * mode.mass() * mode.gamma() * KB * temperature;
    n_in_grid
        .iter()
        .map(|&n_in| {
            if !(n_in > 0.0) {
                return Err(Error::Domain(format!("input flux {n_in} must be positive")));
            }
            let (imp, ba) = cavity.noise_pair(cavity.intracavity_photons(n_in), mode);
            let s_ee = imp + excess.s_sigma;
            let s_fn = s_th + ba + excess.s_force;
            Ok((n_in, (s_ee * s_fn).sqrt() / HBAR - 0.5))
        })
        .collect()
}

/// Noise beyond the quantum-limited budget: displacement PSD S_σ+ [m²/Hz]
/// and force PSD S_FN+ [N²/Hz] (beyond the thermal bath).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExcessNoise {
    pub s_sigma: f64,
    pub s_force: f64,
}

/// Intracavity photon number minimizing the occupation when excess
/// measurement noise `s_sigma_plus` is present.
pub fn optimal_ncav(cavity: &CavitySpec, s_fn_plus: f64, s_sigma_plus: f64, mode: &OscillatorMode) -> Result<f64> {
    if s_sigma_plus == 0.0 {
        return Err(Error::NoiselessMeasurement);
    }
    if !(s_sigma_plus > 0.0) || !(s_fn_plus >= 0.0) {
        return Err(Error::Domain("noise PSDs must be non-negative".into()));
    }
    let g = cavity.pull();
    Ok(cavity.kappa() / (8.0 * g * g * HBAR * cavity.eta().sqrt())
        * (s_fn_plus / s_sigma_plus).sqrt()
        * cavity.sideband_factor(mode))
}

/// Largest excess displacement noise compatible with ground-state cooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessNoiseBound {
    /// Two-sided PSD bound [m²/Hz].
    pub psd: f64,
    /// sqrt(2·S) [m/√Hz].
    pub one_sided_asd: f64,
    /// sqrt(S) [m/√Hz].
    pub two_sided_asd: f64,
}

pub fn excess_noise_bound(eta: f64, mode: &OscillatorMode, temperature: f64) -> Result<ExcessNoiseBound> {
    if !(eta >= 1.0 / 9.0) {
        return Err(Error::Unsatisfiable { eta });
    }
    let s_fn = 2.0 * mode.mass() * mode.gamma() * KB * temperature;
    let psd = HBAR * HBAR / (4.0 * eta * s_fn) * (3.0 * eta.sqrt() - 1.0).powi(2);
    Ok(ExcessNoiseBound {
        psd,
        one_sided_asd: (2.0 * psd).sqrt(),
        two_sided_asd: psd.sqrt(),
    })
}

/// Temperature at which the applied field `h` equals the critical field.
pub fn quench_temperature(h: f64, h0: f64, t_c: f64) -> Result<f64> {
    if !(h >= 0.0) || !(t_c > 0.0) {
        return Err(Error::Domain("field must be non-negative and T_c positive".into()));
    }
    if !(h < h0) {
        return Err(Error::Domain(format!(
            "field {h} A/m is at or above the critical field {h0} A/m: no superconducting state"
        )));
    }
    Ok(t_c * (1.0 - h / h0).sqrt())
}

/// H_c(T) = H₀(1 − T²/T_c²).
pub fn critical_field(t: f64, h0: f64, t_c: f64) -> f64 {
    h0 * (1.0 - (t / t_c).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatCapacityLaw {
    Combined,
    ElectronOnly,
}

impl HeatCapacityLaw {
    pub fn coefficient(&self, hc: &HeatCapacity) -> f64 {
        match self {
            HeatCapacityLaw::Combined => hc.combined,
            HeatCapacityLaw::ElectronOnly => hc.electron,
        }
    }
}

/// Heat needed to warm mass `mass` from `t_start` to `t_end` under c = a·T³.
pub fn energy_budget(mass: f64, hc: &HeatCapacity, t_start: f64, t_end: f64, law: HeatCapacityLaw) -> Result<f64> {
    if !(t_start >= 0.0) || !(t_end >= t_start) {
        return Err(Error::Domain(format!(
            "need 0 <= T_start <= T_end, got {t_start} K -> {t_end} K"
        )));
    }
    Ok(law.coefficient(hc) * mass * (t_end.powi(4) - t_start.powi(4)) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifetime {
    Finite(f64),
    /// No absorbed power: levitation is not limited by optical heating.
    RadiationLimited,
}

pub fn levitation_lifetime(delta_e: f64, power: f64) -> Result<Lifetime> {
    if !(delta_e >= 0.0) || !(power >= 0.0) {
        return Err(Error::Domain("energy and power must be non-negative".into()));
    }
    if power == 0.0 {
        Ok(Lifetime::RadiationLimited)
    } else {
        Ok(Lifetime::Finite(delta_e / power))
    }
}

/// Fit τ = a/(b + n) through least squares on 1/τ = (b + n)/a.
pub fn lifetime_fit(data: &[(f64, f64)]) -> Result<(f64, f64)> {
    if data.len() < 3 {
        return Err(Error::TooShort(format!("{} points; at least 3 required", data.len())));
    }
    if data.iter().any(|&(_, tau)| !(tau > 0.0)) {
        return Err(Error::FitFailure("lifetimes must be positive".into()));
    }
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| 1.0 / d.1).collect();
    let (intercept, slope, _) = crate::spectra::line_fit(&x, &y);
    if !(slope > 0.0) {
        return Err(Error::FitFailure("lifetime does not fall with laser flux".into()));
    }
    Ok((1.0 / slope, intercept / slope))
}

/// Write occupation curves as `n_in,phonons,finesse`, one block per finesse.
pub fn write_sweep_csv<W: Write>(mut w: W, curves: &[(f64, Vec<(f64, f64)>)]) -> io::Result<()> {
    writeln!(w, "n_in,phonons,finesse")?;
    for (finesse, curve) in curves {
        for (n_in, n) in curve {
            writeln!(w, "{n_in:e},{n:e},{finesse:e}")?;
        }
    }
    Ok(())
}
