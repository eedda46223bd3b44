//! The `feasibility` command: ground-state budgets, the finesse sweep of the
//! cooled occupation, the excess-noise bound and the quench model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use maglev_core::feasibility::{
    cooled_occupation_vs_flux, energy_budget, excess_noise_bound, levitation_lifetime, min_input_flux_cavity,
    min_input_flux_freespace, quench_temperature, write_sweep_csv, CavitySpec, ExcessNoise, HeatCapacityLaw, Lifetime,
    ThermalInput,
};
use maglev_core::physics::{OscillatorMode, LEAD_HEAT_CAPACITY};
use serde_json::{json, Value as Json};

use crate::error::CliError;
use crate::manifest::{Manifest, ManifestKind, OutputDir};
use crate::pipeline::SCENARIO_FILE;
use crate::scenario::Scenario;

pub const REPORT_FILE: &str = "report.txt";
pub const SWEEP_FILE: &str = "feasibility_sweep.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CavityResult {
    pub finesse: f64,
    pub n_in: f64,
    pub power: f64,
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub freespace_n_in: f64,
    pub freespace_power: f64,
    pub cavities: Vec<CavityResult>,
    pub excess_psd: f64,
    pub excess_one_sided_asd: f64,
    pub excess_two_sided_asd: f64,
    pub quench_temperature: f64,
    pub energy_combined: f64,
    pub energy_electron: f64,
    pub lifetime_combined: Option<f64>,
    pub lifetime_electron: Option<f64>,
}

fn finite(l: Lifetime) -> Option<f64> {
    match l {
        Lifetime::Finite(t) => Some(t),
        Lifetime::RadiationLimited => None,
    }
}

pub fn evaluate(s: &Scenario) -> Result<FeasibilityReport, CliError> {
    let mass = s.num("feasibility.mass");
    let mode = OscillatorMode::from_frequency(mass, s.num("feasibility.frequency"), s.num("feasibility.q"))?;
    let fs = min_input_flux_freespace(
        &mode,
        ThermalInput::Temperature(s.num("feasibility.freespace_temperature")),
        s.num("feasibility.freespace_wavelength"),
        s.num("feasibility.freespace_eta"),
    )?;
    let t_cav = s.num("feasibility.cavity_temperature");
    let (lo, hi) = (s.num("feasibility.flux_min").log10(), s.num("feasibility.flux_max").log10());
    let points = s.int("feasibility.flux_points") as usize;
    let grid: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect();
    let mut cavities = Vec::new();
    for &finesse in s.list("feasibility.finesse") {
        let cav = CavitySpec::new(
            s.num("feasibility.cavity_wavelength"),
            s.num("feasibility.cavity_length"),
            finesse,
            s.num("feasibility.cavity_eta"),
        )?;
        let req = min_input_flux_cavity(&mode, ThermalInput::Temperature(t_cav), &cav)?;
        let curve = cooled_occupation_vs_flux(&mode, t_cav, &cav, &grid, ExcessNoise::default())?;
        cavities.push(CavityResult {
            finesse,
            n_in: req.n_in,
            power: req.power,
            curve,
        });
    }
    let bound = excess_noise_bound(s.num("feasibility.cavity_eta"), &mode, t_cav)?;
    let t_q = quench_temperature(
        s.num("feasibility.applied_field"),
        s.num("feasibility.critical_field"),
        s.num("feasibility.critical_temperature"),
    )?;
    let t0 = s.num("feasibility.start_temperature");
    let e_comb = energy_budget(mass, &LEAD_HEAT_CAPACITY, t0, t_q, HeatCapacityLaw::Combined)?;
    let e_el = energy_budget(mass, &LEAD_HEAT_CAPACITY, t0, t_q, HeatCapacityLaw::ElectronOnly)?;
    let p = s.num("feasibility.absorbed_power");
    Ok(FeasibilityReport {
        freespace_n_in: fs.n_in,
        freespace_power: fs.power,
        cavities,
        excess_psd: bound.psd,
        excess_one_sided_asd: bound.one_sided_asd,
        excess_two_sided_asd: bound.two_sided_asd,
        quench_temperature: t_q,
        energy_combined: e_comb,
        energy_electron: e_el,
        lifetime_combined: finite(levitation_lifetime(e_comb, p)?),
        lifetime_electron: finite(levitation_lifetime(e_el, p)?),
    })
}

impl FeasibilityReport {
    pub fn results(&self) -> BTreeMap<String, Json> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Json| {
            m.insert(k.to_string(), v);
        };
        put("freespace_n_in_per_s", json!(self.freespace_n_in));
        put("freespace_power_w", json!(self.freespace_power));
        put(
            "cavity",
            Json::Array(
                self.cavities
                    .iter()
                    .map(|c| json!({"finesse": c.finesse, "n_in_per_s": c.n_in, "power_w": c.power}))
                    .collect(),
            ),
        );
        put("excess_psd_m2_per_hz", json!(self.excess_psd));
        put("excess_one_sided_asd_m_per_rthz", json!(self.excess_one_sided_asd));
        put("excess_two_sided_asd_m_per_rthz", json!(self.excess_two_sided_asd));
        put("quench_temperature_k", json!(self.quench_temperature));
        put("energy_combined_j", json!(self.energy_combined));
        put("energy_electron_j", json!(self.energy_electron));
        put("lifetime_combined_s", json!(self.lifetime_combined));
        put("lifetime_electron_s", json!(self.lifetime_electron));
        m
    }

    /// Structured text: inputs echoed verbatim, then `key = value` results.
    pub fn to_text(&self, s: &Scenario) -> String {
        let mut out = String::new();
        out.push_str("# feasibility report\n[inputs]\n");
        let text = s.to_text();
        let inputs = text
            .lines()
            .skip_while(|l| *l != "[feasibility]")
            .skip(1)
            .take_while(|l| !l.is_empty());
        for line in inputs {
            let _ = writeln!(out, "feasibility.{line}");
        }
        let _ = writeln!(out, "\n[freespace]");
        let _ = writeln!(out, "min_input_flux = {:e} /s", self.freespace_n_in);
        let _ = writeln!(out, "min_input_power = {:e} W", self.freespace_power);
        for c in &self.cavities {
            let _ = writeln!(out, "\n[cavity finesse = {:e}]", c.finesse);
            let _ = writeln!(out, "min_input_flux = {:e} /s", c.n_in);
            let _ = writeln!(out, "min_input_power = {:e} W", c.power);
        }
        let _ = writeln!(out, "\n[excess_noise_bound]");
        let _ = writeln!(out, "psd_two_sided = {:e} m^2/Hz", self.excess_psd);
        let _ = writeln!(out, "asd_one_sided = {:e} m/rtHz", self.excess_one_sided_asd);
        let _ = writeln!(out, "asd_two_sided = {:e} m/rtHz", self.excess_two_sided_asd);
        let _ = writeln!(out, "\n[quench]");
        let _ = writeln!(out, "temperature = {:e} K", self.quench_temperature);
        let _ = writeln!(out, "energy_combined = {:e} J", self.energy_combined);
        let _ = writeln!(out, "energy_electron_only = {:e} J", self.energy_electron);
        let life = |l: Option<f64>| l.map(|t| format!("{t:e} s")).unwrap_or_else(|| "unlimited".into());
        let _ = writeln!(out, "lifetime_combined = {}", life(self.lifetime_combined));
        let _ = writeln!(out, "lifetime_electron_only = {}", life(self.lifetime_electron));
        out
    }
}

pub fn run_feasibility(s: &Scenario, out: &Path) -> Result<(Manifest, PathBuf), CliError> {
    let report = evaluate(s)?;
    let mut dir = OutputDir::create(out)?;
    dir.write_bytes(SCENARIO_FILE, s.to_text().as_bytes())?;
    dir.write_bytes(REPORT_FILE, report.to_text(s).as_bytes())?;
    let curves: Vec<(f64, Vec<(f64, f64)>)> = report.cavities.iter().map(|c| (c.finesse, c.curve.clone())).collect();
    dir.write_with(SWEEP_FILE, |w| write_sweep_csv(w, &curves))?;
    let mut manifest = Manifest::new(ManifestKind::Feasibility, s.hash(), s.seed());
    manifest.results = report.results();
    manifest.complete = true;
    let path = dir.finish(&mut manifest)?;
    Ok((manifest, path))
}
