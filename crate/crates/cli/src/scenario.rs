//! Line-oriented scenario files: `[section]` headers and `key = value` lines.
//! Keys may be dotted (`camera.iterations = 25` at top level is the same as
//! `iterations = 25` under `[camera]`). `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::units::{format_quantity, parse_quantity, Dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Quantity(Dim),
    List(Dim),
    Int,
    Bool,
    Text,
    Words,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    List(Vec<f64>),
    Int(u64),
    Bool(bool),
    Text(String),
    Words(Vec<String>),
}

pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    /// None means the key is mandatory.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Param {
    Param { key, kind, default, help }
}

use Dim as D;
use Kind::{Bool as B, Int as I, List as L, Quantity as Q, Text as T, Words as W};

pub const STAGES: &[&str] = &["liftoff", "camera", "intensity", "interferometric", "calibration", "ringup"];

pub static SCHEMA: &[Param] = &[
    p("run.seed", I, None, "RNG seed; mandatory"),
    p("run.output", T, Some("out"), "output directory"),
    p(
        "run.stages",
        W,
        Some("liftoff, camera, intensity, interferometric, calibration, ringup"),
        "stages to execute, in order",
    ),
    p("particle.density", Q(D::Density), Some("1.1e4 kg/m^3"), ""),
    p("particle.radius", Q(D::Length), Some("50 um"), ""),
    p("particle.mass", Q(D::Mass), Some("0 kg"), "0 derives the mass from density and radius"),
    p("trap.axial_frequency", Q(D::Frequency), Some("160 Hz"), ""),
    p("trap.radial_frequency", Q(D::Frequency), Some("80 Hz"), ""),
    p("trap.q", Q(D::None), Some("1e5"), "mechanical quality factor"),
    p("environment.temperature", Q(D::Temperature), Some("1.665e8 K"), "effective bath temperature"),
    p("sim.radial_dt", Q(D::Time), Some("100 us"), "integrator step of the radial stages"),
    p("sim.feedback_delay", I, Some("1"), "controller latency in steps"),
    p("sim.trajectory_rate", Q(D::Frequency), Some("10 kHz"), "export rate of trajectory.csv"),
    p("sim.detector_records", I, Some("2000"), "detector bins written to detector.csv"),
    p("laser.wavelength", Q(D::Length), Some("637 nm"), ""),
    p("laser.input_flux", Q(D::Flux), Some("1e7 /s"), ""),
    p("laser.detected_flux", Q(D::Flux), Some("1e7 /s"), ""),
    p("laser.reference_flux", Q(D::Flux), Some("1e9 /s"), "reference-arm flux at the detectors"),
    p("laser.record_rate", Q(D::Frequency), Some("200 kHz"), "detector bin and lock update rate"),
    p("roughness.surface_rms", Q(D::Length), Some("1 um"), "0 disables the roughness process"),
    p("roughness.target_asd", Q(D::DisplacementAsd), Some("955 pm/rtHz"), "one-sided floor at the trap frequency"),
    p("roughness.rotation_rate", Q(D::AngularRate), Some("66.7 rad/s"), ""),
    p("roughness.correlation_length", Q(D::Length), Some("1 um"), ""),
    p("lock.gain", Q(D::GainPerVolt), Some("8000 Hz/V"), ""),
    p("lock.enabled", B, Some("true"), ""),
    p("lock.loss_window", I, Some("20000"), "updates averaged by the fringe-slip detector"),
    p("lock.loss_threshold", Q(D::None), Some("0.65"), "running rms error that signals fringe slips"),
    p("camera.enabled", B, Some("true"), ""),
    p("camera.initial_amplitude", Q(D::Length), Some("50 um"), "radial amplitude after lift-off"),
    p("camera.pixel_pitch", Q(D::Length), Some("250 nm"), ""),
    p("camera.centroid_noise", Q(D::Length), Some("100 nm"), ""),
    p("camera.field_of_view", Q(D::Length), Some("200 um"), ""),
    p("camera.separation", Q(D::None), Some("0.2"), "snapshot spacing in radial periods"),
    p("camera.wait_periods", Q(D::None), Some("2"), ""),
    p("camera.impulse_quantum", Q(D::Impulse), Some("1.2e-12 N*s"), ""),
    p("camera.max_quanta", I, Some("30"), ""),
    p("camera.iterations", I, Some("25"), ""),
    p("intensity.enabled", B, Some("true"), ""),
    p("intensity.fwhm", Q(D::Length), Some("4 um"), ""),
    p("intensity.peak_flux", Q(D::Flux), Some("1e7 /s"), ""),
    p("intensity.duration", Q(D::Time), Some("10 s"), "per radial axis"),
    p("intensity.gamma_fb", Q(D::AngularRate), Some("0.5 rad/s"), ""),
    p("intensity.bandwidth", Q(D::Frequency), Some("40 Hz"), ""),
    p("intensity.phase", Q(D::Angle), Some("90 deg"), ""),
    p("intensity.force_limit", Q(D::Force), Some("1 nN"), ""),
    p("interferometric.enabled", B, Some("true"), ""),
    p("interferometric.gamma_fb", Q(D::AngularRate), Some("21 Hz"), ""),
    p("interferometric.bandwidth", Q(D::Frequency), Some("8 kHz"), ""),
    p("interferometric.phase", Q(D::Angle), Some("90 deg"), ""),
    p("interferometric.force_limit", Q(D::Force), Some("10 nN"), ""),
    p("interferometric.settle", Q(D::Time), Some("1 s"), ""),
    p("interferometric.duration", Q(D::Time), Some("8 s"), "recorded after settling"),
    p("interferometric.segment_length", I, Some("131072"), "Welch segment in detector bins"),
    p("calibration.drive_frequency", Q(D::Frequency), Some("217 Hz"), ""),
    p("calibration.trap_frequencies", L(D::Frequency), Some("174 Hz, 186 Hz, 233 Hz"), ""),
    p("calibration.currents", L(D::Current), Some("1 A, 2 A, 3 A"), ""),
    p("calibration.field_per_ampere", Q(D::FieldPerCurrent), Some("1 uT/A"), ""),
    p("calibration.coil_uncertainty", Q(D::None), Some("0.14"), "relative"),
    p("calibration.gamma_fb", Q(D::AngularRate), Some("0.5 rad/s"), "weak damping that keeps the lock"),
    p("calibration.settle", Q(D::Time), Some("2 s"), ""),
    p("calibration.duration", Q(D::Time), Some("4 s"), ""),
    p("calibration.mirror_amplitude", Q(D::Length), Some("79.625 nm"), ""),
    p("calibration.mirror_tolerance", Q(D::None), Some("0.1"), "relative"),
    p("calibration.mirror_periods", I, Some("200"), ""),
    p("calibration.fringe_amplitude", Q(D::Length), Some("637 nm"), ""),
    p("calibration.fringe_frequency", Q(D::Frequency), Some("50 Hz"), ""),
    p("ringup.repeats", I, Some("1000"), ""),
    p("ringup.duration", Q(D::Time), Some("10 s"), ""),
    p("ringup.interval", Q(D::Time), Some("100 ms"), ""),
    p("analysis.floor_band", L(D::Frequency), Some("190 Hz, 245 Hz"), ""),
    p("feasibility.mass", Q(D::Mass), Some("6 ug"), ""),
    p("feasibility.frequency", Q(D::Frequency), Some("200 Hz"), ""),
    p("feasibility.q", Q(D::None), Some("2.6e7"), ""),
    p("feasibility.freespace_temperature", Q(D::Temperature), Some("3 K"), ""),
    p("feasibility.freespace_wavelength", Q(D::Length), Some("637 nm"), ""),
    p("feasibility.freespace_eta", Q(D::None), Some("1"), ""),
    p("feasibility.cavity_temperature", Q(D::Temperature), Some("15 mK"), ""),
    p("feasibility.cavity_wavelength", Q(D::Length), Some("1.55 um"), ""),
    p("feasibility.cavity_length", Q(D::Length), Some("1 cm"), ""),
    p("feasibility.finesse", L(D::None), Some("1e4, 1e5, 1e6"), ""),
    p("feasibility.cavity_eta", Q(D::None), Some("0.75"), ""),
    p("feasibility.flux_min", Q(D::Flux), Some("1e2 /s"), ""),
    p("feasibility.flux_max", Q(D::Flux), Some("1e14 /s"), ""),
    p("feasibility.flux_points", I, Some("241"), ""),
    p("feasibility.applied_field", Q(D::FieldStrength), Some("5000 A/m"), ""),
    p("feasibility.critical_field", Q(D::FieldStrength), Some("6.4e4 A/m"), ""),
    p("feasibility.critical_temperature", Q(D::Temperature), Some("7.2 K"), ""),
    p("feasibility.start_temperature", Q(D::Temperature), Some("3.5 K"), ""),
    p("feasibility.absorbed_power", Q(D::Power), Some("3 pW"), ""),
];

pub fn param(key: &str) -> Option<&'static Param> {
    SCHEMA.iter().find(|p| p.key == key)
}

pub fn valid_keys() -> Vec<&'static str> {
    SCHEMA.iter().map(|p| p.key).collect()
}

pub fn parse_value(text: &str, kind: Kind) -> Result<Value, String> {
    let text = text.trim();
    match kind {
        Kind::Quantity(d) => parse_quantity(text, d).map(Value::Num).map_err(|e| e.0),
        Kind::List(d) => {
            if text.is_empty() {
                return Ok(Value::List(Vec::new()));
            }
            text.split(',')
                .map(|t| parse_quantity(t, d).map_err(|e| e.0))
                .collect::<Result<_, _>>()
                .map(Value::List)
        }
        Kind::Int => text
            .parse::<u64>()
            .map(Value::Int)
            .map_err(|_| format!("'{text}' is not a non-negative integer")),
        Kind::Bool => match text {
            "true" | "yes" | "on" => Ok(Value::Bool(true)),
            "false" | "no" | "off" => Ok(Value::Bool(false)),
            _ => Err(format!("'{text}' is not a boolean")),
        },
        Kind::Text => Ok(Value::Text(text.trim_matches('"').to_string())),
        Kind::Words => Ok(Value::Words(
            text.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect(),
        )),
    }
}

pub fn format_value(v: &Value, kind: Kind) -> String {
    match (v, kind) {
        (Value::Num(x), Kind::Quantity(d)) => format_quantity(*x, d),
        (Value::List(xs), Kind::List(d)) => xs.iter().map(|x| format_quantity(*x, d)).collect::<Vec<_>>().join(", "),
        (Value::Int(i), _) => i.to_string(),
        (Value::Bool(b), _) => b.to_string(),
        (Value::Text(s), _) => s.clone(),
        (Value::Words(ws), _) => ws.join(", "),
        _ => unreachable!("value does not match its schema kind"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    values: BTreeMap<&'static str, Value>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Parse and validate; every problem found is reported together.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut problems = Vec::new();
        let mut given: BTreeMap<&'static str, Value> = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') && param(k).is_some() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            let Some(p) = param(&key) else {
                let prefix = key.rsplit_once('.').map(|(s, _)| format!("{s}.")).unwrap_or_default();
                let mut near: Vec<&str> = SCHEMA.iter().map(|p| p.key).filter(|k| k.starts_with(&prefix)).collect();
                if near.is_empty() {
                    near = SCHEMA.iter().map(|p| p.key).collect();
                }
                problems.push(format!("line {}: unknown key '{key}'; valid keys: {}", n + 1, near.join(", ")));
                continue;
            };
            if given.contains_key(p.key) {
                problems.push(format!("line {}: '{key}' given twice", n + 1));
                continue;
            }
            match parse_value(v, p.kind) {
                Ok(val) => {
                    given.insert(p.key, val);
                }
                Err(e) => problems.push(format!("line {}: {key}: {e}", n + 1)),
            }
        }
        let mut values = BTreeMap::new();
        for p in SCHEMA {
            if let Some(v) = given.remove(p.key) {
                values.insert(p.key, v);
            } else if let Some(d) = p.default {
                values.insert(p.key, parse_value(d, p.kind).expect("schema default parses"));
            } else {
                problems.push(format!("'{}' is mandatory ({})", p.key, p.help));
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Invalid(problems));
        }
        let s = Self { values };
        s.validate()?;
        Ok(s)
    }

    /// Canonical text: every key in schema order with SI units.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for p in SCHEMA {
            let (section, key) = p.key.split_once('.').expect("schema keys are dotted");
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {}", format_value(&self.values[p.key], p.kind));
        }
        out
    }

    /// SHA-256 of the canonical text without `run.output`, so the same
    /// scenario written to another directory keeps its identity.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("output = "))
            .flat_map(|l| [l, "\n"])
            .collect();
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Copy with one key replaced; the result is validated.
    pub fn with_value(&self, key: &str, value: Value) -> Result<Self, CliError> {
        let p = param(key).ok_or_else(|| CliError::UnknownKey {
            key: key.to_string(),
            valid: valid_keys().join(", "),
        })?;
        let mut s = self.clone();
        s.values.insert(p.key, value);
        s.validate()?;
        Ok(s)
    }

    pub fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("'{key}' is not a schema key"))
    }

    pub fn num(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Num(x) => *x,
            other => panic!("'{key}' is not a quantity: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::Int(x) => *x,
            other => panic!("'{key}' is not an integer: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(x) => *x,
            other => panic!("'{key}' is not a flag: {other:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::List(x) => x,
            other => panic!("'{key}' is not a list: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(x) => x,
            other => panic!("'{key}' is not text: {other:?}"),
        }
    }

    pub fn stages(&self) -> Vec<String> {
        match self.get("run.stages") {
            Value::Words(w) => w.clone(),
            other => panic!("run.stages malformed: {other:?}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.int("run.seed")
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        let positive = [
            "particle.density",
            "particle.radius",
            "trap.axial_frequency",
            "trap.radial_frequency",
            "trap.q",
            "sim.radial_dt",
            "sim.trajectory_rate",
            "laser.wavelength",
            "laser.input_flux",
            "laser.detected_flux",
            "laser.reference_flux",
            "laser.record_rate",
            "roughness.rotation_rate",
            "roughness.correlation_length",
            "camera.pixel_pitch",
            "camera.field_of_view",
            "camera.impulse_quantum",
            "intensity.fwhm",
            "intensity.duration",
            "intensity.bandwidth",
            "intensity.force_limit",
            "interferometric.bandwidth",
            "interferometric.force_limit",
            "interferometric.duration",
            "calibration.drive_frequency",
            "calibration.field_per_ampere",
            "calibration.mirror_amplitude",
            "calibration.fringe_amplitude",
            "calibration.fringe_frequency",
            "ringup.duration",
            "ringup.interval",
            "feasibility.mass",
            "feasibility.frequency",
            "feasibility.q",
            "feasibility.freespace_wavelength",
            "feasibility.cavity_wavelength",
            "feasibility.cavity_length",
            "feasibility.critical_field",
            "feasibility.critical_temperature",
            "feasibility.flux_min",
        ];
        for key in positive {
            if !(self.num(key) > 0.0) {
                bad.push(format!("{key} must be positive"));
            }
        }
        let non_negative = [
            "particle.mass",
            "environment.temperature",
            "roughness.surface_rms",
            "roughness.target_asd",
            "camera.centroid_noise",
            "camera.initial_amplitude",
            "intensity.peak_flux",
            "intensity.gamma_fb",
            "interferometric.gamma_fb",
            "interferometric.settle",
            "calibration.coil_uncertainty",
            "calibration.gamma_fb",
            "calibration.settle",
            "calibration.duration",
            "calibration.mirror_tolerance",
            "feasibility.freespace_temperature",
            "feasibility.cavity_temperature",
            "feasibility.applied_field",
            "feasibility.start_temperature",
            "feasibility.absorbed_power",
        ];
        for key in non_negative {
            if !(self.num(key) >= 0.0) {
                bad.push(format!("{key} must be non-negative"));
            }
        }
        for st in self.stages() {
            if !STAGES.contains(&st.as_str()) {
                bad.push(format!("unknown stage '{st}'; stages are {}", STAGES.join(", ")));
            }
        }
        if self.num("laser.detected_flux") > self.num("laser.input_flux") {
            bad.push("laser.detected_flux exceeds laser.input_flux".into());
        }
        let sep = self.num("camera.separation");
        if !(sep > 0.0 && sep < 0.5) {
            bad.push(format!("camera.separation {sep} must lie in (0, 0.5)"));
        }
        let fastest = self.num("trap.axial_frequency").max(self.num("trap.radial_frequency"));
        if self.num("sim.radial_dt") > 1.0 / (50.0 * fastest) {
            bad.push(format!(
                "sim.radial_dt must not exceed 1/(50·{fastest} Hz) = {:e} s",
                1.0 / (50.0 * fastest)
            ));
        }
        let rate = self.num("laser.record_rate");
        let traj = self.num("sim.trajectory_rate");
        if traj > 0.0 && ((rate / traj).round() - rate / traj).abs() > 1e-9 {
            bad.push("sim.trajectory_rate must divide laser.record_rate".into());
        }
        let lock_k = 2.0
            * std::f64::consts::PI
            * self.num("lock.gain")
            * maglev_core::phaselock::LockConfig::VOLTS_PER_UNIT
            / rate;
        if self.flag("lock.enabled") && lock_k >= 1.0 {
            bad.push(format!("lock.gain gives loop gain {lock_k:.3} ≥ 1 at the record rate (unstable)"));
        }
        let thr = self.num("lock.loss_threshold");
        if !(thr > 0.0 && thr < 1.0) {
            bad.push(format!("lock.loss_threshold {thr} must lie in (0, 1)"));
        }
        if self.int("lock.loss_window") == 0 {
            bad.push("lock.loss_window must be at least 1".into());
        }
        if self.int("interferometric.segment_length") < 16 {
            bad.push("interferometric.segment_length must be at least 16".into());
        }
        if self.list("calibration.trap_frequencies").len() < 2 {
            bad.push("calibration.trap_frequencies needs at least two entries".into());
        }
        if self.list("calibration.currents").is_empty() {
            bad.push("calibration.currents must not be empty".into());
        }
        let band = self.list("analysis.floor_band");
        if band.len() != 2 || !(band[0] > 0.0 && band[1] > band[0]) {
            bad.push("analysis.floor_band must be two increasing frequencies".into());
        }
        if !(self.num("feasibility.flux_max") > self.num("feasibility.flux_min")) {
            bad.push("feasibility.flux_max must exceed feasibility.flux_min".into());
        }
        if self.int("feasibility.flux_points") < 2 {
            bad.push("feasibility.flux_points must be at least 2".into());
        }
        for key in ["feasibility.freespace_eta", "feasibility.cavity_eta"] {
            let eta = self.num(key);
            if !(eta > 1.0 / 9.0 && eta <= 1.0) {
                bad.push(format!("{key} = {eta} must lie in (1/9, 1] for ground-state cooling"));
            }
        }
        if self.list("feasibility.finesse").iter().any(|f| !(*f > 0.0)) {
            bad.push("feasibility.finesse entries must be positive".into());
        }
        if self.num("feasibility.applied_field") >= self.num("feasibility.critical_field") {
            bad.push("feasibility.applied_field must be below feasibility.critical_field".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(bad))
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        let err = Scenario::parse("[laser]\nwavelength = 637 nm\n").unwrap_err();
        assert!(err.to_string().contains("run.seed"), "{err}");
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = Scenario::parse("[run]\nseed = 4\n[laser]\nwavelength = 532 nm\n").unwrap();
        let b = Scenario::parse("run.seed = 4\nlaser.wavelength = 532 nm\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num("laser.wavelength"), 532e-9);
    }

    #[test]
    fn every_problem_is_listed() {
        let text = "[run]\nseed = 1\n[particle]\nradius = -1 um\ncolour = red\n[laser]\nwavelength = 3 K\n[camera]\nseparation = 0.7\n";
        let CliError::Invalid(problems) = Scenario::parse(text).unwrap_err() else {
            panic!("expected a validation error");
        };
        assert!(problems.iter().any(|p| p.contains("colour")));
        assert!(problems.iter().any(|p| p.contains("laser.wavelength")));
        // range problems are reported once parsing succeeds
        let CliError::Invalid(problems) = Scenario::parse("[run]\nseed = 1\n[particle]\nradius = -1 um\n[camera]\nseparation = 0.7\n[lock]\ngain = 1e6 Hz/V\n").unwrap_err() else {
            panic!("expected a validation error");
        };
        assert_eq!(problems.len(), 3, "{problems:?}");
    }

    #[test]
    fn canonical_text_round_trips() {
        let s = Scenario::parse("[run]\nseed = 12\nstages = camera, ringup\n[interferometric]\ngamma_fb = 21 Hz\n").unwrap();
        let again = Scenario::parse(&s.to_text()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.to_text(), again.to_text());
        assert_eq!(s.hash(), again.hash());
    }

    #[test]
    fn replacing_a_value_revalidates() {
        let s = Scenario::parse("run.seed = 1").unwrap();
        assert!(s.with_value("camera.separation", Value::Num(0.9)).is_err());
        assert!(matches!(
            s.with_value("camera.nope", Value::Num(0.1)),
            Err(CliError::UnknownKey { .. })
        ));
        let t = s.with_value("intensity.gamma_fb", Value::Num(2.0)).unwrap();
        assert_eq!(t.num("intensity.gamma_fb"), 2.0);
    }
}
