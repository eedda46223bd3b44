//! Quantities with explicit unit suffixes, e.g. `637 nm` or `8000 Hz/V`.

use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    None,
    Length,
    Time,
    Frequency,
    /// Damping and angular rates; `Hz` is read as 2π rad/s.
    AngularRate,
    /// Photon flux.
    Flux,
    Temperature,
    Mass,
    Density,
    Power,
    Gradient,
    FieldPerCurrent,
    Current,
    FieldStrength,
    GainPerVolt,
    Angle,
    Force,
    Impulse,
    DisplacementAsd,
}

impl Dim {
    /// Canonical SI suffix written back out.
    pub fn si(self) -> &'static str {
        match self {
            Dim::None => "",
            Dim::Length => "m",
            Dim::Time => "s",
            Dim::Frequency => "Hz",
            Dim::AngularRate => "rad/s",
            Dim::Flux => "/s",
            Dim::Temperature => "K",
            Dim::Mass => "kg",
            Dim::Density => "kg/m^3",
            Dim::Power => "W",
            Dim::Gradient => "T/m",
            Dim::FieldPerCurrent => "T/A",
            Dim::Current => "A",
            Dim::FieldStrength => "A/m",
            Dim::GainPerVolt => "Hz/V",
            Dim::Angle => "rad",
            Dim::Force => "N",
            Dim::Impulse => "N*s",
            Dim::DisplacementAsd => "m/rtHz",
        }
    }

    fn units(self) -> &'static [(&'static str, f64)] {
        const LENGTH: &[(&str, f64)] = &[
            ("m", 1.0),
            ("cm", 1e-2),
            ("mm", 1e-3),
            ("um", 1e-6),
            ("µm", 1e-6),
            ("nm", 1e-9),
            ("pm", 1e-12),
            ("fm", 1e-15),
        ];
        const TIME: &[(&str, f64)] = &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)];
        const FREQUENCY: &[(&str, f64)] = &[("Hz", 1.0), ("mHz", 1e-3), ("kHz", 1e3), ("MHz", 1e6)];
        const ANGULAR: &[(&str, f64)] = &[
            ("rad/s", 1.0),
            ("/s", 1.0),
            ("1/s", 1.0),
            ("Hz", 2.0 * PI),
            ("kHz", 2e3 * PI),
        ];
        const FLUX: &[(&str, f64)] = &[("/s", 1.0), ("1/s", 1.0), ("photons/s", 1.0)];
        const TEMPERATURE: &[(&str, f64)] = &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("µK", 1e-6)];
        const MASS: &[(&str, f64)] = &[
            ("kg", 1.0),
            ("g", 1e-3),
            ("mg", 1e-6),
            ("ug", 1e-9),
            ("µg", 1e-9),
            ("ng", 1e-12),
        ];
        const DENSITY: &[(&str, f64)] = &[("kg/m^3", 1.0), ("kg/m3", 1.0), ("g/cm^3", 1e3), ("g/cm3", 1e3)];
        const POWER: &[(&str, f64)] = &[
            ("W", 1.0),
            ("mW", 1e-3),
            ("uW", 1e-6),
            ("µW", 1e-6),
            ("nW", 1e-9),
            ("pW", 1e-12),
        ];
        const GRADIENT: &[(&str, f64)] = &[("T/m", 1.0), ("mT/m", 1e-3)];
        const FIELD_PER_CURRENT: &[(&str, f64)] = &[("T/A", 1.0), ("mT/A", 1e-3), ("uT/A", 1e-6), ("µT/A", 1e-6)];
        const CURRENT: &[(&str, f64)] = &[("A", 1.0), ("mA", 1e-3), ("uA", 1e-6), ("µA", 1e-6)];
        const FIELD_STRENGTH: &[(&str, f64)] = &[("A/m", 1.0), ("kA/m", 1e3)];
        const GAIN: &[(&str, f64)] = &[("Hz/V", 1.0), ("kHz/V", 1e3)];
        const ANGLE: &[(&str, f64)] = &[("rad", 1.0), ("deg", PI / 180.0)];
        const FORCE: &[(&str, f64)] = &[("N", 1.0), ("mN", 1e-3), ("uN", 1e-6), ("nN", 1e-9), ("pN", 1e-12)];
        const IMPULSE: &[(&str, f64)] = &[("N*s", 1.0), ("Ns", 1.0), ("N s", 1.0)];
        const ASD: &[(&str, f64)] = &[
            ("m/rtHz", 1.0),
            ("nm/rtHz", 1e-9),
            ("pm/rtHz", 1e-12),
            ("fm/rtHz", 1e-15),
        ];
        match self {
            Dim::None => &[],
            Dim::Length => LENGTH,
            Dim::Time => TIME,
            Dim::Frequency => FREQUENCY,
            Dim::AngularRate => ANGULAR,
            Dim::Flux => FLUX,
            Dim::Temperature => TEMPERATURE,
            Dim::Mass => MASS,
            Dim::Density => DENSITY,
            Dim::Power => POWER,
            Dim::Gradient => GRADIENT,
            Dim::FieldPerCurrent => FIELD_PER_CURRENT,
            Dim::Current => CURRENT,
            Dim::FieldStrength => FIELD_STRENGTH,
            Dim::GainPerVolt => GAIN,
            Dim::Angle => ANGLE,
            Dim::Force => FORCE,
            Dim::Impulse => IMPULSE,
            Dim::DisplacementAsd => ASD,
        }
    }

    /// Accepted suffixes, for error messages.
    pub fn accepted(self) -> String {
        if self == Dim::None {
            return "no unit".into();
        }
        self.units().iter().map(|u| u.0).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitError(pub String);

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Split "1e7/s" or "637 nm" into the number and the unit text.
fn split_number(text: &str) -> (&str, &str) {
    let bytes = text.as_bytes();
    let mut end = 0;
    while end < bytes.len() {
        let c = bytes[end] as char;
        let exp_ok = (c == 'e' || c == 'E')
            && end > 0
            && bytes[..end].iter().any(|b| b.is_ascii_digit())
            && bytes
                .get(end + 1)
                .map(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+')
                .unwrap_or(false);
        let sign_ok = (c == '-' || c == '+') && (end == 0 || matches!(bytes[end - 1], b'e' | b'E'));
        if c.is_ascii_digit() || c == '.' || exp_ok || sign_ok {
            end += 1;
        } else {
            break;
        }
    }
    (&text[..end], text[end..].trim())
}

/// Parse a quantity and convert to SI. A bare number is taken as SI.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64, UnitError> {
    let text = text.trim();
    let (num, unit) = split_number(text);
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError(format!("'{text}' does not start with a number")))?;
    if !value.is_finite() {
        return Err(UnitError(format!("'{text}' is not finite")));
    }
    if unit.is_empty() {
        return Ok(value);
    }
    if dim == Dim::None {
        return Err(UnitError(format!("'{text}' must be a plain number")));
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| scale(value, *f))
        .ok_or_else(|| UnitError(format!("unknown unit '{unit}' in '{text}'; expected one of {}", dim.accepted())))
}

/// value·factor, dividing by an exact power of ten for sub-unit prefixes so
/// that e.g. "6 ug" gives exactly 6e-9.
fn scale(value: f64, factor: f64) -> f64 {
    let k = factor.log10().round() as i32;
    if (1..=15).contains(&-k) && factor == 1.0 / 10f64.powi(-k) {
        value / 10f64.powi(-k)
    } else {
        value * factor
    }
}

/// Canonical text: shortest round-trip number followed by the SI suffix.
pub fn format_quantity(value: f64, dim: Dim) -> String {
    let suffix = dim.si();
    if suffix.is_empty() {
        format!("{value:e}")
    } else {
        format!("{value:e} {suffix}")
    }
}
