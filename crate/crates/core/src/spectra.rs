//! Spectral estimation and fits: Welch PSD, tone and floor extraction,
//! ring-up regression and probe-tone calibration.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::physics::{
    driven_response, equilibrium_displacement, gradient_for_frequency, probe_force, OscillatorMode,
    ResonanceExclusion, HBAR,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            // periodic Hann, exact COLA at 50 % overlap
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// One-sided averaged periodogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub frequencies: Vec<f64>,
    /// One-sided PSD [unit²/Hz].
    pub psd: Vec<f64>,
    pub segments: usize,
    pub window: Window,
    /// Equivalent noise bandwidth of one bin [Hz].
    pub rbw: f64,
    /// Bin spacing [Hz].
    pub df: f64,
}

impl SpectrumEstimate {
    /// One-sided ASD [unit/√Hz].
    pub fn asd(&self) -> Vec<f64> {
        self.psd.iter().map(|p| p.sqrt()).collect()
    }

    fn bin_range(&self, f_lo: f64, f_hi: f64) -> std::ops::RangeInclusive<usize> {
        let last = self.psd.len().saturating_sub(1);
        let lo = ((f_lo / self.df).ceil().max(0.0) as usize).min(last);
        let hi = ((f_hi / self.df).floor().max(0.0) as usize).min(last);
        lo..=hi
    }

    /// ∫ PSD df over [f_lo, f_hi].
    pub fn band_power(&self, f_lo: f64, f_hi: f64) -> f64 {
        self.bin_range(f_lo, f_hi).map(|i| self.psd[i]).sum::<f64>() * self.df
    }

    /// Mean PSD over [f_lo, f_hi].
    pub fn band_mean(&self, f_lo: f64, f_hi: f64) -> f64 {
        let r = self.bin_range(f_lo, f_hi);
        let n = r.clone().count().max(1);
        r.map(|i| self.psd[i]).sum::<f64>() / n as f64
    }

    /// RMS amplitude of a tone at `f` from the power within ±2 RBW.
    pub fn tone_rms(&self, f: f64) -> f64 {
        self.band_power(f - 2.0 * self.rbw, f + 2.0 * self.rbw).sqrt()
    }

    /// Spectrum of `a·x` for this estimate of `x`.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.psd.iter_mut().for_each(|p| *p *= a * a);
        out
    }

    /// Export as `f_Hz,asd_unit_per_sqrtHz` with metadata comments.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# window = {}", self.window.name())?;
        writeln!(w, "# segments = {}", self.segments)?;
        writeln!(w, "# rbw_Hz = {:e}", self.rbw)?;
        writeln!(w, "f_Hz,asd_unit_per_sqrtHz")?;
        for (f, p) in self.frequencies.iter().zip(&self.psd) {
            writeln!(w, "{:e},{:e}", f, p.sqrt())?;
        }
        Ok(())
    }
}

/// Streaming Welch estimator: Hann-type windows, 50 % overlap, per-segment
/// mean removal. Memory use is one segment regardless of record length.
pub struct WelchAccumulator {
    fft: Arc<dyn Fft<f64>>,
    window: Window,
    coeffs: Vec<f64>,
    sample_rate: f64,
    pending: Vec<f64>,
    hop: usize,
    sum: Vec<f64>,
    segments: usize,
    scratch: Vec<Complex<f64>>,
}

impl WelchAccumulator {
    pub fn new(segment_length: usize, sample_rate: f64, window: Window) -> Result<Self> {
        if segment_length < 4 {
            return Err(Error::Config(format!("segment length {segment_length} is too small")));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(segment_length);
        Ok(Self {
            fft,
            window,
            coeffs: window.coefficients(segment_length),
            sample_rate,
            pending: Vec::with_capacity(segment_length),
            hop: segment_length / 2,
            sum: vec![0.0; segment_length / 2 + 1],
            segments: 0,
            scratch: vec![Complex::default(); segment_length],
        })
    }

    pub fn segment_length(&self) -> usize {
        self.coeffs.len()
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn push(&mut self, x: f64) {
        self.pending.push(x);
        if self.pending.len() == self.coeffs.len() {
            self.process();
            self.pending.drain(..self.hop);
        }
    }

    pub fn extend(&mut self, xs: &[f64]) {
        xs.iter().for_each(|&x| self.push(x));
    }

    fn process(&mut self) {
        let n = self.coeffs.len();
        let mean = self.pending.iter().sum::<f64>() / n as f64;
        for ((s, x), w) in self.scratch.iter_mut().zip(&self.pending).zip(&self.coeffs) {
            *s = Complex::new((x - mean) * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        for (acc, c) in self.sum.iter_mut().zip(&self.scratch) {
            *acc += c.norm_sqr();
        }
        self.segments += 1;
    }

    pub fn finish(&self) -> Result<SpectrumEstimate> {
        if self.segments < 2 {
            return Err(Error::TooShort(format!(
                "{} complete segment(s) of {} samples; at least 2 required",
                self.segments,
                self.coeffs.len()
            )));
        }
        let n = self.coeffs.len();
        let s1: f64 = self.coeffs.iter().sum();
        let s2: f64 = self.coeffs.iter().map(|w| w * w).sum();
        let norm = 1.0 / (self.sample_rate * s2 * self.segments as f64);
        let last = self.sum.len() - 1;
        let psd = self
            .sum
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let one_sided = if k == 0 || (k == last && n % 2 == 0) { 1.0 } else { 2.0 };
                one_sided * p * norm
            })
            .collect();
        let df = self.sample_rate / n as f64;
        Ok(SpectrumEstimate {
            frequencies: (0..=last).map(|k| k as f64 * df).collect(),
            psd,
            segments: self.segments,
            window: self.window,
            rbw: self.sample_rate * s2 / (s1 * s1),
            df,
        })
    }
}

/// Welch PSD of a complete record.
pub fn estimate_psd(series: &[f64], sample_rate: f64, segment_length: usize, window: Window) -> Result<SpectrumEstimate> {
    let mut acc = WelchAccumulator::new(segment_length, sample_rate, window)?;
    acc.extend(series);
    acc.finish()
}

/// Frequency band with an optional excluded interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Notch {
    pub center: f64,
    pub half_width: f64,
}

/// Robust floor: median PSD in the band, corrected to the mean of a χ²
/// distribution with 2·segments degrees of freedom. The strongest peak is
/// notched out automatically (±3 of its linewidths) if it stands clear of
/// the floor, together with any explicit notches. Returns a one-sided ASD.
pub fn noise_floor(est: &SpectrumEstimate, band: (f64, f64), notches: &[Notch]) -> Result<f64> {
    let range = est.bin_range(band.0, band.1);
    let mut keep: Vec<usize> = range
        .filter(|&i| {
            notches
                .iter()
                .all(|n| (est.frequencies[i] - n.center).abs() > n.half_width)
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Domain("no spectral bins left in the floor band".into()));
    }
    let med = median(keep.iter().map(|&i| est.psd[i]).collect());
    let (peak_i, peak) = keep
        .iter()
        .map(|&i| (i, est.psd[i]))
        .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    if peak > 20.0 * med {
        let fwhm = half_max_width(est, peak_i, med).max(est.rbw);
        let center = est.frequencies[peak_i];
        keep.retain(|&i| (est.frequencies[i] - center).abs() > 3.0 * fwhm);
    }
    if keep.is_empty() {
        return Err(Error::Domain("band fully occupied by the mechanical peak".into()));
    }
    let med = median(keep.iter().map(|&i| est.psd[i]).collect());
    let nu = 2.0 * est.segments as f64;
    let median_over_mean = (1.0 - 2.0 / (9.0 * nu)).powi(3);
    Ok((med / median_over_mean).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Full width [Hz] at half height above `floor` around bin `peak`.
fn half_max_width(est: &SpectrumEstimate, peak: usize, floor: f64) -> f64 {
    let half = floor + 0.5 * (est.psd[peak] - floor);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut prev = peak;
        for i in range {
            if est.psd[i] < half {
                let (p0, p1) = (est.psd[prev], est.psd[i]);
                let frac = if p0 != p1 { (p0 - half) / (p0 - p1) } else { 0.0 };
                let (f0, f1) = (est.frequencies[prev], est.frequencies[i]);
                return f0 + frac * (f1 - f0);
            }
            prev = i;
        }
        est.frequencies[prev]
    };
    let hi = crossing(&mut (peak + 1..est.psd.len()));
    let lo = crossing(&mut (0..peak).rev());
    hi - lo
}

/// Centre frequency and full width at half maximum [Hz] of the largest peak
/// in [f_lo, f_hi]. For a Lorentzian the FWHM equals the energy damping rate
/// divided by 2π.
pub fn peak_linewidth(est: &SpectrumEstimate, f_lo: f64, f_hi: f64) -> Result<(f64, f64)> {
    let range = est.bin_range(f_lo, f_hi);
    let (peak, _) = range
        .map(|i| (i, est.psd[i]))
        .fold((usize::MAX, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    if peak == usize::MAX {
        return Err(Error::Domain("empty band".into()));
    }
    Ok((est.frequencies[peak], half_max_width(est, peak, 0.0)))
}

/// Result of a ring-up regression, in phonons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingUpFit {
    pub n0: f64,
    /// Heating rate below the changepoint [phonons/s].
    pub gamma_th: f64,
    pub changepoint: Option<f64>,
    pub slope_after: Option<f64>,
    pub r_squared: f64,
}

/// Minimum F statistic for a slope change to be reported.
const CHANGEPOINT_F: f64 = 50.0;

/// Fit n(t) = n₀ + Γ t, allowing one continuous change of slope.
pub fn fit_ring_up(t: &[f64], n: &[f64]) -> Result<RingUpFit> {
    if t.len() != n.len() {
        return Err(Error::FitFailure("time and energy series differ in length".into()));
    }
    if t.len() < 6 {
        return Err(Error::TooShort(format!("{} points; at least 6 required", t.len())));
    }
    if n.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite samples".into()));
    }
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let span = t1 - t0;
    if !(span > 0.0) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::FitFailure("time stamps must be strictly increasing".into()));
    }
    let scale = n.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::FitFailure("degenerate (all-zero) series".into()));
    }
    let u: Vec<f64> = t.iter().map(|v| (v - t0) / span).collect();
    let y: Vec<f64> = n.iter().map(|v| v / scale).collect();
    let m = u.len();

    let (a, b, rss_line) = line_fit(&u, &y);
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let ybar = y.iter().sum::<f64>() / m as f64;
    let tss = syy - m as f64 * ybar * ybar;

    // suffix sums for the hinge regressor h = max(0, u − u*)
    let mut suf = vec![[0.0; 4]; m + 1];
    for i in (0..m).rev() {
        suf[i] = [
            suf[i + 1][0] + 1.0,
            suf[i + 1][1] + u[i],
            suf[i + 1][2] + u[i] * u[i],
            suf[i + 1][3] + u[i] * y[i],
        ];
    }
    let su: f64 = suf[0][1];
    let suu: f64 = suf[0][2];
    let sy: f64 = y.iter().sum();
    let suy: f64 = suf[0][3];
    let ys: Vec<f64> = {
        let mut v = vec![0.0; m + 1];
        for i in (0..m).rev() {
            v[i] = v[i + 1] + y[i];
        }
        v
    };

    let mut best: Option<(f64, [f64; 3], f64)> = None;
    let lo = m / 10;
    let hi = m - m / 10;
    for k in lo.max(2)..hi.min(m - 2) {
        let us = u[k];
        let [c, s1, s2, s1y] = suf[k];
        let sh = s1 - c * us;
        let shh = s2 - 2.0 * us * s1 + c * us * us;
        let suh = s2 - us * s1;
        let syh = s1y - us * ys[k];
        let xtx = [[m as f64, su, sh], [su, suu, suh], [sh, suh, shh]];
        let xty = [sy, suy, syh];
        let Some(beta) = solve3(xtx, xty) else { continue };
        let rss = syy - (beta[0] * xty[0] + beta[1] * xty[1] + beta[2] * xty[2]);
        if best.map_or(true, |b| rss < b.2) {
            best = Some((us, beta, rss));
        }
    }

    let mut fit = RingUpFit {
        n0: a * scale,
        gamma_th: b * scale / span,
        changepoint: None,
        slope_after: None,
        r_squared: if tss > 0.0 { 1.0 - rss_line / tss } else { 1.0 },
    };
    if let Some((us, beta, rss)) = best {
        let rss = rss.max(0.0);
        let f_stat = (rss_line - rss) / (rss / (m as f64 - 3.0)).max(f64::MIN_POSITIVE);
        let relative_change = beta[2].abs() / beta[1].abs().max(f64::MIN_POSITIVE);
        if f_stat > CHANGEPOINT_F && relative_change > 0.1 {
            fit.n0 = beta[0] * scale;
            fit.gamma_th = beta[1] * scale / span;
            fit.changepoint = Some(t0 + us * span);
            fit.slope_after = Some((beta[1] + beta[2]) * scale / span);
            fit.r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
        }
    }
    if !(fit.gamma_th > 0.0) {
        return Err(Error::FitFailure(format!(
            "no heating: fitted slope {:e} phonons/s is not positive",
            fit.gamma_th
        )));
    }
    Ok(fit)
}

/// Ring-up fit on an energy series [J] for `mode`.
pub fn fit_ring_up_energy(t: &[f64], energy: &[f64], mode: &OscillatorMode) -> Result<RingUpFit> {
    let quantum = HBAR * mode.omega0();
    let n: Vec<f64> = energy.iter().map(|e| e / quantum).collect();
    fit_ring_up(t, &n)
}

/// Ordinary least squares y = a + b x; returns (a, b, RSS).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let xb = x.iter().sum::<f64>() / m;
    let yb = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - xb).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xb) * (b - yb)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = yb - b * xb;
    let rss = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    (a, b, rss)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *o = det(m) / d;
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    ProbeTone,
    Mirror,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Metres per detector unit.
    pub factor: f64,
    /// Total relative uncertainty.
    pub uncertainty: f64,
    pub statistical: f64,
    pub systematic: f64,
    pub method: CalibrationMethod,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    /// (trap frequency [Hz], factor, absolute uncertainty) per data set.
    pub per_frequency: Vec<(f64, f64, f64)>,
}

impl CalibrationResult {
    /// Whether two calibrations agree within their combined uncertainty.
    pub fn agrees_with(&self, other: &CalibrationResult) -> bool {
        let sigma = ((self.factor * self.uncertainty).powi(2) + (other.factor * other.uncertainty).powi(2)).sqrt();
        (self.factor - other.factor).abs() <= sigma
    }
}

/// Responses at one trap frequency: set current amplitudes and the measured
/// RMS tone amplitude in detector units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeToneSeries {
    pub trap_frequency: f64,
    pub currents: Vec<f64>,
    pub measured: Vec<f64>,
}

/// Probe coil geometry and drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCoil {
    /// Field at the particle per ampere of coil current [T/A].
    pub field_per_ampere: f64,
    /// Relative uncertainty of `field_per_ampere`.
    pub relative_uncertainty: f64,
    pub drive_frequency: f64,
}

/// Predicted RMS displacement per ampere of probe current [m/A].
pub fn probe_tone_response_per_ampere(coil: &ProbeCoil, trap_frequency: f64, mass: f64, density: f64, q: f64) -> Result<f64> {
    let mode = OscillatorMode::from_frequency(mass, trap_frequency, q)?;
    let b_z = gradient_for_frequency(trap_frequency, density)?;
    let dz = equilibrium_displacement(coil.field_per_ampere, b_z)?;
    let force = probe_force(&mode, dz);
    let x = driven_response(force, &mode, 2.0 * PI * coil.drive_frequency, ResonanceExclusion::default())?;
    Ok(x.abs())
}

/// Convert measured probe-tone responses into a metres-per-unit factor.
pub fn probe_tone_calibration(
    data: &[ProbeToneSeries],
    coil: &ProbeCoil,
    mass: f64,
    density: f64,
    q: f64,
) -> Result<CalibrationResult> {
    if data.len() < 2 {
        return Err(Error::CalibrationRejected("at least two trap frequencies are required".into()));
    }
    let mut per = Vec::new();
    let mut residuals = Vec::new();
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for series in data {
        if series.currents.len() != series.measured.len() || series.currents.is_empty() {
            return Err(Error::CalibrationRejected(format!(
                "malformed series at {} Hz",
                series.trap_frequency
            )));
        }
        let predicted = probe_tone_response_per_ampere(coil, series.trap_frequency, mass, density, q)?;
        let sii: f64 = series.currents.iter().map(|i| i * i).sum();
        let siy: f64 = series.currents.iter().zip(&series.measured).map(|(i, y)| i * y).sum();
        if !(sii > 0.0) || !(siy > 0.0) {
            return Err(Error::CalibrationRejected(format!(
                "no response at {} Hz",
                series.trap_frequency
            )));
        }
        let slope = siy / sii;
        let res: Vec<f64> = series
            .currents
            .iter()
            .zip(&series.measured)
            .map(|(i, y)| y - slope * i)
            .collect();
        let rss: f64 = res.iter().map(|r| r * r).sum();
        let dof = series.currents.len().saturating_sub(1).max(1) as f64;
        let slope_sigma = (rss / dof / sii).sqrt();
        let ybar = series.measured.iter().sum::<f64>() / series.measured.len() as f64;
        ss_tot += series.measured.iter().map(|y| (y - ybar).powi(2)).sum::<f64>();
        ss_res += rss;
        residuals.extend(res);
        let factor = predicted / slope;
        let sigma = (factor * slope_sigma / slope).max(factor * 1e-12);
        per.push((series.trap_frequency, factor, sigma));
    }
    let wsum: f64 = per.iter().map(|p| 1.0 / (p.2 * p.2)).sum();
    let factor = per.iter().map(|p| p.1 / (p.2 * p.2)).sum::<f64>() / wsum;
    let pooled_sigma = (1.0 / wsum).sqrt();
    for &(f, fi, si) in &per {
        let combined = (si * si + pooled_sigma * pooled_sigma).sqrt();
        if (fi - factor).abs() > 3.0 * combined && (fi - factor).abs() > 1e-9 * factor {
            return Err(Error::CalibrationRejected(format!(
                "factor at {f} Hz ({fi:e}) deviates from the pooled value ({factor:e}) by more than 3 sigma"
            )));
        }
    }
    // Between-frequency scatter also counts as statistical uncertainty.
    let n = per.len() as f64;
    let scatter = (per.iter().map(|p| (p.1 - factor).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    let statistical = pooled_sigma.max(scatter) / factor;
    let systematic = coil.relative_uncertainty;
    Ok(CalibrationResult {
        factor,
        uncertainty: statistical.hypot(systematic),
        statistical,
        systematic,
        method: CalibrationMethod::ProbeTone,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        residuals,
        per_frequency: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                sigma * g
            })
            .collect()
    }

    #[test]
    fn tone_power_is_half_amplitude_squared() {
        let fs = 1000.0;
        let a = 3.0;
        let x: Vec<f64> = (0..100_000).map(|i| a * (2.0 * PI * 123.4 * i as f64 / fs).sin()).collect();
        let est = estimate_psd(&x, fs, 4096, Window::Hann).unwrap();
        let p = est.tone_rms(123.4).powi(2);
        assert!((p / (a * a / 2.0) - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let (fs, sigma) = (500.0, 0.7);
        let x = white(400_000, sigma, 1);
        let est = estimate_psd(&x, fs, 1024, Window::Hann).unwrap();
        let level = est.band_mean(10.0, 240.0);
        assert!((level / (2.0 * sigma * sigma / fs) - 1.0).abs() < 0.05);
        let total: f64 = est.psd.iter().sum::<f64>() * est.df;
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((total / var - 1.0).abs() < 0.02);
    }

    #[test]
    fn psd_scales_quadratically() {
        let x = white(10_000, 1.0, 2);
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
        let a = estimate_psd(&x, 100.0, 256, Window::Hann).unwrap();
        let b = estimate_psd(&y, 100.0, 256, Window::Hann).unwrap();
        for (p, q) in a.psd.iter().zip(&b.psd) {
            assert!((q - 16.0 * p).abs() <= 1e-12 * q.abs().max(1e-300));
        }
    }

    #[test]
    fn hann_rbw_is_one_and_a_half_bins() {
        let x = white(4096, 1.0, 3);
        let est = estimate_psd(&x, 1024.0, 1024, Window::Hann).unwrap();
        assert!((est.rbw / (1.5 * est.df) - 1.0).abs() < 1e-12);
        let rect = estimate_psd(&x, 1024.0, 1024, Window::Rectangular).unwrap();
        assert!((rect.rbw - rect.df).abs() < 1e-12);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let x = white(1000, 1.0, 4);
        assert!(matches!(estimate_psd(&x, 1.0, 1024, Window::Hann), Err(Error::TooShort(_))));
        // the second 50 %-overlapped segment is one sample short
        let y = white(1535, 1.0, 4);
        assert!(estimate_psd(&y, 1.0, 1024, Window::Hann).is_err());
    }

    #[test]
    fn streaming_matches_batch() {
        let x = white(20_000, 1.0, 5);
        let batch = estimate_psd(&x, 10.0, 512, Window::Hann).unwrap();
        let mut acc = WelchAccumulator::new(512, 10.0, Window::Hann).unwrap();
        for chunk in x.chunks(777) {
            acc.extend(chunk);
        }
        assert_eq!(acc.finish().unwrap(), batch);
    }

    #[test]
    fn floor_of_white_noise_with_peak() {
        let fs = 2000.0;
        let sigma = 0.1;
        let mut x = white(800_000, sigma, 6);
        for (i, v) in x.iter_mut().enumerate() {
            *v += 5.0 * (2.0 * PI * 300.0 * i as f64 / fs).sin();
        }
        let est = estimate_psd(&x, fs, 2048, Window::Hann).unwrap();
        let floor = noise_floor(&est, (150.0, 450.0), &[]).unwrap();
        let expected = (2.0 * sigma * sigma / fs).sqrt();
        assert!((floor / expected - 1.0).abs() < 0.05, "{floor} vs {expected}");
    }

    #[test]
    fn floor_band_fully_notched_is_an_error() {
        let x = white(10_000, 1.0, 7);
        let est = estimate_psd(&x, 100.0, 256, Window::Hann).unwrap();
        let notch = Notch {
            center: 20.0,
            half_width: 30.0,
        };
        assert!(noise_floor(&est, (10.0, 30.0), &[notch]).is_err());
    }

    #[test]
    fn exact_line_is_recovered() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let n: Vec<f64> = t.iter().map(|t| 1.5e9 + 6.4e12 * t).collect();
        let fit = fit_ring_up(&t, &n).unwrap();
        assert!((fit.n0 / 1.5e9 - 1.0).abs() < 1e-6);
        assert!((fit.gamma_th / 6.4e12 - 1.0).abs() < 1e-6);
        assert!(fit.changepoint.is_none());
    }

    #[test]
    fn changepoint_is_located() {
        let t: Vec<f64> = (0..500).map(|i| i as f64 * 0.1).collect();
        let mut rng = rng_from_seed(8);
        let n: Vec<f64> = t
            .iter()
            .map(|&t| {
                let base = if t < 35.0 { 2.0 * t } else { 70.0 + 0.5 * (t - 35.0) };
                let g: f64 = StandardNormal.sample(&mut rng);
                base + 0.2 * g
            })
            .collect();
        let fit = fit_ring_up(&t, &n).unwrap();
        let cp = fit.changepoint.expect("changepoint");
        assert!((cp / 35.0 - 1.0).abs() < 0.05, "{cp}");
        assert!((fit.gamma_th / 2.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn degenerate_ring_up_fails() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let flat = vec![0.0; 50];
        assert!(matches!(fit_ring_up(&t, &flat), Err(Error::FitFailure(_))));
        let falling: Vec<f64> = t.iter().map(|t| 100.0 - t).collect();
        assert!(matches!(fit_ring_up(&t, &falling), Err(Error::FitFailure(_))));
        assert!(fit_ring_up(&t[..3], &falling[..3]).is_err());
    }

    fn coil() -> ProbeCoil {
        ProbeCoil {
            field_per_ampere: 1e-5,
            relative_uncertainty: 0.05,
            drive_frequency: 217.0,
        }
    }

    #[test]
    fn probe_tone_recovers_synthetic_factor() {
        let (mass, density, q) = (5.76e-9, 1.1e4, 1e5);
        let truth = 1e-9;
        let data: Vec<ProbeToneSeries> = [174.0, 186.0, 233.0]
            .iter()
            .map(|&f| {
                let per_amp = probe_tone_response_per_ampere(&coil(), f, mass, density, q).unwrap();
                let currents = vec![0.1, 0.2, 0.3, 0.4];
                let measured = currents.iter().map(|i| i * per_amp / truth).collect();
                ProbeToneSeries {
                    trap_frequency: f,
                    currents,
                    measured,
                }
            })
            .collect();
        let cal = probe_tone_calibration(&data, &coil(), mass, density, q).unwrap();
        assert!((cal.factor / truth - 1.0).abs() < 1e-3);
        assert_eq!(cal.systematic, 0.05);
        assert_eq!(cal.method, CalibrationMethod::ProbeTone);
    }

    #[test]
    fn inconsistent_frequencies_are_rejected() {
        let (mass, density, q) = (5.76e-9, 1.1e4, 1e5);
        let mut rng = rng_from_seed(9);
        let data: Vec<ProbeToneSeries> = [174.0, 186.0, 233.0]
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                let per_amp = probe_tone_response_per_ampere(&coil(), f, mass, density, q).unwrap();
                let truth = if k == 2 { 2e-9 } else { 1e-9 };
                let currents = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                let measured = currents
                    .iter()
                    .map(|i| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        i * per_amp / truth * (1.0 + 0.001 * g)
                    })
                    .collect();
                ProbeToneSeries {
                    trap_frequency: f,
                    currents,
                    measured,
                }
            })
            .collect();
        assert!(matches!(
            probe_tone_calibration(&data, &coil(), mass, density, q),
            Err(Error::CalibrationRejected(_))
        ));
        assert!(probe_tone_calibration(&data[..1], &coil(), mass, density, q).is_err());
    }

    #[test]
    fn spectrum_csv_header() {
        let x = white(2048, 1.0, 10);
        let est = estimate_psd(&x, 100.0, 512, Window::Hann).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: Vec<&str> = text.lines().take(4).collect();
        assert_eq!(header[0], "# window = hann");
        assert_eq!(header[1], "# segments = 7");
        assert!(header[2].starts_with("# rbw_Hz = "));
        assert_eq!(header[3], "f_Hz,asd_unit_per_sqrtHz");
    }
}
