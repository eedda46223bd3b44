#![allow(dead_code)]

use std::f64::consts::PI;

/// Σ w[n]·e^{−2πiνn} for the periodic Hann window of length n.
pub fn hann_transform(nu: f64, n: usize) -> (f64, f64) {
    let dirichlet = |v: f64| {
        let nf = n as f64;
        let s = (PI * v).sin();
        let amp = if s.abs() < 1e-15 { nf } else { (PI * v * nf).sin() / s };
        let ph = -PI * v * (nf - 1.0);
        (amp * ph.cos(), amp * ph.sin())
    };
    let step = 1.0 / n as f64;
    let (a, b, c) = (dirichlet(nu), dirichlet(nu - step), dirichlet(nu + step));
    (0.5 * a.0 - 0.25 * (b.0 + c.0), 0.5 * a.1 - 0.25 * (b.1 + c.1))
}

/// Expected one-sided Welch value at `f` for a two-sided PSD `s`.
pub fn hann_smeared(s: impl Fn(f64) -> f64, f: f64, n: usize, fs: f64) -> f64 {
    let df = fs / n as f64;
    let norm: f64 = (0..n).map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).powi(2)).sum();
    let h = df / 200.0;
    let mut acc = 0.0;
    for i in -8000..8000 {
        let x = f + (i as f64 + 0.5) * h;
        let (re, im) = hann_transform((x - f) / fs, n);
        acc += s(x) * (re * re + im * im);
    }
    2.0 * acc * h / (fs * norm)
}

/// ∫ S dω/2π over ω ≥ 0 doubled, with a substitution that resolves the peak.
pub fn quadrature(f: impl Fn(f64) -> f64, w0: f64, width: f64) -> f64 {
    // ω = w0 + width·tan(u), u ∈ (−atan(w0/width), π/2)
    let lo = -(w0 / width).atan();
    let hi = PI / 2.0;
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let u = lo + (i as f64 + 0.5) * h;
        let w = w0 + width * u.tan();
        acc += f(w) * width / u.cos().powi(2);
    }
    2.0 * acc * h / (2.0 * PI)
}
