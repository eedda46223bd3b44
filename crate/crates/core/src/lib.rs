//! Digital twin of a magnetically levitated superconducting microsphere read
//! out by optical interferometry.
//!
//! The crate is organised bottom-up:
//!
//! - [`physics`]: constants, particle and trap descriptions, harmonic modes.
//! - [`dynamics`]: exact stochastic integration of the damped oscillator.
//! - [`sensing`]: interferometric, intensity and camera readout models.
//! - [`phaselock`]: the frequency-offset phase-tracking loop.
//! - [`control`]: feedback controllers and closed-loop cooling theory.
//! - [`spectra`]: PSD estimation, ring-up fits and probe-tone calibration.
//! - [`feasibility`]: cooperativities, ground-state budgets, quench model.
//!
//! Conventions used throughout: angular frequencies are in rad/s internally,
//! constructors that take a "frequency" take Hz. Internal spectral densities
//! are two-sided in ordinary frequency (unit²/Hz, so that
//! `<x²> = ∫ S(ω) dω/2π`); user-facing amplitude spectral densities are
//! one-sided, `sqrt(2 S)`.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod phaselock;
pub mod physics;
pub mod sensing;
pub mod spectra;

pub use error::{Error, Result};

/// Deterministic RNG used by every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Build the crate RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// Derive an independent child seed for a named stream. Used so that each
/// component of a run owns its own generator while the run stays a function
/// of one seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
