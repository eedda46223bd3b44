use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("near-resonant drive: |f_z - f_dr| = {separation_hz:.4} Hz is below the exclusion threshold {threshold_hz:.4} Hz")]
    NearResonantDrive { separation_hz: f64, threshold_hz: f64 },

    #[error("simulation unstable at t = {time:.6} s: |x| = {excursion:.3e} m on axis {axis} exceeds {bound:.3e} m (check feedback sign and gain)")]
    Unstable {
        time: f64,
        axis: usize,
        excursion: f64,
        bound: f64,
    },

    #[error("non-finite state at t = {time:.6} s")]
    NonFinite { time: f64 },

    #[error("particle lost from the camera field of view at ({x:.3e}, {y:.3e}) m")]
    ParticleLost { x: f64, y: f64 },

    #[error("phase lock lost at t = {time:.6} s: {reason}")]
    LockLost { time: f64, reason: String },

    #[error("phase lock configuration unstable: loop gain per update {loop_gain:.3} rad >= 1")]
    LockUnstable { loop_gain: f64 },

    #[error("anti-damping detected on axis {axis}: amplitude grew monotonically from {from:.3e} m to {to:.3e} m (check feedback phase)")]
    AntiDamping { axis: usize, from: f64, to: f64 },

    #[error("noiseless measurement: optimum is unbounded")]
    NoiselessMeasurement,

    #[error("ground-state condition unsatisfiable: efficiency {eta} <= 1/9")]
    Unsatisfiable { eta: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("calibration rejected: {0}")]
    CalibrationRejected(String),

    #[error("series too short: {0}")]
    TooShort(String),
}
