use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("excitation cutoff {cutoff} outside supported range 0..={max}")]
    CutoffOutOfRange { cutoff: usize, max: usize },

    #[error("truncation leakage {leakage:.3e} for |alpha| = {alpha} at cutoff {cutoff} exceeds {tolerance:.1e}")]
    TruncationLeakage { alpha: f64, cutoff: usize, leakage: f64, tolerance: f64 },

    #[error("state construction produced a zero vector: {0}")]
    ZeroVector(&'static str),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mixing angle phi is undefined when both control fields vanish")]
    UndefinedMixingAngle,

    #[error("degeneracy class requires g1 = g2 (got g1 = {g1}, g2 = {g2})")]
    UnequalCouplings { g1: f64, g2: f64 },

    #[error("construction needs {required} excitations but cutoff {cutoff} leaves headroom only up to {limit}")]
    Headroom { required: usize, cutoff: usize, limit: usize },

    #[error("step too large at t = {t:.6e}: dt * ||V|| = {product:.3e} exceeds {limit}")]
    StepTooLarge { t: f64, product: f64, limit: f64 },

    #[error("control schedule does not cover t = {t:.6e}")]
    ScheduleGap { t: f64 },

    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),

    #[error("adiabaticity monitor tripped at t = {t:.6e}: dark-subspace population {population:.4} < {threshold}")]
    AdiabaticityViolated { t: f64, population: f64, threshold: f64 },

    #[error("state is not in stored form: population {outside:.3e} outside the collective C mode")]
    NotStoredForm { outside: f64 },

    #[error("CFL condition violated: c*dt/dz = {courant:.4} > 1")]
    Cfl { courant: f64 },

    #[error("low-excitation assumption violated: max |sigma|^2 = {max:.3e} > {limit}")]
    LowExcitation { max: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
