use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("number of modes must be at least 1")]
    ZeroModes,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown parameter `{param}` for preset `{preset}`")]
    UnknownParameter { preset: String, param: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid time interval [{t0}, {t1}]: t1 must exceed t0")]
    InvalidInterval { t0: f64, t1: f64 },

    #[error("invalid time step {0}: must be positive and finite")]
    InvalidStep(f64),

    #[error("grid [{t0}, {t1}] is not covered by the Hamiltonian domain [{d0}, {d1}]")]
    DomainMismatch { t0: f64, t1: f64, d0: f64, d1: f64 },

    #[error("coefficient matrix A is not symmetric (residual {residual:.3e} at t = {t})")]
    AsymmetricA { t: f64, residual: f64 },

    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error(
        "ladder Hamiltonian is unphysical: reconstructed phase-space form has \
         imaginary part {imag:.3e} and asymmetry {asym:.3e}"
    )]
    UnphysicalLadder { imag: f64, asym: f64 },

    #[error(
        "canonical residual {residual:.3e} at t = {t} exceeds {limit:.1e} \
         (dt = {dt:.3e}); reduce the time step"
    )]
    CanonicalDrift { t: f64, residual: f64, limit: f64, dt: f64 },

    #[error("condition ({which}) violated at t = {t}: residual {residual:.3e}")]
    ConditionViolated { which: &'static str, t: f64, residual: f64 },

    #[error("time {t} is not a grid point with neighbours at distance {dt}")]
    OutsideGrid { t: f64, dt: f64 },

    #[error("imaginary residual {residual:.3e} at t = {t} exceeds {limit:.1e}")]
    ImaginaryResidual { t: f64, residual: f64, limit: f64 },

    #[error("occupation numbers must be nonnegative, got {0}")]
    NegativeOccupation(i64),

    #[error("oracle: {0}")]
    OracleUnsupported(String),

    #[error("oracle: cutoff sensitivity {deviation:.3e} exceeds {tol:.1e}; refusing to certify")]
    OracleNotCertified { deviation: f64, tol: f64 },

    #[error("oracle: coherent amplitude tail {tail:.3e} beyond cutoff {cutoff}")]
    CoherentTail { tail: f64, cutoff: usize },
}
