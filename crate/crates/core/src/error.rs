use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part {0:e})")]
    NotSkew(f64),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("rotation block is singular (smallest singular value {0:e})")]
    SingularBlock(f64),
    #[error("matrix is rank deficient: rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("not a rotation matrix (orthogonality defect {defect:e}, det {det})")]
    NotRotation { defect: f64, det: f64 },
    #[error("invalid landmark set: {0}")]
    InvalidLandmarks(String),
    #[error("base gains ({0}, {1}, {2}) are not in K(1)")]
    BaseGainsInfeasible(f64, f64, f64),
    #[error("Riccati solution lost positive definiteness at t = {t} (min eigenvalue {min_eig:e})")]
    LostPositivity { t: f64, min_eig: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("sensor log is empty")]
    EmptyLog,
    #[error("non-monotone time at log row {row} (t = {t})")]
    NonMonotoneTime { row: usize, t: f64 },
    #[error("gap of {gap} s before log row {row} exceeds {max} s")]
    GapTooLarge { row: usize, gap: f64, max: f64 },
    #[error("malformed log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
