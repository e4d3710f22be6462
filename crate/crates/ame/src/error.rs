use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {site} out of range for {n_sites}-site chain")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("{n_sites} sites exceed the dense-matrix limit of {max} sites")]
    TooManySites { n_sites: usize, max: usize },

    #[error("matrix dimensions {0}x{0} and {1}x{1} do not match")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian: max deviation {dev:.3e} exceeds {tol:.3e}")]
    NotHermitian { dev: f64, tol: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigendecomposition failed to converge for dimension {dim}")]
    EigenConvergence { dim: usize },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid bath: {0}")]
    InvalidBath(String),

    #[error("schedule argument s = {0} outside [0, 1]")]
    ScheduleArg(f64),

    #[error("quadrature did not reach the requested tolerance: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("no bracketed root for {0}")]
    NoRoot(String),

    #[error("missing spectral sample at omega = {0} GHz")]
    MissingSample(f64),

    #[error("trigamma pole at non-positive integer z = {0}")]
    TrigammaPole(f64),

    #[error("invalid evolution config: {0}")]
    InvalidEvolution(String),

    #[error("implicit stage matrix is singular at t = {t} ns, dt = {dt} ns")]
    SingularStage { t: f64, dt: f64 },

    #[error("step size {dt:.3e} ns fell below dt_min = {dt_min:.3e} ns at t = {t} ns")]
    StepTooSmall { t: f64, dt: f64, dt_min: f64 },

    #[error("truncation leakage {leakage:.3e} exceeded 1e-2 at t = {t} ns")]
    LeakageAbort { t: f64, leakage: f64 },

    #[error("positivity violation: min eigenvalue {min_eig:.3e} below -1e-4 at t = {t} ns")]
    PositivityAbort { t: f64, min_eig: f64 },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("unknown config keys: {0}")]
    UnknownKeys(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
