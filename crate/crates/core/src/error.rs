use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid atom array: {0}")]
    InvalidArray(String),

    #[error("blockade graph has no edges; MIS encoding is degenerate")]
    DegenerateGraph,

    #[error("independent-set search exceeded the node budget of {budget}")]
    NodeBudgetExceeded { budget: u64 },

    #[error("bitstring has {got} sites but the graph has {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid bitstring `{0}`")]
    InvalidBitstring(String),

    #[error("{count} maximum independent sets exceed the retention cap of {cap}")]
    CapExceeded { count: u64, cap: usize },

    #[error("basis dimension {dim} exceeds the limit of {limit}")]
    DimensionLimit { dim: u128, limit: u128 },

    #[error("eigensolver did not converge{}: {detail}", at_time(.t))]
    EigenNonConvergence { t: Option<f64>, detail: String },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("interpolation interval [{t0}, {t1}] is empty or outside the profile")]
    EmptyInterval { t0: f64, t1: f64 },

    #[error("gap integral vanishes on [{t0}, {t1}]")]
    ZeroDenominator { t0: f64, t1: f64 },

    #[error("gap profile does not match the schedule parameters: {0}")]
    ProfileMismatch(String),

    #[error("offset moves the waypoint detuning to {delta_min} rad/us, outside ({delta_i}, {delta_f})")]
    InvalidOffset { delta_min: f64, delta_i: f64, delta_f: f64 },

    #[error("polynomial fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("gap profile carries no eigenvectors")]
    MissingEigenvectors,

    #[error("step size underflow at t = {t} us")]
    StepUnderflow { t: f64 },

    #[error("evolution failed to converge: {0}")]
    NotConverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t} us"),
        None => String::new(),
    }
}
