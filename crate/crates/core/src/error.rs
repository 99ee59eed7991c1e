use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One schema problem, anchored at a dotted key path such as `damage.D_l_xi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("Euler-angle singularity: |theta| = {theta:.6} rad is not below pi/2 - {margin}")]
    EulerSingularity { theta: f64, margin: f64 },

    #[error("nominal control-effectiveness matrix is near-singular (condition number {condition:.3e})")]
    SingularEffectiveness { condition: f64 },

    #[error("bound hypothesis violated: B[{axis}][{axis}] = {value} must be < 1")]
    DiagonalBound { axis: usize, value: f64 },

    #[error("gain bounds inadmissible: spectral radius rho(D) = {rho:.6} must be < 1")]
    SpectralRadius { rho: f64 },

    #[error("gain-bound solution has a negative component k_d[{axis}] = {value:e}")]
    NegativeGainBound { axis: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario schema errors: {}", format_issues(.0))]
    Schema(Vec<SchemaIssue>),

    #[error("trim infeasible: {0}")]
    TrimInfeasible(String),

    #[error("trim did not converge after {iterations} iterations (residual {residual:.3e})")]
    TrimDiverged { iterations: usize, residual: f64 },

    #[error("simulation diverged at t = {t:.3} s: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("telemetry error: {0}")]
    Telemetry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_issues(issues: &[SchemaIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Failure classes, one per process exit code of the command-line runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Config,
    Admissibility,
    Trim,
    Divergence,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Io => 1,
            ErrorClass::Config => 2,
            ErrorClass::Admissibility => 3,
            ErrorClass::Trim => 4,
            ErrorClass::Divergence => 5,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Schema(_) => ErrorClass::Config,
            Error::DiagonalBound { .. }
            | Error::SpectralRadius { .. }
            | Error::NegativeGainBound { .. }
            | Error::SingularEffectiveness { .. } => ErrorClass::Admissibility,
            Error::TrimInfeasible(_) | Error::TrimDiverged { .. } => ErrorClass::Trim,
            Error::EulerSingularity { .. } | Error::Divergence { .. } => ErrorClass::Divergence,
            Error::Io(_) | Error::Csv(_) | Error::Telemetry(_) => ErrorClass::Io,
        }
    }
}
