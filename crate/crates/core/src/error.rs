use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "point is infeasible at t = {t} (residual {residual:e}); project it onto the domain first"
    )]
    Infeasible { t: f64, residual: f64 },

    #[error("temporal tangent set is empty at t = {t}; the domain is not forward Lipschitz here")]
    EmptyTangent { x: Vec<f64>, t: f64 },

    #[error("polyhedral projection hit the iteration cap ({iterations})")]
    IterationCap { best: Vec<f64>, iterations: usize },

    #[error("projection onto the domain at t = {t} failed: no start converged")]
    SetProjectionFailed { best: Option<Vec<f64>>, t: f64 },

    #[error("no feasible sample found after {draws} draws")]
    NoFeasibleSample { draws: usize },

    #[error("oracle grid contains no feasible point")]
    OracleEmpty,

    #[error("step from t = {t} failed: {source}")]
    Step {
        x: Vec<f64>,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
