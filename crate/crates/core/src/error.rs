use thiserror::Error;

/// Errors raised by the simulation, shaping and scenario layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical instability at t = {time}: excitation grew past 10x its budget with dt = {dt}")]
    NumericalInstability { dt: f64, time: f64 },

    #[error("tail energy {tail:.3e} beyond U_max = {u_max} exceeds tolerance {tolerance:.1e}; increase U_max")]
    TailTooLarge { tail: f64, u_max: f64, tolerance: f64 },

    #[error("infeasible target at t = {time}: mode output vanishes at clock value {clock} where target intensity is nonzero")]
    InfeasibleTarget { time: f64, clock: f64 },

    #[error("optimal-mode iteration did not converge after {} iterations", history.len())]
    NonConvergence { history: Vec<f64> },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario `{id}`: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalInstability { .. }
            | Error::TailTooLarge { .. }
            | Error::InfeasibleTarget { .. }
            | Error::NonConvergence { .. } => true,
            Error::Scenario { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_scenario(self, id: &str) -> Self {
        match self {
            e @ Error::Scenario { .. } => e,
            e => Error::Scenario {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
