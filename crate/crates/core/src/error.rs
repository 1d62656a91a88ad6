use std::fmt;

/// Errors raised anywhere in the mechanism pipeline.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// A parameter fell outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The social graph violates a structural assumption.
    #[error("client {client}: {reason}")]
    Structural { client: usize, reason: String },

    /// A formula was evaluated outside its domain (zero iteration, zero budget, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A best response at the current reward fell at or below the budget floor.
    #[error("infeasible best response for client {client}: budget {budget:e} is at or below the floor {floor:e}")]
    Infeasible { client: usize, budget: f64, floor: f64 },

    /// A numerical solver could not produce an answer.
    #[error("solver error: {0}")]
    Solver(String),

    /// The fixed-point sweep hit its round cap.
    #[error("fixed point did not converge at iteration {t} after {rounds} rounds (last residual {last_residual:e})")]
    NonConvergence {
        t: usize,
        rounds: usize,
        last_residual: f64,
        trace: Vec<f64>,
    },

    /// Federated training blew up.
    #[error("training diverged at iteration {t}: loss {loss:e} exceeds {limit:e}")]
    Divergence { t: usize, loss: f64, limit: f64 },

    /// Malformed or invalid configuration.
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// An error tagged with the pipeline stage it came from.
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 1 config, 2 solver, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Parameter { .. } | Error::Structural { .. } => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

/// Pipeline stage tags for [`Error::Stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Graph,
    Propagation,
    Roster,
    FixedPoint,
    SocialAgnostic,
    WelfareOptimum,
    PriceOfAnarchy,
    Training,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Graph => "graph",
            Stage::Propagation => "propagation",
            Stage::Roster => "roster",
            Stage::FixedPoint => "fixed-point",
            Stage::SocialAgnostic => "social-agnostic",
            Stage::WelfareOptimum => "welfare-optimum",
            Stage::PriceOfAnarchy => "price-of-anarchy",
            Stage::Training => "training",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

/// Configuration parse and validation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config field `{field}` = {value}: must satisfy {bound}")]
    Invalid {
        field: String,
        value: String,
        bound: String,
    },
}
