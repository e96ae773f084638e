use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The simplex constraint cannot be met because the box bounds sum to
    /// less than one.
    #[error("infeasible W-SVDD problem: sum of box bounds is {total} (< 1)")]
    Infeasible { total: f64 },

    #[error("W-SVDD solver did not converge after {iterations} updates (KKT violation {violation:e})")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error("W-SVDD training set is empty")]
    EmptyTrainingSet,

    #[error("memory window is empty; warm-up must populate it first")]
    EmptyMemory,

    #[error("evaluation sets do not partition the same-cluster neighbors of node {}", .node + 1)]
    NotAPartition { node: usize },

    #[error("estimate of node {} diverged at t = {t}", .node + 1)]
    Diverged { node: usize, t: u64 },

    #[error("singular linear system")]
    Singular,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run {run} failed: {source}")]
    Run {
        run: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
