use thiserror::Error;

/// Errors raised by the formation toolkit.
///
/// Agent and edge indices carried by the variants are 1-based, matching the
/// numbering used in scenario files.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormationError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("edge {edge} ({tail},{head}) is a self-loop")]
    SelfLoop { edge: usize, tail: usize, head: usize },

    #[error("edge {edge} references node {node}, valid range is 1..={n}")]
    NodeOutOfRange { edge: usize, node: usize, n: usize },

    #[error("edge {edge} ({tail},{head}) duplicates edge {first}")]
    DuplicateEdge {
        edge: usize,
        first: usize,
        tail: usize,
        head: usize,
    },

    #[error("edge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("graph not connected ({components} components)")]
    NotConnected { components: usize },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("agent {agent}: v* is not reachable from its desired relative positions (residual {residual:.3e}); an agent needs at least m independent neighbors for scalar motion parameters, use matrix mode")]
    InfeasibleDesign { agent: usize, residual: f64 },

    #[error("agent {agent}: desired relative position to neighbor {neighbor} is zero, cannot build a matrix motion block")]
    DegenerateEdge { agent: usize, neighbor: usize },

    #[error("kappa = 0 cannot produce a nonzero velocity")]
    ZeroGainWithMotion,

    #[error("motion parameters are inconsistent: agent {agent} steady velocity deviates from agent 1 by {deviation:.3e}")]
    DesignInconsistent { agent: usize, deviation: f64 },

    #[error("motion parameter for agent {agent} towards {neighbor} is outside the graph neighborhood")]
    SparsityViolation { agent: usize, neighbor: usize },

    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} is numerically singular (condition number {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("eigensolver did not converge on {rows}x{rows} matrix:\n{dump}")]
    EigenNonConvergence { rows: usize, dump: String },

    #[error("time step {dt} exceeds the stability limit of the explicit integrator, use dt <= {suggested:.6e}")]
    StepTooLarge { dt: f64, suggested: f64 },

    #[error("simulation diverged at step {step} (t = {time}): |p| = {norm:.3e}")]
    Divergence { step: usize, time: f64, norm: f64 },
}

impl FormationError {
    /// `true` for input problems, `false` for numerical or stability failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            FormationError::Singular { .. }
                | FormationError::EigenNonConvergence { .. }
                | FormationError::StepTooLarge { .. }
                | FormationError::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FormationError>;
