use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("degenerate affine map: lambda = 0")]
    DegenerateMap,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not enough structure at node {node:?}: {detail}")]
    NotEnoughStructure { node: String, detail: String },
    #[error("level {level} out of range (tree depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("walk precondition violated: {0}")]
    WalkPrecondition(String),
    #[error("no slack available for a perturbation radius")]
    ZeroSlack,
    #[error("cannot bound the tail supremum: {0}")]
    CannotBoundTail(String),
    #[error("window too short at step {k}: {detail}")]
    NeedsLongerWindow { k: usize, detail: String },
    #[error("no point of E in [eta*a_n, a_n] for n = {n}")]
    DensityPointViolation { n: usize },
    #[error("not found at this resolution")]
    NotFound,
    #[error("precision: {0}")]
    Precision(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("construction audit failed: {0}")]
    ConstructionAudit(String),
    #[error("frame split budget exhausted after {0} splits")]
    SplitBudget(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
