//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the toolkit.
///
/// The CLI maps these onto exit codes: validation problems exit with 2,
/// missing pipeline dependencies with 3, numeric failures with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("empty embedding space: {0}")]
    EmptySpace(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("duplicate token {0:?}")]
    DuplicateToken(String),

    #[error("token {0:?} not in vocabulary")]
    MissingToken(String),

    #[error("vector for {0:?} has zero norm")]
    ZeroVector(String),

    #[error("query {0:?} has no usable context (no windows, or all window tokens out of vocabulary)")]
    NoUsableContext(String),

    #[error("insufficient training words: {got} usable, need at least {need}")]
    InsufficientTrainingWords { got: usize, need: usize },

    #[error("normal equations are singular at lambda = 0; rerun with lambda > 0")]
    SingularSystem,

    #[error("no substring of {0:?} is present in the table")]
    UncoveredWord(String),

    #[error("modifier {0:?} referenced but absent from the inventory")]
    ModifierNotInInventory(String),

    #[error("node {0:?} has alpha + sum(beta) = 0; retrofit update is ill-posed")]
    IllPosedNode(String),

    #[error("need at least 4 distinct queries to build tuples, got {0}")]
    TooFewItems(usize),

    #[error("design constraints unsatisfiable after {retries} restarts; still violated: {constraint}")]
    DesignUnsatisfiable { constraint: String, retries: usize },

    #[error("response references unknown tuple id {0}")]
    DanglingTupleId(u64),

    #[error("response for tuple {tuple_id} has invalid {which} index {index} (best and worst must be distinct and in 0..4)")]
    InvalidIndex {
        tuple_id: u64,
        which: &'static str,
        index: usize,
    },

    #[error("no question has at least 2 responses; nothing to split")]
    NothingToSplit,

    #[error("input length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("rank correlation undefined: {0}")]
    DegenerateInput(String),

    #[error("nothing embeddable in {0:?}")]
    NothingEmbeddable(String),

    #[error("no training examples{0}")]
    NoExamples(String),

    #[error("no intensity head trained for emotion {0}")]
    MissingHead(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage:?} requires artifact from stage {needs:?}: {path} not found")]
    MissingDependency {
        stage: String,
        needs: String,
        path: String,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 dependency, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingDependency { .. } => 3,
            Error::SingularSystem | Error::IllPosedNode(_) | Error::DegenerateInput(_) => 4,
            _ => 2,
        }
    }
}
