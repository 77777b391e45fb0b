use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The mapping could not place mass inside the pessimistic set. The
    /// initial safe set always lies in the pessimistic set, so this signals
    /// a broken internal invariant rather than a user error.
    #[error("pessimistic set is empty at round {round}")]
    EmptyPessimisticSet { round: usize },
    #[error("version space became empty at round {round}; the constraint is outside the configured model class")]
    ModelMismatch { round: usize },
    #[error("no action satisfies the true constraint")]
    NoSafeAction,
    #[error("action is not in the optimistic set (f_min = {f_min})")]
    ActionNotOptimistic { f_min: f64 },
    #[error("candidate pool is empty (lattice resolution {resolution})")]
    EmptyCandidatePool { resolution: usize },
    #[error("gradient norm {norm} exceeds the configured bound {bound}")]
    GradientTooLarge { norm: f64, bound: f64 },
    #[error("no awake action")]
    NoAwakeAction,
    #[error("eluder search exceeded {budget} nodes; best lower bound {lower_bound}")]
    SearchBudgetExceeded { budget: u64, lower_bound: usize },
    #[error("bound violated at scale {scale}: observed {observed} > bound {bound}")]
    BoundViolated {
        scale: f64,
        observed: f64,
        bound: f64,
    },
    #[error("hindsight optimum missing from the ledger")]
    MissingHindsight,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
