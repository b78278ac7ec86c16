use thiserror::Error;

/// Errors produced by the chain, operator, functional and hierarchy routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("edge {from} -> {to} carries a symbolic rate but no beta was given")]
    MissingBeta { from: String, to: String },

    #[error("rate of edge {from} -> {to} overflows at beta = {beta}")]
    Overflow { from: String, to: String, beta: f64 },

    #[error("value {0} overflows the f64 range")]
    ScalarOverflow(String),

    #[error("generator is not irreducible ({classes} communicating classes)")]
    NotIrreducible { classes: usize },

    #[error("measure does not charge every state (state {state} has weight {weight})")]
    NotFullSupport { state: String, weight: f64 },

    #[error("solver did not converge after {iterations} iterations (best value {value}, residual {residual})")]
    NoConvergence {
        iterations: usize,
        value: f64,
        residual: f64,
    },

    #[error("state subset is empty")]
    EmptySubset,

    #[error("state {0} is not in the state space")]
    UnknownState(String),

    #[error("state {state} has zero holding rate outside the kept set; the trace is undefined")]
    AbsorbedOutside { state: String },

    #[error("state {state} cannot reach the boundary set")]
    UnreachableBoundary { state: String },

    #[error("neither target nor avoid set is reachable from state {state}")]
    Unreachable { state: String },

    #[error("target and avoid sets intersect at state {0}")]
    OverlappingSets(String),

    #[error("division by the asymptotic zero")]
    DivByZero,

    #[error("state space of size {size} exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("level {level} has no positive inter-class rate")]
    DegenerateLevel { level: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hierarchy invariant violated: {0}")]
    Invariant(String),

    #[error("uniformization needs more than {cap} steps (rate * time = {load})")]
    StepCap { cap: f64, load: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
