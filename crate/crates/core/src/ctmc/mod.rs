//! Finite continuous-time Markov chains: specs, generators, classes, stationary
//! states, transition matrices, hitting probabilities and path simulation.

mod classes;
mod generator;
mod hitting;
mod measure;
mod simulate;
mod spec;
mod stationary;
mod transition;

pub use classes::{classify_states, ClassDecomposition};
pub(crate) use classes::classify_edges;
pub use generator::{build_generator, Generator};
pub use hitting::hitting_probability;
pub(crate) use hitting::entrance_law;
pub use measure::{ProbabilityMeasure, MASS_TOLERANCE, SUPPORT_THRESHOLD};
pub use simulate::simulate_empirical_measure;
pub use spec::{ChainSpec, Edge, RateExpr};
pub use stationary::{extreme_stationary_states, stationary_distribution};
pub use transition::{transition_matrix, UNIFORMIZATION_CAP};
