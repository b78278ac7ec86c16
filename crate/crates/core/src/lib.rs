//! Level-2 large deviations, metastable time-scale hierarchies and Gamma-expansions
//! for finite continuous-time Markov chains.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod ctmc;
mod elim;
pub mod error;
pub mod gamma;
pub mod hierarchy;
mod graph;
pub mod operators;
pub mod rate;

pub use error::{Error, Result};
