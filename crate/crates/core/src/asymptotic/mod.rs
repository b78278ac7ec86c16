//! One-term asymptotic arithmetic and the symbolic chain computations built on it.

mod family;
mod scalar;

pub use family::{mean_interclass_rates, RateFamily, ARBORESCENCE_CAP};
pub use scalar::{
    exponent_from_f64, format_exponent, parse_exponent, sum, AsymptoticOrder, AsymptoticScalar,
    Coeff, Exponent,
};
