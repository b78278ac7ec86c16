use super::classes::classify_states;
use super::generator::Generator;
use super::measure::ProbabilityMeasure;
use crate::elim::gth;
use crate::error::{Error, Result};

/// Unique stationary distribution of an irreducible generator.
///
/// Uses subtraction-free state elimination, so tiny components at large rate
/// separations keep full relative accuracy.
pub fn stationary_distribution(gen: &Generator) -> Result<ProbabilityMeasure> {
    let dec = classify_states(gen);
    if !dec.is_irreducible() {
        return Err(Error::NotIrreducible {
            classes: dec.n_classes(),
        });
    }
    let w = gth(gen.rows()).map_err(|_| Error::NotIrreducible {
        classes: dec.n_classes(),
    })?;
    ProbabilityMeasure::from_unnormalized(w)
}

/// One stationary measure per closed class, each supported exactly on its class.
pub fn extreme_stationary_states(gen: &Generator) -> Vec<(Vec<usize>, ProbabilityMeasure)> {
    let n = gen.n_states();
    classify_states(gen)
        .closed_classes()
        .into_iter()
        .map(|c| {
            let pi = stationary_distribution(&gen.restrict(c))
                .expect("a closed class is irreducible");
            (c.clone(), pi.embed(n, c))
        })
        .collect()
}
