use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generator::Generator;
use super::measure::ProbabilityMeasure;
use crate::error::{Error, Result};

/// Time-averaged occupation of one Gillespie path on `[0, t_max]`.
pub fn simulate_empirical_measure(
    gen: &Generator,
    x0: usize,
    t_max: f64,
    seed: u64,
) -> Result<ProbabilityMeasure> {
    let n = gen.n_states();
    if x0 >= n {
        return Err(Error::UnknownState(x0.to_string()));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occupation = vec![0.0; n];
    let mut x = x0;
    let mut t = 0.0;
    while t < t_max {
        let lam = gen.holding()[x];
        if lam <= 0.0 {
            occupation[x] += t_max - t;
            break;
        }
        let u: f64 = rng.random();
        let stay = -(1.0 - u).ln() / lam;
        if t + stay >= t_max {
            occupation[x] += t_max - t;
            break;
        }
        occupation[x] += stay;
        t += stay;
        let mut pick = rng.random::<f64>() * lam;
        let mut next = x;
        for y in 0..n {
            let r = gen.rate(x, y);
            if r <= 0.0 {
                continue;
            }
            next = y;
            if pick < r {
                break;
            }
            pick -= r;
        }
        x = next;
    }
    ProbabilityMeasure::from_unnormalized(occupation)
}
