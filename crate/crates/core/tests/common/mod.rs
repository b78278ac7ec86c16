#![allow(dead_code)]

use metachain::asymptotic::{AsymptoticScalar, RateFamily};
use metachain::ctmc::{Generator, ProbabilityMeasure};
use metachain::operators::TiltPotential;
use metachain::rate::j_functional;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Arbitrary chain: each ordered pair carries an edge with probability `density`;
/// with probability `absorbing` a state loses all its outgoing edges.
pub fn random_chain(r: &mut ChaCha8Rng, n: usize, density: f64, absorbing: f64, lo: f64, hi: f64) -> Generator {
    let mut rows = vec![vec![0.0; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        if r.random::<f64>() < absorbing {
            continue;
        }
        for (y, v) in row.iter_mut().enumerate() {
            if x != y && r.random::<f64>() < density {
                *v = r.random_range(lo..hi);
            }
        }
    }
    Generator::from_rows(&rows).unwrap()
}

/// Irreducible chain: a random cycle plus extra edges.
pub fn random_irreducible(r: &mut ChaCha8Rng, n: usize, density: f64, lo: f64, hi: f64) -> Generator {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(r);
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (x, y) = (perm[i], perm[(i + 1) % n]);
        if x != y {
            rows[x][y] = r.random_range(lo..hi);
        }
    }
    for (x, row) in rows.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            if x != y && *v == 0.0 && r.random::<f64>() < density {
                *v = r.random_range(lo..hi);
            }
        }
    }
    Generator::from_rows(&rows).unwrap()
}

/// Measure with weights in `[0.1, 1]` before normalization and full support.
pub fn random_full_measure(r: &mut ChaCha8Rng, n: usize) -> ProbabilityMeasure {
    ProbabilityMeasure::from_unnormalized((0..n).map(|_| r.random_range(0.1..1.0)).collect()).unwrap()
}

/// Measure whose support is a random nonempty subset.
pub fn random_mixed_measure(r: &mut ChaCha8Rng, n: usize) -> ProbabilityMeasure {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if r.random::<f64>() < 0.35 { 0.0 } else { r.random_range(0.1..1.0) })
            .collect();
        if w.iter().any(|&v| v > 0.0) {
            return ProbabilityMeasure::from_unnormalized(w).unwrap();
        }
    }
}

/// Gradient-free maximization of `H -> J_H(mu)` over `H(0) = 0`, `H(x) in [-box, box]`:
/// a 17-point grid per coordinate, re-centred on the best point and shrunk by 4 each round.
pub fn grid_sup(gen: &Generator, mu: &ProbabilityMeasure, bound: f64) -> f64 {
    let n = gen.n_states();
    let d = n - 1;
    if d == 0 {
        return 0.0;
    }
    let mut centre = vec![0.0; d];
    let mut half = bound;
    let mut best = f64::NEG_INFINITY;
    let eval = |h: &[f64]| {
        let mut v = vec![0.0];
        v.extend_from_slice(h);
        j_functional(gen, &TiltPotential::new(v, 0).unwrap(), mu)
    };
    while half > 1e-7 {
        let step = half / 8.0;
        let total = 17usize.pow(d as u32);
        let mut round_best = (f64::NEG_INFINITY, centre.clone());
        let mut h = vec![0.0; d];
        for idx in 0..total {
            let mut k = idx;
            for (i, slot) in h.iter_mut().enumerate() {
                let g = (k % 17) as f64 - 8.0;
                k /= 17;
                *slot = (centre[i] + g * step).clamp(-bound, bound);
            }
            let v = eval(&h);
            if v > round_best.0 {
                round_best = (v, h.clone());
            }
        }
        best = best.max(round_best.0);
        centre = round_best.1;
        half /= 4.0;
    }
    best
}

pub fn sym(c: f64, half_steps: i64) -> AsymptoticScalar {
    AsymptoticScalar::from_parts(c, half_steps, 2)
}

/// Irreducible symbolic family with exponents in `{0, -1/2, ..., -2}`.
pub fn random_symbolic_irreducible(r: &mut ChaCha8Rng, n: usize, density: f64) -> RateFamily {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(r);
    let mut rates = vec![vec![AsymptoticScalar::Zero; n]; n];
    let draw = |r: &mut ChaCha8Rng| sym(r.random_range(1..=4) as f64, -(r.random_range(0..=4)));
    for i in 0..n {
        let (x, y) = (perm[i], perm[(i + 1) % n]);
        if x != y {
            rates[x][y] = draw(r);
        }
    }
    for x in 0..n {
        for y in 0..n {
            if x != y && rates[x][y].is_zero() && r.random::<f64>() < density {
                rates[x][y] = draw(r);
            }
        }
    }
    RateFamily::new(labels(n), rates).unwrap()
}

/// `(L f)(x) = sum_y R(x,y) (f(y) - f(x))`.
pub fn apply(gen: &Generator, f: &[f64]) -> Vec<f64> {
    let n = gen.n_states();
    (0..n)
        .map(|x| (0..n).map(|y| gen.rate(x, y) * (f[y] - f[x])).sum())
        .collect()
}

pub fn max_abs_diff(a: &Generator, b: &Generator) -> f64 {
    (a.rates() - b.rates()).abs().max()
}

/// Random subset of `0..n` of size `k`, sorted.
pub fn random_subset(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(r);
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

pub fn birth_death() -> RateFamily {
    let z = AsymptoticScalar::Zero;
    let a = AsymptoticScalar::exact(1, 1, -1, 1);
    let b = AsymptoticScalar::exact(1, 1, -2, 1);
    RateFamily::new(
        labels(3),
        vec![
            vec![z.clone(), a.clone(), z.clone()],
            vec![a, z.clone(), b.clone()],
            vec![z.clone(), b, z],
        ],
    )
    .unwrap()
}

pub fn two_state() -> RateFamily {
    let z = AsymptoticScalar::Zero;
    RateFamily::new(
        labels(2),
        vec![
            vec![z.clone(), AsymptoticScalar::exact(1, 1, -1, 1)],
            vec![AsymptoticScalar::exact(2, 1, -1, 1), z],
        ],
    )
    .unwrap()
}

/// `a <-> b` slow, `c` feeds both at order one and is entered slowly from `a`.
pub fn transient_family() -> RateFamily {
    let z = AsymptoticScalar::Zero;
    let slow = AsymptoticScalar::exact(1, 1, -1, 1);
    let one = AsymptoticScalar::one();
    RateFamily::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![
            vec![z.clone(), slow.clone(), slow.clone()],
            vec![slow, z.clone(), z.clone()],
            vec![one.clone(), one, z],
        ],
    )
    .unwrap()
}
