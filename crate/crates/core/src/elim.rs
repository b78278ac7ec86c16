//! Single-state elimination over any positive semiring.
//!
//! Removing state `z` replaces `R(x,y)` by `R(x,y) + R(x,z) R(z,y) / lambda(z)` for the
//! surviving states. Only sums, products and quotients of nonnegative numbers occur, so
//! the same code serves the numeric trace, the GTH stationary solver and the symbolic
//! computations on asymptotic scalars.

use crate::asymptotic::AsymptoticScalar;

pub(crate) trait Weight: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    /// Division by a nonzero weight.
    fn over(&self, other: &Self) -> Self;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn over(&self, other: &Self) -> Self {
        self / other
    }
}

impl Weight for AsymptoticScalar {
    fn zero() -> Self {
        AsymptoticScalar::Zero
    }
    fn one() -> Self {
        AsymptoticScalar::one()
    }
    fn is_zero(&self) -> bool {
        AsymptoticScalar::is_zero(self)
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn times(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn over(&self, other: &Self) -> Self {
        self.div(other).expect("nonzero divisor")
    }
}

/// Working matrix with a liveness mask; diagonal entries are never read.
pub(crate) struct Eliminator<W: Weight> {
    pub m: Vec<Vec<W>>,
    pub alive: Vec<bool>,
}

impl<W: Weight> Eliminator<W> {
    pub fn new(m: Vec<Vec<W>>) -> Self {
        let n = m.len();
        Self {
            m,
            alive: vec![true; n],
        }
    }

    /// Holding rate of `z` among the surviving states.
    pub fn holding(&self, z: usize) -> W {
        let mut s = W::zero();
        for (w, r) in self.m[z].iter().enumerate() {
            if w != z && self.alive[w] {
                s = s.plus(r);
            }
        }
        s
    }

    /// Eliminates `z`; returns `false` (and leaves the matrix unchanged) if `z` is absorbing.
    pub fn eliminate(&mut self, z: usize) -> bool {
        let lambda = self.holding(z);
        if lambda.is_zero() {
            return false;
        }
        self.alive[z] = false;
        let n = self.m.len();
        let row_z = self.m[z].clone();
        for x in 0..n {
            if !self.alive[x] || self.m[x][z].is_zero() {
                continue;
            }
            let f = self.m[x][z].over(&lambda);
            for y in 0..n {
                if y == x || !self.alive[y] || row_z[y].is_zero() {
                    continue;
                }
                let add = f.times(&row_z[y]);
                self.m[x][y] = self.m[x][y].plus(&add);
            }
        }
        true
    }

    /// Restriction of the working matrix to `keep`, with a zero diagonal.
    pub fn restricted(&self, keep: &[usize]) -> Vec<Vec<W>> {
        keep.iter()
            .map(|&x| {
                keep.iter()
                    .map(|&y| if x == y { W::zero() } else { self.m[x][y].clone() })
                    .collect()
            })
            .collect()
    }
}

/// Trace of `m` onto `keep`, eliminating the other states in `order`.
/// On failure returns the first state found absorbing at its elimination time.
pub(crate) fn trace_matrix<W: Weight>(
    m: Vec<Vec<W>>,
    keep: &[usize],
    order: &[usize],
) -> Result<Vec<Vec<W>>, usize> {
    let mut e = Eliminator::new(m);
    for &z in order {
        if !e.eliminate(z) {
            return Err(z);
        }
    }
    Ok(e.restricted(keep))
}

/// Unnormalized stationary weights by the Grassmann-Taksar-Heyman scheme.
/// Requires an irreducible matrix; on failure returns the absorbing state met.
pub(crate) fn gth<W: Weight>(m: Vec<Vec<W>>) -> Result<Vec<W>, usize> {
    let n = m.len();
    let mut e = Eliminator::new(m);
    let mut hold = vec![W::zero(); n];
    for k in (1..n).rev() {
        hold[k] = e.holding(k);
        if !e.eliminate(k) {
            return Err(k);
        }
    }
    let mut pi = vec![W::zero(); n];
    if n == 0 {
        return Ok(pi);
    }
    pi[0] = W::one();
    for k in 1..n {
        let mut s = W::zero();
        for i in 0..k {
            if !e.m[i][k].is_zero() {
                s = s.plus(&pi[i].times(&e.m[i][k]));
            }
        }
        pi[k] = s.over(&hold[k]);
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_gth() {
        let m = vec![vec![0.0, 3.0], vec![1.0, 0.0]];
        let pi = gth(m).unwrap();
        assert!((pi[1] / pi[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn absorbing_state_fails() {
        let m = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        assert_eq!(trace_matrix(m, &[0, 2], &[1]), Err(1));
    }
}
