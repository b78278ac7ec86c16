//! Reflection, tilting, trace and harmonic extension of generators.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ctmc::{entrance_law, Generator};
use crate::elim::trace_matrix;
use crate::error::{Error, Result};
use crate::graph::reachability;

/// Additive potential `H`, pinned to zero at `gauge_state`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiltPotential {
    values: Vec<f64>,
    gauge_state: usize,
}

impl TiltPotential {
    /// Shifts `values` so that the gauge state carries zero.
    pub fn new(values: Vec<f64>, gauge_state: usize) -> Result<Self> {
        if gauge_state >= values.len() {
            return Err(Error::InvalidArgument(format!(
                "gauge state {gauge_state} outside a potential on {} states",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("potential value {v} is not finite")));
        }
        let shift = values[gauge_state];
        Ok(Self {
            values: values.into_iter().map(|v| v - shift).collect(),
            gauge_state,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            gauge_state: 0,
        }
    }

    /// `H = ln v` for a positive function `v`.
    pub fn from_multiplicative(v: &[f64]) -> Result<Self> {
        if let Some(x) = v.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::InvalidArgument(format!("multiplicative tilt {x} is not positive")));
        }
        Self::new(v.iter().map(|x| x.ln()).collect(), 0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gauge_state(&self) -> usize {
        self.gauge_state
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_{x,y} |H(y) - H(x)|`.
    pub fn oscillation(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Sorted, deduplicated, range-checked copy of a subset.
pub(crate) fn normalize_subset(gen: &Generator, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&x) = s.iter().find(|&&x| x >= gen.n_states()) {
        return Err(Error::UnknownState(x.to_string()));
    }
    Ok(s)
}

/// Chain restricted to `subset`: every edge leaving it is dropped.
pub fn reflect(gen: &Generator, subset: &[usize]) -> Result<Generator> {
    let s = normalize_subset(gen, subset)?;
    Ok(gen.restrict(&s))
}

/// Rates `R(x,y) exp(H(y) - H(x))`.
pub fn tilt(gen: &Generator, h: &TiltPotential) -> Result<Generator> {
    let n = gen.n_states();
    if h.len() != n {
        return Err(Error::InvalidArgument(format!(
            "potential has {} values for {n} states",
            h.len()
        )));
    }
    let hv = h.values();
    let rates = DMatrix::from_fn(n, n, |x, y| {
        let r = gen.rate(x, y);
        if r == 0.0 {
            0.0
        } else {
            r * (hv[y] - hv[x]).exp()
        }
    });
    Generator::new(gen.labels().to_vec(), rates)
}

/// Trace on `subset`, eliminating the other states in descending index order.
pub fn trace(gen: &Generator, subset: &[usize]) -> Result<Generator> {
    let s = normalize_subset(gen, subset)?;
    let order: Vec<usize> = (0..gen.n_states()).rev().filter(|z| !s.contains(z)).collect();
    trace_in_order(gen, &s, &order)
}

/// Trace on `subset` with an explicit elimination order of the complement.
pub fn trace_with_order(gen: &Generator, subset: &[usize], order: &[usize]) -> Result<Generator> {
    let s = normalize_subset(gen, subset)?;
    let mut expected: Vec<usize> = (0..gen.n_states()).filter(|z| !s.contains(z)).collect();
    let mut given = order.to_vec();
    given.sort_unstable();
    expected.sort_unstable();
    if given != expected {
        return Err(Error::InvalidArgument(
            "elimination order must list every state outside the subset once".into(),
        ));
    }
    trace_in_order(gen, &s, order)
}

fn trace_in_order(gen: &Generator, keep: &[usize], order: &[usize]) -> Result<Generator> {
    let m = trace_matrix(gen.rows(), keep, order).map_err(|z| Error::AbsorbedOutside {
        state: gen.label(z).to_string(),
    })?;
    let labels = keep.iter().map(|&x| gen.label(x).to_string()).collect();
    Generator::with_labels(labels, &m)
}

/// `v(x) = E_x[u(X at the hitting time of subset)]`, with `u` listed in the sorted order of `subset`.
pub fn harmonic_extension(gen: &Generator, subset: &[usize], u: &[f64]) -> Result<Vec<f64>> {
    let s = normalize_subset(gen, subset)?;
    if s.len() != subset.len() || s.as_slice() != subset {
        return Err(Error::InvalidArgument(
            "boundary set must be sorted and free of duplicates".into(),
        ));
    }
    if u.len() != s.len() {
        return Err(Error::InvalidArgument(format!(
            "boundary function has {} values for {} states",
            u.len(),
            s.len()
        )));
    }
    if let Some(v) = u.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("boundary value {v} is not positive")));
    }
    let n = gen.n_states();
    let reach = reachability(n, |a, b| gen.has_edge(a, b));
    if let Some(x) = (0..n).find(|&x| !s.contains(&x) && !s.iter().any(|&a| reach[x][a])) {
        return Err(Error::UnreachableBoundary {
            state: gen.label(x).to_string(),
        });
    }
    let mut v = vec![0.0; n];
    for (i, &a) in s.iter().enumerate() {
        v[a] = u[i];
    }
    for x in (0..n).filter(|x| !s.contains(x)) {
        let law = entrance_law(gen, x, &s).ok_or_else(|| Error::UnreachableBoundary {
            state: gen.label(x).to_string(),
        })?;
        v[x] = law.iter().zip(u).map(|(p, ua)| p * ua).sum();
    }
    Ok(v)
}
