//! Level-2 rate functional `I(mu) = sup_H J_H(mu)` of a finite generator.
//!
//! On an irreducible chain with a fully supported measure the supremum is attained
//! and found by damped Newton ascent. Any other case is reduced to that one by
//! splitting the support into the classes of the reflected chain and adding the
//! flows that leave the support or cross between classes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ctmc::{classify_edges, classify_states, Generator, ProbabilityMeasure, SUPPORT_THRESHOLD};
use crate::error::{Error, Result};
use crate::operators::TiltPotential;

pub const MAX_ITERATIONS: usize = 10_000;
pub const EL_TOLERANCE: f64 = 1e-10;
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
/// Largest change of any edge difference `H(y) - H(x)` accepted in one line-search step.
pub const STEP_GUARD: f64 = 40.0;

/// `J_H(mu) = -sum_{x,y} mu(x) R(x,y) (exp(H(y) - H(x)) - 1)`.
pub fn j_functional(gen: &Generator, h: &TiltPotential, mu: &ProbabilityMeasure) -> f64 {
    let hv = h.values();
    let n = gen.n_states();
    let mut s = 0.0;
    for x in 0..n {
        if mu.get(x) == 0.0 {
            continue;
        }
        for y in 0..n {
            let r = gen.rate(x, y);
            if r > 0.0 {
                s -= mu.get(x) * r * (hv[y] - hv[x]).exp_m1();
            }
        }
    }
    s
}

/// Value at a maximizer written as `sum mu R {d e^d - e^d + 1}` with `d = H(y) - H(x)`.
pub fn value_at_optimizer(gen: &Generator, h: &TiltPotential, mu: &ProbabilityMeasure) -> f64 {
    let hv = h.values();
    let n = gen.n_states();
    let mut s = 0.0;
    for x in 0..n {
        for y in 0..n {
            let r = gen.rate(x, y);
            if r > 0.0 && mu.get(x) > 0.0 {
                let d = hv[y] - hv[x];
                s += mu.get(x) * r * (d * d.exp() - d.exp_m1());
            }
        }
    }
    s
}

/// Euler-Lagrange defect `max_z |mu(z) lambda_H(z) - sum_x mu(x) R_H(x,z)|`.
pub fn el_residual(gen: &Generator, h: &TiltPotential, mu: &ProbabilityMeasure) -> f64 {
    let hv = h.values();
    let n = gen.n_states();
    let mut g = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            let r = gen.rate(x, y);
            if r > 0.0 {
                let f = mu.get(x) * r * (hv[y] - hv[x]).exp();
                g[x] += f;
                g[y] -= f;
            }
        }
    }
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The a-priori bound on `max |H(y) - H(x)|` for the maximizer.
pub fn oscillation_bound(gen: &Generator, mu: &ProbabilityMeasure) -> f64 {
    let n = gen.n_states();
    let mut total = 0.0;
    let mut min_flow = f64::INFINITY;
    for x in 0..n {
        for y in 0..n {
            let f = mu.get(x) * gen.rate(x, y);
            if gen.rate(x, y) > 0.0 {
                total += f;
                min_flow = min_flow.min(f);
            }
        }
    }
    n as f64 * ((1.0 + total) / min_flow).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    IrreducibleDirect,
    KDecomposition,
    DegenerateRestriction,
}

/// One summand of the decomposition of `I(mu)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateTerm {
    /// `mu(D) I_D(mu | D)` for a class `D` of the chain reflected at the support.
    Class {
        states: Vec<usize>,
        mass: f64,
        value: f64,
    },
    /// Flow from the support to states of positive holding rate outside it.
    Escape { value: f64 },
    /// Flow between distinct classes inside the support.
    InterClass { value: f64 },
    /// Flow into states with zero holding rate that carry no mass.
    Absorbing { value: f64 },
}

impl RateTerm {
    pub fn value(&self) -> f64 {
        match self {
            RateTerm::Class { value, .. }
            | RateTerm::Escape { value }
            | RateTerm::InterClass { value }
            | RateTerm::Absorbing { value } => *value,
        }
    }
}

/// A maximizing potential on one class, indexed by the class members.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassOptimizer {
    pub states: Vec<usize>,
    pub potential: TiltPotential,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub value: f64,
    pub optimizer: Vec<ClassOptimizer>,
    pub el_residual: f64,
    /// `|J_H(mu) - value_at_optimizer|` summed over classes.
    pub identity_gap: f64,
    pub decomposition: Vec<RateTerm>,
    pub method: RateMethod,
    pub iterations: usize,
}

/// Flows `mu(x) R(x,y)` over the edges of an irreducible chain, rates divided by `scale`.
struct Problem {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    total: f64,
}

impl Problem {
    fn new(gen: &Generator, mu: &ProbabilityMeasure, scale: f64) -> Self {
        let n = gen.n_states();
        let mut edges = Vec::new();
        for x in 0..n {
            for y in 0..n {
                let r = gen.rate(x, y);
                if r > 0.0 {
                    edges.push((x, y, mu.get(x) * r / scale));
                }
            }
        }
        let total = edges.iter().map(|e| e.2).sum();
        Self { n, edges, total }
    }

    fn value(&self, h: &[f64]) -> f64 {
        -self
            .edges
            .iter()
            .map(|&(x, y, w)| w * (h[y] - h[x]).exp_m1())
            .sum::<f64>()
    }

    /// Gradient and the reduced negative Hessian (gauge coordinate 0 removed).
    fn derivatives(&self, h: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut g = vec![0.0; n];
        let mut lap = DMatrix::zeros(n, n);
        for &(x, y, w) in &self.edges {
            let f = w * (h[y] - h[x]).exp();
            g[x] += f;
            g[y] -= f;
            lap[(x, x)] += f;
            lap[(y, y)] += f;
            lap[(x, y)] -= f;
            lap[(y, x)] -= f;
        }
        let reduced = lap.view((1, 1), (n - 1, n - 1)).into_owned();
        (g, reduced)
    }

    fn residual(&self, h: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n];
        for &(x, y, w) in &self.edges {
            let f = w * (h[y] - h[x]).exp();
            g[x] += f;
            g[y] -= f;
        }
        g.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    fn max_edge_change(&self, d: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(x, y, _)| (d[y] - d[x]).abs())
            .fold(0.0, f64::max)
    }
}

struct NewtonResult {
    h: Vec<f64>,
    iterations: usize,
}

fn newton(p: &Problem, start: Vec<f64>) -> Result<NewtonResult> {
    let n = p.n;
    let scale = p.total + 1.0;
    let mut h = start;
    let shift = h[0];
    h.iter_mut().for_each(|v| *v -= shift);
    let mut j = p.value(&h);
    for it in 0..MAX_ITERATIONS {
        let (g, neg_hess) = p.derivatives(&h);
        let residual = g.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if residual <= 1e-15 * scale {
            return Ok(NewtonResult { h, iterations: it });
        }
        let gr = DVector::from_iterator(n - 1, g[1..].iter().copied());
        let dr = match neg_hess.clone().cholesky() {
            Some(c) => c.solve(&gr),
            None => gr.clone(),
        };
        let decrement = gr.dot(&dr);
        if decrement <= 1e-30 * scale {
            return finish(h, it, residual, scale, j);
        }
        let mut d = vec![0.0; n];
        d[1..].copy_from_slice(dr.as_slice());
        // Below this band changes of J are rounding noise; the residual decides instead.
        let band = 1e-14 * (j.abs() + p.total);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            if p.max_edge_change(&d) * t <= STEP_GUARD {
                let trial: Vec<f64> = h.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if trial == h {
                    break;
                }
                let jt = p.value(&trial);
                let ascent = jt >= j + 1e-4 * t * decrement;
                let flat = jt >= j - band && p.residual(&trial) < residual;
                if jt.is_finite() && (ascent || flat) {
                    h = trial;
                    j = jt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return finish(h, it, residual, scale, j);
        }
    }
    let (g, _) = p.derivatives(&h);
    let residual = g.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    finish(h, MAX_ITERATIONS, residual, scale, j)
}

fn finish(h: Vec<f64>, iterations: usize, residual: f64, scale: f64, j: f64) -> Result<NewtonResult> {
    if residual <= EL_TOLERANCE * scale {
        Ok(NewtonResult { h, iterations })
    } else {
        Err(Error::NoConvergence {
            iterations,
            value: j,
            residual,
        })
    }
}

/// `I(mu)` for an irreducible generator and a measure charging every state.
pub fn rate_irreducible(gen: &Generator, mu: &ProbabilityMeasure) -> Result<RateReport> {
    rate_irreducible_from(gen, mu, &TiltPotential::zero(gen.n_states()))
}

/// As [`rate_irreducible`], starting the ascent from `start`.
pub fn rate_irreducible_from(
    gen: &Generator,
    mu: &ProbabilityMeasure,
    start: &TiltPotential,
) -> Result<RateReport> {
    let n = gen.n_states();
    if mu.len() != n || start.len() != n {
        return Err(Error::InvalidArgument(format!(
            "measure or start potential does not match {n} states"
        )));
    }
    let dec = classify_states(gen);
    if !dec.is_irreducible() {
        return Err(Error::NotIrreducible {
            classes: dec.n_classes(),
        });
    }
    if let Some(x) = (0..n).find(|&x| mu.get(x) <= SUPPORT_THRESHOLD) {
        return Err(Error::NotFullSupport {
            state: gen.label(x).to_string(),
            weight: mu.get(x),
        });
    }
    let (h, iterations) = if n == 1 {
        (vec![0.0], 0)
    } else {
        let scale = gen.max_rate();
        let p = Problem::new(gen, mu, scale);
        let r = newton(&p, start.values().to_vec()).map_err(|e| match e {
            Error::NoConvergence {
                iterations,
                value,
                residual,
            } => Error::NoConvergence {
                iterations,
                value: value * scale,
                residual: residual * scale,
            },
            other => other,
        })?;
        (r.h, r.iterations)
    };
    let pot = TiltPotential::new(h, 0)?;
    let value = j_functional(gen, &pot, mu).max(0.0);
    let gap = (value - value_at_optimizer(gen, &pot, mu)).abs();
    let residual = el_residual(gen, &pot, mu);
    Ok(RateReport {
        value,
        optimizer: vec![ClassOptimizer {
            states: (0..n).collect(),
            potential: pot,
        }],
        el_residual: residual,
        identity_gap: gap,
        decomposition: vec![RateTerm::Class {
            states: (0..n).collect(),
            mass: 1.0,
            value,
        }],
        method: RateMethod::IrreducibleDirect,
        iterations,
    })
}

/// `I(mu)` for any generator and any measure.
pub fn rate(gen: &Generator, mu: &ProbabilityMeasure) -> Result<RateReport> {
    let n = gen.n_states();
    if mu.len() != n {
        return Err(Error::InvalidArgument(format!(
            "measure has {} weights for {n} states",
            mu.len()
        )));
    }
    let active: Vec<bool> = gen.holding().iter().map(|&l| l > 0.0).collect();
    let support: Vec<usize> = mu.support();
    let degenerate = active.iter().any(|a| !a);
    if !degenerate && support.len() == n && classify_states(gen).is_irreducible() {
        return rate_irreducible(gen, mu);
    }
    let in_support = {
        let mut v = vec![false; n];
        support.iter().for_each(|&x| v[x] = true);
        v
    };

    let mut absorbing = 0.0;
    let mut escape = 0.0;
    for &x in &support {
        for y in 0..n {
            let f = mu.get(x) * gen.rate(x, y);
            if f == 0.0 || in_support[y] {
                continue;
            }
            if active[y] {
                escape += f;
            } else {
                absorbing += f;
            }
        }
    }

    let reflected = gen.restrict(&support);
    let dec = classify_edges(support.len(), |i, j| reflected.has_edge(i, j));
    let mut inter = 0.0;
    for (i, &x) in support.iter().enumerate() {
        for (j, &y) in support.iter().enumerate() {
            if i != j && dec.class_of(i) != dec.class_of(j) {
                inter += mu.get(x) * gen.rate(x, y);
            }
        }
    }

    let mut terms = Vec::new();
    let mut optimizer = Vec::new();
    let mut residual: f64 = 0.0;
    let mut gap = 0.0;
    let mut iterations = 0;
    let mut value = 0.0;
    for class in &dec.classes {
        let states: Vec<usize> = class.iter().map(|&i| support[i]).collect();
        let mass = mu.mass(&states);
        let class_value = if states.len() >= 2 {
            let sub = gen.restrict(&states);
            let cond = mu.conditioned(&states)?;
            let r = rate_irreducible(&sub, &cond)?;
            residual = residual.max(mass * r.el_residual);
            gap += mass * r.identity_gap;
            iterations += r.iterations;
            optimizer.push(ClassOptimizer {
                states: states.clone(),
                potential: r.optimizer[0].potential.clone(),
            });
            mass * r.value
        } else {
            0.0
        };
        value += class_value;
        terms.push(RateTerm::Class {
            states,
            mass,
            value: class_value,
        });
    }
    terms.push(RateTerm::Escape { value: escape });
    terms.push(RateTerm::InterClass { value: inter });
    if degenerate {
        terms.push(RateTerm::Absorbing { value: absorbing });
    }
    value += escape + inter + absorbing;
    Ok(RateReport {
        value,
        optimizer,
        el_residual: residual,
        identity_gap: gap,
        decomposition: terms,
        method: if degenerate {
            RateMethod::DegenerateRestriction
        } else {
            RateMethod::KDecomposition
        },
        iterations,
    })
}
