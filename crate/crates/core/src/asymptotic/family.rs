//! Chains whose rates are one-term asymptotic scalars `c * exp(k * beta)`, `k <= 0`.

use nalgebra::DMatrix;
use num_traits::Zero;

use super::scalar::{sum, AsymptoticScalar, Coeff, Exponent};
use crate::ctmc::{classify_edges, ChainSpec, Edge, Generator, RateExpr};
use crate::elim::{gth, trace_matrix};
use crate::error::{Error, Result};

/// Largest state space accepted by the arborescence enumeration.
pub const ARBORESCENCE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct RateFamily {
    labels: Vec<String>,
    rates: Vec<Vec<AsymptoticScalar>>,
}

impl RateFamily {
    /// Numeric edges are read as exponent-zero terms; positive exponents are rejected.
    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        let n = spec.n_states();
        let mut rates = vec![vec![AsymptoticScalar::Zero; n]; n];
        for e in spec.edges() {
            let s = match &e.rate {
                RateExpr::Numeric(v) if *v == 0.0 => continue,
                RateExpr::Numeric(v) => AsymptoticScalar::new(Coeff::from_f64(*v), Exponent::zero())?,
                RateExpr::Symbolic(s) => s.clone(),
            };
            rates[e.from][e.to] = s;
        }
        Self::new(spec.states().to_vec(), rates)
    }

    pub fn new(labels: Vec<String>, mut rates: Vec<Vec<AsymptoticScalar>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptySubset);
        }
        if rates.len() != n || rates.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("rate table is not square".into()));
        }
        for (x, row) in rates.iter_mut().enumerate() {
            row[x] = AsymptoticScalar::Zero;
            for (y, r) in row.iter().enumerate() {
                if let Some(k) = r.exp() {
                    if k > Exponent::zero() {
                        return Err(Error::InvalidSpec(format!(
                            "edge {} -> {} has positive exponent {}; rates must stay bounded",
                            labels[x],
                            labels[y],
                            super::scalar::format_exponent(&k)
                        )));
                    }
                }
            }
        }
        Ok(Self { labels, rates })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn rate(&self, x: usize, y: usize) -> &AsymptoticScalar {
        &self.rates[x][y]
    }

    pub fn rates(&self) -> &[Vec<AsymptoticScalar>] {
        &self.rates
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        x != y && !self.rates[x][y].is_zero()
    }

    pub fn holding(&self, x: usize) -> AsymptoticScalar {
        sum(self.rates[x].iter())
    }

    /// Whether some edge has exponent zero, i.e. survives in the limit chain.
    pub fn has_order_one_edge(&self) -> bool {
        self.rates
            .iter()
            .flatten()
            .any(|r| r.exp() == Some(Exponent::zero()))
    }

    pub fn is_irreducible(&self) -> bool {
        classify_edges(self.n_states(), |x, y| self.has_edge(x, y)).is_irreducible()
    }

    /// Numeric generator at `beta`.
    pub fn evaluate(&self, beta: f64) -> Result<Generator> {
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                m[(x, y)] = self.rates[x][y].eval(beta).map_err(|_| Error::Overflow {
                    from: self.labels[x].clone(),
                    to: self.labels[y].clone(),
                    beta,
                })?;
            }
        }
        Generator::new(self.labels.clone(), m)
    }

    /// The limit `beta -> infinity`: coefficients of the exponent-zero edges.
    pub fn limit_generator(&self) -> Generator {
        let n = self.n_states();
        let m = DMatrix::from_fn(n, n, |x, y| match &self.rates[x][y] {
            AsymptoticScalar::Term { coeff, exp } if exp.is_zero() => coeff.to_f64(),
            _ => 0.0,
        });
        Generator::new(self.labels.clone(), m).expect("limit rates are valid")
    }

    /// Family restricted to `subset` (sorted), edges leaving it dropped.
    pub fn reflect(&self, subset: &[usize]) -> RateFamily {
        let labels = subset.iter().map(|&x| self.labels[x].clone()).collect();
        let rates = subset
            .iter()
            .map(|&x| subset.iter().map(|&y| self.rates[x][y].clone()).collect())
            .collect();
        RateFamily { labels, rates }
    }

    /// Symbolic trace on `subset`, eliminating the complement in descending index order.
    pub fn symbolic_trace(&self, subset: &[usize]) -> Result<RateFamily> {
        let keep = self.normalize(subset)?;
        let order: Vec<usize> = (0..self.n_states())
            .rev()
            .filter(|z| !keep.contains(z))
            .collect();
        self.trace_in_order(&keep, &order)
    }

    /// Symbolic trace with an explicit elimination order of the complement.
    pub fn symbolic_trace_with_order(&self, subset: &[usize], order: &[usize]) -> Result<RateFamily> {
        let keep = self.normalize(subset)?;
        let mut given = order.to_vec();
        given.sort_unstable();
        let expected: Vec<usize> = (0..self.n_states()).filter(|z| !keep.contains(z)).collect();
        if given != expected {
            return Err(Error::InvalidArgument(
                "elimination order must list every state outside the subset once".into(),
            ));
        }
        self.trace_in_order(&keep, order)
    }

    fn trace_in_order(&self, keep: &[usize], order: &[usize]) -> Result<RateFamily> {
        let m = trace_matrix(self.rates.clone(), keep, order).map_err(|z| {
            Error::AbsorbedOutside {
                state: self.labels[z].clone(),
            }
        })?;
        Ok(RateFamily {
            labels: keep.iter().map(|&x| self.labels[x].clone()).collect(),
            rates: m,
        })
    }

    fn normalize(&self, subset: &[usize]) -> Result<Vec<usize>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut s = subset.to_vec();
        s.sort_unstable();
        s.dedup();
        if let Some(&x) = s.iter().find(|&&x| x >= self.n_states()) {
            return Err(Error::UnknownState(x.to_string()));
        }
        Ok(s)
    }

    /// Leading term of the stationary distribution, normalized so the largest exponent is zero.
    pub fn symbolic_stationary(&self) -> Result<Vec<AsymptoticScalar>> {
        let dec = classify_edges(self.n_states(), |x, y| self.has_edge(x, y));
        if !dec.is_irreducible() {
            return Err(Error::NotIrreducible {
                classes: dec.n_classes(),
            });
        }
        let w = gth(self.rates.clone()).map_err(|_| Error::NotIrreducible {
            classes: dec.n_classes(),
        })?;
        normalize_weights(w)
    }

    /// Same quantity by enumerating spanning arborescences (matrix-tree theorem).
    ///
    /// Each state's weight is the sum, over arborescences directed towards it, of the
    /// product of their edge rates. Only the leading exponent survives, so partial
    /// assignments whose best completion falls below the current leader are pruned.
    pub fn arborescence_stationary(&self) -> Result<Vec<AsymptoticScalar>> {
        let n = self.n_states();
        if n > ARBORESCENCE_CAP {
            return Err(Error::TooLarge {
                size: n,
                cap: ARBORESCENCE_CAP,
            });
        }
        let dec = classify_edges(n, |x, y| self.has_edge(x, y));
        if !dec.is_irreducible() {
            return Err(Error::NotIrreducible {
                classes: dec.n_classes(),
            });
        }
        let w = (0..n).map(|root| self.arborescence_weight(root)).collect();
        normalize_weights(w)
    }

    fn arborescence_weight(&self, root: usize) -> AsymptoticScalar {
        let n = self.n_states();
        let others: Vec<usize> = (0..n).filter(|&x| x != root).collect();
        let best_out: Vec<Exponent> = others
            .iter()
            .map(|&x| {
                (0..n)
                    .filter_map(|y| self.rates[x][y].exp())
                    .max()
                    .expect("irreducible chains have an outgoing edge everywhere")
            })
            .collect();
        // suffix[i] = sum of best exponents of others[i..]
        let mut suffix = vec![Exponent::zero(); others.len() + 1];
        for i in (0..others.len()).rev() {
            suffix[i] = suffix[i + 1] + best_out[i];
        }
        let mut search = Search {
            fam: self,
            root,
            others: &others,
            suffix: &suffix,
            parent: vec![usize::MAX; n],
            best: AsymptoticScalar::Zero,
        };
        search.go(0, AsymptoticScalar::one());
        search.best
    }

    /// Back to a chain spec with symbolic edges.
    pub fn to_spec(&self) -> ChainSpec {
        let n = self.n_states();
        let mut edges = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if self.has_edge(x, y) {
                    edges.push(Edge {
                        from: x,
                        to: y,
                        rate: RateExpr::Symbolic(self.rates[x][y].clone()),
                    });
                }
            }
        }
        ChainSpec::new(self.labels.clone(), edges).expect("family edges form a valid spec")
    }
}

struct Search<'a> {
    fam: &'a RateFamily,
    root: usize,
    others: &'a [usize],
    suffix: &'a [Exponent],
    parent: Vec<usize>,
    best: AsymptoticScalar,
}

impl Search<'_> {
    fn go(&mut self, i: usize, acc: AsymptoticScalar) {
        if let (Some(a), Some(b)) = (acc.exp(), self.best.exp()) {
            if a + self.suffix[i] < b {
                return;
            }
        }
        if i == self.others.len() {
            self.best = self.best.add(&acc);
            return;
        }
        let x = self.others[i];
        let n = self.fam.n_states();
        for y in 0..n {
            if !self.fam.has_edge(x, y) || self.closes_cycle(x, y) {
                continue;
            }
            self.parent[x] = y;
            let next = acc.mul(self.fam.rate(x, y));
            self.go(i + 1, next);
            self.parent[x] = usize::MAX;
        }
    }

    /// Whether adding `x -> y` to the partial forest creates a cycle.
    fn closes_cycle(&self, x: usize, y: usize) -> bool {
        let mut v = y;
        let mut steps = 0;
        while v != self.root && self.parent[v] != usize::MAX {
            if v == x {
                return true;
            }
            v = self.parent[v];
            steps += 1;
            if steps > self.parent.len() {
                return true;
            }
        }
        v == x
    }
}

fn normalize_weights(w: Vec<AsymptoticScalar>) -> Result<Vec<AsymptoticScalar>> {
    let total = sum(w.iter());
    w.iter().map(|x| x.div(&total)).collect()
}

/// Mean jump rates between the blocks of `partition` for the trace on `kept`.
///
/// `pi` is the stationary leading term of the full family, `traced` the trace on the
/// sorted state list `kept`, and the blocks list global state indices.
pub fn mean_interclass_rates(
    pi: &[AsymptoticScalar],
    traced: &RateFamily,
    kept: &[usize],
    partition: &[Vec<usize>],
) -> Result<Vec<Vec<AsymptoticScalar>>> {
    let pos = |x: usize| kept.iter().position(|&k| k == x);
    let mut covered: Vec<usize> = partition.iter().flatten().copied().collect();
    covered.sort_unstable();
    if covered != kept {
        return Err(Error::InvalidArgument(
            "partition does not cover the traced state set exactly".into(),
        ));
    }
    let m = partition.len();
    let mut out = vec![vec![AsymptoticScalar::Zero; m]; m];
    for i in 0..m {
        let mass = sum(partition[i].iter().map(|&x| &pi[x]));
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut flow = AsymptoticScalar::Zero;
            for &x in &partition[i] {
                let px = pos(x).expect("covered");
                let out_rate = sum(partition[j].iter().map(|&y| traced.rate(px, pos(y).expect("covered"))));
                flow = flow.add(&pi[x].mul(&out_rate));
            }
            out[i][j] = flow.div(&mass)?;
        }
    }
    Ok(out)
}
