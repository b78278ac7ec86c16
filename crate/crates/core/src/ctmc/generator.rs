use nalgebra::DMatrix;

use super::spec::{ChainSpec, RateExpr};
use crate::error::{Error, Result};

/// Numeric jump rates `R(x,y)` on labelled states, with cached holding rates.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    labels: Vec<String>,
    rates: DMatrix<f64>,
    holding: Vec<f64>,
}

impl Generator {
    /// Validates a square, nonnegative, finite rate matrix; the diagonal is ignored and zeroed.
    pub fn new(labels: Vec<String>, mut rates: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptySubset);
        }
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "rate matrix is {}x{} for {n} states",
                rates.nrows(),
                rates.ncols()
            )));
        }
        for x in 0..n {
            rates[(x, x)] = 0.0;
            for y in 0..n {
                let r = rates[(x, y)];
                if !r.is_finite() || r < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "rate {} -> {} is {r}",
                        labels[x], labels[y]
                    )));
                }
            }
        }
        let holding = (0..n).map(|x| rates.row(x).sum()).collect();
        Ok(Self {
            labels,
            rates,
            holding,
        })
    }

    /// Generator with labels `0..n` from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::new(labels, DMatrix::from_fn(n, n, |x, y| rows[x][y]))
    }

    pub fn with_labels(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, DMatrix::from_fn(n, n, |x, y| rows[x][y]))
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    pub fn holding(&self) -> &[f64] {
        &self.holding
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.max()
    }

    /// `p(x,y) = R(x,y) / lambda(x)`; rows of absorbing states are zero.
    pub fn jump_probs(&self) -> DMatrix<f64> {
        let n = self.n_states();
        DMatrix::from_fn(n, n, |x, y| {
            if self.holding[x] > 0.0 {
                self.rates[(x, y)] / self.holding[x]
            } else {
                0.0
            }
        })
    }

    /// Generator matrix `Q = R - diag(lambda)`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let mut q = self.rates.clone();
        for x in 0..self.n_states() {
            q[(x, x)] = -self.holding[x];
        }
        q
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states())
            .map(|x| (0..self.n_states()).map(|y| self.rates[(x, y)]).collect())
            .collect()
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        x != y && self.rates[(x, y)] > 0.0
    }

    /// `max_x |(mu^T Q)(x)|`: the stationarity defect of a weight vector.
    pub fn stationarity_defect(&self, mu: &[f64]) -> f64 {
        let n = self.n_states();
        (0..n)
            .map(|x| {
                let inflow: f64 = (0..n).map(|y| mu[y] * self.rates[(y, x)]).sum();
                (inflow - mu[x] * self.holding[x]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Same rates restricted to `subset` (order preserved), edges leaving it dropped.
    pub(crate) fn restrict(&self, subset: &[usize]) -> Generator {
        let k = subset.len();
        let labels = subset.iter().map(|&x| self.labels[x].clone()).collect();
        let rates = DMatrix::from_fn(k, k, |i, j| self.rates[(subset[i], subset[j])]);
        Generator::new(labels, rates).expect("restriction of a valid generator")
    }
}

/// Evaluates a chain spec at `beta`, or passes numeric rates through when no edge is symbolic.
pub fn build_generator(spec: &ChainSpec, beta: Option<f64>) -> Result<Generator> {
    if let Some(b) = beta {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be finite and nonnegative, got {b}")));
        }
    }
    let n = spec.n_states();
    let mut rates = DMatrix::zeros(n, n);
    for e in spec.edges() {
        let (from, to) = (&spec.states()[e.from], &spec.states()[e.to]);
        let r = match &e.rate {
            RateExpr::Numeric(v) => *v,
            RateExpr::Symbolic(s) => {
                let b = beta.ok_or_else(|| Error::MissingBeta {
                    from: from.clone(),
                    to: to.clone(),
                })?;
                s.eval(b).map_err(|_| Error::Overflow {
                    from: from.clone(),
                    to: to.clone(),
                    beta: b,
                })?
            }
        };
        rates[(e.from, e.to)] = r;
    }
    Generator::new(spec.states().to_vec(), rates)
}
