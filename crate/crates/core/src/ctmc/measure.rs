use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights below this are treated as zero in support decisions.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Tolerated deviation of the total mass from one for caller-supplied weights.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability distribution on the states `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityMeasure {
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    /// Validates nonnegativity and total mass (within `MASS_TOLERANCE`), then renormalizes.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidMeasure(format!(
                "weight {w} at position {i} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Normalizes arbitrary nonnegative weights with positive total mass.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} cannot be normalized"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(n: usize, x: usize) -> Self {
        let mut w = vec![0.0; n];
        w[x] = 1.0;
        Self { weights: w }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn get(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.weights[x]).sum()
    }

    /// States carrying weight above `SUPPORT_THRESHOLD`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&x| self.weights[x] > SUPPORT_THRESHOLD)
            .collect()
    }

    /// The measure conditioned to `set` and expressed on `set`'s own indices.
    pub fn conditioned(&self, set: &[usize]) -> Result<Self> {
        Self::from_unnormalized(set.iter().map(|&x| self.weights[x]).collect())
    }

    /// Places a measure on `set` into a space of `n` states, zero elsewhere.
    pub fn embed(&self, n: usize, set: &[usize]) -> Self {
        let mut w = vec![0.0; n];
        for (i, &x) in set.iter().enumerate() {
            w[x] = self.weights[i];
        }
        Self { weights: w }
    }

    /// Convex combination `sum_i c_i * m_i` of measures on the same space.
    pub fn mixture(parts: &[(f64, &ProbabilityMeasure)]) -> Result<Self> {
        let n = parts
            .first()
            .map(|(_, m)| m.len())
            .ok_or_else(|| Error::InvalidMeasure("empty mixture".into()))?;
        let mut w = vec![0.0; n];
        for (c, m) in parts {
            if m.len() != n {
                return Err(Error::InvalidMeasure("mixture of different sizes".into()));
            }
            for (wi, mi) in w.iter_mut().zip(m.weights()) {
                *wi += c * mi;
            }
        }
        Self::from_unnormalized(w)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}
