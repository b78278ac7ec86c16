use serde::Serialize;

use super::generator::Generator;
use crate::graph::communicating_classes;

/// Communicating classes of the positive-rate digraph, ordered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassDecomposition {
    pub classes: Vec<Vec<usize>>,
    pub closed_flags: Vec<bool>,
    pub transient_states: Vec<usize>,
}

impl ClassDecomposition {
    pub fn closed_classes(&self) -> Vec<&Vec<usize>> {
        self.classes
            .iter()
            .zip(&self.closed_flags)
            .filter(|(_, &c)| c)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1
    }

    /// Index of the class containing `x`.
    pub fn class_of(&self, x: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.contains(&x))
            .expect("classes partition the state set")
    }
}

pub fn classify_states(gen: &Generator) -> ClassDecomposition {
    classify_edges(gen.n_states(), |x, y| gen.has_edge(x, y))
}

pub(crate) fn classify_edges(n: usize, edge: impl Fn(usize, usize) -> bool) -> ClassDecomposition {
    let raw = communicating_classes(n, edge);
    let mut transient: Vec<usize> = raw
        .iter()
        .filter(|(_, closed)| !closed)
        .flat_map(|(c, _)| c.iter().copied())
        .collect();
    transient.sort_unstable();
    let (classes, closed_flags) = raw.into_iter().unzip();
    ClassDecomposition {
        classes,
        closed_flags,
        transient_states: transient,
    }
}
