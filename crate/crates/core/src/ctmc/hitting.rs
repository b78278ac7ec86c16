use super::generator::Generator;
use crate::elim::trace_matrix;
use crate::error::{Error, Result};
use crate::graph::reachability;

/// Law of the first state of `boundary` visited from `x` (with `x` not in `boundary`).
///
/// Computed from the trace on `{x} ∪ boundary`: the trace jumps out of `x` into `b`
/// at rate proportional to the probability that `b` is entered first. Every state
/// outside the kept set must be able to reach it, otherwise `None` is returned.
pub(crate) fn entrance_law(gen: &Generator, x: usize, boundary: &[usize]) -> Option<Vec<f64>> {
    let n = gen.n_states();
    let mut keep = vec![x];
    keep.extend_from_slice(boundary);
    let mut kept = vec![false; n];
    for &k in &keep {
        kept[k] = true;
    }
    let order: Vec<usize> = (0..n).rev().filter(|&z| !kept[z]).collect();
    let traced = trace_matrix(gen.rows(), &keep, &order).ok()?;
    let row = &traced[0];
    let total: f64 = row[1..].iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(row[1..].iter().map(|r| r / total).collect())
}

/// Probability that the chain started at `x` enters `target` before `avoid`.
pub fn hitting_probability(
    gen: &Generator,
    target: &[usize],
    avoid: &[usize],
    x: usize,
) -> Result<f64> {
    let n = gen.n_states();
    for &s in target.iter().chain(avoid).chain(std::iter::once(&x)) {
        if s >= n {
            return Err(Error::UnknownState(s.to_string()));
        }
    }
    if target.is_empty() && avoid.is_empty() {
        return Err(Error::InvalidArgument("target and avoid sets are both empty".into()));
    }
    if let Some(&s) = target.iter().find(|s| avoid.contains(s)) {
        return Err(Error::OverlappingSets(gen.label(s).to_string()));
    }
    if target.contains(&x) {
        return Ok(1.0);
    }
    if avoid.contains(&x) {
        return Ok(0.0);
    }
    let reach = reachability(n, |a, b| gen.has_edge(a, b));
    let stop: Vec<usize> = target.iter().chain(avoid).copied().collect();
    let alive = |s: usize| stop.iter().any(|&b| reach[s][b]);
    if !alive(x) {
        return Err(Error::Unreachable {
            state: gen.label(x).to_string(),
        });
    }
    // States that can no longer reach either set count as a failure to hit the target.
    let mut boundary: Vec<usize> = target.to_vec();
    boundary.extend(avoid);
    boundary.extend((0..n).filter(|&s| s != x && !stop.contains(&s) && !alive(s)));
    let law = entrance_law(gen, x, &boundary).ok_or_else(|| Error::Unreachable {
        state: gen.label(x).to_string(),
    })?;
    Ok(law[..target.len()].iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn path(r21: f64, r23: f64) -> Generator {
        Generator::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![r21, 0.0, r23],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    /// Independent route: solve the absorbing-chain linear system.
    fn linear_hitting(g: &Generator, target: &[usize], avoid: &[usize]) -> Vec<f64> {
        let n = g.n_states();
        let q = g.q_matrix();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for x in 0..n {
            if target.contains(&x) || avoid.contains(&x) {
                a[(x, x)] = 1.0;
                b[x] = if target.contains(&x) { 1.0 } else { 0.0 };
            } else {
                for y in 0..n {
                    a[(x, y)] = q[(x, y)];
                }
            }
        }
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn forced_and_symmetric_cases() {
        let g = path(1.0, 1.0);
        assert_eq!(hitting_probability(&g, &[0], &[2], 0).unwrap(), 1.0);
        assert_eq!(hitting_probability(&g, &[0], &[2], 2).unwrap(), 0.0);
        assert!((hitting_probability(&g, &[0], &[2], 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_step_analysis() {
        let g = path(2.0, 1.0);
        assert!((hitting_probability(&g, &[0], &[2], 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn matches_linear_system() {
        let g = Generator::from_rows(&[
            vec![0.0, 0.5, 0.1, 2.0, 0.0],
            vec![1.0, 0.0, 3.0, 0.0, 0.2],
            vec![0.0, 0.2, 0.0, 1.0, 0.6],
            vec![0.7, 0.0, 0.4, 0.0, 0.1],
            vec![0.3, 0.3, 0.0, 0.9, 0.0],
        ])
        .unwrap();
        let lin = linear_hitting(&g, &[0], &[4]);
        for x in 1..4 {
            let h = hitting_probability(&g, &[0], &[4], x).unwrap();
            assert!((h - lin[x]).abs() < 1e-13);
        }
    }

    #[test]
    fn dead_states_and_errors() {
        // 0 -> 1 (absorbing) and 0 -> 2 (target); state 3 isolated.
        let g = Generator::from_rows(&[
            vec![0.0, 1.0, 3.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!((hitting_probability(&g, &[2], &[], 0).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            hitting_probability(&g, &[2], &[], 3),
            Err(Error::Unreachable { .. })
        ));
        assert!(matches!(
            hitting_probability(&g, &[2], &[2], 0),
            Err(Error::OverlappingSets(_))
        ));
    }
}
