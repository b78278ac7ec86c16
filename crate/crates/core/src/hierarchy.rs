//! The tree of metastable time scales of a rate family.
//!
//! Level 1 consists of the closed classes of the limit chain (order-one edges only).
//! At each further level the family is traced on the union of the current classes,
//! mean jump rates between classes are computed in the asymptotic semiring, the
//! slowest surviving order fixes the next time scale, and the recurrent classes of
//! the resulting reduced chain are merged into the classes of the next level.

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotic::{format_exponent, mean_interclass_rates, AsymptoticScalar, Exponent, RateFamily};
use crate::ctmc::{
    classify_states, hitting_probability, stationary_distribution, transition_matrix, Generator,
    ProbabilityMeasure,
};
use crate::error::{Error, Result};

/// Classes `V^(p)_j`, the transient remainder and one equilibrium per class.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub sets: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    pub measures: Vec<ProbabilityMeasure>,
}

impl Level {
    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    /// Sorted union of the classes.
    pub fn union(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.sets.iter().flatten().copied().collect();
        u.sort_unstable();
        u
    }

    pub fn set_of(&self, x: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&x))
    }
}

/// The reduced chain between the classes of one level and its time scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Scale {
    /// `theta = exp(theta_exp * beta)`.
    pub theta_exp: Exponent,
    /// Mean inter-class rates as asymptotic scalars.
    pub mean_rates: Vec<Vec<AsymptoticScalar>>,
    /// Limits of `theta * mean_rates`.
    pub limit_rates: DMatrix<f64>,
    pub recurrent: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    /// Equilibrium of the reduced chain on each recurrent class, as a measure on the classes.
    pub equilibria: Vec<ProbabilityMeasure>,
}

impl Scale {
    pub fn theta(&self, beta: f64) -> f64 {
        (exp_f64(&self.theta_exp) * beta).exp()
    }

    pub fn limit_chain(&self) -> Generator {
        let k = self.limit_rates.nrows();
        Generator::new((1..=k).map(|j| j.to_string()).collect(), self.limit_rates.clone())
            .expect("limit rates are valid")
    }
}

pub(crate) fn exp_f64(k: &Exponent) -> f64 {
    *k.numer() as f64 / *k.denom() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyTree {
    pub labels: Vec<String>,
    /// `levels[p - 1]` for `p = 1..=depth + 1`.
    pub levels: Vec<Level>,
    /// `scales[p - 1]` for `p = 1..=depth`.
    pub scales: Vec<Scale>,
    pub depth: usize,
    pub diagnostic: Option<String>,
    /// Limit chain of the order-one edges.
    pub limit: Generator,
}

impl HierarchyTree {
    /// Level `p`, one-based.
    pub fn level(&self, p: usize) -> &Level {
        &self.levels[p - 1]
    }

    /// Scale `p`, one-based.
    pub fn scale(&self, p: usize) -> &Scale {
        &self.scales[p - 1]
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    fn check_level_index(&self, p: usize, max: usize) -> Result<()> {
        if p == 0 || p > max {
            return Err(Error::InvalidArgument(format!(
                "level {p} outside 1..={max} for a tree of depth {}",
                self.depth
            )));
        }
        Ok(())
    }
}

/// Builds the full tree; its invariants are checked before returning.
pub fn build_tree(fam: &RateFamily) -> Result<HierarchyTree> {
    let n = fam.n_states();
    if !fam.is_irreducible() {
        let dec = crate::ctmc::classify_edges(n, |x, y| fam.has_edge(x, y));
        return Err(Error::NotIrreducible {
            classes: dec.n_classes(),
        });
    }
    let limit = fam.limit_generator();
    let dec = classify_states(&limit);
    let closed: Vec<Vec<usize>> = dec.closed_classes().into_iter().cloned().collect();
    let measures = closed
        .iter()
        .map(|c| Ok(stationary_distribution(&limit.restrict(c))?.embed(n, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = vec![Level {
        sets: closed,
        transient: dec.transient_states.clone(),
        measures,
    }];
    let mut scales = Vec::new();
    let labels = fam.labels().to_vec();

    if levels[0].n_sets() == 1 {
        let tree = HierarchyTree {
            labels,
            levels,
            scales,
            limit: limit.clone(),
            depth: 0,
            diagnostic: Some(
                "the order-one edges already form a single closed class; there is no metastable level"
                    .into(),
            ),
        };
        assert_invariants(&tree)?;
        return Ok(tree);
    }

    let pi = fam.symbolic_stationary()?;
    loop {
        let p = levels.len();
        let cur = levels.last().expect("nonempty").clone();
        let kept = cur.union();
        let traced = fam.symbolic_trace(&kept)?;
        let mean = mean_interclass_rates(&pi, &traced, &kept, &cur.sets)?;
        let k = cur.n_sets();
        let kappa = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter_map(|(i, j)| mean[i][j].exp())
            .max()
            .ok_or(Error::DegenerateLevel { level: p })?;
        let limit_rates = DMatrix::from_fn(k, k, |i, j| match &mean[i][j] {
            AsymptoticScalar::Term { coeff, exp } if i != j && *exp == kappa => coeff.to_f64(),
            _ => 0.0,
        });
        let reduced = Generator::new((1..=k).map(|j| j.to_string()).collect(), limit_rates.clone())?;
        let rdec = classify_states(&reduced);
        let recurrent: Vec<Vec<usize>> = rdec.closed_classes().into_iter().cloned().collect();
        let equilibria = recurrent
            .iter()
            .map(|c| Ok(stationary_distribution(&reduced.restrict(c))?.embed(k, c)))
            .collect::<Result<Vec<_>>>()?;

        let mut next_sets = Vec::new();
        let mut next_measures = Vec::new();
        for (c, m) in recurrent.iter().zip(&equilibria) {
            let mut set: Vec<usize> = c.iter().flat_map(|&j| cur.sets[j].iter().copied()).collect();
            set.sort_unstable();
            next_sets.push(set);
            let parts: Vec<(f64, &ProbabilityMeasure)> =
                c.iter().map(|&j| (m.get(j), &cur.measures[j])).collect();
            next_measures.push(ProbabilityMeasure::mixture(&parts)?);
        }
        let mut next_transient = cur.transient.clone();
        for &j in &rdec.transient_states {
            next_transient.extend(cur.sets[j].iter().copied());
        }
        next_transient.sort_unstable();

        scales.push(Scale {
            theta_exp: -kappa,
            mean_rates: mean,
            limit_rates,
            recurrent: recurrent.clone(),
            transient: rdec.transient_states.clone(),
            equilibria,
        });
        levels.push(Level {
            sets: next_sets,
            transient: next_transient,
            measures: next_measures,
        });
        if recurrent.len() == 1 {
            break;
        }
        if recurrent.len() >= k {
            return Err(Error::DegenerateLevel { level: p });
        }
    }
    let depth = scales.len();
    let tree = HierarchyTree {
        labels,
        levels,
        scales,
        depth,
        diagnostic: None,
        limit,
    };
    assert_invariants(&tree)?;
    Ok(tree)
}

fn invariant(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(msg()))
    }
}

/// Structural checks on a built tree.
pub fn assert_invariants(tree: &HierarchyTree) -> Result<()> {
    let n = tree.n_states();
    invariant(tree.levels.len() == tree.depth + 1, || "level count".into())?;
    invariant(tree.scales.len() == tree.depth, || "scale count".into())?;
    for (i, lvl) in tree.levels.iter().enumerate() {
        let p = i + 1;
        let mut seen = vec![0usize; n];
        for &x in lvl.sets.iter().flatten().chain(&lvl.transient) {
            seen[x] += 1;
        }
        invariant(seen.iter().all(|&c| c == 1), || format!("level {p} does not partition the states"))?;
        invariant(lvl.measures.len() == lvl.sets.len(), || format!("level {p} measure count"))?;
        for (j, (set, m)) in lvl.sets.iter().zip(&lvl.measures).enumerate() {
            let supp = m.support();
            invariant(&supp == set, || format!("support of measure {} at level {p} differs from its class", j + 1))?;
        }
        if i > 0 {
            let prev = &tree.levels[i - 1];
            invariant(lvl.n_sets() < prev.n_sets(), || format!("level {p} does not reduce the class count"))?;
            invariant(prev.transient.iter().all(|x| lvl.transient.contains(x)), || {
                format!("transient states of level {} are not kept at level {p}", p - 1)
            })?;
            for set in &lvl.sets {
                let covered: Vec<usize> = prev
                    .sets
                    .iter()
                    .filter(|s| s.iter().any(|x| set.contains(x)))
                    .flat_map(|s| s.iter().copied())
                    .collect();
                invariant(covered.len() == set.len(), || format!("a class of level {p} is not a union of level {} classes", p - 1))?;
            }
        }
    }
    let mut prev_exp: Option<Exponent> = None;
    for (i, sc) in tree.scales.iter().enumerate() {
        let p = i + 1;
        match prev_exp {
            None => invariant(sc.theta_exp > Exponent::zero(), || "first time scale does not diverge".into())?,
            Some(e) => invariant(sc.theta_exp > e, || format!("time scale {p} is not slower than scale {}", p - 1))?,
        }
        prev_exp = Some(sc.theta_exp);
        let k = sc.limit_rates.nrows();
        let positive = (0..k).any(|a| (0..k).any(|b| a != b && sc.limit_rates[(a, b)] > 0.0));
        invariant(positive, || format!("reduced chain {p} has no positive rate"))?;
        // no limit flow out of a recurrent class
        for c in &sc.recurrent {
            for &a in c {
                for b in 0..k {
                    if !c.contains(&b) {
                        let zero_order = sc.mean_rates[a][b]
                            .exp()
                            .is_none_or(|e| e < -sc.theta_exp);
                        invariant(zero_order && sc.limit_rates[(a, b)] == 0.0, || {
                            format!("limit rate leaves a recurrent class at level {p}")
                        })?;
                    }
                }
            }
        }
        // the next level measures are the recorded mixtures
        let cur = &tree.levels[i];
        let next = &tree.levels[i + 1];
        for (m, (c, eq)) in sc.recurrent.iter().zip(&sc.equilibria).enumerate() {
            let mut w = vec![0.0; n];
            for &j in c {
                for x in 0..n {
                    w[x] += eq.get(j) * cur.measures[j].get(x);
                }
            }
            let dev = next.measures[m]
                .weights()
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            invariant(dev <= 1e-12, || format!("measure {} at level {} is not the mixture of its parts", m + 1, p + 1))?;
        }
    }
    if let Some(last) = tree.scales.last() {
        invariant(last.recurrent.len() == 1, || "deepest reduced chain has several recurrent classes".into())?;
    }
    Ok(())
}

/// `a^(p-1)(x, j)`: probability, at `beta`, of reaching class `j` of level `p` before the other classes.
pub fn a_coefficients(fam: &RateFamily, tree: &HierarchyTree, p: usize, beta: f64) -> Result<DMatrix<f64>> {
    tree.check_level_index(p, tree.depth + 1)?;
    let lvl = tree.level(p);
    let n = tree.n_states();
    let k = lvl.n_sets();
    if p == tree.depth + 1 {
        return Ok(DMatrix::from_element(n, k, 1.0));
    }
    let gen = fam.evaluate(beta)?;
    let mut a = DMatrix::zeros(n, k);
    for x in 0..n {
        if let Some(j) = lvl.set_of(x) {
            a[(x, j)] = 1.0;
            continue;
        }
        for j in 0..k {
            let avoid: Vec<usize> = lvl
                .sets
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .flat_map(|(_, s)| s.iter().copied())
                .collect();
            a[(x, j)] = hitting_probability(&gen, &lvl.sets[j], &avoid, x)?;
        }
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct T1Row {
    pub beta: f64,
    /// `l1` distance at time `t * theta^(p)`.
    pub deviation: f64,
    /// `l1` distance at the geometric mean of the scales `p - 1` and `p`, against the short-time limit.
    pub intermediate_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct T1Table {
    pub level: usize,
    pub time: f64,
    pub state: String,
    pub rows: Vec<T1Row>,
}

impl T1Table {
    /// Deviations never increase along the grid (up to `slack`).
    pub fn non_increasing(&self, slack: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].deviation <= w[0].deviation + slack)
    }
}

/// Distance of the law at time `t * theta^(p)` from its predicted limit mixture.
pub fn t1_check(
    fam: &RateFamily,
    tree: &HierarchyTree,
    p: usize,
    t: f64,
    x: usize,
    beta_grid: &[f64],
) -> Result<T1Table> {
    tree.check_level_index(p, tree.depth)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let n = tree.n_states();
    if x >= n {
        return Err(Error::UnknownState(x.to_string()));
    }
    let scale = tree.scale(p);
    let lvl = tree.level(p);
    let k = lvl.n_sets();
    let pt = transition_matrix(&scale.limit_chain(), t)?;
    let prev_exp = if p == 1 { Exponent::zero() } else { tree.scale(p - 1).theta_exp };
    let mid_exp = (exp_f64(&prev_exp) + exp_f64(&scale.theta_exp)) / 2.0;
    let mut rows = Vec::new();
    for &beta in beta_grid {
        let a = a_coefficients(fam, tree, p, beta)?;
        let mut omega = vec![0.0; k];
        for (j, o) in omega.iter_mut().enumerate() {
            *o = (0..k).map(|i| a[(x, i)] * pt[(i, j)]).sum();
        }
        let mix = |w: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut v = vec![0.0; n];
            for j in 0..k {
                for (z, vz) in v.iter_mut().enumerate() {
                    *vz += w(j) * lvl.measures[j].get(z);
                }
            }
            v
        };
        let target = mix(&|j| omega[j]);
        let short = mix(&|j| a[(x, j)]);
        let gen = fam.evaluate(beta)?;
        let law = transition_matrix(&gen, t * scale.theta(beta))?;
        let law_mid = transition_matrix(&gen, t * (mid_exp * beta).exp())?;
        let l1 = |u: &[f64], m: &DMatrix<f64>| (0..n).map(|z| (m[(x, z)] - u[z]).abs()).sum::<f64>();
        rows.push(T1Row {
            beta,
            deviation: l1(&target, &law),
            intermediate_deviation: l1(&short, &law_mid),
        });
    }
    Ok(T1Table {
        level: p,
        time: t,
        state: tree.labels[x].clone(),
        rows,
    })
}

/// Rounds to twelve significant digits for reports.
pub(crate) fn sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn scalar_json(s: &AsymptoticScalar) -> Value {
    match s {
        AsymptoticScalar::Zero => Value::Null,
        AsymptoticScalar::Term { coeff, exp } => json!({
            "coeff": coeff.to_exact_string().map(Value::String).unwrap_or_else(|| json!(sig12(coeff.to_f64()))),
            "exp": format_exponent(exp),
        }),
    }
}

impl HierarchyTree {
    /// Structured report: sets by label, exponents as rational strings, numbers to 12 digits.
    pub fn to_json(&self) -> Value {
        let names = |s: &[usize]| -> Vec<String> { s.iter().map(|&x| self.labels[x].clone()).collect() };
        let measure = |m: &ProbabilityMeasure| -> Vec<f64> { m.weights().iter().map(|&w| sig12(w)).collect() };
        let levels: Vec<Value> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut v = json!({
                    "level": i + 1,
                    "sets": l.sets.iter().map(|s| names(s)).collect::<Vec<_>>(),
                    "transient": names(&l.transient),
                    "measures": l.measures.iter().map(measure).collect::<Vec<_>>(),
                });
                if let Some(sc) = self.scales.get(i) {
                    let k = sc.limit_rates.nrows();
                    v["theta_exponent"] = json!(format_exponent(&sc.theta_exp));
                    v["limit_rates"] = json!((0..k)
                        .map(|a| (0..k).map(|b| sig12(sc.limit_rates[(a, b)])).collect::<Vec<_>>())
                        .collect::<Vec<_>>());
                    v["mean_rates"] = json!(sc
                        .mean_rates
                        .iter()
                        .map(|r| r.iter().map(scalar_json).collect::<Vec<_>>())
                        .collect::<Vec<_>>());
                    v["recurrent_classes"] = json!(sc
                        .recurrent
                        .iter()
                        .map(|c| c.iter().map(|j| j + 1).collect::<Vec<_>>())
                        .collect::<Vec<_>>());
                    v["transient_classes"] = json!(sc.transient.iter().map(|j| j + 1).collect::<Vec<_>>());
                    v["equilibria"] = json!(sc.equilibria.iter().map(measure).collect::<Vec<_>>());
                }
                v
            })
            .collect();
        // Leaves-to-root view: generation g holds the classes of level depth + 2 - g.
        let mut generations = vec![json!({
            "generation": 0,
            "sets": [names(&(0..self.n_states()).collect::<Vec<_>>())],
            "transient": Vec::<String>::new(),
        })];
        for g in 1..=self.depth + 1 {
            let l = self.level(self.depth + 2 - g);
            generations.push(json!({
                "generation": g,
                "sets": l.sets.iter().map(|s| names(s)).collect::<Vec<_>>(),
                "transient": names(&l.transient),
            }));
        }
        json!({
            "states": self.labels,
            "depth": self.depth,
            "theta_exponents": self.scales.iter().map(|s| format_exponent(&s.theta_exp)).collect::<Vec<_>>(),
            "levels": levels,
            "generations": generations,
            "diagnostic": self.diagnostic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: i64, k: i64) -> AsymptoticScalar {
        AsymptoticScalar::exact(c, 1, k, 1)
    }

    fn fam(n: usize, edges: &[(usize, usize, AsymptoticScalar)]) -> RateFamily {
        let mut r = vec![vec![AsymptoticScalar::Zero; n]; n];
        for (x, y, v) in edges {
            r[*x][*y] = v.clone();
        }
        RateFamily::new((1..=n).map(|i| i.to_string()).collect(), r).unwrap()
    }

    pub(super) fn birth_death() -> RateFamily {
        fam(
            3,
            &[
                (0, 1, s(1, -1)),
                (1, 0, s(1, -1)),
                (1, 2, s(1, -2)),
                (2, 1, s(1, -2)),
            ],
        )
    }

    #[test]
    fn two_state_tree() {
        let t = build_tree(&fam(2, &[(0, 1, s(1, -1)), (1, 0, s(2, -1))])).unwrap();
        assert_eq!(t.depth, 1);
        assert_eq!(t.level(1).sets, vec![vec![0], vec![1]]);
        assert_eq!(t.scale(1).theta_exp, Exponent::from_integer(1));
        assert_eq!(t.scale(1).limit_rates[(0, 1)], 1.0);
        assert_eq!(t.scale(1).limit_rates[(1, 0)], 2.0);
        let pi = &t.level(2).measures[0];
        assert!((pi.get(0) - 2.0 / 3.0).abs() < 1e-15);
        let v = t.to_json();
        assert_eq!(v["theta_exponents"], json!(["1"]));
        assert_eq!(v["levels"][0]["limit_rates"], json!([[0.0, 1.0], [2.0, 0.0]]));
    }

    #[test]
    fn birth_death_tree() {
        let t = build_tree(&birth_death()).unwrap();
        assert_eq!(t.depth, 2);
        assert_eq!(t.level(1).sets, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(t.scale(1).theta_exp, Exponent::from_integer(1));
        assert_eq!(t.scale(2).theta_exp, Exponent::from_integer(2));
        let r1 = &t.scale(1).limit_rates;
        assert_eq!((r1[(0, 1)], r1[(1, 0)], r1[(1, 2)], r1[(2, 1)]), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(t.scale(1).recurrent, vec![vec![0, 1], vec![2]]);
        let r2 = &t.scale(2).limit_rates;
        assert_eq!((r2[(0, 1)], r2[(1, 0)]), (0.5, 1.0));
        assert_eq!(t.level(2).measures[0].weights(), &[0.5, 0.5, 0.0]);
        assert_eq!(t.level(2).measures[1].weights(), &[0.0, 0.0, 1.0]);
        for x in 0..3 {
            assert!((t.level(3).measures[0].get(x) - 1.0 / 3.0).abs() < 1e-12);
        }
        let a = a_coefficients(&birth_death(), &t, 1, 10.0).unwrap();
        assert_eq!(a, DMatrix::identity(3, 3));
        let top = a_coefficients(&birth_death(), &t, 3, 10.0).unwrap();
        assert!(top.iter().all(|&v| v == 1.0));
        let v = t.to_json();
        assert_eq!(v["generations"][0]["sets"], json!([["1", "2", "3"]]));
        assert_eq!(v["generations"][1]["sets"], json!([["1", "2", "3"]]));
        assert_eq!(v["generations"][3]["sets"], json!([["1"], ["2"], ["3"]]));
    }

    #[test]
    fn single_closed_class_has_depth_zero() {
        let t = build_tree(&fam(2, &[(0, 1, s(1, 0)), (1, 0, s(1, -1))])).unwrap();
        assert_eq!(t.depth, 0);
        assert!(t.diagnostic.is_some());
        assert_eq!(t.level(1).sets, vec![vec![1]]);
    }

    #[test]
    fn transient_states_are_tracked() {
        // a <-> b slowly, c drains into both at order one.
        let f = fam(
            3,
            &[
                (0, 1, s(1, -1)),
                (1, 0, s(1, -1)),
                (2, 0, s(1, 0)),
                (2, 1, s(1, 0)),
                (0, 2, s(1, -1)),
            ],
        );
        let t = build_tree(&f).unwrap();
        assert_eq!(t.level(1).transient, vec![2]);
        let a = a_coefficients(&f, &t, 1, 12.0).unwrap();
        assert!((a[(2, 0)] - 0.5).abs() < 1e-4);
        let tab = t1_check(&f, &t, 1, 1.0, 2, &[6.0, 9.0, 12.0]).unwrap();
        assert!(tab.rows[2].deviation < 0.05);
    }

    #[test]
    fn t1_trend_on_birth_death() {
        let f = birth_death();
        let t = build_tree(&f).unwrap();
        let tab = t1_check(&f, &t, 2, 1.0, 0, &[6.0, 9.0, 12.0]).unwrap();
        assert!(tab.non_increasing(1e-12), "{tab:?}");
        assert!(tab.rows[2].deviation <= 0.05);
    }
}
