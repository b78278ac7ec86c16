//! Level functionals of the Gamma-expansion, recovery sequences and the numerical
//! harness that compares `theta^(p)(beta) I_beta` with its predicted limit.
//!
//! A finite computation can only exhibit particular sequences: the constructive
//! recovery sequence for the upper bound, and user-chosen or smoothed sequences for
//! the lower bound. Reports carry that caveat in their `scope` field.

use serde::{Serialize, Serializer};

use crate::asymptotic::RateFamily;
use crate::ctmc::{classify_states, stationary_distribution, Generator, ProbabilityMeasure};
use crate::error::{Error, Result};
use crate::hierarchy::{sig12, HierarchyTree};
use crate::operators::{harmonic_extension, reflect, tilt, trace, TiltPotential};
use crate::rate::{rate, rate_irreducible_from, RateReport};

/// Tolerance for deciding that a measure is a mixture of level equilibria.
pub const REPRESENTATION_TOLERANCE: f64 = 1e-9;
/// Relative tolerance of the final row against the target.
pub const TABLE_TOLERANCE: f64 = 0.05;
/// Values at or below this count as zero when walking down the levels.
pub const ZERO_LEVEL_TOLERANCE: f64 = 1e-8;

pub const SCOPE: &str = "finite certificate: the upper bound is checked along the constructed recovery \
sequence and the lower bound along the supplied sequences only";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(*v),
            ExtendedReal::Infinite => None,
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(sig12(*v)),
            ExtendedReal::Infinite => s.serialize_str("inf"),
        }
    }
}

/// A measure seen through level `p`: its weights on the classes, if it is a mixture.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelFunctionalInput {
    pub level: usize,
    pub omega: Option<ProbabilityMeasure>,
}

impl LevelFunctionalInput {
    pub fn is_representable(&self) -> bool {
        self.omega.is_some()
    }
}

fn check_level(tree: &HierarchyTree, p: usize) -> Result<()> {
    if p == 0 || p > tree.depth {
        return Err(Error::InvalidArgument(format!(
            "level {p} outside 1..={} for this tree",
            tree.depth
        )));
    }
    Ok(())
}

/// Writes `mu = sum_j omega_j pi^(p)_j` when possible.
pub fn decompose_measure(tree: &HierarchyTree, p: usize, mu: &ProbabilityMeasure) -> Result<LevelFunctionalInput> {
    check_level(tree, p)?;
    if mu.len() != tree.n_states() {
        return Err(Error::InvalidArgument("measure size does not match the tree".into()));
    }
    let lvl = tree.level(p);
    let omega: Vec<f64> = lvl.sets.iter().map(|s| mu.mass(s)).collect();
    let outside = 1.0 - omega.iter().sum::<f64>();
    let fits = outside <= REPRESENTATION_TOLERANCE
        && lvl.sets.iter().zip(&lvl.measures).zip(&omega).all(|((set, pi), &w)| {
            w == 0.0
                || set
                    .iter()
                    .all(|&x| (mu.get(x) - w * pi.get(x)).abs() <= REPRESENTATION_TOLERANCE)
        });
    let omega = if fits {
        Some(ProbabilityMeasure::from_unnormalized(omega)?)
    } else {
        None
    };
    Ok(LevelFunctionalInput { level: p, omega })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelValue {
    pub level: usize,
    pub value: ExtendedReal,
    pub omega: Option<ProbabilityMeasure>,
    pub certificate: Option<RateReport>,
}

/// `I^(p)(mu)`: the rate functional of the reduced chain at `omega`, or infinity.
/// Level 0 is the rate functional of the order-one limit chain.
pub fn level_functional(tree: &HierarchyTree, p: usize, mu: &ProbabilityMeasure) -> Result<LevelValue> {
    if p == 0 {
        let r = rate(&tree.limit, mu)?;
        return Ok(LevelValue {
            level: 0,
            value: ExtendedReal::Finite(r.value),
            omega: None,
            certificate: Some(r),
        });
    }
    let input = decompose_measure(tree, p, mu)?;
    match input.omega {
        None => Ok(LevelValue {
            level: p,
            value: ExtendedReal::Infinite,
            omega: None,
            certificate: None,
        }),
        Some(omega) => {
            let r = rate(&tree.scale(p).limit_chain(), &omega)?;
            Ok(LevelValue {
                level: p,
                value: ExtendedReal::Finite(r.value),
                omega: Some(omega),
                certificate: Some(r),
            })
        }
    }
}

/// `I^(p)` evaluated directly on class weights.
pub fn level_functional_of_weights(tree: &HierarchyTree, p: usize, omega: &ProbabilityMeasure) -> Result<f64> {
    check_level(tree, p)?;
    Ok(rate(&tree.scale(p).limit_chain(), omega)?.value)
}

/// Recovery measure at one `beta`, with the data needed for the full-chain lift.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryMeasure {
    pub beta: f64,
    /// Measure on all states, zero off the classes of level `p`.
    pub mu: ProbabilityMeasure,
    /// States kept by the trace (sorted union of the level classes).
    pub kept: Vec<usize>,
    /// Trace of the chain at `beta` on `kept`.
    pub trace: Generator,
    /// Potential on `kept` built from the per-class optimizers; zero on singleton classes.
    pub potential: TiltPotential,
}

impl RecoveryMeasure {
    /// The measure on `kept` only.
    pub fn on_kept(&self) -> ProbabilityMeasure {
        ProbabilityMeasure::from_unnormalized(self.kept.iter().map(|&x| self.mu.get(x)).collect())
            .expect("recovery measure lives on the kept states")
    }
}

/// Builds the recovery measure: per communicating class of the reduced chain, the
/// stationary state of the reflected trace tilted by the lifted class optimizer;
/// singleton classes contribute the stationary state of the reflected trace.
pub fn recovery_sequence(
    fam: &RateFamily,
    tree: &HierarchyTree,
    p: usize,
    omega: &ProbabilityMeasure,
    beta: f64,
) -> Result<RecoveryMeasure> {
    check_level(tree, p)?;
    let lvl = tree.level(p);
    let k = lvl.n_sets();
    if omega.len() != k {
        return Err(Error::InvalidArgument(format!(
            "class weights have {} entries for {k} classes",
            omega.len()
        )));
    }
    if let Some(j) = (0..k).find(|&j| omega.get(j) <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "class weight {} is not positive; smooth the weights first",
            j + 1
        )));
    }
    let n = tree.n_states();
    let kept = lvl.union();
    let pos = |x: usize| kept.binary_search(&x).expect("kept state");
    let gen = fam.evaluate(beta)?;
    let traced = trace(&gen, &kept)?;
    let reduced = tree.scale(p).limit_chain();
    let classes = classify_states(&reduced).classes;

    let mut lifted = vec![0.0; kept.len()];
    let mut parts: Vec<(f64, ProbabilityMeasure)> = Vec::new();
    for class in &classes {
        let mass: f64 = class.iter().map(|&j| omega.get(j)).sum();
        if class.len() == 1 {
            let j = class[0];
            let local: Vec<usize> = lvl.sets[j].iter().map(|&x| pos(x)).collect();
            let nu = stationary_distribution(&reflect(&traced, &local)?)?;
            parts.push((mass, embed(&nu, &local, &kept, n)));
            continue;
        }
        let cond = omega.conditioned(class)?;
        let sub = reflect(&reduced, class)?;
        let h = rate_irreducible_from(&sub, &cond, &TiltPotential::zero(class.len()))?;
        let h = &h.optimizer[0].potential;
        let mut local = Vec::new();
        for (i, &j) in class.iter().enumerate() {
            for &x in &lvl.sets[j] {
                local.push(pos(x));
                lifted[pos(x)] = h.values()[i];
            }
        }
        local.sort_unstable();
        let pot = TiltPotential::new(local.iter().map(|&i| lifted[i]).collect(), 0)?;
        let tilted = tilt(&reflect(&traced, &local)?, &pot)?;
        let m = stationary_distribution(&tilted)?;
        parts.push((mass, embed(&m, &local, &kept, n)));
    }
    let refs: Vec<(f64, &ProbabilityMeasure)> = parts.iter().map(|(w, m)| (*w, m)).collect();
    let mu = ProbabilityMeasure::mixture(&refs)?;
    Ok(RecoveryMeasure {
        beta,
        mu,
        kept,
        trace: traced,
        potential: TiltPotential::new(lifted, 0)?,
    })
}

/// Places a measure on `local` positions of `kept` into all `n` states.
fn embed(m: &ProbabilityMeasure, local: &[usize], kept: &[usize], n: usize) -> ProbabilityMeasure {
    let global: Vec<usize> = local.iter().map(|&i| kept[i]).collect();
    m.embed(n, &global)
}

/// Rate of the trace at the recovery measure, warm-started at the lifted potential.
fn trace_rate(rec: &RecoveryMeasure) -> Result<RateReport> {
    rate_irreducible_from(&rec.trace, &rec.on_kept(), &rec.potential)
}

/// Lift to the full chain: stationary state of the full generator tilted by the
/// harmonic extension of the trace optimizer.
pub fn full_chain_lift(gen: &Generator, rec: &RecoveryMeasure, trace_report: &RateReport) -> Result<ProbabilityMeasure> {
    let f = &trace_report.optimizer[0].potential;
    let shift = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u: Vec<f64> = f.values().iter().map(|v| (v - shift).exp()).collect();
    let v = harmonic_extension(gen, &rec.kept, &u)?;
    let tilted = tilt(gen, &TiltPotential::from_multiplicative(&v)?)?;
    stationary_distribution(&tilted)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaRow {
    pub beta: f64,
    pub theta: f64,
    /// `theta * I^trace_beta(mu_beta)`.
    pub value: f64,
    /// `theta * I_beta(nu_beta)` for the full-chain lift.
    pub full_value: f64,
    /// `nu_beta` mass on the traced states.
    pub lift_mass: f64,
    pub target: f64,
    pub ratio: f64,
    /// Sup distance of `mu_beta` from the predicted limit mixture.
    pub limit_distance: f64,
    pub transfer_ok: bool,
    pub recovery_measure: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Diverges,
    BoundedBelow,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Diverges => "DIVERGES",
            Verdict::BoundedBelow => "BOUNDED-BELOW",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaTable {
    pub level: usize,
    pub omega: Vec<f64>,
    pub target: f64,
    pub rows: Vec<GammaRow>,
    pub verdict: Verdict,
    pub trend_ok: bool,
    pub transfer_ok: bool,
    pub tolerance: f64,
    pub scope: &'static str,
}

impl GammaTable {
    pub fn to_csv_rows(&self) -> Vec<[String; 5]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    format!("{}", r.beta),
                    format!("{}", sig12(r.value)),
                    format!("{}", sig12(r.target)),
                    format!("{}", sig12(r.ratio)),
                    self.verdict.as_str().to_string(),
                ]
            })
            .collect()
    }
}

fn check_grid(beta_grid: &[f64], min_len: usize) -> Result<()> {
    if beta_grid.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "beta grid needs at least {min_len} points"
        )));
    }
    if beta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("beta grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Upper-bound table along the recovery sequence.
pub fn gamma_limsup_table(
    fam: &RateFamily,
    tree: &HierarchyTree,
    p: usize,
    omega: &ProbabilityMeasure,
    beta_grid: &[f64],
) -> Result<GammaTable> {
    check_level(tree, p)?;
    check_grid(beta_grid, 3)?;
    let target = level_functional_of_weights(tree, p, omega)?;
    let lvl = tree.level(p);
    let n = tree.n_states();
    let mut limit = vec![0.0; n];
    for (j, m) in lvl.measures.iter().enumerate() {
        for (x, l) in limit.iter_mut().enumerate() {
            *l += omega.get(j) * m.get(x);
        }
    }
    let slack = 1e-9 * (1.0 + target);
    let mut rows = Vec::new();
    for &beta in beta_grid {
        let theta = tree.scale(p).theta(beta);
        let rec = recovery_sequence(fam, tree, p, omega, beta)?;
        let tr = trace_rate(&rec)?;
        let gen = fam.evaluate(beta)?;
        let nu = full_chain_lift(&gen, &rec, &tr)?;
        let full = rate(&gen, &nu)?.value;
        let value = theta * tr.value;
        let full_value = theta * full;
        rows.push(GammaRow {
            beta,
            theta,
            value,
            full_value,
            lift_mass: nu.mass(&rec.kept),
            target,
            ratio: if target == 0.0 { 1.0 } else { value / target },
            limit_distance: rec
                .mu
                .weights()
                .iter()
                .zip(&limit)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            transfer_ok: full_value <= value + slack,
            recovery_measure: rec.mu.weights().iter().map(|&w| sig12(w)).collect(),
        });
    }
    let errs: Vec<f64> = rows.iter().map(|r| (r.value - target).abs()).collect();
    let tail = &errs[errs.len() - 3..];
    let trend_ok = tail.windows(2).all(|w| w[1] <= w[0] + slack);
    let tolerance = if target == 0.0 { TABLE_TOLERANCE } else { TABLE_TOLERANCE * target };
    let final_ok = *errs.last().expect("grid nonempty") <= tolerance;
    let transfer_ok = rows.iter().all(|r| r.transfer_ok);
    Ok(GammaTable {
        level: p,
        omega: omega.weights().to_vec(),
        target,
        rows,
        verdict: if final_ok && trend_ok { Verdict::Pass } else { Verdict::Fail },
        trend_ok,
        transfer_ok,
        tolerance,
        scope: SCOPE,
    })
}

/// Sequences probed for the lower bound.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureSequence {
    Fixed(ProbabilityMeasure),
    /// `(1 - 1/beta) mu + (1/beta) uniform`.
    Smoothed(ProbabilityMeasure),
}

impl MeasureSequence {
    pub fn base(&self) -> &ProbabilityMeasure {
        match self {
            MeasureSequence::Fixed(m) | MeasureSequence::Smoothed(m) => m,
        }
    }

    pub fn at(&self, beta: f64) -> Result<ProbabilityMeasure> {
        match self {
            MeasureSequence::Fixed(m) => Ok(m.clone()),
            MeasureSequence::Smoothed(m) => {
                let n = m.len() as f64;
                let eps = (1.0 / beta).min(1.0);
                ProbabilityMeasure::from_unnormalized(
                    m.weights().iter().map(|w| (1.0 - eps) * w + eps / n).collect(),
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiminfRow {
    pub beta: f64,
    pub theta: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiminfTable {
    pub level: usize,
    pub target: ExtendedReal,
    pub rows: Vec<LiminfRow>,
    pub verdict: Verdict,
    pub scope: &'static str,
}

/// Lower-bound probe: `theta^(p)(beta) I_beta(mu_beta)` along a given sequence.
pub fn gamma_liminf_probe(
    fam: &RateFamily,
    tree: &HierarchyTree,
    p: usize,
    seq: &MeasureSequence,
    beta_grid: &[f64],
) -> Result<LiminfTable> {
    check_level(tree, p)?;
    check_grid(beta_grid, 3)?;
    let target = level_functional(tree, p, seq.base())?.value;
    let mut rows = Vec::new();
    for &beta in beta_grid {
        let theta = tree.scale(p).theta(beta);
        let gen = fam.evaluate(beta)?;
        let mu = seq.at(beta)?;
        rows.push(LiminfRow {
            beta,
            theta,
            value: theta * rate(&gen, &mu)?.value,
        });
    }
    let last3 = &rows[rows.len() - 3..];
    let verdict = match target {
        ExtendedReal::Infinite => {
            if last3.windows(2).all(|w| w[1].value >= 2.0 * w[0].value && w[0].value > 0.0) {
                Verdict::Diverges
            } else {
                Verdict::Inconclusive
            }
        }
        ExtendedReal::Finite(t) => {
            if rows.last().expect("grid nonempty").value >= 0.9 * t {
                Verdict::BoundedBelow
            } else {
                Verdict::Inconclusive
            }
        }
    };
    Ok(LiminfTable {
        level: p,
        target,
        rows,
        verdict,
        scope: SCOPE,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelTerm {
    pub level: usize,
    pub value: ExtendedReal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub beta: f64,
    /// Finest level at which the functional is finite.
    pub finest_level: usize,
    pub terms: Vec<LevelTerm>,
    /// `I_beta(mu)` on the full chain at the measure itself.
    pub pointwise_value: f64,
    /// `I^(0)(mu) + sum_p I^(p)(mu) / theta^(p)(beta)`; a pointwise comparison with no guarantee.
    pub heuristic_sum: f64,
    /// Target of the asymptotic comparison: `I^(p*)(mu)`.
    pub target: f64,
    /// `theta^(p*)(beta) I_beta` at the full-chain lift of the recovery measure (or at `mu` when `p* = 0`).
    pub scaled_value: f64,
    /// Same scale, trace functional at the recovery measure.
    pub scaled_trace_value: f64,
    /// Same scale, full chain at the recovery measure itself.
    pub scaled_value_at_recovery: f64,
    pub ratio: f64,
    /// Whether the class weights were pushed towards uniform to make them positive.
    pub smoothed: bool,
    pub scope: &'static str,
}

/// Compares the chain's functional with the level expansion at one `beta`.
pub fn expansion_residual(
    fam: &RateFamily,
    tree: &HierarchyTree,
    mu: &ProbabilityMeasure,
    beta: f64,
) -> Result<ExpansionReport> {
    let gen = fam.evaluate(beta)?;
    let pointwise = rate(&gen, mu)?.value;
    let mut terms = vec![LevelTerm {
        level: 0,
        value: level_functional(tree, 0, mu)?.value,
    }];
    let mut finest = 0;
    let mut omega = None;
    let mut prev_zero = terms[0].value.finite().is_some_and(|v| v <= ZERO_LEVEL_TOLERANCE);
    for p in 1..=tree.depth {
        if !prev_zero {
            break;
        }
        let lv = level_functional(tree, p, mu)?;
        terms.push(LevelTerm { level: p, value: lv.value });
        match lv.value {
            ExtendedReal::Infinite => break,
            ExtendedReal::Finite(v) => {
                finest = p;
                omega = lv.omega;
                prev_zero = v <= ZERO_LEVEL_TOLERANCE;
            }
        }
    }
    let mut heuristic = 0.0;
    for t in &terms {
        if let ExtendedReal::Finite(v) = t.value {
            heuristic += if t.level == 0 { v } else { v / tree.scale(t.level).theta(beta) };
        }
    }
    let target = terms
        .iter()
        .find(|t| t.level == finest)
        .and_then(|t| t.value.finite())
        .expect("finest level is finite");

    let (scaled, scaled_trace, scaled_rec, smoothed) = if finest == 0 {
        (pointwise, pointwise, pointwise, false)
    } else {
        let omega = omega.expect("finite level has weights");
        let smoothed = omega.weights().iter().any(|&w| w <= 0.0);
        let omega = if smoothed {
            let k = omega.len() as f64;
            let eps = 1e-3;
            ProbabilityMeasure::from_unnormalized(
                omega.weights().iter().map(|w| (1.0 - eps) * w + eps / k).collect(),
            )?
        } else {
            omega
        };
        let theta = tree.scale(finest).theta(beta);
        let rec = recovery_sequence(fam, tree, finest, &omega, beta)?;
        let tr = trace_rate(&rec)?;
        let nu = full_chain_lift(&gen, &rec, &tr)?;
        (
            theta * rate(&gen, &nu)?.value,
            theta * tr.value,
            theta * rate(&gen, &rec.mu)?.value,
            smoothed,
        )
    };
    let all_zero = target <= ZERO_LEVEL_TOLERANCE && finest == tree.depth && finest > 0;
    let ratio = if all_zero || target == 0.0 { 1.0 } else { scaled / target };
    Ok(ExpansionReport {
        beta,
        finest_level: finest,
        terms,
        pointwise_value: pointwise,
        heuristic_sum: heuristic,
        target,
        scaled_value: scaled,
        scaled_trace_value: scaled_trace,
        scaled_value_at_recovery: scaled_rec,
        ratio,
        smoothed,
        scope: SCOPE,
    })
}
