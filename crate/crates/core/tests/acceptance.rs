//! Acceptance harness: one PASS/FAIL line per criterion, non-zero exit on any failure.

#![allow(clippy::needless_range_loop)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use metachain::asymptotic::{AsymptoticScalar, RateFamily};
use metachain::ctmc::{
    extreme_stationary_states, simulate_empirical_measure, stationary_distribution, Generator, ProbabilityMeasure,
};
use metachain::gamma::{gamma_limsup_table, gamma_liminf_probe, MeasureSequence, Verdict};
use metachain::hierarchy::{build_tree, t1_check};
use metachain::operators::{harmonic_extension, tilt, trace, trace_with_order, TiltPotential};
use metachain::rate::{rate, rate_irreducible};
use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const TWO_STATE_TOL: f64 = 1e-8;
const ZERO_SET_TOL: f64 = 1e-9;
const BRUTE_FORCE_TOL: f64 = 1e-3;
/// Box half-width per unit of nesting depth; the grid uses `BRUTE_FORCE_BOX * (|V| - 1)`.
const BRUTE_FORCE_BOX: f64 = 8.0;
const ORDER_TOL: f64 = 1e-12;
const OPERATOR_TOL: f64 = 1e-10;
const TRANSFER_TOL: f64 = 1e-8;
const SYMBOLIC_REL_TOL: f64 = 1e-3;
const SYMBOLIC_BETA: f64 = 30.0;
const TREE_TOL: f64 = 1e-12;
const T1_TOL: f64 = 0.05;
const GAMMA_REL_TOL: f64 = 0.05;
const LIMINF_FRACTION: f64 = 0.9;
const PERTURBATION_TOL: f64 = 1e-3;
const ERGODIC_TOL: f64 = 0.05;
const SIGMA_BAND: f64 = 3.0;

const LEVEL2_TARGET: f64 = 0.042_893_218_813_452_5;
const TWO_STATE_TARGET: f64 = 0.085_786_437_626_905;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn two_state_closed_form() -> Check {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = r.random_range(0.1..10.0);
        let b = r.random_range(0.1..10.0);
        let m = r.random_range(0.02..0.98);
        let g = Generator::from_rows(&[vec![0.0, a], vec![b, 0.0]]).unwrap();
        let mu = ProbabilityMeasure::new(vec![m, 1.0 - m]).unwrap();
        let v = rate_irreducible(&g, &mu).map_err(|e| e.to_string())?.value;
        let exact = ((m * a).sqrt() - ((1.0 - m) * b).sqrt()).powi(2);
        worst = worst.max((v - exact).abs());
    }
    ensure(worst <= TWO_STATE_TOL, || format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.2e} over 20 triples"))
}

fn zero_set() -> Check {
    let mut r = rng(2);
    let (mut zeros, mut positives) = (0, 0);
    for i in 0..50 {
        let n = r.random_range(2..=6);
        let g = random_chain(&mut r, n, 0.45, 0.15, 0.2, 3.0);
        let extremes = extreme_stationary_states(&g);
        let parts: Vec<(f64, &ProbabilityMeasure)> =
            extremes.iter().map(|(_, m)| (r.random_range(0.1..1.0), m)).collect();
        let stat = ProbabilityMeasure::mixture(&parts).unwrap();
        let candidates = [stat, random_mixed_measure(&mut r, n), random_full_measure(&mut r, n)];
        for mu in &candidates {
            let v = rate(&g, mu).map_err(|e| format!("chain {i}: {e}"))?.value;
            let stationary = g.stationarity_defect(mu.weights()) <= ZERO_SET_TOL;
            ensure((v <= ZERO_SET_TOL) == stationary, || {
                format!("chain {i}: rate {v:e} but stationary = {stationary}")
            })?;
            if stationary {
                zeros += 1;
            } else {
                positives += 1;
            }
        }
    }
    Ok(format!("{zeros} stationary and {positives} non-stationary measures classified"))
}

fn brute_force() -> Check {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for i in 0..30 {
        let n = r.random_range(2..=4);
        let g = random_chain(&mut r, n, 0.6, 0.1, 0.1, 2.0);
        let mu = random_mixed_measure(&mut r, n);
        let v = rate(&g, &mu).map_err(|e| format!("chain {i}: {e}"))?.value;
        let oracle = grid_sup(&g, &mu, BRUTE_FORCE_BOX * (n - 1) as f64);
        let err = (v - oracle).abs();
        ensure(err <= BRUTE_FORCE_TOL, || format!("chain {i}: rate {v} vs grid {oracle}"))?;
        worst = worst.max(err);
    }
    Ok(format!("max gap {worst:.2e} over 30 chains"))
}

fn operator_identities() -> Check {
    let hand = Generator::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![2.0, 2.0, 0.0]]).unwrap();
    let t = trace(&hand, &[0, 1]).unwrap();
    ensure(t.rate(0, 1) == 0.5 && t.rate(1, 0) == 0.0, || "hand trace is not exact".into())?;

    let mut r = rng(4);
    let (mut order, mut commute, mut extension, mut nested, mut ineq_gap, mut identity) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..30 {
        let n = r.random_range(3..=6);
        let g = random_irreducible(&mut r, n, 0.4, 0.2, 3.0);
        let k = r.random_range(1..n);
        let a = random_subset(&mut r, n, k);
        let base = trace(&g, &a).unwrap();

        let mut rest: Vec<usize> = (0..n).filter(|z| !a.contains(z)).collect();
        rest.shuffle(&mut r);
        let other = trace_with_order(&g, &a, &rest).unwrap();
        order = order.max(max_abs_diff(&base, &other) / g.max_rate());

        let u: Vec<f64> = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
        let eu: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let v = harmonic_extension(&g, &a, &eu).unwrap();
        let lhs = trace(&tilt(&g, &TiltPotential::from_multiplicative(&v).unwrap()).unwrap(), &a).unwrap();
        let rhs = tilt(&base, &TiltPotential::new(u.clone(), 0).unwrap()).unwrap();
        commute = commute.max(max_abs_diff(&lhs, &rhs));

        let traced_u = apply(&base, &eu);
        let full = apply(&g, &v);
        for (i, &x) in a.iter().enumerate() {
            extension = extension.max((traced_u[i] - full[x]).abs());
        }

        if k + 1 < n {
            let mut b = a.clone();
            let extra: Vec<usize> = (0..n).filter(|z| !a.contains(z)).collect();
            b.push(*extra.choose(&mut r).unwrap());
            b.sort_unstable();
            let tb = trace(&g, &b).unwrap();
            let a_in_b: Vec<usize> = a.iter().map(|x| b.binary_search(x).unwrap()).collect();
            let vb = harmonic_extension(&tb, &a_in_b, &eu).unwrap();
            for (i, &x) in b.iter().enumerate() {
                nested = nested.max((vb[i] - v[x]).abs());
            }
            let composed = trace(&tb, &a_in_b).unwrap();
            order = order.max(max_abs_diff(&composed, &base) / g.max_rate());
        }

        let mu_a = random_full_measure(&mut r, k);
        let tr = rate_irreducible(&base, &mu_a).unwrap();
        let full_value = rate(&g, &mu_a.embed(n, &a)).unwrap().value;
        ineq_gap = ineq_gap.max(tr.value - full_value);
        let f = &tr.optimizer[0].potential;
        let ef: Vec<f64> = f.values().iter().map(|x| x.exp()).collect();
        let h = harmonic_extension(&g, &a, &ef).unwrap();
        let nu = stationary_distribution(&tilt(&g, &TiltPotential::from_multiplicative(&h).unwrap()).unwrap()).unwrap();
        let lifted = rate(&g, &nu).unwrap().value / nu.mass(&a);
        identity = identity.max((lifted - tr.value).abs());
    }
    ensure(order <= ORDER_TOL, || format!("order dependence {order:e}"))?;
    ensure(commute <= OPERATOR_TOL, || format!("commutation defect {commute:e}"))?;
    ensure(extension <= OPERATOR_TOL, || format!("trace action defect {extension:e}"))?;
    ensure(nested <= OPERATOR_TOL, || format!("nested extension defect {nested:e}"))?;
    ensure(ineq_gap <= TRANSFER_TOL, || format!("trace value exceeds full value by {ineq_gap:e}"))?;
    ensure(identity <= TRANSFER_TOL, || format!("lift identity defect {identity:e}"))?;
    Ok(format!(
        "order {order:.1e}, commutation {commute:.1e}, action {extension:.1e}, nested {nested:.1e}, lift {identity:.1e}"
    ))
}

fn random_exact(r: &mut rand_chacha::ChaCha8Rng) -> AsymptoticScalar {
    if r.random::<f64>() < 0.05 {
        return AsymptoticScalar::Zero;
    }
    AsymptoticScalar::exact(
        r.random_range(1..=9),
        r.random_range(1..=5),
        r.random_range(-6..=6),
        r.random_range(1..=3),
    )
}

fn semiring() -> Check {
    let mut r = rng(5);
    let zero = AsymptoticScalar::Zero;
    let one = AsymptoticScalar::one();
    for i in 0..10_000 {
        let (a, b, c) = (random_exact(&mut r), random_exact(&mut r), random_exact(&mut r));
        let laws = [
            a.add(&b) == b.add(&a),
            a.mul(&b) == b.mul(&a),
            a.add(&b).add(&c) == a.add(&b.add(&c)),
            a.mul(&b).mul(&c) == a.mul(&b.mul(&c)),
            a.mul(&b.add(&c)) == a.mul(&b).add(&a.mul(&c)),
            a.add(&zero) == a,
            a.mul(&one) == a,
            a.mul(&zero) == zero,
            b.is_zero() || a.mul(&b).div(&b).unwrap() == a,
        ];
        ensure(laws.iter().all(|&l| l), || format!("law broken at sample {i}: {a} {b} {c}"))?;
    }
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = r.random_range(2..=5);
        let fam = random_symbolic_irreducible(&mut r, n, 0.4);
        let sym = fam.symbolic_stationary().map_err(|e| format!("chain {i}: {e}"))?;
        let vals: Vec<f64> = sym.iter().map(|s| s.eval(SYMBOLIC_BETA).unwrap()).collect();
        let total: f64 = vals.iter().sum();
        let num = stationary_distribution(&fam.evaluate(SYMBOLIC_BETA).unwrap()).unwrap();
        for (x, v) in vals.iter().enumerate() {
            let rel = (v / total - num.get(x)).abs() / num.get(x);
            worst = worst.max(rel);
        }
    }
    ensure(worst <= SYMBOLIC_REL_TOL, || format!("symbolic vs numeric relative gap {worst:e}"))?;
    Ok(format!("10000 law samples exact; stationary relative gap {worst:.1e}"))
}

fn birth_death_tree() -> Check {
    let t = build_tree(&birth_death()).map_err(|e| e.to_string())?;
    ensure(t.depth == 2, || format!("depth {}", t.depth))?;
    let exps: Vec<String> = t.scales.iter().map(|s| s.theta_exp.to_string()).collect();
    ensure(exps == ["1", "2"], || format!("scale exponents {exps:?}"))?;
    let r1 = &t.scale(1).limit_rates;
    ensure(r1[(0, 1)] == 1.0 && r1[(1, 0)] == 1.0, || format!("level-1 rates {r1}"))?;
    let r2 = &t.scale(2).limit_rates;
    ensure(r2[(0, 1)] == 0.5 && r2[(1, 0)] == 1.0, || format!("level-2 rates {r2}"))?;
    let top = &t.level(3).measures[0];
    let err = (0..3).map(|x| (top.get(x) - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    ensure(err <= TREE_TOL, || format!("top equilibrium error {err:e}"))?;
    Ok("depth 2, scales (1, 2), limit rates (1, 1) and (1/2, 1)".into())
}

fn t1() -> Check {
    let f = birth_death();
    let t = build_tree(&f).unwrap();
    let mut worst: f64 = 0.0;
    for p in 1..=2 {
        for x in 0..3 {
            let tab = t1_check(&f, &t, p, 1.0, x, &[6.0, 9.0, 12.0]).map_err(|e| e.to_string())?;
            ensure(tab.non_increasing(1e-12), || format!("p={p} x={x} not monotone: {:?}", tab.rows))?;
            let last = tab.rows[2].deviation;
            ensure(last <= T1_TOL, || format!("p={p} x={x} deviation {last}"))?;
            worst = worst.max(last);
        }
    }
    Ok(format!("largest deviation at beta 12: {worst:.2e}"))
}

fn limsup() -> Check {
    let grid = [8.0, 12.0, 16.0, 20.0];
    let mut notes = Vec::new();
    for (name, f, p, target) in [
        ("birth-death p=2", birth_death(), 2, LEVEL2_TARGET),
        ("two-state p=1", two_state(), 1, TWO_STATE_TARGET),
    ] {
        let t = build_tree(&f).unwrap();
        let tab =
            gamma_limsup_table(&f, &t, p, &ProbabilityMeasure::uniform(2), &grid).map_err(|e| e.to_string())?;
        ensure((tab.target - target).abs() <= 1e-9, || format!("{name}: target {}", tab.target))?;
        let last = tab.rows.last().unwrap();
        ensure((last.value - target).abs() <= GAMMA_REL_TOL * target, || {
            format!("{name}: final value {} vs {target}", last.value)
        })?;
        ensure(tab.verdict == Verdict::Pass, || format!("{name}: verdict {:?}", tab.verdict))?;
        ensure(tab.transfer_ok, || format!("{name}: full-chain lift exceeds the trace value"))?;
        notes.push(format!("{name} ratio {:.4}", last.ratio));
    }
    Ok(notes.join(", "))
}

fn liminf() -> Check {
    let grid = [8.0, 12.0, 16.0, 20.0];
    let cases: [(&str, RateFamily, usize, ProbabilityMeasure, Verdict); 3] = [
        ("transient state", transient_family(), 1, ProbabilityMeasure::dirac(3, 2), Verdict::Diverges),
        ("off-mixture", birth_death(), 2, ProbabilityMeasure::dirac(3, 0), Verdict::Diverges),
        (
            "representable",
            birth_death(),
            2,
            ProbabilityMeasure::new(vec![0.25, 0.25, 0.5]).unwrap(),
            Verdict::BoundedBelow,
        ),
    ];
    let mut notes = Vec::new();
    for (name, f, p, mu, expected) in cases {
        let t = build_tree(&f).unwrap();
        let tab = gamma_liminf_probe(&f, &t, p, &MeasureSequence::Fixed(mu), &grid).map_err(|e| e.to_string())?;
        ensure(tab.verdict == expected, || format!("{name}: {:?} rows {:?}", tab.verdict, tab.rows))?;
        if let Some(target) = tab.target.finite() {
            let last = tab.rows.last().unwrap().value;
            ensure(last >= LIMINF_FRACTION * target, || format!("{name}: {last} below bound"))?;
        }
        notes.push(format!("{name} {}", tab.verdict.as_str()));
    }
    Ok(notes.join(", "))
}

fn perturbation() -> Check {
    let mut r = rng(10);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let n = r.random_range(3..=5);
        let g = random_irreducible(&mut r, n, 0.3, 0.2, 3.0);
        let mu = random_full_measure(&mut r, n);
        let limit = rate(&g, &mu).unwrap().value;
        let mut gaps = Vec::new();
        for k in 1..=4 {
            let eps = 10f64.powi(-k);
            let m = DMatrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { g.rate(x, y) + eps });
            let gn = Generator::new(labels(n), m).unwrap();
            gaps.push((rate(&gn, &mu).map_err(|e| e.to_string())?.value - limit).abs());
        }
        ensure(gaps.windows(2).all(|w| w[1] <= w[0]), || format!("case {i}: gaps {gaps:?} not decreasing"))?;
        let last = *gaps.last().unwrap();
        ensure(last <= PERTURBATION_TOL, || format!("case {i}: final gap {last:e}"))?;
        worst = worst.max(last);
    }
    Ok(format!("largest gap at n=1e4: {worst:.2e}"))
}

fn ergodic() -> Check {
    let two = Generator::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let mut r = rng(11);
    let four = random_irreducible(&mut r, 4, 0.4, 0.5, 2.0);
    let closed = Generator::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let mut worst_band: f64 = 0.0;
    for (g, check_sup) in [(&two, true), (&four, false)] {
        let pi = stationary_distribution(g).unwrap();
        let n = g.n_states();
        let samples: Vec<ProbabilityMeasure> = (0..200)
            .map(|seed| simulate_empirical_measure(g, 0, 1e4, seed).unwrap())
            .collect();
        for x in 0..n {
            let vals: Vec<f64> = samples.iter().map(|m| m.get(x)).collect();
            let mean = vals.iter().sum::<f64>() / 200.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 199.0;
            let se = (var / 200.0).sqrt();
            let z = (mean - pi.get(x)).abs() / se;
            ensure(z <= SIGMA_BAND, || format!("state {x}: mean {mean} vs {} ({z:.2} sigma)", pi.get(x)))?;
            worst_band = worst_band.max(z);
        }
        if check_sup {
            let sup = samples.iter().map(|m| m.sup_distance(&pi)).fold(0.0, f64::max);
            ensure(sup <= ERGODIC_TOL, || format!("two-state sup distance {sup}"))?;
        }
    }
    for seed in 0..200 {
        let m = simulate_empirical_measure(&closed, 1, 5.0, seed).unwrap();
        ensure(m.weights() == [0.0, 1.0], || format!("seed {seed}: closed singleton gives {:?}", m.weights()))?;
    }
    let short = 0.1;
    let mean: f64 = (0..100).map(|s| simulate_empirical_measure(&two, 0, short, s).unwrap().get(0)).sum::<f64>() / 100.0;
    ensure(mean >= (-short).exp() - 0.05, || format!("short-time mass {mean}"))?;
    Ok(format!("worst deviation {worst_band:.2} sigma over 200 seeds"))
}

/// Number, name, check, runtime budget in seconds.
type Criterion = (u32, &'static str, fn() -> Check, Option<u64>);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "two-state closed form", two_state_closed_form, Some(1)),
        (2, "zero set of the rate functional", zero_set, None),
        (3, "decomposition against brute force", brute_force, None),
        (4, "operator identities", operator_identities, Some(10)),
        (5, "semiring laws and symbolic stationary", semiring, None),
        (6, "hierarchy of the birth-death family", birth_death_tree, Some(5)),
        (7, "convergence of the accelerated laws", t1, None),
        (8, "recovery-sequence upper bound", limsup, Some(60)),
        (9, "lower-bound probes", liminf, None),
        (10, "perturbed functionals", perturbation, None),
        (11, "ergodic sanity of the simulator", ergodic, None),
    ];
    let mut failed = 0;
    for (id, name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(s)) if elapsed > Duration::from_secs(s) => {
                Err(format!("took {:.2} s, budget {s} s", elapsed.as_secs_f64()))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail} [{:.2} s]", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {name}: {detail} [{:.2} s]", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
