use anyhow::{bail, ensure, Context, Result};
use metachain::asymptotic::RateFamily;
use metachain::ctmc::{build_generator, simulate_empirical_measure, ChainSpec, Edge, Generator, ProbabilityMeasure, RateExpr};
use metachain::gamma::{
    decompose_measure, expansion_residual, gamma_limsup_table, gamma_liminf_probe, MeasureSequence,
};
use metachain::hierarchy::{build_tree, t1_check, HierarchyTree};
use metachain::operators::trace;
use metachain::rate::rate;
use serde_json::{json, Value};

use crate::config::{CommandKind, Format, MeasureArg, RunConfig};

/// Result of a command: the JSON payload and, for tabular commands, CSV rows.
pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
    /// Top-level fields merged into the report (used by `trace` to stay re-ingestible).
    pub merged: Option<Value>,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Outcome {
    fn json(result: Value) -> Self {
        Self { result, table: None, merged: None }
    }
}

fn load_spec(cfg: &RunConfig) -> Result<ChainSpec> {
    let text = std::fs::read_to_string(&cfg.input_path).with_context(|| format!("cannot read --input {}", cfg.input_path))?;
    ChainSpec::from_json(&text).with_context(|| format!("--input {}", cfg.input_path))
}

fn state_index(spec: &ChainSpec, label: &str, flag: &str) -> Result<usize> {
    spec.index_of(label).with_context(|| format!("{flag} {label}: no such state"))
}

fn resolve_measure(arg: &MeasureArg, n: usize, tree: Option<&HierarchyTree>) -> Result<ProbabilityMeasure> {
    match arg {
        MeasureArg::Weights(w) => {
            ensure!(w.len() == n, "--measure has {} weights for {n} states", w.len());
            ProbabilityMeasure::new(w.clone()).context("--measure")
        }
        MeasureArg::Mixture(parts) => {
            let tree = tree.context("--measure mixtures need a symbolic family to build the hierarchy")?;
            let mut w = vec![0.0; n];
            for &(p, j, weight) in parts {
                ensure!(
                    p >= 1 && p <= tree.levels.len(),
                    "--measure: level {p} outside 1..={}",
                    tree.levels.len()
                );
                let lvl = tree.level(p);
                ensure!(j >= 1 && j <= lvl.n_sets(), "--measure: level {p} has no class {j}");
                for (x, v) in w.iter_mut().enumerate() {
                    *v += weight * lvl.measures[j - 1].get(x);
                }
            }
            ProbabilityMeasure::new(w).context("--measure mixture weights")
        }
    }
}

fn family_and_tree(spec: &ChainSpec) -> Result<(RateFamily, HierarchyTree)> {
    let fam = RateFamily::from_spec(spec)?;
    let tree = build_tree(&fam)?;
    Ok((fam, tree))
}

fn require_measure(cfg: &RunConfig) -> Result<&MeasureArg> {
    cfg.measure.as_ref().context("--measure is required for this command")
}

fn numeric_spec(g: &Generator) -> Result<ChainSpec> {
    let n = g.n_states();
    let mut edges = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if g.rate(x, y) > 0.0 {
                edges.push(Edge { from: x, to: y, rate: RateExpr::Numeric(g.rate(x, y)) });
            }
        }
    }
    Ok(ChainSpec::new(g.labels().to_vec(), edges)?)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let spec = load_spec(cfg)?;
    let n = spec.n_states();
    let tabular = matches!(
        cfg.command,
        CommandKind::GammaCheck | CommandKind::LiminfProbe | CommandKind::T1Check | CommandKind::Simulate
    );
    if cfg.format == Format::Csv && !tabular {
        bail!("--format csv is available for gamma-check, liminf-probe, t1-check and simulate only");
    }
    match cfg.command {
        CommandKind::Analyze => {
            let (fam, tree) = family_and_tree(&spec)?;
            let mut v = tree.to_json();
            v["order_one_edge"] = json!(fam.has_order_one_edge());
            Ok(Outcome::json(v))
        }
        CommandKind::Rate => {
            let gen = build_generator(&spec, cfg.beta)?;
            let tree = if matches!(cfg.measure, Some(MeasureArg::Mixture(_))) {
                Some(family_and_tree(&spec)?.1)
            } else {
                None
            };
            let mu = resolve_measure(require_measure(cfg)?, n, tree.as_ref())?;
            let report = rate(&gen, &mu)?;
            Ok(Outcome::json(json!({ "states": spec.states(), "measure": mu, "report": report })))
        }
        CommandKind::GammaCheck => {
            let (fam, tree) = family_and_tree(&spec)?;
            let p = cfg.require_level()?;
            ensure!(p >= 1 && p <= tree.depth, "--level {p} outside 1..={}", tree.depth);
            let k = tree.level(p).n_sets();
            let omega = if let Some(w) = &cfg.omega {
                ensure!(w.len() == k, "--omega has {} weights for {k} classes at level {p}", w.len());
                ProbabilityMeasure::new(w.clone()).context("--omega")?
            } else if let Some(m) = &cfg.measure {
                let mu = resolve_measure(m, n, Some(&tree))?;
                decompose_measure(&tree, p, &mu)?
                    .omega
                    .with_context(|| format!("--measure is not a mixture of the level-{p} equilibria"))?
            } else {
                ProbabilityMeasure::uniform(k)
            };
            let tab = gamma_limsup_table(&fam, &tree, p, &omega, cfg.grid()?)?;
            let rows = tab.to_csv_rows().into_iter().map(|r| r.to_vec()).collect();
            Ok(Outcome {
                result: serde_json::to_value(&tab)?,
                table: Some(Table { header: vec!["beta", "value", "target", "ratio", "verdict"], rows }),
                merged: None,
            })
        }
        CommandKind::LiminfProbe => {
            let (fam, tree) = family_and_tree(&spec)?;
            let p = cfg.require_level()?;
            ensure!(p >= 1 && p <= tree.depth, "--level {p} outside 1..={}", tree.depth);
            let mu = resolve_measure(require_measure(cfg)?, n, Some(&tree))?;
            let seq = if cfg.smooth { MeasureSequence::Smoothed(mu) } else { MeasureSequence::Fixed(mu) };
            let tab = gamma_liminf_probe(&fam, &tree, p, &seq, cfg.grid()?)?;
            let rows = tab
                .rows
                .iter()
                .map(|r| vec![fmt(r.beta), fmt(r.theta), fmt(r.value), tab.verdict.as_str().to_string()])
                .collect();
            Ok(Outcome {
                result: serde_json::to_value(&tab)?,
                table: Some(Table { header: vec!["beta", "theta", "value", "verdict"], rows }),
                merged: None,
            })
        }
        CommandKind::T1Check => {
            let (fam, tree) = family_and_tree(&spec)?;
            let p = cfg.require_level()?;
            ensure!(p >= 1 && p <= tree.depth, "--level {p} outside 1..={}", tree.depth);
            let t = cfg.time.unwrap_or(1.0);
            let states: Vec<usize> = match &cfg.state {
                Some(s) => vec![state_index(&spec, s, "--state")?],
                None => (0..n).collect(),
            };
            let mut tables = Vec::new();
            let mut rows = Vec::new();
            for x in states {
                let tab = t1_check(&fam, &tree, p, t, x, cfg.grid()?)?;
                for r in &tab.rows {
                    rows.push(vec![tab.state.clone(), fmt(r.beta), fmt(r.deviation), fmt(r.intermediate_deviation)]);
                }
                tables.push(tab);
            }
            Ok(Outcome {
                result: json!({ "tables": tables }),
                table: Some(Table { header: vec!["state", "beta", "deviation", "intermediate_deviation"], rows }),
                merged: None,
            })
        }
        CommandKind::Simulate => {
            let gen = build_generator(&spec, cfg.beta)?;
            let x0 = match &cfg.state {
                Some(s) => state_index(&spec, s, "--state")?,
                None => 0,
            };
            let t = cfg.time.context("--time is required for simulate")?;
            let m = simulate_empirical_measure(&gen, x0, t, cfg.seed)?;
            let rows = spec
                .states()
                .iter()
                .zip(m.weights())
                .map(|(s, w)| vec![s.clone(), fmt(*w)])
                .collect();
            Ok(Outcome {
                result: json!({ "states": spec.states(), "empirical_measure": m }),
                table: Some(Table { header: vec!["state", "weight"], rows }),
                merged: None,
            })
        }
        CommandKind::Trace => {
            let labels = cfg.subset.as_ref().context("--subset is required for trace")?;
            ensure!(!labels.is_empty(), "--subset is empty");
            let mut keep = labels
                .iter()
                .map(|l| state_index(&spec, l, "--subset"))
                .collect::<Result<Vec<_>>>()?;
            keep.sort_unstable();
            keep.dedup();
            let out = if spec.has_symbolic() && cfg.beta.is_none() {
                RateFamily::from_spec(&spec)?.symbolic_trace(&keep)?.to_spec()
            } else {
                numeric_spec(&trace(&build_generator(&spec, cfg.beta)?, &keep)?)?
            };
            let v: Value = serde_json::from_str(&out.to_json())?;
            Ok(Outcome { result: json!({ "kept": out.states() }), table: None, merged: Some(v) })
        }
        CommandKind::Expansion => {
            let (fam, tree) = family_and_tree(&spec)?;
            let beta = cfg.require_beta()?;
            let mu = resolve_measure(require_measure(cfg)?, n, Some(&tree))?;
            let r = expansion_residual(&fam, &tree, &mu, beta)?;
            Ok(Outcome::json(serde_json::to_value(&r)?))
        }
    }
}
