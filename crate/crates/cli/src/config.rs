//! Command-line arguments and their resolution into a run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "metachain", version, about = "Metastable hierarchies and rate functionals of finite Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Analyze,
    Rate,
    GammaCheck,
    LiminfProbe,
    T1Check,
    Simulate,
    Trace,
    Expansion,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the metastable hierarchy of a symbolic family.
    Analyze(Common),
    /// Rate functional at a measure.
    Rate(Common),
    /// Upper-bound table along the recovery sequence.
    GammaCheck(Common),
    /// Lower-bound probe along a fixed or smoothed sequence.
    LiminfProbe(Common),
    /// Convergence of the accelerated laws to the limit mixture.
    T1Check(Common),
    /// Empirical measure of a simulated path.
    Simulate(Common),
    /// Trace of the chain on a subset, as a chain spec.
    Trace(Common),
    /// Level expansion of the rate functional at one beta.
    Expansion(Common),
}

impl Command {
    pub fn split(self) -> (CommandKind, Common) {
        match self {
            Command::Analyze(c) => (CommandKind::Analyze, c),
            Command::Rate(c) => (CommandKind::Rate, c),
            Command::GammaCheck(c) => (CommandKind::GammaCheck, c),
            Command::LiminfProbe(c) => (CommandKind::LiminfProbe, c),
            Command::T1Check(c) => (CommandKind::T1Check, c),
            Command::Simulate(c) => (CommandKind::Simulate, c),
            Command::Trace(c) => (CommandKind::Trace, c),
            Command::Expansion(c) => (CommandKind::Expansion, c),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Chain spec file (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Value of beta for symbolic rates.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Inclusive grid `start:stop:step`.
    #[arg(long = "beta-grid")]
    pub beta_grid: Option<String>,
    /// Hierarchy level.
    #[arg(long)]
    pub level: Option<usize>,
    /// Measure: `0.5,0.5`, a JSON array, `{"pi": [[p, j, w], ...]}`, or a file holding either.
    #[arg(long)]
    pub measure: Option<String>,
    /// Class weights at the chosen level, comma separated.
    #[arg(long)]
    pub omega: Option<String>,
    /// Push the measure towards uniform as `(1 - 1/beta) mu + (1/beta) uniform`.
    #[arg(long)]
    pub smooth: bool,
    /// Time horizon (simulation) or time in units of the level scale (t1-check).
    #[arg(long)]
    pub time: Option<f64>,
    /// State label (start of a simulation, or the state examined by t1-check).
    #[arg(long)]
    pub state: Option<String>,
    /// Comma-separated state labels kept by `trace`.
    #[arg(long)]
    pub subset: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Measure as requested on the command line, before resolution against a chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureArg {
    Weights(Vec<f64>),
    /// `(level, class, weight)`, classes counted from 1.
    Mixture(Vec<(usize, usize, f64)>),
}

/// Fully resolved configuration, embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input_path: String,
    pub beta: Option<f64>,
    pub beta_grid: Option<Vec<f64>>,
    pub level: Option<usize>,
    pub measure: Option<MeasureArg>,
    pub omega: Option<Vec<f64>>,
    pub smooth: bool,
    pub time: Option<f64>,
    pub state: Option<String>,
    pub subset: Option<Vec<String>>,
    pub seed: u64,
    pub output_path: Option<String>,
    pub format: Format,
}

impl RunConfig {
    pub fn resolve(command: CommandKind, c: Common) -> Result<Self> {
        let default_grid = match command {
            CommandKind::GammaCheck | CommandKind::LiminfProbe => Some("8:20:4"),
            CommandKind::T1Check => Some("6:12:3"),
            _ => None,
        };
        let beta_grid = match c.beta_grid.as_deref().or(default_grid) {
            Some(g) => Some(parse_grid(g).with_context(|| format!("--beta-grid {g}"))?),
            None => None,
        };
        if let Some(b) = c.beta {
            ensure!(b.is_finite() && b >= 0.0, "--beta must be a finite non-negative number, got {b}");
        }
        if let Some(t) = c.time {
            ensure!(t.is_finite() && t > 0.0, "--time must be positive, got {t}");
        }
        let measure = c
            .measure
            .as_deref()
            .map(|m| parse_measure(m).with_context(|| format!("--measure {m}")))
            .transpose()?;
        let omega = c
            .omega
            .as_deref()
            .map(|m| parse_vector(m).with_context(|| format!("--omega {m}")))
            .transpose()?;
        let subset = c.subset.as_deref().map(|s| {
            s.split(',')
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect::<Vec<_>>()
        });
        Ok(Self {
            command,
            input_path: c.input.display().to_string(),
            beta: c.beta,
            beta_grid,
            level: c.level,
            measure,
            omega,
            smooth: c.smooth,
            time: c.time,
            state: c.state,
            subset,
            seed: c.seed,
            output_path: c.out.as_ref().map(|p| p.display().to_string()),
            format: c.format,
        })
    }

    pub fn require_beta(&self) -> Result<f64> {
        self.beta.context("--beta is required for this command")
    }

    pub fn require_level(&self) -> Result<usize> {
        self.level.context("--level is required for this command")
    }

    pub fn grid(&self) -> Result<&[f64]> {
        self.beta_grid.as_deref().context("--beta-grid is required for this command")
    }
}

/// `start:stop:step`, inclusive of `stop` when it lies on the grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 3, "expected start:stop:step");
    let num = |p: &str| -> Result<f64> {
        let v: f64 = p.trim().parse().with_context(|| format!("{p:?} is not a number"))?;
        ensure!(v.is_finite(), "{p:?} is not finite");
        Ok(v)
    };
    let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    ensure!(step > 0.0, "step must be positive");
    ensure!(b >= a, "stop must not be below start");
    ensure!(a >= 0.0, "beta must be non-negative");
    let count = ((b - a) / step + 1e-9).floor() as usize;
    ensure!(count < 100_000, "grid has too many points");
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let t = s.trim();
    let v: Vec<f64> = if t.starts_with('[') {
        serde_json::from_str(t).context("not a JSON array of numbers")?
    } else {
        t.split(',')
            .map(|x| x.trim().parse::<f64>().with_context(|| format!("{x:?} is not a number")))
            .collect::<Result<_>>()?
    };
    ensure!(!v.is_empty(), "empty vector");
    Ok(v)
}

fn parse_measure_json(v: &Value) -> Result<MeasureArg> {
    match v {
        Value::Array(_) => Ok(MeasureArg::Weights(serde_json::from_value(v.clone()).context("not an array of numbers")?)),
        Value::Object(o) => {
            let pi = o.get("pi").context("mixture object needs a \"pi\" field")?;
            let rows: Vec<(f64, f64, f64)> =
                serde_json::from_value(pi.clone()).context("\"pi\" must hold [level, class, weight] triples")?;
            let mut out = Vec::new();
            for (p, j, w) in rows {
                ensure!(p.fract() == 0.0 && p >= 1.0, "level {p} is not a positive integer");
                ensure!(j.fract() == 0.0 && j >= 1.0, "class {j} is not a positive integer");
                ensure!(w >= 0.0 && w.is_finite(), "weight {w} is not a non-negative number");
                out.push((p as usize, j as usize, w));
            }
            ensure!(!out.is_empty(), "\"pi\" is empty");
            Ok(MeasureArg::Mixture(out))
        }
        other => bail!("unsupported measure value {other}"),
    }
}

pub fn parse_measure(s: &str) -> Result<MeasureArg> {
    let t = s.trim();
    if t.starts_with('{') || t.starts_with('[') {
        let v: Value = serde_json::from_str(t).context("invalid JSON")?;
        return parse_measure_json(&v);
    }
    if Path::new(t).is_file() {
        let text = std::fs::read_to_string(t).with_context(|| format!("cannot read {t}"))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("{t} is not valid JSON"))?;
        return parse_measure_json(&v);
    }
    Ok(MeasureArg::Weights(parse_vector(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("8:20:4").unwrap(), vec![8.0, 12.0, 16.0, 20.0]);
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("1:2:5").unwrap(), vec![1.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("3:1:1").is_err());
        assert!(parse_grid("1:3:0").is_err());
    }

    #[test]
    fn measures() {
        assert_eq!(parse_measure("0.5, 0.5").unwrap(), MeasureArg::Weights(vec![0.5, 0.5]));
        assert_eq!(parse_measure("[0.25,0.75]").unwrap(), MeasureArg::Weights(vec![0.25, 0.75]));
        assert_eq!(
            parse_measure(r#"{"pi": [[2, 1, 0.5], [2, 2, 0.5]]}"#).unwrap(),
            MeasureArg::Mixture(vec![(2, 1, 0.5), (2, 2, 0.5)])
        );
        assert!(parse_measure(r#"{"pi": [[0, 1, 1]]}"#).is_err());
        assert!(parse_measure("a,b").is_err());
    }
}
