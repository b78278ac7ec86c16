mod commands;
mod config;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use metachain::ctmc::{MASS_TOLERANCE, SUPPORT_THRESHOLD, UNIFORMIZATION_CAP};
use metachain::gamma::{REPRESENTATION_TOLERANCE, TABLE_TOLERANCE, ZERO_LEVEL_TOLERANCE};
use metachain::rate::{EL_TOLERANCE, IDENTITY_TOLERANCE, MAX_ITERATIONS, STEP_GUARD};
use serde_json::{json, Map, Value};

use commands::{run, Outcome};
use config::{Cli, Format, RunConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn tolerances() -> Value {
    json!({
        "mass": MASS_TOLERANCE,
        "support": SUPPORT_THRESHOLD,
        "euler_lagrange": EL_TOLERANCE,
        "identity": IDENTITY_TOLERANCE,
        "max_iterations": MAX_ITERATIONS,
        "step_guard": STEP_GUARD,
        "representation": REPRESENTATION_TOLERANCE,
        "table_relative": TABLE_TOLERANCE,
        "zero_level": ZERO_LEVEL_TOLERANCE,
        "uniformization_cap": UNIFORMIZATION_CAP,
    })
}

fn header(cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), serde_json::to_value(cfg.command).expect("command serializes"));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m.insert("tolerances".into(), tolerances());
    m
}

fn render(cfg: &RunConfig, out: Outcome) -> Result<Vec<u8>> {
    if cfg.format == Format::Csv {
        let table = out.table.context("no table for this command")?;
        let mut buf = Vec::new();
        writeln!(buf, "# config {}", serde_json::to_string(cfg)?)?;
        writeln!(buf, "# tolerances {}", serde_json::to_string(&tolerances())?)?;
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        return w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"));
    }
    let mut m = header(cfg);
    if let Some(Value::Object(extra)) = out.merged {
        for (k, v) in extra {
            m.insert(k, v);
        }
    }
    m.insert("result".into(), out.result);
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(m))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().context("--out has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("cannot move report to {}", path.display()))?;
    Ok(())
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<()> {
    match &cfg.output_path {
        Some(p) => write_atomic(Path::new(p), bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn is_numerical(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<metachain::Error>(),
            Some(metachain::Error::NoConvergence { .. } | metachain::Error::StepCap { .. })
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = cli.command.split();
    let cfg = match RunConfig::resolve(kind, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let outcome = run(&cfg).and_then(|o| render(&cfg, o));
    match outcome {
        Ok(bytes) => match emit(&cfg, &bytes) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_VALIDATION)
            }
        },
        Err(e) if is_numerical(&e) => {
            eprintln!("error: {e:#}");
            let mut m = header(&cfg);
            m.insert("error".into(), json!({ "kind": "numerical", "message": format!("{e:#}") }));
            m.insert("result".into(), Value::Null);
            let mut bytes = serde_json::to_vec_pretty(&Value::Object(m)).expect("report serializes");
            bytes.push(b'\n');
            if let Err(w) = emit(&cfg, &bytes) {
                eprintln!("error: {w:#}");
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
