//! CSV and echo files. Every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::{BatchResult, ExperimentConfig, GridCell};
use crate::bundle::fmt_f64;
use crate::error::{Error, Result};

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Long format: one row per `(policy, t)`.
pub fn write_timeseries(path: &Path, batch: Option<&BatchResult>) -> Result<()> {
    let mut s = String::from("policy,t,mean,variance\n");
    if let Some(b) = batch {
        for p in &b.policies {
            for (k, t) in b.times.iter().enumerate() {
                writeln!(
                    s,
                    "{},{},{},{}",
                    p.policy.name(),
                    fmt_f64(*t),
                    fmt_f64(p.mean[k]),
                    fmt_f64(p.variance[k])
                )
                .unwrap();
            }
        }
    }
    write(path, &s)
}

pub fn write_heatmap(path: &Path, cells: &[GridCell]) -> Result<()> {
    let mut s = String::from("kind,d0,lambda,mean_terminal_ratio\n");
    for c in cells {
        writeln!(
            s,
            "{},{},{},{}",
            c.kind,
            fmt_f64(c.d0),
            fmt_f64(c.lambda),
            fmt_f64(c.mean_terminal_ratio())
        )
        .unwrap();
    }
    write(path, &s)
}

/// Per-trial terminal ratios behind every heat-map mean.
pub fn write_trials(path: &Path, cells: &[GridCell], batch: Option<&BatchResult>) -> Result<()> {
    let mut s = String::from("source,kind,d0,lambda,trial,terminal_ratio\n");
    if let Some(b) = batch {
        for p in &b.policies {
            for (i, r) in p.ratios.iter().enumerate() {
                writeln!(
                    s,
                    "{},{},{},{},{i},{}",
                    p.policy.name(),
                    b.kind,
                    fmt_f64(b.d0),
                    fmt_f64(p.lambda),
                    fmt_f64(*r)
                )
                .unwrap();
            }
        }
    }
    for c in cells {
        for (i, r) in c.ratios.iter().enumerate() {
            writeln!(
                s,
                "grid,{},{},{},{i},{}",
                c.kind,
                fmt_f64(c.d0),
                fmt_f64(c.lambda),
                fmt_f64(*r)
            )
            .unwrap();
        }
    }
    write(path, &s)
}

pub fn write_config_echo(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write(path, &cfg.echo())
}

/// Writes `timeseries.csv`, `heatmap.csv`, `config.echo` and, on request,
/// `trials.csv` into `out_dir`.
pub fn emit_results(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    batch: Option<&BatchResult>,
    cells: &[GridCell],
    dump_trials: bool,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_timeseries(&out_dir.join("timeseries.csv"), batch)?;
    write_heatmap(&out_dir.join("heatmap.csv"), cells)?;
    write_config_echo(&out_dir.join("config.echo"), cfg)?;
    if dump_trials {
        write_trials(&out_dir.join("trials.csv"), cells, batch)?;
    }
    Ok(())
}
