//! Executing a resolved configuration and writing its outputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use xlmimo::experiments::{self, SweepResult};

use crate::config::{Plan, RawConfig, RunConfig};
use crate::CliError;

/// Run the configured experiment and return the table in linear units.
pub fn execute(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let p = &cfg.transmit_snr;
    let result = match &cfg.plan {
        Plan::CorrVsM { users, mz_list } => {
            experiments::sweep_correlation_vs_m(&cfg.geometry, &users[0], &users[1], mz_list, &cfg.upw, cfg.model)?
        }
        Plan::CorrVsDist { user1, direction2, r2_list } => {
            experiments::sweep_correlation_vs_distance(&cfg.geometry, user1, *direction2, r2_list, &cfg.upw, cfg.model)?
        }
        Plan::SinrVsM { users, mz_list } => {
            experiments::sweep_sinr_vs_m(&cfg.geometry, [&users[0], &users[1]], [p[0], p[1]], mz_list, &cfg.upw, cfg.model)?
        }
        Plan::SnrLossHeatmap { user1, grid } => {
            experiments::heatmap_snr_loss(&cfg.geometry, user1, grid, [p[0], p[1]], &cfg.upw, cfg.model)?
        }
        Plan::SumrateVsM { region, drops, arrays, .. } => {
            experiments::sumrate_vs_m(&cfg.geometry, region, p, arrays, &cfg.upw, cfg.seed, *drops, cfg.model)?
        }
    };
    Ok(result)
}

/// Shortest round-trip text; exponent form for very small or large values.
fn format_value(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        String::new()
    } else if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// CSV text: axis columns, then metric columns converted to their units.
/// Missing cells are empty; lines end in `\n`.
pub fn render_csv(result: &SweepResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header = result.axes.iter().cloned().chain(result.columns.iter().map(|c| c.name()));
    w.write_record(header).map_err(csv_err)?;
    for row in &result.rows {
        let axis = row.axis.iter().map(|&v| format_value(v));
        let values = row.values.iter().zip(&result.columns).map(|(&v, c)| format_value(c.unit.render(v)));
        w.write_record(axis.chain(values)).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

/// Sidecar path next to the CSV: `out.csv` becomes `out.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let candidate = out.with_extension("json");
    if candidate == out {
        out.with_extension("run.json")
    } else {
        candidate
    }
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    experiment: String,
    seed: u64,
    threads: usize,
    wall_time_s: f64,
    rows: usize,
    columns: Vec<String>,
    metadata: &'a std::collections::BTreeMap<String, String>,
    config: &'a RawConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub rows: usize,
    pub wall_time_s: f64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Write the CSV and its JSON sidecar. Each file is replaced atomically.
pub fn write_outputs(cfg: &RunConfig, result: &SweepResult, wall_time_s: f64) -> Result<RunSummary, CliError> {
    let csv = render_csv(result)?;
    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.to_string(),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        wall_time_s,
        rows: result.rows.len(),
        columns: result.axes.iter().cloned().chain(result.columns.iter().map(|c| c.name())).collect(),
        metadata: &result.metadata,
        config: &cfg.resolved,
    };
    let mut json = serde_json::to_vec_pretty(&sidecar).map_err(|e| CliError::Config(format!("sidecar: {e}")))?;
    json.push(b'\n');
    let side_path = sidecar_path(&cfg.out);
    write_atomic(&cfg.out, &csv)?;
    write_atomic(&side_path, &json)?;
    Ok(RunSummary { csv: cfg.out.clone(), sidecar: side_path, rows: result.rows.len(), wall_time_s })
}

/// Execute and write outputs.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let result = execute(cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{}: {} rows in {:.3} s", cfg.experiment, result.rows.len(), elapsed);
    write_outputs(cfg, &result, elapsed)
}
