use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use xlmimo::experiments::ModelSelection;
use xlmimo_cli::{resolve, run, CliError, Experiment, RawConfig};

/// Run XL-MIMO channel-model experiments and write CSV tables.
///
/// Configuration comes from a TOML file (or a previous run's JSON sidecar),
/// then flags, then `--set key=value` overrides in order. The thread count
/// follows XLMIMO_THREADS when set.
#[derive(Debug, Parser)]
#[command(name = "xlmimo", version)]
struct Args {
    /// corr-vs-m, corr-vs-dist, sinr-vs-m, snr-loss-heatmap or sumrate-vs-m
    #[arg(long, short)]
    experiment: Option<Experiment>,
    /// TOML config, or a JSON run sidecar
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; the sidecar goes next to it
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// pnusw, upw or both
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    my: Option<usize>,
    #[arg(long)]
    mz: Option<usize>,
    /// Reference SNR of every user in dB
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Override any config key with a TOML value, e.g. --set mz_list=[11,21]
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build(args: &Args) -> Result<RawConfig, CliError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::from_path(path)?,
        None => RawConfig::default(),
    };
    if let Some(e) = args.experiment {
        raw.experiment = Some(e);
    }
    if let Some(m) = &args.model {
        let model: ModelSelection = serde_json::from_value(serde_json::Value::String(m.clone()))
            .map_err(|_| CliError::Config(format!("unknown model `{m}`")))?;
        raw.model = Some(model);
    }
    raw.seed = args.seed.or(raw.seed);
    raw.out = args.out.clone().or(raw.out);
    raw.my = args.my.or(raw.my);
    raw.mz = args.mz.or(raw.mz);
    raw.drops = args.drops.or(raw.drops);
    if let Some(db) = args.snr_db {
        raw.snr_db = Some(db);
        raw.snr_db_per_user = None;
    }
    for assignment in &args.set {
        raw.set(assignment)?;
    }
    Ok(raw)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("XLMIMO_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("XLMIMO_THREADS: `{value}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("XLMIMO_THREADS: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let outcome = configure_threads()
        .and_then(|()| build(&args))
        .and_then(|raw| resolve(&raw))
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(summary) => {
            println!("wrote {} ({} rows) and {}", summary.csv.display(), summary.rows, summary.sidecar.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
