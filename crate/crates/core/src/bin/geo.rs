use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pathgeo::experiment::{self, Experiment, ExperimentConfig, Overrides};
use pathgeo::GeoError;

/// Run a transport-geometry experiment and write a JSON or CSV report.
///
/// Exit status: 0 when every check passes, 1 when a check fails or the
/// numerics break down, 2 for configuration and input errors.
#[derive(Parser, Debug)]
#[command(name = "geo", version)]
struct Cli {
    /// axioms | expansion | torsion | curvature | pentagon | holonomy | bianchi | flatness | sweep
    experiment: Experiment,
    /// JSON configuration file (schema 1)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model, e.g. `flat{2,2}`, `sphere`, `torsion_plane{0.25}`, `frame{rotation}`
    #[arg(long)]
    model: Option<String>,
    /// Report path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Integrator steps per unit parameter length
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, GeoError> {
    let overrides = Overrides {
        experiment: Some(cli.experiment),
        model: cli.model.clone(),
        out: cli.out.clone(),
        format: cli.format.as_deref().map(str::parse).transpose()?,
        steps: cli.steps,
        fd_step: cli.fd_step,
        seed: cli.seed,
    };
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                GeoError::Configuration(format!("cannot read {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text, &overrides).map_err(|e| match e {
                GeoError::Configuration(msg) => {
                    GeoError::Configuration(format!("{}: {msg}", path.display()))
                }
                other => other,
            })
        }
        None => ExperimentConfig::from_overrides(&overrides),
    }
}

fn init_threads() -> Result<(), GeoError> {
    if let Ok(v) = std::env::var("GEO_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| GeoError::Configuration(format!("GEO_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(GeoError::Configuration("GEO_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| GeoError::Configuration(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match init_threads().and_then(|_| load(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("geo: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match experiment::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("geo: {e}");
            let code = if experiment::is_configuration_error(&e) { 2 } else { 1 };
            return ExitCode::from(code);
        }
    };
    let text = report.render(config.output.format);
    match &config.output.path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("geo: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }

    let failed = report.failed_checks();
    eprintln!(
        "geo {} on {}: {} checks, {} failed ({:.0} ms)",
        report.body.experiment,
        report.body.model,
        report.body.checks.len(),
        failed.len(),
        report.header.elapsed_ms
    );
    for c in &failed {
        let value = c.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        eprintln!("  FAIL {} value={value} tolerance={:e}", c.name, c.tolerance);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
