use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phase_diffusion::sweep::{
    emit_figure_data, emit_wigner_fields, manifest_path_for, read_results, run_sweep, FigureId, Provenance,
    RunManifest, SweepConfig,
};
use phase_diffusion::{verify, Error};

const EXIT_CONFIG: u8 = 1;
const EXIT_UNRELIABLE: u8 = 2;

#[derive(Parser)]
#[command(name = "phase-diffusion", version, about = "Phase estimation under phase diffusion: sweeps, figure data and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct Overrides {
    /// Fock truncation
    #[arg(long)]
    n_max: Option<usize>,
    /// Largest truncation tried on tail failures
    #[arg(long)]
    max_n_max: Option<usize>,
    #[arg(long)]
    delta_theta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Results CSV path
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut SweepConfig) {
        if let Some(n) = self.n_max {
            cfg.n_max = n;
        }
        if let Some(n) = self.max_n_max {
            cfg.max_n_max = Some(n);
        }
        if let Some(d) = self.delta_theta {
            cfg.delta_theta = d;
        }
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.output {
            cfg.output_path = o.clone();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured parameter grid (resumes a matching partial run)
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Export the data of one figure from a results CSV
    Figure {
        results: PathBuf,
        /// fig2, fig3, zeta, optimality or wigner
        figure_id: String,
        /// Output directory (default: <results dir>/<figure_id>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and invariant self-checks
    Verify,
    /// Write Wigner fields for every point of the configured grid
    Wigner {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<SweepConfig, Error> {
    let mut cfg = SweepConfig::from_file(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Unreliable(_) | Error::NodeCountInsufficient { .. } | Error::NotNormalized { .. } => {
            ExitCode::from(EXIT_UNRELIABLE)
        }
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn sweep(config: &Path, overrides: &Overrides) -> Result<ExitCode, Error> {
    let cfg = load_config(config, overrides)?;
    let rows = run_sweep(&cfg)?;
    let flagged = rows.iter().filter(|r| !r.is_ok()).count();
    println!("{} rows written to {}", rows.len(), cfg.output_path.display());
    if cfg.outputs.contains(&phase_diffusion::sweep::Output::Wigner) {
        let dir = default_wigner_dir(&cfg);
        let files = emit_wigner_fields(&cfg.points(), &cfg, &dir, &Provenance::for_config(&cfg))?;
        println!("{} wigner files written to {}", files.len(), dir.display());
    }
    if flagged > 0 {
        eprintln!("{flagged} rows flagged unreliable or failed");
        return Ok(ExitCode::from(EXIT_UNRELIABLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn default_wigner_dir(cfg: &SweepConfig) -> PathBuf {
    cfg.output_path.with_extension("wigner")
}

fn figure(results: &Path, figure_id: &str, out: Option<PathBuf>) -> Result<ExitCode, Error> {
    let figure: FigureId = figure_id.parse()?;
    let manifest = RunManifest::read(&manifest_path_for(results))
        .map_err(|e| Error::Config(format!("cannot read the run manifest next to {}: {e}", results.display())))?;
    let cfg = manifest.sweep_config()?;
    let rows = read_results(results)?;
    let dir = out.unwrap_or_else(|| results.parent().unwrap_or(Path::new(".")).join(figure.name()));
    let files = emit_figure_data(&rows, figure, &dir, &cfg)?;
    println!("{} files written to {}", files.len(), dir.display());
    if rows.iter().any(|r| !r.is_ok()) {
        return Ok(ExitCode::from(EXIT_UNRELIABLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_all() -> ExitCode {
    let checks = verify::run_checks();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        ExitCode::from(EXIT_UNRELIABLE)
    } else {
        ExitCode::SUCCESS
    }
}

fn wigner(config: &Path, out: Option<PathBuf>, overrides: &Overrides) -> Result<ExitCode, Error> {
    let cfg = load_config(config, overrides)?;
    let dir = out.unwrap_or_else(|| default_wigner_dir(&cfg));
    let files = emit_wigner_fields(&cfg.points(), &cfg, &dir, &Provenance::for_config(&cfg))?;
    println!("{} files written to {}", files.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sweep { config, overrides } => sweep(&config, &overrides),
        Command::Figure { results, figure_id, out } => figure(&results, &figure_id, out),
        Command::Verify => Ok(verify_all()),
        Command::Wigner { config, out, overrides } => wigner(&config, out, &overrides),
    };
    outcome.unwrap_or_else(|e| exit_for(&e))
}
