//! Ground-state solver driver for the anisotropic spin-boson model.
//!
//! Subcommands: solve | sweep | phase | bench | analyze. Exit codes:
//! 0 success, 2 configuration error, 3 non-convergence, 4 partial grid
//! failure.

mod commands;
mod config;
mod manifest;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "asbm", version, about = "Anisotropic spin-boson ground states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Model and solver overrides shared by all subcommands; values given here
/// win over the config file.
#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset applied before other overrides (canonical | quick).
    #[arg(long)]
    preset: Option<String>,
    /// Coupling case: diagonal | offdiagonal | rw | crw.
    #[arg(long)]
    case: Option<String>,
    /// Spectral exponent (0 < s < 1).
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    omega_c: Option<f64>,
    /// Logarithmic discretization factor Lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of bath modes M.
    #[arg(long)]
    modes: Option<usize>,
    /// Coherent states per spin branch N.
    #[arg(long)]
    multiplicity: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    energy_tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// Restrict parameters to real values (diagonal case only).
    #[arg(long)]
    real_restricted: bool,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; defaults under ASBM_OUTPUT_ROOT (or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model point and write the ground-state record.
    Solve {
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the bath table as CSV.
        #[arg(long)]
        emit_bath: bool,
        /// Write per-restart convergence logs.
        #[arg(long)]
        verbose: bool,
    },
    /// Sweep the coupling over a range at fixed tunneling.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        alpha_min: f64,
        #[arg(long)]
        alpha_max: f64,
        #[arg(long)]
        points: usize,
        /// Logarithmic spacing of the sweep points.
        #[arg(long)]
        log_spacing: bool,
        /// Resume an interrupted run in --out.
        #[arg(long)]
        resume: bool,
    },
    /// Grid over tunneling and coupling; emits the phase map.
    Phase {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated tunneling values.
        #[arg(long, value_delimiter = ',')]
        delta_list: Vec<f64>,
        #[arg(long)]
        alpha_min: f64,
        #[arg(long)]
        alpha_max: f64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        log_spacing: bool,
        #[arg(long)]
        resume: bool,
    },
    /// Convergence benchmarks against bath size and multiplicity.
    Bench {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated bath sizes.
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<usize>,
        /// Comma-separated multiplicities.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
    },
    /// Locate transitions and fit critical behavior from stored records.
    Analyze {
        /// Directory holding record JSON files (a sweep output).
        #[arg(long)]
        records: PathBuf,
        /// Estimator: parity-jump | powerlaw-fit | entropy-cusp |
        /// qfmax-peak | variance-peak | all.
        #[arg(long, default_value = "all")]
        estimator: String,
        /// Known critical coupling for the entropy fit (otherwise taken
        /// from the parity jump).
        #[arg(long)]
        alpha_c: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { overrides, emit_bath, verbose } => {
            commands::cmd_solve(&overrides, emit_bath, verbose)
        }
        Command::Sweep { overrides, alpha_min, alpha_max, points, log_spacing, resume } => {
            commands::cmd_sweep(&overrides, alpha_min, alpha_max, points, log_spacing, resume)
        }
        Command::Phase {
            overrides,
            delta_list,
            alpha_min,
            alpha_max,
            points,
            log_spacing,
            resume,
        } => commands::cmd_phase(
            &overrides,
            &delta_list,
            alpha_min,
            alpha_max,
            points,
            log_spacing,
            resume,
        ),
        Command::Bench { overrides, m_list, n_list } => {
            commands::cmd_bench(&overrides, &m_list, &n_list)
        }
        Command::Analyze { records, estimator, alpha_c, out } => {
            commands::cmd_analyze(&records, &estimator, alpha_c, out)
        }
    };
    match code {
        Ok(exit) => exit,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

impl Overrides {
    /// Resolve config file, then preset, then individual flag overrides.
    fn resolve(&self) -> Result<config::RunConfig, config::ConfigError> {
        let mut run = match &self.config {
            Some(path) => config::load_config(path)?,
            None => config::RunConfig::default(),
        };
        if let Some(preset) = &self.preset {
            config::apply_named_preset(&mut run, preset)?;
        }
        if let Some(case) = &self.case {
            run.spec.coupling = config::parse_case(case)
                .map_err(|m| config::ConfigError { message: format!("--case: {m}") })?;
        }
        if let Some(v) = self.s {
            run.spec.s = v;
        }
        if let Some(v) = self.alpha {
            run.spec.alpha = v;
        }
        if let Some(v) = self.delta {
            run.spec.delta = v;
        }
        if let Some(v) = self.epsilon {
            run.spec.epsilon = v;
        }
        if let Some(v) = self.omega_c {
            run.spec.omega_c = v;
        }
        if let Some(v) = self.lambda {
            run.spec.lambda_grid = v;
        }
        if let Some(v) = self.modes {
            run.spec.num_modes = v;
        }
        if let Some(v) = self.multiplicity {
            run.solver.multiplicity = v;
        }
        if let Some(v) = self.restarts {
            run.solver.restarts = v;
        }
        if let Some(v) = self.max_sweeps {
            run.solver.max_sweeps = v;
        }
        if let Some(v) = self.energy_tolerance {
            run.solver.energy_tolerance = v;
        }
        if let Some(v) = self.seed {
            run.solver.seed = v;
        }
        if let Some(v) = self.init_scale {
            run.solver.init_scale = v;
        }
        if self.real_restricted {
            run.solver.real_restricted = true;
        }
        if let Some(v) = self.threads {
            run.threads = v;
        }
        config::validate(&run)?;
        Ok(run)
    }
}

impl config::RunConfig {
    /// Build the rayon pool according to `threads` (0 = default).
    pub fn install_threads(&self) {
        if self.threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build_global();
        }
    }
}
