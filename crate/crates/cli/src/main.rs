//! `microlab`: reproducible experiments on twin-branching energies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Config, FormArg, Kind};
use error::CliError;
use output::{sha256_hex, to_json, Artifacts, Manifest, Timings};

pub const THREADS_ENV: &str = "MICROLAB_THREADS";
const DEFAULT_OUT: &str = "microlab_out";

#[derive(Parser, Debug)]
#[command(name = "microlab", version, about = "Energy scaling and microstructure experiments")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Overrides mirroring config keys.
#[derive(Args, Debug)]
struct Overrides {
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, value_enum)]
    form: Option<FormArg>,
    #[arg(long, global = true)]
    nx: Option<usize>,
    #[arg(long, global = true)]
    ny: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a MICROFIELD file or profile JSON (constant profile if omitted).
    Energy {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Emit a constant, branching, example or recovery profile.
    Construct {
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Limit object JSON for `recovery` (single-jump example if omitted).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Validate a limit object and evaluate its limit energy.
    LimitEnergy {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Recovery sequence of a limit object at the configured theta.
    Recover {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Grid descent on the smoothed functional.
    Minimize {
        /// constant, branching, random, or a MICROFIELD path.
        #[arg(long, default_value = "constant")]
        init: String,
    },
    /// Energy sweep over epsilon; writes sweep.csv.
    Sweep {
        #[arg(long)]
        refine: bool,
    },
    /// Fit the scaling exponent to a sweep CSV (runs the sweep if omitted).
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Ratio of best energies to the scaling law.
    Sandwich {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Whitney-type square cover with verification.
    Cover {
        /// square, l-shape or slab.
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Energy { .. } => "energy",
            Command::Construct { .. } => "construct",
            Command::LimitEnergy { .. } => "limit-energy",
            Command::Recover { .. } => "recover",
            Command::Minimize { .. } => "minimize",
            Command::Sweep { .. } => "sweep",
            Command::Fit { .. } => "fit",
            Command::Sandwich { .. } => "sandwich",
            Command::Cover { .. } => "cover",
        }
    }
}

fn apply_overrides(cfg: &mut Config, cli: &Cli) {
    let o = &cli.overrides;
    let pr = &mut cfg.params;
    if let Some(v) = o.p {
        pr.p = v;
    }
    if let Some(v) = o.theta {
        pr.theta = v;
    }
    if let Some(v) = o.epsilon {
        pr.epsilon = Some(v);
        pr.sigma = None;
    }
    if let Some(v) = o.sigma {
        pr.sigma = Some(v);
        pr.epsilon = None;
    }
    if o.form.is_some() {
        pr.form = o.form;
    }
    if o.nx.is_some() {
        cfg.grid.nx = o.nx;
    }
    if o.ny.is_some() {
        cfg.grid.ny = o.ny;
    }
    if let Some(s) = cli.seed {
        cfg.minimize.seed = s;
    }
    match &cli.command {
        Command::Construct { kind, alpha, .. } => {
            if let Some(k) = kind {
                cfg.construct.kind = *k;
            }
            if let Some(a) = alpha {
                cfg.construct.alpha = *a;
            }
        }
        Command::Sweep { refine: true } => cfg.sweep.refine = true,
        Command::Cover {
            domain,
            delta,
            depth,
            samples,
        } => {
            if let Some(d) = domain {
                cfg.cover.domain = config::DomainSpec::Named(d.clone());
            }
            if let Some(d) = delta {
                cfg.cover.delta = *d;
            }
            if let Some(d) = depth {
                cfg.cover.depth = *d;
            }
            if let Some(s) = samples {
                cfg.cover.samples = *s;
            }
        }
        _ => {}
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => Config::default(),
    };
    apply_overrides(&mut cfg, &cli);

    let threads = thread_count(cli.threads)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let seed = cfg.minimize.seed;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut out = Artifacts::create(&dir)?;
    let config_json = to_json(&cfg);

    let compute = Instant::now();
    let summary = match &cli.command {
        Command::Energy { input } => commands::energy(&cfg, input.as_deref(), &mut out),
        Command::Construct { input, .. } => commands::construct(&cfg, input.as_deref(), &mut out),
        Command::LimitEnergy { input } => commands::limit_energy_cmd(&cfg, input.as_deref(), &mut out),
        Command::Recover { input } => commands::recover(&cfg, input.as_deref(), &mut out),
        Command::Minimize { init } => commands::minimize_cmd(&cfg, init, &mut out),
        Command::Sweep { .. } => commands::sweep_cmd(&cfg, &mut out),
        Command::Fit { input } => commands::fit(&cfg, input.as_deref(), &mut out),
        Command::Sandwich { input } => commands::sandwich(&cfg, input.as_deref(), &mut out),
        Command::Cover { .. } => commands::cover(&cfg, seed, &mut out),
    }?;
    let compute_s = compute.elapsed().as_secs_f64();

    out.write("config.json", &config_json)?;
    let artifacts = out.written.clone();
    let manifest = Manifest {
        tool: "microlab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: microlab_core::VERSION,
        subcommand: cli.command.name(),
        config_sha256: sha256_hex(config_json.as_bytes()),
        seed,
        threads: rayon::current_num_threads(),
        artifacts: &artifacts,
        timings_s: Timings {
            compute: compute_s,
            total: started.elapsed().as_secs_f64(),
        },
    };
    out.write_json("manifest.json", &manifest)?;
    print!("{}", to_json(&summary));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
