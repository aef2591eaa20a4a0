//! Command-line front end for the Rabinovich periodic-orbit laboratory.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SweepGrid;
use config::{parse_mode, parse_u0, OutputFormat, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rabinovich",
    about = "Simulate, stabilize and analyze periodic orbits of the Rabinovich system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a (possibly perturbed) run and export the trajectory
    Simulate(SimulateArgs),
    /// Name the atlas region of an energy-Casimir level pair
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        h: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
    },
    /// Locate the periodic orbit on a fiber and export it as JSON
    Orbit {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        h: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 1e-12)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-14)]
        atol: f64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<String>,
    },
    /// Floquet multipliers of a stored orbit under a chosen mode
    Floquet {
        /// Orbit JSON produced by `orbit`
        #[arg(long)]
        orbit: PathBuf,
        /// none | casimir_leaf_stabilize | casimir_leaf_destabilize |
        /// energy_leaf_stabilize | energy_leaf_destabilize | full
        #[arg(long, default_value = "none")]
        mode: String,
        #[arg(long, default_value_t = 1.0)]
        gain_a: f64,
        #[arg(long, default_value_t = 1.0)]
        gain_b: f64,
        #[arg(long, default_value_t = 1e-12)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-14)]
        atol: f64,
    },
    /// Equilibrium family members and their stability verdicts
    Equilibria {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        /// Comma-separated family parameters, e.g. "-2,0,2"
        #[arg(long, default_value = "-2,0,2", allow_hyphen_values = true)]
        m: String,
    },
    /// Label a grid of level pairs and count disjointness violations
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = -3.0)]
        h_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 3.0)]
        h_max: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = -3.0)]
        c_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 3.0)]
        c_max: f64,
        /// Grid points per axis
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Also solve a fiber point in every listed cell
        #[arg(long)]
        check_fibers: bool,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run configuration; flags override file keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// none | casimir_leaf_stabilize | casimir_leaf_destabilize |
    /// energy_leaf_stabilize | energy_leaf_destabilize | full
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long)]
    gain_a: Option<f64>,
    #[arg(long)]
    gain_b: Option<f64>,
    /// Initial state "x,y,z"
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<String>,
    /// Seed from the (h, c) fiber instead of an explicit u0
    #[arg(long)]
    auto_seed: bool,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl SimulateArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => {
                // every required key must then come from flags
                let beta = self
                    .beta
                    .ok_or_else(|| CliError::Config("missing --beta (or --config)".into()))?;
                let mode = self
                    .mode
                    .as_deref()
                    .ok_or_else(|| CliError::Config("missing --mode (or --config)".into()))?;
                let t_end = self
                    .t_end
                    .ok_or_else(|| CliError::Config("missing --t-end (or --config)".into()))?;
                RunConfig {
                    beta,
                    mode: parse_mode(mode)?,
                    h: None,
                    c: None,
                    gain_a: 1.0,
                    gain_b: 1.0,
                    u0: None,
                    auto_seed: false,
                    t_end,
                    rtol: 1e-10,
                    atol: 1e-12,
                    output: None,
                    format: OutputFormat::Csv,
                }
            }
        };
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(mode) = self.mode.as_deref() {
            cfg.mode = parse_mode(mode)?;
        }
        if let Some(h) = self.h {
            cfg.h = Some(h);
        }
        if let Some(c) = self.c {
            cfg.c = Some(c);
        }
        if let Some(g) = self.gain_a {
            cfg.gain_a = g;
        }
        if let Some(g) = self.gain_b {
            cfg.gain_b = g;
        }
        if let Some(u0) = self.u0.as_deref() {
            cfg.u0 = Some(parse_u0(u0)?);
            cfg.auto_seed = false;
        }
        if self.auto_seed {
            cfg.auto_seed = true;
            cfg.u0 = None;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(r) = self.rtol {
            cfg.rtol = r;
        }
        if let Some(a) = self.atol {
            cfg.atol = a;
        }
        if let Some(o) = self.out {
            cfg.output = Some(o);
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        Ok(cfg)
    }
}

fn parse_m_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad family parameter '{part}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.into_config()?;
            commands::cmd_simulate(&cfg)
        }
        Command::Classify { h, c, beta } => commands::cmd_classify(h, c, beta),
        Command::Orbit { beta, h, c, rtol, atol, out } => {
            commands::cmd_orbit(beta, h, c, rtol, atol, out.as_deref())
        }
        Command::Floquet { orbit, mode, gain_a, gain_b, rtol, atol } => {
            commands::cmd_floquet(&orbit, parse_mode(&mode)?, gain_a, gain_b, rtol, atol)
        }
        Command::Equilibria { beta, m } => commands::cmd_equilibria(beta, &parse_m_list(&m)?),
        Command::Sweep { beta, h_min, h_max, c_min, c_max, n, check_fibers, out } => {
            let grid = SweepGrid { beta, h_min, h_max, c_min, c_max, n };
            commands::cmd_sweep(&grid, check_fibers, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
