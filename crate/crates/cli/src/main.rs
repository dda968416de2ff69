//! `gravsweep`: cosmology tables, parameter sweeps, star formation
//! histories and GW background spectra as CSV or JSON.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, RunConfig, WORKERS_ENV};
use failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "gravsweep",
    version,
    about = "Deterministic parallel sweeps over a cosmological pipeline"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for config-file keys of the same name.
#[derive(Debug, Args)]
struct Flags {
    #[arg(
        long,
        global = true,
        value_name = "PATH",
        help = "key = value settings file"
    )]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "csv|json")]
    format: Option<Format>,
    #[arg(
        long,
        global = true,
        value_name = "PATH",
        help = "write output here instead of stdout"
    )]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega_m: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega_b: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega_l: Option<f64>,
    #[arg(
        long = "h",
        global = true,
        allow_negative_numbers = true,
        help = "H0 / (100 km/s/Mpc)"
    )]
    h: Option<f64>,
    #[arg(long, global = true, help = "grid points")]
    np: Option<usize>,
    #[arg(
        long,
        global = true,
        allow_negative_numbers = true,
        help = "grid start redshift"
    )]
    zmax: Option<f64>,
    #[arg(long, global = true, help = format!("worker threads [env: {WORKERS_ENV}]"))]
    workers: Option<usize>,
    #[arg(
        long,
        global = true,
        allow_negative_numbers = true,
        help = "quadrature tolerance"
    )]
    tol: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta_c: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma8: Option<f64>,
    #[arg(
        long,
        global = true,
        allow_negative_numbers = true,
        help = "Msun; derived from the cosmology if unset"
    )]
    m8: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_max: Option<f64>,
    #[arg(
        long,
        global = true,
        allow_negative_numbers = true,
        help = "star formation timescale, Gyr"
    )]
    tau: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    imf_slope: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_low: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_up: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    m_bh_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    fq_coeff: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    bandwidth_frac: Option<f64>,
}

impl Flags {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(
            omega_m,
            omega_b,
            omega_l,
            h,
            np,
            zmax,
            workers,
            delta_c,
            sigma8,
            gamma,
            m_min,
            m_max,
            tau,
            imf_slope,
            m_low,
            m_up,
            m_bh_min,
            epsilon,
            fq_coeff,
            bandwidth_frac,
            format
        );
        if self.tol.is_some() {
            cfg.tol = self.tol;
        }
        if self.m8.is_some() {
            cfg.m8 = self.m8;
        }
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expansion rate, age and comoving distance at each redshift.
    Cosmo {
        #[arg(value_delimiter = ',', allow_negative_numbers = true)]
        z: Vec<f64>,
    },
    /// Reference integral over the descending redshift grid.
    Sweep,
    /// Cosmic star formation history on the redshift grid.
    Csfr,
    /// Stochastic GW background on a log-spaced frequency grid.
    Gwb {
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        nu_min: f64,
        #[arg(long, default_value_t = 1e4, allow_negative_numbers = true)]
        nu_max: f64,
        #[arg(long, default_value_t = 200)]
        nu_points: usize,
    },
    /// Wall time and speedup of the reference sweep per worker count.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        worker_list: Vec<usize>,
        #[arg(long, hide = true)]
        inject_impure: bool,
    },
}

fn env_workers() -> Result<Option<String>, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => Ok(Some(v)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => Err(Failure::validation(format!(
            "{WORKERS_ENV} is not valid UTF-8"
        ))),
    }
}

fn assemble(flags: &Flags) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    if flags.workers.is_none() {
        cfg.apply_env_workers(env_workers()?.as_deref())?;
    }
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = assemble(&cli.flags)?;
    let table = match &cli.command {
        Command::Cosmo { z } if z.is_empty() => {
            commands::cosmo(&cfg, &commands::DEFAULT_REDSHIFTS)?
        }
        Command::Cosmo { z } => commands::cosmo(&cfg, z)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Csfr => commands::csfr(&cfg)?,
        Command::Gwb {
            nu_min,
            nu_max,
            nu_points,
        } => commands::gwb(&cfg, *nu_min, *nu_max, *nu_points)?,
        Command::Bench {
            worker_list,
            inject_impure,
        } => commands::bench(&cfg, worker_list, *inject_impure)?,
    };
    let text = table.render(cfg.format);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure::io(format!("cannot write stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("gravsweep: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_numbers_reach_validation() {
        let cli = Cli::try_parse_from(["gravsweep", "--omega-m", "-1", "cosmo"]).unwrap();
        assert_eq!(cli.flags.omega_m, Some(-1.0));
        let cli = Cli::try_parse_from(["gravsweep", "cosmo", "0,1,-2"]).unwrap();
        assert!(matches!(cli.command, Command::Cosmo { ref z } if z == &[0.0, 1.0, -2.0]));
    }

    #[test]
    fn flags_may_follow_the_subcommand() {
        let cli =
            Cli::try_parse_from(["gravsweep", "sweep", "--np", "5", "--format", "json"]).unwrap();
        let mut cfg = RunConfig::default();
        cli.flags.apply(&mut cfg);
        assert_eq!(cfg.np, 5);
        assert_eq!(cfg.format, Format::Json);
    }
}
