//! Command-line front end: argument parsing, configuration resolution and
//! result files for every spikelab computation.

pub mod commands;
pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Command, Keys};

/// Failures raised by the front end itself.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Exit code for an error: 2 for numerical failures, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Invalid(_) => EXIT_INVALID,
                CliError::ChecksFailed(_) => EXIT_NUMERICAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<spikelab_core::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID };
        }
    }
    EXIT_INVALID
}

#[derive(Debug, Parser)]
#[command(name = "spikelab", version, about = "Boundary spike cluster laboratory for the Gierer-Meinhardt system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Radial ground state, its table and moment integrals.
    GroundState {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        ground: GroundFlags,
    },
    /// Green's kernel table, expansion constants and disk cross-check.
    Green {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        green: GreenFlags,
    },
    /// Equilibrium offsets of a k-spike boundary cluster.
    Reduce {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        ground: GroundFlags,
        #[command(flatten)]
        physics: PhysicsFlags,
        #[command(flatten)]
        cluster: ClusterFlags,
        #[command(flatten)]
        probe: ProbeFlags,
    },
    /// Small-eigenvalue matrices and estimates for a cluster.
    Stability {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        ground: GroundFlags,
        #[command(flatten)]
        physics: PhysicsFlags,
        #[command(flatten)]
        cluster: ClusterFlags,
    },
    /// Nonlocal eigenvalue spectra and the delay sweep.
    Nlep {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        nlep: NlepFlags,
    },
    /// Time integration of the full system on a star-shaped domain.
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        physics: PhysicsFlags,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Deterministic property suite; exit 2 if any check fails.
    VerifyAll {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        ground: GroundFlags,
        #[command(flatten)]
        nlep: NlepFlags,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// Flat TOML configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output root (default `out`, or the SPIKELAB_OUT variable).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the perturbation diagnostics.
    #[arg(long)]
    pub seed: Option<u64>,
    /// 0 silent, 1 summary lines, 2 progress.
    #[arg(long)]
    pub verbosity: Option<u8>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GroundFlags {
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GreenFlags {
    #[arg(long)]
    pub table_r_min: Option<f64>,
    #[arg(long)]
    pub table_r_max: Option<f64>,
    #[arg(long)]
    pub table_points: Option<usize>,
    #[arg(long)]
    pub disk_radius: Option<f64>,
    #[arg(long)]
    pub disk_nodes: Option<usize>,
    #[arg(long)]
    pub mollifier: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhysicsFlags {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "d", visible_alias = "D")]
    pub d: Option<f64>,
    /// `circle:R`, `ellipse:A,B` or `radial-fourier:r0=..,aN=..,bN=..`.
    #[arg(long)]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClusterFlags {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub h_second: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProbeFlags {
    #[arg(long)]
    pub perturbations: Option<usize>,
    #[arg(long)]
    pub perturbation_size: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NlepFlags {
    #[arg(long)]
    pub nlep_r_max: Option<f64>,
    #[arg(long)]
    pub nlep_intervals: Option<usize>,
    #[arg(long)]
    pub modes: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tau_steps: Option<usize>,
    /// `newton` or `fixed-point`.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n_rho: Option<usize>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long)]
    pub stretch: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// `constant:U,V` or `boundary:S1,S2,..[@consistent|@A]`.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub reference: Option<f64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub reaction: Option<bool>,
    #[arg(long)]
    pub write_fields: Option<bool>,
}

impl CommonFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; out, seed, verbosity);
    }
}

impl GroundFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; r_max, grid_n, tol);
    }
}

impl GreenFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; table_r_min, table_r_max, table_points, disk_radius, disk_nodes, mollifier);
    }
}

impl PhysicsFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; eps, d, domain);
    }
}

impl ClusterFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; k, h_second, eta);
    }
}

impl ProbeFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; perturbations, perturbation_size);
    }
}

impl NlepFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; nlep_r_max, nlep_intervals, modes, gamma, tau, tau_max, tau_steps, method);
    }
}

impl SimFlags {
    fn apply(&self, k: &mut Keys) {
        apply_flags!(self, k; tau, n_rho, n_theta, stretch, dt, t_end, init, reference, snapshot_every, threshold, reaction, write_fields);
    }
}

impl CommandArgs {
    /// Subcommand, config file and flag-supplied keys.
    pub fn split(&self) -> (Command, Option<PathBuf>, Keys) {
        let mut k = Keys::default();
        let (cmd, common) = match self {
            CommandArgs::GroundState { common, ground } => {
                ground.apply(&mut k);
                (Command::GroundState, common)
            }
            CommandArgs::Green { common, green } => {
                green.apply(&mut k);
                (Command::Green, common)
            }
            CommandArgs::Reduce { common, ground, physics, cluster, probe } => {
                ground.apply(&mut k);
                physics.apply(&mut k);
                cluster.apply(&mut k);
                probe.apply(&mut k);
                (Command::Reduce, common)
            }
            CommandArgs::Stability { common, ground, physics, cluster } => {
                ground.apply(&mut k);
                physics.apply(&mut k);
                cluster.apply(&mut k);
                (Command::Stability, common)
            }
            CommandArgs::Nlep { common, nlep } => {
                nlep.apply(&mut k);
                (Command::Nlep, common)
            }
            CommandArgs::Simulate { common, physics, sim } => {
                physics.apply(&mut k);
                sim.apply(&mut k);
                (Command::Simulate, common)
            }
            CommandArgs::VerifyAll { common, ground, nlep } => {
                ground.apply(&mut k);
                nlep.apply(&mut k);
                (Command::VerifyAll, common)
            }
        };
        common.apply(&mut k);
        (cmd, common.config.clone(), k)
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let (cmd, config, flags) = cli.command.split();
    match config::resolve(cmd, config.as_deref(), &flags).and_then(|keys| commands::run(cmd, keys)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("spikelab {}: {e:#}", cmd.name());
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let numerical = anyhow::Error::from(spikelab_core::Error::LinearSolve { residual: 1.0 });
        assert_eq!(exit_code(&numerical), EXIT_NUMERICAL);
        let invalid = anyhow::Error::from(spikelab_core::Error::Geometry("bad".into()));
        assert_eq!(exit_code(&invalid), EXIT_INVALID);
        assert_eq!(exit_code(&CliError::ChecksFailed(1).into()), EXIT_NUMERICAL);
        assert_eq!(exit_code(&CliError::Invalid("x".into()).into()), EXIT_INVALID);
        let wrapped = anyhow::Error::from(spikelab_core::Error::LinearSolve { residual: 1.0 }).context("step");
        assert_eq!(exit_code(&wrapped), EXIT_NUMERICAL);
    }
}
