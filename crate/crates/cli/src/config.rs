//! Flat key-value run configuration.
//!
//! Every key is optional in a file. Values are resolved per subcommand in the
//! order defaults, `SPIKELAB_OUT` (for `out` only), config file, flags. Keys
//! that a subcommand does not use are dropped from its resolved echo.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use spikelab_core::geometry::CurveSpec;
use spikelab_core::nlep::Continuation;
use spikelab_core::sim::{SimConfig, Seeding};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SPIKELAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Green,
    Reduce,
    Stability,
    Nlep,
    Simulate,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Green => "green",
            Command::Reduce => "reduce",
            Command::Stability => "stability",
            Command::Nlep => "nlep",
            Command::Simulate => "simulate",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// All configuration keys. Field names are the file keys; flags use the same
/// names with `-` for `_`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keys {
    /// Output root; results go to `<out>/<subcommand>/`.
    pub out: Option<PathBuf>,
    /// Seed of the perturbation diagnostics.
    pub seed: Option<u64>,
    /// 0 silent, 1 summary lines, 2 progress.
    pub verbosity: Option<u8>,

    /// Ground-state outer radius.
    pub r_max: Option<f64>,
    /// Ground-state grid intervals.
    pub grid_n: Option<usize>,
    /// Ground-state Newton tolerance.
    pub tol: Option<f64>,

    pub table_r_min: Option<f64>,
    pub table_r_max: Option<f64>,
    pub table_points: Option<usize>,
    /// Radius of the brute-force Helmholtz disk solve.
    pub disk_radius: Option<f64>,
    pub disk_nodes: Option<usize>,
    /// Gaussian width of the smoothed source.
    pub mollifier: Option<f64>,

    pub eps: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    /// Boundary curve, `circle:R`, `ellipse:A,B` or `radial-fourier:r0=..,aN=..,bN=..`.
    pub domain: Option<String>,
    pub tau: Option<f64>,

    /// Number of spikes in the cluster.
    pub k: Option<usize>,
    /// Second arc-length derivative of curvature; derived from `domain` when unset.
    pub h_second: Option<f64>,
    /// Admissibility window half-width.
    pub eta: Option<f64>,
    /// Random restoring-drift probes around the equilibrium.
    pub perturbations: Option<usize>,
    /// Probe size as a fraction of the smallest gap.
    pub perturbation_size: Option<f64>,

    pub nlep_r_max: Option<f64>,
    pub nlep_intervals: Option<usize>,
    /// Highest angular mode in the spectrum output.
    pub modes: Option<u32>,
    /// Nonlocal coefficient at `tau = 0`.
    pub gamma: Option<f64>,
    pub tau_max: Option<f64>,
    /// Sweep rows after `tau = 0`; 0 skips the sweep.
    pub tau_steps: Option<usize>,
    /// `newton` or `fixed-point`.
    pub method: Option<String>,

    pub n_rho: Option<usize>,
    pub n_theta: Option<usize>,
    pub stretch: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// Initial data, `constant:U,V` or `boundary:S1,S2,..[@consistent|@A]`.
    pub init: Option<String>,
    /// Curve parameter of the arc-length origin; derived when unset.
    pub reference: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub threshold: Option<f64>,
    pub reaction: Option<bool>,
    pub write_fields: Option<bool>,
}

macro_rules! each_key {
    ($m:ident, $a:expr, $b:expr) => {
        $m!(
            $a, $b; out, seed, verbosity, r_max, grid_n, tol, table_r_min, table_r_max,
            table_points, disk_radius, disk_nodes, mollifier, eps, d, domain, tau, k, h_second,
            eta, perturbations, perturbation_size, nlep_r_max, nlep_intervals, modes, gamma,
            tau_max, tau_steps, method, n_rho, n_theta, stretch, dt, t_end, init, reference,
            snapshot_every, threshold, reaction, write_fields
        )
    };
}

macro_rules! overlay_fields {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

macro_rules! restrict_fields {
    ($dst:expr, $template:expr; $($f:ident),*) => {
        $(if $template.$f.is_none() { $dst.$f = None; })*
    };
}

/// Copies the named flag fields into `Keys`.
#[macro_export]
macro_rules! apply_flags {
    ($flags:expr, $keys:expr; $($f:ident),*) => {
        $(if $flags.$f.is_some() { $keys.$f = $flags.$f.clone(); })*
    };
}

impl Keys {
    /// Defaults of every key the subcommand uses; unused keys stay `None`.
    pub fn defaults(cmd: Command) -> Keys {
        let mut k = Keys {
            out: Some(PathBuf::from("out")),
            seed: Some(0),
            verbosity: Some(1),
            ..Keys::default()
        };
        let ground = |k: &mut Keys| {
            k.r_max = Some(25.0);
            k.grid_n = Some(4000);
            k.tol = Some(1e-12);
        };
        let nlep = |k: &mut Keys| {
            k.nlep_r_max = Some(20.0);
            k.nlep_intervals = Some(2000);
            k.modes = Some(3);
            k.gamma = Some(2.0);
            k.tau = Some(0.0);
            k.tau_max = Some(2.0);
            k.tau_steps = Some(20);
            k.method = Some("newton".into());
        };
        let cluster = |k: &mut Keys| {
            k.eps = Some(1e-3);
            k.d = Some(4e-4);
            k.domain = Some("ellipse:2,1".into());
            k.k = Some(3);
            k.h_second = None;
            k.eta = Some(0.5);
        };
        match cmd {
            Command::GroundState => ground(&mut k),
            Command::Green => {
                k.table_r_min = Some(1e-3);
                k.table_r_max = Some(20.0);
                k.table_points = Some(200);
                k.disk_radius = Some(30.0);
                k.disk_nodes = Some(30_000);
                k.mollifier = Some(0.02);
            }
            Command::Reduce => {
                ground(&mut k);
                cluster(&mut k);
                k.perturbations = Some(16);
                k.perturbation_size = Some(0.05);
            }
            Command::Stability => {
                ground(&mut k);
                cluster(&mut k);
            }
            Command::Nlep => nlep(&mut k),
            Command::Simulate => {
                let s = SimConfig::default();
                k.eps = Some(s.epsilon);
                k.d = Some(s.d);
                k.tau = Some(s.tau);
                k.domain = Some(s.domain.to_string());
                k.n_rho = Some(s.n_rho);
                k.n_theta = Some(s.n_theta);
                k.stretch = Some(s.stretch);
                k.dt = Some(s.dt);
                k.t_end = Some(s.t_end);
                k.init = Some(s.seed.to_string());
                k.snapshot_every = Some(s.snapshot_every);
                k.threshold = Some(s.threshold);
                k.reaction = Some(s.reaction);
                k.write_fields = Some(s.write_fields);
            }
            Command::VerifyAll => {
                ground(&mut k);
                nlep(&mut k);
            }
        }
        k
    }

    /// Keys the subcommand reads, including those derived at run time.
    fn relevant(cmd: Command) -> Keys {
        let mut k = Keys::defaults(cmd);
        match cmd {
            Command::Reduce | Command::Stability => k.h_second = Some(0.0),
            Command::Simulate => k.reference = Some(0.0),
            _ => {}
        }
        k
    }

    pub fn overlay(&mut self, other: &Keys) {
        each_key!(overlay_fields, self, other);
    }

    fn restrict(&mut self, template: &Keys) {
        each_key!(restrict_fields, self, template);
    }

    pub fn from_toml(text: &str) -> Result<Keys> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config file: {e}")).into())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Output directory of a subcommand.
    pub fn output_dir(&self, cmd: Command) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(cmd.name())
    }

    pub fn verbosity(&self) -> u8 {
        self.verbosity.unwrap_or(1)
    }
}

/// Resolves the keys of `cmd` from defaults, environment, file and flags,
/// then validates them.
pub fn resolve(cmd: Command, config: Option<&Path>, flags: &Keys) -> Result<Keys> {
    let mut keys = Keys::defaults(cmd);
    if let Some(out) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        keys.out = Some(PathBuf::from(out));
    }
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        keys.overlay(&Keys::from_toml(&text)?);
    }
    keys.overlay(flags);
    keys.restrict(&Keys::relevant(cmd));
    validate(cmd, &keys)?;
    Ok(keys)
}

/// Returns a resolved key, which defaults guarantee to be present.
pub fn need<T: Clone>(value: &Option<T>, name: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Invalid(format!("missing key `{name}`")).into())
}

fn invalid(name: &str, why: &str) -> anyhow::Error {
    CliError::Invalid(format!("`{name}` {why}")).into()
}

fn check_f64(name: &str, value: Option<f64>, ok: impl Fn(f64) -> bool, why: &str) -> Result<()> {
    match value {
        Some(v) if !(v.is_finite() && ok(v)) => Err(invalid(name, why)),
        _ => Ok(()),
    }
}

fn check_usize(name: &str, value: Option<usize>, lo: usize, hi: usize) -> Result<()> {
    match value {
        Some(v) if !(lo..=hi).contains(&v) => Err(invalid(name, &format!("must lie in [{lo}, {hi}]"))),
        _ => Ok(()),
    }
}

pub fn parse_domain(text: &str) -> Result<CurveSpec> {
    text.parse::<CurveSpec>()
        .map_err(|e| invalid("domain", &format!("is not a curve: {e}")))
}

pub fn parse_method(text: &str) -> Result<Continuation> {
    match text {
        "newton" => Ok(Continuation::Newton),
        "fixed-point" => Ok(Continuation::FixedPoint),
        _ => Err(invalid("method", "must be `newton` or `fixed-point`")),
    }
}

/// Range checks for every numeric key, applied before dispatch.
pub fn validate(cmd: Command, k: &Keys) -> Result<()> {
    if let Some(v) = k.verbosity {
        if v > 2 {
            return Err(invalid("verbosity", "must be 0, 1 or 2"));
        }
    }
    check_f64("r_max", k.r_max, |v| (20.0..=200.0).contains(&v), "must lie in [20, 200]")?;
    check_usize("grid_n", k.grid_n, 2000, 1_000_000)?;
    check_f64("tol", k.tol, |v| v > 0.0 && v <= 1e-10, "must lie in (0, 1e-10]")?;

    check_f64("table_r_min", k.table_r_min, |v| v > 0.0, "must be positive")?;
    check_f64("table_r_max", k.table_r_max, |v| v > k.table_r_min.unwrap_or(0.0), "must exceed table_r_min")?;
    check_usize("table_points", k.table_points, 2, 1_000_000)?;
    check_f64("disk_radius", k.disk_radius, |v| (10.0..=200.0).contains(&v), "must lie in [10, 200]")?;
    check_usize("disk_nodes", k.disk_nodes, 1000, 10_000_000)?;
    check_f64("mollifier", k.mollifier, |v| v > 0.0 && v <= 0.1, "must lie in (0, 0.1]")?;

    check_f64("eps", k.eps, |v| v > 0.0 && v < 1.0, "must lie in (0, 1)")?;
    check_f64("D", k.d, |v| v > 0.0, "must be positive")?;
    check_f64("tau", k.tau, |v| v >= 0.0, "must be non-negative")?;
    if let Some(domain) = &k.domain {
        parse_domain(domain)?;
    }
    check_usize("k", k.k, 1, 64)?;
    check_f64("h_second", k.h_second, |v| v < 0.0, "must be negative")?;
    check_f64("eta", k.eta, |v| v > 0.0, "must be positive")?;
    check_usize("perturbations", k.perturbations, 0, 100_000)?;
    check_f64("perturbation_size", k.perturbation_size, |v| v > 0.0 && v < 1.0, "must lie in (0, 1)")?;

    check_f64("nlep_r_max", k.nlep_r_max, |v| (20.0..=200.0).contains(&v), "must lie in [20, 200]")?;
    check_usize("nlep_intervals", k.nlep_intervals, 2000, 1_000_000)?;
    if let Some(m) = k.modes {
        if m > 16 {
            return Err(invalid("modes", "must lie in [0, 16]"));
        }
    }
    check_f64("gamma", k.gamma, |v| v >= 0.0, "must be non-negative")?;
    check_f64("tau_max", k.tau_max, |v| v > 0.0, "must be positive")?;
    check_usize("tau_steps", k.tau_steps, 0, 10_000)?;
    if let Some(method) = &k.method {
        parse_method(method)?;
    }

    check_usize("n_rho", k.n_rho, 3, 4096)?;
    check_usize("n_theta", k.n_theta, 8, 16_384)?;
    if let Some(n) = k.n_theta {
        if n % 2 != 0 {
            return Err(invalid("n_theta", "must be even"));
        }
    }
    check_f64("stretch", k.stretch, |v| (0.0..=8.0).contains(&v), "must lie in [0, 8]")?;
    check_f64("reference", k.reference, |_| true, "must be finite")?;
    if cmd == Command::Simulate {
        sim_config(k)?
            .validate()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(())
}

/// Simulator settings from resolved keys.
pub fn sim_config(k: &Keys) -> Result<SimConfig> {
    let seed: Seeding = need(&k.init, "init")?
        .parse()
        .map_err(|e| invalid("init", &format!("is not a seeding: {e}")))?;
    Ok(SimConfig {
        domain: parse_domain(&need(&k.domain, "domain")?)?,
        epsilon: need(&k.eps, "eps")?,
        d: need(&k.d, "D")?,
        tau: need(&k.tau, "tau")?,
        n_rho: need(&k.n_rho, "n_rho")?,
        n_theta: need(&k.n_theta, "n_theta")?,
        stretch: need(&k.stretch, "stretch")?,
        dt: need(&k.dt, "dt")?,
        t_end: need(&k.t_end, "t_end")?,
        seed,
        reference: k.reference,
        snapshot_every: need(&k.snapshot_every, "snapshot_every")?,
        threshold: need(&k.threshold, "threshold")?,
        reaction: need(&k.reaction, "reaction")?,
        write_fields: need(&k.write_fields, "write_fields")?,
    })
}
