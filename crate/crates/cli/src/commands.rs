//! Subcommand bodies. Each writes stable filenames under `<out>/<name>/`,
//! the resolved configuration and a separate timing metadata file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spikelab_core::geometry::BoundaryCurve;
use spikelab_core::green::{
    c1_exact, c2_exact, expansion_coefficients, g0, helmholtz_disk_reference, write_table_csv,
    ExpansionCoefficients,
};
use spikelab_core::ground_state::{compute_moments, solve_ground_state, GroundStateMoments};
use spikelab_core::nlep::{
    solve_nlep, tau_sweep, write_spectrum_csv, write_sweep_csv, NlepConfig, NlepGrid, NlepSpectrum,
    TauSweep,
};
use spikelab_core::reduced::{
    reduced_drift, solve_positions, validate_admissibility, write_gap_csv, AdmissibilityReport,
    ClusterParams, RegimeSafety, SpikeConfiguration,
};
use spikelab_core::sim::{self, write_snapshot, write_summary, write_tracks_csv, Simulator, Snapshot};
use spikelab_core::stability::{
    build_matrix_a, build_matrix_m, small_eigenvalue_estimates, write_matrix_csv, SmallSpectrumReport,
};

use crate::config::{need, parse_domain, parse_method, sim_config, Command, Keys};
use crate::verify;

/// Output context of one invocation.
pub struct Run {
    pub dir: PathBuf,
    pub verbosity: u8,
}

impl Run {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    fn write_resolved(&self, keys: &Keys) -> Result<()> {
        fs::write(self.dir.join("resolved_config.toml"), keys.to_toml()?)?;
        Ok(())
    }

    fn say(&self, line: impl AsRef<str>) {
        if self.verbosity >= 1 {
            println!("{}", line.as_ref());
        }
    }

    fn progress(&self, line: impl AsRef<str>) {
        if self.verbosity >= 2 {
            eprintln!("{}", line.as_ref());
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    started_unix_seconds: f64,
    elapsed_seconds: f64,
    success: bool,
}

/// Runs a resolved subcommand.
pub fn run(cmd: Command, mut keys: Keys) -> Result<()> {
    let dir = keys.output_dir(cmd);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let run = Run {
        dir,
        verbosity: keys.verbosity(),
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let result = match cmd {
        Command::GroundState => ground_state(&run, &keys),
        Command::Green => green(&run, &keys),
        Command::Reduce => reduce(&run, &mut keys),
        Command::Stability => stability(&run, &mut keys),
        Command::Nlep => nlep(&run, &keys),
        Command::Simulate => simulate(&run, &mut keys),
        Command::VerifyAll => verify_all(&run, &keys),
    };
    run.write_json(
        "metadata.json",
        &Metadata {
            tool: "spikelab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: cmd.name(),
            started_unix_seconds: started,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            success: result.is_ok(),
        },
    )?;
    result
}

fn moments_from(keys: &Keys) -> Result<GroundStateMoments> {
    let gs = solve_ground_state(need(&keys.r_max, "r_max")?, need(&keys.grid_n, "grid_n")?, need(&keys.tol, "tol")?)?;
    Ok(compute_moments(&gs)?)
}

#[derive(Serialize)]
struct GroundSummary {
    central_value: f64,
    tail_coefficient: f64,
    tail_k0_coefficient: f64,
    newton_iterations: usize,
    residual: f64,
    moments: GroundStateMoments,
    identity_defect: f64,
}

fn ground_state(run: &Run, keys: &Keys) -> Result<()> {
    run.write_resolved(keys)?;
    let gs = solve_ground_state(need(&keys.r_max, "r_max")?, need(&keys.grid_n, "grid_n")?, need(&keys.tol, "tol")?)?;
    let moments = compute_moments(&gs)?;
    let mut csv = run.create("ground_state.csv")?;
    gs.write_csv(&mut csv)?;
    csv.flush()?;
    let summary = GroundSummary {
        central_value: gs.central_value(),
        tail_coefficient: gs.tail_coefficient,
        tail_k0_coefficient: gs.tail_k0_coefficient,
        newton_iterations: gs.newton_iterations,
        residual: gs.residual,
        moments,
        identity_defect: moments.identity_defect(),
    };
    run.write_json("moments.json", &summary)?;
    run.say(format!("w(0) = {:.9}", summary.central_value));
    run.say(format!(
        "I2 = {:.6}  I3 = {:.6}  Igrad = {:.6}  J1 = {:.6}  nu1 = {:.6}  nu2 = {:.6}",
        moments.i2, moments.i3, moments.igrad, moments.j1, moments.nu1, moments.nu2
    ));
    run.say(format!("largest identity defect {:.3e}", summary.identity_defect));
    Ok(())
}

#[derive(Serialize)]
struct DiskCheck {
    radius: f64,
    nodes: usize,
    mollifier: f64,
    r_min: f64,
    r_max: f64,
    max_relative_error: f64,
}

#[derive(Serialize)]
struct GreenSummary {
    expansion: ExpansionCoefficients,
    c1_exact: f64,
    c2_exact: f64,
    disk_check: DiskCheck,
}

/// Largest relative gap between `g0` and the smoothed-source disk solve on
/// the nodes in `[lo, hi]`.
pub fn disk_check_error(radius: f64, nodes: usize, mollifier: f64, lo: f64, hi: f64) -> Result<f64> {
    let (r, u) = helmholtz_disk_reference(radius, nodes, mollifier)?;
    let mut worst = 0.0f64;
    for (&rj, &uj) in r.iter().zip(&u).filter(|(&r, _)| (lo..=hi).contains(&r)) {
        let exact = g0(rj)?;
        worst = worst.max(((uj - exact) / exact).abs());
    }
    Ok(worst)
}

fn green(run: &Run, keys: &Keys) -> Result<()> {
    run.write_resolved(keys)?;
    let mut csv = run.create("g0_table.csv")?;
    write_table_csv(
        &mut csv,
        need(&keys.table_r_min, "table_r_min")?,
        need(&keys.table_r_max, "table_r_max")?,
        need(&keys.table_points, "table_points")?,
    )?;
    csv.flush()?;
    let expansion = expansion_coefficients()?;
    let (radius, nodes, mollifier) = (
        need(&keys.disk_radius, "disk_radius")?,
        need(&keys.disk_nodes, "disk_nodes")?,
        need(&keys.mollifier, "mollifier")?,
    );
    let summary = GreenSummary {
        expansion,
        c1_exact: c1_exact(),
        c2_exact: c2_exact(),
        disk_check: DiskCheck {
            radius,
            nodes,
            mollifier,
            r_min: 0.5,
            r_max: 5.0,
            max_relative_error: disk_check_error(radius, nodes, mollifier, 0.5, 5.0)?,
        },
    };
    run.write_json("green.json", &summary)?;
    run.say(format!("c1 = {:.10} (exact {:.10})", expansion.c1, c1_exact()));
    run.say(format!("c2 = {:.10} (exact {:.10})", expansion.c2, c2_exact()));
    run.say(format!(
        "disk solve vs g0 on [0.5, 5]: max relative error {:.3e}",
        summary.disk_check.max_relative_error
    ));
    Ok(())
}

/// Cluster parameters, filling `h_second` from the domain when unset.
fn cluster_params(keys: &mut Keys, moments: &GroundStateMoments) -> Result<ClusterParams> {
    if keys.h_second.is_none() {
        let curve = BoundaryCurve::from_spec(&parse_domain(&need(&keys.domain, "domain")?)?)?;
        let maxima = curve.find_curvature_maxima()?;
        let first = maxima.maxima.first().ok_or_else(|| {
            crate::CliError::Invalid(format!(
                "domain has no nondegenerate curvature maximum; set h_second ({})",
                maxima.diagnostic.unwrap_or_default()
            ))
        })?;
        keys.h_second = Some(first.h_second);
    }
    Ok(ClusterParams::new(
        need(&keys.eps, "eps")?,
        need(&keys.d, "D")?,
        need(&keys.k, "k")?,
        need(&keys.h_second, "h_second")?,
        moments,
    )?)
}

#[derive(Serialize)]
struct PerturbationProbe {
    samples: usize,
    size: f64,
    seed: u64,
    /// Probes whose drift has negative inner product with the displacement.
    restoring: usize,
}

#[derive(Serialize)]
struct ReduceSummary {
    params: ClusterParams,
    log_parameter: f64,
    configuration: SpikeConfiguration,
    /// `ε · offsets`, in domain arc length.
    arc_offsets: Vec<f64>,
    admissibility: AdmissibilityReport,
    perturbations: PerturbationProbe,
    warnings: Vec<String>,
}

fn probe_restoring(s: &[f64], p: &ClusterParams, samples: usize, size: f64, seed: u64) -> Result<usize> {
    let scale = s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let scale = if scale.is_finite() { scale } else { 1.0 / p.sigma };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut restoring = 0;
    for _ in 0..samples {
        let delta: Vec<f64> = s.iter().map(|_| size * scale * rng.random_range(-1.0..1.0)).collect();
        let moved: Vec<f64> = s.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let drift = reduced_drift(&moved, p)?;
        if drift.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            restoring += 1;
        }
    }
    Ok(restoring)
}

fn reduce(run: &Run, keys: &mut Keys) -> Result<()> {
    let moments = moments_from(keys)?;
    let p = cluster_params(keys, &moments)?;
    run.write_resolved(keys)?;
    let sol = solve_positions(&p, None)?;
    let eta = need(&keys.eta, "eta")?;
    let samples = need(&keys.perturbations, "perturbations")?;
    let size = need(&keys.perturbation_size, "perturbation_size")?;
    let seed = need(&keys.seed, "seed")?;
    let summary = ReduceSummary {
        params: p,
        log_parameter: p.log_parameter(),
        arc_offsets: sol.offsets.iter().map(|s| p.epsilon * s).collect(),
        admissibility: validate_admissibility(&sol.offsets, &p, eta),
        perturbations: PerturbationProbe {
            samples,
            size,
            seed,
            restoring: probe_restoring(&sol.offsets, &p, samples, size, seed)?,
        },
        warnings: p.regime_warnings(&RegimeSafety::default()),
        configuration: sol,
    };
    run.write_json("positions.json", &summary)?;
    let mut csv = run.create("gaps.csv")?;
    write_gap_csv(&mut csv, &summary.configuration.offsets, &p)?;
    csv.flush()?;
    let offsets: Vec<String> = summary.configuration.offsets.iter().map(|s| format!("{s:.6}")).collect();
    run.say(format!("k = {}: offsets [{}]", p.k, offsets.join(", ")));
    run.say(format!(
        "residual {:.3e} after {} iterations; admissible: {}",
        summary.configuration.residual, summary.configuration.iterations, summary.admissibility.pass
    ));
    for w in &summary.warnings {
        run.say(format!("warning: {w}"));
    }
    Ok(())
}

/// Integers within `1e-9` print without decimals.
fn format_eigenvalue(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.12}")
    }
}

fn stability(run: &Run, keys: &mut Keys) -> Result<()> {
    let moments = moments_from(keys)?;
    let p = cluster_params(keys, &moments)?;
    run.write_resolved(keys)?;
    let sol = solve_positions(&p, None)?;
    let report: SmallSpectrumReport = small_eigenvalue_estimates(&p, &sol)?;
    run.write_json("spectrum.json", &report)?;
    let mut a = run.create("matrix_a.csv")?;
    write_matrix_csv(&mut a, &build_matrix_a(p.k)?)?;
    a.flush()?;
    let mut m = run.create("matrix_m.csv")?;
    write_matrix_csv(&mut m, &build_matrix_m(&sol, &p)?)?;
    m.flush()?;
    let eig: Vec<String> = report.eigenvalues_a.iter().map(|&v| format_eigenvalue(v)).collect();
    run.say(format!("eigenvalues of A (k = {}): {{{}}}", p.k, eig.join(", ")));
    run.say(format!("synchronous estimate {:.6e}", report.synchronous));
    for mode in &report.modes {
        run.say(format!(
            "n = {}: matrix {:.6e}  closed form {:.6e}  {:?}",
            mode.n, mode.matrix_estimate, mode.closed_form, mode.classification
        ));
    }
    for w in &report.warnings {
        run.say(format!("warning: {w}"));
    }
    Ok(())
}

#[derive(Serialize)]
struct NlepSummary {
    r_max: f64,
    intervals: usize,
    config: NlepConfig,
    spectra: Vec<NlepSpectrum>,
    /// `[re, im]` of the dominant eigenvalue per mode.
    dominant: Vec<[f64; 2]>,
    sweep: Option<TauSweep>,
}

fn nlep(run: &Run, keys: &Keys) -> Result<()> {
    run.write_resolved(keys)?;
    let (r_max, intervals) = (need(&keys.nlep_r_max, "nlep_r_max")?, need(&keys.nlep_intervals, "nlep_intervals")?);
    let gs = solve_ground_state(r_max, intervals, 1e-12)?;
    let grid = NlepGrid::from_ground_state(&gs);
    let config = NlepConfig {
        gamma: need(&keys.gamma, "gamma")?,
        method: parse_method(&need(&keys.method, "method")?)?,
        ..NlepConfig::default()
    };
    let tau = need(&keys.tau, "tau")?;
    let mut spectra = Vec::new();
    for m in 0..=need(&keys.modes, "modes")? {
        run.progress(format!("mode {m}"));
        spectra.push(solve_nlep(m, tau, &grid, &config)?);
    }
    let steps = need(&keys.tau_steps, "tau_steps")?;
    let sweep = if steps > 0 {
        Some(tau_sweep(need(&keys.tau_max, "tau_max")?, steps, &grid, &config)?)
    } else {
        None
    };
    let mut csv = run.create("spectrum.csv")?;
    write_spectrum_csv(&mut csv, &spectra)?;
    csv.flush()?;
    if let Some(sweep) = &sweep {
        let mut csv = run.create("sweep.csv")?;
        write_sweep_csv(&mut csv, sweep)?;
        csv.flush()?;
    }
    let summary = NlepSummary {
        r_max,
        intervals,
        config,
        dominant: spectra.iter().map(|s| [s.dominant().re, s.dominant().im]).collect(),
        spectra,
        sweep,
    };
    run.write_json("nlep.json", &summary)?;
    for (m, d) in summary.dominant.iter().enumerate() {
        run.say(format!("m = {m}: dominant eigenvalue {:.6} {:+.6}i", d[0], d[1]));
    }
    if let Some(sweep) = &summary.sweep {
        match sweep.first_crossing {
            Some(t) => run.say(format!("tau sweep: first crossing at tau = {t}")),
            None => run.say("tau sweep: no crossing"),
        }
    }
    for s in &summary.spectra {
        for w in &s.warnings {
            run.say(format!("warning (m = {}): {w}", s.m));
        }
    }
    Ok(())
}

fn write_snapshots_csv<W: Write>(mut out: W, snapshots: &[Snapshot]) -> Result<()> {
    writeln!(out, "step,t,u_max,mass_u,mass_v,spikes,boundary_spikes,centroid")?;
    for s in snapshots {
        let boundary = s.spikes.iter().filter(|x| x.arc.is_some()).count();
        let centroid = s.centroid.map(|c| format!("{c:.12e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:.10e},{:.12e},{:.12e},{:.12e},{},{},{}",
            s.step,
            s.t,
            s.u_max,
            s.mass_u,
            s.mass_v,
            s.spikes.len(),
            boundary,
            centroid
        )?;
    }
    Ok(())
}

fn simulate(run: &Run, keys: &mut Keys) -> Result<()> {
    let mut config = sim_config(keys)?;
    if config.reference.is_none() {
        let reference = Simulator::new(config.clone())?.reference;
        config.reference = Some(reference);
        keys.reference = Some(reference);
    }
    run.write_resolved(keys)?;
    let fields: Option<PathBuf> = config.write_fields.then(|| run.dir.join("fields"));
    if let Some(dir) = &fields {
        fs::create_dir_all(dir)?;
    }
    let mut grid = None;
    let trajectory = sim::run_with(&config, |sim, state, snap| {
        run.progress(format!("t = {:.3}: {} spikes, max u {:.4}", snap.t, snap.spikes.len(), snap.u_max));
        if let Some(dir) = &fields {
            write_snapshot(dir, &format!("step_{:08}", snap.step), &sim.grid, state)?;
        }
        if grid.is_none() {
            grid = Some(sim.grid.clone());
        }
        Ok(())
    })?;
    let grid = grid.expect("the initial snapshot is always recorded");
    let mut out = run.create("summary.json")?;
    write_summary(&mut out, &config, &grid, config.reference.unwrap_or(0.0), &trajectory)?;
    writeln!(out)?;
    out.flush()?;
    let mut tracks = run.create("tracks.csv")?;
    write_tracks_csv(&mut tracks, &trajectory.snapshots)?;
    tracks.flush()?;
    let mut snaps = run.create("snapshots.csv")?;
    write_snapshots_csv(&mut snaps, &trajectory.snapshots)?;
    snaps.flush()?;
    let last = trajectory.snapshots.last().expect("at least one snapshot");
    run.say(format!(
        "t = {}: {} spikes, max u {:.6}, {} rejected steps",
        last.t,
        last.spikes.len(),
        last.u_max,
        trajectory.rejected_steps
    ));
    for s in &last.spikes {
        match s.arc {
            Some(arc) => run.say(format!("  boundary spike at arc {arc:.6}, height {:.6}", s.height)),
            None => run.say(format!(
                "  interior spike at ({:.6}, {:.6}), height {:.6}",
                s.position[0], s.position[1], s.height
            )),
        }
    }
    Ok(())
}

fn verify_all(run: &Run, keys: &Keys) -> Result<()> {
    run.write_resolved(keys)?;
    let report = verify::run_suite(keys, |c| run.progress(c.line()))?;
    run.write_json("verify_results.json", &report)?;
    for c in &report.checks {
        run.say(c.line());
    }
    run.say(format!("{} passed, {} failed", report.passed, report.failed));
    if report.failed > 0 {
        return Err(crate::CliError::ChecksFailed(report.failed).into());
    }
    Ok(())
}

