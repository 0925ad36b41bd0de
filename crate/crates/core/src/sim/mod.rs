//! IMEX simulator for the Gierer–Meinhardt system on star-shaped domains.
//!
//! ```text
//! u_t   = ε² Δu - u + u²/v
//! τ v_t = D Δv - v + u²          (∂u/∂ν = ∂v/∂ν = 0 on ∂Ω)
//! ```
//!
//! Diffusion is implicit and reactions explicit. For `τ = 0` the inhibitor is
//! slaved to the activator by an elliptic solve after every step. The banded
//! factorizations of `I - dt ε² Δ_h` and of the inhibitor operator are reused
//! across steps and rebuilt only when a step is split after a positivity
//! failure.
//!
//! Desk-scale parameters (`ε` of a few hundredths) are far from the asymptotic
//! regime of the reduced model; simulations support direction and persistence
//! checks only.

mod detect;
mod grid;
mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use detect::{detect_spikes, DetectedSpike, SpikeDetection};
pub use grid::SimGrid;
pub use output::{write_snapshot, write_summary, write_tracks_csv, RunSummary};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, CurveSpec};
use crate::ground_state::{compute_moments, solve_ground_state, GroundState};
use crate::linalg::BandedLu;
use crate::reduced::spike_height_scale;

/// Spike amplitude `A` in `u = A Σ w(|x - P_i| / ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// `A = D ξσ / ε²`.
    Ansatz,
    /// `A` equal to the mean of `v(P_i)` for the seeded `u`, the local
    /// balance of `u ≈ v(P) w`; one elliptic solve.
    Consistent,
    Fixed(f64),
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Seeding {
    /// `u ≡ u0`, `v ≡ v0`.
    Constant { u: f64, v: f64 },
    /// Boundary spikes at the given signed arc-length offsets from the
    /// reference point with `v` from the elliptic solve.
    Boundary { offsets: Vec<f64>, amplitude: Amplitude },
}

impl fmt::Display for Seeding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seeding::Constant { u, v } => write!(f, "constant:{u},{v}"),
            Seeding::Boundary { offsets, amplitude } => {
                let list: Vec<String> = offsets.iter().map(|s| s.to_string()).collect();
                write!(f, "boundary:{}", list.join(","))?;
                match amplitude {
                    Amplitude::Ansatz => Ok(()),
                    Amplitude::Consistent => write!(f, "@consistent"),
                    Amplitude::Fixed(a) => write!(f, "@{a}"),
                }
            }
        }
    }
}

impl FromStr for Seeding {
    type Err = Error;

    /// `constant:U,V` or `boundary:S1,S2,…[@consistent|@A]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::param("seed", format!("{why} in {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let numbers = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad("bad number")))
                .collect()
        };
        match kind.trim() {
            "constant" => match numbers(rest)?.as_slice() {
                [u, v] => Ok(Seeding::Constant { u: *u, v: *v }),
                _ => Err(bad("expected two values")),
            },
            "boundary" => {
                let (list, amp) = match rest.split_once('@') {
                    Some((l, "consistent")) => (l, Amplitude::Consistent),
                    Some((l, a)) => {
                        let a = a.trim().parse::<f64>().map_err(|_| bad("bad amplitude"))?;
                        if !(a > 0.0) {
                            return Err(bad("amplitude must be positive"));
                        }
                        (l, Amplitude::Fixed(a))
                    }
                    None => (rest, Amplitude::Ansatz),
                };
                let offsets = numbers(list)?;
                if offsets.is_empty() {
                    return Err(bad("no spike offsets"));
                }
                Ok(Seeding::Boundary { offsets, amplitude: amp })
            }
            _ => Err(bad("unknown seeding kind")),
        }
    }
}

impl From<Seeding> for String {
    fn from(s: Seeding) -> Self {
        s.to_string()
    }
}

impl TryFrom<String> for Seeding {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub domain: CurveSpec,
    pub epsilon: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub tau: f64,
    pub n_rho: usize,
    pub n_theta: usize,
    /// Radial clustering toward the boundary, 0 for uniform rings.
    pub stretch: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: Seeding,
    /// Curve parameter of the arc-length origin; `None` uses the first
    /// nondegenerate curvature maximum, or `t = 0` if there is none.
    pub reference: Option<f64>,
    /// Steps between snapshots.
    pub snapshot_every: usize,
    /// Detection threshold as a fraction of `max u`.
    pub threshold: f64,
    /// Diagnostic switch: `false` integrates pure diffusion.
    pub reaction: bool,
    /// Write full field snapshots, not only spike tracks.
    pub write_fields: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            domain: CurveSpec::Circle { radius: 1.0 },
            epsilon: 0.05,
            d: 0.1,
            tau: 0.0,
            n_rho: 40,
            n_theta: 256,
            stretch: 3.0,
            dt: 0.05,
            t_end: 50.0,
            seed: Seeding::Boundary {
                offsets: vec![0.0],
                amplitude: Amplitude::Ansatz,
            },
            reference: None,
            snapshot_every: 100,
            threshold: 0.2,
            reaction: true,
            write_fields: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be positive and finite"))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("D", self.d)?;
        positive("dt", self.dt)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "must be non-negative"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", "must be non-negative"));
        }
        if self.reaction && self.dt >= 0.5 {
            return Err(Error::param("dt", "explicit reaction needs dt < 0.5"));
        }
        if self.tau > 0.0 && self.dt >= self.tau {
            return Err(Error::param("dt", "explicit inhibitor decay needs dt < tau"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::param("snapshot_every", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("threshold", "must lie in (0, 1)"));
        }
        if let Seeding::Constant { u, v } = self.seed {
            if !(u >= 0.0 && v > 0.0) {
                return Err(Error::param("seed", "constant state needs u >= 0 and v > 0"));
            }
        }
        Ok(())
    }

    /// Number of base steps needed to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Fields on the grid, ring-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

/// Largest relative negativity tolerated before a step is rejected; cross
/// derivatives make the scheme slightly non-monotone far from spikes.
const NEGATIVITY_TOLERANCE: f64 = 1e-10;
/// Relative residual above which a linear solve is a failure.
const SOLVE_TOLERANCE: f64 = 1e-8;
/// Maximum number of step halvings.
const MAX_HALVINGS: u32 = 10;

struct Factorizations {
    activator: BandedLu,
    inhibitor: BandedLu,
}

/// Time stepper holding the grid and cached factorizations.
pub struct Simulator {
    pub config: SimConfig,
    pub grid: SimGrid,
    /// Curve parameter of the arc-length origin.
    pub reference: f64,
    elliptic: BandedLu,
    levels: BTreeMap<u32, Factorizations>,
    pub rejected_steps: usize,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let curve = BoundaryCurve::from_spec(&config.domain)?;
        let grid = SimGrid::build(&curve, config.n_rho, config.n_theta, config.stretch)?;
        let reference = match config.reference {
            Some(t) => t,
            None => curve
                .find_curvature_maxima()
                .ok()
                .and_then(|m| m.maxima.first().map(|c| c.t))
                .unwrap_or(0.0),
        };
        let elliptic = BandedLu::factor(&grid.laplacian.shifted(1.0, -config.d))?;
        Ok(Self {
            config,
            grid,
            reference,
            elliptic,
            levels: BTreeMap::new(),
            rejected_steps: 0,
        })
    }

    fn ensure_level(&mut self, level: u32) -> Result<()> {
        if !self.levels.contains_key(&level) {
            let dt = self.config.dt / f64::from(1u32 << level);
            let c = &self.config;
            let lap = &self.grid.laplacian;
            let activator = BandedLu::factor(&lap.shifted(1.0, -dt * c.epsilon * c.epsilon))?;
            let inhibitor = if c.tau > 0.0 {
                BandedLu::factor(&lap.shifted(c.tau, -dt * c.d))?
            } else {
                self.elliptic.clone()
            };
            self.levels.insert(level, Factorizations { activator, inhibitor });
        }
        Ok(())
    }

    /// Solves `D Δv - v + u² = 0`.
    pub fn quasi_steady_inhibitor(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = u.iter().map(|x| x * x).collect();
        solve_shifted(&self.elliptic, &self.grid, 1.0, self.config.d, &rhs)
    }

    /// Builds the initial state from the seeding rule.
    pub fn initial_state(&self, ground: &GroundState) -> Result<SimState> {
        let n = self.grid.len();
        match &self.config.seed {
            Seeding::Constant { u, v } => Ok(SimState {
                u: vec![*u; n],
                v: vec![*v; n],
                t: 0.0,
            }),
            Seeding::Boundary { offsets, amplitude } => {
                let eps = self.config.epsilon;
                let curve = self.grid.curve();
                let centers: Vec<[f64; 2]> = offsets
                    .iter()
                    .map(|&s| curve.point(curve.parameter_at_arc_offset(self.reference, s)))
                    .collect();
                let shape: Vec<f64> = self
                    .grid
                    .position
                    .iter()
                    .map(|x| {
                        centers
                            .iter()
                            .map(|p| {
                                let r = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt() / eps;
                                if r < ground.r_max() {
                                    ground.value_at(r)
                                } else {
                                    0.0
                                }
                            })
                            .sum()
                    })
                    .collect();
                let amp = match amplitude {
                    Amplitude::Fixed(a) => *a,
                    Amplitude::Ansatz => {
                        let sigma = eps / self.config.d.sqrt();
                        let i2 = compute_moments(ground)?.i2;
                        self.config.d * spike_height_scale(sigma, i2)? / (eps * eps)
                    }
                    Amplitude::Consistent => {
                        // v scales with A², so A = 1 / mean v1(P_i) for the unit-amplitude v1.
                        let v1 = self.quasi_steady_inhibitor(&shape)?;
                        let mean: f64 = centers.iter().map(|p| self.value_near(&v1, *p)).sum::<f64>() / centers.len() as f64;
                        1.0 / mean
                    }
                };
                let u: Vec<f64> = shape.iter().map(|s| amp * s).collect();
                let v = self.quasi_steady_inhibitor(&u)?;
                Ok(SimState { u, v, t: 0.0 })
            }
        }
    }

    /// Field value at the cell center nearest to `p`.
    fn value_near(&self, field: &[f64], p: [f64; 2]) -> f64 {
        let k = self
            .grid
            .position
            .iter()
            .enumerate()
            .map(|(k, x)| (k, (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        field[k]
    }

    /// Advances by one base step `dt`, splitting it into `2^k` substeps
    /// after positivity failures.
    pub fn step(&mut self, state: &SimState) -> Result<SimState> {
        for level in 0..=MAX_HALVINGS {
            let substeps = 1usize << level;
            let mut current = state.clone();
            let mut ok = true;
            for _ in 0..substeps {
                match self.substep(&current, level)? {
                    Some(next) => current = next,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                current.t = state.t + self.config.dt;
                return Ok(current);
            }
            self.rejected_steps += 1;
        }
        Err(Error::StepFailure {
            t: state.t,
            reason: format!("negative fields after {MAX_HALVINGS} step halvings"),
        })
    }

    /// One IMEX substep; `None` signals a positivity failure.
    fn substep(&mut self, state: &SimState, level: u32) -> Result<Option<SimState>> {
        let dt = self.config.dt / f64::from(1u32 << level);
        let (tau, reaction) = (self.config.tau, self.config.reaction);
        let rhs_u: Vec<f64> = state
            .u
            .iter()
            .zip(&state.v)
            .map(|(&u, &v)| if reaction { u + dt * (-u + u * u / v) } else { u })
            .collect();
        self.ensure_level(level)?;
        let factors = &self.levels[&level];
        let eps2 = self.config.epsilon * self.config.epsilon;
        let u = solve_shifted(&factors.activator, &self.grid, 1.0, dt * eps2, &rhs_u)?;
        let v = if tau > 0.0 {
            let rhs_v: Vec<f64> = state
                .u
                .iter()
                .zip(&state.v)
                .map(|(&u, &v)| if reaction { tau * v + dt * (-v + u * u) } else { tau * v })
                .collect();
            solve_shifted(&factors.inhibitor, &self.grid, tau, dt * self.config.d, &rhs_v)?
        } else if reaction {
            self.quasi_steady_inhibitor(&u)?
        } else {
            state.v.clone()
        };
        let u_max = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let v_max = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let u_neg = u.iter().any(|&x| x < -NEGATIVITY_TOLERANCE * u_max || !x.is_finite());
        let v_bad = v.iter().any(|&x| !(x > 0.0) && (reaction || x < -NEGATIVITY_TOLERANCE * v_max));
        if u_neg || (v_bad && v_max > 0.0) {
            return Ok(None);
        }
        Ok(Some(SimState { u, v, t: state.t + dt }))
    }

    /// Residual `ε² Δu - u + u²/v` of the activator equation, ring-major.
    pub fn activator_residual(&self, state: &SimState) -> Vec<f64> {
        let eps2 = self.config.epsilon * self.config.epsilon;
        self.grid
            .apply_laplacian(&state.u)
            .iter()
            .zip(state.u.iter().zip(&state.v))
            .map(|(lap, (&u, &v))| eps2 * lap - u + u * u / v)
            .collect()
    }

    pub fn detect(&self, state: &SimState) -> SpikeDetection {
        detect_spikes(&self.grid, state, self.config.threshold, self.config.epsilon, self.reference)
    }
}

/// Solves `(α I - c Δ_h) x = b` for the increment `y = x - b/α`, which obeys
/// `(α I - c Δ_h) y = (c/α) Δ_h b`. Constant data then pass through exactly.
fn solve_shifted(lu: &BandedLu, grid: &SimGrid, alpha: f64, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let base: Vec<f64> = rhs.iter().map(|b| b / alpha).collect();
    let forcing: Vec<f64> = grid.apply_laplacian(&base).iter().map(|l| c * l).collect();
    let (y, residual) = lu.solve(&grid.to_solver(&forcing));
    if !(residual <= SOLVE_TOLERANCE) {
        return Err(Error::LinearSolve { residual });
    }
    Ok(base.iter().zip(grid.from_solver(&y)).map(|(b, y)| b + y).collect())
}

/// Spike detections at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u_max: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub spikes: Vec<DetectedSpike>,
    /// Arc-length gaps between consecutive boundary spikes.
    pub gaps: Vec<f64>,
    /// Mean arc-length coordinate of the boundary spikes.
    pub centroid: Option<f64>,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    pub rejected_steps: usize,
}

fn snapshot(sim: &Simulator, state: &SimState, step: usize) -> Snapshot {
    let detection = sim.detect(state);
    let boundary: Vec<f64> = detection.spikes.iter().filter_map(|s| s.arc).collect();
    let gaps = boundary.windows(2).map(|p| p[1] - p[0]).collect();
    let centroid = if boundary.is_empty() {
        None
    } else {
        Some(boundary.iter().sum::<f64>() / boundary.len() as f64)
    };
    Snapshot {
        step,
        t: state.t,
        u_max: state.u.iter().fold(0.0f64, |a, &x| a.max(x)),
        mass_u: sim.grid.integral(&state.u),
        mass_v: sim.grid.integral(&state.v),
        spikes: detection.spikes,
        gaps,
        centroid,
    }
}

/// Integrates to `t_end`, recording a snapshot every `snapshot_every` steps
/// and at the end. `on_snapshot` sees each state as it is recorded.
pub fn run_with(
    config: &SimConfig,
    mut on_snapshot: impl FnMut(&Simulator, &SimState, &Snapshot) -> Result<()>,
) -> Result<Trajectory> {
    let ground = solve_ground_state(20.0, 2000, 1e-12)?;
    let mut sim = Simulator::new(config.clone())?;
    let mut state = sim.initial_state(&ground)?;
    let steps = config.steps();
    let mut snapshots = Vec::new();
    let first = snapshot(&sim, &state, 0);
    on_snapshot(&sim, &state, &first)?;
    snapshots.push(first);
    for step in 1..=steps {
        state = sim.step(&state)?;
        if step % config.snapshot_every == 0 || step == steps {
            let snap = snapshot(&sim, &state, step);
            on_snapshot(&sim, &state, &snap)?;
            snapshots.push(snap);
        }
    }
    Ok(Trajectory {
        snapshots,
        final_state: state,
        rejected_steps: sim.rejected_steps,
    })
}

pub fn run(config: &SimConfig) -> Result<Trajectory> {
    run_with(config, |_, _, _| Ok(()))
}
