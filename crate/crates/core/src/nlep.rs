//! Nonlocal eigenvalue problem for the large eigenvalues of a spike.
//!
//! With `L0 = Δ - 1 + 2w` and the even extension of the half-plane problem to
//! the whole plane, eigenfunctions split into angular modes `φ(r) e^{imθ}`:
//!
//! ```text
//! m = 0:  L0 φ - γ(λ) (∫ w φ / ∫ w²) w² = λ φ,   γ(λ) = 2 / (1 + τ λ)
//! m ≥ 1:  L0 φ = λ φ
//! ```
//!
//! The radial operator uses the grid `r_j = j h` with the second-order
//! stencil, the regular origin row (`m = 0`) or `φ(0) = 0` (`m ≥ 1`), and
//! `φ(r_max) = 0`. With weights `W_j = r_j`, `W_0 = h/8` the stencil is
//! self-adjoint, so local spectra come from symmetric tridiagonal solvers.
//!
//! For `m = 0` the rank-one term makes the matrix nonsymmetric. Its full
//! spectrum is computed densely on a moderate grid; selected eigenvalues are
//! then refined on the working grid as roots of the secular equation
//! `γ ⟨w, (L - λ)^{-1} w²⟩_W = ⟨w, w⟩_W`. For `τ > 0` the roots are continued
//! in `τ` from the `τ = 0` spectrum, by Newton on the full equation or by an
//! under-relaxed fixed point on the coefficient.

use std::io::Write;

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linalg::SymTridiagonal;

type C64 = Complex<f64>;

/// Ground-state samples on a uniform radial grid, `r_j = j h`, `j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NlepGrid {
    pub h: f64,
    pub w: Vec<f64>,
}

/// Grids below this many intervals trigger an accuracy warning.
pub const MIN_RECOMMENDED_NODES: usize = 500;

impl NlepGrid {
    /// Uses the ground-state grid itself.
    pub fn from_ground_state(gs: &GroundState) -> Self {
        Self {
            h: gs.h,
            w: gs.w.clone(),
        }
    }

    /// Samples the ground state on `intervals` uniform intervals of `[0, r_max]`.
    pub fn resample(gs: &GroundState, r_max: f64, intervals: usize) -> Result<Self> {
        if !(r_max > 0.0) || intervals < 4 {
            return Err(Error::param(
                "nlep grid",
                "need r_max > 0 and at least 4 intervals",
            ));
        }
        let h = r_max / intervals as f64;
        Ok(Self {
            h,
            w: (0..=intervals).map(|j| gs.value_at(j as f64 * h)).collect(),
        })
    }

    pub fn intervals(&self) -> usize {
        self.w.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.h * self.intervals() as f64
    }

    pub fn radius(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

/// Radial `L0` for one angular mode in the nodal basis.
///
/// Unknowns are `φ_j` for `j = first..n-1`, with `first = 0` for `m = 0`
/// and `first = 1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    pub m: u32,
    pub first: usize,
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    /// Quadrature weights making the operator self-adjoint.
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Assembles `d²/dr² + (1/r) d/dr - m²/r² - 1 + 2w` for mode `m`.
pub fn assemble_local(m: u32, grid: &NlepGrid) -> Result<LocalOperator> {
    let n = grid.intervals();
    if n < 4 {
        return Err(Error::param("nlep grid", "need at least 4 intervals"));
    }
    let mut warnings = Vec::new();
    if n < MIN_RECOMMENDED_NODES {
        warnings.push(format!(
            "radial grid has {n} intervals (< {MIN_RECOMMENDED_NODES}); eigenvalues carry O(h^2) error h = {}",
            grid.h
        ));
    }
    let h = grid.h;
    let h2 = h * h;
    let first = if m == 0 { 0 } else { 1 };
    let size = n - first;
    let mut sub = vec![0.0; size];
    let mut diag = vec![0.0; size];
    let mut sup = vec![0.0; size];
    let mut weights = vec![0.0; size];
    let m2 = (m as f64) * (m as f64);
    for (row, j) in (first..n).enumerate() {
        let pot = -1.0 + 2.0 * grid.w[j];
        if j == 0 {
            diag[row] = -4.0 / h2 + pot;
            sup[row] = 4.0 / h2;
            weights[row] = h / 8.0;
            continue;
        }
        let r = grid.radius(j);
        sub[row] = 1.0 / h2 - 0.5 / (r * h);
        sup[row] = 1.0 / h2 + 0.5 / (r * h);
        diag[row] = -2.0 / h2 - m2 / (r * r) + pot;
        weights[row] = r;
    }
    // Couplings to the pinned nodes vanish.
    sub[0] = 0.0;
    sup[size - 1] = 0.0;
    Ok(LocalOperator {
        m,
        first,
        sub,
        diag,
        sup,
        weights,
        warnings,
    })
}

impl LocalOperator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Radii of the unknowns.
    pub fn radii(&self, grid: &NlepGrid) -> Vec<f64> {
        (0..self.size())
            .map(|i| grid.radius(i + self.first))
            .collect()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * phi[i];
                if i > 0 {
                    y += self.sub[i] * phi[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * phi[i + 1];
                }
                y
            })
            .collect()
    }

    /// `W^{1/2} L W^{-1/2}`, symmetric with the same spectrum.
    pub fn symmetrized(&self) -> Result<SymTridiagonal> {
        let off = (0..self.size() - 1)
            .map(|i| {
                let p = self.sup[i] * self.sub[i + 1];
                if p < 0.0 {
                    return Err(Error::Precondition(
                        "stencil is not symmetrizable; refine the grid".into(),
                    ));
                }
                Ok(p.sqrt())
            })
            .collect::<Result<_>>()?;
        SymTridiagonal::new(self.diag.clone(), off)
    }

    /// Weighted inner product `Σ W_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u)
            .zip(v)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// Solves `(L - λ) x = rhs` for complex `λ`.
    fn shifted_solve(&self, lambda: C64, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.size();
        let mut c = vec![C64::new(0.0, 0.0); n];
        let mut d = vec![C64::new(0.0, 0.0); n];
        let mut beta = C64::new(self.diag[0], 0.0) - lambda;
        if beta.norm() == 0.0 {
            return Err(Error::LinearSolve {
                residual: f64::INFINITY,
            });
        }
        c[0] = C64::new(self.sup[0], 0.0) / beta;
        d[0] = rhs[0] / beta;
        for i in 1..n {
            beta = C64::new(self.diag[i], 0.0) - lambda - self.sub[i] * c[i - 1];
            if beta.norm() == 0.0 {
                return Err(Error::LinearSolve {
                    residual: f64::INFINITY,
                });
            }
            c[i] = C64::new(self.sup[i], 0.0) / beta;
            d[i] = (rhs[i] - self.sub[i] * d[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= c[i] * next;
        }
        Ok(d)
    }
}

/// Solver for the `λ`-dependent coefficient when `τ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Continuation {
    /// Newton on the secular equation with `γ(λ) = γ0 / (1 + τλ)`.
    Newton,
    /// Under-relaxed fixed point on the coefficient.
    FixedPoint,
}

/// Numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlepConfig {
    /// Nonlocal coefficient at `τ = 0` (the model value is 2).
    pub gamma: f64,
    /// Intervals of the grid used for the dense `m = 0` spectrum.
    pub dense_intervals: usize,
    /// Number of leading `m = 0` eigenvalues refined on the working grid.
    pub tracked: usize,
    pub method: Continuation,
    /// Under-relaxation of the fixed-point coefficient update.
    pub relaxation: f64,
    pub max_fixed_point: usize,
    pub tolerance: f64,
}

impl Default for NlepConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            dense_intervals: 500,
            tracked: 4,
            method: Continuation::Newton,
            relaxation: 0.5,
            max_fixed_point: 500,
            tolerance: 1e-11,
        }
    }
}

/// Largest `τ` increment taken by a single continuation step.
const TAU_SUBSTEP: f64 = 0.01;

/// Eigenvalues of one mode, sorted by real part, descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NlepSpectrum {
    pub m: u32,
    pub tau: f64,
    pub gamma: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub eigenvalues: Vec<C64>,
    pub warnings: Vec<String>,
}

fn serialize_complex<S: serde::Serializer>(
    values: &[C64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for v in values {
        seq.serialize_element(&[v.re, v.im])?;
    }
    seq.end()
}

impl NlepSpectrum {
    /// Eigenvalue with the largest real part.
    pub fn dominant(&self) -> C64 {
        self.eigenvalues[0]
    }
}

fn sort_descending(values: &mut [C64]) {
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// The `m = 0` rank-one structure: `A = L - γ w² ⟨w, ·⟩_W / ⟨w, w⟩_W`.
struct Nonlocal<'a> {
    local: &'a LocalOperator,
    source: Vec<C64>,
    probe: Vec<f64>,
    norm: f64,
}

impl<'a> Nonlocal<'a> {
    fn new(local: &'a LocalOperator, grid: &NlepGrid) -> Self {
        let w = &grid.w[..local.size()];
        let probe: Vec<f64> = w.iter().zip(&local.weights).map(|(a, b)| a * b).collect();
        Self {
            local,
            source: w.iter().map(|v| C64::new(v * v, 0.0)).collect(),
            probe,
            norm: local.inner(w, w),
        }
    }

    /// `f(λ) = 1 - γ(λ) ⟨w, (L-λ)^{-1} w²⟩ / ⟨w, w⟩` and `f'(λ)`, where
    /// `coefficient` returns `γ(λ)` and `γ'(λ)`.
    fn secular(&self, coefficient: &dyn Fn(C64) -> (C64, C64), lambda: C64) -> Result<(C64, C64)> {
        let x = self.local.shifted_solve(lambda, &self.source)?;
        let y = self.local.shifted_solve(lambda, &x)?;
        let px: C64 = self.probe.iter().zip(&x).map(|(p, v)| v * *p).sum::<C64>() / self.norm;
        let py: C64 = self.probe.iter().zip(&y).map(|(p, v)| v * *p).sum::<C64>() / self.norm;
        let (gamma, dgamma) = coefficient(lambda);
        Ok((C64::new(1.0, 0.0) - gamma * px, -dgamma * px - gamma * py))
    }

    /// Root of the secular equation near `start` by damped Newton.
    fn refine(
        &self,
        coefficient: &dyn Fn(C64) -> (C64, C64),
        start: C64,
        tolerance: f64,
    ) -> Result<C64> {
        let mut lambda = start;
        let (mut f, mut df) = self.secular(coefficient, lambda)?;
        for _ in 0..100 {
            let step = f / df;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = lambda - step * alpha;
                if let Ok((ft, dft)) = self.secular(coefficient, trial) {
                    if ft.norm() < f.norm() {
                        lambda = trial;
                        f = ft;
                        df = dft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (step * alpha).norm() <= tolerance * (1.0 + lambda.norm()) || f.norm() < 1e-14 {
                return Ok(lambda);
            }
            if !accepted {
                break;
            }
        }
        Err(Error::Eigen(format!(
            "secular Newton stalled near {} + {}i (|f| = {:e})",
            lambda.re,
            lambda.im,
            f.norm()
        )))
    }
}

/// Dense spectrum of the `m = 0` operator with coefficient `gamma`.
pub fn dense_mode_zero_spectrum(grid: &NlepGrid, gamma: f64) -> Result<Vec<C64>> {
    let local = assemble_local(0, grid)?;
    let n = local.size();
    let nl = Nonlocal::new(&local, grid);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = local.diag[i];
        if i > 0 {
            a[(i, i - 1)] = local.sub[i];
        }
        if i + 1 < n {
            a[(i, i + 1)] = local.sup[i];
        }
        let s = gamma * nl.source[i].re / nl.norm;
        for j in 0..n {
            a[(i, j)] -= s * nl.probe[j];
        }
    }
    let mut values: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::Eigen(
            "dense eigensolver returned non-finite values".into(),
        ));
    }
    sort_descending(&mut values);
    Ok(values)
}

/// Solves for mode `m` at delay `tau`.
///
/// `m ≥ 1` or `γ = 0`: full local spectrum. `m = 0`: the `config.tracked` leading
/// eigenvalues, seeded from the dense spectrum at `τ = 0` and refined on
/// `grid`; for `τ > 0` they are continued from `τ = 0` in the coefficient.
pub fn solve_nlep(m: u32, tau: f64, grid: &NlepGrid, config: &NlepConfig) -> Result<NlepSpectrum> {
    if !(tau >= 0.0) {
        return Err(Error::param("tau", "must be non-negative"));
    }
    let local = assemble_local(m, grid)?;
    let mut warnings = local.warnings.clone();
    if m > 0 || config.gamma == 0.0 {
        let mut values: Vec<C64> = local
            .symmetrized()?
            .eigenvalues()?
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect();
        sort_descending(&mut values);
        return Ok(NlepSpectrum {
            m,
            tau,
            gamma: if m > 0 { 0.0 } else { config.gamma },
            eigenvalues: values,
            warnings,
        });
    }
    let seeds = mode_zero_seeds(grid, config, &mut warnings)?;
    let nl = Nonlocal::new(&local, grid);
    let mut values = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let at_zero = nl.refine(&frozen(config.gamma.into()), seed, config.tolerance)?;
        let lambda = if tau == 0.0 {
            at_zero
        } else {
            let substeps = (tau / TAU_SUBSTEP).ceil().max(1.0) as usize;
            continue_in_tau(&nl, at_zero, 0.0, tau, config, substeps)?
        };
        values.push(lambda);
    }
    dedupe(&mut values);
    sort_descending(&mut values);
    Ok(NlepSpectrum {
        m,
        tau,
        gamma: config.gamma,
        eigenvalues: values,
        warnings,
    })
}

fn dedupe(values: &mut Vec<C64>) {
    let mut out: Vec<C64> = Vec::with_capacity(values.len());
    for v in values.drain(..) {
        if !out
            .iter()
            .any(|u| (u - v).norm() <= 1e-8 * (1.0 + v.norm()))
        {
            out.push(v);
        }
    }
    *values = out;
}

/// Leading dense eigenvalues with a small positive imaginary offset so that
/// Newton can leave the real axis when a real pair collides.
fn mode_zero_seeds(
    grid: &NlepGrid,
    config: &NlepConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<C64>> {
    let coarse = if grid.intervals() <= config.dense_intervals {
        grid.clone()
    } else {
        let r_max = grid.r_max();
        let w = &grid.w;
        let n = config.dense_intervals;
        let h = r_max / n as f64;
        // Linear interpolation is enough for seeds.
        let sample = |r: f64| {
            let x = r / grid.h;
            let j = (x as usize).min(grid.intervals() - 1);
            let t = x - j as f64;
            (1.0 - t) * w[j] + t * w[j + 1]
        };
        NlepGrid {
            h,
            w: (0..=n).map(|j| sample(j as f64 * h)).collect(),
        }
    };
    if coarse.intervals() < MIN_RECOMMENDED_NODES {
        warnings.push(format!(
            "dense m = 0 grid has {} intervals",
            coarse.intervals()
        ));
    }
    let dense = dense_mode_zero_spectrum(&coarse, config.gamma)?;
    let mut seeds: Vec<C64> = Vec::new();
    for v in dense {
        if seeds.len() == config.tracked.max(1) {
            break;
        }
        if v.im < 0.0 {
            continue;
        }
        seeds.push(C64::new(v.re, v.im.max(1e-6)));
    }
    Ok(seeds)
}

/// Constant coefficient `γ`.
fn frozen(gamma: C64) -> impl Fn(C64) -> (C64, C64) {
    move |_| (gamma, C64::new(0.0, 0.0))
}

/// `γ(λ) = γ0 / (1 + τ λ)` and its derivative.
fn delayed(gamma: f64, tau: f64) -> impl Fn(C64) -> (C64, C64) {
    move |lambda| {
        let d = C64::new(1.0, 0.0) + lambda * tau;
        (gamma / d, -gamma * tau / (d * d))
    }
}

/// Continues an `m = 0` eigenvalue from `tau_from` to `tau_to` in
/// `substeps` equal increments.
fn continue_in_tau(
    nl: &Nonlocal,
    start: C64,
    tau_from: f64,
    tau_to: f64,
    config: &NlepConfig,
    substeps: usize,
) -> Result<C64> {
    let mut lambda = start;
    for step in 1..=substeps {
        let tau = tau_from + (tau_to - tau_from) * step as f64 / substeps as f64;
        let failure = |lambda: C64| Error::Continuation {
            tau,
            last_re: lambda.re,
            last_im: lambda.im,
        };
        lambda = match config.method {
            Continuation::Newton => nl
                .refine(&delayed(config.gamma, tau), lambda, config.tolerance)
                .map_err(|_| failure(lambda))?,
            Continuation::FixedPoint => {
                relaxed_fixed_point(nl, lambda, tau, config).ok_or_else(|| failure(lambda))?
            }
        };
        // A root with 1 + τλ = 0 is spurious.
        if (C64::new(1.0, 0.0) + lambda * tau).norm() < 1e-8 {
            return Err(failure(lambda));
        }
    }
    Ok(lambda)
}

/// `γ ← (1-ω) γ + ω · γ0/(1 + τ λ(γ))`, with `λ(γ)` the frozen-coefficient root.
fn relaxed_fixed_point(nl: &Nonlocal, start: C64, tau: f64, config: &NlepConfig) -> Option<C64> {
    let one = C64::new(1.0, 0.0);
    let mut lambda = start;
    let mut gamma = config.gamma / (one + lambda * tau);
    for _ in 0..config.max_fixed_point {
        lambda = nl.refine(&frozen(gamma), lambda, config.tolerance).ok()?;
        let target = config.gamma / (one + lambda * tau);
        let change = (target - gamma).norm();
        gamma = gamma * (1.0 - config.relaxation) + target * config.relaxation;
        if change <= config.tolerance * gamma.norm().max(1.0) {
            return Some(lambda);
        }
    }
    None
}

/// One row of a delay sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub max_re: f64,
    /// Imaginary part of the dominant eigenvalue.
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSweep {
    pub rows: Vec<SweepRow>,
    /// First `τ` at which the dominant real part is non-negative.
    pub first_crossing: Option<f64>,
}

/// Dominant `m = 0` real part on `steps + 1` equally spaced `τ ∈ [0, tau_max]`,
/// continuing every tracked eigenvalue from one row to the next.
pub fn tau_sweep(
    tau_max: f64,
    steps: usize,
    grid: &NlepGrid,
    config: &NlepConfig,
) -> Result<TauSweep> {
    if !(tau_max > 0.0) || steps == 0 {
        return Err(Error::param(
            "tau_sweep",
            "need tau_max > 0 and at least one step",
        ));
    }
    let base = solve_nlep(0, 0.0, grid, config)?;
    let local = assemble_local(0, grid)?;
    let nl = Nonlocal::new(&local, grid);
    let mut current: Vec<C64> = base
        .eigenvalues
        .iter()
        .map(|v| C64::new(v.re, v.im.max(1e-6)))
        .collect();
    let mut rows = Vec::with_capacity(steps + 1);
    let dominant = |vals: &[C64]| {
        vals.iter()
            .copied()
            .max_by(|a, b| {
                a.re.total_cmp(&b.re)
                    .then(a.im.abs().total_cmp(&b.im.abs()))
            })
            .expect("tracked eigenvalues")
    };
    let d0 = base.dominant();
    rows.push(SweepRow {
        tau: 0.0,
        max_re: d0.re,
        im: d0.im.abs(),
    });
    for s in 1..=steps {
        let tau_prev = tau_max * (s - 1) as f64 / steps as f64;
        let tau = tau_max * s as f64 / steps as f64;
        let mut next = Vec::with_capacity(current.len());
        for &lambda in &current {
            let substeps = ((tau - tau_prev) / TAU_SUBSTEP).ceil().max(1.0) as usize;
            next.push(continue_in_tau(
                &nl, lambda, tau_prev, tau, config, substeps,
            )?);
        }
        dedupe(&mut next);
        current = next;
        let d = dominant(&current);
        rows.push(SweepRow {
            tau,
            max_re: d.re,
            im: d.im.abs(),
        });
    }
    let first_crossing = rows.iter().find(|r| r.max_re >= 0.0).map(|r| r.tau);
    Ok(TauSweep {
        rows,
        first_crossing,
    })
}

/// Writes `m,re,im` rows.
pub fn write_spectrum_csv<W: Write>(mut out: W, spectra: &[NlepSpectrum]) -> Result<()> {
    writeln!(out, "m,re,im")?;
    for s in spectra {
        for v in &s.eigenvalues {
            writeln!(out, "{},{:.12e},{:.12e}", s.m, v.re, v.im)?;
        }
    }
    Ok(())
}

/// Writes `tau,max_re` rows.
pub fn write_sweep_csv<W: Write>(mut out: W, sweep: &TauSweep) -> Result<()> {
    writeln!(out, "tau,max_re")?;
    for r in &sweep.rows {
        writeln!(out, "{:.12e},{:.12e}", r.tau, r.max_re)?;
    }
    Ok(())
}

/// Applies `L0` assembled directly on a polar grid to the field
/// `field[(j - 1) * n_theta + l] = φ(r_j, θ_l)`, `j = 1..n-1`, with value
/// `origin` at `r = 0` and `φ = 0` at `r_max`. Angular derivatives are
/// spectral. Returns the image at the same nodes and at the origin.
pub fn polar_apply(
    grid: &NlepGrid,
    n_theta: usize,
    origin: f64,
    field: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = grid.intervals();
    if n_theta < 4 || n_theta % 2 != 0 {
        return Err(Error::param("n_theta", "must be even and at least 4"));
    }
    if field.len() != (n - 1) * n_theta {
        return Err(Error::param(
            "field",
            "length must be (intervals - 1) * n_theta",
        ));
    }
    let h = grid.h;
    let h2 = h * h;
    let at = |j: usize, l: usize| -> f64 {
        match j {
            0 => origin,
            j if j >= n => 0.0,
            j => field[(j - 1) * n_theta + l],
        }
    };
    let ring_mean = (0..n_theta).map(|l| at(1, l)).sum::<f64>() / n_theta as f64;
    let image_origin = 4.0 * (ring_mean - origin) / h2 + (-1.0 + 2.0 * grid.w[0]) * origin;
    let mut out = vec![0.0; field.len()];
    let mut ring = vec![0.0; n_theta];
    for j in 1..n {
        let r = grid.radius(j);
        for (l, v) in ring.iter_mut().enumerate() {
            *v = at(j, l);
        }
        let dtt = spectral_second_derivative(&ring);
        for l in 0..n_theta {
            let (lo, mid, hi) = (at(j - 1, l), at(j, l), at(j + 1, l));
            out[(j - 1) * n_theta + l] = (hi - 2.0 * mid + lo) / h2
                + (hi - lo) / (2.0 * r * h)
                + dtt[l] / (r * r)
                + (-1.0 + 2.0 * grid.w[j]) * mid;
        }
    }
    Ok((image_origin, out))
}

/// Second derivative of uniformly sampled periodic data via its real DFT.
fn spectral_second_derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let half = n / 2;
    let theta = |l: usize| std::f64::consts::TAU * l as f64 / n as f64;
    let mut out = vec![0.0; n];
    for k in 1..=half {
        let (mut a, mut b) = (0.0, 0.0);
        for (l, v) in values.iter().enumerate() {
            let (s, c) = (k as f64 * theta(l)).sin_cos();
            a += v * c;
            b += v * s;
        }
        let norm = if k == half {
            1.0 / n as f64
        } else {
            2.0 / n as f64
        };
        let (a, b) = (a * norm, b * norm);
        let k2 = (k * k) as f64;
        for (l, o) in out.iter_mut().enumerate() {
            let (s, c) = (k as f64 * theta(l)).sin_cos();
            *o -= k2 * (a * c + b * s);
        }
    }
    out
}
