//! Limiting spike-position system for a boundary cluster.
//!
//! Spikes sit at tangential arc-length offsets `s_1 < … < s_k` from the
//! curvature maximum, measured in units of `ε`. With `a = ν2 ξσ σ` and
//! `c = ν1 ε³ h''`, the residual is
//!
//! ```text
//! F_i = a (G0'(σ(s_i - s_{i-1})) - G0'(σ(s_{i+1} - s_i))) - c s_i
//! ```
//!
//! with the missing neighbour terms dropped for `i = 1` and `i = k`. `F` is the
//! gradient of `E(s) = a/σ Σ G0(σ(s_{i+1} - s_i)) - c/2 Σ s_i²`, which is
//! convex for `h'' < 0`, so the equilibrium is the unique minimiser of `E` and
//! spikes drift along `-F` ([`reduced_drift`]).
//!
//! `h''` is the second arc-length derivative of the curvature in domain units.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{g0_prime, g0_second};
use crate::ground_state::GroundStateMoments;
use crate::linalg::{solve_tridiagonal, SymTridiagonal};

/// Parameter bundle for the reduced system and the stability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterParams {
    pub epsilon: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub sigma: f64,
    pub k: usize,
    pub xi_sigma: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub h_second: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub tau: f64,
}

/// Safety ratios for `e^{-1/√D} ≪ ε ≪ √D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeSafety {
    /// Warn when `ε / √D` exceeds this.
    pub max_sigma: f64,
    /// Warn when `ε / e^{-1/√D}` falls below this.
    pub min_separation: f64,
}

impl Default for RegimeSafety {
    fn default() -> Self {
        Self {
            max_sigma: 0.1,
            min_separation: 10.0,
        }
    }
}

/// `ξσ = (log(1/σ) I2 / π)^{-1}`.
pub fn spike_height_scale(sigma: f64, i2: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Regime(format!("sigma = {sigma} must lie in (0, 1)")));
    }
    if !(i2 > 0.0) {
        return Err(Error::param("I2", "must be positive"));
    }
    Ok(std::f64::consts::PI / ((1.0 / sigma).ln() * i2))
}

impl ClusterParams {
    pub fn new(
        epsilon: f64,
        d: f64,
        k: usize,
        h_second: f64,
        moments: &GroundStateMoments,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(d > 0.0) {
            return Err(Error::param("D", "must be positive"));
        }
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if !(h_second < 0.0) {
            return Err(Error::param(
                "h_second",
                "the curvature maximum must be nondegenerate (h'' < 0)",
            ));
        }
        let sigma = epsilon / d.sqrt();
        let xi_sigma = spike_height_scale(sigma, moments.i2)?;
        Ok(Self {
            epsilon,
            d,
            sigma,
            k,
            xi_sigma,
            nu1: moments.nu1,
            nu2: moments.nu2,
            h_second,
            i2: moments.i2,
            j1: moments.j1,
            tau: 0.0,
        })
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// `L = log(ξσ / (εD))`.
    pub fn log_parameter(&self) -> f64 {
        (self.xi_sigma / (self.epsilon * self.d)).ln()
    }

    /// `ν2 ξσ σ`.
    pub fn interaction_scale(&self) -> f64 {
        self.nu2 * self.xi_sigma * self.sigma
    }

    /// `ν1 ε³ h''` (negative).
    pub fn curvature_coefficient(&self) -> f64 {
        self.nu1 * self.epsilon.powi(3) * self.h_second
    }

    /// Human-readable warnings for violations of the scale separation.
    pub fn regime_warnings(&self, safety: &RegimeSafety) -> Vec<String> {
        let mut out = Vec::new();
        let sqrt_d = self.d.sqrt();
        if self.sigma > safety.max_sigma {
            out.push(format!(
                "epsilon/sqrt(D) = {:.4} exceeds {} (epsilon not small against sqrt(D))",
                self.sigma, safety.max_sigma
            ));
        }
        let floor = (-1.0 / sqrt_d).exp();
        if self.epsilon < safety.min_separation * floor {
            out.push(format!(
                "epsilon = {:e} is within a factor {} of exp(-1/sqrt(D)) = {:e}",
                self.epsilon, safety.min_separation, floor
            ));
        }
        if self.d > 0.25 {
            out.push(format!("D = {} is not small", self.d));
        }
        out
    }
}

/// Equilibrium offsets and heights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeConfiguration {
    pub offsets: Vec<f64>,
    pub heights: Vec<f64>,
    /// `‖F‖∞ / (ν2 ξσ σ)`.
    pub residual: f64,
    pub iterations: usize,
}

fn check_configuration(s: &[f64], params: &ClusterParams) -> Result<()> {
    if s.len() != params.k {
        return Err(Error::param(
            "offsets",
            format!("expected {} offsets, got {}", params.k, s.len()),
        ));
    }
    let limit = 1e-12 / params.sigma;
    for p in s.windows(2) {
        let gap = p[1] - p[0];
        if gap.abs() < limit {
            return Err(Error::SingularInteraction { gap, limit });
        }
        if gap < 0.0 {
            return Err(Error::Precondition(
                "offsets must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Left-hand sides of the limiting system at `s`.
pub fn reduced_force(s: &[f64], params: &ClusterParams) -> Result<Vec<f64>> {
    check_configuration(s, params)?;
    let a = params.interaction_scale();
    let c = params.curvature_coefficient();
    let sig = params.sigma;
    let gp: Vec<f64> = s
        .windows(2)
        .map(|p| g0_prime(sig * (p[1] - p[0])))
        .collect::<Result<_>>()?;
    let k = s.len();
    Ok((0..k)
        .map(|i| {
            let left = if i > 0 { gp[i - 1] } else { 0.0 };
            let right = if i + 1 < k { gp[i] } else { 0.0 };
            a * (left - right) - c * s[i]
        })
        .collect())
}

/// Tangential velocity field of the spikes, `-F`.
pub fn reduced_drift(s: &[f64], params: &ClusterParams) -> Result<Vec<f64>> {
    Ok(reduced_force(s, params)?.into_iter().map(|f| -f).collect())
}

/// Symmetric tridiagonal Jacobian `∂F/∂s`: `(diag, off)`.
pub fn reduced_jacobian(s: &[f64], params: &ClusterParams) -> Result<SymTridiagonal> {
    check_configuration(s, params)?;
    let a = params.interaction_scale();
    let c = params.curvature_coefficient();
    let sig = params.sigma;
    let k = s.len();
    let coupling: Vec<f64> = s
        .windows(2)
        .map(|p| Ok(a * sig * g0_second(sig * (p[1] - p[0]))?))
        .collect::<Result<_>>()?;
    let diag = (0..k)
        .map(|i| {
            let left = if i > 0 { coupling[i - 1] } else { 0.0 };
            let right = if i + 1 < k { coupling[i] } else { 0.0 };
            left + right - c
        })
        .collect();
    let off = coupling.iter().map(|v| -v).collect();
    SymTridiagonal::new(diag, off)
}

/// Gap `s_i - s_{i-1}` predicted by the leading-order spacing law,
/// `σ^{-1} [L - (3/2) log L - log(-h'' ν1 / (2 ν2)) - log((i-1)(k+1-i))]`.
pub fn asymptotic_spacing(i: usize, params: &ClusterParams) -> Result<f64> {
    let k = params.k;
    if i < 2 || i > k {
        return Err(Error::param("i", format!("gap index must lie in 2..={k}")));
    }
    let l = params.log_parameter();
    if !(l > 1.0) {
        return Err(Error::Regime(format!(
            "log(xi_sigma/(epsilon D)) = {l} must exceed 1"
        )));
    }
    Ok(window_center(i, params, l) / params.sigma)
}

fn window_center(i: usize, params: &ClusterParams, l: f64) -> f64 {
    let k = params.k as f64;
    let i = i as f64;
    l - 1.5 * l.ln()
        - (-params.h_second * params.nu1 / (2.0 * params.nu2)).ln()
        - ((i - 1.0) * (k + 1.0 - i)).ln()
}

/// Seed with asymptotic gaps (at least `1/σ`), centered on zero.
pub fn asymptotic_seed(params: &ClusterParams) -> Vec<f64> {
    let mut s = vec![0.0; params.k];
    for i in 2..=params.k {
        let gap = asymptotic_spacing(i, params)
            .unwrap_or(0.0)
            .max(1.0 / params.sigma);
        s[i - 1] = s[i - 2] + gap;
    }
    let mean = s.iter().sum::<f64>() / params.k as f64;
    s.iter_mut().for_each(|v| *v -= mean);
    s
}

const MAX_NEWTON: usize = 100;
const ARMIJO: f64 = 1e-4;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn is_admissible_step(s: &[f64], limit: f64) -> bool {
    s.iter().all(|v| v.is_finite()) && s.windows(2).all(|p| p[1] - p[0] > limit)
}

/// Damped Newton solve of the limiting system.
///
/// Converges when `‖F‖∞ < 1e-12 ν2 ξσ σ` and the Newton step has reached
/// round-off relative to the cluster extent. Steps are halved until the
/// squared residual decreases by the Armijo fraction and the ordering of the
/// offsets is preserved.
pub fn solve_positions(
    params: &ClusterParams,
    initial: Option<&[f64]>,
) -> Result<SpikeConfiguration> {
    let k = params.k;
    let mut s = match initial {
        Some(init) => init.to_vec(),
        None => asymptotic_seed(params),
    };
    check_configuration(&s, params)?;
    let scale = params.interaction_scale();
    let tol = 1e-12 * scale;
    let limit = 1e-12 / params.sigma;
    let mut f = reduced_force(&s, params)?;
    let mut norm = sup_norm(&f);
    let converged = |s: Vec<f64>, norm: f64, it: usize| SpikeConfiguration {
        offsets: s,
        heights: vec![params.xi_sigma; k],
        residual: norm / scale,
        iterations: it,
    };
    for it in 0..MAX_NEWTON {
        if norm == 0.0 {
            return Ok(converged(s, norm, it));
        }
        let jac = reduced_jacobian(&s, params)?;
        let eig = jac.eigenvalues()?;
        let (lo, hi) = (eig[0].abs(), eig[k - 1].abs());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < 1e14) {
            return Err(Error::SingularJacobian { condition });
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = if k == 1 {
            vec![rhs[0] / jac.diag[0]]
        } else {
            solve_tridiagonal(&jac.off, &jac.diag, &jac.off, &rhs)?
        };
        // Below tolerance, keep polishing until the step reaches round-off.
        let extent = sup_norm(&s).max(1.0 / params.sigma);
        if norm < tol && sup_norm(&step) <= 1e-14 * extent {
            return Ok(converged(s, norm, it));
        }
        let merit = f.iter().map(|v| v * v).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = s.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            if is_admissible_step(&trial, limit) {
                let ft = reduced_force(&trial, params)?;
                let mt = ft.iter().map(|v| v * v).sum::<f64>();
                if mt <= (1.0 - 2.0 * ARMIJO * alpha) * merit {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                s = trial;
                f = ft;
                norm = sup_norm(&f);
            }
            None if norm < tol => return Ok(converged(s, norm, it)),
            None => break,
        }
    }
    Err(Error::Divergence {
        iterations: MAX_NEWTON,
        residual: norm / scale,
        last_iterate: s,
    })
}

/// One neighbour-gap check against the spacing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapCheck {
    pub index: usize,
    pub gap: f64,
    /// `σ · gap`.
    pub scaled_gap: f64,
    pub window_center: f64,
    /// `scaled_gap - window_center`.
    pub deviation: f64,
    /// `η - |deviation|`; non-negative when the check passes.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub eta: f64,
    pub ordered: bool,
    pub gaps: Vec<GapCheck>,
    pub mean_offset: f64,
    /// `η L / σ`.
    pub mean_bound: f64,
    pub mean_margin: f64,
    pub mean_pass: bool,
    pub pass: bool,
}

/// Checks neighbour gaps against `|σ gap - center_i| ≤ η` and the mean
/// offset against `|mean s| ≤ η L / σ`.
pub fn validate_admissibility(s: &[f64], params: &ClusterParams, eta: f64) -> AdmissibilityReport {
    let l = params.log_parameter();
    let ordered = s.windows(2).all(|p| p[1] > p[0]);
    let gaps: Vec<GapCheck> = (2..=s.len())
        .map(|i| {
            let gap = s[i - 1] - s[i - 2];
            let scaled_gap = params.sigma * gap;
            let center = window_center(i, params, l);
            let deviation = scaled_gap - center;
            let margin = eta - deviation.abs();
            GapCheck {
                index: i,
                gap,
                scaled_gap,
                window_center: center,
                deviation,
                margin,
                pass: margin >= 0.0,
            }
        })
        .collect();
    let mean_offset = s.iter().sum::<f64>() / s.len().max(1) as f64;
    let mean_bound = eta * l / params.sigma;
    let mean_margin = mean_bound - mean_offset.abs();
    let mean_pass = mean_margin >= 0.0;
    let pass = ordered && mean_pass && gaps.iter().all(|g| g.pass);
    AdmissibilityReport {
        eta,
        ordered,
        gaps,
        mean_offset,
        mean_bound,
        mean_margin,
        mean_pass,
        pass,
    }
}

/// Writes `index,gap,scaled_gap,asymptotic_gap,relative_deviation` rows.
pub fn write_gap_csv<W: Write>(mut out: W, s: &[f64], params: &ClusterParams) -> Result<()> {
    writeln!(
        out,
        "index,gap,scaled_gap,asymptotic_gap,relative_deviation"
    )?;
    for i in 2..=s.len() {
        let gap = s[i - 1] - s[i - 2];
        let asym = asymptotic_spacing(i, params)?;
        writeln!(
            out,
            "{i},{:.12e},{:.12e},{:.12e},{:.6e}",
            gap,
            params.sigma * gap,
            asym,
            (gap - asym) / gap
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments() -> GroundStateMoments {
        GroundStateMoments {
            i2: 15.5,
            i3: 23.25,
            igrad: 7.75,
            j1: 3.875,
            nu1: 2.8,
            nu2: 120.0,
            m1: -7.75,
        }
    }

    fn params(k: usize) -> ClusterParams {
        ClusterParams::new(1e-3, 4e-4, k, -18.0, &moments()).unwrap()
    }

    #[test]
    fn height_scale() {
        let i2: f64 = 15.5;
        let sigma = (-std::f64::consts::PI / i2).exp();
        assert!((spike_height_scale(sigma, i2).unwrap() - 1.0).abs() < 1e-14);
        assert!(spike_height_scale(0.05, i2).unwrap() > spike_height_scale(0.025, i2).unwrap());
        assert!(matches!(spike_height_scale(1.0, i2), Err(Error::Regime(_))));
    }

    #[test]
    fn single_spike_force() {
        let p = params(1);
        let f = reduced_force(&[0.3], &p).unwrap();
        assert!((f[0] + p.curvature_coefficient() * 0.3).abs() < 1e-20);
        assert_eq!(reduced_force(&[0.0], &p).unwrap(), vec![0.0]);
    }

    #[test]
    fn symmetric_forces_cancel() {
        let p = params(2);
        let f = reduced_force(&[-100.0, 100.0], &p).unwrap();
        assert_eq!(f[0] + f[1], 0.0);
        let p = params(3);
        let f = reduced_force(&[-150.0, 0.0, 150.0], &p).unwrap();
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn coincident_spikes_are_rejected() {
        let p = params(2);
        assert!(matches!(
            reduced_force(&[1.0, 1.0], &p),
            Err(Error::SingularInteraction { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params(4);
        let s = [-300.0, -90.0, 110.0, 310.0];
        let jac = reduced_jacobian(&s, &p).unwrap();
        let h = 1e-4;
        for j in 0..4 {
            let mut sp = s;
            let mut sm = s;
            sp[j] += h;
            sm[j] -= h;
            let fp = reduced_force(&sp, &p).unwrap();
            let fm = reduced_force(&sm, &p).unwrap();
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                let exact = if i == j {
                    jac.diag[i]
                } else if i + 1 == j {
                    jac.off[i]
                } else if j + 1 == i {
                    jac.off[j]
                } else {
                    0.0
                };
                assert!(
                    (fd - exact).abs() < 1e-6 * jac.diag[i].abs(),
                    "({i},{j}) {fd} {exact}"
                );
            }
        }
    }

    #[test]
    fn spacing_law_terms() {
        let p = params(3);
        assert_eq!(
            asymptotic_spacing(2, &p).unwrap(),
            asymptotic_spacing(3, &p).unwrap()
        );
        let p5 = params(5);
        let edge = asymptotic_spacing(2, &p5).unwrap();
        let middle = asymptotic_spacing(3, &p5).unwrap();
        assert!((p5.sigma * (edge - middle) - (6.0f64 / 4.0).ln()).abs() < 1e-12);
        assert!(middle < edge);
        assert!(asymptotic_spacing(1, &p5).is_err());
    }

    #[test]
    fn admissibility_detects_violations() {
        let p = params(3);
        let sol = solve_positions(&p, None).unwrap();
        assert!(validate_admissibility(&sol.offsets, &p, 0.5).pass);
        let mut wide = sol.offsets.clone();
        wide[2] += wide[2] - wide[1];
        let r = validate_admissibility(&wide, &p, 0.5);
        assert!(!r.gaps[1].pass && r.gaps[0].pass);
        let shift = 2.0 * 0.5 * p.log_parameter() / p.sigma;
        let moved: Vec<f64> = sol.offsets.iter().map(|v| v + shift).collect();
        let r = validate_admissibility(&moved, &p, 0.5);
        assert!(!r.mean_pass && r.gaps.iter().all(|g| g.pass));
    }
}
