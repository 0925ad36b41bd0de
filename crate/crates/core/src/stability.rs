//! Small eigenvalues of a boundary cluster.
//!
//! Translational modes of the cluster are governed by the nearest-neighbour
//! matrix `M` built from `σ² G0''` at the solved gaps; the combinatorial matrix
//! `A` is its leading-order shape, with spectrum `n(n+1)`. The synchronous
//! mode, in which all spikes move together, is set by the curvature alone and
//! is smaller by a factor of order `1/L`, `L = log(ξσ/(εD))`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::g0_second;
use crate::linalg::SymTridiagonal;
use crate::reduced::{ClusterParams, RegimeSafety, SpikeConfiguration};

/// The `k × k` matrix with `a_ss = (s-1)(k-s+1) + s(k-s)` and
/// `a_{s,s+1} = a_{s+1,s} = -s(k-s)`.
pub fn build_matrix_a(k: usize) -> Result<SymTridiagonal> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let diag = (1..=k)
        .map(|s| ((s - 1) * (k - s + 1) + s * (k - s)) as f64)
        .collect();
    let off = (1..k).map(|s| -((s * (k - s)) as f64)).collect();
    SymTridiagonal::new(diag, off)
}

/// Ascending eigenvalues of [`build_matrix_a`].
pub fn eigenvalues_a(k: usize) -> Result<Vec<f64>> {
    build_matrix_a(k)?.eigenvalues()
}

/// Weighted path Laplacian with weights `σ² G0''(σ gap)` at the given offsets.
pub fn build_matrix_m(
    config: &SpikeConfiguration,
    params: &ClusterParams,
) -> Result<SymTridiagonal> {
    let s = &config.offsets;
    if s.len() != params.k || s.is_empty() {
        return Err(Error::Precondition(format!(
            "expected {} offsets",
            params.k
        )));
    }
    if !s.windows(2).all(|p| p[1] > p[0]) {
        return Err(Error::Precondition(
            "offsets must be strictly increasing".into(),
        ));
    }
    if !(config.residual.is_finite() && config.residual < 1e-6) {
        return Err(Error::Precondition(format!(
            "configuration is not an equilibrium (scaled residual {:e})",
            config.residual
        )));
    }
    let sig = params.sigma;
    let weights: Vec<f64> = s
        .windows(2)
        .map(|p| Ok(sig * sig * g0_second(sig * (p[1] - p[0]))?))
        .collect::<Result<_>>()?;
    let k = s.len();
    let diag = (0..k)
        .map(|i| {
            let left = if i > 0 { weights[i - 1] } else { 0.0 };
            let right = if i + 1 < k { weights[i] } else { 0.0 };
            left + right
        })
        .collect();
    SymTridiagonal::new(diag, weights.iter().map(|w| -w).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Stable,
    Unstable,
    ZeroToLeadingOrder,
}

fn classify(value: f64, scale: f64) -> Classification {
    if value.abs() <= 1e-9 * scale {
        Classification::ZeroToLeadingOrder
    } else if value < 0.0 {
        Classification::Stable
    } else {
        Classification::Unstable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeEstimate {
    pub n: usize,
    /// Eigenvalue of `M` for this mode.
    pub mu: f64,
    /// `-(ν2 ξσ / J1) μ_n`.
    pub matrix_estimate: f64,
    /// `(ν1 h'' / (2 J1)) ε³ L n(n+1)`.
    pub closed_form: f64,
    pub classification: Classification,
}

/// Leading-order small-eigenvalue estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallSpectrumReport {
    pub k: usize,
    pub log_parameter: f64,
    pub eigenvalues_a: Vec<f64>,
    pub eigenvalues_m: Vec<f64>,
    /// Modes `n = 0..k-1` of `M`; `n = 0` is the translation null mode.
    pub modes: Vec<ModeEstimate>,
    /// `(3/2) ν1 ε³ h'' / J1`.
    pub synchronous: f64,
    pub synchronous_classification: Classification,
    /// Prefactor of `n(n+1)` in the closed form.
    pub translational_prefactor: f64,
    pub stable: bool,
    pub warnings: Vec<String>,
    /// Values are leading-order asymptotic estimates.
    pub asymptotic: bool,
}

/// `(3/2) ν1 ε³ h'' / J1`.
pub fn synchronous_estimate(params: &ClusterParams) -> f64 {
    1.5 * params.nu1 * params.epsilon.powi(3) * params.h_second / params.j1
}

/// `(ν1 h'' / (2 J1)) ε³ L n(n+1)`.
pub fn closed_form_estimate(params: &ClusterParams, n: usize) -> f64 {
    translational_prefactor(params) * (n * (n + 1)) as f64
}

fn translational_prefactor(params: &ClusterParams) -> f64 {
    params.nu1 * params.h_second / (2.0 * params.j1)
        * params.epsilon.powi(3)
        * params.log_parameter()
}

pub fn small_eigenvalue_estimates(
    params: &ClusterParams,
    config: &SpikeConfiguration,
) -> Result<SmallSpectrumReport> {
    let k = params.k;
    let m = build_matrix_m(config, params)?;
    let eig_m = m.eigenvalues()?;
    let eig_a = eigenvalues_a(k)?;
    let scale = params.nu2 * params.xi_sigma / params.j1;
    let mu_scale = eig_m
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let modes: Vec<ModeEstimate> = eig_m
        .iter()
        .enumerate()
        .map(|(n, &mu)| {
            let matrix_estimate = if n == 0 && mu.abs() <= 1e-9 * mu_scale {
                0.0
            } else {
                -scale * mu
            };
            ModeEstimate {
                n,
                mu,
                matrix_estimate,
                closed_form: closed_form_estimate(params, n),
                classification: classify(matrix_estimate, scale * mu_scale),
            }
        })
        .collect();
    let synchronous = synchronous_estimate(params);
    let synchronous_classification = classify(synchronous, synchronous.abs());
    let stable = synchronous < 0.0 && modes.iter().skip(1).all(|m| m.matrix_estimate < 0.0);
    Ok(SmallSpectrumReport {
        k,
        log_parameter: params.log_parameter(),
        eigenvalues_a: eig_a,
        eigenvalues_m: eig_m,
        modes,
        synchronous,
        synchronous_classification,
        translational_prefactor: translational_prefactor(params),
        stable,
        warnings: params.regime_warnings(&RegimeSafety::default()),
        asymptotic: true,
    })
}

/// Writes a dense CSV dump of a symmetric tridiagonal matrix.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &SymTridiagonal) -> Result<()> {
    let k = m.order();
    for i in 0..k {
        let row: Vec<String> = (0..k)
            .map(|j| {
                let v = if i == j {
                    m.diag[i]
                } else if j == i + 1 {
                    m.off[i]
                } else if i == j + 1 {
                    m.off[j]
                } else {
                    0.0
                };
                format!("{v:.17e}")
            })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_a_matrices() {
        let a = build_matrix_a(2).unwrap();
        assert_eq!(
            (a.diag.clone(), a.off.clone()),
            (vec![1.0, 1.0], vec![-1.0])
        );
        let a = build_matrix_a(3).unwrap();
        assert_eq!(
            (a.diag.clone(), a.off.clone()),
            (vec![2.0, 4.0, 2.0], vec![-2.0, -2.0])
        );
        let a = build_matrix_a(1).unwrap();
        assert_eq!(a.diag, vec![0.0]);
        assert!(build_matrix_a(0).is_err());
    }

    #[test]
    fn a_annihilates_constants() {
        for k in 1..=12 {
            let a = build_matrix_a(k).unwrap();
            assert!(a.mul_vec(&vec![1.0; k]).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn a_spectrum_is_n_times_n_plus_one() {
        assert_eq!(eigenvalues_a(1).unwrap(), vec![0.0]);
        let e = eigenvalues_a(5).unwrap();
        for (n, v) in e.iter().enumerate() {
            assert!((v - (n * (n + 1)) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn matrix_csv_is_square() {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &build_matrix_a(3).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 3));
    }
}
