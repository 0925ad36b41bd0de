//! Neumann Green's function of `-Δ + 1` on the upper half plane.
//!
//! Even reflection across the boundary turns the half-plane problem into the
//! whole-plane one with a doubled source, so `G0(r) = K0(r) / π`. The small-r
//! expansion `G0(r) = -log(r)/π + c1 + c2 r² log r + ψ(r)` has
//! `c1 = (ln 2 - γ)/π` and `c2 = -1/(4π)`; [`expansion_coefficients`] recovers
//! both by a least-squares fit so they can be compared against these values.

pub mod bessel;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use bessel::{bessel_k0, bessel_k1, EULER_GAMMA};

/// Evaluation configuration. The kernel itself carries no state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfPlaneGreen {
    pub crossover: f64,
    pub target_precision: f64,
}

impl Default for HalfPlaneGreen {
    fn default() -> Self {
        Self {
            crossover: bessel::SERIES_CROSSOVER,
            target_precision: 1e-10,
        }
    }
}

fn check_radius(func: &'static str, r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { func, value: r })
    }
}

/// `G0(r) = K0(r)/π`.
pub fn g0(r: f64) -> Result<f64> {
    check_radius("g0", r)?;
    Ok(bessel_k0(r) / PI)
}

/// `G0'(r) = -K1(r)/π`, negative for all `r > 0`.
pub fn g0_prime(r: f64) -> Result<f64> {
    check_radius("g0_prime", r)?;
    Ok(-bessel_k1(r) / PI)
}

/// `G0''(r) = (K0(r) + K1(r)/r)/π`, from `K0' = -K1` and
/// `K1' = -K0 - K1/r`.
pub fn g0_second(r: f64) -> Result<f64> {
    check_radius("g0_second", r)?;
    Ok((bessel_k0(r) + bessel_k1(r) / r) / PI)
}

/// The analytic values of the expansion constants.
pub fn c1_exact() -> f64 {
    (std::f64::consts::LN_2 - EULER_GAMMA) / PI
}

pub fn c2_exact() -> f64 {
    -0.25 / PI
}

/// Result of fitting `G0(r) + log(r)/π` against `{1, r² log r, r²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub c1: f64,
    pub c2: f64,
    /// Coefficient of `r²`, the leading term of ψ.
    pub r2: f64,
    /// Max absolute fit residual over the sample radii.
    pub residual: f64,
}

const EXPANSION_RESIDUAL_LIMIT: f64 = 1e-8;

/// Fits the small-r expansion at radii log-spaced over `[1e-5, 1e-2]`.
pub fn expansion_coefficients() -> Result<ExpansionCoefficients> {
    let n = 25;
    let radii: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(-5.0 + 3.0 * i as f64 / (n - 1) as f64))
        .collect();
    // Columns are scaled to unit max so the normal equations stay tame.
    let cols: [fn(f64) -> f64; 3] = [|_| 1.0, |r| r * r * r.ln(), |r| r * r];
    let scales: Vec<f64> = cols
        .iter()
        .map(|c| radii.iter().fold(0.0_f64, |m, &r| m.max(c(r).abs())))
        .collect();
    let a = DMatrix::from_fn(n, 3, |i, j| cols[j](radii[i]) / scales[j]);
    let b = DVector::from_iterator(n, radii.iter().map(|&r| bessel_k0(r) / PI + r.ln() / PI));
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Accuracy(format!("expansion fit failed: {e}")))?;
    let residual = (&a * &x - &b).amax();
    if residual > EXPANSION_RESIDUAL_LIMIT {
        return Err(Error::ExpansionMismatch {
            residual,
            limit: EXPANSION_RESIDUAL_LIMIT,
        });
    }
    Ok(ExpansionCoefficients {
        c1: x[0] / scales[0],
        c2: x[1] / scales[1],
        r2: x[2] / scales[2],
        residual,
    })
}

/// Predicted magnitude of `G(σ p_i, σ p_j)` for spikes `hops` apart.
///
/// Neighbouring spikes sit at `σ d ≈ L - (3/2) log L` with
/// `L = log(ξσ / (εD))`, and their interaction is of order `q |log q|` with
/// `q = εD/ξσ = e^{-L}`. This inverts the spacing law for `L` (larger root)
/// and returns `(q L)^hops`.
pub fn interaction_order(spacing: f64, sigma: f64, hops: u32) -> Result<f64> {
    if !(spacing > 0.0) {
        return Err(Error::param("spacing", "must be positive"));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    if hops == 0 {
        return Err(Error::param("hops", "must be at least 1"));
    }
    let x = sigma * spacing;
    let l = implied_log_parameter(x)?;
    Ok(((-l).exp() * l).powi(hops as i32))
}

/// Larger root `L` of `L - 1.5 log L = x`.
pub fn implied_log_parameter(x: f64) -> Result<f64> {
    let min_value = 1.5 - 1.5 * 1.5_f64.ln();
    if x <= min_value {
        return Err(Error::Regime(format!(
            "scaled spacing {x} below the minimum {min_value:.4} of L - 1.5 log L"
        )));
    }
    let mut l = (x + 1.5 * x.max(1.5).ln()).max(1.5 + 1e-3);
    for _ in 0..100 {
        let f = l - 1.5 * l.ln() - x;
        let df = 1.0 - 1.5 / l;
        let step = f / df;
        l = (l - step).max(1.5 + 1e-12);
        if step.abs() < 1e-15 * l {
            break;
        }
    }
    Ok(l)
}

/// Radial reference solution of `-Δu + u = 2 δ_s` on a disk with
/// `u(R) = 0`, where `δ_s` is a unit-mass Gaussian of width `mollifier`.
///
/// The factor 2 accounts for the even reflection, so away from the source the
/// result approximates `G0`. Returns the node radii and values.
pub fn helmholtz_disk_reference(
    radius: f64,
    nodes: usize,
    mollifier: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(radius > 0.0) || nodes < 10 || !(mollifier > 0.0) {
        return Err(Error::param(
            "helmholtz_disk_reference",
            "need radius > 0, nodes >= 10, mollifier > 0",
        ));
    }
    let h = radius / nodes as f64;
    let n = nodes; // unknowns at r_0 .. r_{n-1}; u(r_n) = 0
    let s2 = mollifier * mollifier;
    let source = |r: f64| 2.0 * (-(r * r) / s2).exp() / (PI * s2);
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    // Origin: -4 (u1 - u0)/h² + u0 = f0
    diag[0] = 4.0 / (h * h) + 1.0;
    sup[0] = -4.0 / (h * h);
    rhs[0] = source(0.0);
    for j in 1..n {
        let r = j as f64 * h;
        let lo = -(1.0 / (h * h) - 1.0 / (2.0 * r * h));
        let hi = -(1.0 / (h * h) + 1.0 / (2.0 * r * h));
        sub[j - 1] = lo;
        diag[j] = 2.0 / (h * h) + 1.0;
        if j + 1 < n {
            sup[j] = hi;
        }
        rhs[j] = source(r);
    }
    let u = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let r = (0..n).map(|j| j as f64 * h).collect();
    Ok((r, u))
}

/// Writes `r,g0,g0_prime` rows for `count` radii log-spaced in `[r_min, r_max]`.
pub fn write_table_csv<W: Write>(mut out: W, r_min: f64, r_max: f64, count: usize) -> Result<()> {
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::param(
            "green table",
            "need 0 < r_min < r_max and count >= 2",
        ));
    }
    writeln!(out, "r,g0,g0_prime")?;
    let ratio = (r_max / r_min).ln();
    for i in 0..count {
        let r = r_min * (ratio * i as f64 / (count - 1) as f64).exp();
        writeln!(out, "{:.12e},{:.16e},{:.16e}", r, g0(r)?, g0_prime(r)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent truncated ascending series for K0, written without the
    /// harmonic-number recursion used by the library.
    fn k0_oracle(x: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..40u32 {
            let fact: f64 = (1..=k).map(f64::from).product();
            let hk: f64 = (1..=k).map(|j| 1.0 / f64::from(j)).sum();
            let t = (0.5 * x).powi(2 * k as i32) / (fact * fact);
            total += t * (hk - EULER_GAMMA - (0.5 * x).ln());
        }
        total
    }

    #[test]
    fn rejects_nonpositive_radius() {
        assert!(matches!(g0(0.0), Err(Error::Domain { .. })));
        assert!(matches!(g0_prime(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn near_origin_logarithmic_behaviour() {
        let r: f64 = 1e-4;
        let lead = -r.ln() / PI + c1_exact();
        assert!((g0(r).unwrap() - lead).abs() < 1e-4);
        assert!((g0(r).unwrap() - k0_oracle(r) / PI).abs() < 1e-13);
    }

    #[test]
    fn value_at_one_matches_series_oracle() {
        let k0_1 = k0_oracle(1.0);
        assert!((k0_1 - 0.42102).abs() < 1e-5);
        assert!((g0(1.0).unwrap() - k0_1 / PI).abs() < 1e-14);
    }

    #[test]
    fn monotone_decay() {
        assert!(g0(2.0).unwrap() > g0(3.0).unwrap());
        assert!(g0(3.0).unwrap() > g0(5.0).unwrap());
        assert!(g0(5.0).unwrap() > 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-5;
        let fd = (g0(3.0 + h).unwrap() - g0(3.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - g0_prime(3.0).unwrap()).abs() < 1e-8);
        for &r in &[1e-3, 0.5, 2.0, 7.0, 40.0] {
            assert!(g0_prime(r).unwrap() < 0.0);
        }
    }

    #[test]
    fn derivative_ratio_tends_to_minus_one() {
        let ratio = g0_prime(20.0).unwrap() / g0(20.0).unwrap();
        assert!((ratio + 1.0).abs() < 0.03);
    }

    #[test]
    fn radial_ode_residual() {
        let h = 1e-4;
        for i in 1..100 {
            let r = 0.1 * i as f64;
            let d2 = (g0_prime(r + h).unwrap() - g0_prime(r - h).unwrap()) / (2.0 * h);
            if r >= 0.5 {
                let res = d2 + g0_prime(r).unwrap() / r - g0(r).unwrap();
                assert!(res.abs() < 1e-6, "r = {r}: {res}");
            }
            let res2 = g0_second(r).unwrap() + g0_prime(r).unwrap() / r - g0(r).unwrap();
            assert!(res2.abs() < 1e-12);
        }
    }

    #[test]
    fn crossover_is_seamless() {
        for [(a, b), (c, d)] in [bessel::crossover_branches(2.0)] {
            assert!((a - b).abs() < 1e-10);
            assert!((c - d).abs() < 1e-10);
        }
        let below = g0(2.0).unwrap();
        let above = g0(2.0 + 1e-15).unwrap();
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn expansion_constants() {
        let e = expansion_coefficients().unwrap();
        assert!((e.c1 - c1_exact()).abs() < 1e-5, "c1 = {}", e.c1);
        assert!((e.c1 - 0.0369).abs() < 1e-4);
        assert!((e.c2 - c2_exact()).abs() < 1e-5, "c2 = {}", e.c2);
        assert!(e.residual < 1e-8);
    }

    #[test]
    fn matches_brute_force_disk_solve() {
        let (radius, nodes) = (30.0, 30_000);
        let (r, u) = helmholtz_disk_reference(radius, nodes, 0.02).unwrap();
        let h = radius / nodes as f64;
        let mut worst = 0.0f64;
        for (&rj, &uj) in r.iter().zip(&u).filter(|(&r, _)| (0.5..=5.0).contains(&r)) {
            worst = worst.max(((uj - g0(rj).unwrap()) / g0(rj).unwrap()).abs());
        }
        assert!(worst < 1e-3, "worst relative error {worst:e}");
        assert!(r.iter().any(|&x| (x - 5.0).abs() < h));
    }

    #[test]
    fn interaction_order_structure() {
        let one = interaction_order(40.0, 0.25, 1).unwrap();
        let two = interaction_order(40.0, 0.25, 2).unwrap();
        assert!((two / (one * one) - 1.0).abs() < 1e-12);
        let far = interaction_order(4000.0, 0.25, 1).unwrap();
        assert!(far < 1e-300 || far < one * 1e-100);
        assert!(interaction_order(1.0, 0.1, 1).is_err());
    }
}
