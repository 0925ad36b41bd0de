//! Radial ground state of `Δw - w + w² = 0` in the plane and its moments.
//!
//! The profile is computed on the uniform grid `r_j = j h`, `h = r_max / n`,
//! with the second-order radial stencil
//!
//! ```text
//! (w[j+1] - 2w[j] + w[j-1]) / h² + (w[j+1] - w[j-1]) / (2 r_j h) - w[j] + w[j]² = 0
//! ```
//!
//! and the regular origin row `4 (w[1] - w[0]) / h² - w[0] + w[0]² = 0`.
//! Marching this recurrence from a trial `w(0)` is a discrete shooting
//! method; `w(0)` is bisected on `[1, 4]` by classifying each trajectory as
//! crossing zero (too high) or turning upward (too low). Round-off makes any
//! shot depart from the decaying branch near `r ≈ 18`, so the bisected
//! trajectory is kept where the two bracketing shots still agree, continued
//! by the matched `K0` tail, and the full grid system is then solved by
//! Newton's method with the linear decay condition `w[n+1] / w[n] =
//! K0(r_{n+1}) / K0(r_n)` at the outer edge.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::bessel::bessel_k0_scaled;
use crate::linalg::solve_tridiagonal;

/// Tabulated ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    pub h: f64,
    /// Radius at which the tail coefficient is fitted.
    pub tail_radius: f64,
    /// `C` in `w(r) ≈ C r^{-1/2} e^{-r}`.
    pub tail_coefficient: f64,
    /// `C_K` in `w(r) ≈ C_K K0(r)`.
    pub tail_k0_coefficient: f64,
    /// Newton iterations used by the final polish.
    pub newton_iterations: usize,
    /// Max-norm residual of the grid equations, relative to `w(0)`.
    pub residual: f64,
}

/// Moment integrals over the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundStateMoments {
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "I3")]
    pub i3: f64,
    #[serde(rename = "Igrad")]
    pub igrad: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// `∫ w ∂w/∂y₁ y₁ dy` over the half plane; equals `-I2 / 2`.
    #[serde(rename = "M1")]
    pub m1: f64,
}

const BRACKET: (f64, f64) = (1.0, 4.0);
const MAX_NEWTON: usize = 50;

/// Outcome of marching the recurrence from a trial central value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Crossed zero: central value too high.
    Over,
    /// Stopped decreasing while positive: central value too low.
    Under,
    /// Reached the end of the grid without either event.
    Undecided,
}

fn march(w0: f64, h: f64, n: usize, out: &mut Vec<f64>) -> Shot {
    out.clear();
    out.push(w0);
    out.push(w0 + 0.25 * h * h * (w0 - w0 * w0));
    if out[1] <= 0.0 {
        return Shot::Over;
    }
    if out[1] >= w0 {
        return Shot::Under;
    }
    for j in 1..n {
        let r = j as f64 * h;
        let (wm, w) = (out[j - 1], out[j]);
        let a = 1.0 / (h * h) - 0.5 / (r * h);
        let c = 1.0 / (h * h) + 0.5 / (r * h);
        let next = ((2.0 / (h * h) + 1.0 - w) * w - a * wm) / c;
        out.push(next);
        if next <= 0.0 {
            return Shot::Over;
        }
        if next >= w {
            return Shot::Under;
        }
    }
    Shot::Undecided
}

/// `K0(r1) / K0(r0)` without overflow.
fn k0_ratio(r1: f64, r0: f64) -> f64 {
    bessel_k0_scaled(r1) / bessel_k0_scaled(r0) * (r0 - r1).exp()
}

/// Solves for the ground state on `[0, r_max]` with `grid_n` intervals.
///
/// Requires `r_max ≥ 20`, `grid_n ≥ 2000`, `tol ≤ 1e-10`.
pub fn solve_ground_state(r_max: f64, grid_n: usize, tol: f64) -> Result<GroundState> {
    if !(r_max >= 20.0) {
        return Err(Error::param("r_max", "must be at least 20"));
    }
    if grid_n < 2000 {
        return Err(Error::param("grid_n", "must be at least 2000"));
    }
    if !(tol > 0.0 && tol <= 1e-10) {
        return Err(Error::param("tol", "must lie in (0, 1e-10]"));
    }
    let n = grid_n;
    let h = r_max / n as f64;

    let (mut lo, mut hi) = BRACKET;
    let mut buf = Vec::with_capacity(n + 1);
    if march(lo, h, n, &mut buf) != Shot::Under || march(hi, h, n, &mut buf) != Shot::Over {
        return Err(Error::ShootingBracket { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match march(mid, h, n, &mut buf) {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Convergence {
                what: "ground-state bisection",
                iterations,
                residual: hi - lo,
            });
        }
    }

    // Keep the shot where the bracketing trajectories agree.
    let mut w_lo = Vec::with_capacity(n + 1);
    let mut w_hi = Vec::with_capacity(n + 1);
    march(lo, h, n, &mut w_lo);
    march(hi, h, n, &mut w_hi);
    let common = w_lo.len().min(w_hi.len());
    let mut splice = 1;
    while splice + 1 < common {
        let a = w_lo[splice + 1];
        let b = w_hi[splice + 1];
        if (a - b).abs() > 1e-7 * a.abs().max(b.abs()) {
            break;
        }
        splice += 1;
    }
    let r_s = splice as f64 * h;
    let w_s = w_lo[splice];
    let mut w: Vec<f64> = (0..=n)
        .map(|j| {
            if j <= splice {
                w_lo[j]
            } else {
                w_s * k0_ratio(j as f64 * h, r_s)
            }
        })
        .collect();

    let (newton_iterations, residual) = newton_polish(&mut w, h, tol)?;

    if !(w[0] > BRACKET.0 && w[0] < BRACKET.1) || w.windows(2).any(|p| p[1] >= p[0]) || w[n] <= 0.0
    {
        return Err(Error::Accuracy(
            "polished profile is not positive and strictly decreasing".into(),
        ));
    }

    let r: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
    let ghost = w[n] * k0_ratio(r_max + h, r_max);
    let w_prime: Vec<f64> = (0..=n)
        .map(|j| match j {
            0 => 0.0,
            j if j == n => (ghost - w[n - 1]) / (2.0 * h),
            j => (w[j + 1] - w[j - 1]) / (2.0 * h),
        })
        .collect();

    let tail_radius = r_max - 2.0;
    let jt = (tail_radius / h).round() as usize;
    let tail_radius = r[jt];
    let tail_k0_coefficient = w[jt] / (bessel_k0_scaled(tail_radius) * (-tail_radius).exp());
    let tail_coefficient = tail_k0_coefficient * (0.5 * PI).sqrt();

    Ok(GroundState {
        r,
        w,
        w_prime,
        h,
        tail_radius,
        tail_coefficient,
        tail_k0_coefficient,
        newton_iterations,
        residual,
    })
}

fn grid_residual(w: &[f64], h: f64, edge_ratio: f64, out: &mut [f64]) {
    let n = w.len() - 1;
    let h2 = h * h;
    out[0] = 4.0 * (w[1] - w[0]) / h2 - w[0] + w[0] * w[0];
    for j in 1..=n {
        let r = j as f64 * h;
        let next = if j == n { edge_ratio * w[n] } else { w[j + 1] };
        out[j] = (next - 2.0 * w[j] + w[j - 1]) / h2 + (next - w[j - 1]) / (2.0 * r * h) - w[j]
            + w[j] * w[j];
    }
}

fn newton_polish(w: &mut [f64], h: f64, tol: f64) -> Result<(usize, f64)> {
    let n = w.len() - 1;
    let h2 = h * h;
    let r_max = n as f64 * h;
    let edge_ratio = k0_ratio(r_max + h, r_max);
    let mut f = vec![0.0; n + 1];
    let mut sub = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut sup = vec![0.0; n + 1];
    // Round-off floor of the residual: the stencil divides by h².
    let floor = 1e3 * f64::EPSILON * w[0] / h2;
    for it in 1..=MAX_NEWTON {
        grid_residual(w, h, edge_ratio, &mut f);
        diag[0] = -4.0 / h2 - 1.0 + 2.0 * w[0];
        sup[0] = 4.0 / h2;
        for j in 1..=n {
            let r = j as f64 * h;
            let a = 1.0 / h2 - 0.5 / (r * h);
            let c = 1.0 / h2 + 0.5 / (r * h);
            sub[j] = a;
            diag[j] = -2.0 / h2 - 1.0 + 2.0 * w[j];
            if j == n {
                diag[j] += c * edge_ratio;
            } else {
                sup[j] = c;
            }
        }
        sup[n] = 0.0;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = solve_tridiagonal(&sub[1..], &diag, &sup[..n], &rhs)?;
        let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for (wj, dj) in w.iter_mut().zip(&delta) {
            *wj += dj;
        }
        if step <= tol * w[0] {
            grid_residual(w, h, edge_ratio, &mut f);
            let res = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res > floor.max(1e-6 * w[0]) {
                return Err(Error::Accuracy(format!(
                    "grid residual {res:e} after convergence"
                )));
            }
            return Ok((it, res / w[0]));
        }
    }
    grid_residual(w, h, edge_ratio, &mut f);
    Err(Error::Convergence {
        what: "ground-state Newton polish",
        iterations: MAX_NEWTON,
        residual: f.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    })
}

/// Composite Simpson rule on uniform samples; an odd interval count closes
/// with the three-eighths rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        3 => 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]),
        _ if n % 2 == 0 => {
            let mut s = values[0] + values[n];
            for (j, v) in values.iter().enumerate().take(n).skip(1) {
                s += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0
        }
        _ => simpson(&values[..n - 2], h) + simpson(&values[n - 3..], h),
    }
}

/// `Γ(1/2, x)` for `x ≥ 30` by its asymptotic series.
fn upper_gamma_half(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -(k as f64 - 0.5) / x;
        sum += term;
    }
    (-x).exp() * x.powf(-0.5) * sum
}

impl GroundState {
    pub fn central_value(&self) -> f64 {
        self.w[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("nonempty grid")
    }

    /// `w(r)` by cubic Hermite interpolation inside the grid and the fitted
    /// `K0` tail beyond it.
    pub fn value_at(&self, r: f64) -> f64 {
        self.value_and_slope_at(r).0
    }

    /// `(w(r), w'(r))`, interpolated as in [`GroundState::value_at`].
    pub fn value_and_slope_at(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        let n = self.r.len() - 1;
        if r >= self.r_max() {
            let k0 = bessel_k0_scaled(r) * (-r).exp();
            let k1 = crate::green::bessel::bessel_k1_scaled(r) * (-r).exp();
            return (
                self.tail_k0_coefficient * k0,
                -self.tail_k0_coefficient * k1,
            );
        }
        let j = ((r / self.h) as usize).min(n - 1);
        let s = (r - self.r[j]) / self.h;
        let (y0, y1) = (self.w[j], self.w[j + 1]);
        let (d0, d1) = (self.w_prime[j] * self.h, self.w_prime[j + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dv = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1;
        (v, dv / self.h)
    }

    /// Writes `r,w,w_prime` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,w,w_prime")?;
        for j in 0..self.r.len() {
            writeln!(
                out,
                "{:.10e},{:.16e},{:.16e}",
                self.r[j], self.w[j], self.w_prime[j]
            )?;
        }
        Ok(())
    }
}

/// Half-plane moments by composite Simpson quadrature plus closed-form
/// integrals of the `C r^{-1/2} e^{-r}` tail beyond the grid.
pub fn compute_moments(gs: &GroundState) -> Result<GroundStateMoments> {
    let n = gs.r.len() - 1;
    if gs.w[n] > 1e-8 {
        return Err(Error::Accuracy(format!(
            "profile tail not converged: w(r_max) = {:e}",
            gs.w[n]
        )));
    }
    let h = gs.h;
    let big_r = gs.r_max();
    let c = gs.tail_coefficient;
    let e2 = (-2.0 * big_r).exp();
    let integrate = |f: &dyn Fn(usize) -> f64| simpson(&(0..=n).map(f).collect::<Vec<_>>(), h);
    let (r, w, wp) = (&gs.r, &gs.w, &gs.w_prime);

    // Tail integrals with w ≈ C r^{-1/2} e^{-r}, w' ≈ -w (1 + 1/(2r)).
    let w2r = integrate(&|j| w[j] * w[j] * r[j]) + 0.5 * c * c * e2;
    let w3r = integrate(&|j| w[j].powi(3) * r[j])
        + c.powi(3) * upper_gamma_half(3.0 * big_r) / 3f64.sqrt();
    let wp2r = integrate(&|j| wp[j] * wp[j] * r[j]) + 0.5 * c * c * e2;
    let wp2r2 = integrate(&|j| wp[j] * wp[j] * r[j] * r[j])
        + c * c * e2 * ((2.0 * big_r + 1.0) / 4.0 + 0.5);
    let wwpr2 = integrate(&|j| w[j] * wp[j] * r[j] * r[j]) - c * c * e2 * (big_r + 1.0) / 2.0;

    let i2 = PI * w2r;
    let i3 = PI * w3r;
    let igrad = PI * wp2r;
    let moments = GroundStateMoments {
        i2,
        i3,
        igrad,
        j1: 0.5 * igrad,
        nu1: 2.0 / 3.0 * wp2r2,
        nu2: i3 * i2 / 3.0,
        m1: 0.5 * PI * wwpr2,
    };
    Ok(moments)
}

impl GroundStateMoments {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Largest relative defect among the identities `I3 = 3/2 I2`,
    /// `Igrad = I2/2` and `2 M1 = -I2`.
    pub fn identity_defect(&self) -> f64 {
        let a = (self.i3 - 1.5 * self.i2).abs() / self.i3;
        let b = (self.igrad - 0.5 * self.i2).abs() / self.igrad;
        let c = (2.0 * self.m1 + self.i2).abs() / self.i2;
        a.max(b).max(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [4usize, 5, 6, 7, 10] {
            let h = 1.0 / n as f64;
            let v: Vec<f64> = (0..=n).map(|j| (j as f64 * h).powi(3)).collect();
            assert!((simpson(&v, h) - 0.25).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn upper_gamma_half_matches_reference() {
        // Γ(1/2, 30) = √π erfc(√30)
        let reference = 1.681_303_208_652_899_4e-14;
        assert!((upper_gamma_half(30.0) / reference - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            solve_ground_state(10.0, 4000, 1e-12),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            solve_ground_state(25.0, 100, 1e-12),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            solve_ground_state(25.0, 4000, 1e-6),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn shooting_classifies_bracket_ends() {
        let mut buf = Vec::new();
        assert_eq!(march(1.0, 0.01, 2000, &mut buf), Shot::Under);
        assert_eq!(march(4.0, 0.01, 2000, &mut buf), Shot::Over);
    }

    #[test]
    fn profile_properties() {
        let gs = solve_ground_state(25.0, 4000, 1e-12).unwrap();
        assert_eq!(gs.w_prime[0], 0.0);
        assert!(gs.w.windows(2).all(|p| p[1] < p[0]));
        assert!(*gs.w.last().unwrap() < 1e-10);
        assert!(gs.residual < 1e-6);
        let n = gs.r.len() - 1;
        let ratio = gs.w_prime[n] / gs.w[n];
        assert!((ratio + 1.0).abs() < 0.02, "{ratio}");
        let decay = gs.value_at(10.0) / gs.value_at(5.0);
        let expected = 0.5f64.sqrt() * (-5.0f64).exp();
        assert!(
            (decay / expected - 1.0).abs() < 0.05,
            "{decay} vs {expected}"
        );
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let gs = solve_ground_state(20.0, 2000, 1e-12).unwrap();
        for j in [0, 1, 17, 500, 1999] {
            assert!((gs.value_at(gs.r[j]) - gs.w[j]).abs() < 1e-15);
        }
        let (v, d) = gs.value_and_slope_at(20.5);
        assert!(v > 0.0 && v < gs.w[2000] && d < 0.0);
    }

    #[test]
    fn moment_identities() {
        let gs = solve_ground_state(25.0, 4000, 1e-12).unwrap();
        let m = compute_moments(&gs).unwrap();
        assert!(m.identity_defect() < 1e-4, "{m:?}");
        assert_eq!(m.nu2, m.i3 * m.i2 / 3.0);
        assert!(m.nu1 > 0.0 && m.j1 > 0.0);
    }

    #[test]
    fn csv_and_json_exports() {
        let gs = solve_ground_state(20.0, 2000, 1e-12).unwrap();
        let mut buf = Vec::new();
        gs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,w,w_prime\n"));
        assert_eq!(text.lines().count(), 2002);
        let json = compute_moments(&gs).unwrap().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["I2", "I3", "Igrad", "J1", "nu1", "nu2", "M1"] {
            assert!(v[key].is_f64(), "{key}");
        }
    }
}
