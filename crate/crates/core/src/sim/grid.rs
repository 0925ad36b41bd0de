//! Boundary-fitted polar grid on a star-shaped domain.
//!
//! The map `x = c + ρ f(θ) (cos θ, sin θ)` sends the logical rectangle
//! `(ρ, θ) ∈ [0, 1] × [0, 2π)` onto the domain, with `ρ = 1` on the boundary.
//! With `J = ρ f²` the Laplacian in divergence form reads
//!
//! ```text
//! Δu = (1/J) [ ∂ρ(a uρ + b uθ) + ∂θ(b uρ + c uθ) ],
//! a = ρ (f² + f'²) / f²,   b = -f'/f,   c = 1/ρ.
//! ```
//!
//! It is discretized by finite volumes on cell centers: every face flux is
//! shared by its two cells, the face `ρ = 0` has zero length, and the Neumann
//! condition sets the flux through `ρ = 1` to zero. Cross derivatives on a
//! face average the centered differences of the two adjacent cells (one-sided
//! in the first and last ring). Radial faces may be clustered toward the
//! boundary by a sinh stretching.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone)]
pub struct SimGrid {
    pub n_rho: usize,
    pub n_theta: usize,
    /// Radial faces, `rho_faces[0] = 0`, `rho_faces[n_rho] = 1`.
    pub rho_faces: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// `f(θ_j)` and `f'(θ_j)` at cell centers.
    pub radius: Vec<f64>,
    pub radius_slope: Vec<f64>,
    /// Cell areas, ring-major (`i * n_theta + j`).
    pub volume: Vec<f64>,
    /// Physical cell centers, ring-major.
    pub position: Vec<[f64; 2]>,
    /// Discrete Laplacian in solver ordering (see [`SimGrid::index`]).
    pub laplacian: CsrMatrix,
    curve: BoundaryCurve,
}

/// `ρ(ξ) = 1 - sinh(β(1-ξ)) / sinh β`, the identity for `β = 0`.
fn stretched_faces(n: usize, beta: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let xi = i as f64 / n as f64;
            if beta.abs() < 1e-8 {
                xi
            } else {
                1.0 - (beta * (1.0 - xi)).sinh() / beta.sinh()
            }
        })
        .collect()
}

impl SimGrid {
    /// Builds the grid and its Laplacian. `stretch = 0` gives uniform rings.
    pub fn build(curve: &BoundaryCurve, n_rho: usize, n_theta: usize, stretch: f64) -> Result<Self> {
        if n_rho < 3 {
            return Err(Error::param("n_rho", "must be at least 3"));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::param("n_theta", "must be even and at least 8"));
        }
        if !(stretch >= 0.0 && stretch <= 8.0) {
            return Err(Error::param("stretch", "must lie in [0, 8]"));
        }
        let dth = TAU / n_theta as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| j as f64 * dth).collect();
        let mut radius = Vec::with_capacity(n_theta);
        let mut radius_slope = Vec::with_capacity(n_theta);
        let mut face_ratio = Vec::with_capacity(n_theta);
        for j in 0..n_theta {
            let [f, f1, _] = curve.radial_function(theta[j])?;
            let [fh, fh1, _] = curve.radial_function(theta[j] + 0.5 * dth)?;
            if !(f > 0.0 && fh > 0.0) {
                return Err(Error::Geometry(format!(
                    "curve is not star-shaped about its center (f = {f} at θ = {})",
                    theta[j]
                )));
            }
            radius.push(f);
            radius_slope.push(f1);
            face_ratio.push(fh1 / fh);
        }
        star_shaped_check(curve, &radius, &theta)?;

        let rho_faces = stretched_faces(n_rho, stretch);
        let rho: Vec<f64> = rho_faces.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let center = curve.center();
        let mut volume = Vec::with_capacity(n_rho * n_theta);
        let mut position = Vec::with_capacity(n_rho * n_theta);
        for i in 0..n_rho {
            for j in 0..n_theta {
                let f = radius[j];
                volume.push(0.5 * (rho_faces[i + 1].powi(2) - rho_faces[i].powi(2)) * f * f * dth);
                let (s, c) = theta[j].sin_cos();
                position.push([center[0] + rho[i] * f * c, center[1] + rho[i] * f * s]);
            }
        }

        let mut grid = Self {
            n_rho,
            n_theta,
            rho_faces,
            rho,
            theta,
            radius,
            radius_slope,
            volume,
            position,
            laplacian: CsrMatrix::from_rows(Vec::new()),
            curve: curve.clone(),
        };
        grid.laplacian = grid.assemble(&face_ratio);
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn d_theta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    /// Solver index of cell `(i, j)`. Angles are folded
    /// (`0, n-1, 1, n-2, …`) so that periodic neighbours stay within two
    /// blocks and the matrix is banded with half-width `2 n_rho + 1`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let n = self.n_theta;
        let pos = if j < n / 2 { 2 * j } else { 2 * (n - 1 - j) + 1 };
        pos * self.n_rho + i
    }

    /// Converts a ring-major field to solver ordering.
    pub fn to_solver(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_rho {
            for j in 0..self.n_theta {
                out[self.index(i, j)] = field[i * self.n_theta + j];
            }
        }
        out
    }

    /// Converts a solver-ordered field to ring-major.
    pub fn from_solver(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_rho {
            for j in 0..self.n_theta {
                out[i * self.n_theta + j] = field[self.index(i, j)];
            }
        }
        out
    }

    fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n_theta as isize) as usize
    }

    /// Stencil of the centered radial derivative in cell `(i, j)`.
    fn radial_derivative(&self, i: usize, j: usize) -> [(usize, f64); 2] {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i + 1 == self.n_rho {
            (i - 1, i)
        } else {
            (i - 1, i + 1)
        };
        let inv = 1.0 / (self.rho[hi] - self.rho[lo]);
        [(self.index(hi, j), inv), (self.index(lo, j), -inv)]
    }

    /// Stencil of the centered angular derivative in cell `(i, j)`.
    fn angular_derivative(&self, i: usize, j: usize) -> [(usize, f64); 2] {
        let inv = 0.5 / self.d_theta();
        let jp = self.wrap(j as isize + 1);
        let jm = self.wrap(j as isize - 1);
        [(self.index(i, jp), inv), (self.index(i, jm), -inv)]
    }

    fn assemble(&self, face_ratio: &[f64]) -> CsrMatrix {
        let (nr, nt) = (self.n_rho, self.n_theta);
        let dth = self.d_theta();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.len()];
        // Adds `flux` (a linear stencil) leaving `from` and entering `to`.
        let mut exchange = |from: usize, to: usize, flux: &[(usize, f64)]| {
            for &(c, v) in flux {
                rows[from].push((c, v));
                rows[to].push((c, -v));
            }
        };
        for j in 0..nt {
            let f = self.radius[j];
            let f1 = self.radius_slope[j];
            for i in 0..nr - 1 {
                let rf = self.rho_faces[i + 1];
                let a = rf * (f * f + f1 * f1) / (f * f) * dth;
                let b = -f1 / f * dth;
                let h = self.rho[i + 1] - self.rho[i];
                let mut flux = vec![(self.index(i + 1, j), a / h), (self.index(i, j), -a / h)];
                for (c, v) in self.angular_derivative(i, j).into_iter().chain(self.angular_derivative(i + 1, j)) {
                    flux.push((c, 0.5 * b * v));
                }
                exchange(self.index(i, j), self.index(i + 1, j), &flux);
            }
        }
        for j in 0..nt {
            let jp = self.wrap(j as isize + 1);
            let b = -face_ratio[j];
            for i in 0..nr {
                let dr = self.rho_faces[i + 1] - self.rho_faces[i];
                let c = dr / self.rho[i] / dth;
                let mut flux = vec![(self.index(i, jp), c), (self.index(i, j), -c)];
                for (col, v) in self.radial_derivative(i, j).into_iter().chain(self.radial_derivative(i, jp)) {
                    flux.push((col, 0.5 * b * dr * v));
                }
                exchange(self.index(i, j), self.index(i, jp), &flux);
            }
        }
        let mut ordered = vec![Vec::new(); self.len()];
        for i in 0..nr {
            for j in 0..nt {
                let k = self.index(i, j);
                let inv = 1.0 / self.volume[i * nt + j];
                ordered[k] = rows[k].iter().map(|&(c, v)| (c, v * inv)).collect();
            }
        }
        let mut matrix = CsrMatrix::from_rows(ordered);
        // Exact zero row sums, so constants are annihilated without round-off.
        for row in 0..matrix.n {
            let range = matrix.row_ptr[row]..matrix.row_ptr[row + 1];
            let off: f64 = range.clone().filter(|&k| matrix.col[k] != row).map(|k| matrix.val[k]).sum();
            if let Some(k) = range.into_iter().find(|&k| matrix.col[k] == row) {
                matrix.val[k] = -off;
            }
        }
        matrix
    }

    /// Discrete Laplacian of a ring-major field, returned ring-major. Rows
    /// are applied in difference form `Σ L_ik (u_k - u_i)`.
    pub fn apply_laplacian(&self, field: &[f64]) -> Vec<f64> {
        let x = self.to_solver(field);
        let m = &self.laplacian;
        let out: Vec<f64> = (0..m.n)
            .map(|row| {
                (m.row_ptr[row]..m.row_ptr[row + 1])
                    .filter(|&k| m.col[k] != row)
                    .map(|k| m.val[k] * (x[m.col[k]] - x[row]))
                    .sum()
            })
            .collect();
        self.from_solver(&out)
    }

    /// `Σ V u` over the cells of a ring-major field.
    pub fn integral(&self, field: &[f64]) -> f64 {
        self.volume.iter().zip(field).map(|(v, u)| v * u).sum()
    }

    /// Outward normal derivative on the boundary at each `θ_j`, from
    /// quadratic extrapolation of the three outer rings.
    pub fn boundary_normal_derivative(&self, field: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.n_rho, self.n_theta);
        let nodes = [self.rho[nr - 1], self.rho[nr - 2], self.rho[nr - 3]];
        let slope = lagrange_weights(1.0, &nodes, true);
        let value = lagrange_weights(1.0, &nodes, false);
        let inv = 0.5 / self.d_theta();
        (0..nt)
            .map(|j| {
                let jp = self.wrap(j as isize + 1);
                let jm = self.wrap(j as isize - 1);
                let mut u_rho = 0.0;
                let mut u_theta = 0.0;
                for k in 0..3 {
                    let i = nr - 1 - k;
                    u_rho += slope[k] * field[i * nt + j];
                    u_theta += value[k] * (field[i * nt + jp] - field[i * nt + jm]) * inv;
                }
                let f = self.radius[j];
                let f1 = self.radius_slope[j];
                let g_rr = (f * f + f1 * f1) / f.powi(4);
                let g_rt = -f1 / f.powi(3);
                (g_rr * u_rho + g_rt * u_theta) / g_rr.sqrt()
            })
            .collect()
    }
}

/// Weights of the quadratic interpolant through `nodes` for its value or
/// derivative at `x`.
fn lagrange_weights(x: f64, nodes: &[f64; 3], derivative: bool) -> [f64; 3] {
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (a, b) = (nodes[(k + 1) % 3], nodes[(k + 2) % 3]);
        let denom = (nodes[k] - a) * (nodes[k] - b);
        w[k] = if derivative { (2.0 * x - a - b) / denom } else { (x - a) * (x - b) / denom };
    }
    w
}

/// Rejects curves whose sampled radial representation does not reproduce the
/// boundary (rays meeting the curve more than once).
fn star_shaped_check(curve: &BoundaryCurve, radius: &[f64], theta: &[f64]) -> Result<()> {
    let c = curve.center();
    for (&f, &th) in radius.iter().zip(theta) {
        let t = curve.parameter_of_polar_angle(th)?;
        let p = curve.point(t);
        let r = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
        if (r - f).abs() > 1e-9 * f.max(1.0) {
            return Err(Error::Geometry(format!(
                "radial representation mismatch at θ = {th}: {f} vs {r}"
            )));
        }
    }
    Ok(())
}
