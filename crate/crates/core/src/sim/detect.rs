//! Spike detection on simulator fields.

use serde::Serialize;

use super::{SimGrid, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectedSpike {
    pub position: [f64; 2],
    pub height: f64,
    /// Distance to the boundary.
    pub boundary_distance: f64,
    /// Signed arc-length coordinate of the nearest boundary point, for
    /// spikes within `2ε` of the boundary.
    pub arc: Option<f64>,
    /// Curve parameter of the nearest boundary point.
    pub boundary_parameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeDetection {
    pub threshold: f64,
    /// Boundary spikes ordered by arc length, then interior spikes.
    pub spikes: Vec<DetectedSpike>,
}

/// Vertex offset (in units of the spacing) and peak value of the parabola
/// through `(-1, a)`, `(0, b)`, `(1, c)`.
fn parabola(a: f64, b: f64, c: f64) -> (f64, f64) {
    let curv = a - 2.0 * b + c;
    if curv >= 0.0 {
        return (0.0, b);
    }
    let x = (0.5 * (a - c) / curv).clamp(-0.5, 0.5);
    (x, b + 0.5 * (c - a) * x + 0.5 * curv * x * x)
}

/// Strict local maxima of `u` above `threshold · max u`, refined by
/// quadratic fits along each logical direction. At the boundary ring the
/// Neumann mirror supplies the missing neighbour.
pub fn detect_spikes(grid: &SimGrid, state: &SimState, threshold: f64, epsilon: f64, reference: f64) -> SpikeDetection {
    let (nr, nt) = (grid.n_rho, grid.n_theta);
    let u = &state.u;
    let u_max = u.iter().fold(0.0f64, |a, &x| a.max(x));
    let level = threshold * u_max;
    let at = |i: usize, j: isize| u[i * nt + j.rem_euclid(nt as isize) as usize];
    let curve = grid.curve();
    let dth = grid.d_theta();
    let mut spikes = Vec::new();
    for i in 0..nr {
        for j in 0..nt {
            let value = u[i * nt + j];
            if !(value > level) || u_max <= 0.0 {
                continue;
            }
            let jj = j as isize;
            let mut strict = true;
            for di in -1isize..=1 {
                let ii = i as isize + di;
                if ii < 0 || ii >= nr as isize {
                    continue;
                }
                for dj in -1isize..=1 {
                    if (di, dj) != (0, 0) && at(ii as usize, jj + dj) >= value {
                        strict = false;
                    }
                }
            }
            if !strict {
                continue;
            }
            let (x_theta, peak_theta) = parabola(at(i, jj - 1), value, at(i, jj + 1));
            let theta = grid.theta[j] + x_theta * dth;
            let (rho, peak_rho) = if i == 0 {
                (grid.rho[0], value)
            } else {
                let outer = if i + 1 == nr { value } else { at(i + 1, jj) };
                let h_lo = grid.rho[i] - grid.rho[i - 1];
                let h_hi = if i + 1 == nr { 2.0 * (1.0 - grid.rho[i]) } else { grid.rho[i + 1] - grid.rho[i] };
                radial_vertex(grid.rho[i], h_lo, h_hi, at(i - 1, jj), value, outer)
            };
            let rho = rho.min(1.0);
            let height = peak_theta + (peak_rho - value);
            let [f, _, _] = curve.radial_function(theta).unwrap_or([grid.radius[j], 0.0, 0.0]);
            let c = curve.center();
            let (s, co) = theta.sin_cos();
            let position = [c[0] + rho * f * co, c[1] + rho * f * s];
            let (t_near, distance) = nearest_boundary_point(grid, position, theta);
            let arc = (distance <= 2.0 * epsilon).then(|| curve.signed_arc_offset(reference, t_near));
            spikes.push(DetectedSpike {
                position,
                height,
                boundary_distance: distance,
                arc,
                boundary_parameter: t_near,
            });
        }
    }
    spikes.sort_by(|a, b| match (a.arc, b.arc) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => b.height.total_cmp(&a.height),
    });
    SpikeDetection { threshold, spikes }
}

/// Vertex of the parabola through `(r - h_lo, a)`, `(r, b)`, `(r + h_hi, c)`.
fn radial_vertex(r: f64, h_lo: f64, h_hi: f64, a: f64, b: f64, c: f64) -> (f64, f64) {
    let s_lo = (b - a) / h_lo;
    let s_hi = (c - b) / h_hi;
    let curv = 2.0 * (s_hi - s_lo) / (h_lo + h_hi);
    if curv >= 0.0 {
        return (r, b);
    }
    let slope = (s_lo * h_hi + s_hi * h_lo) / (h_lo + h_hi);
    let x = (-slope / curv).clamp(-0.5 * h_lo, 0.5 * h_hi);
    (r + x, b + slope * x + 0.5 * curv * x * x)
}

/// Nearest boundary parameter and distance, by Newton on `|γ(t) - x|²`
/// started from the boundary point on the same ray.
fn nearest_boundary_point(grid: &SimGrid, x: [f64; 2], theta: f64) -> (f64, f64) {
    let curve = grid.curve();
    let mut t = curve.parameter_of_polar_angle(theta).unwrap_or(theta);
    for _ in 0..30 {
        let Ok(frame) = curve.arc_length_frame(t) else { break };
        let Ok(kappa) = curve.curvature_at(t) else { break };
        let d = [frame.position[0] - x[0], frame.position[1] - x[1]];
        let g = d[0] * frame.tangent[0] + d[1] * frame.tangent[1];
        // Second derivative in arc length: 1 + κ (d · n), with n the inward normal.
        let h = 1.0 + kappa * (d[0] * frame.normal[0] + d[1] * frame.normal[1]);
        if !(h > 0.0) {
            break;
        }
        let ds = -g / h;
        t += ds / curve.speed(t);
        if ds.abs() < 1e-13 {
            break;
        }
    }
    let p = curve.point(t);
    let distance = ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt();
    (t.rem_euclid(std::f64::consts::TAU), distance)
}
