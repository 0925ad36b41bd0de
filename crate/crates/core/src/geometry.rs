//! Closed boundary curves and their curvature.
//!
//! Curves are parameterized over `[0, 2π)` and traversed counterclockwise, so
//! convex domains have positive curvature and the left normal of the unit
//! tangent points into the domain. Tangential derivatives of the curvature
//! are taken with respect to arc length in that orientation.
//!
//! Circles, ellipses and radial Fourier curves carry closed-form derivatives
//! of every order. A curve can also be replaced by the trigonometric
//! interpolant of uniform samples ([`BoundaryCurve::spectral_resample`]), in
//! which case all derivatives come from the interpolant's Fourier
//! coefficients.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// User-facing description of a boundary curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveSpec {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `r(θ) = r0 + Σ a_n cos(nθ) + b_n sin(nθ)`, `n = 1, 2, ...`.
    RadialFourier {
        r0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Circle { radius } => write!(f, "circle:{radius}"),
            CurveSpec::Ellipse { a, b } => write!(f, "ellipse:{a},{b}"),
            CurveSpec::RadialFourier { r0, cos, sin } => {
                write!(f, "radial-fourier:r0={r0}")?;
                for (n, c) in cos.iter().enumerate() {
                    if *c != 0.0 {
                        write!(f, ",a{}={c}", n + 1)?;
                    }
                }
                for (n, s) in sin.iter().enumerate() {
                    if *s != 0.0 {
                        write!(f, ",b{}={s}", n + 1)?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl FromStr for CurveSpec {
    type Err = Error;

    /// Parses `circle:R`, `ellipse:A,B` or `radial-fourier:r0=R,a2=..,b3=..`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::param("domain", format!("`{s}`: {why}"));
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected kind:params"))?;
        let nums = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad("not a number")))
                .collect()
        };
        match kind.trim() {
            "circle" => {
                let v = nums(rest)?;
                if v.len() != 1 {
                    return Err(bad("circle takes one radius"));
                }
                Ok(CurveSpec::Circle { radius: v[0] })
            }
            "ellipse" => {
                let v = nums(rest)?;
                if v.len() != 2 {
                    return Err(bad("ellipse takes two semi-axes"));
                }
                Ok(CurveSpec::Ellipse { a: v[0], b: v[1] })
            }
            "radial-fourier" => {
                let mut r0 = None;
                let mut cos = Vec::new();
                let mut sin = Vec::new();
                for item in rest.split(',') {
                    let (key, value) = item
                        .split_once('=')
                        .ok_or_else(|| bad("expected key=value"))?;
                    let key = key.trim();
                    let value: f64 = value.trim().parse().map_err(|_| bad("not a number"))?;
                    if key == "r0" {
                        r0 = Some(value);
                        continue;
                    }
                    let (target, idx) = match key.split_at(1) {
                        ("a", n) => (&mut cos, n),
                        ("b", n) => (&mut sin, n),
                        _ => return Err(bad("keys are r0, aN, bN")),
                    };
                    let n: usize = idx.parse().map_err(|_| bad("bad harmonic index"))?;
                    if n == 0 {
                        return Err(bad("harmonics start at 1"));
                    }
                    if target.len() < n {
                        target.resize(n, 0.0);
                    }
                    target[n - 1] = value;
                }
                Ok(CurveSpec::RadialFourier {
                    r0: r0.ok_or_else(|| bad("missing r0"))?,
                    cos,
                    sin,
                })
            }
            _ => Err(bad("unknown curve kind")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    RadialFourier {
        r0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    /// Trigonometric interpolant: `x(t) = Σ xc_n cos nt + xs_n sin nt`, same for y.
    Fourier {
        xc: Vec<f64>,
        xs: Vec<f64>,
        yc: Vec<f64>,
        ys: Vec<f64>,
    },
}

/// A closed, counterclockwise planar curve `t ↦ center + shape(t + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    shape: Shape,
    center: [f64; 2],
    phase: f64,
    /// Points per period used for sampling-based operations.
    pub resolution: usize,
}

/// Position and derivatives of the parameterization up to fourth order.
type Jet = [[f64; 2]; 5];

/// `d^k/du^k cos(u)` and `sin(u)`.
fn trig_derivative(k: usize, u: f64) -> (f64, f64) {
    let (s, c) = u.sin_cos();
    match k % 4 {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

const BINOMIAL: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

fn fourier_derivatives(c: &[f64], s: &[f64], u: f64, constant: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    out[0] = constant;
    for (n, (&a, &b)) in c
        .iter()
        .zip(s.iter().chain(std::iter::repeat(&0.0)))
        .enumerate()
    {
        add_harmonic(&mut out, (n + 1) as f64, a, b, u);
    }
    for (n, &b) in s.iter().enumerate().skip(c.len()) {
        add_harmonic(&mut out, (n + 1) as f64, 0.0, b, u);
    }
    out
}

fn add_harmonic(out: &mut [f64; 5], n: f64, a: f64, b: f64, u: f64) {
    if a == 0.0 && b == 0.0 {
        return;
    }
    let mut scale = 1.0;
    for (k, o) in out.iter_mut().enumerate() {
        let (dc, ds) = trig_derivative(k, n * u);
        *o += scale * (a * dc + b * ds);
        scale *= n;
    }
}

impl Shape {
    fn jet(&self, u: f64) -> Jet {
        let mut jet = [[0.0; 2]; 5];
        match self {
            Shape::Circle { radius } => {
                for (k, j) in jet.iter_mut().enumerate() {
                    let (c, s) = trig_derivative(k, u);
                    *j = [radius * c, radius * s];
                }
            }
            Shape::Ellipse { a, b } => {
                for (k, j) in jet.iter_mut().enumerate() {
                    let (c, s) = trig_derivative(k, u);
                    *j = [a * c, b * s];
                }
            }
            Shape::RadialFourier { r0, cos, sin } => {
                let r = fourier_derivatives(cos, sin, u, *r0);
                for (k, j) in jet.iter_mut().enumerate() {
                    let mut x = 0.0;
                    let mut y = 0.0;
                    for (i, ri) in r.iter().enumerate().take(k + 1) {
                        let (c, s) = trig_derivative(k - i, u);
                        x += BINOMIAL[k][i] * ri * c;
                        y += BINOMIAL[k][i] * ri * s;
                    }
                    *j = [x, y];
                }
            }
            Shape::Fourier { xc, xs, yc, ys } => {
                let x = fourier_derivatives(&xc[1..], &xs[1..], u, xc[0]);
                let y = fourier_derivatives(&yc[1..], &ys[1..], u, yc[0]);
                for k in 0..5 {
                    jet[k] = [x[k], y[k]];
                }
            }
        }
        jet
    }
}

/// Curvature and its arc-length derivatives at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureJet {
    pub curvature: f64,
    /// `dh/ds`.
    pub d1: f64,
    /// `d²h/ds²`.
    pub d2: f64,
    /// `|γ'(t)|`.
    pub speed: f64,
    /// `dh/dt`.
    pub dt1: f64,
}

/// Position, unit tangent and unit inward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub position: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

/// A nondegenerate local maximum of the curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureMax {
    pub t: f64,
    pub position: [f64; 2],
    pub curvature: f64,
    /// `dh/ds` at the located point (zero to bisection accuracy).
    pub h_prime: f64,
    /// `d²h/ds²`, negative.
    pub h_second: f64,
}

/// Critical point of the curvature rejected as degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateCritical {
    pub t: f64,
    pub curvature: f64,
    pub h_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureMaxima {
    pub maxima: Vec<CurvatureMax>,
    pub degenerate: Vec<DegenerateCritical>,
    pub diagnostic: Option<String>,
}

const SINGULAR_SPEED: f64 = 1e-12;
const DEGENERACY_RATIO: f64 = 1e-6;

impl BoundaryCurve {
    pub fn from_spec(spec: &CurveSpec) -> Result<Self> {
        let shape = match spec {
            CurveSpec::Circle { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::param("radius", "must be positive"));
                }
                Shape::Circle { radius: *radius }
            }
            CurveSpec::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::param("ellipse", "semi-axes must be positive"));
                }
                Shape::Ellipse { a: *a, b: *b }
            }
            CurveSpec::RadialFourier { r0, cos, sin } => {
                let bound: f64 = cos.iter().chain(sin).map(|c| c.abs()).sum();
                if !(*r0 > bound) {
                    return Err(Error::param(
                        "radial-fourier",
                        "r0 must exceed the sum of harmonic amplitudes so r(θ) > 0",
                    ));
                }
                Shape::RadialFourier {
                    r0: *r0,
                    cos: cos.clone(),
                    sin: sin.clone(),
                }
            }
        };
        Ok(Self {
            shape,
            center: [0.0, 0.0],
            phase: 0.0,
            resolution: 1024,
        })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::from_spec(&CurveSpec::Circle { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::from_spec(&CurveSpec::Ellipse { a, b })
    }

    /// Same point set, parameter shifted: `t ↦ γ(t + phase)`.
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    /// True when derivatives come from a registered closed form.
    pub fn is_analytic(&self) -> bool {
        !matches!(self.shape, Shape::Fourier { .. })
    }

    /// Replaces the curve by the trigonometric interpolant of `samples`
    /// uniform samples (`samples` odd gives a symmetric interpolant).
    pub fn spectral_resample(&self, samples: usize) -> Result<Self> {
        if samples < 9 {
            return Err(Error::param("samples", "need at least 9 samples"));
        }
        let m = samples;
        let nmax = (m - 1) / 2;
        let pts: Vec<[f64; 2]> = (0..m)
            .map(|j| self.point(TAU * j as f64 / m as f64))
            .collect();
        let mut xc = vec![0.0; nmax + 1];
        let mut xs = vec![0.0; nmax + 1];
        let mut yc = vec![0.0; nmax + 1];
        let mut ys = vec![0.0; nmax + 1];
        for n in 0..=nmax {
            let w = if n == 0 {
                1.0 / m as f64
            } else {
                2.0 / m as f64
            };
            for (j, p) in pts.iter().enumerate() {
                let (s, c) = (n as f64 * TAU * j as f64 / m as f64).sin_cos();
                xc[n] += w * c * p[0];
                xs[n] += w * s * p[0];
                yc[n] += w * c * p[1];
                ys[n] += w * s * p[1];
            }
        }
        Ok(Self {
            shape: Shape::Fourier { xc, xs, yc, ys },
            center: self.center,
            phase: 0.0,
            resolution: self.resolution,
        })
    }

    fn jet(&self, t: f64) -> Jet {
        let mut j = self.shape.jet(t + self.phase);
        j[0][0] += self.center[0];
        j[0][1] += self.center[1];
        j
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        self.jet(t)[0]
    }

    /// `|γ'(t)|`.
    pub fn speed(&self, t: f64) -> f64 {
        let d = self.jet(t)[1];
        d[0].hypot(d[1])
    }

    /// Signed curvature `(x'y'' - y'x'') / |γ'|³`.
    pub fn curvature_at(&self, t: f64) -> Result<f64> {
        Ok(self.curvature_jet(t)?.curvature)
    }

    /// Curvature with first and second arc-length derivatives.
    pub fn curvature_jet(&self, t: f64) -> Result<CurvatureJet> {
        let j = self.jet(t);
        let [x1, y1] = j[1];
        let [x2, y2] = j[2];
        let [x3, y3] = j[3];
        let [x4, y4] = j[4];
        let sq = x1 * x1 + y1 * y1;
        let speed = sq.sqrt();
        if speed < SINGULAR_SPEED {
            return Err(Error::SingularParameterization { t, speed });
        }
        let num = x1 * y2 - y1 * x2;
        let num1 = x1 * y3 - y1 * x3;
        let num2 = x2 * y3 + x1 * y4 - y2 * x3 - y1 * x4;
        let sq1 = 2.0 * (x1 * x2 + y1 * y2);
        let sq2 = 2.0 * (x2 * x2 + x1 * x3 + y2 * y2 + y1 * y3);
        let p32 = sq.powf(-1.5);
        let p52 = sq.powf(-2.5);
        let p72 = sq.powf(-3.5);
        let k = num * p32;
        let k1 = num1 * p32 - 1.5 * num * p52 * sq1;
        let k2 = num2 * p32 - 3.0 * num1 * p52 * sq1 + 3.75 * num * p72 * sq1 * sq1
            - 1.5 * num * p52 * sq2;
        let speed1 = 0.5 * sq1 / speed;
        let d1 = k1 / speed;
        let d2 = (k2 * speed - k1 * speed1) / (speed * speed * speed);
        Ok(CurvatureJet {
            curvature: k,
            d1,
            d2,
            speed,
            dt1: k1,
        })
    }

    /// Position, unit tangent and unit inward normal at `t`.
    pub fn arc_length_frame(&self, t: f64) -> Result<Frame> {
        let j = self.jet(t);
        let speed = j[1][0].hypot(j[1][1]);
        if speed < SINGULAR_SPEED {
            return Err(Error::SingularParameterization { t, speed });
        }
        let tangent = [j[1][0] / speed, j[1][1] / speed];
        let normal = [-tangent[1], tangent[0]];
        let position = j[0];
        let inward =
            (self.center[0] - position[0]) * normal[0] + (self.center[1] - position[1]) * normal[1];
        if inward <= 0.0 {
            return Err(Error::Geometry(format!(
                "left normal at t = {t} does not point toward the interior sample point; curve is not counterclockwise"
            )));
        }
        Ok(Frame {
            position,
            tangent,
            normal,
        })
    }

    /// Arc length from `t0` to `t1` (signed, `t1 < t0` gives a negative
    /// value) by composite 8-point Gauss–Legendre quadrature.
    pub fn arc_length(&self, t0: f64, t1: f64) -> f64 {
        const NODES: [f64; 4] = [
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ];
        const WEIGHTS: [f64; 4] = [
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ];
        let span = t1 - t0;
        if span == 0.0 {
            return 0.0;
        }
        let panels = ((span.abs() / (PI / 64.0)).ceil() as usize).max(1);
        let h = span / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = t0 + (p as f64 + 0.5) * h;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                total += w * (self.speed(mid + 0.5 * h * x) + self.speed(mid - 0.5 * h * x));
            }
        }
        0.5 * h * total
    }

    /// Total length by the periodic trapezoidal rule.
    pub fn perimeter(&self) -> f64 {
        let m = self.resolution.max(64);
        TAU / m as f64
            * (0..m)
                .map(|j| self.speed(TAU * j as f64 / m as f64))
                .sum::<f64>()
    }

    /// `∮ κ ds`, equal to 2π for a simple closed counterclockwise curve.
    pub fn total_curvature(&self) -> Result<f64> {
        let m = self.resolution.max(64);
        let mut sum = 0.0;
        for j in 0..m {
            let cj = self.curvature_jet(TAU * j as f64 / m as f64)?;
            sum += cj.curvature * cj.speed;
        }
        Ok(TAU / m as f64 * sum)
    }

    /// Locates the nondegenerate local maxima of the curvature.
    ///
    /// `dh/dt` is sampled at `resolution` points; every `+ → -` sign change
    /// is bisected to `1e-12` in `t`. Critical points with
    /// `|h''| < 1e-6 max|h|` are returned separately as degenerate. A curve of
    /// constant curvature yields no maxima and a diagnostic.
    pub fn find_curvature_maxima(&self) -> Result<CurvatureMaxima> {
        let m = self.resolution.max(64);
        let offset = 0.5 * TAU / m as f64;
        let ts: Vec<f64> = (0..m).map(|j| offset + TAU * j as f64 / m as f64).collect();
        let jets: Vec<CurvatureJet> = ts
            .iter()
            .map(|&t| self.curvature_jet(t))
            .collect::<Result<_>>()?;
        let kmax = jets
            .iter()
            .fold(f64::NEG_INFINITY, |a, j| a.max(j.curvature));
        let kmin = jets.iter().fold(f64::INFINITY, |a, j| a.min(j.curvature));
        let kabs = kmax.abs().max(kmin.abs());
        if kmax - kmin <= 1e-10 * kabs.max(f64::MIN_POSITIVE) {
            return Ok(CurvatureMaxima {
                maxima: Vec::new(),
                degenerate: Vec::new(),
                diagnostic: Some("degenerate: constant curvature".into()),
            });
        }
        let mut maxima = Vec::new();
        let mut degenerate = Vec::new();
        for j in 0..m {
            let (a, b) = (jets[j].dt1, jets[(j + 1) % m].dt1);
            if !(a > 0.0 && b <= 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (ts[j], ts[j] + TAU / m as f64);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if self.curvature_jet(mid)?.dt1 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = (0.5 * (lo + hi)).rem_euclid(TAU);
            let cj = self.curvature_jet(t)?;
            if cj.d2.abs() < DEGENERACY_RATIO * kabs {
                degenerate.push(DegenerateCritical {
                    t,
                    curvature: cj.curvature,
                    h_second: cj.d2,
                });
            } else if cj.d2 < 0.0 {
                maxima.push(CurvatureMax {
                    t,
                    position: self.point(t),
                    curvature: cj.curvature,
                    h_prime: cj.d1,
                    h_second: cj.d2,
                });
            }
        }
        maxima.sort_by(|a, b| a.t.total_cmp(&b.t));
        degenerate.sort_by(|a, b| a.t.total_cmp(&b.t));
        let diagnostic = if maxima.is_empty() {
            Some("no nondegenerate curvature maximum found".into())
        } else {
            None
        };
        Ok(CurvatureMaxima {
            maxima,
            degenerate,
            diagnostic,
        })
    }

    /// Radial representation `r = f(θ)` about the center with `f'` and `f''`.
    ///
    /// Available for circles, ellipses and radial Fourier curves.
    pub fn radial_function(&self, theta: f64) -> Result<[f64; 3]> {
        match &self.shape {
            Shape::Circle { radius } => Ok([*radius, 0.0, 0.0]),
            Shape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                let q = b * b * c * c + a * a * s * s;
                let q1 = (a * a - b * b) * (2.0 * theta).sin();
                let q2 = 2.0 * (a * a - b * b) * (2.0 * theta).cos();
                let ab = a * b;
                let f = ab * q.powf(-0.5);
                let f1 = -0.5 * ab * q.powf(-1.5) * q1;
                let f2 = -0.5 * ab * (q.powf(-1.5) * q2 - 1.5 * q.powf(-2.5) * q1 * q1);
                Ok([f, f1, f2])
            }
            Shape::RadialFourier { r0, cos, sin } => {
                let r = fourier_derivatives(cos, sin, theta, *r0);
                Ok([r[0], r[1], r[2]])
            }
            Shape::Fourier { .. } => Err(Error::Geometry(
                "sampled curves carry no radial representation; build the grid from a registered curve".into(),
            )),
        }
    }

    /// Curve parameter `t` of the boundary point at polar angle `theta`.
    pub fn parameter_of_polar_angle(&self, theta: f64) -> Result<f64> {
        let u = match &self.shape {
            Shape::Circle { .. } | Shape::RadialFourier { .. } => theta,
            Shape::Ellipse { a, b } => (a * theta.sin()).atan2(b * theta.cos()),
            Shape::Fourier { .. } => {
                return Err(Error::Geometry(
                    "sampled curves carry no polar parameterization".into(),
                ))
            }
        };
        Ok((u - self.phase).rem_euclid(TAU))
    }

    /// Polar angle about the center of the boundary point at parameter `t`.
    pub fn polar_angle_of_parameter(&self, t: f64) -> f64 {
        let p = self.point(t);
        (p[1] - self.center[1])
            .atan2(p[0] - self.center[0])
            .rem_euclid(TAU)
    }

    /// Signed arc length from `t_ref` to `t` along the shorter way round.
    pub fn signed_arc_offset(&self, t_ref: f64, t: f64) -> f64 {
        let mut dt = (t - t_ref).rem_euclid(TAU);
        if dt > PI {
            dt -= TAU;
        }
        self.arc_length(t_ref, t_ref + dt)
    }

    /// Parameter reached from `t_ref` after signed arc length `s`.
    pub fn parameter_at_arc_offset(&self, t_ref: f64, s: f64) -> f64 {
        let mut t = t_ref + s / self.speed(t_ref);
        for _ in 0..50 {
            let f = self.arc_length(t_ref, t) - s;
            let step = f / self.speed(t);
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        t.rem_euclid(TAU)
    }
}
