//! Small dense and structured linear algebra kernels.
//!
//! Everything here is written for the structures that actually occur in the
//! crate: tridiagonal systems (Newton Jacobians, radial operators), symmetric
//! tridiagonal eigenproblems (stability matrices, symmetrized radial
//! operators) and banded systems (the curvilinear diffusion operators of the
//! simulator).

use crate::error::{Error, Result};

/// Solves a (possibly nonsymmetric) tridiagonal system by the Thomas
/// algorithm.
///
/// `sub[i]` couples row `i + 1` to column `i`, `sup[i]` couples row `i` to
/// column `i + 1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || sub.len() + 1 != n.max(1) || sup.len() + 1 != n.max(1) {
        return Err(Error::param("tridiagonal", "inconsistent band lengths"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = diag
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
        .max(f64::MIN_POSITIVE);
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= 1e-300 * scale {
        return Err(Error::SingularJacobian {
            condition: f64::INFINITY,
        });
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot.abs() <= 1e-300 * scale || !pivot.is_finite() {
            return Err(Error::SingularJacobian {
                condition: f64::INFINITY,
            });
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` is the entry at `(i, i + 1)` and `(i + 1, i)`.
    pub off: Vec<f64>,
}

/// Eigen-decomposition of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column-major eigenvectors: `vectors[j]` belongs to `values[j]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::param("off", "off-diagonal must have length n - 1"));
        }
        Ok(Self { diag, off })
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Ascending eigenvalues by the implicit-shift QL iteration.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        implicit_ql(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count from the
    /// pivots of `T - x I = L D Lᵀ`).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.order() {
            let coupling = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { coupling / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue (zero-based) by Sturm bisection.
    pub fn eigenvalue_by_bisection(&self, index: usize) -> Result<f64> {
        let n = self.order();
        if index >= n {
            return Err(Error::param(
                "index",
                format!("must be below the order {n}"),
            ));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let radius = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        while hi - lo > 4.0 * f64::EPSILON * scale {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Eigenvalues and orthonormal eigenvectors, ascending.
    ///
    /// Accumulating the rotations costs O(n^3); meant for small orders.
    pub fn eigen(&self) -> Result<SymEigen> {
        let n = self.order();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        implicit_ql(&mut d, &mut e, Some(&mut z))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&j| d[j]).collect();
        let vectors = order
            .iter()
            .map(|&j| (0..n).map(|row| z[row * n + j]).collect())
            .collect();
        Ok(SymEigen { values, vectors })
    }
}

/// QL with implicit Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// On entry `d` holds the diagonal and `e[0..n-1]` the off-diagonal with
/// `e[n-1] = 0`. On exit `d` holds the (unsorted) eigenvalues. When `z` is
/// given (row-major n x n, initialised to the identity) the rotations are
/// accumulated into it so that column `j` is the eigenvector of `d[j]`.
fn implicit_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    const MAX_ITER: usize = 60;
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::Eigen(format!(
                    "QL iteration exceeded {MAX_ITER} sweeps at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are
    /// summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col.len());
        }
        Self {
            n,
            row_ptr,
            col,
            val,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| (self.col[k], beta * self.val[k]))
                    .collect();
                row.push((i, alpha));
                row
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Largest `|i - j|` below and above the diagonal.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
        (lower, upper)
    }
}

/// LU factorization of a banded matrix without pivoting.
///
/// Suitable for the diagonally dominant M-matrix-like operators `I - c L_h`
/// produced by the simulator. Solves apply one step of iterative refinement
/// against the original matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    lu: Vec<f64>,
    original: CsrMatrix,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut lu = vec![0.0; n * width];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col[k];
                lu[i * width + j + lower - i] += a.val[k];
            }
        }
        let scale = a.val.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = lu[k * width + lower];
            if pivot.abs() <= 1e-14 * scale || !pivot.is_finite() {
                return Err(Error::LinearSolve {
                    residual: f64::INFINITY,
                });
            }
            let jmax = (k + upper).min(n - 1);
            let imax = (k + lower).min(n - 1);
            for i in k + 1..=imax {
                let ik = i * width + k + lower - i;
                let l = lu[ik] / pivot;
                lu[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let (head, tail) = lu.split_at_mut(i * width);
                let row_k = &head[k * width + lower + 1..k * width + lower + 1 + (jmax - k)];
                let start_i = k + 1 + lower - i;
                let row_i = &mut tail[start_i..start_i + (jmax - k)];
                for (x, y) in row_i.iter_mut().zip(row_k) {
                    *x -= l * y;
                }
            }
        }
        Ok(Self {
            n,
            lower,
            upper,
            width,
            lu,
            original: a.clone(),
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn substitute(&self, x: &mut [f64]) {
        let (n, w, lo, up) = (self.n, self.width, self.lower, self.upper);
        for i in 0..n {
            let jmin = i.saturating_sub(lo);
            let mut acc = x[i];
            for j in jmin..i {
                acc -= self.lu[i * w + j + lo - i] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let jmax = (i + up).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=jmax {
                acc -= self.lu[i * w + j + lo - i] * x[j];
            }
            x[i] = acc / self.lu[i * w + lo];
        }
    }

    /// Solves `A x = b`, returning the solution and the relative residual
    /// `|A x - b|_inf / |b|_inf` after one refinement step.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let mut x = b.to_vec();
        self.substitute(&mut x);
        let mut r = self.original.mul_vec(&x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        self.substitute(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        let ax = self.original.mul_vec(&x);
        let bnorm = b
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let res = ax
            .iter()
            .zip(b)
            .fold(0.0_f64, |m, (a, bb)| m.max((a - bb).abs()));
        (x, res / bnorm)
    }
}
