//! Modified Bessel functions I0, I1, K0, K1 for real positive arguments.
//!
//! Small arguments (`x <= 2`) use the ascending series with harmonic-number
//! (digamma) constants. For `2 < x < 25` the exponentially scaled integral
//! representation `e^x K_n(x) = int_0^inf exp(-x (cosh t - 1)) cosh(n t) dt`
//! is evaluated with the trapezoidal rule, which converges geometrically for
//! this entire integrand. For `x >= 25` the Hankel asymptotic series is used,
//! truncated at its smallest term.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Boundary between the ascending series and the large-argument forms.
pub const SERIES_CROSSOVER: f64 = 2.0;

const ASYMPTOTIC_CROSSOVER: f64 = 25.0;
const TRAPEZOID_STEP: f64 = 0.1;

pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

pub fn bessel_i1(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    0.5 * x * sum
}

fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += harmonic * term;
        if term * harmonic < 1e-18 * tail.abs().max(1e-300) {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + tail
}

fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // psi(k + 1) = H_k - gamma
    let mut psi_k1 = -EULER_GAMMA;
    let mut psi_k2 = 1.0 - EULER_GAMMA;
    let mut term = 1.0; // q^k / (k! (k + 1)!)
    let mut digamma_sum = psi_k1 + psi_k2;
    let mut i1_sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        i1_sum += term;
        let t = (psi_k1 + psi_k2) * term;
        digamma_sum += t;
        if t.abs() < 1e-18 * digamma_sum.abs().max(1e-300) {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * digamma_sum
}

/// `e^x K_n(x)` for n in {0, 1} by trapezoidal quadrature of the integral
/// representation.
fn k_scaled_integral(order: u32, x: f64) -> f64 {
    let h = TRAPEZOID_STEP;
    let mut sum = 0.5; // t = 0 node, cosh(0) = 1 for both orders
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let c = t.cosh();
        let expo = -x * (c - 1.0);
        let weight = if order == 0 { 1.0 } else { c };
        let f = expo.exp() * weight;
        sum += f;
        if expo < -45.0 {
            break;
        }
        k += 1;
    }
    h * sum
}

/// `e^x K_n(x)` by the Hankel expansion truncated at the smallest term.
fn k_scaled_asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * sum
}

/// `e^x K_0(x)`, finite for large `x`.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    if x <= SERIES_CROSSOVER {
        k0_series(x) * x.exp()
    } else if x < ASYMPTOTIC_CROSSOVER {
        k_scaled_integral(0, x)
    } else {
        k_scaled_asymptotic(0, x)
    }
}

/// `e^x K_1(x)`, finite for large `x`.
pub fn bessel_k1_scaled(x: f64) -> f64 {
    if x <= SERIES_CROSSOVER {
        k1_series(x) * x.exp()
    } else if x < ASYMPTOTIC_CROSSOVER {
        k_scaled_integral(1, x)
    } else {
        k_scaled_asymptotic(1, x)
    }
}

/// `K_0(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> f64 {
    if x <= SERIES_CROSSOVER {
        k0_series(x)
    } else {
        bessel_k0_scaled(x) * (-x).exp()
    }
}

/// `K_1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    if x <= SERIES_CROSSOVER {
        k1_series(x)
    } else {
        bessel_k1_scaled(x) * (-x).exp()
    }
}

/// Both branches evaluated at the same argument, for seam diagnostics.
pub fn crossover_branches(x: f64) -> [(f64, f64); 2] {
    [
        (k0_series(x), k_scaled_integral(0, x) * (-x).exp()),
        (k1_series(x), k_scaled_integral(1, x) * (-x).exp()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.8 values.
        let cases = [
            (0.5, 0.924_419_071_227_665_9, 1.656_441_120_003_300_9),
            (1.0, 0.421_024_438_240_708_3, 0.601_907_230_197_234_6),
            (2.0, 0.113_893_872_749_533_4, 0.139_865_881_816_522_4),
            (5.0, 0.003_691_098_334_042_594, 0.004_044_613_445_452_164),
        ];
        for (x, k0, k1) in cases {
            assert!(
                (bessel_k0(x) / k0 - 1.0).abs() < 1e-13,
                "K0({x}) = {}",
                bessel_k0(x)
            );
            assert!(
                (bessel_k1(x) / k1 - 1.0).abs() < 1e-13,
                "K1({x}) = {}",
                bessel_k1(x)
            );
        }
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i1(1.0) - 0.565_159_103_992_485_0).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_branch_agrees_with_quadrature() {
        for &x in &[25.0, 30.0, 40.0, 50.0] {
            let a = k_scaled_asymptotic(0, x);
            let q = k_scaled_integral(0, x);
            assert!((a / q - 1.0).abs() < 1e-14, "{x}: {a} {q}");
            let a = k_scaled_asymptotic(1, x);
            let q = k_scaled_integral(1, x);
            assert!((a / q - 1.0).abs() < 1e-14, "{x}: {a} {q}");
        }
    }

    #[test]
    fn wronskian_holds() {
        let mut x = 0.1;
        while x <= 10.0 {
            let w = bessel_i0(x) * bessel_k1(x) + bessel_i1(x) * bessel_k0(x);
            assert!((w * x - 1.0).abs() < 1e-12, "x = {x}: {}", w * x);
            x += 0.05;
        }
    }
}
