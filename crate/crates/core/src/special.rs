//! Ascending-series Bessel functions, the first zero of J₀, Gauss–Legendre
//! rules and Jacobi polynomials.

use num_complex::Complex64;
use std::f64::consts::PI;

const SERIES_TERMS_MAX: usize = 400;

/// Normalized series terms b_k = (-z²/4)^k m! / (k!(k+m)!), summed until
/// they stop contributing.
fn series<F: FnMut(usize, Complex64)>(m: usize, z: Complex64, mut f: F) {
    let q = -z * z / 4.0;
    let mut b = Complex64::new(1.0, 0.0);
    let mut small = 0;
    for k in 0..SERIES_TERMS_MAX {
        if k > 0 {
            b = b * q / (k as f64 * (k + m) as f64);
        }
        f(k, b);
        if b.norm() < 1e-18 {
            small += 1;
            if small > 2 {
                break;
            }
        } else {
            small = 0;
        }
    }
}

/// J_m(z) and J_m'(z) from the ascending series.
pub fn bessel_j(m: usize, z: Complex64) -> (Complex64, Complex64) {
    let mut s = Complex64::new(0.0, 0.0);
    let mut sd = Complex64::new(0.0, 0.0);
    series(m, z, |k, b| {
        s += b;
        sd += b * (2 * k + m) as f64;
    });
    // prefactor (z/2)^m / m!
    let mut pre = Complex64::new(1.0, 0.0);
    for i in 1..=m {
        pre = pre * z / (2.0 * i as f64);
    }
    let j = pre * s;
    let jd = if z.norm() == 0.0 {
        if m == 1 {
            Complex64::new(0.5, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    } else {
        pre * sd / z
    };
    (j, jd)
}

/// z J_m'(z) / J_m(z) with the (z/2)^m prefactor cancelled; this is the DtN
/// eigenvalue of Δ + c on the unit disk for z = √c.
pub fn bessel_log_derivative(m: usize, z: Complex64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    let mut sd = Complex64::new(0.0, 0.0);
    series(m, z, |k, b| {
        s += b;
        sd += b * (2 * k + m) as f64;
    });
    sd / s
}

/// DtN value for the constant coefficient c = q + κ² at degree m.
pub fn constant_dtn(m: usize, c: Complex64) -> Complex64 {
    bessel_log_derivative(m, c.sqrt())
}

/// Newton iteration on the series for the first positive zero of J₀.
pub fn first_zero_j0() -> f64 {
    let mut x = 2.4f64;
    for _ in 0..50 {
        let (j0, j0d) = bessel_j(0, Complex64::new(x, 0.0));
        let step = j0.re / j0d.re;
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

/// First Dirichlet eigenvalue of -Δ on the unit disk.
pub fn kappa1() -> f64 {
    let j = first_zero_j0();
    j * j
}

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    (x, w)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Jacobi polynomials P_k^{(a,b)}(x) for k = 0..n.
pub fn jacobi_all(n: usize, a: f64, b: f64, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n == 0 {
        return p;
    }
    p.push((a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c0 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c2 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let kk = k as usize;
        let next = (c1 * p[kk - 1] - c2 * p[kk - 2]) / c0;
        p.push(next);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn jacobi_reduces_to_legendre() {
        let p = jacobi_all(5, 0.0, 0.0, 0.3);
        assert!((p[5] - legendre(5, 0.3).0).abs() < 1e-14);
    }

    #[test]
    fn j0_zero() {
        assert!((first_zero_j0() - 2.404_825_557_695_773).abs() < 1e-12);
    }
}
