//! Reference computations for the integration tests. Nothing here calls
//! into the library's own numerics.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature on `[a, b]`, refined by halving the step until two
/// levels agree. Nodes are placed by their distance to the nearer endpoint,
/// so integrable endpoint singularities are fine.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let eval = |u: f64| -> f64 {
        let s = FRAC_PI_2 * u.sinh();
        let c = s.cosh();
        let w = half * FRAC_PI_2 * u.cosh() / (c * c);
        // distance from the endpoint on the side of u: half(1 - tanh|s|)
        let d = half * 2.0 / (1.0 + (2.0 * s.abs()).exp());
        if d == 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if u >= 0.0 { b - d } else { a + d };
        if x <= a || x >= b {
            // node rounded onto the endpoint
            return 0.0;
        }
        w * f(x)
    };
    let mut h = 0.5;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let mut sum = eval(0.0);
        let mut k = 1;
        loop {
            let u = k as f64 * h;
            let l = eval(u) + eval(-u);
            sum += l;
            if u > 6.5 {
                break;
            }
            k += 1;
        }
        let est = sum * h;
        if (est - prev).abs() <= 1e-15 * est.abs().max(1e-300) + 1e-300 {
            return est;
        }
        prev = est;
        h *= 0.5;
    }
    prev
}

/// `∫_a^b f` for an integrand with a singularity at `origin` just outside
/// (or at the edge of) `[a, b]`: substitutes `|ξ - origin| = e^u`.
pub fn tanh_sinh_near<F: Fn(f64) -> f64>(f: F, origin: f64, a: f64, b: f64) -> f64 {
    if origin < a {
        tanh_sinh(|u: f64| f(origin + u.exp()) * u.exp(), (a - origin).ln(), (b - origin).ln())
    } else if origin > b {
        tanh_sinh(|u: f64| f(origin - u.exp()) * u.exp(), (origin - b).ln(), (origin - a).ln())
    } else {
        tanh_sinh(f, a, b)
    }
}

/// Classical RK4 with a fixed step for `x' = v(x)`.
pub fn rk4<V: Fn(f64) -> f64>(v: V, x0: f64, t: f64, steps: usize) -> f64 {
    let h = t / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = v(x);
        let k2 = v(x + 0.5 * h * k1);
        let k3 = v(x + 0.5 * h * k2);
        let k4 = v(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

pub type Mat = Vec<Vec<f64>>;

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// `exp(A)` by scaling and squaring with a 30-term Taylor series.
pub fn mat_exp(a: &Mat) -> Mat {
    let n = a.len();
    let norm: f64 = a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled: Mat = a.iter().map(|r| r.iter().map(|v| v / 2f64.powi(s)).collect()).collect();
    let mut out: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = out.clone();
    for k in 1..30 {
        term = mat_mul(&term, &scaled);
        for r in term.iter_mut() {
            for v in r.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        out = mat_mul(&out, &out);
    }
    out
}

pub fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn oracles_self_check() {
    assert!((tanh_sinh(|x| x.sqrt().recip(), 0.0, 1.0) - 2.0).abs() < 1e-12);
    assert!((tanh_sinh(|x| x.ln(), 0.0, 1.0) + 1.0).abs() < 1e-12);
    assert!((rk4(|x| -x, 1.0, 1.0, 1000) - (-1f64).exp()).abs() < 1e-13);
    let e = mat_exp(&vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    assert!((e[0][0] - 1f64.cos()).abs() < 1e-14 && (e[0][1] - 1f64.sin()).abs() < 1e-14);
}
