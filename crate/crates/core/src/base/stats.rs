//! Kolmogorov–Smirnov goodness-of-fit tests.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the asymptotic p-value.
    pub n_eff: f64,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Asymptotic Kolmogorov survival function `P(K > λ)` with Stephens'
/// small-sample correction applied to `√n D`.
pub fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample test of `samples` against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_pvalue(d, n),
        n_eff: n,
    }
}

/// Two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    KsResult {
        statistic: d,
        p_value: kolmogorov_pvalue(d, n_eff),
        n_eff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::rng::RngStream;

    #[test]
    fn pvalue_reference_points() {
        // P(K > 1.36) ≈ 0.0494, P(K > 1.63) ≈ 0.0098 (large-n critical values)
        assert!((kolmogorov_pvalue(1.36 / 1e4, 1e8) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_pvalue(1.63 / 1e4, 1e8) - 0.0098).abs() < 1e-3);
        assert_eq!(kolmogorov_pvalue(0.0, 100.0), 1.0);
    }

    #[test]
    fn uniform_passes_and_shifted_fails() {
        let mut r = RngStream::new(11, 0);
        let xs: Vec<f64> = (0..50_000).map(|_| r.uniform()).collect();
        assert!(ks_one_sample(&xs, |x| x).passes(0.01));
        assert!(!ks_one_sample(&xs, |x| (x * 1.02).min(1.0)).passes(0.01));
        let ys: Vec<f64> = (0..50_000).map(|_| r.uniform()).collect();
        assert!(ks_two_sample(&xs, &ys).passes(0.01));
        let zs: Vec<f64> = ys.iter().map(|y| y * y).collect();
        assert!(!ks_two_sample(&xs, &zs).passes(0.01));
    }
}
