//! Eigenstructure of the two-type generator
//!
//! `Lg(x) = x(g(1) - g(x)) + (1 - x)(g(0) - g(x)) + (θ/2)(p - x)g'(x)`.
//!
//! The right eigenfunctions are the polynomials
//! `P_n(x) = (x-p)^n + c_{n1}(x-p) + c_{n0}` with eigenvalue `-λ_n`,
//! `λ_1 = θ/2`, `λ_n = 1 + nθ/2` for `n ≥ 2`. Everything here works on
//! polynomials written in the shifted variable `h = x - p`, where the left
//! pairings reduce to coefficient extraction and all expansions are finite.

use crate::base::quad::{integrate, QuadSpec};
use crate::base::TwoTypeParams;
use crate::error::{invalid, Error, Result};
use crate::twotype::transition_moment;
use serde::Serialize;
use statrs::function::factorial::binomial;

/// Polynomial `Σ a_k (x - shift)^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyRep {
    shift: f64,
    coeffs: Vec<f64>,
}

impl PolyRep {
    pub fn new(shift: f64, coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Self { shift, coeffs }
    }

    pub fn zero(shift: f64) -> Self {
        Self::new(shift, vec![0.0])
    }

    /// Re-expand `Σ b_k x^k` around `shift`.
    pub fn from_monomial(shift: f64, raw: &[f64]) -> Self {
        let n = raw.len();
        let mut coeffs = vec![0.0; n.max(1)];
        for (k, &b) in raw.iter().enumerate() {
            // x^k = Σ_j C(k,j) shift^{k-j} h^j
            for (j, c) in coeffs.iter_mut().enumerate().take(k + 1) {
                *c += b * binomial(k as u64, j as u64) * shift.powi((k - j) as i32);
            }
        }
        Self::new(shift, coeffs)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Length of the coefficient list minus one (trailing zeros included).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `(x - shift)^n`, zero beyond the list.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_shifted(x - self.shift)
    }

    /// Value at `x = shift + h`, by Horner in `h`.
    pub fn eval_shifted(&self, h: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * h + a)
    }

    /// `g^{(n)}(shift)`.
    pub fn derivative_at_shift(&self, n: usize) -> f64 {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        self.coeff(n) * fact
    }

    /// Coefficient-wise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &PolyRep) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> PolyRep {
        PolyRep::new(self.shift, self.coeffs.iter().map(|a| a * s).collect())
    }
}

pub fn eigenvalue(params: &TwoTypeParams, n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => 0.5 * params.theta(),
        _ => 1.0 + 0.5 * n as f64 * params.theta(),
    }
}

/// `c_{n0} = -(2/θ)/(n + 2/θ) [p(1-p)^n + (1-p)(-p)^n]`, as a formula in `n`.
/// Equals minus the stationary central moment of order `n ≥ 2`.
pub(crate) fn c_n0(params: &TwoTypeParams, n: u32) -> f64 {
    let p = params.p();
    let a = params.shape();
    let n_i = n as i32;
    -a / (n as f64 + a) * (p * (1.0 - p).powi(n_i) + (1.0 - p) * (-p).powi(n_i))
}

/// `c_{n1} = (2/θ)/(n - 1 + 2/θ) [(-p)^n - (1-p)^n]`, as a formula in `n`.
pub(crate) fn c_n1(params: &TwoTypeParams, n: u32) -> f64 {
    let p = params.p();
    let a = params.shape();
    let n_i = n as i32;
    a / (n as f64 - 1.0 + a) * ((-p).powi(n_i) - (1.0 - p).powi(n_i))
}

/// `(c_{n0}, c_{n1})` of the eigenpolynomial `P_n`; `(0, 0)` for `n = 1`.
pub fn eigen_coefficients(params: &TwoTypeParams, n: u32) -> Result<(f64, f64)> {
    match n {
        0 => invalid("eigenpolynomials are indexed from n = 1"),
        1 => Ok((0.0, 0.0)),
        _ => Ok((c_n0(params, n), c_n1(params, n))),
    }
}

pub fn eigen_poly(params: &TwoTypeParams, n: u32) -> Result<PolyRep> {
    let (c0, c1) = eigen_coefficients(params, n)?;
    let mut coeffs = vec![0.0; n as usize + 1];
    coeffs[n as usize] = 1.0;
    coeffs[0] += c0;
    coeffs[1] += c1;
    Ok(PolyRep::new(params.p(), coeffs))
}

fn check_shift(params: &TwoTypeParams, g: &PolyRep) -> Result<()> {
    if g.shift() != params.p() {
        return invalid(format!(
            "polynomial is expanded around {} but p = {}",
            g.shift(),
            params.p()
        ));
    }
    Ok(())
}

/// Exact image `Lg`, coefficient-wise in `h = x - p`.
pub fn generator_apply(params: &TwoTypeParams, g: &PolyRep) -> Result<PolyRep> {
    check_shift(params, g)?;
    let p = params.p();
    let half = 0.5 * params.theta();
    let g1 = g.eval_shifted(1.0 - p);
    let g0 = g.eval_shifted(-p);
    let a = g.coeffs();
    let mut b: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(k, &ak)| -(1.0 + half * k as f64) * ak)
        .collect();
    if b.len() < 2 {
        b.resize(2, 0.0);
    }
    // x g(1) + (1-x) g(0) = p g(1) + (1-p) g(0) + h (g(1) - g(0))
    b[0] += p * g1 + (1.0 - p) * g0;
    b[1] += g1 - g0;
    Ok(PolyRep::new(p, b))
}

/// The left eigenfunction `Q_1`; singular at `ξ = p`.
pub fn q1_eval(params: &TwoTypeParams, xi: f64) -> Result<f64> {
    let p = params.p();
    if xi == p {
        return Err(Error::Singularity(format!("Q1 is singular at xi = p = {p}")));
    }
    if xi > p {
        Ok(1.0 / p * (1.0 - p) / (xi - p))
    } else {
        Ok(-1.0 / (1.0 - p) * p / (p - xi))
    }
}

/// Principal value of `E[g(ξ)Q_1(ξ)]` under the stationary law:
/// `g'(p) - Σ_{n≥2} c_{n1} g^{(n)}(p)/n!`.
pub fn pv_expectation_g_q1(params: &TwoTypeParams, g: &PolyRep) -> Result<f64> {
    check_shift(params, g)?;
    let mut v = g.coeff(1);
    for n in 2..=g.degree() {
        v -= g.coeff(n) * c_n1(params, n as u32);
    }
    Ok(v)
}

/// The same principal value by quadrature. In the stationary representation
/// the two branches are `ξ = p + (1-p)η` and `ξ = p - pη`; truncating both at
/// the same `η` leaves the integrable integrand
/// `(2/θ)η^{2/θ-2} [g(p + (1-p)η) - g(p - pη)]`, whose bracket is summed
/// term by term so that the constant term cancels exactly.
pub fn pv_quadrature(params: &TwoTypeParams, g: &PolyRep, spec: &QuadSpec) -> Result<f64> {
    check_shift(params, g)?;
    let p = params.p();
    let a = params.shape();
    let diffs: Vec<f64> = (1..=g.degree())
        .map(|k| g.coeff(k) * ((1.0 - p).powi(k as i32) - (-p).powi(k as i32)))
        .collect();
    integrate(
        |eta| {
            let bracket_over_eta = diffs.iter().rev().fold(0.0, |acc, &d| acc * eta + d);
            a * eta.powf(a - 1.0) * bracket_over_eta
        },
        0.0,
        1.0,
        spec,
    )
}

/// `E[g(ξ)]` under the stationary law: `g(p) - Σ_{n≥2} c_{n0} g^{(n)}(p)/n!`.
pub fn stationary_expectation(params: &TwoTypeParams, g: &PolyRep) -> Result<f64> {
    check_shift(params, g)?;
    let mut v = g.coeff(0);
    for n in 2..=g.degree() {
        v -= g.coeff(n) * c_n0(params, n as u32);
    }
    Ok(v)
}

/// `⟨g, Q̃_n⟩ = g^{(n)}(p)/n!`, the `(x-p)^n` coefficient of `g`.
pub fn hyper_pairing(g: &PolyRep, n: u32) -> Result<f64> {
    if n < 2 {
        return invalid(format!("hyperfunction pairing needs n >= 2, got {n}"));
    }
    Ok(g.coeff(n as usize))
}

/// `E_x[g(ξ(t))]` from the eigen-expansion.
pub fn expansion_expectation(params: &TwoTypeParams, g: &PolyRep, x: f64, t: f64) -> Result<f64> {
    crate::base::params::check_frequency(x)?;
    crate::base::params::check_time(t)?;
    let h = x - params.p();
    let mut v = stationary_expectation(params, g)?;
    v += (-eigenvalue(params, 1) * t).exp() * pv_expectation_g_q1(params, g)? * h;
    for n in 2..=g.degree() as u32 {
        let an = hyper_pairing(g, n)?;
        if an == 0.0 {
            continue;
        }
        let pn = h.powi(n as i32) + c_n1(params, n) * h + c_n0(params, n);
        v += (-eigenvalue(params, n) * t).exp() * an * pn;
    }
    Ok(v)
}

/// `E_x[g(ξ(t))]` as the linear combination of central transition moments.
pub fn direct_expectation(params: &TwoTypeParams, g: &PolyRep, x: f64, t: f64) -> Result<f64> {
    check_shift(params, g)?;
    let mut v = 0.0;
    for (k, &a) in g.coeffs().iter().enumerate() {
        if a != 0.0 {
            v += a * transition_moment(params, k as u32, x, t)?;
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn par(theta: f64, p: f64) -> TwoTypeParams {
        TwoTypeParams::new(theta, p).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let pr = par(2.0, 0.3);
        assert_eq!(eigenvalue(&pr, 0), 0.0);
        assert_eq!([1, 2, 3].map(|n| eigenvalue(&pr, n)), [1.0, 3.0, 4.0]);
        assert_eq!(eigenvalue(&par(1.0, 0.3), 2), 2.0);
    }

    #[test]
    fn eigen_poly_examples() {
        let pr = par(2.0, 0.5);
        let p2 = eigen_poly(&pr, 2).unwrap();
        assert!(p2.max_abs_diff(&PolyRep::new(0.5, vec![-1.0 / 12.0, 0.0, 1.0])) < 1e-16);
        assert_eq!(eigen_poly(&pr, 1).unwrap().coeffs(), &[0.0, 1.0]);
        assert!(eigen_poly(&pr, 0).is_err());
        for n in [3, 5, 7] {
            assert!(eigen_coefficients(&par(3.3, 0.5), n).unwrap().0.abs() < 1e-17);
        }
    }

    #[test]
    fn generator_examples() {
        let pr = par(2.0, 0.5);
        let g = PolyRep::new(0.5, vec![0.0, 0.0, 1.0]);
        let lg = generator_apply(&pr, &g).unwrap();
        assert!(lg.max_abs_diff(&PolyRep::new(0.5, vec![0.25, 0.0, -3.0])) < 1e-15);
        let c = generator_apply(&pr, &PolyRep::new(0.5, vec![2.5])).unwrap();
        assert!(c.max_abs_diff(&PolyRep::zero(0.5)) < 1e-15);
        let wrong = PolyRep::new(0.4, vec![1.0]);
        assert!(generator_apply(&pr, &wrong).is_err());
    }

    #[test]
    fn q1_values() {
        let pr = par(1.0, 0.5);
        assert!((q1_eval(&pr, 0.8).unwrap() - 1.0 / 0.3).abs() < 1e-14);
        assert!((q1_eval(&pr, 0.1).unwrap() + 1.0 / 0.4).abs() < 1e-14);
        let pr = par(1.0, 0.3);
        assert!((q1_eval(&pr, 1.0).unwrap() - 1.0 / 0.3).abs() < 1e-15);
        assert!((q1_eval(&pr, 0.0).unwrap() + 1.0 / 0.7).abs() < 1e-15);
        assert!(matches!(q1_eval(&pr, 0.3), Err(Error::Singularity(_))));
    }

    #[test]
    fn pv_examples() {
        let pr = par(1.0, 0.5);
        assert_eq!(pv_expectation_g_q1(&pr, &PolyRep::new(0.5, vec![1.0])).unwrap(), 0.0);
        let id = PolyRep::from_monomial(0.5, &[0.0, 1.0]);
        assert!((pv_expectation_g_q1(&pr, &id).unwrap() - 1.0).abs() < 1e-15);
        let q = pv_quadrature(&pr, &id, &QuadSpec::default()).unwrap();
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_expectation_examples() {
        let pr = par(2.0, 0.5);
        let sq = PolyRep::from_monomial(0.5, &[0.0, 0.0, 1.0]);
        assert!((stationary_expectation(&pr, &sq).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let pr = par(0.7, 0.2);
        let id = PolyRep::from_monomial(0.2, &[0.0, 1.0]);
        assert!((stationary_expectation(&pr, &id).unwrap() - 0.2).abs() < 1e-16);
    }

    #[test]
    fn from_monomial_roundtrip() {
        let g = PolyRep::from_monomial(0.3, &[1.0, -2.0, 0.5, 4.0]);
        for &x in &[0.0, 0.25, 0.9] {
            let raw = 1.0 - 2.0 * x + 0.5 * x * x + 4.0 * x * x * x;
            assert!((g.eval(x) - raw).abs() < 1e-14);
        }
        assert_eq!(g.derivative_at_shift(3), 24.0);
    }

    #[test]
    fn expansion_of_identity() {
        let pr = par(1.4, 0.35);
        let id = PolyRep::from_monomial(0.35, &[0.0, 1.0]);
        for &(x, t) in &[(0.0, 0.1), (0.9, 2.0)] {
            let v = expansion_expectation(&pr, &id, x, t).unwrap();
            assert!((v - (0.35 + (x - 0.35) * (-0.7f64 * t).exp())).abs() < 1e-15);
        }
        let one = PolyRep::new(0.35, vec![1.0]);
        assert_eq!(expansion_expectation(&pr, &one, 0.4, 3.0).unwrap(), 1.0);
    }
}
