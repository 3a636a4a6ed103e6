mod common;

use common::{binom, tanh_sinh};
use proptest::prelude::*;
use starcoal::eigen::*;
use starcoal::twotype::transition_moment;
use starcoal::{QuadSpec, TwoTypeParams};

fn pr(theta: f64, p: f64) -> TwoTypeParams {
    TwoTypeParams::new(theta, p).unwrap()
}

/// `Lg(x) = (θ/2)(p - x)g'(x) + x g(1) + (1 - x) g(0) - g(x)`.
fn generator_oracle(params: &TwoTypeParams, raw: &[f64], x: f64) -> f64 {
    let g = |x: f64| raw.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let dg = raw.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c);
    0.5 * params.theta() * (params.p() - x) * dg + x * g(1.0) + (1.0 - x) * g(0.0) - g(x)
}

#[test]
fn quadratic_eigenpolynomial_example() {
    let params = pr(2.0, 0.5);
    assert_eq!(eigenvalue(&params, 2), 3.0);
    let (c20, c21) = eigen_coefficients(&params, 2).unwrap();
    assert!((c20 + 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(c21, 0.0);
    assert_eq!(eigen_coefficients(&params, 1).unwrap(), (0.0, 0.0));
    assert!(eigen_coefficients(&params, 0).is_err());
}

#[test]
fn eigenpolynomials_solve_the_eigen_equation_pointwise() {
    for &th in &[0.5, 1.0, 2.0, 5.0] {
        for &p in &[0.1, 0.5, 0.9] {
            let params = pr(th, p);
            for n in 1..=10 {
                let pn = eigen_poly(&params, n).unwrap();
                // expand P_n around 0 for the oracle
                let raw: Vec<f64> = (0..=n as usize)
                    .map(|j| {
                        (j..=n as usize)
                            .map(|k| pn.coeff(k) * binom(k as u32, j as u32) * (-p).powi((k - j) as i32))
                            .sum()
                    })
                    .collect();
                for i in 0..=10 {
                    let x = i as f64 / 10.0;
                    let lhs = generator_oracle(&params, &raw, x);
                    let rhs = -eigenvalue(&params, n) * pn.eval(x);
                    assert!((lhs - rhs).abs() < 1e-11, "θ={th} p={p} n={n} x={x}");
                }
            }
        }
    }
}

#[test]
fn stationary_expectation_of_eigenpolynomials_vanishes() {
    let params = pr(1.3, 0.25);
    for n in 2..=12 {
        let v = stationary_expectation(&params, &eigen_poly(&params, n).unwrap()).unwrap();
        assert!(v.abs() < 1e-14);
    }
}

#[test]
fn pairing_is_the_taylor_coefficient() {
    // g = x^m: g^{(n)}(p)/n! = C(m, n) p^{m-n}
    let p = 0.35;
    for m in 2..=8usize {
        let mut raw = vec![0.0; m + 1];
        raw[m] = 1.0;
        let g = PolyRep::from_monomial(p, &raw);
        for n in 2..=10u32 {
            let expect = if n as usize <= m { binom(m as u32, n) * p.powi(m as i32 - n as i32) } else { 0.0 };
            assert!((hyper_pairing(&g, n).unwrap() - expect).abs() < 1e-13);
        }
    }
    assert!(hyper_pairing(&PolyRep::zero(p), 1).is_err());
}

#[test]
fn principal_value_against_ordinary_integral() {
    // for θ < 2 the integrand g Q_1 is integrable and the principal value is
    // the plain integral
    for &(th, p) in &[(0.5, 0.2), (1.0, 0.7), (1.5, 0.5)] {
        let params = pr(th, p);
        let a = 2.0 / th;
        let raw = [0.3, -1.0, 0.5, 2.0, -0.7];
        let g = |x: f64| raw.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        let up = tanh_sinh(|w| g(p + (1.0 - p) * w) / (p * w) * p * a * w.powf(a - 1.0), 0.0, 1.0);
        let lo = tanh_sinh(|w| -g(p - p * w) / ((1.0 - p) * w) * (1.0 - p) * a * w.powf(a - 1.0), 0.0, 1.0);
        let gp = PolyRep::from_monomial(p, &raw);
        let v = pv_expectation_g_q1(&params, &gp).unwrap();
        assert!((v - (up + lo)).abs() < 1e-10, "θ={th} p={p}: {v} vs {}", up + lo);
    }
}

#[test]
fn principal_value_quadrature_agrees_with_series() {
    let spec = QuadSpec::default();
    for &th in &[0.5, 2.0, 5.0] {
        for &p in &[0.1, 0.5, 0.9] {
            let params = pr(th, p);
            for m in 1..=8 {
                let pm = eigen_poly(&params, m).unwrap();
                let q = pv_quadrature(&params, &pm, &spec).unwrap();
                let s = pv_expectation_g_q1(&params, &pm).unwrap();
                assert!((q - s).abs() < 1e-10, "θ={th} p={p} m={m}: {q} vs {s}");
            }
        }
    }
}

#[test]
fn q1_is_singular_only_at_p() {
    let params = pr(1.0, 0.4);
    assert!(q1_eval(&params, 0.4).is_err());
    assert!(q1_eval(&params, 0.9).unwrap() > 0.0);
    assert!(q1_eval(&params, 0.1).unwrap() < 0.0);
}

#[test]
fn generator_rejects_a_foreign_expansion_point() {
    let params = pr(1.0, 0.4);
    assert!(generator_apply(&params, &PolyRep::new(0.5, vec![1.0, 1.0])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_matches_oracle(th in 0.1f64..8.0, p in 0.01f64..0.99, raw in prop::collection::vec(-2.0f64..2.0, 1..9), x in 0.0f64..=1.0) {
        let params = pr(th, p);
        let g = PolyRep::from_monomial(p, &raw);
        let lg = generator_apply(&params, &g).unwrap();
        prop_assert!((lg.eval(x) - generator_oracle(&params, &raw, x)).abs() < 1e-10);
    }

    #[test]
    fn expansion_equals_direct(th in 0.1f64..8.0, p in 0.01f64..0.99, raw in prop::collection::vec(-1.0f64..1.0, 1..10), x in 0.0f64..=1.0, t in 0.0f64..15.0) {
        let params = pr(th, p);
        let g = PolyRep::from_monomial(p, &raw);
        let a = expansion_expectation(&params, &g, x, t).unwrap();
        let b = direct_expectation(&params, &g, x, t).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn monomial_round_trip(p in 0.01f64..0.99, raw in prop::collection::vec(-1.0f64..1.0, 1..10), x in 0.0f64..=1.0) {
        let g = PolyRep::from_monomial(p, &raw);
        let direct = raw.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        prop_assert!((g.eval(x) - direct).abs() < 1e-12);
    }

    #[test]
    fn central_moment_is_a_direct_expectation(th in 0.1f64..8.0, p in 0.01f64..0.99, n in 1u32..8, x in 0.0f64..=1.0, t in 0.0f64..5.0) {
        let params = pr(th, p);
        let mut coeffs = vec![0.0; n as usize + 1];
        coeffs[n as usize] = 1.0;
        let g = PolyRep::new(p, coeffs);
        let a = direct_expectation(&params, &g, x, t).unwrap();
        prop_assert!((a - transition_moment(&params, n, x, t).unwrap()).abs() < 1e-15);
    }
}
