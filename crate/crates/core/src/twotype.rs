//! Two-type star-shaped Fleming–Viot process: transition and stationary
//! laws, moments, forward simulation and the decomposition of the
//! transition density by number of population replacements.
//!
//! Between replacements every line mutates at rate `θ/2` (to type 1 with
//! probability `p`), so the type-1 frequency drifts deterministically
//! towards `p`. At rate 1 the whole population is replaced by the offspring
//! of one individual, sending the frequency to 0 or 1.

use crate::base::law::{power_piece, Atom, MixedLaw, Side};
use crate::base::params::{check_frequency, check_time};
use crate::base::{sample_truncated_exponential, PathRecord, RngStream, TwoTypeParams};
use crate::eigen::{c_n0, c_n1};
use crate::error::{invalid, Result};
use serde::Serialize;
use statrs::function::factorial::{binomial, ln_factorial};

/// Single-line type-change probabilities `p_ij(t)` over a horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineKernel {
    pub p11: f64,
    pub p12: f64,
    pub p21: f64,
    pub p22: f64,
}

impl LineKernel {
    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.p11, self.p12], [self.p21, self.p22]]
    }
}

pub fn line_kernel(params: &TwoTypeParams, t: f64) -> Result<LineKernel> {
    check_time(t)?;
    let e = params.no_mutation(t);
    let m = -(-0.5 * params.theta() * t).exp_m1(); // 1 - e^{-θt/2}
    let p = params.p();
    Ok(LineKernel {
        p11: e + m * p,
        p12: m * (1.0 - p),
        p21: m * p,
        p22: e + m * (1.0 - p),
    })
}

/// Frequency reached from `x` after time `t` without replacement, and its
/// complement.
pub fn marginal_q(params: &TwoTypeParams, x: f64, t: f64) -> Result<(f64, f64)> {
    check_frequency(x)?;
    check_time(t)?;
    let q1 = drift(params, x, t);
    Ok((q1, 1.0 - q1))
}

/// Mutation flow `p + (x - p)e^{-θt/2}`.
pub(crate) fn drift(params: &TwoTypeParams, x: f64, t: f64) -> f64 {
    params.p() + (x - params.p()) * params.no_mutation(t)
}

/// Closed-form masses `(atom, upper piece, lower piece)` of the transition
/// law.
pub fn transition_masses(params: &TwoTypeParams, x: f64, t: f64) -> Result<(f64, f64, f64)> {
    check_frequency(x)?;
    check_time(t)?;
    let p = params.p();
    let moved = -(-t).exp_m1();
    let g = crate::base::params::mutation_gap_weight(params.theta(), t);
    Ok(((-t).exp(), p * moved + (x - p) * g, (1.0 - p) * moved - (x - p) * g))
}

/// Exact law of `ξ(t)` started from `x`: an atom at `q1(t; x)` with mass
/// `e^{-t}` (no replacement yet) and two density pieces, above
/// `p + (1-p)e^{-θt/2}` (last replacement of type 1) and below
/// `p(1 - e^{-θt/2})` (type 2).
pub fn transition_law(params: &TwoTypeParams, x: f64, t: f64) -> Result<MixedLaw> {
    check_frequency(x)?;
    check_time(t)?;
    if t == 0.0 {
        return MixedLaw::point_mass(x);
    }
    let p = params.p();
    let a = params.shape();
    let e = params.no_mutation(t);
    let mut atoms = Vec::new();
    let atom_mass = (-t).exp();
    if atom_mass > 0.0 {
        atoms.push(Atom {
            location: drift(params, x, t),
            mass: atom_mass,
        });
    }
    let (c2, w0) = if e > 0.0 { (e * (x - p), e) } else { (0.0, 0.0) };
    let upper = power_piece(p, Side::Above, 1.0 - p, w0, a, p, c2)?;
    let lower = power_piece(p, Side::Below, p, w0, a, 1.0 - p, -c2)?;
    MixedLaw::new(atoms, vec![upper, lower])
}

/// Density of the continuous part of the transition law; zero on the gap
/// around `p`, the atom is not included.
pub fn transition_density(params: &TwoTypeParams, x: f64, t: f64, xi: f64) -> Result<f64> {
    check_frequency(x)?;
    check_frequency(xi)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let p = params.p();
    let a = params.shape();
    let e = params.no_mutation(t);
    if xi > p + (1.0 - p) * e {
        let w = (xi - p) / (1.0 - p);
        Ok((p + e * (x - p) / w) * a * w.powf(a - 1.0) / (1.0 - p))
    } else if xi < p * (1.0 - e) {
        let w = 1.0 - xi / p;
        Ok(((1.0 - p - e * (x - p) / w) * a * w.powf(a - 1.0) / p).max(0.0))
    } else {
        Ok(0.0)
    }
}

/// Stationary law: `ξ = p + (1-p)η` with probability `p`, `ξ = p(1-η)`
/// otherwise, where `η` has density `(2/θ)η^{2/θ-1}`.
pub fn stationary_law(params: &TwoTypeParams) -> Result<MixedLaw> {
    let p = params.p();
    let a = params.shape();
    let upper = power_piece(p, Side::Above, 1.0 - p, 0.0, a, p, 0.0)?;
    let lower = power_piece(p, Side::Below, p, 0.0, a, 1.0 - p, 0.0)?;
    MixedLaw::new(Vec::new(), vec![upper, lower])
}

/// Stationary density. At `ξ = p` the upper branch is used.
pub fn stationary_density(params: &TwoTypeParams, xi: f64) -> Result<f64> {
    check_frequency(xi)?;
    let p = params.p();
    let a = params.shape();
    Ok(if xi >= p {
        p * a * ((xi - p) / (1.0 - p)).powf(a - 1.0) / (1.0 - p)
    } else {
        (1.0 - p) * a * (1.0 - xi / p).powf(a - 1.0) / p
    })
}

pub fn stationary_cdf(params: &TwoTypeParams, xi: f64) -> f64 {
    let p = params.p();
    let a = params.shape();
    if xi <= 0.0 {
        0.0
    } else if xi >= 1.0 {
        1.0
    } else if xi >= p {
        (1.0 - p) + p * ((xi - p) / (1.0 - p)).powf(a)
    } else {
        (1.0 - p) * (1.0 - (1.0 - xi / p).powf(a))
    }
}

pub fn stationary_sample(params: &TwoTypeParams, rng: &mut RngStream) -> f64 {
    let eta = rng.uniform().powf(0.5 * params.theta());
    let p = params.p();
    if rng.bernoulli(p) {
        p * (1.0 - eta) + eta
    } else {
        p * (1.0 - eta)
    }
}

/// `E_x[(ξ(t) - p)^n]`.
pub fn transition_moment(params: &TwoTypeParams, n: u32, x: f64, t: f64) -> Result<f64> {
    check_frequency(x)?;
    check_time(t)?;
    if n == 0 {
        return Ok(1.0);
    }
    let h = x - params.p();
    let e = params.no_mutation(t);
    let en = e.powi(n as i32);
    let et = (-t).exp();
    let stat = -c_n0(params, n) * (1.0 - en * et);
    let drifted = -c_n1(params, n) * h * (e - en * et);
    let frozen = et * (h * e).powi(n as i32);
    Ok(stat + drifted + frozen)
}

/// Stationary moments `(E[(ξ - p)^n], E[ξ^n])`, the raw one via the
/// binomial sum over `c_{k0}`.
pub fn stationary_moment(params: &TwoTypeParams, n: u32) -> (f64, f64) {
    let p = params.p();
    let central = match n {
        0 => 1.0,
        1 => 0.0,
        _ => -c_n0(params, n),
    };
    let mut raw = p.powi(n as i32);
    for k in 2..=n {
        raw -= binomial(n as u64, k as u64) * p.powi((n - k) as i32) * c_n0(params, k);
    }
    (central, raw)
}

/// Draw `ξ(t)` by conditioning on the last replacement before `t`.
pub fn sample_transition(params: &TwoTypeParams, x: f64, t: f64, rng: &mut RngStream) -> Result<f64> {
    check_frequency(x)?;
    if t.is_nan() || t <= 0.0 {
        return invalid(format!("transition sampling needs t > 0, got {t}"));
    }
    if rng.bernoulli((-t).exp()) {
        return Ok(drift(params, x, t));
    }
    let tau = sample_truncated_exponential(t, rng)?;
    let q1 = drift(params, x, t - tau);
    let k = line_kernel(params, tau)?;
    Ok(if rng.bernoulli(q1) { k.p11 } else { k.p21 })
}

/// Type of the individual whose offspring replaces the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Replacement {
    Type1,
    Type2,
}

/// Forward trajectory: replacement epochs with the frequency right after
/// each (1 or 0). Between epochs the frequency follows the mutation flow.
pub type ForwardPath = PathRecord<Replacement, f64>;

pub fn simulate_path(params: &TwoTypeParams, x: f64, horizon: f64, rng: &mut RngStream) -> Result<ForwardPath> {
    check_frequency(x)?;
    if horizon.is_nan() || horizon <= 0.0 || horizon.is_infinite() {
        return invalid(format!("horizon must be finite and > 0, got {horizon}"));
    }
    let mut path = PathRecord::new(x, horizon);
    let (mut now, mut freq) = (0.0, x);
    loop {
        let wait = rng.exp1();
        if now + wait > horizon {
            break;
        }
        now += wait;
        let before = drift(params, freq, wait);
        let (kind, after) = if rng.bernoulli(before) {
            (Replacement::Type1, 1.0)
        } else {
            (Replacement::Type2, 0.0)
        };
        path.push(now, kind, after);
        freq = after;
    }
    Ok(path)
}

/// Frequency of a forward path at time `s`.
pub fn path_frequency(params: &TwoTypeParams, path: &ForwardPath, s: f64) -> f64 {
    let k = path.count_until(s);
    let (t0, f0) = if k == 0 {
        (0.0, path.start)
    } else {
        (path.events[k - 1].time, path.events[k - 1].state)
    };
    drift(params, f0, s - t0)
}

/// Poisson weight `e^{-t}t^k/k!` of exactly `k` replacements in `(0, t)`.
pub fn replacement_count_prob(t: f64, k: u32) -> f64 {
    if t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * t.ln() - ln_factorial(k as u64) - t).exp()
}

/// Density of the last replacement time `t_k` given `k ≥ 1` replacements in
/// `(0, t)`: `k(t_k/t)^{k-1}/t`.
pub fn last_replacement_density(k: u32, t: f64, tk: f64) -> f64 {
    if !(tk > 0.0 && tk < t) || k == 0 {
        return 0.0;
    }
    k as f64 * (tk / t).powi(k as i32 - 1) / t
}

/// Joint density `f_k(ξ; x, t)` of exactly `k ≥ 1` replacements in `(0, t)`
/// and `ξ(t) = ξ`.
pub fn replacement_component_density(params: &TwoTypeParams, x: f64, t: f64, k: u32, xi: f64) -> Result<f64> {
    check_frequency(x)?;
    check_frequency(xi)?;
    if k == 0 {
        return invalid("replacement count must be >= 1");
    }
    if t.is_nan() || t <= 0.0 {
        return invalid(format!("t must be > 0, got {t}"));
    }
    let p = params.p();
    let theta = params.theta();
    let e = params.no_mutation(t);
    // w = e^{-θ s/2}, s = time since the last replacement
    let (w, dist, r) = if xi > p + (1.0 - p) * e {
        let w = (xi - p) / (1.0 - p);
        (w, xi - p, p + (x - p) * e / w)
    } else if xi < p * (1.0 - e) {
        let w = (p - xi) / p;
        (w, p - xi, 1.0 - p - (x - p) * e / w)
    } else {
        return Ok(0.0);
    };
    let frac = 1.0 + 2.0 / (theta * t) * w.ln(); // t_k / t
    if frac <= 0.0 {
        return Ok(0.0);
    }
    let jac = 2.0 / (theta * dist);
    Ok((r * jac * last_replacement_density(k, t, frac * t) * replacement_count_prob(t, k)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::QuadSpec;

    fn par(theta: f64, p: f64) -> TwoTypeParams {
        TwoTypeParams::new(theta, p).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k = line_kernel(&par(2.0, 0.5), 4f64.ln()).unwrap();
        assert!((k.p11 - 5.0 / 8.0).abs() < 1e-15);
        assert!((k.p21 - 3.0 / 8.0).abs() < 1e-15);
        let id = line_kernel(&par(1.3, 0.2), 0.0).unwrap();
        assert_eq!(id.as_matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        let inf = line_kernel(&par(1.3, 0.2), 1e4).unwrap();
        assert!((inf.p11 - 0.2).abs() < 1e-15 && (inf.p21 - 0.2).abs() < 1e-15);
        assert!(line_kernel(&par(1.0, 0.5), -1.0).is_err());
        let (q1, q2) = marginal_q(&par(2.0, 0.5), 1.0, 4f64.ln()).unwrap();
        assert!((q1 - 5.0 / 8.0).abs() < 1e-15 && (q1 + q2 - 1.0).abs() < 1e-15);
        let (q1, _) = marginal_q(&par(0.7, 0.3), 0.3, 2.0).unwrap();
        assert_eq!(q1, 0.3);
    }

    #[test]
    fn masses_close() {
        for &(theta, p, x, t) in &[(0.5, 0.1, 0.0, 0.1), (2.0, 0.5, 0.3, 1.0), (5.0, 0.9, 1.0, 10.0)] {
            let pr = par(theta, p);
            let (a, u, l) = transition_masses(&pr, x, t).unwrap();
            assert!((a + u + l - 1.0).abs() < 1e-14);
            let law = transition_law(&pr, x, t).unwrap();
            assert!((law.mass() - 1.0).abs() < 1e-13);
            let pieces = law.pieces();
            assert!((pieces[0].mass() - u).abs() < 1e-13 && (pieces[1].mass() - l).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_time_is_point_mass() {
        let law = transition_law(&par(1.0, 0.4), 0.7, 0.0).unwrap();
        assert_eq!(law.atoms().len(), 1);
        assert_eq!(law.atoms()[0].location, 0.7);
        assert!(law.pieces().is_empty());
    }

    #[test]
    fn uniform_stationary_case() {
        let pr = par(2.0, 0.5);
        for i in 0..=10 {
            let xi = i as f64 / 10.0;
            assert!((stationary_density(&pr, xi).unwrap() - 1.0).abs() < 1e-15);
        }
        let law = stationary_law(&pr).unwrap();
        assert!((law.mean(&QuadSpec::default()).unwrap() - 0.5).abs() < 1e-12);
        assert!((transition_density(&pr, 0.3, 60.0, 0.9).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(transition_density(&pr, 0.3, 1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn moment_examples() {
        let pr = par(2.0, 0.5);
        assert_eq!(transition_moment(&pr, 0, 0.2, 1.0).unwrap(), 1.0);
        let m2 = transition_moment(&pr, 2, 0.2, 80.0).unwrap();
        assert!((m2 - 1.0 / 12.0).abs() < 1e-15);
        let pr = par(0.8, 0.3);
        let m1 = transition_moment(&pr, 1, 0.9, 1.7).unwrap();
        assert!((m1 - 0.6 * (-0.8f64 * 1.7 / 2.0).exp()).abs() < 1e-15);
        let (c, r) = stationary_moment(&par(2.0, 0.5), 2);
        assert!((c - 1.0 / 12.0).abs() < 1e-15 && (r - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(stationary_moment(&pr, 1).1, 0.3);
    }

    #[test]
    fn stationary_cdf_matches_law() {
        let pr = par(5.0, 0.3);
        let law = stationary_law(&pr).unwrap();
        let spec = QuadSpec::default();
        for &xi in &[0.01, 0.2, 0.29999, 0.3, 0.30001, 0.6, 0.99] {
            let a = stationary_cdf(&pr, xi);
            let b = law.cdf(xi, &spec).unwrap();
            assert!((a - b).abs() < 1e-13, "xi={xi}: {a} vs {b}");
        }
    }

    #[test]
    fn path_without_jumps_ends_on_flow() {
        let pr = par(1.0, 0.4);
        let mut rng = RngStream::new(7, 0);
        for _ in 0..200 {
            let path = simulate_path(&pr, 0.9, 0.3, &mut rng).unwrap();
            if path.events.is_empty() {
                let end = path_frequency(&pr, &path, 0.3);
                assert_eq!(end, marginal_q(&pr, 0.9, 0.3).unwrap().0);
                return;
            }
            for w in path.events.windows(2) {
                assert!(w[0].time < w[1].time);
            }
        }
        panic!("no jump-free path in 200 tries");
    }

    #[test]
    fn conditional_last_replacement_integrates() {
        let spec = QuadSpec::default();
        let v = crate::base::integrate(|s| last_replacement_density(4, 2.0, s), 0.0, 2.0, &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-13);
    }
}
