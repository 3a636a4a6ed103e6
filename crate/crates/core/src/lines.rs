//! Non-mutant ancestral lines `A_n(t)` of the star-shaped coalescent.
//!
//! Back in time each non-mutant line is lost to mutation at rate `θ/2`,
//! and at rate 1 all lines merge into one (total coalescence, time `T`).
//! After `T` the single line survives until it mutates.
//!
//! The closed forms for `P(A_n(t) = j)` and their spectral reconstruction
//! are alternating binomial sums. Up to `n = 30` they are summed in
//! double-double arithmetic; above that the `j ≤ 1` probabilities use the
//! integral representation, which has no cancellation.

use crate::base::dd::DoubleDouble as Dd;
use crate::base::mc::{ensemble, ensemble_vec, McEstimate};
use crate::base::params::{check_frequency, check_time, mutation_gap_weight};
use crate::base::quad::{integrate, QuadSpec};
use crate::base::{PathRecord, RngStream, TwoTypeParams};
use crate::eigen::{direct_expectation, PolyRep};
use crate::error::{invalid, Result};
use serde::Serialize;
use statrs::function::factorial::{binomial, ln_binomial};

/// Largest `n` handled by the double-double alternating sums.
pub const EXACT_SUM_MAX_N: u32 = 30;

/// Probability vector of `A_n(t)` over `j = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineDist {
    pub n: u32,
    pub t: f64,
    pub probs: Vec<f64>,
}

impl LineDist {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &LineDist) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta > 0.0) {
        return invalid(format!("theta must be finite and > 0, got {theta}"));
    }
    Ok(())
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        return invalid("sample size n must be >= 1");
    }
    Ok(())
}

fn dd(x: f64) -> Dd {
    Dd::new(x)
}

/// `e^{-(t + kθt/2)}` in double-double, i.e. `e^{-t}p(t)^k`.
fn dd_decay(theta: f64, t: f64, k: u32, with_replacement: bool) -> Dd {
    let rate = Dd::product(k as f64, 0.5 * theta) + if with_replacement { Dd::ONE } else { Dd::ZERO };
    (-(rate * dd(t))).exp()
}

/// `1 + (k-1)θ/2` in double-double.
fn dd_denominator(theta: f64, k: u32) -> Dd {
    Dd::ONE + Dd::product((k as f64) - 1.0, 0.5 * theta)
}

/// `∫_0^t (1 - (1 - p(τ))^n) p(t - τ) e^{-τ} dτ`, the probability of a single
/// non-mutant line at `t` that descends from the total coalescence.
/// Written as `p(t)(2/θ) ∫_{p(t)}^1 u^{2/θ-2}(1 - (1-u)^n) du`.
fn coalesced_single_line(n: u32, theta: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let pt = (-0.5 * theta * t).exp();
    let a = 2.0 / theta;
    let nf = n as f64;
    let spec = QuadSpec::default();
    let v = integrate(
        |u| u.powf(a - 2.0) * -(nf * (-u).ln_1p()).exp_m1(),
        pt,
        1.0,
        &spec,
    )?;
    Ok(pt * a * v)
}

/// Exact law of `A_n(t)`.
pub fn an_distribution(n: u32, theta: f64, t: f64) -> Result<LineDist> {
    check_n(n)?;
    check_theta(theta)?;
    check_time(t)?;
    let nn = n as usize;
    let mut probs = vec![0.0; nn + 1];
    if t == 0.0 {
        probs[nn] = 1.0;
        return Ok(LineDist { n, t, probs });
    }
    let ln_p = -0.5 * theta * t;
    let ln_q = (-(-0.5 * theta * t).exp_m1()).ln(); // ln(1 - p(t))
    for (j, pr) in probs.iter_mut().enumerate().skip(2) {
        let j64 = j as u64;
        *pr = (ln_binomial(n as u64, j64) + j as f64 * ln_p + (n as u64 - j64) as f64 * ln_q - t).exp();
    }
    let single_before = n as f64 * (ln_p + (n as f64 - 1.0) * ln_q - t).exp();
    if n <= EXACT_SUM_MAX_N {
        let mut s1 = Dd::ZERO;
        let mut s0 = Dd::ZERO;
        let p_dd = (-(Dd::product(0.5 * theta, t))).exp();
        for k in 1..=n {
            let c = dd(binomial(n as u64, k as u64));
            let c = if k % 2 == 1 { c } else { -c };
            let tail = dd_decay(theta, t, k, true);
            let den = dd_denominator(theta, k);
            s1 = s1 + c * (p_dd - tail) / den;
            s0 = s0 + c * (p_dd + Dd::product((k as f64) - 1.0, 0.5 * theta) * tail) / den;
        }
        probs[1] = single_before + s1.to_f64();
        probs[0] = (Dd::ONE - s0).to_f64();
    } else {
        let single_after = coalesced_single_line(n, theta, t)?;
        let any_before = -(n as f64 * ln_q).exp_m1() * (-t).exp(); // (1 - (1-p)^n)e^{-t}
        probs[1] = single_before + single_after;
        probs[0] = 1.0 - any_before - single_after;
    }
    for pr in probs.iter_mut() {
        if *pr < 0.0 && *pr > -1e-13 {
            *pr = 0.0;
        }
    }
    Ok(LineDist { n, t, probs })
}

/// Classes of the `n → ∞` limit of `A_n(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitClass {
    Zero,
    One,
    AtLeastTwo,
}

/// `lim_{n→∞} P(A_n(t) ∈ class)`. Mass escapes to infinity: the limits of
/// the individual `P(A_n(t) = k)`, `k ≥ 2`, are all zero.
pub fn an_limit(theta: f64, t: f64, class: LimitClass) -> Result<f64> {
    check_theta(theta)?;
    if t.is_nan() || t <= 0.0 {
        return invalid(format!("limit law needs t > 0, got {t}"));
    }
    let one = if (1.0 - 0.5 * theta).abs() < 1e-8 {
        t * (-t).exp()
    } else {
        mutation_gap_weight(theta, t)
    };
    Ok(match class {
        LimitClass::One => one,
        LimitClass::AtLeastTwo => (-t).exp(),
        LimitClass::Zero => 1.0 - one - (-t).exp(),
    })
}

/// Spectral weights of the line-count chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCoeffs {
    pub n: u32,
    pub theta: f64,
    /// `λ_0..λ_n`.
    pub eigenvalues: Vec<f64>,
    /// `Q_n^{(k)}`, `k = 0..n`.
    pub left: Vec<f64>,
    /// `right[k][j] = P_j^{(k)}`.
    pub right: Vec<Vec<f64>>,
}

fn lambda(theta: f64, k: u32) -> f64 {
    match k {
        0 => 0.0,
        1 => 0.5 * theta,
        _ => 1.0 + 0.5 * k as f64 * theta,
    }
}

/// `Q_n^{(1)} = Σ_i C(n,i)(-1)^{i-1}/(1 + (i-1)θ/2)
///            = (2/θ) ∫_0^1 z^{2/θ-2}(1 - (1-z)^n) dz`.
fn q1_dd(n: u32, theta: f64) -> Result<Dd> {
    if n <= EXACT_SUM_MAX_N {
        let mut s = Dd::ZERO;
        for i in 1..=n {
            let c = dd(binomial(n as u64, i as u64)) / dd_denominator(theta, i);
            s = if i % 2 == 1 { s + c } else { s - c };
        }
        return Ok(s);
    }
    let a = 2.0 / theta;
    let nf = n as f64;
    let v = integrate(
        |z| z.powf(a - 2.0) * -(nf * (-z).ln_1p()).exp_m1(),
        0.0,
        1.0,
        &QuadSpec::default(),
    )?;
    Ok(dd(a * v))
}

/// `Q_n^{(k)}` for `k ≥ 2`.
fn qk_dd(n: u32, k: u32, theta: f64) -> Dd {
    let c = dd(binomial(n as u64, k as u64));
    let lam = Dd::ONE + Dd::product(k as f64, 0.5 * theta);
    let v = c * dd((k - 1) as f64) * lam / dd_denominator(theta, k);
    if k % 2 == 1 {
        v
    } else {
        -v
    }
}

/// `P_j^{(k)}`.
fn p_dd(k: u32, j: u32, theta: f64) -> Dd {
    match (k, j) {
        (0, 0) => Dd::ONE,
        (0, _) => Dd::ZERO,
        (1, 0) => -Dd::ONE,
        (1, 1) => Dd::ONE,
        (1, _) => Dd::ZERO,
        (_, 0) => -(dd(0.5 * theta) / (Dd::ONE + Dd::product(k as f64, 0.5 * theta))),
        (_, 1) => Dd::ONE,
        _ if j > k => Dd::ZERO,
        _ => {
            let c = dd(binomial(k as u64, j as u64));
            let v = c * dd_denominator(theta, k) / (dd((k - 1) as f64) * (Dd::ONE + Dd::product(k as f64, 0.5 * theta)));
            if j % 2 == 1 {
                v
            } else {
                -v
            }
        }
    }
}

pub fn spectral_coeffs(n: u32, theta: f64) -> Result<SpectralCoeffs> {
    check_n(n)?;
    check_theta(theta)?;
    let mut left = vec![1.0, q1_dd(n, theta)?.to_f64()];
    left.extend((2..=n).map(|k| qk_dd(n, k, theta).to_f64()));
    left.truncate(n as usize + 1);
    let right = (0..=n)
        .map(|k| (0..=n).map(|j| p_dd(k, j, theta).to_f64()).collect())
        .collect();
    Ok(SpectralCoeffs {
        n,
        theta,
        eigenvalues: (0..=n).map(|k| lambda(theta, k)).collect(),
        left,
        right,
    })
}

/// `P(A_n(t) = j) = Σ_k e^{-λ_k t} Q_n^{(k)} P_j^{(k)}`.
///
/// The terms grow like `C(n,j)(1 + p(t))^{n-j}` while the sum is at most 1;
/// reconstruction is done in double-double so that this stays accurate to
/// about `1e-15` for `n ≤ 30`.
pub fn an_distribution_spectral(n: u32, theta: f64, t: f64) -> Result<LineDist> {
    check_n(n)?;
    check_theta(theta)?;
    check_time(t)?;
    let q1 = q1_dd(n, theta)?;
    let decay: Vec<Dd> = (0..=n)
        .map(|k| match k {
            0 => Dd::ONE,
            1 => dd_decay(theta, t, 1, false),
            _ => dd_decay(theta, t, k, true),
        })
        .collect();
    let left: Vec<Dd> = (0..=n)
        .map(|k| match k {
            0 => Dd::ONE,
            1 => q1,
            _ => qk_dd(n, k, theta),
        })
        .collect();
    let probs = (0..=n)
        .map(|j| {
            let mut sum = Dd::ZERO;
            let mut largest: f64 = 0.0;
            for k in 0..=n {
                let term = decay[k as usize] * left[k as usize] * p_dd(k, j, theta);
                largest = largest.max(term.to_f64().abs());
                sum = sum + term;
            }
            // whatever survives below the cancellation floor is rounding
            let v = sum.to_f64();
            if v.abs() <= CANCELLATION_FLOOR * largest {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(LineDist { n, t, probs })
}

/// Relative accuracy of a double-double sum.
const CANCELLATION_FLOOR: f64 = 1e-28;

/// `E[T]` for the time `T` until no non-mutant line is left:
/// `(1 + 2/θ)(1 - n!/(1 + 2/θ)_{(n)})`.
pub fn mean_absorption_time(n: u32, theta: f64) -> Result<f64> {
    check_n(n)?;
    check_theta(theta)?;
    let a = 2.0 / theta;
    // in double-double so that the cancellation in 1 - prod costs nothing
    let prod = (1..=n).fold(Dd::ONE, |acc, i| acc * dd(i as f64) / (dd(a) + dd(i as f64)));
    Ok(((dd(1.0) + dd(a)) * (Dd::ONE - prod)).to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LineEvent {
    /// A non-mutant line mutates.
    Mutation,
    /// All lines merge (first ring of the rate-1 coalescence clock).
    Coalescence,
}

/// Total coalescence: when, and how many non-mutant lines merged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoalescenceRecord {
    pub time: f64,
    pub lines: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinePath {
    pub path: PathRecord<LineEvent, u32>,
    pub coalescence: Option<CoalescenceRecord>,
    pub absorption: Option<f64>,
}

impl LinePath {
    pub fn lines_at(&self, t: f64) -> u32 {
        *self.path.state_at(t)
    }
}

/// Simulate `A_n` from `n`. With a horizon the run stops there; without one
/// it runs until all lines have mutated and the coalescence has happened.
pub fn simulate_lines(n: u32, theta: f64, horizon: Option<f64>, rng: &mut RngStream) -> Result<LinePath> {
    check_n(n)?;
    check_theta(theta)?;
    if let Some(h) = horizon {
        check_time(h)?;
    }
    let stop = horizon.unwrap_or(f64::INFINITY);
    let half = 0.5 * theta;
    let mut path = PathRecord::new(n, stop);
    let mut coalescence = None;
    let mut absorption = None;
    let (mut now, mut state) = (0.0, n);
    loop {
        let mutation_rate = state as f64 * half;
        let clock_rate = if coalescence.is_none() { 1.0 } else { 0.0 };
        let total = mutation_rate + clock_rate;
        if total == 0.0 {
            break;
        }
        let wait = rng.exp(total);
        if now + wait > stop {
            break;
        }
        now += wait;
        if rng.uniform() * total < mutation_rate {
            state -= 1;
            path.push(now, LineEvent::Mutation, state);
            if state == 0 {
                absorption = Some(now);
            }
        } else {
            coalescence = Some(CoalescenceRecord { time: now, lines: state });
            state = state.min(1);
            path.push(now, LineEvent::Coalescence, state);
        }
    }
    Ok(LinePath {
        path,
        coalescence,
        absorption,
    })
}

/// Weight of one coalescent trajectory in the duality for `E_x[ξ(t)^n]`.
///
/// Lines that mutated are of type 1 with probability `p` each; surviving
/// lines reach the origin and are type 1 with probability `x`. If every
/// line mutated before the coalescence (`A(T) = 0`) the merged line carries
/// no extra mutation factor.
pub fn duality_weight(path: &LinePath, n: u32, x: f64, p: f64, t: f64) -> f64 {
    let a_t = path.lines_at(t);
    match path.coalescence {
        Some(c) if c.time <= t => {
            let mutated_before = n - c.lines;
            match (a_t, c.lines) {
                (1, _) => x * p.powi(mutated_before as i32),
                (_, 0) => p.powi(n as i32),
                _ => p.powi(mutated_before as i32 + 1),
            }
        }
        _ => x.powi(a_t as i32) * p.powi((n - a_t) as i32),
    }
}

/// Weight of a run to coalescence for the stationary moment `E[ξ^n]`.
pub fn coalescent_moment_weight(lines_at_coalescence: u32, n: u32, p: f64) -> f64 {
    if lines_at_coalescence == 0 {
        p.powi(n as i32)
    } else {
        p.powi((n + 1 - lines_at_coalescence) as i32)
    }
}

/// Analytic side and Monte Carlo side of the moment duality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityCheck {
    pub lhs: f64,
    pub rhs: McEstimate,
}

pub fn duality_check(params: &TwoTypeParams, n: u32, x: f64, t: f64, n_mc: u64, seed: u64) -> Result<DualityCheck> {
    check_n(n)?;
    check_frequency(x)?;
    check_time(t)?;
    let p = params.p();
    let mut raw = vec![0.0; n as usize + 1];
    raw[n as usize] = 1.0;
    let lhs = direct_expectation(params, &PolyRep::from_monomial(p, &raw), x, t)?;
    let theta = params.theta();
    let rhs = ensemble(n_mc, seed, 0, |rng| {
        let path = simulate_lines(n, theta, Some(t), rng).expect("validated arguments");
        duality_weight(&path, n, x, p, t)
    });
    Ok(DualityCheck { lhs, rhs })
}

/// Monte Carlo of `E[ξ^n]` from the number of non-mutant lines at the total
/// coalescence.
pub fn stationary_moment_via_coalescent(params: &TwoTypeParams, n: u32, n_mc: u64, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let theta = params.theta();
    let p = params.p();
    Ok(ensemble(n_mc, seed, 0, |rng| {
        let path = simulate_lines(n, theta, None, rng).expect("validated arguments");
        let lines = path.coalescence.map_or(0, |c| c.lines);
        coalescent_moment_weight(lines, n, p)
    }))
}

/// Monte Carlo of the absorption time mean.
pub fn absorption_time_estimate(n: u32, theta: f64, n_mc: u64, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    check_theta(theta)?;
    Ok(ensemble(n_mc, seed, 0, |rng| {
        simulate_lines(n, theta, None, rng)
            .expect("validated arguments")
            .absorption
            .expect("runs without horizon end absorbed")
    }))
}

/// Empirical `P(A_n(t) = j)`, `j = 0..=n`.
pub fn empirical_line_dist(n: u32, theta: f64, t: f64, n_mc: u64, seed: u64) -> Result<Vec<McEstimate>> {
    check_n(n)?;
    check_theta(theta)?;
    check_time(t)?;
    Ok(ensemble_vec(n_mc, seed, 0, n as usize + 1, |rng, out| {
        out.fill(0.0);
        let path = simulate_lines(n, theta, Some(t), rng).expect("validated arguments");
        out[path.lines_at(t) as usize] = 1.0;
    }))
}
