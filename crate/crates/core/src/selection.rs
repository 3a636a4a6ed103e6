//! Two-type star-shaped Fleming–Viot process with frequency-dependent
//! drift `v(x)`.
//!
//! Between replacements the type-1 frequency follows `χ' = v(χ)`; at rate 1
//! the population is replaced by all type 1 (probability = current
//! frequency) or all type 2. Observed at replacement epochs the type is a
//! two-state chain (the skeleton) whose transition probabilities are
//! `E[μ(T)]` and `E[ν(T)]`, where `μ`, `ν` are the flows from 1 and 0 and
//! `T ~ Exp(1)`.
//!
//! Also here: fixation probabilities under pure selection and the lineage
//! counting process `B_n` of the ancestral selection graph.

use crate::base::law::{MixedLaw, Piece, ScalarFn, Side};
use crate::base::mc::{ensemble, McEstimate, SHARDS};
use crate::base::params::{check_frequency, check_time};
use crate::base::quad::{integrate, QuadSpec};
use crate::base::{PathRecord, RngStream, TwoTypeParams};
use crate::error::{invalid, Error, Result};
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::sync::Arc;

/// Drift polynomial `v(x) = Σ c_k x^k` supplied by the user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomDrift {
    coeffs: Vec<f64>,
    lipschitz: f64,
}

impl CustomDrift {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("drift polynomial needs at least one finite coefficient");
        }
        let (v0, v1) = (coeffs[0], coeffs.iter().sum::<f64>());
        if v0 < 0.0 || v1 > 0.0 {
            // otherwise the flow leaves [0, 1]
            return invalid(format!("drift must satisfy v(0) >= 0 >= v(1), got v(0) = {v0}, v(1) = {v1}"));
        }
        // sup |v'| on [0, 1] is at most Σ k|c_k|
        let lipschitz = coeffs.iter().enumerate().map(|(k, c)| k as f64 * c.abs()).sum();
        Ok(Self { coeffs, lipschitz })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn velocity(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Mutation-selection parameters: `v(x) = ½(θp - θx) + ½βx(1-x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionParams {
    pub theta: f64,
    pub p: f64,
    pub beta: f64,
}

impl SelectionParams {
    pub fn new(theta: f64, p: f64, beta: f64) -> Result<Self> {
        TwoTypeParams::new(theta, p)?;
        check_beta(beta)?;
        Ok(Self { theta, p, beta })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return invalid(format!("beta must be finite and > 0 (swap the types for beta < 0), got {beta}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DriftSpec {
    /// `v(x) = (θ/2)(p - x)`.
    Neutral(TwoTypeParams),
    /// `v(x) = (β/2)x(1-x)`, no mutation.
    Logistic { beta: f64 },
    MutationSelection(SelectionParams),
    Custom(CustomDrift),
}

impl DriftSpec {
    pub fn neutral(theta: f64, p: f64) -> Result<Self> {
        Ok(Self::Neutral(TwoTypeParams::new(theta, p)?))
    }

    pub fn logistic(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::Logistic { beta })
    }

    pub fn mutation_selection(theta: f64, p: f64, beta: f64) -> Result<Self> {
        Ok(Self::MutationSelection(SelectionParams::new(theta, p, beta)?))
    }

    pub fn custom(coeffs: Vec<f64>) -> Result<Self> {
        Ok(Self::Custom(CustomDrift::new(coeffs)?))
    }

    pub fn velocity(&self, x: f64) -> f64 {
        match self {
            Self::Neutral(pr) => 0.5 * pr.theta() * (pr.p() - x),
            Self::Logistic { beta } => 0.5 * beta * x * (1.0 - x),
            Self::MutationSelection(s) => 0.5 * s.theta * (s.p - x) + 0.5 * s.beta * x * (1.0 - x),
            Self::Custom(c) => c.velocity(x),
        }
    }
}

/// Roots of `χ(1-χ) + φ(p-χ) = 0`, `φ = θ/β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub r1: f64,
    pub r2: f64,
}

impl RootPair {
    /// `(r1 - r2)/2`.
    pub fn a(&self) -> f64 {
        0.5 * (self.r1 - self.r2)
    }

    /// `(1 - r1)/(1 - r2)`.
    pub fn b(&self) -> f64 {
        (1.0 - self.r1) / (1.0 - self.r2)
    }

    /// `-r1/r2`.
    pub fn c(&self) -> f64 {
        -self.r1 / self.r2
    }
}

pub fn roots(theta: f64, beta: f64, p: f64) -> Result<RootPair> {
    let s = SelectionParams::new(theta, p, beta)?;
    Ok(roots_of(&s))
}

fn roots_of(s: &SelectionParams) -> RootPair {
    let phi = s.theta / s.beta;
    let m = 1.0 - phi;
    let disc = (m * m + 4.0 * phi * s.p).sqrt();
    // r1 r2 = -φp; take the root without cancellation first
    if m >= 0.0 {
        let r1 = 0.5 * (m + disc);
        RootPair { r1, r2: -phi * s.p / r1 }
    } else {
        let r2 = 0.5 * (m - disc);
        RootPair { r1: -phi * s.p / r2, r2 }
    }
}

/// `χ(1-χ) + φ(p-χ)` at `χ`.
pub fn root_residual(theta: f64, beta: f64, p: f64, chi: f64) -> f64 {
    let phi = theta / beta;
    chi * (1.0 - chi) + phi * (p - chi)
}

/// Rate `κ = β(r1 - r2)/2` at which the mutation-selection flow contracts.
fn contraction(s: &SelectionParams, r: &RootPair) -> f64 {
    0.5 * s.beta * (r.r1 - r.r2)
}

/// Closed-form mutation-selection flow.
fn mutsel_flow(s: &SelectionParams, x: f64, t: f64) -> f64 {
    let r = roots_of(s);
    let c = (r.r1 - x) / (x - r.r2) * (-contraction(s, &r) * t).exp();
    r.r1 - (r.r1 - r.r2) * c / (1.0 + c)
}

fn logistic_flow(beta: f64, x: f64, t: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x / ((1.0 - x) * (-0.5 * beta * t).exp() + x)
}

/// Solution of `χ' = v(χ)` at time `t` from `chi0`.
pub fn flow(drift: &DriftSpec, chi0: f64, t: f64) -> Result<f64> {
    check_frequency(chi0)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(chi0);
    }
    Ok(match drift {
        DriftSpec::Neutral(pr) => pr.p() + (chi0 - pr.p()) * pr.no_mutation(t),
        DriftSpec::Logistic { beta } => logistic_flow(*beta, chi0, t),
        DriftSpec::MutationSelection(s) => mutsel_flow(s, chi0, t),
        DriftSpec::Custom(c) => ode_flow(c, chi0, t, false)?.0,
    })
}

/// `(μ(t), ν(t))` from the replacement-chain expressions
/// `μ = r1 + (r1-r2) b e/(1 - b e)`, `ν = r1 - (r1-r2) c e/(1 + c e)`,
/// `e = e^{-κt}`.
pub fn mu_nu(s: &SelectionParams, t: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    let r = roots_of(s);
    let e = (-contraction(s, &r) * t).exp();
    let (b, c) = (r.b(), r.c());
    let d = r.r1 - r.r2;
    Ok((r.r1 + d * b * e / (1.0 - b * e), r.r1 - d * c * e / (1.0 + c * e)))
}

// Dormand–Prince 5(4) on the pair (χ, ∫ e^{-s} χ(s) ds).
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const ODE_ATOL: f64 = 1e-14;
const ODE_RTOL: f64 = 1e-12;
const ODE_MAX_STEPS: usize = 2_000_000;
const DOMAIN_SLACK: f64 = 1e-9;

/// Integrate the custom flow to `t`. With `weighted` the second component
/// accumulates `∫_0^t e^{-s} χ(s) ds`.
fn ode_flow(c: &CustomDrift, chi0: f64, t: f64, weighted: bool) -> Result<(f64, f64)> {
    let f = |s: f64, y: [f64; 2]| [c.velocity(y[0]), if weighted { (-s).exp() * y[0] } else { 0.0 }];
    let h_max = if c.lipschitz() > 0.0 { 1.0 / c.lipschitz() } else { f64::INFINITY }.min(t.max(1e-300));
    let mut h = (0.1 * h_max).min(t);
    let (mut s, mut y) = (0.0, [chi0, 0.0]);
    let mut steps = 0;
    while s < t {
        if steps >= ODE_MAX_STEPS {
            return Err(Error::NonConvergence(format!("flow integration exceeded {ODE_MAX_STEPS} steps")));
        }
        steps += 1;
        let last = s + h >= t;
        let h_try = if last { t - s } else { h };
        let mut k = [[0.0; 2]; 7];
        for i in 0..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                yi[0] += h_try * DP_A[i][j] * kj[0];
                yi[1] += h_try * DP_A[i][j] * kj[1];
            }
            k[i] = f(s + DP_C[i] * h_try, yi);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for comp in 0..2 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for i in 0..7 {
                d5 += DP_B[i] * k[i][comp];
                d4 += DP_B4[i] * k[i][comp];
            }
            y5[comp] += h_try * d5;
            let scale = ODE_ATOL + ODE_RTOL * y[comp].abs().max(y5[comp].abs());
            err = err.max((h_try * (d5 - d4)).abs() / scale);
        }
        if err <= 1.0 {
            s = if last { t } else { s + h_try };
            y = y5;
            if !(y[0] >= -DOMAIN_SLACK && y[0] <= 1.0 + DOMAIN_SLACK) || !y[0].is_finite() {
                return Err(Error::DomainEscape { time: s, value: y[0] });
            }
        }
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_try * grow).min(h_max);
        if h < 1e-300 {
            return Err(Error::NonConvergence("flow step size underflow".into()));
        }
    }
    Ok((y[0].clamp(0.0, 1.0), y[1]))
}

/// How a skeleton entry was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SkeletonMethod {
    ClosedForm,
    Series,
    Quadrature,
    Ode,
}

/// Replacement-type chain `[[p11, 1-p11], [p21, 1-p21]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Skeleton {
    pub p11: f64,
    pub p21: f64,
    pub method11: SkeletonMethod,
    pub method21: SkeletonMethod,
}

impl Skeleton {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.p11, 1.0 - self.p11], [self.p21, 1.0 - self.p21]]
    }
}

/// Series argument above which the quadrature path is used.
pub const SERIES_SWITCH: f64 = 0.9;
const SERIES_MAX_TERMS: usize = 100_000;

/// `E[μ(T)] = r1 + (2/β) Σ_k b^{k+1}/(1/κ + k + 1)`; `None` when `b` is
/// above the switch.
pub fn skeleton_p11_series(s: &SelectionParams) -> Option<f64> {
    let r = roots_of(s);
    let b = r.b();
    if b > SERIES_SWITCH {
        return None;
    }
    let s0 = 1.0 / contraction(s, &r);
    let mut sum = 0.0;
    let mut pow = b;
    for k in 0..SERIES_MAX_TERMS {
        let term = pow / (s0 + k as f64 + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        pow *= b;
    }
    Some(r.r1 + 2.0 / s.beta * sum)
}

/// `E[ν(T)] = r1 - (2/β) c^{-1/κ} Σ_k (1/κ + 1)_{(k)}/k! y^{1/κ+k+1}/(1/κ+k+1)`,
/// `y = c/(1+c)`; `None` when `y` is above the switch.
pub fn skeleton_p21_series(s: &SelectionParams) -> Option<f64> {
    let r = roots_of(s);
    let c = r.c();
    let y = c / (1.0 + c);
    if y > SERIES_SWITCH {
        return None;
    }
    let s0 = 1.0 / contraction(s, &r);
    // c^{-s0} y^{s0} = (1 + c)^{-s0}
    let lead = (-s0 * c.ln_1p()).exp();
    let mut sum = 0.0;
    let mut coef = y; // (s0+1)_(k)/k! y^{k+1}
    for k in 0..SERIES_MAX_TERMS {
        let term = coef / (s0 + k as f64 + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        coef *= (s0 + 1.0 + k as f64) / (k as f64 + 1.0) * y;
    }
    Some(r.r1 - 2.0 / s.beta * lead * sum)
}

/// `E[χ(T)] = ∫_0^1 χ(-ln u) du` for the closed-form flow from `chi0`.
fn expected_flow_quadrature(drift: &DriftSpec, chi0: f64) -> Result<f64> {
    let spec = QuadSpec::default().with_tolerance(1e-14, 1e-12);
    let failure = std::cell::RefCell::new(None);
    let v = integrate(
        |u| match flow(drift, chi0, -u.ln()) {
            Ok(x) => x,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        &spec,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    v
}

/// Both skeleton entries by quadrature of the closed-form flows.
pub fn skeleton_quadrature(s: &SelectionParams) -> Result<(f64, f64)> {
    let d = DriftSpec::MutationSelection(*s);
    Ok((expected_flow_quadrature(&d, 1.0)?, expected_flow_quadrature(&d, 0.0)?))
}

/// Horizon for the augmented ODE; `e^{-40}` is below `5e-18`.
const ODE_HORIZON: f64 = 40.0;

fn expected_flow_ode(c: &CustomDrift, chi0: f64) -> Result<f64> {
    let (end, acc) = ode_flow(c, chi0, ODE_HORIZON, true)?;
    Ok(acc + (-ODE_HORIZON).exp() * end)
}

pub fn skeleton_matrix(drift: &DriftSpec) -> Result<Skeleton> {
    use SkeletonMethod::*;
    Ok(match drift {
        DriftSpec::Neutral(pr) => {
            let h = 0.5 * pr.theta();
            Skeleton {
                p11: pr.p() + (1.0 - pr.p()) / (1.0 + h),
                p21: pr.p() * h / (1.0 + h),
                method11: ClosedForm,
                method21: ClosedForm,
            }
        }
        DriftSpec::Logistic { .. } => Skeleton {
            p11: 1.0,
            p21: 0.0,
            method11: ClosedForm,
            method21: ClosedForm,
        },
        DriftSpec::MutationSelection(s) => {
            let (p11, method11) = match skeleton_p11_series(s) {
                Some(v) => (v, Series),
                None => (expected_flow_quadrature(drift, 1.0)?, Quadrature),
            };
            let (p21, method21) = match skeleton_p21_series(s) {
                Some(v) => (v, Series),
                None => (expected_flow_quadrature(drift, 0.0)?, Quadrature),
            };
            Skeleton {
                p11,
                p21,
                method11,
                method21,
            }
        }
        DriftSpec::Custom(c) => Skeleton {
            p11: expected_flow_ode(c, 1.0)?,
            p21: expected_flow_ode(c, 0.0)?,
            method11: Ode,
            method21: Ode,
        },
    })
}

/// Stationary distribution `(π1, π2)` of the replacement type.
pub fn replacement_stationary(drift: &DriftSpec) -> Result<(f64, f64)> {
    let sk = skeleton_matrix(drift)?;
    let into_one = sk.p21;
    let out_of_one = 1.0 - sk.p11;
    let total = into_one + out_of_one;
    if !(total > 1e-14) {
        return Err(Error::NoStationaryDistribution(
            "both replacement types are absorbing (no mutation)".into(),
        ));
    }
    let pi1 = into_one / total;
    Ok((pi1, out_of_one / total))
}

/// Where the two flows meet: `p`, `r1`, or the root of a custom drift.
fn equilibrium(drift: &DriftSpec) -> Result<f64> {
    match drift {
        DriftSpec::Neutral(pr) => Ok(pr.p()),
        DriftSpec::Logistic { .. } => Err(Error::NoStationaryDistribution(
            "pure selection fixes one type".into(),
        )),
        DriftSpec::MutationSelection(s) => Ok(roots_of(s).r1),
        DriftSpec::Custom(c) => custom_equilibrium(c),
    }
}

/// The single interior root of a custom drift with `v(0) > 0 > v(1)`;
/// drifts with several sign changes make the flows non-monotone on their
/// range and are rejected.
fn custom_equilibrium(c: &CustomDrift) -> Result<f64> {
    if !(c.velocity(0.0) > 0.0 && c.velocity(1.0) < 0.0) {
        return invalid("stationary density needs v(0) > 0 > v(1)");
    }
    const GRID: usize = 4096;
    let mut bracket = None;
    let mut prev = c.velocity(0.0);
    for i in 1..=GRID {
        let x = i as f64 / GRID as f64;
        let v = c.velocity(x);
        if v == 0.0 && i < GRID {
            // a double root would stop the flow: treat as a sign change check
            let after = c.velocity(x + 0.5 / GRID as f64);
            if after > 0.0 {
                return invalid("drift touches zero without changing sign");
            }
        }
        if (prev > 0.0) != (v > 0.0) {
            if bracket.is_some() {
                return invalid("drift changes sign more than once in (0, 1)");
            }
            bracket = Some(((i - 1) as f64 / GRID as f64, x));
        }
        prev = v;
    }
    let (mut lo, mut hi) = bracket.expect("v(0) > 0 > v(1) forces a sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if c.velocity(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn lenient(r: Result<f64>) -> f64 {
    match r {
        Ok(v) => v,
        Err(Error::QuadratureFailure { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

/// Stationary law of `ξ`: the law of `μ(τ)` with probability `π1` and of
/// `ν(τ)` with probability `π2`, `τ ~ Exp(1)`. Each branch is a piece
/// measured from the equilibrium the flows approach; its cumulative mass
/// near the equilibrium is `π e^{-τ(ξ)}`.
pub fn stationary_law(drift: &DriftSpec) -> Result<MixedLaw> {
    let (pi1, pi2) = replacement_stationary(drift)?;
    match drift {
        DriftSpec::Neutral(pr) => crate::twotype::stationary_law(pr),
        DriftSpec::Logistic { .. } => Err(Error::NoStationaryDistribution("pure selection".into())),
        DriftSpec::MutationSelection(s) => {
            let r = roots_of(s);
            let inv_k = 1.0 / contraction(s, &r);
            let two_b = 2.0 / s.beta;
            let (r1, r2) = (r.r1, r.r2);
            // R = |ξ - r1|/(ξ - r2) · (χ0 - r2)/|r1 - χ0|
            let up_scale = (1.0 - r2) / (1.0 - r1);
            let lo_scale = -r2 / r1;
            let up_cdf = move |h: f64| pi1 * (h / (r1 + h - r2) * up_scale).powf(inv_k);
            let lo_cdf = move |h: f64| pi2 * (h / (r1 - h - r2) * lo_scale).powf(inv_k);
            let up_den: ScalarFn = Arc::new(move |h: f64| two_b * up_cdf(h) / ((r1 + h - r2) * h));
            let lo_den: ScalarFn = Arc::new(move |h: f64| two_b * lo_cdf(h) / ((r1 - h - r2) * h));
            let upper = Piece::new(r1, Side::Above, 0.0, 1.0 - r1, pi1, up_den)?.with_cdf(Arc::new(up_cdf));
            let lower = Piece::new(r1, Side::Below, 0.0, r1, pi2, lo_den)?.with_cdf(Arc::new(lo_cdf));
            MixedLaw::new(Vec::new(), vec![upper, lower])
        }
        DriftSpec::Custom(c) => {
            let rs = custom_equilibrium(c)?;
            let spec = QuadSpec::default().with_tolerance(1e-14, 1e-11);
            let (c1, c2) = (c.clone(), c.clone());
            // time for μ to fall from 1 to ξ, and for ν to rise from 0 to ξ
            let tau_up = move |xi: f64| lenient(integrate(|z| -1.0 / c1.velocity(z), xi, 1.0, &spec));
            let tau_lo = move |xi: f64| lenient(integrate(|z| 1.0 / c2.velocity(z), 0.0, xi, &spec));
            let (tu, tl) = (tau_up.clone(), tau_lo.clone());
            let (c3, c4) = (c.clone(), c.clone());
            let up_den: ScalarFn = Arc::new(move |h: f64| pi1 * (-tu(rs + h)).exp() / c3.velocity(rs + h).abs());
            let lo_den: ScalarFn = Arc::new(move |h: f64| pi2 * (-tl(rs - h)).exp() / c4.velocity(rs - h).abs());
            let up_cdf: ScalarFn = Arc::new(move |h: f64| pi1 * (-tau_up(rs + h)).exp());
            let lo_cdf: ScalarFn = Arc::new(move |h: f64| pi2 * (-tau_lo(rs - h)).exp());
            let upper = Piece::new(rs, Side::Above, 0.0, 1.0 - rs, pi1, up_den)?.with_cdf(up_cdf);
            let lower = Piece::new(rs, Side::Below, 0.0, rs, pi2, lo_den)?.with_cdf(lo_cdf);
            MixedLaw::new(Vec::new(), vec![upper, lower])
        }
    }
}

/// Stationary density at `ξ`, zero at the equilibrium itself.
pub fn stationary_density(drift: &DriftSpec, xi: f64) -> Result<f64> {
    check_frequency(xi)?;
    if let DriftSpec::Neutral(pr) = drift {
        // π1 e^{-μ^{-1}(ξ)}/|v(ξ)| with μ(τ) = p + (1-p)e^{-θτ/2}, and the
        // same for ν
        let p = pr.p();
        let a = pr.shape();
        let v = drift.velocity(xi).abs();
        return Ok(if xi > p {
            p * ((xi - p) / (1.0 - p)).powf(a) / v
        } else if xi < p {
            (1.0 - p) * ((p - xi) / p).powf(a) / v
        } else {
            0.0
        });
    }
    let law = stationary_law(drift)?;
    let _ = equilibrium(drift)?;
    Ok(law.density(xi))
}

/// Pick the replacement type by `π`, then return its flow at `τ ~ Exp(1)`.
pub fn stationary_sample(drift: &DriftSpec, pi1: f64, rng: &mut RngStream) -> Result<f64> {
    let start = if rng.bernoulli(pi1) { 1.0 } else { 0.0 };
    flow(drift, start, rng.exp1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FixedType {
    One,
    Two,
}

/// Fixation probability under pure selection `v(x) = (β/2)x(1-x)`, as a
/// function of the initial frequency `x` of the type asked about:
/// `P1(x) = (2/β)x ∫ z^{2/β-1}/(1 - (1-x)(1-z)) dz`,
/// `P2(y) = 1 - (2/β)(1-y) ∫ z^{2/β-1}/(1 - y(1-z)) dz`.
pub fn fixation_prob(beta: f64, x: f64, which: FixedType) -> Result<f64> {
    check_beta(beta)?;
    check_frequency(x)?;
    let a = 2.0 / beta;
    let spec = QuadSpec::default().with_tolerance(1e-15, 1e-13);
    match which {
        FixedType::One => {
            if x == 0.0 {
                return Ok(0.0);
            }
            let i = integrate(|z| z.powf(a - 1.0) / (x + z * (1.0 - x)), 0.0, 1.0, &spec)?;
            Ok((a * x * i).min(1.0))
        }
        FixedType::Two => {
            let y = x;
            if y == 1.0 {
                return Ok(1.0);
            }
            let i = integrate(|z| z.powf(a - 1.0) / ((1.0 - y) + y * z), 0.0, 1.0, &spec)?;
            Ok((1.0 - a * (1.0 - y) * i).max(0.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AsgEvent {
    /// One lineage branches (`i → i + 1`), or a batch of branchings when the
    /// count is large (see [`asg_simulate`]).
    Branching,
    /// All lineages collapse to one.
    Collapse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsgPath {
    pub path: PathRecord<AsgEvent, u64>,
    /// First time the count is 1.
    pub ultimate_ancestor: Option<f64>,
}

/// Lineage count above which the branching between two collapses is drawn
/// in one step.
pub const ASG_BATCH_THRESHOLD: u64 = 1 << 16;
/// Single-step simulation gives up above this many lineages.
pub const ASG_LINEAGE_CAP: u64 = 10_000_000;
/// Counts are kept exact in `f64` arithmetic up to here.
const ASG_COUNT_LIMIT: f64 = 9.0e15;

/// Yule growth over `s` from `i` lineages at rate `λ` each:
/// `i + NB(i, e^{-λs})`, drawn as a gamma–Poisson mixture.
fn yule_advance(i: u64, lambda: f64, s: f64, rng: &mut RngStream) -> Result<u64> {
    let q = (-lambda * s).exp();
    let odds = -(-lambda * s).exp_m1() / q;
    if !(odds > 0.0) {
        return Ok(i);
    }
    let g = Gamma::new(i as f64, odds).map_err(|e| Error::SimulationAbort(format!("gamma draw: {e}")))?.sample(rng);
    if !(g < ASG_COUNT_LIMIT) {
        return Err(Error::SimulationAbort(format!("lineage count beyond {ASG_COUNT_LIMIT:e}")));
    }
    let extra = if g > 0.0 {
        Poisson::new(g).map_err(|e| Error::SimulationAbort(format!("poisson draw: {e}")))?.sample(rng)
    } else {
        0.0
    };
    let total = i as f64 + extra;
    if !(total < ASG_COUNT_LIMIT) {
        return Err(Error::SimulationAbort(format!("lineage count beyond {ASG_COUNT_LIMIT:e}")));
    }
    Ok(total as u64)
}

/// Simulate the lineage count `B_n`: from `i` lineages, branching at rate
/// `iβ/2` and collapse to 1 at rate 1.
///
/// Without a horizon the run stops at the ultimate ancestor (`B = 1`).
/// Once the count reaches [`ASG_BATCH_THRESHOLD`], the branchings up to the
/// next collapse (or the horizon) are drawn together from the exact Yule
/// law and recorded as one `Branching` event at the end of that stretch.
pub fn asg_simulate(n: u64, beta: f64, horizon: Option<f64>, rng: &mut RngStream) -> Result<AsgPath> {
    check_beta(beta)?;
    if n == 0 {
        return invalid("lineage count n must be >= 1");
    }
    if let Some(h) = horizon {
        check_time(h)?;
    }
    let stop = horizon.unwrap_or(f64::INFINITY);
    let half = 0.5 * beta;
    let mut path = PathRecord::new(n, stop);
    let mut ua = if n == 1 { Some(0.0) } else { None };
    let (mut now, mut state) = (0.0, n);
    if horizon.is_none() && n == 1 {
        return Ok(AsgPath {
            path,
            ultimate_ancestor: ua,
        });
    }
    loop {
        if state >= ASG_BATCH_THRESHOLD {
            let to_collapse = rng.exp1();
            let span = to_collapse.min(stop - now);
            state = yule_advance(state, half, span, rng)?;
            if now + to_collapse > stop {
                path.push(stop, AsgEvent::Branching, state);
                break;
            }
            now += to_collapse;
            path.push(now, AsgEvent::Branching, state);
            state = 1;
            path.push(now, AsgEvent::Collapse, state);
            ua.get_or_insert(now);
            if horizon.is_none() {
                break;
            }
            continue;
        }
        let branch_rate = state as f64 * half;
        let total = 1.0 + branch_rate;
        let wait = rng.exp(total);
        if now + wait > stop {
            break;
        }
        now += wait;
        if rng.uniform() * total < branch_rate {
            state += 1;
            if state > ASG_LINEAGE_CAP {
                return Err(Error::SimulationAbort(format!("more than {ASG_LINEAGE_CAP} lineages")));
            }
            path.push(now, AsgEvent::Branching, state);
        } else {
            state = 1;
            path.push(now, AsgEvent::Collapse, state);
            ua.get_or_insert(now);
            if horizon.is_none() {
                break;
            }
        }
    }
    Ok(AsgPath {
        path,
        ultimate_ancestor: ua,
    })
}

/// Stationary law of `B`: `π_i = (2/β)(i-1)!/(2/β + 1)_{(i)}`.
pub fn asg_stationary(beta: f64, i: u64) -> Result<f64> {
    check_beta(beta)?;
    if i == 0 {
        return invalid("lineage count must be >= 1");
    }
    let a = 2.0 / beta;
    if i <= 1000 {
        let mut v = a / (a + i as f64);
        for k in 1..i {
            v *= k as f64 / (a + k as f64);
        }
        Ok(v)
    } else {
        let i = i as f64;
        Ok((a.ln() + ln_gamma(i) + ln_gamma(a + 1.0) - ln_gamma(a + 1.0 + i)).exp())
    }
}

/// `Σ_{i > n} π_i = (2/β) B(n + 1, 2/β)`.
pub fn asg_stationary_tail(beta: f64, n: u64) -> Result<f64> {
    check_beta(beta)?;
    let a = 2.0 / beta;
    let n = n as f64;
    Ok((a.ln() + ln_gamma(n + 1.0) + ln_gamma(a) - ln_gamma(n + 1.0 + a)).exp())
}

/// Both sides of `E_x[ξ(t)^n] = E_n[x^{B_n(t)}]`, each by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionDualityCheck {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
}

impl SelectionDualityCheck {
    /// `|lhs - rhs|` in units of `se_lhs + se_rhs`.
    pub fn joint_z(&self) -> f64 {
        let d = (self.lhs.mean - self.rhs.mean).abs();
        let se = self.lhs.std_error + self.rhs.std_error;
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Forward frequency at `t` under the drift `-(β/2)x(1-x)`: the type-2
/// frequency follows the logistic flow with `+β`.
fn negative_selection_endpoint(beta: f64, x: f64, t: f64, rng: &mut RngStream) -> f64 {
    let (mut now, mut freq) = (0.0, x);
    loop {
        let wait = rng.exp1();
        if now + wait > t {
            return 1.0 - logistic_flow(beta, 1.0 - freq, t - now);
        }
        now += wait;
        let before = 1.0 - logistic_flow(beta, 1.0 - freq, wait);
        freq = if rng.bernoulli(before) { 1.0 } else { 0.0 };
    }
}

pub fn selection_duality_check(n: u32, x: f64, t: f64, beta: f64, n_mc: u64, seed: u64) -> Result<SelectionDualityCheck> {
    check_beta(beta)?;
    check_frequency(x)?;
    check_time(t)?;
    if n == 0 {
        return invalid("n must be >= 1");
    }
    let lhs = ensemble(n_mc, seed, 0, |rng| negative_selection_endpoint(beta, x, t, rng).powi(n as i32));
    let mut failure = std::sync::Mutex::new(None);
    let rhs = ensemble(n_mc, seed, SHARDS, |rng| match asg_simulate(n as u64, beta, Some(t), rng) {
        Ok(p) => {
            let b = *p.path.state_at(t);
            x.powf(b as f64)
        }
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = failure.get_mut().expect("poisoned").take() {
        return Err(e);
    }
    Ok(SelectionDualityCheck { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms() -> SelectionParams {
        SelectionParams::new(1.0, 0.5, 2.0).unwrap()
    }

    #[test]
    fn root_example_and_residual() {
        let r = roots(1.0, 2.0, 0.5).unwrap();
        assert!((r.r1 - (1.0 + 5f64.sqrt()) / 4.0).abs() < 1e-15);
        assert!((r.r2 - (1.0 - 5f64.sqrt()) / 4.0).abs() < 1e-15);
        let small = roots(1.0, 1e-9, 0.3).unwrap();
        assert!((small.r1 - 0.3).abs() < 1e-8);
        for &(th, be, p) in &[(0.1, 30.0, 0.01), (7.0, 0.01, 0.99), (2.0, 2.0, 0.5)] {
            let r = roots(th, be, p).unwrap();
            assert!(root_residual(th, be, p, r.r1).abs() < 1e-12);
            assert!(root_residual(th, be, p, r.r2).abs() < 1e-12 * r.r2.abs().max(1.0).powi(2));
            assert!(r.r2 < 0.0 && r.r1 > 0.0 && r.r1 < 1.0);
        }
    }

    #[test]
    fn flows_fixed_points_and_mu_nu() {
        let s = ms();
        let d = DriftSpec::MutationSelection(s);
        let r1 = roots_of(&s).r1;
        assert!((flow(&d, r1, 3.0).unwrap() - r1).abs() < 1e-15);
        assert_eq!(flow(&d, 0.3, 0.0).unwrap(), 0.3);
        assert_eq!(mu_nu(&s, 0.0).unwrap(), (1.0, 0.0));
        for &t in &[0.01, 0.5, 3.0, 30.0] {
            let (m, n) = mu_nu(&s, t).unwrap();
            assert!((m - flow(&d, 1.0, t).unwrap()).abs() < 1e-12);
            assert!((n - flow(&d, 0.0, t).unwrap()).abs() < 1e-12);
        }
        let l = DriftSpec::logistic(2.0).unwrap();
        assert_eq!(flow(&l, 0.0, 5.0).unwrap(), 0.0);
        assert!((flow(&l, 0.5, 2.0).unwrap() - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn custom_flow_matches_closed_form() {
        let s = ms();
        // ½θp + ½(β - θ)x - ½βx²
        let c = DriftSpec::custom(vec![0.25, 0.5, -1.0]).unwrap();
        let d = DriftSpec::MutationSelection(s);
        for i in 0..=20 {
            let t = i as f64 * 0.5;
            for &x in &[0.0, 0.4, 1.0] {
                let a = flow(&c, x, t).unwrap();
                let b = flow(&d, x, t).unwrap();
                assert!((a - b).abs() < 1e-9, "t={t} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn drifts_that_leave_the_interval_are_rejected() {
        assert!(matches!(DriftSpec::custom(vec![1.0]), Err(Error::InvalidArgument(_))));
        assert!(DriftSpec::custom(vec![-0.1, 1.0, -1.0]).is_err());
        assert!(DriftSpec::custom(vec![0.0]).is_ok());
    }

    #[test]
    fn skeleton_series_vs_quadrature() {
        let s = ms();
        let (q11, q21) = skeleton_quadrature(&s).unwrap();
        let p11 = skeleton_p11_series(&s).unwrap();
        let p21 = skeleton_p21_series(&s).unwrap();
        assert!((p11 - q11).abs() < 1e-10, "{p11} vs {q11}");
        assert!((p21 - q21).abs() < 1e-10, "{p21} vs {q21}");
    }

    #[test]
    fn neutral_skeleton_and_stationary() {
        let d = DriftSpec::neutral(1.0, 0.3).unwrap();
        let sk = skeleton_matrix(&d).unwrap();
        assert!((sk.p11 - (0.3 + 0.7 / 1.5)).abs() < 1e-15);
        let (pi1, pi2) = replacement_stationary(&d).unwrap();
        assert!((pi1 - 0.3).abs() < 1e-15 && (pi2 - 0.7).abs() < 1e-15);
        let pr = TwoTypeParams::new(1.0, 0.3).unwrap();
        for &xi in &[0.01, 0.2, 0.31, 0.9, 1.0] {
            let a = stationary_density(&d, xi).unwrap();
            let b = crate::twotype::stationary_density(&pr, xi).unwrap();
            assert!((a - b).abs() < 1e-13 * b.max(1.0));
        }
    }

    #[test]
    fn pure_selection_has_no_stationary_law() {
        let d = DriftSpec::logistic(1.0).unwrap();
        assert!(matches!(replacement_stationary(&d), Err(Error::NoStationaryDistribution(_))));
    }

    #[test]
    fn mutsel_stationary_integrates() {
        let d = DriftSpec::MutationSelection(ms());
        let law = stationary_law(&d).unwrap();
        let spec = QuadSpec::default();
        assert!((law.integrated_mass(&spec).unwrap() - 1.0).abs() < 1e-10);
        let (pi1, _) = replacement_stationary(&d).unwrap();
        assert!((law.mean(&spec).unwrap() - pi1).abs() < 1e-10);
    }

    #[test]
    fn fixation_examples() {
        assert!((fixation_prob(2.0, 0.5, FixedType::One).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(fixation_prob(2.0, 0.0, FixedType::One).unwrap(), 0.0);
        assert!((fixation_prob(2.0, 1.0, FixedType::One).unwrap() - 1.0).abs() < 1e-13);
        for &x in &[0.1, 0.37, 0.8] {
            let s = fixation_prob(0.7, x, FixedType::One).unwrap() + fixation_prob(0.7, 1.0 - x, FixedType::Two).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(fixation_prob(-1.0, 0.5, FixedType::One).is_err());
    }

    #[test]
    fn asg_stationary_values() {
        for i in 1..=20u64 {
            let v = asg_stationary(2.0, i).unwrap();
            assert!((v - 1.0 / (i * (i + 1)) as f64).abs() < 1e-16);
        }
        let partial: f64 = (1..=500).map(|i| asg_stationary(0.7, i).unwrap()).sum();
        assert!((partial + asg_stationary_tail(0.7, 500).unwrap() - 1.0).abs() < 1e-12);
        let big = asg_stationary(0.7, 5000).unwrap();
        let a: f64 = 2.0 / 0.7;
        let prod: f64 = (1..5000).map(|k| k as f64 / (a + k as f64)).product::<f64>() * a / (a + 5000.0);
        assert!((big - prod).abs() < 1e-12 * prod);
    }

    #[test]
    fn asg_single_lineage() {
        let mut rng = RngStream::new(1, 0);
        let p = asg_simulate(1, 2.0, None, &mut rng).unwrap();
        assert_eq!(p.ultimate_ancestor, Some(0.0));
        assert!(p.path.events.is_empty());
    }

    #[test]
    fn yule_batch_mean() {
        // E[B(s)] = i e^{λs}
        let mut rng = RngStream::new(4, 0);
        let (i, lam, s) = (100_000u64, 1.0, 0.7);
        let m = 2000;
        let mean: f64 = (0..m).map(|_| yule_advance(i, lam, s, &mut rng).unwrap() as f64).sum::<f64>() / m as f64;
        let exact = i as f64 * (lam * s).exp();
        // sd of one draw ≈ sqrt(i e^{λs}(e^{λs}-1))
        let sd = (i as f64 * (lam * s).exp() * (lam * s).exp_m1()).sqrt() / (m as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * sd);
    }
}
