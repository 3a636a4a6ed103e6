use crate::error::{invalid, Result};
use serde::Serialize;

/// Two-type model parameters: total mutation rate `theta` and the
/// type-1 mutation bias `p = theta_1 / theta`.
///
/// A single line mutates at rate `theta / 2`; the new type is 1 with
/// probability `p`. Boundary values `p ∈ {0, 1}` and `theta = 0` are
/// rejected, limits must be taken explicitly by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoTypeParams {
    theta: f64,
    p: f64,
}

impl TwoTypeParams {
    pub fn new(theta: f64, p: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return invalid(format!("theta must be finite and > 0, got {theta}"));
        }
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("p must lie in (0, 1), got {p}"));
        }
        Ok(Self { theta, p })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Mutation rate towards type 1.
    pub fn theta1(&self) -> f64 {
        self.theta * self.p
    }

    /// Mutation rate towards type 2.
    pub fn theta2(&self) -> f64 {
        self.theta * (1.0 - self.p)
    }

    /// Per-line probability of no mutation over a horizon `t`, `e^{-θt/2}`.
    pub fn no_mutation(&self, t: f64) -> f64 {
        (-0.5 * self.theta * t).exp()
    }

    /// `2 / θ`, the shape of the `η` variable in the stationary representation.
    pub fn shape(&self) -> f64 {
        2.0 / self.theta
    }
}

pub(crate) fn check_frequency(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("frequency must lie in [0, 1], got {x}"));
    }
    Ok(())
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return invalid(format!("time must be >= 0, got {t}"));
    }
    Ok(())
}

/// `(e^{-θt/2} - e^{-t}) / (1 - θ/2)`, evaluated without cancellation.
///
/// At `θ = 2` the removable singularity gives `t e^{-t}`. This quantity is
/// the mass shift between the two continuous pieces of the transition law
/// and also the `n → ∞` limit of `P(A_n(t) = 1)`.
pub fn mutation_gap_weight(theta: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let delta = 1.0 - 0.5 * theta;
    let z = delta * t;
    // e^{-t} (e^{z} - 1) / delta = t e^{-t} * expm1(z) / z
    let ratio = if z.abs() < 1e-300 { 1.0 } else { z.exp_m1() / z };
    let value = t * (-t).exp() * ratio;
    if value.is_finite() {
        value
    } else {
        // e^{-t} underflow against a huge expm1: fall back to the direct form
        ((-0.5 * theta * t).exp() - (-t).exp()) / delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_boundaries() {
        assert!(TwoTypeParams::new(0.0, 0.5).is_err());
        assert!(TwoTypeParams::new(1.0, 0.0).is_err());
        assert!(TwoTypeParams::new(1.0, 1.0).is_err());
        assert!(TwoTypeParams::new(f64::NAN, 0.5).is_err());
        assert!(TwoTypeParams::new(1.0, 0.3).is_ok());
    }

    #[test]
    fn gap_weight_matches_direct_form_and_limit() {
        for &theta in &[0.5f64, 1.0, 3.0, 5.0] {
            for &t in &[0.1f64, 1.0, 10.0] {
                let direct = ((-0.5 * theta * t).exp() - (-t).exp()) / (1.0 - 0.5 * theta);
                assert!((mutation_gap_weight(theta, t) - direct).abs() < 1e-14);
            }
        }
        let t: f64 = 1.7;
        assert!((mutation_gap_weight(2.0, t) - t * (-t).exp()).abs() < 1e-16);
        let near = mutation_gap_weight(2.0 + 1e-9, t);
        assert!((near - t * (-t).exp()).abs() < 1e-9);
    }
}
