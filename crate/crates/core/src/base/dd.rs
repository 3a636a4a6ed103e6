//! Double-double arithmetic (about 106 bits of significand).
//!
//! Used where alternating binomial sums cancel many orders of magnitude,
//! e.g. the closed-form line-count probabilities and their spectral
//! reconstruction. Only the handful of operations those sums need are
//! provided.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_558e-17,
};

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact product of two doubles.
    pub fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn powi(self, mut n: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ONE;
        }
        let k = (self.hi / LN2.hi + 0.5).floor();
        let r = self - LN2 * Self::new(k);
        // e^r = (e^{r/1024})^1024 via s -> 2s + s^2 on s = e^{x} - 1
        let r = r.scale_pow2(-10);
        let mut s = r;
        let mut term = r;
        for i in 2..=24 {
            term = term * r / Self::new(i as f64);
            s = s + term;
            if term.hi.abs() < 1e-34 * s.hi.abs().max(1e-300) {
                break;
            }
        }
        for _ in 0..10 {
            s = s * Self::new(2.0) + s * s;
        }
        (s + Self::ONE).scale_pow2(k as i32)
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::new(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::new(q3)
    }
}

impl std::iter::Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_digits() {
        let big = DoubleDouble::new(1e16);
        let s = big + DoubleDouble::new(1.0) - big;
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn division_roundtrip() {
        let a = DoubleDouble::new(1.0) / DoubleDouble::new(3.0);
        let back = a * DoubleDouble::new(3.0) - DoubleDouble::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_matches_f64_and_identities() {
        for &x in &[-30.0, -5.5, -1.0, -0.025, 0.0, 0.3, 2.0, 40.0] {
            let e = DoubleDouble::new(x).exp().to_f64();
            let r = x.exp();
            assert!(((e - r) / r).abs() < 4e-16, "x={x}: {e} vs {r}");
        }
        // e^{a} e^{-a} = 1 to double-double accuracy
        let a = DoubleDouble::new(3.7);
        let one = a.exp() * (-a).exp() - DoubleDouble::ONE;
        assert!(one.to_f64().abs() < 1e-30);
        // e^{1/2}^2 = e
        let h = DoubleDouble::new(0.5).exp();
        let e = DoubleDouble::ONE.exp();
        assert!((h * h - e).to_f64().abs() < 1e-30);
    }

    #[test]
    fn powi_consistent_with_exp() {
        let p = DoubleDouble::new(-0.0625).exp();
        let direct = DoubleDouble::new(-0.0625 * 17.0).exp();
        assert!((p.powi(17) - direct).to_f64().abs() < 1e-30);
    }
}
