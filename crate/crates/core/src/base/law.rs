//! Probability laws on `[0, 1]` made of atoms plus density pieces.
//!
//! A density piece is stored relative to an origin: a point `ξ` of the
//! piece is `origin + h` (side [`Side::Above`]) or `origin - h`
//! ([`Side::Below`]) with the offset `h` in `[lo, hi]`. The laws of the
//! star-shaped process have integrable power singularities at `p`, and
//! working in the offset keeps resolution near that point down to the
//! smallest positive double instead of `ε·p`.

use crate::base::quad::{integrate, QuadSpec};
use crate::base::rng::RngStream;
use crate::error::{invalid, Result};
use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone)]
pub struct Piece {
    origin: f64,
    side: Side,
    lo: f64,
    hi: f64,
    mass: f64,
    density: ScalarFn,
    cdf: Option<ScalarFn>,
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.support();
        f.debug_struct("Piece")
            .field("support", &(a, b))
            .field("mass", &self.mass)
            .field("closed_cdf", &self.cdf.is_some())
            .finish()
    }
}

impl Piece {
    /// `density(h)` is the density with respect to `ξ` at offset `h`;
    /// `mass` is the stored (analytic) mass of the piece.
    pub fn new(
        origin: f64,
        side: Side,
        lo: f64,
        hi: f64,
        mass: f64,
        density: ScalarFn,
    ) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo) {
            return invalid(format!("piece offsets must satisfy 0 <= lo < hi, got [{lo}, {hi}]"));
        }
        let piece = Self {
            origin,
            side,
            lo,
            hi,
            mass,
            density,
            cdf: None,
        };
        let (a, b) = piece.support();
        if a < -1e-15 || b > 1.0 + 1e-15 {
            return invalid(format!("piece support [{a}, {b}] leaves [0, 1]"));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return invalid(format!("piece mass must be finite and >= 0, got {mass}"));
        }
        Ok(piece)
    }

    /// Attach a closed-form cumulative mass `h ↦ ∫_lo^h density`.
    pub fn with_cdf(mut self, cdf: ScalarFn) -> Self {
        self.cdf = Some(cdf);
        self
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn offsets(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn support(&self) -> (f64, f64) {
        match self.side {
            Side::Above => (self.origin + self.lo, (self.origin + self.hi).min(1.0)),
            Side::Below => ((self.origin - self.hi).max(0.0), self.origin - self.lo),
        }
    }

    fn offset_of(&self, xi: f64) -> f64 {
        match self.side {
            Side::Above => xi - self.origin,
            Side::Below => self.origin - xi,
        }
    }

    fn point_at(&self, h: f64) -> f64 {
        match self.side {
            Side::Above => self.origin + h,
            Side::Below => self.origin - h,
        }
    }

    /// Density at offset `h`; zero outside `(lo, hi)`.
    pub fn density_at_offset(&self, h: f64) -> f64 {
        if h > self.lo && h < self.hi {
            (self.density)(h)
        } else {
            0.0
        }
    }

    /// Density at `ξ`; zero outside the open support.
    pub fn density_at(&self, xi: f64) -> f64 {
        self.density_at_offset(self.offset_of(xi))
    }

    /// Mass between `lo` and offset `h`.
    pub fn offset_cdf(&self, h: f64, spec: &QuadSpec) -> Result<f64> {
        if h <= self.lo {
            return Ok(0.0);
        }
        if h >= self.hi {
            return Ok(self.mass);
        }
        match &self.cdf {
            Some(c) => Ok(c(h).clamp(0.0, self.mass)),
            None => integrate(|s| (self.density)(s), self.lo, h, spec),
        }
    }

    /// Mass by quadrature of the density, independent of the stored mass.
    pub fn integrated_mass(&self, spec: &QuadSpec) -> Result<f64> {
        integrate(|h| (self.density)(h), self.lo, self.hi, spec)
    }

    /// `∫ ξ f(ξ) dξ` over the piece, by quadrature in the offset.
    pub fn first_moment(&self, spec: &QuadSpec) -> Result<f64> {
        let shifted = integrate(|h| h * (self.density)(h), self.lo, self.hi, spec)?;
        Ok(match self.side {
            Side::Above => self.origin * self.mass + shifted,
            Side::Below => self.origin * self.mass - shifted,
        })
    }

    /// Offset whose cumulative mass is `target ∈ (0, mass)`.
    fn invert(&self, target: f64) -> f64 {
        let spec = QuadSpec::default().with_tolerance(1e-15, 1e-13);
        let (mut a, mut b) = (self.lo, self.hi);
        let mut h = 0.5 * (a + b);
        for _ in 0..200 {
            let Ok(c) = self.offset_cdf(h, &spec) else {
                break;
            };
            let g = c - target;
            if g == 0.0 {
                return h;
            }
            if g > 0.0 {
                b = h;
            } else {
                a = h;
            }
            let f = self.density_at_offset(h);
            let newton = h - g / f;
            // bisect in log scale when the bracket spans orders of magnitude
            let mid = if a > 0.0 && b / a > 4.0 {
                (a * b).sqrt()
            } else if a == 0.0 && b > 1e-300 {
                b * 1e-3
            } else {
                0.5 * (a + b)
            };
            let next = if f > 0.0 && newton > a && newton < b {
                newton
            } else {
                mid
            };
            if (next - h).abs() <= 1e-15 * h.abs().max(1e-300) || b - a <= 1e-16 * b {
                return next;
            }
            h = next;
        }
        h
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let target = rng.uniform() * self.mass;
        self.point_at(self.invert(target))
    }
}

/// A probability law on `[0, 1]`: finitely many atoms plus finitely many
/// absolutely continuous pieces with disjoint supports.
#[derive(Debug, Clone)]
pub struct MixedLaw {
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
}

impl MixedLaw {
    pub fn new(atoms: Vec<Atom>, pieces: Vec<Piece>) -> Result<Self> {
        if atoms.is_empty() && pieces.is_empty() {
            return invalid("law has neither atoms nor pieces");
        }
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.location) || !(a.mass > 0.0 && a.mass <= 1.0 + 1e-12) {
                return invalid(format!("bad atom {a:?}"));
            }
        }
        let supports: Vec<(f64, f64)> = pieces.iter().map(Piece::support).collect();
        for (i, &(a, b)) in supports.iter().enumerate() {
            for &(c, d) in &supports[i + 1..] {
                if a < d && c < b {
                    return invalid(format!("piece supports [{a}, {b}] and [{c}, {d}] overlap"));
                }
            }
            if let Some(at) = atoms.iter().find(|at| at.location > a && at.location < b) {
                return invalid(format!("atom at {} inside piece support", at.location));
            }
        }
        Ok(Self { atoms, pieces })
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                location: x,
                mass: 1.0,
            }],
            Vec::new(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Total stored mass: atoms plus analytic piece masses.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.pieces.iter().map(|p| p.mass).sum::<f64>()
    }

    /// Atoms plus quadrature of every piece density.
    pub fn integrated_mass(&self, spec: &QuadSpec) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().map(|a| a.mass).sum();
        for p in &self.pieces {
            m += p.integrated_mass(spec)?;
        }
        Ok(m)
    }

    pub fn mean(&self, spec: &QuadSpec) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().map(|a| a.location * a.mass).sum();
        for p in &self.pieces {
            m += p.first_moment(spec)?;
        }
        Ok(m)
    }

    /// Density of the continuous part at `ξ` (atoms excluded).
    pub fn density(&self, xi: f64) -> f64 {
        self.pieces.iter().map(|p| p.density_at(xi)).sum()
    }

    /// `P(X ≤ ξ)`.
    pub fn cdf(&self, xi: f64, spec: &QuadSpec) -> Result<f64> {
        let mut c: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= xi)
            .map(|a| a.mass)
            .sum();
        for p in &self.pieces {
            let h = p.offset_of(xi);
            c += match p.side {
                Side::Above => p.offset_cdf(h, spec)?,
                Side::Below => p.mass - p.offset_cdf(h, spec)?,
            };
        }
        Ok(c.clamp(0.0, 1.0))
    }

    /// Pick a component proportionally to its mass, then draw inside it.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let mut u = rng.uniform() * self.mass();
        for a in &self.atoms {
            if u < a.mass {
                return a.location;
            }
            u -= a.mass;
        }
        for p in &self.pieces {
            if u < p.mass {
                return p.sample(rng);
            }
            u -= p.mass;
        }
        // rounding left u just past the end
        match self.pieces.last() {
            Some(p) => p.sample(rng),
            None => self.atoms[self.atoms.len() - 1].location,
        }
    }
}

/// `(w^b - e^b) / b` for `0 < e ≤ w`, continuous through `b = 0` where it is
/// `ln(w / e)`.
pub(crate) fn power_gap(w: f64, e: f64, b: f64) -> f64 {
    let l = (w / e).ln();
    let z = b * l;
    if z.abs() < 1e-300 {
        return l;
    }
    e.powf(b) * z.exp_m1() / b
}

/// Piece with density `(c1 + c2/w) a w^{a-1} / s` at offset `h = s w`,
/// `w ∈ (w0, 1)`. Both the transition and stationary laws of the two-type
/// model have this shape. The cumulative mass is closed form.
pub(crate) fn power_piece(origin: f64, side: Side, s: f64, w0: f64, a: f64, c1: f64, c2: f64) -> Result<Piece> {
    let cum = move |w: f64| -> f64 {
        let first = c1 * (w.powf(a) - w0.powf(a));
        let second = if c2 == 0.0 { 0.0 } else { c2 * a * power_gap(w, w0, a - 1.0) };
        first + second
    };
    let mass = cum(1.0);
    let density: ScalarFn = Arc::new(move |h: f64| {
        let w = h / s;
        ((c1 + c2 / w) * a * w.powf(a - 1.0) / s).max(0.0)
    });
    let cdf: ScalarFn = Arc::new(move |h: f64| cum(h / s));
    Ok(Piece::new(origin, side, s * w0, s, mass, density)?.with_cdf(cdf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_law() -> MixedLaw {
        let d: ScalarFn = Arc::new(|_| 1.0);
        let p = Piece::new(0.0, Side::Above, 0.0, 1.0, 1.0, d).unwrap();
        MixedLaw::new(vec![], vec![p]).unwrap()
    }

    #[test]
    fn point_mass_behaves() {
        let law = MixedLaw::point_mass(0.3).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut rng), 0.3);
        }
        assert_eq!(law.mean(&QuadSpec::default()).unwrap(), 0.3);
        assert_eq!(law.mass(), 1.0);
    }

    #[test]
    fn rejects_empty_and_overlap() {
        assert!(MixedLaw::new(vec![], vec![]).is_err());
        let d: ScalarFn = Arc::new(|_| 1.0);
        let a = Piece::new(0.0, Side::Above, 0.0, 0.6, 0.6, d.clone()).unwrap();
        let b = Piece::new(1.0, Side::Below, 0.0, 0.5, 0.5, d).unwrap();
        assert!(MixedLaw::new(vec![], vec![a.clone(), b]).is_err());
        let atom = Atom {
            location: 0.2,
            mass: 0.1,
        };
        assert!(MixedLaw::new(vec![atom], vec![a]).is_err());
    }

    #[test]
    fn uniform_mean_and_cdf() {
        let law = uniform_law();
        let spec = QuadSpec::default();
        assert!((law.mean(&spec).unwrap() - 0.5).abs() < 1e-13);
        assert!((law.cdf(0.25, &spec).unwrap() - 0.25).abs() < 1e-13);
        let mut rng = RngStream::new(9, 0);
        let n = 20_000;
        let m: f64 = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
    }

    #[test]
    fn power_gap_limit() {
        let w: f64 = 0.7;
        let e: f64 = 0.2;
        assert!((power_gap(w, e, 0.0) - (w / e).ln()).abs() < 1e-15);
        let b = 0.35;
        assert!((power_gap(w, e, b) - (w.powf(b) - e.powf(b)) / b).abs() < 1e-14);
    }

    #[test]
    fn power_piece_closed_cdf_matches_quadrature() {
        let spec = QuadSpec::default();
        for &(a, c1, c2, w0) in &[(0.4, 0.3, 0.05, 0.01), (1.0, 0.5, -0.1, 0.3), (4.0, 0.9, 0.2, 0.0)] {
            let c2 = if w0 == 0.0 { 0.0 } else { c2 };
            let piece = power_piece(0.2, Side::Above, 0.8, w0, a, c1, c2).unwrap();
            let q = piece.integrated_mass(&spec).unwrap();
            assert!((q - piece.mass()).abs() < 1e-12, "a={a}: {q} vs {}", piece.mass());
            let h = 0.8 * (w0 + 0.5 * (1.0 - w0));
            let closed = piece.offset_cdf(h, &spec).unwrap();
            let numeric = integrate(|s| piece.density_at_offset(s), 0.8 * w0, h, &spec).unwrap();
            assert!((closed - numeric).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_inverts_singular_piece() {
        // density 0.4 h^{-0.6} on (0, 1): heavy near the origin
        let piece = power_piece(0.0, Side::Above, 1.0, 0.0, 0.4, 1.0, 0.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 20_000;
        let below: usize = (0..n).filter(|_| piece.sample(&mut rng) < 1e-3).count();
        let expect = 1e-3f64.powf(0.4);
        let frac = below as f64 / n as f64;
        assert!((frac - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt());
    }
}
