//! `d`-type star-shaped Fleming–Viot process.
//!
//! With parent-independent mutation (a mutant is of type `i` with
//! probability `p_i`) the transition law has the same shape as in the two
//! type case: an atom at the drifted point plus, for each type `i`, a one
//! dimensional piece on the segment where `ξ_i` is large and every other
//! coordinate is pinned proportionally to `p_j`. For a general mutation
//! matrix only the single-line kernel and the stationary sampler are
//! available.

use crate::base::law::{power_piece, Piece, Side};
use crate::base::params::{check_time, mutation_gap_weight};
use crate::base::quad::QuadSpec;
use crate::base::{sample_truncated_exponential, RngStream};
use crate::error::{invalid, Result};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

const SIMPLEX_TOL: f64 = 1e-12;

/// Total mutation rate and the mutant-type distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiParams {
    theta: f64,
    p: Vec<f64>,
}

impl MultiParams {
    pub fn new(theta: f64, p: Vec<f64>) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return invalid(format!("theta must be finite and > 0, got {theta}"));
        }
        if p.len() < 2 {
            return invalid("need at least two types");
        }
        if p.iter().any(|&q| !(q > 0.0)) {
            return invalid("mutation probabilities must be > 0");
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return invalid(format!("mutation probabilities sum to {s}, not 1"));
        }
        Ok(Self { theta, p })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }
}

fn check_simplex(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return invalid(format!("point has {} coordinates, expected {d}", x.len()));
    }
    if x.iter().any(|&v| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v)) {
        return invalid("point has a coordinate outside [0, 1]");
    }
    let s: f64 = x.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return invalid(format!("point coordinates sum to {s}, not 1"));
    }
    Ok(())
}

/// `p_ij(t) = δ_ij e^{-θt/2} + (1 - e^{-θt/2}) p_j`.
pub fn pim_line_kernel(mp: &MultiParams, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let d = mp.dim();
    let e = (-0.5 * mp.theta * t).exp();
    let m = -(-0.5 * mp.theta * t).exp_m1();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let base = m * mp.p[j];
        if i == j {
            base + e
        } else {
            base
        }
    }))
}

/// `q_i(t; x) = x_i e^{-θt/2} + (1 - e^{-θt/2}) p_i`.
pub fn pim_marginal_q(mp: &MultiParams, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_simplex(x, mp.dim())?;
    check_time(t)?;
    let e = (-0.5 * mp.theta * t).exp();
    Ok(x.iter().zip(&mp.p).map(|(&xi, &pi)| pi + (xi - pi) * e).collect())
}

/// Piece of the transition law on which type `index` replaced the
/// population last. The law of `ξ_index` is `law`; the other coordinates
/// follow from [`SimplexLaw::companion`].
#[derive(Debug, Clone)]
pub struct RegionPiece {
    pub index: usize,
    pub law: Piece,
}

#[derive(Debug, Clone)]
pub struct SimplexLaw {
    p: Vec<f64>,
    pub atom: Vec<f64>,
    pub atom_mass: f64,
    pub regions: Vec<RegionPiece>,
}

impl SimplexLaw {
    /// Full point of region `i` at `ξ_i = xi`:
    /// `ξ_j = (1 - (ξ_i - p_i)/(1 - p_i)) p_j`.
    pub fn companion(&self, i: usize, xi: f64) -> Vec<f64> {
        let w = 1.0 - (xi - self.p[i]) / (1.0 - self.p[i]);
        (0..self.p.len())
            .map(|j| if j == i { xi } else { w * self.p[j] })
            .collect()
    }

    /// Atom mass plus the analytic region masses.
    pub fn mass(&self) -> f64 {
        self.atom_mass + self.regions.iter().map(|r| r.law.mass()).sum::<f64>()
    }

    /// Atom mass plus quadrature of every region density.
    pub fn integrated_mass(&self, spec: &QuadSpec) -> Result<f64> {
        let mut m = self.atom_mass;
        for r in &self.regions {
            m += r.law.integrated_mass(spec)?;
        }
        Ok(m)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut u = rng.uniform() * self.mass();
        if u < self.atom_mass {
            return self.atom.clone();
        }
        u -= self.atom_mass;
        let last = self.regions.len() - 1;
        for (k, r) in self.regions.iter().enumerate() {
            if u < r.law.mass() || k == last {
                let xi = r.law.sample(rng);
                return self.companion(r.index, xi);
            }
            u -= r.law.mass();
        }
        unreachable!("regions are non-empty")
    }
}

/// Transition law from `x` after time `t > 0`.
pub fn pim_transition_law(mp: &MultiParams, x: &[f64], t: f64) -> Result<SimplexLaw> {
    check_simplex(x, mp.dim())?;
    if t.is_nan() || t <= 0.0 {
        return invalid(format!("transition law needs t > 0, got {t}"));
    }
    let a = 2.0 / mp.theta;
    let e = (-0.5 * mp.theta * t).exp();
    let regions = mp
        .p
        .iter()
        .zip(x)
        .enumerate()
        .map(|(i, (&pi, &xi))| {
            let (c2, w0) = if e > 0.0 { (e * (xi - pi), e) } else { (0.0, 0.0) };
            Ok(RegionPiece {
                index: i,
                law: power_piece(pi, Side::Above, 1.0 - pi, w0, a, pi, c2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimplexLaw {
        p: mp.p.clone(),
        atom: pim_marginal_q(mp, x, t)?,
        atom_mass: (-t).exp(),
        regions,
    })
}

/// Closed-form mass of region `i`: `p_i(1 - e^{-t}) + (x_i - p_i)G(t)`.
pub fn pim_region_mass(mp: &MultiParams, x: &[f64], t: f64, i: usize) -> Result<f64> {
    check_simplex(x, mp.dim())?;
    check_time(t)?;
    let pi = mp.p[i];
    Ok(pi * -(-t).exp_m1() + (x[i] - pi) * mutation_gap_weight(mp.theta, t))
}

/// Density of `ξ_i` in region `i`; zero below `p_i + (1 - p_i)e^{-θt/2}`.
pub fn pim_region_density(mp: &MultiParams, x: &[f64], t: f64, i: usize, xi: f64) -> Result<f64> {
    check_simplex(x, mp.dim())?;
    check_time(t)?;
    if i >= mp.dim() {
        return invalid(format!("region {i} out of range"));
    }
    let pi = mp.p[i];
    let a = 2.0 / mp.theta;
    let e = (-0.5 * mp.theta * t).exp();
    if !(xi > pi + (1.0 - pi) * e && xi <= 1.0) {
        return Ok(0.0);
    }
    let w = (xi - pi) / (1.0 - pi);
    Ok((pi + (x[i] - pi) * e / w) * a * w.powf(a - 1.0) / (1.0 - pi))
}

/// Stationary density of `ξ_i` in region `i`.
pub fn pim_stationary_density(mp: &MultiParams, i: usize, xi: f64) -> Result<f64> {
    if i >= mp.dim() {
        return invalid(format!("region {i} out of range"));
    }
    let pi = mp.p[i];
    if !(xi > pi && xi <= 1.0) {
        return Ok(0.0);
    }
    let a = 2.0 / mp.theta;
    Ok(pi * a * ((xi - pi) / (1.0 - pi)).powf(a - 1.0) / (1.0 - pi))
}

fn pick(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Draw from the transition law by conditioning on the last replacement.
pub fn pim_transition_sample(mp: &MultiParams, x: &[f64], t: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_simplex(x, mp.dim())?;
    if rng.bernoulli((-t).exp()) {
        return pim_marginal_q(mp, x, t);
    }
    let tau = sample_truncated_exponential(t, rng)?;
    let q = pim_marginal_q(mp, x, t - tau)?;
    let i = pick(&q, rng);
    let k = pim_line_kernel(mp, tau)?;
    Ok(k.row(i).iter().copied().collect())
}

/// `η = u^{θ/2}`; type `i` with probability `p_i` gets `(1-η)p_i + η`, the
/// others `(1-η)p_j`.
pub fn pim_stationary_sample(mp: &MultiParams, rng: &mut RngStream) -> Vec<f64> {
    let eta = rng.uniform().powf(0.5 * mp.theta);
    let i = pick(&mp.p, rng);
    mp.p
        .iter()
        .enumerate()
        .map(|(j, &pj)| if j == i { (1.0 - eta) * pj + eta } else { (1.0 - eta) * pj })
        .collect()
}

/// Row-stochastic, irreducible mutation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationMatrix {
    m: DMatrix<f64>,
}

impl MutationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if d < 2 || m.ncols() != d {
            return invalid(format!("mutation matrix must be square with d >= 2, got {}x{}", d, m.ncols()));
        }
        if m.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return invalid("mutation matrix entries must lie in [0, 1]");
        }
        for (i, row) in m.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return invalid(format!("row {i} sums to {s}, not 1"));
            }
        }
        if !irreducible(&m) {
            return invalid("mutation matrix is reducible");
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return invalid("mutation matrix rows have unequal length");
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Parse whitespace-separated rows; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| crate::Error::InvalidArgument(format!("line {}: bad number {tok:?}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

/// Boolean reachability closure: every state reaches every other.
fn irreducible(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    let mut reach: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| i == j || m[(i, j)] > 0.0).collect()).collect();
    for k in 0..d {
        for i in 0..d {
            if reach[i][k] {
                for j in 0..d {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach.iter().all(|r| r.iter().all(|&b| b))
}

/// Uniformization with at most this Poisson mean per chunk.
const CHUNK_RATE: f64 = 20.0;
const TAIL_TOL: f64 = 1e-14;

/// `P(t) = exp{(θ/2)(P - I)t}` together with the bound on the dropped
/// Poisson tail mass.
pub fn markov_line_kernel_with_tail(mm: &MutationMatrix, theta: f64, t: f64) -> Result<(DMatrix<f64>, f64)> {
    check_time(t)?;
    if !(theta.is_finite() && theta > 0.0) {
        return invalid(format!("theta must be finite and > 0, got {theta}"));
    }
    let d = mm.dim();
    let rate = 0.5 * theta * t;
    let chunks = (rate / CHUNK_RATE).ceil().max(1.0) as u32;
    let lam = rate / chunks as f64;
    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut power = DMatrix::<f64>::identity(d, d);
    let mut weight = (-lam).exp();
    let mut cum = 0.0;
    let mut k = 0u32;
    loop {
        sum += &power * weight;
        cum += weight;
        let tail = 1.0 - cum;
        if tail < TAIL_TOL || (k as f64 > lam && weight < 1e-300) {
            break;
        }
        k += 1;
        power = &power * mm.matrix();
        weight *= lam / k as f64;
    }
    let tail = (1.0 - cum).max(0.0);
    let mut out = DMatrix::<f64>::identity(d, d);
    for _ in 0..chunks {
        out = &out * &sum;
    }
    Ok((out, tail * chunks as f64))
}

pub fn markov_line_kernel(mm: &MutationMatrix, theta: f64, t: f64) -> Result<DMatrix<f64>> {
    markov_line_kernel_with_tail(mm, theta, t).map(|(k, _)| k)
}

/// Stationary vector `γ` of the mutation chain: `γM = γ`, `Σγ = 1`.
pub fn markov_stationary_gamma(mm: &MutationMatrix) -> Result<Vec<f64>> {
    let d = mm.dim();
    let mut a = mm.matrix().transpose() - DMatrix::<f64>::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(d);
    b[d - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| crate::Error::NonConvergence("singular system for the stationary vector".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Draw type `i` with probability `γ_i`, `τ ~ Exp(1)`, return row `i` of
/// `P(τ)`.
pub fn markov_stationary_sample(mm: &MutationMatrix, theta: f64, gamma: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    let i = pick(gamma, rng);
    let tau = rng.exp1();
    let k = markov_line_kernel(mm, theta, tau)?;
    Ok(k.row(i).iter().copied().collect())
}

/// Infinitely-many-types limit: probability that a sample of `n` holds one
/// family of size `j` plus `n - j` singletons,
/// `(n!/j!)(2/θ)_{(j)}/(1 + 2/θ)_{(n)}`.
pub fn infinite_sampling_prob(n: u32, j: u32, theta: f64) -> Result<f64> {
    if j > n {
        return invalid(format!("family size {j} exceeds sample size {n}"));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return invalid(format!("theta must be finite and > 0, got {theta}"));
    }
    let a = 2.0 / theta;
    let mut v = 1.0;
    for i in 0..j {
        v *= (a + i as f64) / (a + 1.0 + i as f64);
    }
    for i in j..n {
        v *= (i as f64 + 1.0) / (a + 1.0 + i as f64);
    }
    Ok(v)
}

/// Probability of `k` distinct types in a sample of `n`. A family of size 0
/// or 1 both leave `n` types, so `P(K = n) = P(J = 0) + P(J = 1)`.
pub fn num_types_dist(n: u32, k: u32, theta: f64) -> Result<f64> {
    if k == 0 || k > n {
        return invalid(format!("number of types must lie in 1..={n}, got {k}"));
    }
    if k == n {
        return Ok(infinite_sampling_prob(n, 0, theta)? + infinite_sampling_prob(n, 1, theta)?);
    }
    infinite_sampling_prob(n, n - k + 1, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp3() -> MultiParams {
        MultiParams::new(1.5, vec![0.2, 0.3, 0.5]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(MultiParams::new(1.0, vec![1.0]).is_err());
        assert!(MultiParams::new(1.0, vec![0.5, 0.6]).is_err());
        assert!(MultiParams::new(0.0, vec![0.5, 0.5]).is_err());
        assert!(MultiParams::new(1.0, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn pim_kernel_limits() {
        let mp = mp3();
        assert_eq!(pim_line_kernel(&mp, 0.0).unwrap(), DMatrix::identity(3, 3));
        let k = pim_line_kernel(&mp, 200.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - mp.p()[j]).abs() < 1e-15);
            }
        }
        let k = pim_line_kernel(&mp, 0.7).unwrap();
        for row in k.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn transition_law_masses() {
        let mp = mp3();
        let x = [0.6, 0.1, 0.3];
        let law = pim_transition_law(&mp, &x, 0.8).unwrap();
        assert!((law.mass() - 1.0).abs() < 1e-14);
        for i in 0..3 {
            let m = pim_region_mass(&mp, &x, 0.8, i).unwrap();
            assert!((law.regions[i].law.mass() - m).abs() < 1e-14);
        }
        let pt = law.companion(1, 0.9);
        assert!((pt.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(pim_transition_law(&mp, &[0.5, 0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn stationary_sample_has_one_large_coordinate() {
        let mp = mp3();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let s = pim_stationary_sample(&mp, &mut rng);
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let above = s.iter().zip(mp.p()).filter(|(v, p)| v > p).count();
            assert_eq!(above, 1);
        }
    }

    #[test]
    fn swap_matrix_kernel_and_gamma() {
        let swap = MutationMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for &(theta, t) in &[(1.0, 0.3), (2.0, 5.0), (5.0, 30.0)] {
            let k = markov_line_kernel(&swap, theta, t).unwrap();
            let e = (-theta * t).exp();
            assert!((k[(0, 0)] - 0.5 * (1.0 + e)).abs() < 1e-13);
            assert!((k[(0, 1)] - 0.5 * (1.0 - e)).abs() < 1e-13);
        }
        let g = markov_stationary_gamma(&swap).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
        assert_eq!(markov_line_kernel(&swap, 1.0, 0.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn reducible_and_bad_rows_rejected() {
        assert!(MutationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).is_err());
        assert!(MutationMatrix::from_rows(&[vec![0.6, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(MutationMatrix::parse("0.5 0.5\n# c\n0.2 0.8\n").is_ok());
        assert!(MutationMatrix::parse("0.5 x\n0.2 0.8").is_err());
    }

    #[test]
    fn pim_matrix_collapses_to_pim_kernel() {
        let mp = mp3();
        let rows: Vec<Vec<f64>> = (0..3).map(|_| mp.p().to_vec()).collect();
        let mm = MutationMatrix::from_rows(&rows).unwrap();
        for &t in &[0.1, 1.0, 40.0] {
            let a = markov_line_kernel(&mm, mp.theta(), t).unwrap();
            let b = pim_line_kernel(&mp, t).unwrap();
            assert!((a - b).abs().max() < 1e-13);
        }
        let g = markov_stationary_gamma(&mm).unwrap();
        for (gi, pi) in g.iter().zip(mp.p()) {
            assert!((gi - pi).abs() < 1e-14);
        }
    }

    #[test]
    fn sampling_distribution() {
        for n in 1..=20 {
            let s: f64 = (0..=n).map(|j| infinite_sampling_prob(n, j, 0.7).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-13);
            for j in 0..=n {
                let v = infinite_sampling_prob(n, j, 2.0).unwrap();
                assert!((v - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
            }
            let k: f64 = (1..=n).map(|k| num_types_dist(n, k, 3.0).unwrap()).sum();
            assert!((k - 1.0).abs() < 1e-13);
        }
        let a = 2.0 / 3.0;
        assert!((infinite_sampling_prob(5, 5, 3.0).unwrap() - a / (5.0 + a)).abs() < 1e-15);
        assert!(infinite_sampling_prob(3, 4, 1.0).is_err());
    }
}
