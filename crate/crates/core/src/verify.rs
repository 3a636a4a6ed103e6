//! Built-in cross-check battery.
//!
//! Fourteen numbered criteria, each a list of checks with an observed value
//! and a fixed limit. Reports contain no timings, so a given seed always
//! renders the same bytes.

use crate::base::mc::{collect_samples, ensemble, ensemble_vec, try_collect_samples, SHARDS};
use crate::base::quad::{integrate, QuadSpec};
use crate::base::stats::ks_one_sample;
use crate::base::{RngStream, TwoTypeParams};
use crate::eigen::{
    direct_expectation, eigen_poly, eigenvalue, expansion_expectation, generator_apply, hyper_pairing,
    pv_expectation_g_q1, PolyRep,
};
use crate::error::{Error, Result};
use crate::lines::{absorption_time_estimate, an_distribution, an_distribution_spectral, duality_check, mean_absorption_time};
use crate::multitype::{
    infinite_sampling_prob, markov_line_kernel, pim_line_kernel, pim_region_density, pim_region_mass,
    pim_stationary_density, pim_transition_law, MultiParams, MutationMatrix,
};
use crate::selection::{
    asg_simulate, asg_stationary, fixation_prob, flow, replacement_stationary, root_residual, roots,
    selection_duality_check, skeleton_matrix, skeleton_p11_series, skeleton_p21_series, skeleton_quadrature,
    stationary_density as sel_density, stationary_law as sel_law, stationary_sample as sel_sample, DriftSpec,
    FixedType, SelectionParams,
};
use crate::twotype;
use serde::Serialize;
use std::fmt::Write as _;

pub const THETAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
pub const PS: [f64; 3] = [0.1, 0.5, 0.9];
pub const TIMES: [f64; 3] = [0.1, 1.0, 10.0];
pub const STARTS: [f64; 3] = [0.0, 0.3, 1.0];
/// `(θ, p, x, t)` points for the moment duality.
pub const DUALITY_POINTS: [(f64, f64, f64, f64); 3] = [(1.0, 0.3, 0.8, 0.5), (2.0, 0.5, 0.5, 1.0), (5.0, 0.7, 0.1, 2.0)];
pub const CRITERIA: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bound {
    /// Pass when observed ≤ limit.
    AtMost,
    /// Pass when observed > limit (p-values).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub observed: f64,
    pub limit: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            observed,
            limit,
            bound: Bound::AtMost,
            passed: observed <= limit,
        }
    }

    pub fn above(label: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            observed,
            limit,
            bound: Bound::Above,
            passed: observed > limit,
        }
    }

    fn failed(label: impl Into<String>, err: &Error) -> Self {
        Self {
            label: format!("{} [error: {err}]", label.into()),
            observed: f64::NAN,
            limit: f64::NAN,
            bound: Bound::AtMost,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// One line: status, id, title and the worst check.
    pub fn headline(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let worst = self.checks.iter().find(|c| !c.passed).or_else(|| self.checks.first());
        match worst {
            Some(c) => format!("[{status}] {:>2} {:<28} {}", self.id, self.title, c.render()),
            None => format!("[{status}] {:>2} {:<28} no checks", self.id, self.title),
        }
    }
}

impl Check {
    pub fn render(&self) -> String {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::Above => ">",
        };
        format!("{}: {:.3e} ({op} {:.1e})", self.label, self.observed, self.limit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# starcoal verify, seed {}", self.seed);
        for c in &self.criteria {
            let _ = writeln!(out, "{}", c.headline());
            for k in &c.checks {
                let mark = if k.passed { "ok" } else { "FAIL" };
                let _ = writeln!(out, "       {mark:<4} {}", k.render());
            }
        }
        let n_pass = self.criteria.iter().filter(|c| c.passed()).count();
        let _ = writeln!(out, "# {n_pass} of {} criteria passed", self.criteria.len());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    All,
    TwoType,
    Eigen,
    Lines,
    Multitype,
    Selection,
    Determinism,
}

impl Suite {
    pub fn criteria(self) -> Vec<u32> {
        match self {
            Suite::All => (1..=CRITERIA).collect(),
            Suite::TwoType => vec![1, 2, 3, 10],
            Suite::Eigen => vec![4, 5, 6],
            Suite::Lines => vec![7, 8, 9],
            Suite::Multitype => vec![11],
            Suite::Selection => vec![12, 13],
            Suite::Determinism => vec![14],
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Report {
    Report {
        seed,
        criteria: suite.criteria().into_iter().map(|id| run_criterion(id, seed)).collect(),
    }
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "normalization",
        2 => "uniform stationary law",
        3 => "moments vs simulation",
        4 => "eigen-equation",
        5 => "expansion exactness",
        6 => "biorthogonality",
        7 => "spectral identity",
        8 => "absorption time",
        9 => "moment duality",
        10 => "replacement decomposition",
        11 => "multitype",
        12 => "selection",
        13 => "ancestral selection graph",
        14 => "determinism",
        _ => "unknown",
    }
}

pub fn run_criterion(id: u32, seed: u64) -> CriterionReport {
    // every criterion draws from its own seed
    let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id as u64);
    let checks = match id {
        1 => normalization(),
        2 => uniform_case(s),
        3 => moments_vs_mc(s),
        4 => eigen_equation(),
        5 => expansion_exactness(s),
        6 => biorthogonality(),
        7 => spectral_identity(),
        8 => absorption(s),
        9 => duality(s),
        10 => replacement_decomposition(),
        11 => multitype_checks(),
        12 => selection_checks(s),
        13 => asg_checks(s),
        14 => determinism(s),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    CriterionReport {
        id,
        title: title(id),
        checks: checks.unwrap_or_else(|e| vec![Check::failed("criterion aborted", &e)]),
    }
}

/// Largest value over a grid; a NaN sticks.
struct Worst {
    value: f64,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0 }
    }

    fn see(&mut self, v: f64) {
        if v.is_nan() {
            self.value = f64::NAN;
        } else if !self.value.is_nan() {
            self.value = self.value.max(v);
        }
    }
}

fn params_grid() -> Result<Vec<TwoTypeParams>> {
    let mut out = Vec::new();
    for &th in &THETAS {
        for &p in &PS {
            out.push(TwoTypeParams::new(th, p)?);
        }
    }
    Ok(out)
}

fn normalization() -> Result<Vec<Check>> {
    let spec = QuadSpec::default();
    let mut w = Worst::new();
    for pr in params_grid()? {
        for &t in &TIMES {
            for &x in &STARTS {
                let law = twotype::transition_law(&pr, x, t)?;
                w.see((law.integrated_mass(&spec)? - 1.0).abs());
            }
        }
    }
    Ok(vec![Check::at_most("max |atom + integrated mass - 1|", w.value, 1e-10)])
}

fn uniform_case(seed: u64) -> Result<Vec<Check>> {
    let pr = TwoTypeParams::new(2.0, 0.5)?;
    let mut w = Worst::new();
    for i in 0..=100 {
        w.see((twotype::stationary_density(&pr, i as f64 / 100.0)? - 1.0).abs());
    }
    let samples = collect_samples(1_000_000, seed, 0, |rng| twotype::stationary_sample(&pr, rng));
    let ks = ks_one_sample(&samples, |x| x.clamp(0.0, 1.0));
    Ok(vec![
        Check::at_most("max |density - 1| on a 0.01 grid", w.value, 1e-12),
        Check::above("KS p-value vs Uniform(0,1), N=1e6", ks.p_value, 0.01),
    ])
}

fn moments_vs_mc(seed: u64) -> Result<Vec<Check>> {
    const N: u64 = 1_000_000;
    let mut w = Worst::new();
    let mut idx = 0;
    for pr in params_grid()? {
        for &t in &TIMES {
            for &x in &STARTS {
                let p = pr.p();
                let est = ensemble_vec(N, seed, idx * SHARDS, 4, |rng, out| {
                    let h = twotype::sample_transition(&pr, x, t, rng).expect("validated arguments") - p;
                    let mut v = 1.0;
                    for o in out.iter_mut() {
                        v *= h;
                        *o = v;
                    }
                });
                idx += 1;
                for (n, e) in est.iter().enumerate() {
                    w.see(e.z_score(twotype::transition_moment(&pr, n as u32 + 1, x, t)?));
                }
            }
        }
    }
    Ok(vec![Check::at_most("max |z| over 432 moments, N=1e6 each", w.value, 4.0)])
}

fn eigen_equation() -> Result<Vec<Check>> {
    let mut w = Worst::new();
    for pr in params_grid()? {
        for n in 1..=12 {
            let pn = eigen_poly(&pr, n)?;
            let lhs = generator_apply(&pr, &pn)?;
            w.see(lhs.max_abs_diff(&pn.scaled(-eigenvalue(&pr, n))));
        }
    }
    Ok(vec![Check::at_most("max coefficient |L P_n + λ_n P_n|, n<=12", w.value, 1e-12)])
}

fn expansion_exactness(seed: u64) -> Result<Vec<Check>> {
    let mut rng = RngStream::new(seed, 0);
    let grid = params_grid()?;
    let mut w = Worst::new();
    for draw in 0..20 {
        let degree = 1 + (rng.uniform() * 8.0) as usize;
        let raw: Vec<f64> = (0..=degree).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let pr = grid[draw % grid.len()];
        let g = PolyRep::from_monomial(pr.p(), &raw);
        for &t in &TIMES {
            for &x in &STARTS {
                let a = expansion_expectation(&pr, &g, x, t)?;
                let b = direct_expectation(&pr, &g, x, t)?;
                w.see((a - b).abs());
            }
        }
    }
    Ok(vec![Check::at_most("max |expansion - direct|, 20 random polynomials", w.value, 1e-10)])
}

fn biorthogonality() -> Result<Vec<Check>> {
    let mut pair = Worst::new();
    let mut pv = Worst::new();
    for pr in params_grid()? {
        for m in 1..=12 {
            let pm = eigen_poly(&pr, m)?;
            for n in 2..=12 {
                let d = if m == n { 1.0 } else { 0.0 };
                pair.see((hyper_pairing(&pm, n)? - d).abs());
            }
            let d = if m == 1 { 1.0 } else { 0.0 };
            pv.see((pv_expectation_g_q1(&pr, &pm)? - d).abs());
        }
    }
    Ok(vec![
        Check::at_most("max |<P_m, Q_n> - δ|, 2<=n<=12", pair.value, 1e-12),
        Check::at_most("max |PV E[P_m Q_1] - δ|", pv.value, 1e-12),
    ])
}

fn spectral_identity() -> Result<Vec<Check>> {
    let mut w = Worst::new();
    let mut at_zero = true;
    for &th in &THETAS {
        for n in 1..=20 {
            for &t in &TIMES {
                let a = an_distribution(n, th, t)?;
                let b = an_distribution_spectral(n, th, t)?;
                w.see(a.max_abs_diff(&b));
            }
            let a = an_distribution(n, th, 0.0)?;
            let b = an_distribution_spectral(n, th, 0.0)?;
            for j in 0..=n as usize {
                let d = if j == n as usize { 1.0 } else { 0.0 };
                at_zero &= a.probs[j] == d && b.probs[j] == d;
            }
        }
    }
    Ok(vec![
        Check::at_most("max |direct - spectral|, n<=20", w.value, 1e-10),
        Check::at_most("t=0 mismatches with δ_jn", if at_zero { 0.0 } else { 1.0 }, 0.0),
    ])
}

fn absorption(seed: u64) -> Result<Vec<Check>> {
    let exact = mean_absorption_time(2, 2.0)?;
    let mut w = Worst::new();
    let mut k = 0;
    for &n in &[2u32, 5, 10] {
        for &th in &[1.0, 2.0, 5.0] {
            let est = absorption_time_estimate(n, th, 100_000, seed.wrapping_add(k))?;
            k += 1;
            w.see(est.z_score(mean_absorption_time(n, th)?));
        }
    }
    Ok(vec![
        Check::at_most("|E T(n=2, θ=2) - 4/3|", (exact - 4.0 / 3.0).abs(), 0.0),
        Check::at_most("max |z| of simulated mean, N=1e5", w.value, 3.0),
    ])
}

fn duality(seed: u64) -> Result<Vec<Check>> {
    let mut w = Worst::new();
    let mut k = 0;
    for &(th, p, x, t) in &DUALITY_POINTS {
        let pr = TwoTypeParams::new(th, p)?;
        for n in 1..=4 {
            let d = duality_check(&pr, n, x, t, 1_000_000, seed.wrapping_add(k))?;
            k += 1;
            w.see(d.rhs.z_score(d.lhs));
        }
    }
    Ok(vec![Check::at_most("max |z| analytic vs coalescent side, N=1e6", w.value, 4.0)])
}

fn replacement_decomposition() -> Result<Vec<Check>> {
    let spec = QuadSpec::default();
    let mut sum_err = Worst::new();
    let mut mass_err = Worst::new();
    for &(th, p, x, t) in &DUALITY_POINTS {
        let pr = TwoTypeParams::new(th, p)?;
        let e = pr.no_mutation(t);
        let gap = (p * (1.0 - e), p + (1.0 - p) * e);
        for i in 0..200 {
            let xi = (i as f64 + 0.5) / 200.0;
            if xi > gap.0 && xi < gap.1 {
                continue;
            }
            let mut s = 0.0;
            for k in 1..=50 {
                s += twotype::replacement_component_density(&pr, x, t, k, xi)?;
            }
            sum_err.see((s - twotype::transition_density(&pr, x, t, xi)?).abs());
        }
        let (atom, _, _) = twotype::transition_masses(&pr, x, t)?;
        mass_err.see((atom - twotype::replacement_count_prob(t, 0)).abs());
        for k in 1..=10 {
            let f = |xi: f64| twotype::replacement_component_density(&pr, x, t, k, xi).unwrap_or(f64::NAN);
            let m = integrate(f, 0.0, gap.0, &spec)? + integrate(f, gap.1, 1.0, &spec)?;
            mass_err.see((m - twotype::replacement_count_prob(t, k)).abs());
        }
    }
    Ok(vec![
        Check::at_most("max |Σ_{k<=50} f_k - density|", sum_err.value, 1e-8),
        Check::at_most("max |∫ f_k - e^{-t}t^k/k!|, k<=10", mass_err.value, 1e-8),
    ])
}

fn multitype_checks() -> Result<Vec<Check>> {
    let mut embed = Worst::new();
    for pr in params_grid()? {
        let mp = MultiParams::new(pr.theta(), vec![pr.p(), 1.0 - pr.p()])?;
        for &t in &TIMES {
            let k2 = twotype::line_kernel(&pr, t)?.as_matrix();
            let km = pim_line_kernel(&mp, t)?;
            for i in 0..2 {
                for j in 0..2 {
                    embed.see((k2[i][j] - km[(i, j)]).abs());
                }
            }
            for &x in &[0.05, 0.3, 0.95] {
                let xs = [x, 1.0 - x];
                let (atom, upper, _) = twotype::transition_masses(&pr, x, t)?;
                let law = pim_transition_law(&mp, &xs, t)?;
                embed.see((law.atom_mass - atom).abs());
                embed.see((pim_region_mass(&mp, &xs, t, 0)? - upper).abs());
                for i in 1..20 {
                    let xi = i as f64 / 20.0;
                    if xi > pr.p() {
                        let d2 = twotype::transition_density(&pr, x, t, xi)?;
                        let dm = pim_region_density(&mp, &xs, t, 0, xi)?;
                        embed.see((d2 - dm).abs() / d2.max(1.0));
                    }
                }
            }
        }
        for i in 1..20 {
            let xi = i as f64 / 20.0;
            if xi > pr.p() {
                let d2 = twotype::stationary_density(&pr, xi)?;
                embed.see((d2 - pim_stationary_density(&mp, 0, xi)?).abs() / d2.max(1.0));
            }
        }
    }
    let swap = MutationMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?;
    let mut sw = Worst::new();
    for &th in &THETAS {
        for &t in &TIMES {
            let k = markov_line_kernel(&swap, th, t)?;
            let stay = 0.5 * (1.0 + (-th * t).exp());
            let go = 0.5 * (1.0 - (-th * t).exp());
            sw.see((k[(0, 0)] - stay).abs().max((k[(0, 1)] - go).abs()));
            sw.see((k[(1, 1)] - stay).abs().max((k[(1, 0)] - go).abs()));
        }
    }
    let mut exact = 0.0f64;
    for n in 1..=20u32 {
        for j in 0..=n {
            let v = infinite_sampling_prob(n, j, 2.0)?;
            exact = exact.max(((v - 1.0 / (n + 1) as f64) * (n + 1) as f64).abs());
        }
    }
    Ok(vec![
        Check::at_most("max d=2 embedding difference", embed.value, 1e-12),
        Check::at_most("swap kernel vs (1 ± e^{-θt})/2", sw.value, 1e-12),
        Check::at_most("θ=2 sampling law vs 1/(n+1), relative", exact, 1e-14),
    ])
}

fn selection_checks(seed: u64) -> Result<Vec<Check>> {
    let spec = QuadSpec::default();
    let mut root = Worst::new();
    let mut agree = Worst::new();
    let mut fixed = Worst::new();
    for &th in &THETAS {
        for &p in &PS {
            for &be in &[0.5, 2.0, 10.0] {
                let r = roots(th, be, p)?;
                root.see(root_residual(th, be, p, r.r1).abs());
                root.see((root_residual(th, be, p, r.r2) / r.r2.abs().max(1.0).powi(2)).abs());
                let s = SelectionParams::new(th, p, be)?;
                let (q11, q21) = skeleton_quadrature(&s)?;
                if let Some(v) = skeleton_p11_series(&s) {
                    agree.see((v - q11).abs());
                }
                if let Some(v) = skeleton_p21_series(&s) {
                    agree.see((v - q21).abs());
                }
                let d = DriftSpec::MutationSelection(s);
                let sk = skeleton_matrix(&d)?.matrix();
                let (pi1, pi2) = replacement_stationary(&d)?;
                fixed.see((pi1 * sk[0][0] + pi2 * sk[1][0] - pi1).abs());
                fixed.see((pi1 * sk[0][1] + pi2 * sk[1][1] - pi2).abs());
            }
        }
    }
    let mut mass = Worst::new();
    let mut mean = Worst::new();
    let mut mc = Worst::new();
    for (k, &(th, be, p)) in [(1.0, 2.0, 0.5), (0.5, 5.0, 0.2), (3.0, 1.0, 0.7)].iter().enumerate() {
        let d = DriftSpec::mutation_selection(th, p, be)?;
        let law = sel_law(&d)?;
        let (pi1, _) = replacement_stationary(&d)?;
        mass.see((law.integrated_mass(&spec)? - 1.0).abs());
        mean.see((law.mean(&spec)? - pi1).abs());
        let est = ensemble(100_000, seed, k as u64 * SHARDS, |rng| sel_sample(&d, pi1, rng).expect("valid drift"));
        mc.see(est.z_score(pi1));
    }
    let ln2 = (fixation_prob(2.0, 0.5, FixedType::One)? - 2f64.ln()).abs();
    let mut comp = Worst::new();
    for &be in &[0.5, 2.0, 5.0] {
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            comp.see((fixation_prob(be, x, FixedType::One)? + fixation_prob(be, 1.0 - x, FixedType::Two)? - 1.0).abs());
        }
    }
    let mut neutral = Worst::new();
    for &(th, p) in &[(1.0, 0.3), (2.0, 0.5), (5.0, 0.9)] {
        let ms = DriftSpec::mutation_selection(th, p, 1e-6)?;
        let nd = DriftSpec::neutral(th, p)?;
        let (a, b) = (skeleton_matrix(&ms)?, skeleton_matrix(&nd)?);
        neutral.see((a.p11 - b.p11).abs().max((a.p21 - b.p21).abs()));
        neutral.see((replacement_stationary(&ms)?.0 - p).abs());
        for &t in &[0.1, 1.0, 10.0] {
            for &x in &[0.0, 0.5, 1.0] {
                neutral.see((flow(&ms, x, t)? - flow(&nd, x, t)?).abs());
            }
        }
        // cell midpoints stay clear of the equilibrium, where both densities
        // may be singular
        for i in 0..20 {
            let xi = (i as f64 + 0.5) / 20.0;
            let dn = sel_density(&nd, xi)?;
            neutral.see((sel_density(&ms, xi)? - dn).abs() / dn.max(1.0));
        }
    }
    Ok(vec![
        Check::at_most("max root residual", root.value, 1e-12),
        Check::at_most("max |series - quadrature| skeleton", agree.value, 1e-8),
        Check::at_most("max |π P - π|", fixed.value, 1e-12),
        Check::at_most("max |∫ density - 1|", mass.value, 1e-8),
        Check::at_most("max |mean - π1|", mean.value, 1e-8),
        Check::at_most("max |z| sampled mean vs π1, N=1e5", mc.value, 4.0),
        Check::at_most("|P1(1/2; β=2) - ln 2|", ln2, 1e-8),
        Check::at_most("max |P1(x) + P2(1-x) - 1|", comp.value, 1e-10),
        Check::at_most("max deviation at β=1e-6 from neutral", neutral.value, 1e-4),
    ])
}

fn asg_checks(seed: u64) -> Result<Vec<Check>> {
    let mut z = Worst::new();
    let mut ks_min = 1.0f64;
    let mut k = 0;
    for &n in &[2u64, 10] {
        for &be in &[0.5, 2.0] {
            let times = try_collect_samples(100_000, seed, k * SHARDS, |rng| {
                asg_simulate(n, be, None, rng).map(|p| p.ultimate_ancestor.expect("runs end at the ancestor"))
            })?;
            k += 1;
            let est = crate::base::mc::estimate_of(&times);
            z.see(est.z_score(1.0));
            ks_min = ks_min.min(ks_one_sample(&times, |t| -(-t.max(0.0)).exp_m1()).p_value);
        }
    }
    let mut pi2 = 0.0f64;
    for i in 1..=20u64 {
        let exact = 1.0 / (i * (i + 1)) as f64;
        pi2 = pi2.max((asg_stationary(2.0, i)? - exact).abs() / exact);
    }
    let mut gf = Worst::new();
    for &be in &[0.5, 2.0, 5.0] {
        for j in 1..=9 {
            let y = j as f64 / 10.0;
            let mut s = 0.0;
            let mut yi = 1.0;
            for i in 1..=20_000u64 {
                yi *= y;
                let term = asg_stationary(be, i)? * yi;
                s += term;
                if term < 1e-18 {
                    break;
                }
            }
            gf.see((s - fixation_prob(be, y, FixedType::Two)?).abs());
        }
    }
    let d = selection_duality_check(2, 0.5, 1.0, 2.0, 1_000_000, seed.wrapping_add(1))?;
    Ok(vec![
        Check::at_most("max |z| of mean T_UA vs 1, N=1e5", z.value, 3.0),
        Check::above("min KS p-value of T_UA vs Exp(1)", ks_min, 0.01),
        Check::at_most("β=2 π_i vs 1/(i(i+1)), relative", pi2, 1e-15),
        Check::at_most("max |Σ π_i y^i - P2(y)|", gf.value, 1e-8),
        Check::at_most("duality |lhs - rhs|/(se_l + se_r), N=1e6", d.joint_z(), 4.0),
    ])
}

/// Representative ensembles rerun on one and on several worker threads;
/// every bit must agree.
fn determinism(seed: u64) -> Result<Vec<Check>> {
    let bundle = || -> Result<Vec<u64>> {
        let pr = TwoTypeParams::new(1.0, 0.3)?;
        let mut bits = Vec::new();
        let e = ensemble(20_000, seed, 0, |rng| twotype::sample_transition(&pr, 0.8, 1.0, rng).expect("valid"));
        bits.extend([e.mean.to_bits(), e.std_error.to_bits()]);
        let d = duality_check(&pr, 3, 0.8, 0.5, 20_000, seed)?;
        bits.extend([d.rhs.mean.to_bits(), d.rhs.std_error.to_bits()]);
        let s = selection_duality_check(2, 0.5, 1.0, 2.0, 20_000, seed)?;
        bits.extend([s.lhs.mean.to_bits(), s.rhs.mean.to_bits()]);
        let ms = DriftSpec::mutation_selection(1.0, 0.5, 2.0)?;
        let xs = collect_samples(5_000, seed, 0, |rng| sel_sample(&ms, 0.5, rng).expect("valid"));
        bits.extend(xs.iter().map(|x| x.to_bits()));
        Ok(bits)
    };
    let run_with = |threads: usize| -> Result<Vec<u64>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::NonConvergence(format!("thread pool: {e}")))?;
        pool.install(bundle)
    };
    let a = run_with(1)?;
    let b = run_with(4)?;
    let c = run_with(4)?;
    let diff = a.iter().zip(&b).chain(b.iter().zip(&c)).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Ok(vec![Check::at_most("differing bits across reruns and thread counts", diff as f64, 0.0)])
}
