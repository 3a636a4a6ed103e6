use crate::grid::{parse_grid, parse_int_grid, parse_list};
use crate::table::{Cell, Table};
use crate::{Cli, Command, DriftArgs, Format, Multitype, Selection, Simulate, SuiteArg, TwoTypeArgs, UsageError};
use anyhow::{Context, Result};
use starcoal::base::mc::{estimate_of, try_collect_samples};
use starcoal::multitype::{self as mt, MultiParams, MutationMatrix};
use starcoal::selection::{self as sel, DriftSpec, FixedType};
use starcoal::verify::{self, Bound, Suite};
use starcoal::{eigen, lines, twotype, McEstimate, QuadSpec, RngStream, TwoTypeParams};

/// Build the table for a command, write it, and report whether every
/// requested check passed.
pub fn run(cli: &Cli) -> Result<bool> {
    let (table, ok) = match &cli.command {
        Command::Transition { model, x, t, grid } => (transition(model, *x, *t, grid)?, true),
        Command::Stationary { model, grid } => (stationary(model, grid)?, true),
        Command::Moments { model, x, n, t } => (moments(model, *x, n, t)?, true),
        Command::Eigen { model, n } => (eigen_table(model, *n)?, true),
        Command::Lines { theta, n, t } => (lines_table(*theta, *n, t)?, true),
        Command::Simulate { what } => (simulate(what, cli.seed, cli.n_mc)?, true),
        Command::Multitype { what } => (multitype(what)?, true),
        Command::Selection { what } => (selection(what)?, true),
        Command::Verify { suite } => verify_table(*suite, cli.seed),
    };
    let text = match cli.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ok)
}

fn two_type(m: &TwoTypeArgs) -> Result<TwoTypeParams> {
    Ok(TwoTypeParams::new(m.theta, m.p)?)
}

fn echo_two_type(t: &mut Table, m: &TwoTypeArgs) {
    t.param("theta", m.theta).param("p", m.p);
}

fn transition(m: &TwoTypeArgs, x: f64, time: f64, grid: &str) -> Result<Table> {
    let params = two_type(m)?;
    let xs = parse_grid(grid)?;
    let law = twotype::transition_law(&params, x, time)?;
    let spec = QuadSpec::default();
    let mut t = Table::new(&["xi", "density", "cdf"]);
    t.param("model", "transition");
    echo_two_type(&mut t, m);
    t.param("x", x).param("t", time);
    for a in law.atoms() {
        t.param("atom_location", a.location).param("atom_mass", a.mass);
    }
    for &xi in &xs {
        t.row(vec![xi.into(), law.density(xi).into(), law.cdf(xi, &spec)?.into()]);
    }
    Ok(t)
}

fn stationary(m: &TwoTypeArgs, grid: &str) -> Result<Table> {
    let params = two_type(m)?;
    let xs = parse_grid(grid)?;
    let mut t = Table::new(&["xi", "density", "cdf"]);
    t.param("model", "stationary");
    echo_two_type(&mut t, m);
    for &xi in &xs {
        let d = twotype::stationary_density(&params, xi)?;
        t.row(vec![xi.into(), d.into(), twotype::stationary_cdf(&params, xi).into()]);
    }
    Ok(t)
}

fn moments(m: &TwoTypeArgs, x: f64, ns: &str, ts: &str) -> Result<Table> {
    let params = two_type(m)?;
    let (ns, ts) = (parse_int_grid(ns)?, parse_grid(ts)?);
    let mut t = Table::new(&["n", "t", "central_moment", "stationary_central_moment"]);
    t.param("model", "moments");
    echo_two_type(&mut t, m);
    t.param("x", x);
    for &n in &ns {
        let stat = twotype::stationary_moment(&params, n).0;
        for &time in &ts {
            t.row(vec![n.into(), time.into(), twotype::transition_moment(&params, n, x, time)?.into(), stat.into()]);
        }
    }
    Ok(t)
}

fn eigen_table(m: &TwoTypeArgs, n: u32) -> Result<Table> {
    let params = two_type(m)?;
    if n < 1 {
        return Err(UsageError("--n must be at least 1".into()).into());
    }
    let mut t = Table::new(&["n", "lambda", "c0", "c1"]);
    t.param("model", "eigen");
    echo_two_type(&mut t, m);
    for k in 1..=n {
        let (c0, c1) = eigen::eigen_coefficients(&params, k)?;
        t.row(vec![k.into(), eigen::eigenvalue(&params, k).into(), c0.into(), c1.into()]);
    }
    Ok(t)
}

fn lines_table(theta: f64, n: u32, ts: &str) -> Result<Table> {
    let ts = parse_grid(ts)?;
    let mut t = Table::new(&["t", "j", "prob", "spectral", "max_abs_diff"]);
    t.param("model", "lines").param("theta", theta).param("n", n);
    for &time in &ts {
        let direct = lines::an_distribution(n, theta, time)?;
        let spectral = lines::an_distribution_spectral(n, theta, time)?;
        let diff = direct.max_abs_diff(&spectral);
        for (j, (&a, &b)) in direct.probs.iter().zip(&spectral.probs).enumerate() {
            t.row(vec![time.into(), j.into(), a.into(), b.into(), diff.into()]);
        }
    }
    Ok(t)
}

fn summary_table() -> Table {
    Table::new(&["quantity", "mean", "std_error", "exact", "z"])
}

fn summary_row(t: &mut Table, name: impl Into<String>, est: &McEstimate, exact: f64) {
    t.row(vec![
        Cell::Text(name.into()),
        est.mean.into(),
        est.std_error.into(),
        exact.into(),
        est.z_score(exact).into(),
    ]);
}

fn simulate(what: &Simulate, seed: u64, n_mc: u64) -> Result<Table> {
    match what {
        Simulate::Fv { model, x, t: time, path } => {
            let params = two_type(model)?;
            let mut t = if *path {
                let mut rng = RngStream::new(seed, 0);
                let fp = twotype::simulate_path(&params, *x, *time, &mut rng)?;
                let mut t = Table::new(&["time", "event", "frequency"]);
                t.row(vec![0.0.into(), "start".into(), (*x).into()]);
                for e in &fp.events {
                    let kind = match e.kind {
                        twotype::Replacement::Type1 => "type1",
                        twotype::Replacement::Type2 => "type2",
                    };
                    t.row(vec![e.time.into(), kind.into(), e.state.into()]);
                }
                t.row(vec![(*time).into(), "end".into(), twotype::path_frequency(&params, &fp, *time).into()]);
                t
            } else {
                let p = params.p();
                let draws = try_collect_samples(n_mc, seed, 0, |rng| {
                    twotype::simulate_path(&params, *x, *time, rng).map(|fp| twotype::path_frequency(&params, &fp, *time))
                })?;
                let mut t = summary_table();
                for n in 1..=4u32 {
                    let col: Vec<f64> = draws.iter().map(|v| (v - p).powi(n as i32)).collect();
                    let exact = twotype::transition_moment(&params, n, *x, *time)?;
                    summary_row(&mut t, format!("central_moment_{n}"), &estimate_of(&col), exact);
                }
                t
            };
            t.param("model", "simulate fv");
            echo_two_type(&mut t, model);
            t.param("x", x).param("t", time);
            Ok(finish_sim(t, *path, seed, n_mc))
        }
        Simulate::Lines { theta, n, t: time, path } => {
            let mut t = if *path {
                let mut rng = RngStream::new(seed, 0);
                let lp = lines::simulate_lines(*n, *theta, Some(*time), &mut rng)?;
                let mut t = Table::new(&["time", "event", "lines"]);
                t.row(vec![0.0.into(), "start".into(), (*n).into()]);
                for e in &lp.path.events {
                    let kind = match e.kind {
                        lines::LineEvent::Mutation => "mutation",
                        lines::LineEvent::Coalescence => "coalescence",
                    };
                    t.row(vec![e.time.into(), kind.into(), e.state.into()]);
                }
                t
            } else {
                let est = lines::empirical_line_dist(*n, *theta, *time, n_mc, seed)?;
                let exact = lines::an_distribution(*n, *theta, *time)?;
                let mut t = summary_table();
                for (j, e) in est.iter().enumerate() {
                    summary_row(&mut t, format!("P(A={j})"), e, exact.probs[j]);
                }
                let abs = lines::absorption_time_estimate(*n, *theta, n_mc, seed)?;
                summary_row(&mut t, "absorption_time", &abs, lines::mean_absorption_time(*n, *theta)?);
                t
            };
            t.param("model", "simulate lines").param("theta", theta).param("n", n).param("t", time);
            Ok(finish_sim(t, *path, seed, n_mc))
        }
        Simulate::Asg { beta, n, t: horizon, path } => {
            let mut t = if *path {
                let mut rng = RngStream::new(seed, 0);
                let ap = sel::asg_simulate(*n, *beta, *horizon, &mut rng)?;
                let mut t = Table::new(&["time", "event", "lineages"]);
                t.row(vec![0.0.into(), "start".into(), (*n).into()]);
                for e in &ap.path.events {
                    let kind = match e.kind {
                        sel::AsgEvent::Branching => "branching",
                        sel::AsgEvent::Collapse => "collapse",
                    };
                    t.row(vec![e.time.into(), kind.into(), e.state.into()]);
                }
                t
            } else {
                let ts = try_collect_samples(n_mc, seed, 0, |rng| {
                    sel::asg_simulate(*n, *beta, None, rng).map(|p| p.ultimate_ancestor.unwrap_or(f64::NAN))
                })?;
                let mut t = summary_table();
                summary_row(&mut t, "t_ua", &estimate_of(&ts), 1.0);
                let lt: Vec<f64> = ts.iter().map(|v| (-v).exp()).collect();
                summary_row(&mut t, "exp(-t_ua)", &estimate_of(&lt), 0.5);
                if let Some(h) = horizon {
                    let hit: Vec<f64> = ts.iter().map(|v| f64::from(u8::from(v <= h))).collect();
                    summary_row(&mut t, format!("P(t_ua<={h})"), &estimate_of(&hit), -(-h).exp_m1());
                }
                t
            };
            t.param("model", "simulate asg").param("beta", beta).param("n", n);
            if let Some(h) = horizon {
                t.param("t", h);
            }
            Ok(finish_sim(t, *path, seed, n_mc))
        }
    }
}

fn finish_sim(mut t: Table, path: bool, seed: u64, n_mc: u64) -> Table {
    t.param("seed", seed);
    if !path {
        t.param("n_mc", n_mc);
    }
    t
}

fn multitype(what: &Multitype) -> Result<Table> {
    match what {
        Multitype::Kernel { theta, t: time, p, matrix } => {
            let mut t = Table::new(&["i", "j", "k_ij"]);
            t.param("model", "multitype kernel").param("theta", theta).param("t", time);
            let k = match (p, matrix) {
                (Some(p), _) => {
                    let mp = MultiParams::new(*theta, parse_list(p)?)?;
                    t.param("p", p);
                    mt::pim_line_kernel(&mp, *time)?
                }
                (None, Some(path)) => {
                    let mm = MutationMatrix::load(path)?;
                    let (k, tail) = mt::markov_line_kernel_with_tail(&mm, *theta, *time)?;
                    let gamma = mt::markov_stationary_gamma(&mm)?;
                    let gamma: Vec<String> = gamma.iter().map(|g| format!("{g:?}")).collect();
                    t.param("matrix", path.display()).param("gamma", gamma.join(" ")).param("truncation_tail", tail);
                    k
                }
                (None, None) => return Err(UsageError("give --p or --matrix".into()).into()),
            };
            for i in 0..k.nrows() {
                for j in 0..k.ncols() {
                    t.row(vec![i.into(), j.into(), k[(i, j)].into()]);
                }
            }
            Ok(t)
        }
        Multitype::Sampling { theta, n } => {
            let mut t = Table::new(&["m", "sampling_prob", "num_types_prob"]);
            t.param("model", "multitype sampling").param("theta", theta).param("n", n);
            for m in 0..=*n {
                let types = if m == 0 { 0.0 } else { mt::num_types_dist(*n, m, *theta)? };
                t.row(vec![m.into(), mt::infinite_sampling_prob(*n, m, *theta)?.into(), types.into()]);
            }
            Ok(t)
        }
    }
}

fn drift_spec(a: &DriftArgs, t: &mut Table) -> Result<DriftSpec> {
    let coeffs = match (&a.drift, &a.drift_file) {
        (Some(s), _) => Some(parse_list(s)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let body: String = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect::<Vec<_>>().join(" ");
            Some(parse_list(&body)?)
        }
        (None, None) => None,
    };
    if let Some(c) = coeffs {
        let shown: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
        t.param("drift", "custom").param("coefficients", shown.join(" "));
        return Ok(DriftSpec::custom(c)?);
    }
    match (a.theta, a.p, a.beta) {
        (Some(theta), Some(p), beta) if beta.is_none_or(|b| b == 0.0) => {
            t.param("drift", "neutral").param("theta", theta).param("p", p);
            Ok(DriftSpec::neutral(theta, p)?)
        }
        (Some(theta), Some(p), Some(beta)) => {
            t.param("drift", "mutation-selection").param("theta", theta).param("p", p).param("beta", beta);
            Ok(DriftSpec::mutation_selection(theta, p, beta)?)
        }
        (None, None, Some(beta)) => {
            t.param("drift", "logistic").param("beta", beta);
            Ok(DriftSpec::logistic(beta)?)
        }
        _ => Err(UsageError("give --theta and --p (and optionally --beta), only --beta, or --drift".into()).into()),
    }
}

fn method_name(m: sel::SkeletonMethod) -> &'static str {
    match m {
        sel::SkeletonMethod::ClosedForm => "closed-form",
        sel::SkeletonMethod::Series => "series",
        sel::SkeletonMethod::Quadrature => "quadrature",
        sel::SkeletonMethod::Ode => "ode",
    }
}

fn selection(what: &Selection) -> Result<Table> {
    match what {
        Selection::Skeleton { drift } => {
            let mut t = Table::new(&["quantity", "value", "method"]);
            t.param("model", "selection skeleton");
            let d = drift_spec(drift, &mut t)?;
            if let DriftSpec::MutationSelection(s) = &d {
                let r = sel::roots(s.theta, s.beta, s.p)?;
                t.row(vec!["r1".into(), r.r1.into(), "closed-form".into()]);
                t.row(vec!["r2".into(), r.r2.into(), "closed-form".into()]);
            }
            let sk = sel::skeleton_matrix(&d)?;
            t.row(vec!["p11".into(), sk.p11.into(), method_name(sk.method11).into()]);
            t.row(vec!["p21".into(), sk.p21.into(), method_name(sk.method21).into()]);
            match sel::replacement_stationary(&d) {
                Ok((pi1, pi2)) => {
                    t.row(vec!["pi1".into(), pi1.into(), "closed-form".into()]);
                    t.row(vec!["pi2".into(), pi2.into(), "closed-form".into()]);
                }
                Err(starcoal::Error::NoStationaryDistribution(why)) => {
                    t.param("stationary", why);
                }
                Err(e) => return Err(e.into()),
            }
            Ok(t)
        }
        Selection::Density { drift, grid } => {
            let mut t = Table::new(&["xi", "density", "cdf"]);
            t.param("model", "selection density");
            let d = drift_spec(drift, &mut t)?;
            let xs = parse_grid(grid)?;
            let law = sel::stationary_law(&d)?;
            let spec = QuadSpec::default();
            for &xi in &xs {
                t.row(vec![xi.into(), law.density(xi).into(), law.cdf(xi, &spec)?.into()]);
            }
            Ok(t)
        }
        Selection::Flow { drift, x, t: ts } => {
            let mut t = Table::new(&["t", "chi"]);
            t.param("model", "selection flow");
            let d = drift_spec(drift, &mut t)?;
            t.param("x", x);
            for &time in &parse_grid(ts)? {
                t.row(vec![time.into(), sel::flow(&d, *x, time)?.into()]);
            }
            Ok(t)
        }
        Selection::Fixation { beta, grid } => {
            let mut t = Table::new(&["x", "fix_type1", "fix_type2"]);
            t.param("model", "selection fixation").param("beta", beta);
            for &x in &parse_grid(grid)? {
                t.row(vec![
                    x.into(),
                    sel::fixation_prob(*beta, x, FixedType::One)?.into(),
                    sel::fixation_prob(*beta, x, FixedType::Two)?.into(),
                ]);
            }
            Ok(t)
        }
    }
}

fn verify_table(suite: SuiteArg, seed: u64) -> (Table, bool) {
    let suite = match suite {
        SuiteArg::All => Suite::All,
        SuiteArg::Twotype => Suite::TwoType,
        SuiteArg::Eigen => Suite::Eigen,
        SuiteArg::Lines => Suite::Lines,
        SuiteArg::Multitype => Suite::Multitype,
        SuiteArg::Selection => Suite::Selection,
        SuiteArg::Determinism => Suite::Determinism,
    };
    let report = verify::run_suite(suite, seed);
    for c in &report.criteria {
        eprintln!("{}", c.headline());
    }
    let mut t = Table::new(&["criterion", "title", "check", "observed", "bound", "limit", "status"]);
    let n_pass = report.criteria.iter().filter(|c| c.passed()).count();
    t.param("model", "verify")
        .param("suite", format!("{suite:?}").to_lowercase())
        .param("seed", seed)
        .param("criteria_passed", format!("{n_pass} of {}", report.criteria.len()));
    for c in &report.criteria {
        for k in &c.checks {
            let bound = match k.bound {
                Bound::AtMost => "<=",
                Bound::Above => ">",
            };
            t.row(vec![
                c.id.into(),
                c.title.into(),
                k.label.clone().into(),
                k.observed.into(),
                bound.into(),
                k.limit.into(),
                (if k.passed { "pass" } else { "fail" }).into(),
            ]);
        }
    }
    (t, report.passed())
}
