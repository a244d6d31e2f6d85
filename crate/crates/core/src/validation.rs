//! The acceptance suite: each criterion evaluates to a list of numeric
//! checks against fixed bounds.
//!
//! Criteria run in parallel but reports are assembled in id order and hold
//! no timing data, so rendering is byte-stable across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{builtin_families, ServiceDistribution};
use crate::error::Result;
use crate::fluid::{solve, FluidSolution};
use crate::grid::GridParams;
use crate::measures::{make_measure, scaled_excess, Ball, GridMeasure};
use crate::metrics::reference::prohorov_atoms;
use crate::metrics::{fit_rate, prohorov, total_variation};
use crate::renewal::{compute_renewal_function, max_blackwell_discrepancy};
use crate::sim::{compare_to_fluid, median, simulate_replicas};
use crate::test_function::TestFunction;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// `value ≤ bound`.
    pub fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
            passed: value <= bound,
        }
    }

    /// `value < bound`.
    pub fn below(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
            passed: value < bound,
        }
    }

    /// `|value - target| ≤ tol`, reported as the deviation.
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::at_most(label, (value - target).abs(), tol)
    }

    /// A yes/no condition, reported as `1` (true) or `0` against `1`.
    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Self {
            label: label.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            passed: ok,
        }
    }

    fn error(label: impl Into<String>, e: &crate::Error) -> Self {
        Self {
            label: format!("{}: {e}", label.into()),
            value: f64::NAN,
            bound: f64::NAN,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// One line: status, id and title.
    pub fn summary(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        format!(
            "[{status}] criterion {:>2}: {} ({} checks, {failed} failed)",
            self.id,
            self.title,
            self.checks.len()
        )
    }
}

pub const TITLES: [&str; 13] = [
    "renewal exactness",
    "invariant manifold",
    "closed-form trajectory",
    "conservation",
    "dynamics residual",
    "excess-law identity",
    "weak convergence",
    "Prohorov rate bound",
    "total-variation rate bound",
    "Blackwell discrepancy",
    "Prohorov oracle and metric axioms",
    "simulator fluid limit",
    "determinism",
];

fn report(id: u32, body: impl FnOnce(&mut Vec<Check>) -> Result<()>) -> CriterionReport {
    let mut checks = Vec::new();
    if let Err(e) = body(&mut checks) {
        checks.push(Check::error("evaluation failed", &e));
    }
    CriterionReport {
        id,
        title: TITLES[id as usize - 1].to_string(),
        checks,
    }
}

fn measure(spec: &str, d: Option<&ServiceDistribution>, g: &GridParams) -> Result<GridMeasure> {
    make_measure(&spec.parse()?, d, g)
}

fn exp1() -> ServiceDistribution {
    ServiceDistribution::exponential(1.0).unwrap()
}

fn uniform02() -> ServiceDistribution {
    ServiceDistribution::uniform(0.0, 2.0).unwrap()
}

fn pareto_light() -> ServiceDistribution {
    ServiceDistribution::pareto(0.75, 4.0).unwrap()
}

/// The two non-invariant (service, initial state) pairs used by the
/// conservation and dynamics checks.
pub fn test_pairs(g: &GridParams) -> Result<Vec<(String, FluidSolution)>> {
    let pairs = [
        (exp1(), "uniformdensity:a=0,b=2,mass=1"),
        (uniform02(), "expdensity:rate=1,mass=1"),
    ];
    pairs
        .iter()
        .map(|(d, spec)| {
            let xi = measure(spec, None, g)?;
            Ok((format!("{} / {spec}", d.label()), solve(&xi, d, g)?))
        })
        .collect()
}

pub fn criterion_1() -> CriterionReport {
    report(1, |c| {
        let u = compute_renewal_function(&exp1(), 0.01, 100.0)?;
        let rel = u
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let x = k as f64 * u.h();
                (v - (1.0 + x)).abs() / (1.0 + x)
            })
            .fold(0.0, f64::max);
        c.push(Check::at_most("exp(1): max relative error of U_e", rel, 1e-3));
        for d in builtin_families() {
            let u = compute_renewal_function(&d, 0.01, 100.0)?;
            let top = *u.values().last().unwrap();
            c.push(Check::at_most(
                format!("{}: residual certificate", d.label()),
                u.residual_cert(),
                5e-3 * top,
            ));
        }
        Ok(())
    })
}

pub fn criterion_2() -> CriterionReport {
    report(2, |c| {
        let g = GridParams::default();
        for d in [exp1(), uniform02()] {
            for scale in [0.5, 1.0, 2.0] {
                let xi = scaled_excess(&d, scale, &g)?;
                let sol = solve(&xi, &d, &g)?;
                let mut worst = 0.0_f64;
                for t in 0..=20 {
                    worst = worst.max(prohorov(&sol.measure_at(t as f64)?, &xi)?.value);
                }
                c.push(Check::at_most(
                    format!("{}: c = {scale}, max rho over t = 0..20", d.label()),
                    worst,
                    0.02,
                ));
            }
        }
        Ok(())
    })
}

pub fn criterion_3() -> CriterionReport {
    report(3, |c| {
        let g = GridParams::default();
        let d = exp1();
        let xi = measure("uniformdensity:a=0,b=2,mass=1", None, &g)?;
        let sol = solve(&xi, &d, &g)?;
        c.push(Check::near("T(3) - 10/3", sol.t_bar(3.0)?, 10.0 / 3.0, 5e-3));
        c.push(Check::near("Z(7/6) - 5/4", sol.z_bar(7.0 / 6.0)?, 1.25, 5e-3));
        let nu_e = scaled_excess(&d, 1.0, &g)?;
        for (name, t) in [("7/3", 7.0 / 3.0), ("3", 3.0), ("5", 5.0)] {
            c.push(Check::at_most(
                format!("rho(state({name}), excess law)"),
                prohorov(&sol.measure_at(t)?, &nu_e)?.value,
                0.02,
            ));
        }
        c.push(Check::near(
            "gap(0) - 1/3",
            sol.stationarity_gap(0.0)?.value,
            1.0 / 3.0,
            5e-3,
        ));
        c.push(Check::at_most("gap(2)", sol.stationarity_gap(2.0)?.value, 5e-3));
        Ok(())
    })
}

pub fn criterion_4() -> CriterionReport {
    report(4, |c| {
        let g = GridParams::default();
        for (name, sol) in test_pairs(&g)? {
            let w = sol.workload();
            let mut work_dev = 0.0_f64;
            let mut mass_dev = 0.0_f64;
            for k in 0..=40 {
                let t = 0.5 * k as f64;
                let m = sol.measure_at(t)?;
                work_dev = work_dev.max((m.mass_and_moment(1.0)?.value - w).abs());
                mass_dev = mass_dev.max((m.total_mass() - sol.z_bar(t)?).abs());
            }
            c.push(Check::at_most(
                format!("{name}: max workload deviation"),
                work_dev,
                5e-3 * w,
            ));
            c.push(Check::at_most(format!("{name}: max |mass - Z|"), mass_dev, 1e-2));
        }
        Ok(())
    })
}

pub fn criterion_5() -> CriterionReport {
    report(5, |c| {
        let g = GridParams::default();
        let suite = TestFunction::standard_suite();
        let ts = [0.5, 1.0, 2.0, 5.0];
        for (name, sol) in test_pairs(&g)? {
            let res = sol.dynamic_residuals(&suite, &ts)?;
            for (t, row) in ts.iter().zip(&res) {
                let worst = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
                c.push(Check::at_most(
                    format!("{name}: max |residual| over {} functions at t = {t}", suite.len()),
                    worst,
                    1e-2 * (1.0 + t),
                ));
            }
        }
        Ok(())
    })
}

pub fn criterion_6() -> CriterionReport {
    report(6, |c| {
        let suite = TestFunction::standard_suite();
        for d in builtin_families() {
            let mut worst = 0.0_f64;
            for g in &suite {
                worst = worst.max(d.excess_identity_residual(g)?.abs());
            }
            c.push(Check::at_most(
                format!("{}: max |identity residual|", d.label()),
                worst,
                1e-8,
            ));
        }
        Ok(())
    })
}

pub fn criterion_7() -> CriterionReport {
    report(7, |c| {
        let g = GridParams::new(0.01, 250.0, 200.0)?;
        let d = uniform02();
        let spec = "paretodensity:xm=0.5,p=3,mass=1";
        let xi = measure(spec, None, &g)?;
        c.push(Check::holds(
            format!("{spec} in the rho moment ball (M = 4, eps = 0.5)"),
            xi.in_moment_ball(4.0, 0.5, Ball::Rho)?,
        ));
        let sol = solve(&xi, &d, &g)?;
        let rho = prohorov(&sol.measure_at(200.0)?, &sol.limit_state()?)?.value;
        c.push(Check::at_most("rho(state(200), limit)", rho, 0.02));

        let g = GridParams::new(0.02, 15000.0, 200.0)?;
        let d = ServiceDistribution::pareto(0.5, 2.0)?;
        let xi = measure("uniformdensity:a=0,b=2,mass=0.1", None, &g)?;
        let sol = solve(&xi, &d, &g)?;
        c.push(Check::holds(
            "pareto(0.5, 2): limit state is zero",
            sol.limit_state()?.is_zero(),
        ));
        c.push(Check::at_most("pareto(0.5, 2): Z(500)", sol.z_bar(500.0)?, 0.05));
        let w = sol.workload();
        let est = sol.measure_at(500.0)?.mass_and_moment(1.0)?;
        c.push(Check::at_most(
            "pareto(0.5, 2): workload deviation at t = 500 plus error bar",
            (est.value - w).abs() + est.error,
            0.01 * w,
        ));
        Ok(())
    })
}

/// Sample times for the rate checks.
pub const RATE_TIMES: [f64; 11] = [50.0, 60.0, 75.0, 100.0, 125.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0];
/// Sample levels for the stationarity-gap check.
pub const GAP_LEVELS: [f64; 8] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

pub const RHO_BALL_MEASURES: [&str; 4] = [
    "paretodensity:xm=1,p=2.5,mass=1",
    "uniformdensity:a=0,b=4,mass=1",
    "uniformdensity:a=0,b=2,mass=1",
    "paretodensity:xm=0.5,p=2,mass=2",
];

pub const TV_BALL_MEASURES: [&str; 3] = [
    "uniformdensity:a=0,b=2,mass=1",
    "paretodensity:xm=0.5,p=2.75,mass=1",
    "expdensity:rate=1,mass=1",
];

const RATE_EPS: f64 = 0.5;
const RATE_M: f64 = 4.0;

fn rate_grid() -> GridParams {
    GridParams::new(0.01, 400.0, 200.0).unwrap()
}

/// Checks `y(x) ≤ C x^{-p}` with `C` fitted at the first sample (where the
/// ratio is 1 by construction, so it is skipped).
fn power_bound_checks(c: &mut Vec<Check>, name: &str, xs: &[f64], ys: &[f64], p: f64) {
    let constant = ys[0] * xs[0].powf(p);
    let worst = xs
        .iter()
        .zip(ys)
        .skip(1)
        .map(|(x, y)| y / (constant * x.powf(-p)))
        .fold(0.0, f64::max);
    c.push(Check::at_most(
        format!("{name}: max ratio to C x^-{p}"),
        worst,
        1.0 + 1e-12,
    ));
}

pub fn criterion_8() -> CriterionReport {
    report(8, |c| {
        let g = rate_grid();
        let d = pareto_light();
        let rows: Vec<Result<(String, bool, Vec<f64>)>> = RHO_BALL_MEASURES
            .par_iter()
            .map(|spec| {
                let xi = measure(spec, None, &g)?;
                let inside = xi.in_moment_ball(RATE_M, RATE_EPS, Ball::Rho)?;
                let sol = solve(&xi, &d, &g)?;
                let limit = sol.limit_state()?;
                let rho = RATE_TIMES
                    .iter()
                    .map(|t| Ok(prohorov(&sol.measure_at(*t)?, &limit)?.value))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((spec.to_string(), inside, rho))
            })
            .collect();
        for row in rows {
            let (spec, inside, rho) = row?;
            c.push(Check::holds(format!("{spec} in the rho moment ball"), inside));
            power_bound_checks(c, &spec, &RATE_TIMES, &rho, RATE_EPS / 4.0);
            let fit = fit_rate(&RATE_TIMES, &rho, (50.0, 500.0))?;
            c.push(Check::at_most(format!("{spec}: fitted slope"), fit.slope, -0.05));
        }
        Ok(())
    })
}

/// Spec, ball membership, TV distances and gaps of one initial measure.
type TvRow = (String, bool, Vec<f64>, Vec<f64>);

pub fn criterion_9() -> CriterionReport {
    report(9, |c| {
        let g = rate_grid();
        let d = pareto_light();
        c.push(Check::holds(
            "service has a finite moment of order 3.5",
            d.moment(3.5, crate::MomentOf::Nu).is_finite(),
        ));
        let rows: Vec<Result<TvRow>> = TV_BALL_MEASURES
            .par_iter()
            .map(|spec| {
                let xi = measure(spec, None, &g)?;
                let inside = xi.in_moment_ball(RATE_M, RATE_EPS, Ball::Tv)?;
                let sol = solve(&xi, &d, &g)?;
                let limit = sol.limit_state()?;
                let tv = RATE_TIMES
                    .iter()
                    .map(|t| Ok(total_variation(&sol.measure_at(*t)?, &limit)?.value))
                    .collect::<Result<Vec<f64>>>()?;
                let gap = GAP_LEVELS
                    .iter()
                    .map(|r| Ok(sol.stationarity_gap(*r)?.value))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((spec.to_string(), inside, tv, gap))
            })
            .collect();
        for row in rows {
            let (spec, inside, tv, gap) = row?;
            c.push(Check::holds(format!("{spec} in the TV moment ball"), inside));
            power_bound_checks(c, &format!("{spec}: TV"), &RATE_TIMES, &tv, RATE_EPS);
            power_bound_checks(c, &format!("{spec}: gap"), &GAP_LEVELS, &gap, RATE_EPS);
        }
        Ok(())
    })
}

pub fn criterion_10() -> CriterionReport {
    report(10, |c| {
        for d in [uniform02(), pareto_light()] {
            let u = compute_renewal_function(&d, 0.01, 100.0)?;
            let early = max_blackwell_discrepancy(&u, 10.0)?;
            let late = max_blackwell_discrepancy(&u, 80.0)?;
            c.push(Check::at_most(
                format!("{}: D(80) relative to D(10)", d.label()),
                late,
                early,
            ));
            c.push(Check::at_most(format!("{}: D(80)", d.label()), late, 0.02));
        }
        Ok(())
    })
}

fn random_atoms(rng: &mut ChaCha8Rng, cells: usize) -> Vec<(usize, f64)> {
    let k = rng.random_range(0..=6);
    (0..k)
        .map(|_| (rng.random_range(0..cells), rng.random::<f64>()))
        .collect()
}

fn atoms_to_measure(h: f64, cells: usize, atoms: &[(usize, f64)]) -> Result<GridMeasure> {
    let mut m = vec![0.0; cells];
    for &(k, w) in atoms {
        m[k] += w;
    }
    GridMeasure::from_cell_masses(h, &m)
}

pub fn criterion_11() -> CriterionReport {
    report(11, |c| {
        let h = 0.01;
        let cells = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst_gap = 0.0_f64;
        for _ in 0..200 {
            let a = random_atoms(&mut rng, cells);
            let b = random_atoms(&mut rng, cells);
            let fast = prohorov(&atoms_to_measure(h, cells, &a)?, &atoms_to_measure(h, cells, &b)?)?.value;
            let pos = |v: &[(usize, f64)]| v.iter().map(|&(k, w)| ((k as f64 + 0.5) * h, w)).collect::<Vec<_>>();
            let slow = prohorov_atoms(&pos(&a), &pos(&b), 1e-9);
            worst_gap = worst_gap.max((fast - slow).abs());
        }
        c.push(Check::at_most(
            "200 atomic instances: max |fast - exhaustive|",
            worst_gap,
            1e-6 + h,
        ));

        let h = 0.02;
        let cells = 50;
        let mut sym = 0.0_f64;
        let mut tri = f64::NEG_INFINITY;
        for _ in 0..100 {
            let ms: Vec<GridMeasure> = (0..3)
                .map(|_| {
                    let masses: Vec<f64> = (0..cells)
                        .map(|_| {
                            if rng.random::<f64>() < 0.3 {
                                0.1 * rng.random::<f64>()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    GridMeasure::from_cell_masses(h, &masses)
                })
                .collect::<Result<_>>()?;
            let ab = prohorov(&ms[0], &ms[1])?;
            let ba = prohorov(&ms[1], &ms[0])?;
            let bc = prohorov(&ms[1], &ms[2])?;
            let ac = prohorov(&ms[0], &ms[2])?;
            sym = sym.max((ab.value - ba.value).abs() / (3.0 * ab.error.max(ba.error)));
            let slack = 3.0 * ac.error.max(ab.error).max(bc.error);
            tri = tri.max((ac.value - ab.value - bc.value) / slack);
        }
        c.push(Check::at_most(
            "100 triples: symmetry defect / (3 x certified error)",
            sym,
            1.0,
        ));
        c.push(Check::at_most(
            "100 triples: triangle defect / (3 x certified error)",
            tri,
            1.0,
        ));
        Ok(())
    })
}

pub const SIM_SCALES: [f64; 3] = [50.0, 200.0, 800.0];
pub const SIM_SEEDS: u64 = 20;

pub fn criterion_12() -> CriterionReport {
    report(12, |c| {
        let g = GridParams::new(0.01, 20.0, 20.0)?;
        let d = exp1();
        let xi = measure("uniformdensity:a=0,b=2,mass=1", None, &g)?;
        let sol = solve(&xi, &d, &g)?;
        let mut medians = Vec::new();
        for r in SIM_SCALES {
            let trs = simulate_replicas(&d, &xi, r, &[1.0], 12, SIM_SEEDS, &g)?;
            let rho = trs
                .iter()
                .map(|tr| Ok(compare_to_fluid(tr, &sol)?[0].rho))
                .collect::<Result<Vec<f64>>>()?;
            medians.push(median(&rho));
        }
        for (w, pair) in medians.windows(2).zip(SIM_SCALES.windows(2)) {
            c.push(Check::below(
                format!("median rho at r = {} vs r = {}", pair[1], pair[0]),
                w[1],
                w[0],
            ));
        }
        c.push(Check::at_most("median rho at r = 800", *medians.last().unwrap(), 0.1));
        Ok(())
    })
}

/// Criterion 13 from two renderings of the same suite.
pub fn criterion_13(first: &str, second: &str) -> CriterionReport {
    report(13, |c| {
        c.push(Check::holds("two runs render byte-identical reports", first == second));
        Ok(())
    })
}

/// Criteria 1 to 12, in id order.
pub fn run_numeric() -> Vec<CriterionReport> {
    let jobs: [fn() -> CriterionReport; 12] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
    ];
    jobs.par_iter().map(|f| f()).collect()
}

/// Runs criteria 1 to 12 twice and appends the determinism verdict.
pub fn run_all() -> Vec<CriterionReport> {
    let first = run_numeric();
    let second = run_numeric();
    let verdict = criterion_13(&render(&first), &render(&second));
    let mut out = first;
    out.push(verdict);
    out
}

/// Plain-text rendering with fixed float formatting.
pub fn render(reports: &[CriterionReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&r.summary());
        s.push('\n');
        for c in &r.checks {
            s.push_str(&format!(
                "    {} {}: value {:.11e}, bound {:.11e}\n",
                if c.passed { "ok  " } else { "FAIL" },
                c.label,
                c.value,
                c.bound
            ));
        }
    }
    s
}
