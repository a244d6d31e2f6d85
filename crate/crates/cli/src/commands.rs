use std::fmt;
use std::path::Path;

use fluidps_core::measures::{make_measure, scaled_excess};
use fluidps_core::renewal::{compute_renewal_function, max_blackwell_discrepancy};
use fluidps_core::sim::{compare_to_fluid, simulate as run_sim};
use fluidps_core::validation::{render, run_all, CriterionReport};
use fluidps_core::{
    fit_rate, prohorov, solve as solve_fluid, total_variation, Ball, Error, FluidSolution, GridMeasure, GridParams,
    ServiceDistribution, TestFunction,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::parse_values;
use crate::output::{emit, json_num, num, Csv};
use crate::{Common, Format, Init, Metric};

#[derive(Debug)]
pub enum Failure {
    /// Bad input or a domain error; exit code 1.
    Validation(String),
    /// A certified error or residual above its threshold; exit code 2.
    Certificate(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Certificate(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "{m}"),
            Failure::Certificate(m) => write!(f, "certificate failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(format!("i/o: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn values(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    parse_values(s).map_err(|e| Failure::Validation(format!("--{what}: {e}")))
}

fn grid(c: &Common) -> Result<GridParams, Failure> {
    Ok(GridParams::new(c.h, c.umax, c.xmax)?)
}

fn dist(c: &Common) -> Result<ServiceDistribution, Failure> {
    Ok(c.dist.parse()?)
}

fn fluid(c: &Common, init: &Init) -> Result<(ServiceDistribution, FluidSolution), Failure> {
    let d = dist(c)?;
    let g = grid(c)?;
    let xi = make_measure(&init.init.parse()?, Some(&d), &g)?;
    let sol = solve_fluid(&xi, &d, &g)?.with_extrapolation(init.extrapolate);
    Ok((d, sol))
}

fn snapshot_rows(csv: &mut Csv, prefix: &[String], m: &GridMeasure) {
    let tail = num(m.tail_mass());
    for (k, v) in m.cdf_nodes().iter().enumerate() {
        let mut row = prefix.to_vec();
        row.extend([num(k as f64 * m.h()), num(*v), tail.clone()]);
        csv.row(&row);
    }
}

pub fn renewal(c: &Common, t: Option<&str>, sweep_out: Option<&Path>, cert_tol: f64) -> Outcome {
    let d = dist(c)?;
    grid(c)?;
    if t.is_some() && sweep_out.is_none() {
        return Err(Failure::Validation("--t needs --sweep-out".into()));
    }
    let u = compute_renewal_function(&d, c.h, c.umax)?;
    let mut csv = Csv::new(&["u", "renewal", "density"]);
    for (k, (v, m)) in u.values().iter().zip(u.density()).enumerate() {
        csv.row(&[num(k as f64 * u.h()), num(*v), num(*m)]);
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    if let (Some(t), Some(path)) = (t, sweep_out) {
        let mut sweep = Csv::new(&["t", "max_discrepancy"]);
        for t in values(t, "t")? {
            sweep.row(&[num(t), num(max_blackwell_discrepancy(&u, t)?)]);
        }
        emit(Some(path), &sweep.into_string())?;
    }
    let bound = cert_tol * u.values().last().unwrap();
    if u.residual_cert() > bound {
        return Err(Failure::Certificate(format!(
            "renewal residual {} exceeds {}",
            num(u.residual_cert()),
            num(bound)
        )));
    }
    Ok(())
}

pub fn solve(c: &Common, init: &Init, t: &str, snapshots: Option<&Path>, tol: f64) -> Outcome {
    let ts = values(t, "t")?;
    let (_, sol) = fluid(c, init)?;
    let limit = sol.limit_state()?;
    let dynamics = if sol.is_degenerate() {
        vec![0.0; ts.len()]
    } else {
        sol.dynamic_residuals(&TestFunction::standard_suite(), &ts)?
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).fold(0.0, f64::max))
            .collect()
    };
    let mut csv = Csv::new(&[
        "t",
        "s_bar",
        "z_bar",
        "mass",
        "workload",
        "workload_error",
        "rho_limit",
        "max_dynamic_residual",
    ]);
    let mut snaps = Csv::new(&["t", "x", "cdf", "tail_mass"]);
    let mut worst = None;
    for (&t, &dyn_res) in ts.iter().zip(&dynamics) {
        let m = sol.measure_at(t)?;
        let s = if sol.is_degenerate() { 0.0 } else { sol.s_bar(t)? };
        let w = m.mass_and_moment(1.0)?;
        csv.row(&[
            num(t),
            num(s),
            num(sol.z_bar(t)?),
            num(m.total_mass()),
            num(w.value),
            num(w.error),
            num(prohorov(&m, &limit)?.value),
            num(dyn_res),
        ]);
        if snapshots.is_some() {
            snapshot_rows(&mut snaps, &[num(t)], &m);
        }
        if dyn_res > tol * (1.0 + t) && worst.is_none() {
            worst = Some((t, dyn_res));
        }
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    if let Some(p) = snapshots {
        emit(Some(p), &snaps.into_string())?;
    }
    match worst {
        Some((t, r)) => Err(Failure::Certificate(format!(
            "dynamics residual {} at t = {}",
            num(r),
            num(t)
        ))),
        None => Ok(()),
    }
}

pub fn invariant_check(c: &Common, scales: &str, t: &str, tol: f64) -> Outcome {
    let d = dist(c)?;
    let g = grid(c)?;
    let ts = values(t, "t")?;
    let mut csv = Csv::new(&["c", "t", "rho", "rho_error", "z_bar"]);
    let mut breach = None;
    for scale in values(scales, "c")? {
        let xi = scaled_excess(&d, scale, &g)?;
        let sol = solve_fluid(&xi, &d, &g)?;
        for &t in &ts {
            let rho = prohorov(&sol.measure_at(t)?, &xi)?;
            csv.row(&[num(scale), num(t), num(rho.value), num(rho.error), num(sol.z_bar(t)?)]);
            if rho.value > tol && breach.is_none() {
                breach = Some((scale, t, rho.value));
            }
        }
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    match breach {
        Some((s, t, r)) => Err(Failure::Certificate(format!(
            "c = {}, t = {}: distance {} above {}",
            num(s),
            num(t),
            num(r),
            num(tol)
        ))),
        None => Ok(()),
    }
}

fn check_error(what: &str, t: f64, err: f64, max_error: f64) -> Result<(), Failure> {
    if err > max_error {
        return Err(Failure::Certificate(format!(
            "{what} error bar {} at t = {} exceeds {}",
            num(err),
            num(t),
            num(max_error)
        )));
    }
    Ok(())
}

pub fn converge(c: &Common, init: &Init, t: &str, max_error: f64) -> Outcome {
    let ts = values(t, "t")?;
    let (_, sol) = fluid(c, init)?;
    let limit = sol.limit_state()?;
    let mut csv = Csv::new(&["t", "rho", "rho_error", "tv", "tv_error", "z_bar"]);
    let mut breach = Ok(());
    for &t in &ts {
        let m = sol.measure_at(t)?;
        let rho = prohorov(&m, &limit)?;
        let tv = total_variation(&m, &limit)?;
        csv.row(&[
            num(t),
            num(rho.value),
            num(rho.error),
            num(tv.value),
            num(tv.error),
            num(sol.z_bar(t)?),
        ]);
        if breach.is_ok() {
            breach = check_error("rho", t, rho.error, max_error).and(check_error("tv", t, tv.error, max_error));
        }
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    breach
}

#[allow(clippy::too_many_arguments)]
pub fn rates(
    c: &Common,
    init: &Init,
    metric: Metric,
    eps: f64,
    m_bound: f64,
    t: &str,
    window: &str,
    max_error: f64,
) -> Outcome {
    let ts = values(t, "t")?;
    let win = values(window, "window")?;
    let [lo, hi] = win[..] else {
        return Err(Failure::Validation("--window takes `lo,hi`".into()));
    };
    if !(eps > 0.0) {
        return Err(Failure::Validation("--eps must be positive".into()));
    }
    let (d, sol) = fluid(c, init)?;
    if d.beta_e() == 0.0 {
        return Err(Error::DegenerateRate("beta_e = 0: the limit is zero and no rate applies").into());
    }
    let (ball, exponent, label) = match metric {
        Metric::Rho => (Ball::Rho, eps / 4.0, "rho"),
        Metric::Tv => (Ball::Tv, eps, "tv"),
    };
    let in_ball = sol.xi().in_moment_ball(m_bound, eps, ball)?;
    let limit = sol.limit_state()?;
    let mut dist_vals = Vec::with_capacity(ts.len());
    let mut errors = Vec::with_capacity(ts.len());
    for &t in &ts {
        let m = sol.measure_at(t)?;
        let dv = match metric {
            Metric::Rho => prohorov(&m, &limit)?,
            Metric::Tv => total_variation(&m, &limit)?,
        };
        dist_vals.push(dv.value);
        errors.push(dv.error);
    }
    let fit = fit_rate(&ts, &dist_vals, (lo, hi))?;
    let anchored = dist_vals[0] * ts[0].powf(exponent);
    let anchored_holds = ts
        .iter()
        .zip(&dist_vals)
        .all(|(t, d)| *d <= anchored * t.powf(-exponent) * (1.0 + 1e-12));
    let samples: Vec<Value> = ts
        .iter()
        .zip(&dist_vals)
        .zip(&errors)
        .map(|((t, d), e)| {
            json!({
                "t": json_num(*t),
                "distance": json_num(*d),
                "error": json_num(*e),
                "fitted_bound": json_num(fit.bound(*t)),
            })
        })
        .collect();
    let report = json!({
        "metric": label,
        "eps": json_num(eps),
        "M": json_num(m_bound),
        "in_ball": in_ball,
        "target_exponent": json_num(-exponent),
        "slope": json_num(fit.slope),
        "C": json_num(fit.constant),
        "window": [json_num(fit.window.0), json_num(fit.window.1)],
        "zeros_excluded": fit.zeros_excluded,
        "anchored_constant": json_num(anchored),
        "anchored_bound_holds": anchored_holds,
        "samples": samples,
    });
    emit(
        c.out.as_deref(),
        &(serde_json::to_string_pretty(&report).unwrap() + "\n"),
    )?;
    for (t, e) in ts.iter().zip(&errors) {
        check_error(label, *t, *e, max_error)?;
    }
    Ok(())
}

pub fn gap(c: &Common, init: &Init, r: &str) -> Outcome {
    let rs = values(r, "r")?;
    let (_, sol) = fluid(c, init)?;
    let mut csv = Csv::new(&["r", "gap", "truncated_at"]);
    for r in rs {
        let g = sol.stationarity_gap(r)?;
        csv.row(&[num(r), num(g.value), num(g.truncated_at)]);
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    Ok(())
}

pub fn simulate(c: &Common, init: &Init, scale: f64, seeds: &str, t: &str, snapshots: Option<&Path>) -> Outcome {
    let ts = values(t, "t")?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Failure::Validation(format!("--seeds: `{s}` is not a seed")))
        })
        .collect::<Result<_, _>>()?;
    let (d, sol) = fluid(c, init)?;
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&seed| -> Result<_, Error> {
            let tr = run_sim(&d, sol.xi(), scale, &ts, seed, sol.grid())?;
            let rows = compare_to_fluid(&tr, &sol)?;
            Ok((tr, rows))
        })
        .collect::<Result<_, _>>()?;
    let mut csv = Csv::new(&["seed", "t", "count", "workload", "rho", "tv"]);
    let mut snaps = Csv::new(&["seed", "t", "x", "cdf", "tail_mass"]);
    for (tr, rows) in &runs {
        for (i, row) in rows.iter().enumerate() {
            csv.row(&[
                tr.seed.to_string(),
                num(row.t),
                tr.counts[i].to_string(),
                num(tr.workloads[i]),
                num(row.rho),
                row.tv.map(num).unwrap_or_default(),
            ]);
            if snapshots.is_some() {
                snapshot_rows(&mut snaps, &[tr.seed.to_string(), num(row.t)], &tr.snapshots[i]);
            }
        }
    }
    emit(c.out.as_deref(), &csv.into_string())?;
    if let Some(p) = snapshots {
        emit(Some(p), &snaps.into_string())?;
    }
    Ok(())
}

fn report_json(reports: &[CriterionReport]) -> Value {
    let list: Vec<Value> = reports
        .iter()
        .map(|r| {
            let checks: Vec<Value> = r
                .checks
                .iter()
                .map(|c| {
                    json!({
                        "label": c.label,
                        "value": json_num(c.value),
                        "bound": json_num(c.bound),
                        "passed": c.passed,
                    })
                })
                .collect();
            json!({ "id": r.id, "title": r.title, "passed": r.passed(), "checks": checks })
        })
        .collect();
    json!({ "criteria": list })
}

pub fn selftest(out: Option<&Path>, format: Format) -> Outcome {
    let reports = run_all();
    let text = match format {
        Format::Text => render(&reports),
        Format::Json => serde_json::to_string_pretty(&report_json(&reports)).unwrap() + "\n",
    };
    emit(out, &text)?;
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(Failure::Certificate(format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}
