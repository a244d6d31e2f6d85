//! Distances between finite measures and power-law rate fitting.

pub mod reference;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{GridMeasure, Tail};

/// A distance with its certified error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distance {
    pub value: f64,
    pub error: f64,
}

/// Cell masses of both measures on a common grid, with the dropped tails.
struct Aligned {
    h: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    tail_p: f64,
    tail_q: f64,
}

fn refine_to(m: &GridMeasure, h: f64) -> Result<GridMeasure> {
    if (m.h() - h).abs() <= 1e-12 * h {
        Ok(m.clone())
    } else {
        m.resample(h)
    }
}

/// Cell masses on `n` cells; cells past the measure's grid are filled from
/// a closed-form tail when one is available.
fn masses_on(m: &GridMeasure, n: usize) -> Result<(Vec<f64>, f64)> {
    let own = m.cells();
    if n <= own {
        let mut p = m.cell_masses();
        let dropped: f64 = p.drain(n..).sum();
        return Ok((p, m.tail_mass() + dropped));
    }
    match m.tail() {
        Tail::Table(_) if m.tail_mass() > 0.0 => {
            // cannot extend a numerical tail; keep it as dropped mass
            let mut p = m.cell_masses();
            p.resize(n, 0.0);
            Ok((p, m.tail_mass()))
        }
        _ => {
            let h = m.h();
            let cdf: Vec<f64> = (0..=n).map(|k| m.cdf_at(k as f64 * h)).collect::<Result<_>>()?;
            let p = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
            Ok((p, (m.total_mass() - cdf[n]).max(0.0)))
        }
    }
}

fn align(z1: &GridMeasure, z2: &GridMeasure) -> Result<Aligned> {
    let h = z1.h().min(z2.h());
    let a = refine_to(z1, h)?;
    let b = refine_to(z2, h)?;
    let n = a.cells().max(b.cells());
    let (p, tail_p) = masses_on(&a, n)?;
    let (q, tail_q) = masses_on(&b, n)?;
    Ok(Aligned {
        h,
        p,
        q,
        tail_p,
        tail_q,
    })
}

fn prefix(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for x in v {
        acc += x;
        out.push(acc);
    }
    out
}

/// `sup_B [p(B) - q(N_d(B))]` over unions of cells `B`, where `N_d(B)` adds
/// every cell within `d` cells of `B`.
///
/// Two intervals of `B` whose neighbourhoods overlap can be merged without
/// lowering the objective, so an optimal `B` has disjoint neighbourhoods and
/// a left-to-right scan over interval right ends suffices.
fn excess(pp: &[f64], qq: &[f64], d: usize) -> f64 {
    let n = pp.len() - 1;
    let d = d.min(n);
    let mut f = vec![f64::NEG_INFINITY; n + 1];
    let mut cand = vec![f64::NEG_INFINITY; n + 1];
    f[0] = 0.0;
    let mut done = 0usize;
    let mut best_start = f64::NEG_INFINITY;
    for b in 0..n {
        let s = b.saturating_sub(d);
        while done < s {
            done += 1;
            f[done] = f[done - 1].max(cand[done]);
        }
        best_start = best_start.max(f[s] - pp[b] + qq[s]);
        let e = (b + d + 1).min(n);
        cand[e] = cand[e].max(best_start + pp[b + 1] - qq[e]);
    }
    while done < n {
        done += 1;
        f[done] = f[done - 1].max(cand[done]);
    }
    f[n].max(0.0)
}

/// Extended Prohorov distance on the lattice of cells, by bisection over
/// the neighbourhood width. Certified to `±(2h + tail masses)`.
pub fn prohorov(z1: &GridMeasure, z2: &GridMeasure) -> Result<Distance> {
    let a = align(z1, z2)?;
    let pp = prefix(&a.p);
    let qq = prefix(&a.q);
    let h = a.h;
    let e = |d: usize| excess(&pp, &qq, d).max(excess(&qq, &pp, d));
    let total_gap = (pp[a.p.len()] - qq[a.q.len()]).abs();
    // beyond this width the excess is the mass difference, which is then ≤ d h
    let mut hi = a.p.len() + (total_gap / h).ceil() as usize + 1;
    let mut lo = 0usize;
    if e(0) <= 0.0 {
        hi = 0;
    }
    // smallest d with e(d) ≤ d h
    while lo < hi {
        let mid = (lo + hi) / 2;
        if e(mid) <= mid as f64 * h {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let value = if hi == 0 { 0.0 } else { (hi as f64 * h).min(e(hi - 1)) };
    Ok(Distance {
        value,
        error: 2.0 * h + a.tail_p + a.tail_q,
    })
}

/// `‖ζ₁ - ζ₂‖_TV`: summed absolute differences of cell masses; the tails
/// add `|t₁ - t₂|` with uncertainty up to `t₁ + t₂ - |t₁ - t₂|`.
pub fn total_variation(z1: &GridMeasure, z2: &GridMeasure) -> Result<Distance> {
    let a = align(z1, z2)?;
    let body: f64 = a.p.iter().zip(&a.q).map(|(x, y)| (x - y).abs()).sum();
    let gap = (a.tail_p - a.tail_q).abs();
    Ok(Distance {
        value: body + gap,
        error: a.tail_p + a.tail_q - gap,
    })
}

/// Empirical power law `d(t) ≈ C t^{slope}` on a time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub slope: f64,
    /// Smallest `C` with `d(t_k) ≤ C t_k^{slope}` at every window sample.
    pub constant: f64,
    pub window: (f64, f64),
    /// Window samples dropped because the distance was zero.
    pub zeros_excluded: usize,
}

impl RateReport {
    pub fn bound(&self, t: f64) -> f64 {
        self.constant * t.powf(self.slope)
    }
}

pub const MIN_RATE_SAMPLES: usize = 5;

/// Least-squares fit of `log d` against `log t` inside `window`.
pub fn fit_rate(times: &[f64], distances: &[f64], window: (f64, f64)) -> Result<RateReport> {
    if times.len() != distances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times but {} distances",
            times.len(),
            distances.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    if let Some(d) = distances.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative distance {d}")));
    }
    let inside: Vec<(f64, f64)> = times
        .iter()
        .zip(distances)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, d)| (*t, *d))
        .collect();
    if inside.len() < MIN_RATE_SAMPLES {
        return Err(Error::InsufficientSamples {
            found: inside.len(),
            needed: MIN_RATE_SAMPLES,
        });
    }
    let positive: Vec<(f64, f64)> = inside.iter().copied().filter(|(_, d)| *d > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::ExactConvergence);
    }
    if positive.len() < MIN_RATE_SAMPLES {
        return Err(Error::InsufficientSamples {
            found: positive.len(),
            needed: MIN_RATE_SAMPLES,
        });
    }
    if !(positive[0].0 > 0.0) {
        return Err(Error::InvalidArgument("rate fit needs positive times".into()));
    }
    let n = positive.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = positive.iter().map(|(t, d)| (t.ln(), d.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateRate("all window times coincide"));
    }
    let slope = sxy / sxx;
    let constant = positive.iter().map(|(t, d)| d / t.powf(slope)).fold(0.0, f64::max);
    Ok(RateReport {
        times: inside.iter().map(|x| x.0).collect(),
        distances: inside.iter().map(|x| x.1).collect(),
        slope,
        constant,
        window,
        zeros_excluded: inside.len() - positive.len(),
    })
}

/// Positive root of `y² - (M + 4C) y - 2C`.
pub fn prohorov_rate_constant(m: f64, c: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument(format!("C = {c} must be at least 1")));
    }
    let b = m + 4.0 * c;
    Ok(0.5 * (b + (b * b + 8.0 * c).sqrt()))
}
