//! Fluid model solutions from the convolution representation.
//!
//! `T̄ = H_ξ ∗ U_e` and `T̄' = H'_ξ ∗ U_e` are tabulated on the `u`-grid.
//! `S̄ = T̄⁻¹` turns physical time into cumulative service per unit mass, and
//! the state at time `t` has CDF
//! `ξ((u, u+x]) + ∫_0^u (f_e(y) - f_e(x+y)) T̄'(u-y) dy` with `u = S̄(t)`.

use crate::conv::convolve;
use crate::distributions::{Moment, ServiceDistribution};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridParams};
use crate::measures::{scaled_excess, GridMeasure, Tail, TailEntry};
use crate::renewal::{cell_weights, compute_renewal_function, convolve_with_renewal, RenewalFunction};
use crate::test_function::TestFunction;

/// Orders with a computed tail moment.
const EXACT_ORDERS: [u32; 3] = [0, 1, 2];
/// Orders carried as upper bounds only.
const BOUND_ORDERS: [f64; 4] = [0.5, 1.5, 2.5, 3.5];

#[derive(Debug, Clone)]
struct Tables {
    renewal: RenewalFunction,
    tbar: GridFunction,
    tbar_prime: GridFunction,
    /// Hat-function integrals of `f_e` over each cell, covering
    /// `u_max + x_max`.
    rise: Vec<f64>,
    fall: Vec<f64>,
    /// `rise[i] + fall[i+1]`: weight of a full hat centred at `ih`.
    hat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FluidSolution {
    xi: GridMeasure,
    dist: ServiceDistribution,
    grid: GridParams,
    workload: f64,
    kappa: f64,
    extrapolate: bool,
    tables: Option<Tables>,
}

/// `∫_r^{u_max} |T̄' - κ|`, a lower estimate of the untruncated quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityGap {
    pub value: f64,
    pub truncated_at: f64,
}

struct NodeState {
    cdf: Vec<f64>,
    tail_mass: f64,
    entries: Vec<TailEntry>,
}

/// Builds the solution for initial state `xi` and service law `d`.
pub fn solve(xi: &GridMeasure, d: &ServiceDistribution, grid: &GridParams) -> Result<FluidSolution> {
    grid.validate()?;
    let xi = conform(xi, grid)?;
    let workload = if xi.is_zero() {
        0.0
    } else {
        let w = xi.mass_and_moment(1.0)?;
        if !w.value.is_finite() {
            return Err(Error::WorkloadInfinite);
        }
        w.value
    };
    let kappa = d.beta_e() * workload;
    if xi.is_zero() {
        return Ok(FluidSolution {
            xi,
            dist: d.clone(),
            grid: *grid,
            workload,
            kappa,
            extrapolate: false,
            tables: None,
        });
    }
    let h = grid.h;
    let n = grid.u_cells();
    let renewal = compute_renewal_function(d, h, n as f64 * h)?;
    let h_prime = GridFunction::new(
        h,
        (0..=n)
            .map(|k| xi.tail_mass_at(k as f64 * h))
            .collect::<Result<Vec<_>>>()?,
    );
    let h_work = GridFunction::new(
        h,
        (0..=n)
            .map(|k| xi.truncated_workload(k as f64 * h))
            .collect::<Result<Vec<_>>>()?,
    );
    let tbar_prime = convolve_with_renewal(&renewal, &h_prime)?;
    let mut tbar = convolve_with_renewal(&renewal, &h_work)?;
    for k in 1..tbar.values.len() {
        if tbar.values[k] <= tbar.values[k - 1] {
            return Err(Error::DegenerateSolution("T̄ is not strictly increasing on the grid"));
        }
    }
    tbar.values[0] = 0.0;
    let cells = n + grid.x_cells() + 1;
    let (rise, fall) = cell_weights(d, h, cells);
    let hat = (0..cells)
        .map(|i| if i == 0 { 0.0 } else { rise[i] + fall[i + 1] })
        .collect();
    Ok(FluidSolution {
        xi,
        dist: d.clone(),
        grid: *grid,
        workload,
        kappa,
        extrapolate: false,
        tables: Some(Tables {
            renewal,
            tbar,
            tbar_prime,
            rise,
            fall,
            hat,
        }),
    })
}

/// Brings `xi` onto the solver grid: integer refinement of the step and
/// zero-padding or exact truncation in `x`.
fn conform(xi: &GridMeasure, grid: &GridParams) -> Result<GridMeasure> {
    let mut m = if (xi.h() - grid.h).abs() <= 1e-12 * grid.h {
        xi.clone()
    } else {
        xi.resample(grid.h)?
    };
    let cells = grid.x_cells();
    if m.cells() != cells {
        let cdf: Vec<f64> = (0..=cells)
            .map(|k| m.cdf_at(k as f64 * grid.h))
            .collect::<Result<_>>()?;
        let tail_mass = (m.total_mass() - cdf[cells]).max(0.0);
        let tail = if tail_mass == 0.0 {
            Tail::Empty
        } else {
            m.tail().clone()
        };
        m = GridMeasure::from_parts(grid.h, cdf, tail_mass, tail);
    }
    Ok(m)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∫_{(a,∞)} (z - shift)^k ζ(dz)` from the partial moments of `ν`.
fn shifted_nu_moment(d: &ServiceDistribution, a: f64, shift: f64, k: u32) -> f64 {
    let mut total = 0.0;
    for j in 0..=k {
        match d.partial_moment(a, j as f64) {
            Moment::Finite(v) => total += binomial(k, j) * (-shift).powi((k - j) as i32) * v,
            Moment::Infinite => return f64::INFINITY,
        }
    }
    total.max(0.0)
}

/// `∫_{(a,∞)} (z - shift)^k ξ(dz)` for a grid measure.
fn shifted_xi_moment(xi: &GridMeasure, a: f64, shift: f64, k: u32) -> Result<f64> {
    let h = xi.h();
    let kk = k as f64;
    let mut acc = 0.0;
    let first = (a / h).floor().max(0.0) as usize;
    let nodes = xi.cdf_nodes();
    for c in first..xi.cells() {
        let m = nodes[c + 1] - nodes[c];
        if m <= 0.0 {
            continue;
        }
        let lo = (c as f64 * h).max(a);
        let hi = (c + 1) as f64 * h;
        if hi <= lo {
            continue;
        }
        acc += m / h * ((hi - shift).powf(kk + 1.0) - (lo - shift).powf(kk + 1.0)) / (kk + 1.0);
    }
    if xi.tail_mass() > 0.0 {
        let lo = a.max(xi.x_max());
        acc += match xi.tail() {
            Tail::Shape(s) => match s.shifted_partial_moment(lo, shift, k) {
                Moment::Finite(v) => v,
                Moment::Infinite => f64::INFINITY,
            },
            _ => xi.tail_moment_bounds(kk)?.1,
        };
    }
    Ok(acc)
}

impl FluidSolution {
    pub fn xi(&self) -> &GridMeasure {
        &self.xi
    }

    pub fn dist(&self) -> &ServiceDistribution {
        &self.dist
    }

    pub fn grid(&self) -> &GridParams {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `⟨χ, ξ⟩`.
    pub fn workload(&self) -> f64 {
        self.workload
    }

    pub fn is_degenerate(&self) -> bool {
        self.tables.is_none()
    }

    pub fn renewal(&self) -> Option<&RenewalFunction> {
        self.tables.as_ref().map(|t| &t.renewal)
    }

    pub fn tbar(&self) -> Option<&GridFunction> {
        self.tables.as_ref().map(|t| &t.tbar)
    }

    pub fn tbar_prime(&self) -> Option<&GridFunction> {
        self.tables.as_ref().map(|t| &t.tbar_prime)
    }

    pub fn extrapolate(&self) -> bool {
        self.extrapolate
    }

    /// Enables linear continuation of `T̄` with slope `κ` beyond the grid.
    pub fn with_extrapolation(mut self, on: bool) -> Self {
        self.extrapolate = on;
        self
    }

    /// Largest time covered by the tables, `T̄(u_max)`.
    pub fn t_max(&self) -> f64 {
        match &self.tables {
            None => f64::INFINITY,
            Some(t) => *t.tbar.values.last().unwrap(),
        }
    }

    fn tables(&self) -> Result<&Tables> {
        self.tables
            .as_ref()
            .ok_or(Error::DegenerateSolution("zero initial state"))
    }

    /// `T̄(u)`.
    pub fn t_bar(&self, u: f64) -> Result<f64> {
        let tb = &self.tables()?.tbar;
        match tb.at(u) {
            Some(v) => Ok(v),
            None if self.extrapolate && u > tb.extent() && self.kappa > 0.0 => {
                Ok(tb.values.last().unwrap() + self.kappa * (u - tb.extent()))
            }
            None => Err(Error::OutOfRange {
                what: "u",
                value: u,
                limit: tb.extent(),
            }),
        }
    }

    /// `S̄(t) = T̄⁻¹(t)` by monotone interpolation.
    pub fn s_bar(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let tb = &self.tables()?.tbar;
        let v = &tb.values;
        let last = *v.last().unwrap();
        if t > last {
            if self.extrapolate && self.kappa > 0.0 {
                return Ok(tb.extent() + (t - last) / self.kappa);
            }
            return Err(Error::BeyondGrid { t, limit: last });
        }
        let i = v.partition_point(|&x| x < t).max(1);
        let w = (t - v[i - 1]) / (v[i] - v[i - 1]);
        Ok(((i - 1) as f64 + w) * tb.h)
    }

    /// `Z̄(t) = T̄'(S̄(t))`.
    pub fn z_bar(&self, t: f64) -> Result<f64> {
        if self.tables.is_none() {
            return Ok(0.0);
        }
        let u = self.s_bar(t)?;
        let tp = &self.tables()?.tbar_prime;
        match tp.at(u) {
            Some(v) => Ok(v),
            // only reachable with extrapolation: T̄' → κ
            None => Ok(self.kappa),
        }
    }

    /// State at grid node `u = kh`.
    fn node_state(&self, k: usize) -> Result<NodeState> {
        let tab = self.tables()?;
        let h = self.grid.h;
        let nx = self.grid.x_cells();
        let q = &tab.tbar_prime.values[..=k];
        // b[j] = ∫_0^{kh} f_e(jh + y) T̄'(kh - y) dy with T̄' linear between
        // nodes and f_e integrated exactly against each hat
        let b: Vec<f64> = if k == 0 {
            vec![0.0; nx + 1]
        } else {
            let mut inner = q.to_vec();
            inner[0] = 0.0;
            inner[k] = 0.0;
            let conv = convolve(&tab.hat[..k + nx], &inner);
            (0..=nx)
                .map(|j| conv[j + k] + q[k] * tab.fall[j + 1] + q[0] * tab.rise[j + k])
                .collect()
        };
        // trapezoid weights in y for the tail moments
        let wq: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 || i == k { 0.5 * v } else { *v })
            .collect();
        let u = k as f64 * h;
        let base = self.xi.cdf_at(u)?;
        let mut cdf = Vec::with_capacity(nx + 1);
        let mut run = 0.0_f64;
        for j in 0..=nx {
            let part1 = self.xi.cdf_at(u + j as f64 * h)? - base;
            let v = (part1 + b[0] - b[j]).max(run);
            run = v;
            cdf.push(v);
        }
        cdf[0] = 0.0;
        let x_max = nx as f64 * h;
        let xi_tail = self.xi.tail_mass_at(u + x_max)?;
        let tail_mass = (xi_tail + b[nx]).max(0.0);

        let mut entries = Vec::new();
        if tail_mass > 0.0 {
            let alpha = self.dist.alpha();
            for &g in &EXACT_ORDERS[1..] {
                let part1 = shifted_xi_moment(&self.xi, u + x_max, u, g)?;
                let mut part2 = 0.0;
                if k > 0 {
                    for (i, wqi) in wq.iter().rev().enumerate() {
                        // wq reversed: index i ↔ y = ih, weight T̄'(u - y)
                        let y = i as f64 * h;
                        let psi = shifted_nu_moment(&self.dist, x_max + y, y, g);
                        if psi == 0.0 {
                            continue;
                        }
                        part2 += wqi * psi;
                        if !part2.is_finite() {
                            break;
                        }
                    }
                    part2 *= alpha * h;
                }
                let value = part1 + part2;
                // one cell of quadrature slack on top of the value
                let upper = value * (1.0 + 1e-6) + 1e-15;
                entries.push(TailEntry {
                    gamma: g as f64,
                    value,
                    upper: if value.is_finite() { upper } else { f64::INFINITY },
                });
            }
            let t_here = tab.tbar.values[k];
            for &g in &BOUND_ORDERS {
                let xi_part = self.xi.upper_partial_moment(u + x_max, g).unwrap_or(f64::INFINITY);
                let nu_part = match self.dist.partial_moment(x_max, g) {
                    Moment::Finite(v) => alpha * t_here * v,
                    Moment::Infinite => f64::INFINITY,
                };
                let upper = xi_part + nu_part;
                let lower = tail_mass * x_max.powf(g);
                entries.push(TailEntry {
                    gamma: g,
                    value: if upper.is_finite() {
                        0.5 * (lower + upper)
                    } else {
                        f64::INFINITY
                    },
                    upper,
                });
            }
        }
        Ok(NodeState {
            cdf,
            tail_mass,
            entries,
        })
    }

    /// `μ̄_ξ(t)` on the spatial grid.
    pub fn measure_at(&self, t: f64) -> Result<GridMeasure> {
        let h = self.grid.h;
        if self.tables.is_none() {
            return Ok(GridMeasure::zero(h, self.grid.x_max));
        }
        let u = self.s_bar(t)?;
        let n = self.grid.u_cells();
        if u > n as f64 * h * (1.0 + 1e-12) {
            return Err(Error::BeyondGrid { t, limit: self.t_max() });
        }
        let pos = (u / h).min(n as f64);
        let k = (pos.floor() as usize).min(n);
        let w = pos - k as f64;
        let a = self.node_state(k)?;
        let s = if w > 1e-12 && k < n {
            let b = self.node_state(k + 1)?;
            blend(a, b, w)
        } else {
            a
        };
        let tail = if s.tail_mass == 0.0 {
            Tail::Empty
        } else {
            Tail::Table(s.entries)
        };
        Ok(GridMeasure::from_parts(h, s.cdf, s.tail_mass, tail))
    }

    /// `⟨g, μ̄(t)⟩ - ⟨g, ξ⟩ + ∫_0^t ⟨g', μ̄(s)⟩/⟨1, μ̄(s)⟩ ds - αt⟨g, ν⟩`.
    pub fn dynamic_residual(&self, g: &TestFunction, t: f64) -> Result<f64> {
        Ok(self.dynamic_residuals(std::slice::from_ref(g), &[t])?[0][0])
    }

    /// Residuals for several test functions and times; one pass over the
    /// time grid `0, h, 2h, …` serves all of them. Result is indexed
    /// `[time][function]`.
    pub fn dynamic_residuals(&self, gs: &[TestFunction], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        if self.tables.is_none() {
            return Err(Error::DegenerateSolution("zero initial state"));
        }
        let h = self.grid.h;
        let t_end = ts.iter().cloned().fold(0.0, f64::max);
        let steps = (t_end / h).ceil() as usize;
        let alpha = self.dist.alpha();
        let g_nu: Vec<f64> = gs.iter().map(|g| self.dist.expect(|x| g.eval(x), 1e-12)).collect();
        let g_xi: Vec<f64> = gs.iter().map(|g| self.xi.integrate(|x| g.eval(x))).collect();
        // drift integrand at each time node
        let mut drift = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let s = (j as f64 * h).min(t_end);
            let m = self.measure_at(s)?;
            let z = self.z_bar(s)?;
            drift.push(
                gs.iter()
                    .map(|g| m.integrate(|x| g.eval_prime(x)) / z)
                    .collect::<Vec<_>>(),
            );
        }
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            if t < 0.0 {
                return Err(Error::InvalidArgument(format!("negative time {t}")));
            }
            let m = self.measure_at(t)?;
            let full = (t / h).floor() as usize;
            let frac = t - full as f64 * h;
            let mut row = Vec::with_capacity(gs.len());
            for (i, g) in gs.iter().enumerate() {
                let mut integral = 0.0;
                for j in 0..full {
                    integral += 0.5 * h * (drift[j][i] + drift[j + 1][i]);
                }
                if frac > 1e-12 {
                    let m_t = m.integrate(|x| g.eval_prime(x)) / self.z_bar(t)?;
                    integral += 0.5 * frac * (drift[full][i] + m_t);
                }
                let g_t = m.integrate(|x| g.eval(x));
                row.push(g_t - g_xi[i] + integral - alpha * t * g_nu[i]);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// `κ ν_e`: the weak limit as `t → ∞` (zero when `β_e = 0`).
    pub fn limit_state(&self) -> Result<GridMeasure> {
        scaled_excess(&self.dist, self.kappa, &self.grid)
    }

    /// `∫_r^{u_max} |T̄'(u) - κ| du` by the trapezoid rule.
    pub fn stationarity_gap(&self, r: f64) -> Result<StationarityGap> {
        let u_max = self.grid.u_cells() as f64 * self.grid.h;
        let Some(tab) = &self.tables else {
            return Ok(StationarityGap {
                value: 0.0,
                truncated_at: u_max,
            });
        };
        if !(r >= 0.0) || r > u_max * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                what: "r",
                value: r,
                limit: u_max,
            });
        }
        let h = tab.tbar_prime.h;
        let d: Vec<f64> = tab.tbar_prime.values.iter().map(|v| (v - self.kappa).abs()).collect();
        let pos = r / h;
        let k0 = (pos.ceil() as usize).min(d.len() - 1);
        let mut value = 0.0;
        for k in k0..d.len() - 1 {
            value += 0.5 * h * (d[k] + d[k + 1]);
        }
        let lead = k0 as f64 * h - r;
        if lead > 0.0 {
            let dr = tab.tbar_prime.at(r).map(|v| (v - self.kappa).abs()).unwrap_or(d[k0]);
            value += 0.5 * lead * (dr + d[k0]);
        }
        Ok(StationarityGap {
            value,
            truncated_at: u_max,
        })
    }
}

fn blend(a: NodeState, b: NodeState, w: f64) -> NodeState {
    let cdf = a.cdf.iter().zip(&b.cdf).map(|(x, y)| (1.0 - w) * x + w * y).collect();
    let tail_mass = (1.0 - w) * a.tail_mass + w * b.tail_mass;
    let entries = if a.entries.is_empty() {
        b.entries.iter().map(|e| scale_entry(e, w)).collect()
    } else if b.entries.is_empty() {
        a.entries.iter().map(|e| scale_entry(e, 1.0 - w)).collect()
    } else {
        a.entries
            .iter()
            .zip(&b.entries)
            .map(|(x, y)| TailEntry {
                gamma: x.gamma,
                value: (1.0 - w) * x.value + w * y.value,
                upper: (1.0 - w) * x.upper + w * y.upper,
            })
            .collect()
    };
    NodeState {
        cdf,
        tail_mass,
        entries,
    }
}

fn scale_entry(e: &TailEntry, c: f64) -> TailEntry {
    TailEntry {
        gamma: e.gamma,
        value: c * e.value,
        upper: c * e.upper,
    }
}
