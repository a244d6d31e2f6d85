//! Atomless finite measures on `R+` stored as piecewise-linear CDFs on a
//! uniform grid, with explicit accounting for the mass beyond `x_max`.

use std::str::FromStr;

use rand::Rng;

use crate::distributions::{pow_int, upper_gamma, Moment, ServiceDistribution};
use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::spec::{read_xy_csv, Spec};

/// Closed-form measures that can be evaluated anywhere on `R+`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureShape {
    Zero,
    /// `mass` spread uniformly on `[a, b]`.
    UniformDensity {
        a: f64,
        b: f64,
        mass: f64,
    },
    /// `mass · rate · e^{-rate x}`.
    ExpDensity {
        rate: f64,
        mass: f64,
    },
    /// `mass · p xm^p x^{-p-1}` on `[xm, ∞)`.
    ParetoDensity {
        xm: f64,
        p: f64,
        mass: f64,
    },
    /// `c · ν_e`.
    ScaledExcess {
        c: f64,
        dist: ServiceDistribution,
    },
}

impl MeasureShape {
    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureShape::Zero => 0.0,
            MeasureShape::UniformDensity { mass, .. }
            | MeasureShape::ExpDensity { mass, .. }
            | MeasureShape::ParetoDensity { mass, .. } => *mass,
            MeasureShape::ScaledExcess { c, .. } => *c,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            MeasureShape::Zero => 0.0,
            MeasureShape::UniformDensity { a, b, mass } => mass * ((x - a) / (b - a)).clamp(0.0, 1.0),
            MeasureShape::ExpDensity { rate, mass } => -mass * (-rate * x).exp_m1(),
            MeasureShape::ParetoDensity { xm, p, mass } => {
                if x <= *xm {
                    0.0
                } else {
                    mass * (1.0 - (xm / x).powf(*p))
                }
            }
            MeasureShape::ScaledExcess { c, dist } => c * dist.excess_cdf(x),
        }
    }

    /// `ζ((x, ∞))`.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            MeasureShape::ExpDensity { rate, mass } => mass * (-rate * x.max(0.0)).exp(),
            MeasureShape::ParetoDensity { xm, p, mass } => {
                if x <= *xm {
                    *mass
                } else {
                    mass * (xm / x).powf(*p)
                }
            }
            MeasureShape::ScaledExcess { c, dist } => c * dist.excess_survival(x),
            _ => self.total_mass() - self.cdf(x),
        }
    }

    /// `∫_{(x0,∞)} x^γ ζ(dx)`.
    pub fn partial_moment(&self, x0: f64, gamma_: f64) -> Moment {
        let x0 = x0.max(0.0);
        match self {
            MeasureShape::Zero => Moment::Finite(0.0),
            MeasureShape::UniformDensity { a, b, mass } => {
                Moment::Finite(mass * pow_int(x0.max(*a), *b, gamma_) / (b - a))
            }
            MeasureShape::ExpDensity { rate, mass } => {
                Moment::Finite(mass * upper_gamma(gamma_ + 1.0, rate * x0) / rate.powf(gamma_))
            }
            MeasureShape::ParetoDensity { xm, p, mass } => {
                if gamma_ >= *p {
                    Moment::Infinite
                } else {
                    let lo = x0.max(*xm);
                    Moment::Finite(mass * p * xm.powf(*p) * lo.powf(gamma_ - p) / (p - gamma_))
                }
            }
            MeasureShape::ScaledExcess { c, dist } => match dist.excess_partial_moment(x0, gamma_) {
                Moment::Finite(v) => Moment::Finite(c * v),
                Moment::Infinite if *c == 0.0 => Moment::Finite(0.0),
                Moment::Infinite => Moment::Infinite,
            },
        }
    }

    /// `∫_{(x0,∞)} (x - shift)^k ζ(dx)` for small integer `k`, by binomial
    /// expansion of the partial moments.
    pub fn shifted_partial_moment(&self, x0: f64, shift: f64, k: u32) -> Moment {
        let mut total = 0.0;
        for j in 0..=k {
            let binom = binomial(k, j);
            match self.partial_moment(x0, j as f64) {
                Moment::Finite(v) => total += binom * (-shift).powi((k - j) as i32) * v,
                Moment::Infinite => return Moment::Infinite,
            }
        }
        Moment::Finite(total.max(0.0))
    }

    /// One draw from `ζ / ⟨1, ζ⟩`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            MeasureShape::Zero => 0.0,
            MeasureShape::UniformDensity { a, b, .. } => a + u * (b - a),
            MeasureShape::ExpDensity { rate, .. } => -(-u).ln_1p() / rate,
            MeasureShape::ParetoDensity { xm, p, .. } => xm * (1.0 - u).powf(-1.0 / p),
            MeasureShape::ScaledExcess { dist, .. } => dist.excess_quantile(u),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sampled bounds on a tail moment `∫_{(x_max,∞)} x^γ dζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEntry {
    pub gamma: f64,
    /// Best available value.
    pub value: f64,
    /// Certified upper bound (may be `INFINITY`).
    pub upper: f64,
}

/// What is known about the measure beyond the end of its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    /// No mass beyond `x_max`.
    Empty,
    /// The measure is a closed form; the tail is exact.
    Shape(MeasureShape),
    /// Numerically produced measure: tail moments at selected orders.
    Table(Vec<TailEntry>),
}

/// A moment with its certified error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub error: f64,
}

impl MomentEstimate {
    pub fn upper(&self) -> f64 {
        self.value + self.error
    }
}

/// Which moment ball to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ball {
    Rho,
    Tv,
}

/// A finite atomless measure: CDF values at `0, h, …, x_max`, linear between
/// nodes, plus the mass beyond `x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    h: f64,
    cdf: Vec<f64>,
    tail_mass: f64,
    tail: Tail,
}

impl GridMeasure {
    pub fn zero(h: f64, x_max: f64) -> Self {
        let n = (x_max / h).round().max(1.0) as usize;
        Self {
            h,
            cdf: vec![0.0; n + 1],
            tail_mass: 0.0,
            tail: Tail::Empty,
        }
    }

    pub fn from_shape(shape: MeasureShape, grid: &GridParams) -> Result<Self> {
        validate_shape(&shape)?;
        let n = grid.x_cells();
        let h = grid.h;
        let cdf: Vec<f64> = (0..=n).map(|k| shape.cdf(k as f64 * h)).collect();
        let tail_mass = shape.survival(n as f64 * h).max(0.0);
        let tail = if matches!(shape, MeasureShape::Zero) || tail_mass == 0.0 {
            Tail::Empty
        } else {
            Tail::Shape(shape)
        };
        Ok(Self {
            h,
            cdf,
            tail_mass,
            tail,
        })
    }

    /// Builds a measure from nodal CDF values; `tail` describes what lies
    /// beyond the last node. Tiny monotonicity violations (rounding) are
    /// removed by a running maximum.
    pub fn from_nodes(h: f64, mut cdf: Vec<f64>, tail_mass: f64, tail: Tail) -> Result<Self> {
        if cdf.len() < 2 {
            return Err(Error::InvalidArgument("measure needs at least two nodes".into()));
        }
        if cdf[0].abs() > 1e-12 {
            return Err(Error::AtomInSpec(0.0));
        }
        cdf[0] = 0.0;
        let mut run = 0.0_f64;
        for c in cdf.iter_mut() {
            if *c < run - 1e-9 * (1.0 + run) {
                return Err(Error::NegativeMass(*c - run));
            }
            run = run.max(*c);
            *c = run;
        }
        if !(tail_mass >= 0.0) {
            return Err(Error::NegativeMass(tail_mass));
        }
        Ok(Self {
            h,
            cdf,
            tail_mass,
            tail,
        })
    }

    /// Measure with the given mass in each cell `[kh, (k+1)h]`.
    pub fn from_cell_masses(h: f64, masses: &[f64]) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0)) {
            return Err(Error::NegativeMass(*m));
        }
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for m in masses {
            acc += m;
            cdf.push(acc);
        }
        Self::from_nodes(h, cdf, 0.0, Tail::Empty)
    }

    /// Reads a two-column `x,CDF` file (strictly increasing `x`, first row
    /// `0,0`) and interpolates it onto the grid. The CDF is held constant
    /// after the last row; rows beyond `x_max` are refused.
    pub fn from_csv(path: &str, grid: &GridParams) -> Result<Self> {
        let (xs, fs) = read_xy_csv(path)?;
        if xs.len() < 2 {
            return Err(Error::MalformedSpec {
                spec: path.into(),
                reason: "need at least two rows".into(),
            });
        }
        if xs[0] != 0.0 {
            return Err(Error::MalformedSpec {
                spec: path.into(),
                reason: "first row must be 0,0".into(),
            });
        }
        if fs[0] != 0.0 {
            return Err(Error::AtomInSpec(0.0));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedSpec {
                spec: path.into(),
                reason: "x must be strictly increasing".into(),
            });
        }
        if let Some(w) = fs.windows(2).find(|w| w[1] < w[0]) {
            return Err(Error::NegativeMass(w[1] - w[0]));
        }
        if fs.iter().any(|f| !f.is_finite()) {
            return Err(Error::InfiniteMass);
        }
        let last_x = *xs.last().unwrap();
        if last_x > grid.x_max + 1e-9 {
            return Err(Error::OutOfRange {
                what: "csv x",
                value: last_x,
                limit: grid.x_max,
            });
        }
        let n = grid.x_cells();
        let cdf = (0..=n)
            .map(|k| {
                let x = k as f64 * grid.h;
                if x >= last_x {
                    return *fs.last().unwrap();
                }
                let i = xs.partition_point(|&v| v <= x) - 1;
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                fs[i] + w * (fs[i + 1] - fs[i])
            })
            .collect();
        Self::from_nodes(grid.h, cdf, 0.0, Tail::Empty)
    }

    pub(crate) fn from_parts(h: f64, cdf: Vec<f64>, tail_mass: f64, tail: Tail) -> Self {
        Self {
            h,
            cdf,
            tail_mass,
            tail,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.cdf.len() - 1
    }

    pub fn x_max(&self) -> f64 {
        self.cells() as f64 * self.h
    }

    pub fn cdf_nodes(&self) -> &[f64] {
        &self.cdf
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn shape(&self) -> Option<&MeasureShape> {
        match &self.tail {
            Tail::Shape(s) => Some(s),
            _ => None,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cdf[self.cells()] + self.tail_mass
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// `∫ f dζ` with two-point Gauss per cell; the tail contributes
    /// `f(x_max)` per unit of mass beyond the grid.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let off = 0.5 / 3f64.sqrt();
        let h = self.h;
        let mut acc = 0.0;
        for (k, w) in self.cdf.windows(2).enumerate() {
            let m = w[1] - w[0];
            if m == 0.0 {
                continue;
            }
            let c = (k as f64 + 0.5) * h;
            acc += 0.5 * m * (f(c - off * h) + f(c + off * h));
        }
        acc + self.tail_mass * f(self.x_max())
    }

    /// Mass of each grid cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect()
    }

    /// `ζ([0, x])`. Beyond the grid this needs a closed-form or empty tail.
    pub fn cdf_at(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let xm = self.x_max();
        if x <= xm {
            let pos = x / self.h;
            let k = (pos.floor() as usize).min(self.cells() - 1);
            let w = pos - k as f64;
            return Ok(self.cdf[k] * (1.0 - w) + self.cdf[k + 1] * w);
        }
        match &self.tail {
            Tail::Empty => Ok(self.cdf[self.cells()]),
            Tail::Shape(s) => Ok(self.total_mass() - s.survival(x).min(self.tail_mass)),
            Tail::Table(_) if self.tail_mass == 0.0 => Ok(self.cdf[self.cells()]),
            Tail::Table(_) => Err(Error::OutOfRange {
                what: "x (numerical tail)",
                value: x,
                limit: xm,
            }),
        }
    }

    /// `H'_ζ(x) = ζ((x, ∞))`.
    pub fn tail_mass_at(&self, x: f64) -> Result<f64> {
        Ok((self.total_mass() - self.cdf_at(x)?).max(0.0))
    }

    /// `H_ζ(x) = ∫_0^x ζ((y,∞)) dy = ⟨χ ∧ x, ζ⟩`.
    pub fn truncated_workload(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let total = self.total_mass();
        let xm = self.x_max();
        let inside = x.min(xm);
        // exact integral of the piecewise-linear survival function
        let pos = inside / self.h;
        let k_full = (pos.floor() as usize).min(self.cells());
        let mut acc = 0.0;
        for k in 0..k_full {
            acc += self.h * (total - 0.5 * (self.cdf[k] + self.cdf[k + 1]));
        }
        if k_full < self.cells() {
            let a = k_full as f64 * self.h;
            let sa = total - self.cdf[k_full];
            let sb = total - self.cdf_at(inside)?;
            acc += (inside - a) * 0.5 * (sa + sb);
        }
        if x > xm {
            acc += match &self.tail {
                Tail::Empty => 0.0,
                _ if self.tail_mass == 0.0 => 0.0,
                Tail::Shape(s) => {
                    // ∫_{xm}^x ζ((y,∞)) dy = ⟨(χ∧x - xm)^+, ζ⟩
                    let beyond_x = if x.is_finite() { s.survival(x) } else { 0.0 };
                    let m1 = |lo: f64| s.partial_moment(lo, 1.0).value().unwrap_or(f64::INFINITY);
                    let between = if x.is_finite() { m1(xm) - m1(x) } else { m1(xm) };
                    let mass_between = self.tail_mass - beyond_x;
                    between - xm * mass_between + (x - xm) * beyond_x
                }
                Tail::Table(_) => {
                    return Err(Error::OutOfRange {
                        what: "x (numerical tail)",
                        value: x,
                        limit: xm,
                    })
                }
            };
        }
        Ok(acc)
    }

    /// Lower and upper bound on `∫_{(x_max,∞)} x^γ dζ`.
    pub fn tail_moment_bounds(&self, gamma_: f64) -> Result<(f64, f64)> {
        let xm = self.x_max();
        let lower = self.tail_mass * xm.powf(gamma_);
        if self.tail_mass == 0.0 {
            return Ok((0.0, 0.0));
        }
        match &self.tail {
            Tail::Empty => Ok((0.0, 0.0)),
            Tail::Shape(s) => match s.partial_moment(xm, gamma_) {
                Moment::Finite(v) => Ok((v, v)),
                Moment::Infinite => Ok((lower, f64::INFINITY)),
            },
            Tail::Table(entries) => {
                if gamma_ == 0.0 {
                    return Ok((self.tail_mass, self.tail_mass));
                }
                // x^γ ≤ x^{γ'} x_max^{γ-γ'} for x ≥ x_max and γ' ≥ γ
                let best = entries
                    .iter()
                    .filter(|e| e.gamma >= gamma_ - 1e-12)
                    .map(|e| {
                        let scale = xm.powf(gamma_ - e.gamma);
                        if (e.gamma - gamma_).abs() <= 1e-12 {
                            (e.value, e.upper)
                        } else {
                            (e.value * scale, e.upper * scale)
                        }
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
                match best {
                    Some((v, u)) => Ok((v.max(lower), u.max(lower))),
                    None => Err(Error::TailBoundMissing(gamma_)),
                }
            }
        }
    }

    /// Best estimate of the tail moment (exact for shapes and for table
    /// entries at the requested order).
    fn tail_moment_value(&self, gamma_: f64) -> Result<(f64, f64, f64)> {
        let (lo, up) = self.tail_moment_bounds(gamma_)?;
        let exact = match &self.tail {
            Tail::Table(entries) => entries
                .iter()
                .find(|e| (e.gamma - gamma_).abs() <= 1e-12)
                .map(|e| e.value),
            _ => None,
        };
        let v = exact.unwrap_or(if up.is_finite() { 0.5 * (lo + up) } else { lo });
        Ok((lo, v, up))
    }

    /// `⟨χ^γ, ζ⟩` with a certified error: the grid part is exact for the
    /// stored piecewise-linear measure and within `Σ m_k (b_k^γ - a_k^γ)` of
    /// any measure with the same cell masses.
    pub fn mass_and_moment(&self, gamma_: f64) -> Result<MomentEstimate> {
        if !(gamma_ >= 0.0) {
            return Err(Error::InvalidArgument(format!("moment order {gamma_}")));
        }
        let h = self.h;
        let mut value = 0.0;
        let mut error = 0.0;
        for (k, m) in self.cell_masses().into_iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let a = k as f64 * h;
            let b = a + h;
            value += m * pow_int(a, b, gamma_) / h;
            error += m * (b.powf(gamma_) - a.powf(gamma_));
        }
        let (lo, v, up) = self.tail_moment_value(gamma_)?;
        if !up.is_finite() {
            return Ok(MomentEstimate {
                value: f64::INFINITY,
                error: f64::INFINITY,
            });
        }
        value += v;
        error += (up - v).max(v - lo);
        Ok(MomentEstimate { value, error })
    }

    /// `∫_{(x0,∞)} x^γ dζ`, upper bound.
    pub fn upper_partial_moment(&self, x0: f64, gamma_: f64) -> Result<f64> {
        let h = self.h;
        let mut acc = 0.0;
        for (k, m) in self.cell_masses().into_iter().enumerate() {
            let b = (k + 1) as f64 * h;
            if b <= x0 {
                continue;
            }
            acc += m * b.powf(gamma_);
        }
        let (_, up) = self.tail_moment_bounds(gamma_)?;
        Ok(acc + up)
    }

    /// Membership in the moment ball `B_ρ^{M,ε}` or `B_TV^{M,ε}` using
    /// value plus certified error.
    pub fn in_moment_ball(&self, m_bound: f64, eps: f64, which: Ball) -> Result<bool> {
        let mut orders = vec![0.0, 1.0, 1.0 + eps];
        if which == Ball::Tv {
            orders.extend([2.0, 2.0 + eps]);
        }
        for g in orders {
            let est = self.mass_and_moment(g)?;
            if !(est.upper() <= m_bound) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One draw from `ζ/⟨1,ζ⟩`: exact for closed forms, inverse of the
    /// piecewise-linear CDF otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if let Tail::Shape(s) = &self.tail {
            return Ok(s.sample(rng));
        }
        if self.tail_mass > 0.0 {
            return Err(Error::OutOfRange {
                what: "sample (numerical tail)",
                value: self.tail_mass,
                limit: 0.0,
            });
        }
        let total = self.total_mass();
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cells());
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        Ok(((i - 1) as f64 + w) * self.h)
    }

    /// Scales every mass by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> GridMeasure {
        let tail = match &self.tail {
            Tail::Empty => Tail::Empty,
            Tail::Shape(s) => Tail::Shape(scale_shape(s, c)),
            Tail::Table(e) => Tail::Table(
                e.iter()
                    .map(|t| TailEntry {
                        gamma: t.gamma,
                        value: c * t.value,
                        upper: c * t.upper,
                    })
                    .collect(),
            ),
        };
        GridMeasure {
            h: self.h,
            cdf: self.cdf.iter().map(|v| c * v).collect(),
            tail_mass: c * self.tail_mass,
            tail,
        }
    }

    /// Re-expresses the measure on step `h_new` (an integer divisor of the
    /// current step) by linear interpolation of the CDF.
    pub fn resample(&self, h_new: f64) -> Result<GridMeasure> {
        let ratio = self.h / h_new;
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * r {
            return Err(Error::GridResampleFailure {
                from: self.h,
                to: h_new,
            });
        }
        let r = r as usize;
        if r == 1 {
            return Ok(self.clone());
        }
        let mut cdf = Vec::with_capacity(self.cells() * r + 1);
        for k in 0..self.cells() {
            for j in 0..r {
                let w = j as f64 / r as f64;
                cdf.push(self.cdf[k] * (1.0 - w) + self.cdf[k + 1] * w);
            }
        }
        cdf.push(self.cdf[self.cells()]);
        Ok(GridMeasure {
            h: h_new,
            cdf,
            tail_mass: self.tail_mass,
            tail: self.tail.clone(),
        })
    }
}

fn scale_shape(s: &MeasureShape, c: f64) -> MeasureShape {
    match s.clone() {
        MeasureShape::Zero => MeasureShape::Zero,
        MeasureShape::UniformDensity { a, b, mass } => MeasureShape::UniformDensity { a, b, mass: c * mass },
        MeasureShape::ExpDensity { rate, mass } => MeasureShape::ExpDensity { rate, mass: c * mass },
        MeasureShape::ParetoDensity { xm, p, mass } => MeasureShape::ParetoDensity { xm, p, mass: c * mass },
        MeasureShape::ScaledExcess { c: c0, dist } => MeasureShape::ScaledExcess { c: c * c0, dist },
    }
}

fn validate_shape(s: &MeasureShape) -> Result<()> {
    let mass = s.total_mass();
    if mass.is_infinite() {
        return Err(Error::InfiniteMass);
    }
    if !(mass >= 0.0) {
        return Err(Error::NegativeMass(mass));
    }
    match s {
        MeasureShape::UniformDensity { a, b, mass } => {
            if !(*a >= 0.0 && b >= a && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("uniform density on [{a}, {b}]")));
            }
            if a == b && *mass > 0.0 {
                return Err(Error::AtomInSpec(*a));
            }
        }
        MeasureShape::ExpDensity { rate, .. } => {
            if !(*rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidArgument(format!("exp density rate {rate}")));
            }
        }
        MeasureShape::ParetoDensity { xm, p, .. } if !(*xm > 0.0 && *p > 0.0) => {
            return Err(Error::InvalidArgument(format!("pareto density xm={xm}, p={p}")));
        }
        _ => {}
    }
    Ok(())
}

/// Parsed measure spec (`uniformdensity:a=0,b=2,mass=1`, `scaledexcess:c=1`,
/// `expdensity:rate=1,mass=1`, `paretodensity:xm=1,p=2.5,mass=1`, `zero`,
/// `csv:path`).
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Zero,
    UniformDensity { a: f64, b: f64, mass: f64 },
    ExpDensity { rate: f64, mass: f64 },
    ParetoDensity { xm: f64, p: f64, mass: f64 },
    ScaledExcess { c: f64 },
    Csv { path: String },
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("csv:") {
            let path = rest.strip_prefix("path=").unwrap_or(rest).trim();
            if path.is_empty() {
                return Err(Error::MalformedSpec {
                    spec: s.into(),
                    reason: "csv needs a path".into(),
                });
            }
            return Ok(MeasureSpec::Csv { path: path.into() });
        }
        let spec = Spec::parse(t)?;
        match spec.name.as_str() {
            "zero" => {
                spec.expect_keys(&[])?;
                Ok(MeasureSpec::Zero)
            }
            "uniformdensity" => {
                spec.expect_keys(&["a", "b", "mass"])?;
                Ok(MeasureSpec::UniformDensity {
                    a: spec.num("a")?,
                    b: spec.num("b")?,
                    mass: spec.num_or("mass", 1.0)?,
                })
            }
            "expdensity" => {
                spec.expect_keys(&["rate", "mass"])?;
                Ok(MeasureSpec::ExpDensity {
                    rate: spec.num("rate")?,
                    mass: spec.num_or("mass", 1.0)?,
                })
            }
            "paretodensity" => {
                spec.expect_keys(&["xm", "p", "mass"])?;
                Ok(MeasureSpec::ParetoDensity {
                    xm: spec.num("xm")?,
                    p: spec.num("p")?,
                    mass: spec.num_or("mass", 1.0)?,
                })
            }
            "scaledexcess" => {
                spec.expect_keys(&["c"])?;
                Ok(MeasureSpec::ScaledExcess { c: spec.num("c")? })
            }
            other => Err(spec.malformed(format!("unknown measure `{other}`"))),
        }
    }
}

/// Builds the grid measure described by `spec`. `dist` is needed only for
/// `scaledexcess`.
pub fn make_measure(spec: &MeasureSpec, dist: Option<&ServiceDistribution>, grid: &GridParams) -> Result<GridMeasure> {
    grid.validate()?;
    let shape = match spec {
        MeasureSpec::Zero => return Ok(GridMeasure::zero(grid.h, grid.x_max)),
        MeasureSpec::Csv { path } => return GridMeasure::from_csv(path, grid),
        MeasureSpec::UniformDensity { a, b, mass } => MeasureShape::UniformDensity {
            a: *a,
            b: *b,
            mass: *mass,
        },
        MeasureSpec::ExpDensity { rate, mass } => MeasureShape::ExpDensity {
            rate: *rate,
            mass: *mass,
        },
        MeasureSpec::ParetoDensity { xm, p, mass } => MeasureShape::ParetoDensity {
            xm: *xm,
            p: *p,
            mass: *mass,
        },
        MeasureSpec::ScaledExcess { c } => {
            let d = dist.ok_or_else(|| Error::InvalidArgument("scaledexcess needs a service distribution".into()))?;
            return scaled_excess(d, *c, grid);
        }
    };
    GridMeasure::from_shape(shape, grid)
}

/// The invariant state `c · ν_e`.
pub fn scaled_excess(d: &ServiceDistribution, c: f64, grid: &GridParams) -> Result<GridMeasure> {
    if !(c >= 0.0) {
        return Err(Error::NegativeMass(c));
    }
    if c == 0.0 {
        return Ok(GridMeasure::zero(grid.h, grid.x_max));
    }
    GridMeasure::from_shape(MeasureShape::ScaledExcess { c, dist: d.clone() }, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridParams {
        GridParams::default()
    }

    fn unif() -> GridMeasure {
        make_measure(&"uniformdensity:a=0,b=2,mass=1".parse().unwrap(), None, &grid()).unwrap()
    }

    #[test]
    fn make_measure_examples() {
        assert!((unif().cdf_at(1.0).unwrap() - 0.5).abs() < 1e-12);
        let z = make_measure(&MeasureSpec::Zero, None, &grid()).unwrap();
        assert_eq!(z.total_mass(), 0.0);
        let e = ServiceDistribution::exponential(1.0).unwrap();
        let s = make_measure(&"scaledexcess:c=2".parse().unwrap(), Some(&e), &grid()).unwrap();
        assert!((s.cdf_at(2f64.ln()).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn make_measure_errors() {
        let atom = MeasureSpec::UniformDensity {
            a: 1.0,
            b: 1.0,
            mass: 1.0,
        };
        assert_eq!(make_measure(&atom, None, &grid()).unwrap_err(), Error::AtomInSpec(1.0));
        let neg = MeasureSpec::UniformDensity {
            a: 0.0,
            b: 1.0,
            mass: -1.0,
        };
        assert!(matches!(
            make_measure(&neg, None, &grid()).unwrap_err(),
            Error::NegativeMass(_)
        ));
        let inf = MeasureSpec::ExpDensity {
            rate: 1.0,
            mass: f64::INFINITY,
        };
        assert_eq!(make_measure(&inf, None, &grid()).unwrap_err(), Error::InfiniteMass);
        assert!("gauss:mu=1".parse::<MeasureSpec>().is_err());
    }

    #[test]
    fn mass_and_moment_examples() {
        let u = unif();
        assert!((u.mass_and_moment(1.0).unwrap().value - 1.0).abs() < 1e-12);
        assert!((u.mass_and_moment(0.0).unwrap().value - 1.0).abs() < 1e-12);
        let m = u.mass_and_moment(1.5).unwrap();
        assert!((m.value - 2f64.powf(2.5) / 5.0).abs() < 1e-10);
        assert!(m.error > 0.0 && m.error < 0.05);
    }

    #[test]
    fn tail_bound_missing_for_numerical_tail() {
        let m = GridMeasure::from_nodes(
            0.5,
            vec![0.0, 0.1, 0.2],
            0.1,
            Tail::Table(vec![TailEntry {
                gamma: 1.0,
                value: 0.2,
                upper: 0.3,
            }]),
        )
        .unwrap();
        assert_eq!(m.mass_and_moment(2.0).unwrap_err(), Error::TailBoundMissing(2.0));
        // γ = 0.5 is derived from the γ = 1 entry
        let (lo, up) = m.tail_moment_bounds(0.5).unwrap();
        assert!(lo <= up && up <= 0.3);
    }

    #[test]
    fn truncated_workload_examples() {
        let u = unif();
        assert_eq!(u.truncated_workload(0.0).unwrap(), 0.0);
        assert!((u.truncated_workload(1.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((u.truncated_workload(10.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_mass_at_examples() {
        let u = unif();
        assert!((u.tail_mass_at(1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(u.tail_mass_at(3.0).unwrap().abs() < 1e-15);
        let e = ServiceDistribution::exponential(1.0).unwrap();
        let s = scaled_excess(&e, 2.0, &grid()).unwrap();
        assert!((s.tail_mass_at(0.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moment_ball_examples() {
        let u = unif();
        assert!(u.in_moment_ball(2.0, 0.5, Ball::Rho).unwrap());
        assert!(!u.in_moment_ball(1.1, 0.5, Ball::Rho).unwrap());
        let z = GridMeasure::zero(0.01, 50.0);
        assert!(z.in_moment_ball(1e-6, 0.5, Ball::Rho).unwrap());
        assert!(z.in_moment_ball(1e-6, 0.5, Ball::Tv).unwrap());
    }

    #[test]
    fn scaled_excess_examples() {
        let e = ServiceDistribution::exponential(1.0).unwrap();
        let s = scaled_excess(&e, 1.0, &grid()).unwrap();
        for &x in &[0.3, 1.0, 4.0] {
            assert!((s.cdf_at(x).unwrap() - (1.0 - (-x).exp())).abs() < 1e-5);
        }
        assert!(scaled_excess(&e, 0.0, &grid()).unwrap().is_zero());
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        let s = scaled_excess(&u, 3.0, &grid()).unwrap();
        assert!((s.cdf_at(1.0).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn scaled_excess_mass_and_first_moment() {
        for d in crate::distributions::builtin_families() {
            for &c in &[0.5, 1.0, 3.0] {
                let s = scaled_excess(&d, c, &GridParams::heavy_tailed()).unwrap();
                let m0 = s.mass_and_moment(0.0).unwrap();
                assert!((m0.value - c).abs() <= 1e-6 + m0.error);
                let m1 = s.mass_and_moment(1.0).unwrap();
                let exact = c * d.moment(1.0, crate::MomentOf::NuE).value().unwrap();
                assert!((m1.value - exact).abs() <= 1e-6 + m1.error, "{}", d.label());
            }
        }
    }

    #[test]
    fn round_trip_closed_form_moments() {
        let specs = [
            (
                "uniformdensity:a=0.5,b=3,mass=2",
                MeasureShape::UniformDensity {
                    a: 0.5,
                    b: 3.0,
                    mass: 2.0,
                },
            ),
            (
                "expdensity:rate=2,mass=1",
                MeasureShape::ExpDensity { rate: 2.0, mass: 1.0 },
            ),
            (
                "paretodensity:xm=1,p=2.5,mass=1",
                MeasureShape::ParetoDensity {
                    xm: 1.0,
                    p: 2.5,
                    mass: 1.0,
                },
            ),
        ];
        for (s, shape) in specs {
            let m = make_measure(&s.parse().unwrap(), None, &GridParams::heavy_tailed()).unwrap();
            for &g in &[0.0, 1.0, 1.5, 2.0] {
                let est = m.mass_and_moment(g).unwrap();
                let exact = shape.partial_moment(0.0, g).value().unwrap();
                assert!((est.value - exact).abs() <= est.error + 1e-12, "{s} gamma {g}");
            }
        }
    }

    #[test]
    fn heavy_tail_moment_is_infinite() {
        let m = make_measure(&"paretodensity:xm=1,p=1.5,mass=1".parse().unwrap(), None, &grid()).unwrap();
        assert!(m.mass_and_moment(1.0).unwrap().value.is_finite());
        assert!(m.mass_and_moment(2.0).unwrap().value.is_infinite());
        assert!(!m.in_moment_ball(100.0, 0.5, Ball::Rho).unwrap());
    }

    #[test]
    fn csv_measure_round_trip() {
        let dir = std::env::temp_dir().join(format!("fluidps-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.csv");
        std::fs::write(&p, "x,cdf\n0,0\n1,0.5\n2,1\n").unwrap();
        let m = GridMeasure::from_csv(p.to_str().unwrap(), &grid()).unwrap();
        assert!((m.cdf_at(0.5).unwrap() - 0.25).abs() < 1e-12);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        std::fs::write(&p, "0,0.1\n1,1\n").unwrap();
        assert_eq!(
            GridMeasure::from_csv(p.to_str().unwrap(), &grid()).unwrap_err(),
            Error::AtomInSpec(0.0)
        );
        std::fs::write(&p, "0,0\n60,1\n").unwrap();
        assert!(matches!(
            GridMeasure::from_csv(p.to_str().unwrap(), &grid()).unwrap_err(),
            Error::OutOfRange { .. }
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn resample_preserves_cdf() {
        let g = GridParams::new(0.02, 10.0, 10.0).unwrap();
        let m = make_measure(&"uniformdensity:a=0,b=2,mass=1".parse().unwrap(), None, &g).unwrap();
        let r = m.resample(0.01).unwrap();
        assert!((r.cdf_at(1.234).unwrap() - m.cdf_at(1.234).unwrap()).abs() < 1e-12);
        assert!(m.resample(0.015).is_err());
    }

    proptest! {
        #[test]
        fn workload_derivative_is_tail_mass(a in 0.0f64..3.0, w in 0.1f64..4.0, mass in 0.1f64..3.0, x in 0.05f64..8.0) {
            let g = grid();
            let m = GridMeasure::from_shape(MeasureShape::UniformDensity { a, b: a + w, mass }, &g).unwrap();
            let h = g.h;
            let d = (m.truncated_workload(x + h).unwrap() - m.truncated_workload(x - h).unwrap()) / (2.0 * h);
            prop_assert!((d - m.tail_mass_at(x).unwrap()).abs() <= 2.0 * h * m.total_mass());
        }

        #[test]
        fn workload_matches_survival_integral(rate in 0.3f64..3.0, mass in 0.1f64..3.0, x in 0.0f64..80.0) {
            let m = GridMeasure::from_shape(MeasureShape::ExpDensity { rate, mass }, &grid()).unwrap();
            // ∫_0^x mass e^{-rate y} dy
            let exact = -mass * (-rate * x).exp_m1() / rate;
            prop_assert!((m.truncated_workload(x).unwrap() - exact).abs() <= 1e-4 * mass);
        }
    }
}
