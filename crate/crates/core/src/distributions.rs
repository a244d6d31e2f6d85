//! Critical data `(α, ν)`: the service law `ν`, the arrival rate `α = 1/⟨χ,ν⟩`
//! and the excess-lifetime objects `F_e`, `f_e`, `ν_e`, `β_e`.
//!
//! Every parametric family carries closed forms for its CDF, its (partial)
//! moments and those of `ν_e`. Infinite moments are decided symbolically.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::quad;
use crate::spec::{read_xy_csv, Spec};
use crate::test_function::TestFunction;

/// A moment value that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    fn map(self, f: impl FnOnce(f64) -> f64) -> Moment {
        match self {
            Moment::Finite(v) => Moment::Finite(f(v)),
            Moment::Infinite => Moment::Infinite,
        }
    }
}

impl fmt::Display for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Infinite => write!(f, "inf"),
        }
    }
}

/// Which measure a moment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOf {
    Nu,
    NuE,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Exponential {
        rate: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Pareto {
        xm: f64,
        p: f64,
    },
    HyperExponential {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
    /// Piecewise-linear CDF through `(x[i], cdf[i])`, zero before `x[0]`,
    /// one from the last node on.
    Grid {
        x: Vec<f64>,
        cdf: Vec<f64>,
    },
}

/// The critical data `(α, ν)` with `α⟨χ,ν⟩ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDistribution {
    family: Family,
    alpha: f64,
    mean: f64,
    /// Cumulative `F_e` at the grid family's nodes.
    grid_fe: Vec<f64>,
}

// ∫_l^r z^γ dz
pub(crate) fn pow_int(l: f64, r: f64, gamma: f64) -> f64 {
    if r <= l {
        return 0.0;
    }
    (r.powf(gamma + 1.0) - l.powf(gamma + 1.0)) / (gamma + 1.0)
}

// Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt
pub(crate) fn upper_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        gamma(s)
    } else {
        gamma_ur(s, x) * gamma(s)
    }
}

impl ServiceDistribution {
    pub fn new(family: Family) -> Result<Self> {
        let mean = match &family {
            Family::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidArgument(format!("exponential rate {rate}")));
                }
                1.0 / rate
            }
            Family::Uniform { a, b } => {
                if !(*a >= 0.0 && b.is_finite() && *b >= *a) {
                    return Err(Error::InvalidArgument(format!("uniform bounds a={a}, b={b}")));
                }
                if *b == 0.0 {
                    return Err(Error::MassAtOrigin(1.0));
                }
                if *b == *a {
                    return Err(Error::AtomInSpec(*a));
                }
                0.5 * (a + b)
            }
            Family::Pareto { xm, p } => {
                if !(*xm > 0.0 && xm.is_finite() && *p > 0.0) {
                    return Err(Error::InvalidArgument(format!("pareto xm={xm}, p={p}")));
                }
                if *p <= 1.0 {
                    return Err(Error::InfiniteMean);
                }
                xm * p / (p - 1.0)
            }
            Family::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::InvalidArgument(
                        "hyperexponential needs equally many weights and rates".into(),
                    ));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(Error::InvalidArgument(
                        "hyperexponential weights >= 0, rates > 0".into(),
                    ));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("hyperexponential weights sum to {s}")));
                }
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
            Family::Grid { x, cdf } => {
                Self::validate_grid(x, cdf)?;
                // ∫ (1 - F) with F linear per segment
                let mut m = x[0];
                for i in 1..x.len() {
                    m += (x[i] - x[i - 1]) * (1.0 - 0.5 * (cdf[i] + cdf[i - 1]));
                }
                m
            }
        };
        let mut d = Self {
            family,
            alpha: 1.0 / mean,
            mean,
            grid_fe: Vec::new(),
        };
        if let Family::Grid { x, cdf } = &d.family {
            let mut acc = d.alpha * x[0];
            let mut fe = vec![acc];
            for i in 1..x.len() {
                acc += d.alpha * (x[i] - x[i - 1]) * (1.0 - 0.5 * (cdf[i] + cdf[i - 1]));
                fe.push(acc);
            }
            d.grid_fe = fe;
        }
        Ok(d)
    }

    fn validate_grid(x: &[f64], cdf: &[f64]) -> Result<()> {
        if x.len() < 2 || x.len() != cdf.len() {
            return Err(Error::InvalidArgument(
                "grid CDF needs >= 2 matching (x, F) nodes".into(),
            ));
        }
        if !(x[0] >= 0.0) {
            return Err(Error::InvalidArgument("grid CDF nodes must be >= 0".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid CDF nodes must be strictly increasing".into(),
            ));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidArgument(
                "grid CDF values must be nondecreasing in [0,1]".into(),
            ));
        }
        if cdf[0] > 0.0 {
            return Err(if x[0] == 0.0 {
                Error::MassAtOrigin(cdf[0])
            } else {
                Error::AtomInSpec(x[0])
            });
        }
        let last = *cdf.last().unwrap();
        if (last - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "grid CDF must end at 1, ends at {last}"
            )));
        }
        Ok(())
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Uniform { a, b })
    }

    pub fn pareto(xm: f64, p: f64) -> Result<Self> {
        Self::new(Family::Pareto { xm, p })
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        Self::new(Family::HyperExponential { weights, rates })
    }

    pub fn grid(x: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        Self::new(Family::Grid { x, cdf })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Exponential { rate } => format!("exp(rate={rate})"),
            Family::Uniform { a, b } => format!("uniform({a},{b})"),
            Family::Pareto { xm, p } => format!("pareto(xm={xm},p={p})"),
            Family::HyperExponential { weights, rates } => format!("hyperexp(w={weights:?},r={rates:?})"),
            Family::Grid { x, .. } => format!("grid({} nodes)", x.len()),
        }
    }

    /// `true` when `ν` has bounded support.
    pub fn bounded_support(&self) -> bool {
        matches!(self.family, Family::Uniform { .. } | Family::Grid { .. })
    }

    /// Points where `F`, `f` or `f_e` are not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Exponential { .. } | Family::HyperExponential { .. } => vec![],
            Family::Uniform { a, b } => vec![*a, *b],
            Family::Pareto { xm, .. } => vec![*xm],
            Family::Grid { x, .. } => x.clone(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        1.0 - self.survival(x)
    }

    /// `1 - F(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match &self.family {
            Family::Exponential { rate } => (-rate * x).exp(),
            Family::Uniform { a, b } => {
                if x <= *a {
                    1.0
                } else if x >= *b {
                    0.0
                } else {
                    (b - x) / (b - a)
                }
            }
            Family::Pareto { xm, p } => {
                if x <= *xm {
                    1.0
                } else {
                    (xm / x).powf(*p)
                }
            }
            Family::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * (-r * x).exp()).sum()
            }
            Family::Grid { x: xs, cdf } => 1.0 - grid_lookup(xs, cdf, x),
        }
    }

    /// Density of `ν` (zero where it does not exist).
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => rate * (-rate * x).exp(),
            Family::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Family::Pareto { xm, p } => {
                if x < *xm {
                    0.0
                } else {
                    p * xm.powf(*p) * x.powf(-p - 1.0)
                }
            }
            Family::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * r * (-r * x).exp()).sum()
            }
            Family::Grid { x: xs, cdf } => {
                if x < xs[0] || x >= *xs.last().unwrap() {
                    return 0.0;
                }
                let i = xs.partition_point(|&v| v <= x) - 1;
                (cdf[i + 1] - cdf[i]) / (xs[i + 1] - xs[i])
            }
        }
    }

    /// `f_e(x) = α(1 - F(x))`.
    pub fn excess_density(&self, x: f64) -> f64 {
        self.alpha * self.survival(x.max(0.0))
    }

    /// `F_e(x) = α ∫_0^x (1 - F)`.
    pub fn excess_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => -(-rate * x).exp_m1(),
            Family::HyperExponential { .. } | Family::Pareto { .. } => 1.0 - self.excess_survival(x),
            Family::Uniform { a, b } => {
                let al = self.alpha;
                if x <= *a {
                    al * x
                } else if x >= *b {
                    1.0
                } else {
                    al * (x - (x - a).powi(2) / (2.0 * (b - a)))
                }
            }
            Family::Grid { x: xs, cdf } => {
                let last = *xs.last().unwrap();
                if x >= last {
                    return 1.0;
                }
                if x <= xs[0] {
                    return self.alpha * x;
                }
                let i = xs.partition_point(|&v| v <= x) - 1;
                let f_here = grid_lookup(xs, cdf, x);
                self.grid_fe[i] + self.alpha * (x - xs[i]) * (1.0 - 0.5 * (cdf[i] + f_here))
            }
        }
    }

    /// `1 - F_e(x)`, evaluated without cancellation in the tail.
    pub fn excess_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let al = self.alpha;
        match &self.family {
            Family::Exponential { rate } => (-rate * x).exp(),
            Family::HyperExponential { weights, rates } => {
                al * weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * (-r * x).exp() / r)
                    .sum::<f64>()
            }
            Family::Pareto { xm, p } => {
                if x >= *xm {
                    al * xm.powf(*p) * x.powf(1.0 - p) / (p - 1.0)
                } else {
                    al * (xm - x) + al * xm / (p - 1.0)
                }
            }
            Family::Uniform { a, b } => {
                if x >= *b {
                    0.0
                } else if x <= *a {
                    al * (a - x) + al * (b - a) / 2.0
                } else {
                    al * (b - x).powi(2) / (2.0 * (b - a))
                }
            }
            Family::Grid { .. } => 1.0 - self.excess_cdf(x),
        }
    }

    /// `⟨χ^γ 1_{(x0,∞)}, ν⟩`.
    pub fn partial_moment(&self, x0: f64, gamma_: f64) -> Moment {
        let x0 = x0.max(0.0);
        match &self.family {
            Family::Exponential { rate } => Moment::Finite(upper_gamma(gamma_ + 1.0, rate * x0) / rate.powf(gamma_)),
            Family::HyperExponential { weights, rates } => Moment::Finite(
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * upper_gamma(gamma_ + 1.0, r * x0) / r.powf(gamma_))
                    .sum(),
            ),
            Family::Pareto { xm, p } => {
                if gamma_ >= *p {
                    return Moment::Infinite;
                }
                let lo = x0.max(*xm);
                Moment::Finite(p * xm.powf(*p) * lo.powf(gamma_ - p) / (p - gamma_))
            }
            Family::Uniform { a, b } => {
                let lo = x0.max(*a);
                Moment::Finite(pow_int(lo, *b, gamma_) / (b - a))
            }
            Family::Grid { x, cdf } => {
                let mut s = 0.0;
                for i in 1..x.len() {
                    let lo = x[i - 1].max(x0);
                    if lo >= x[i] {
                        continue;
                    }
                    let dens = (cdf[i] - cdf[i - 1]) / (x[i] - x[i - 1]);
                    s += dens * pow_int(lo, x[i], gamma_);
                }
                Moment::Finite(s)
            }
        }
    }

    /// `⟨χ^γ 1_{(x0,∞)}, ν_e⟩`, computed from `f_e` directly.
    pub fn excess_partial_moment(&self, x0: f64, gamma_: f64) -> Moment {
        let x0 = x0.max(0.0);
        let al = self.alpha;
        match &self.family {
            Family::Exponential { rate } => Moment::Finite(upper_gamma(gamma_ + 1.0, rate * x0) / rate.powf(gamma_)),
            Family::HyperExponential { weights, rates } => Moment::Finite(
                al * weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * upper_gamma(gamma_ + 1.0, r * x0) / r.powf(gamma_ + 1.0))
                    .sum::<f64>(),
            ),
            Family::Pareto { xm, p } => {
                // f_e = α on [0, xm), α (xm/x)^p beyond
                if gamma_ >= p - 1.0 {
                    return Moment::Infinite;
                }
                let body = al * pow_int(x0, *xm, gamma_);
                let lo = x0.max(*xm);
                let tail = al * xm.powf(*p) * lo.powf(gamma_ + 1.0 - p) / (p - 1.0 - gamma_);
                Moment::Finite(body + tail)
            }
            Family::Uniform { a, b } => {
                let body = al * pow_int(x0, *a, gamma_);
                let lo = x0.max(*a);
                // ∫_lo^b z^γ (b - z)/(b - a) dz
                let ramp = if lo < *b {
                    (b * pow_int(lo, *b, gamma_) - pow_int(lo, *b, gamma_ + 1.0)) / (b - a)
                } else {
                    0.0
                };
                Moment::Finite(body + al * ramp)
            }
            Family::Grid { x, cdf } => {
                let mut s = al * pow_int(x0, x[0], gamma_);
                for i in 1..x.len() {
                    let lo = x[i - 1].max(x0);
                    if lo >= x[i] {
                        continue;
                    }
                    // 1 - F(z) = c0 + c1 z on the segment
                    let c1 = -(cdf[i] - cdf[i - 1]) / (x[i] - x[i - 1]);
                    let c0 = 1.0 - cdf[i - 1] - c1 * x[i - 1];
                    s += al * (c0 * pow_int(lo, x[i], gamma_) + c1 * pow_int(lo, x[i], gamma_ + 1.0));
                }
                Moment::Finite(s)
            }
        }
    }

    /// `⟨χ^γ, ν⟩` or `⟨χ^γ, ν_e⟩`.
    pub fn moment(&self, gamma_: f64, which: MomentOf) -> Moment {
        match which {
            MomentOf::Nu => self.partial_moment(0.0, gamma_),
            MomentOf::NuE => self.excess_partial_moment(0.0, gamma_),
        }
    }

    /// `β_e = 1/⟨χ,ν_e⟩`, zero when that mean is infinite.
    pub fn beta_e(&self) -> f64 {
        match self.moment(1.0, MomentOf::NuE) {
            Moment::Finite(m) => 1.0 / m,
            Moment::Infinite => 0.0,
        }
    }

    /// `⟨χ, ν_e⟩` after `α⟨χ^{γ+1}, ν⟩ / (γ + 1)`, the second route to the
    /// excess moments.
    pub fn excess_moment_via_nu(&self, gamma_: f64) -> Moment {
        self.moment(gamma_ + 1.0, MomentOf::Nu)
            .map(|m| self.alpha * m / (gamma_ + 1.0))
    }

    /// `∫ g dν` by adaptive quadrature.
    pub fn expect(&self, g: impl Fn(f64) -> f64, tol: f64) -> f64 {
        let (lo, hi) = self.support();
        quad::integrate_split(|x| g(x) * self.density(x), lo, hi, &self.breakpoints(), tol)
    }

    /// `∫ g dν_e` by adaptive quadrature.
    pub fn expect_excess(&self, g: impl Fn(f64) -> f64, tol: f64) -> f64 {
        let (_, hi) = self.support();
        quad::integrate_split(|x| g(x) * self.excess_density(x), 0.0, hi, &self.breakpoints(), tol)
    }

    fn support(&self) -> (f64, f64) {
        match &self.family {
            Family::Exponential { .. } | Family::HyperExponential { .. } => (0.0, f64::INFINITY),
            Family::Pareto { xm, .. } => (*xm, f64::INFINITY),
            Family::Uniform { a, b } => (*a, *b),
            Family::Grid { x, .. } => (x[0], *x.last().unwrap()),
        }
    }

    /// Residual `α⟨g,ν⟩ - ⟨g',ν_e⟩`, zero for every admissible `g`.
    pub fn excess_identity_residual(&self, g: &TestFunction) -> Result<f64> {
        if g.eval(0.0).abs() > 1e-12 || g.eval_prime(0.0).abs() > 1e-12 {
            return Err(Error::TestFunctionInvalid(g.name().to_string()));
        }
        let tol = 1e-13 * (1.0 + g.sup() + g.sup_prime());
        let lhs = self.alpha * self.expect(|x| g.eval(x), tol);
        let rhs = self.expect_excess(|x| g.eval_prime(x), tol);
        Ok(lhs - rhs)
    }

    /// One draw from `ν`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.family {
            Family::Exponential { rate } => -(-u).ln_1p() / rate,
            Family::Uniform { a, b } => a + u * (b - a),
            Family::Pareto { xm, p } => xm * (1.0 - u).powf(-1.0 / p),
            Family::HyperExponential { weights, rates } => {
                let mut acc = 0.0;
                let mut idx = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                let v: f64 = rng.random();
                -(-v).ln_1p() / rates[idx]
            }
            Family::Grid { x, cdf } => grid_inverse(x, cdf, u),
        }
    }

    /// Quantile of `ν_e` by bisection on `F_e`.
    pub fn excess_quantile(&self, u: f64) -> f64 {
        let mut hi = 1.0;
        while self.excess_cdf(hi) < u && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.excess_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

fn grid_lookup(xs: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= *xs.last().unwrap() {
        return 1.0;
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    cdf[i] + w * (cdf[i + 1] - cdf[i])
}

fn grid_inverse(xs: &[f64], cdf: &[f64], u: f64) -> f64 {
    let i = cdf.partition_point(|&c| c <= u).clamp(1, xs.len() - 1);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    if c1 <= c0 {
        return xs[i];
    }
    xs[i - 1] + (u - c0) / (c1 - c0) * (xs[i] - xs[i - 1])
}

impl FromStr for ServiceDistribution {
    type Err = Error;

    /// `exp:rate=1`, `uniform:a=0,b=2`, `pareto:xm=0.75,p=4`,
    /// `hyperexp:w=0.5,0.5;r=0.5,2`, `grid:x=0,1,2;F=0,0.5,1`, `grid:path=f.csv`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = Spec::parse(s)?;
        match spec.name.as_str() {
            "exp" | "exponential" => {
                spec.expect_keys(&["rate"])?;
                Self::exponential(spec.num("rate")?)
            }
            "uniform" => {
                spec.expect_keys(&["a", "b"])?;
                Self::uniform(spec.num("a")?, spec.num("b")?)
            }
            "pareto" => {
                spec.expect_keys(&["xm", "p"])?;
                Self::pareto(spec.num("xm")?, spec.num("p")?)
            }
            "hyperexp" => {
                spec.expect_keys(&["w", "r"])?;
                Self::hyperexponential(spec.list("w")?, spec.list("r")?)
            }
            "grid" => {
                spec.expect_keys(&["x", "f", "path"])?;
                if spec.has("path") {
                    let (x, f) = read_xy_csv(&spec.text("path")?)?;
                    Self::grid(x, f)
                } else {
                    Self::grid(spec.list("x")?, spec.list("f")?)
                }
            }
            other => Err(spec.malformed(format!("unknown distribution family `{other}`"))),
        }
    }
}

/// The fixed set of families exercised by the library-wide checks.
pub fn builtin_families() -> Vec<ServiceDistribution> {
    vec![
        ServiceDistribution::exponential(1.0).unwrap(),
        ServiceDistribution::uniform(0.0, 2.0).unwrap(),
        ServiceDistribution::pareto(0.75, 4.0).unwrap(),
        ServiceDistribution::hyperexponential(vec![0.5, 0.5], vec![0.5, 2.0]).unwrap(),
        ServiceDistribution::grid(vec![0.0, 0.5, 1.0, 3.0], vec![0.0, 0.2, 0.7, 1.0]).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_is_reciprocal_mean() {
        let e: ServiceDistribution = "exp:rate=1".parse().unwrap();
        assert!(close(e.alpha(), 1.0, 1e-15));
        let p: ServiceDistribution = "pareto:xm=0.75,p=4".parse().unwrap();
        assert!(close(p.alpha(), 1.0, 1e-12));
        let u: ServiceDistribution = "uniform:a=0,b=2".parse().unwrap();
        assert!(close(u.alpha(), 1.0, 1e-15));
        for d in builtin_families() {
            assert!(close(
                d.alpha() * d.moment(1.0, MomentOf::Nu).value().unwrap(),
                1.0,
                1e-10
            ));
        }
    }

    #[test]
    fn rejects_atoms_and_infinite_mean() {
        assert_eq!(
            "uniform:a=0,b=0".parse::<ServiceDistribution>().unwrap_err(),
            Error::MassAtOrigin(1.0)
        );
        assert!(matches!(
            "grid:x=0,1;F=0.3,1".parse::<ServiceDistribution>().unwrap_err(),
            Error::MassAtOrigin(_)
        ));
        assert_eq!(
            "pareto:xm=1,p=1".parse::<ServiceDistribution>().unwrap_err(),
            Error::InfiniteMean
        );
        assert_eq!(
            "uniform:a=1,b=1".parse::<ServiceDistribution>().unwrap_err(),
            Error::AtomInSpec(1.0)
        );
        assert!(matches!(
            "weibull:k=2".parse::<ServiceDistribution>().unwrap_err(),
            Error::MalformedSpec { .. }
        ));
        assert!(matches!(
            "exp:lambda=2".parse::<ServiceDistribution>().unwrap_err(),
            Error::MalformedSpec { .. }
        ));
    }

    #[test]
    fn excess_density_examples() {
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!(close(e.excess_density(0.0), 1.0, 1e-15));
        assert!(close(e.excess_density(0.5), (-0.5f64).exp(), 1e-15));
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        assert!(close(u.excess_density(1.0), 0.5, 1e-15));
    }

    #[test]
    fn excess_cdf_examples() {
        for d in builtin_families() {
            assert_eq!(d.excess_cdf(0.0), 0.0);
        }
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        assert!(close(u.excess_cdf(1.0), 0.75, 1e-15));
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!(close(e.excess_cdf(2f64.ln()), 0.5, 1e-15));
    }

    #[test]
    fn moment_examples() {
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!(close(e.moment(2.0, MomentOf::Nu).value().unwrap(), 2.0, 1e-12));
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        assert!(close(u.moment(1.0, MomentOf::NuE).value().unwrap(), 2.0 / 3.0, 1e-14));
        let p = ServiceDistribution::pareto(0.5, 2.0).unwrap();
        assert_eq!(p.moment(2.0, MomentOf::Nu), Moment::Infinite);
    }

    #[test]
    fn beta_e_examples() {
        assert!(close(
            ServiceDistribution::exponential(1.0).unwrap().beta_e(),
            1.0,
            1e-12
        ));
        assert!(close(
            ServiceDistribution::uniform(0.0, 2.0).unwrap().beta_e(),
            1.5,
            1e-12
        ));
        assert_eq!(ServiceDistribution::pareto(0.5, 2.0).unwrap().beta_e(), 0.0);
    }

    #[test]
    fn identity_examples() {
        let suite = TestFunction::standard_suite();
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!(e.excess_identity_residual(&suite[0]).unwrap().abs() <= 1e-8);
        assert!(e.excess_identity_residual(&suite[0].scaled(5.0)).unwrap().abs() <= 5e-8);
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        assert!(u.excess_identity_residual(&suite[1]).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn identity_holds_for_every_family_and_function() {
        let suite = TestFunction::standard_suite();
        let mut fams = builtin_families();
        fams.push(ServiceDistribution::pareto(0.5, 2.0).unwrap());
        for d in &fams {
            for g in &suite {
                let r = d.excess_identity_residual(g).unwrap();
                assert!(r.abs() <= 1e-8, "{} {}: {r}", d.label(), g.name());
            }
        }
    }

    #[test]
    fn excess_moment_routes_agree() {
        for d in builtin_families() {
            for &g in &[0.5, 1.0, 1.5, 2.0, 2.5] {
                let a = d.moment(g, MomentOf::NuE);
                let b = d.excess_moment_via_nu(g);
                assert_eq!(a.is_finite(), b.is_finite(), "{} gamma {g}", d.label());
                if let (Moment::Finite(a), Moment::Finite(b)) = (a, b) {
                    assert!(close(a, b, 1e-10 * (1.0 + a)), "{} gamma {g}: {a} vs {b}", d.label());
                }
            }
        }
    }

    #[test]
    fn moment_duality_on_gamma_grid() {
        let p = ServiceDistribution::pareto(0.5, 2.0).unwrap();
        let q = ServiceDistribution::pareto(0.75, 4.0).unwrap();
        for d in [p, q] {
            for k in 1..=16 {
                let g = k as f64 * 0.25;
                assert_eq!(
                    d.moment(g, MomentOf::NuE).is_finite(),
                    d.moment(g + 1.0, MomentOf::Nu).is_finite(),
                    "{} gamma {g}",
                    d.label()
                );
            }
        }
    }

    #[test]
    fn excess_cdf_matches_quadrature_of_density() {
        for d in builtin_families() {
            for &x in &[0.3, 0.75, 1.0, 2.5, 7.0] {
                let q = quad::integrate_split(|y| d.excess_density(y), 0.0, x, &d.breakpoints(), 1e-13);
                assert!(close(q, d.excess_cdf(x), 1e-10), "{} x={x}", d.label());
                assert!(close(d.excess_cdf(x) + d.excess_survival(x), 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn excess_cdf_is_proper() {
        for d in builtin_families() {
            let x_max = 200.0;
            let q = quad::integrate_split(|y| d.excess_density(y), 0.0, x_max, &d.breakpoints(), 1e-12);
            let total = q + d.excess_survival(x_max);
            assert!(
                total <= 1.0 + 1e-9 && (total - 1.0).abs() < 1e-6,
                "{}: {total}",
                d.label()
            );
        }
    }

    #[test]
    fn g_x_nonnegative_and_integrates_to_fe() {
        // G^x(y) = f_e(y) - f_e(x+y)
        for d in builtin_families() {
            for i in 0..40 {
                let x = i as f64 * 0.25;
                for j in 0..40 {
                    let y = j as f64 * 0.25;
                    let gx = d.excess_density(y) - d.excess_density(x + y);
                    assert!(gx >= -1e-15 && gx <= d.excess_density(y) + 1e-15);
                }
                let mut br = d.breakpoints();
                br.extend(d.breakpoints().iter().map(|b| b - x));
                let integral = quad::integrate_split(
                    |y| d.excess_density(y) - d.excess_density(x + y),
                    0.0,
                    f64::INFINITY,
                    &br,
                    1e-12,
                );
                assert!(close(integral, d.excess_cdf(x), 1e-6), "{} x={x}", d.label());
            }
        }
    }

    #[test]
    fn excess_quantile_inverts_cdf() {
        for d in builtin_families() {
            for &u in &[0.01, 0.3, 0.5, 0.9, 0.999] {
                let q = d.excess_quantile(u);
                assert!(close(d.excess_cdf(q), u, 1e-10));
            }
        }
    }

    #[test]
    fn sampling_mean_matches() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for d in builtin_families() {
            let n = 200_000;
            let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((m - d.mean()).abs() < 0.02 * d.mean(), "{}: {m}", d.label());
        }
    }

    #[test]
    fn partial_moments_consistent_with_quadrature() {
        for d in builtin_families() {
            for &x0 in &[0.0, 0.6, 1.5] {
                for &g in &[0.0, 1.0, 2.0] {
                    let q = {
                        let (lo, hi) = d.support();
                        quad::integrate_split(|x| x.powf(g) * d.density(x), lo.max(x0), hi, &d.breakpoints(), 1e-13)
                    };
                    let m = d.partial_moment(x0, g).value().unwrap();
                    assert!(close(q, m, 1e-9), "{} x0={x0} g={g}: {q} vs {m}", d.label());
                }
            }
        }
    }
}
