//! Renewal function `U_e = Σ_i F_e^{*i}` of the excess-lifetime law.
//!
//! The renewal density `m` solves `m = f_e + f_e ∗ m`. Treating `m` as
//! piecewise linear between nodes and integrating the kernel exactly
//! against the hat functions gives an implicit trapezoid rule whose
//! discrete kernel has total mass `F_e(u)`, so the scheme stays critical
//! over long horizons. The triangular system is solved by divide and
//! conquer with FFT convolutions, `O(n log² n)`.

use crate::conv::{convolve, trapezoid_convolution};
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, interp, GridFunction};
use crate::quad::integrate;

const DIRECT_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalFunction {
    h: f64,
    values: Vec<f64>,
    density: Vec<f64>,
    beta_e: f64,
    residual_cert: f64,
}

impl RenewalFunction {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn u_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// `U_e` at the nodes `kh`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Renewal density `m` at the nodes.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn beta_e(&self) -> f64 {
        self.beta_e
    }

    /// `max_k |U_e(kh) - 1 - (F_e ∗ U_e)(kh)|`.
    pub fn residual_cert(&self) -> f64 {
        self.residual_cert
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `U_e(u)` by linear interpolation.
    pub fn at(&self, u: f64) -> Result<f64> {
        interp(&self.values, self.h, u).ok_or(Error::OutOfRange {
            what: "u",
            value: u,
            limit: self.u_max(),
        })
    }

    pub fn density_at(&self, u: f64) -> Result<f64> {
        interp(&self.density, self.h, u).ok_or(Error::OutOfRange {
            what: "u",
            value: u,
            limit: self.u_max(),
        })
    }
}

/// Hat-function moments of `f_e` over each cell `[(i-1)h, ih]`:
/// `rise[i] = ∫ f_e(x) (x - (i-1)h)/h dx`, `fall[i] = ∫ f_e(x) (ih - x)/h dx`.
pub(crate) fn cell_weights(d: &ServiceDistribution, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let breaks = d.breakpoints();
    let mut rise = vec![0.0; n + 1];
    let mut fall = vec![0.0; n + 1];
    for i in 1..=n {
        let a = (i - 1) as f64 * h;
        let b = i as f64 * h;
        let mut pts = vec![a];
        pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        pts.push(b);
        for w in pts.windows(2) {
            rise[i] += integrate(|x| d.excess_density(x) * (x - a) / h, w[0], w[1], 1e-16);
            fall[i] += integrate(|x| d.excess_density(x) * (b - x) / h, w[0], w[1], 1e-16);
        }
    }
    (rise, fall)
}

/// Solves `m[k] c = r[k] + Σ_{1≤j<k} m[j] kernel[k-j]` for `k = 1..n`.
fn solve_volterra(r: &[f64], kernel: &[f64], c: f64, m: &mut [f64]) {
    let n = r.len();
    let mut acc = vec![0.0; n];
    fn rec(lo: usize, hi: usize, r: &[f64], kernel: &[f64], c: f64, m: &mut [f64], acc: &mut [f64]) {
        if hi - lo <= DIRECT_BLOCK {
            for k in lo..hi {
                m[k] = (r[k] + acc[k]) / c;
                let mk = m[k];
                for k2 in k + 1..hi {
                    acc[k2] += mk * kernel[k2 - k];
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        rec(lo, mid, r, kernel, c, m, acc);
        let contrib = convolve(&m[lo..mid], &kernel[..hi - lo]);
        for k in mid..hi {
            acc[k] += contrib[k - lo];
        }
        rec(mid, hi, r, kernel, c, m, acc);
    }
    // index 0 is fixed by the caller; solve 1..n
    if n > 1 {
        rec(1, n, r, kernel, c, m, &mut acc);
    }
}

/// Renewal density at the nodes `0, h, …, nh` from the product-integrated
/// trapezoid scheme.
fn density_on_grid(d: &ServiceDistribution, h: f64, n: usize) -> Result<Vec<f64>> {
    let f0 = d.excess_density(0.0);
    if 1.0 - 0.5 * h * f0 <= 0.0 {
        return Err(Error::DivergentScheme(h));
    }
    let (rise, fall) = cell_weights(d, h, n);
    let diag = 1.0 - fall[1];
    if diag <= 0.0 {
        return Err(Error::DivergentScheme(h));
    }
    // kernel[i] = weight of m_{k-i} for an interior node
    let kernel: Vec<f64> = (0..=n)
        .map(|i| if i == 0 || i >= n { 0.0 } else { rise[i] + fall[i + 1] })
        .collect();
    let mut m = vec![0.0; n + 1];
    m[0] = f0;
    let rhs: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                d.excess_density(k as f64 * h) + f0 * rise[k]
            }
        })
        .collect();
    solve_volterra(&rhs, &kernel, diag, &mut m);
    Ok(m)
}

/// Solves the renewal-density equation on `[0, u_max]` with step `h`.
///
/// The collocation error of the scheme is `O(h²)` and does not decay in
/// `u`: it shifts the limit of `m` away from `β_e`. One Richardson step
/// against a half-step solve removes it.
pub fn compute_renewal_function(d: &ServiceDistribution, h: f64, u_max: f64) -> Result<RenewalFunction> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h = {h}")));
    }
    if !(u_max >= 1.0 && u_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("u_max = {u_max} (need ≥ 1)")));
    }
    let n = (u_max / h).round() as usize;
    let coarse = density_on_grid(d, h, n)?;
    let fine = density_on_grid(d, 0.5 * h, 2 * n)?;
    let m: Vec<f64> = coarse
        .iter()
        .enumerate()
        .map(|(k, c)| ((4.0 * fine[2 * k] - c) / 3.0).max(0.0))
        .collect();
    Ok(from_density(d, h, m))
}

/// The unextrapolated scheme; kept for comparison and benchmarks.
pub fn compute_renewal_function_single(d: &ServiceDistribution, h: f64, u_max: f64) -> Result<RenewalFunction> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h = {h}")));
    }
    if !(u_max >= 1.0 && u_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("u_max = {u_max} (need ≥ 1)")));
    }
    let n = (u_max / h).round() as usize;
    Ok(from_density(d, h, density_on_grid(d, h, n)?))
}

fn from_density(d: &ServiceDistribution, h: f64, m: Vec<f64>) -> RenewalFunction {
    let mut values: Vec<f64> = cumulative_trapezoid(&m, h).into_iter().map(|v| 1.0 + v).collect();
    // clamp round-off so the table is monotone
    for k in 1..values.len() {
        if values[k] < values[k - 1] {
            values[k] = values[k - 1];
        }
    }
    let residual_cert = renewal_residual(d, h, &values, &m);
    RenewalFunction {
        h,
        values,
        density: m,
        beta_e: d.beta_e(),
        residual_cert,
    }
}

/// `max_k |U(kh) - 1 - F_e(kh) - ∫_0^{kh} F_e(kh - s) m(s) ds|`, the last
/// integral by the trapezoid rule.
fn renewal_residual(d: &ServiceDistribution, h: f64, values: &[f64], m: &[f64]) -> f64 {
    let fe: Vec<f64> = (0..values.len()).map(|k| d.excess_cdf(k as f64 * h)).collect();
    let conv = trapezoid_convolution(&fe, m, h);
    values
        .iter()
        .enumerate()
        .map(|(k, u)| (u - 1.0 - fe[k] - conv[k]).abs())
        .fold(0.0, f64::max)
}

/// `U_e(t+s) - U_e(t) - β_e s`.
pub fn blackwell_discrepancy(u: &RenewalFunction, t: f64, s: f64) -> Result<f64> {
    if u.beta_e == 0.0 {
        return Err(Error::DegenerateRate("beta_e = 0: no linear centering"));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("increment s = {s} not in [0, 1]")));
    }
    if !(t >= 0.0) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            limit: u.u_max(),
        });
    }
    Ok(u.at(t + s)? - u.at(t)? - u.beta_e * s)
}

/// `max_{s ∈ [0,1]} |D(t, s)|` sampled on the grid of `s`.
pub fn max_blackwell_discrepancy(u: &RenewalFunction, t: f64) -> Result<f64> {
    let steps = (1.0 / u.h).round().max(1.0) as usize;
    let mut worst = 0.0_f64;
    for j in 0..=steps {
        let s = (j as f64 / steps as f64).min(1.0);
        worst = worst.max(blackwell_discrepancy(u, t, s)?.abs());
    }
    Ok(worst)
}

/// `(g ∗ U_e)(u) = g(u) + ∫_0^u g(u - s) m(s) ds` at each node of `g`.
pub fn convolve_with_renewal(u: &RenewalFunction, g: &GridFunction) -> Result<GridFunction> {
    if (g.h - u.h).abs() > 1e-12 * u.h {
        return Err(Error::GridMismatch(format!("step {} vs renewal step {}", g.h, u.h)));
    }
    if g.len() > u.len() {
        return Err(Error::GridMismatch(format!(
            "{} nodes exceed the renewal table ({} nodes)",
            g.len(),
            u.len()
        )));
    }
    let conv = trapezoid_convolution(&g.values, &u.density[..g.len()], u.h);
    Ok(GridFunction::new(
        u.h,
        g.values.iter().zip(conv).map(|(a, b)| a + b).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::builtin_families;

    #[test]
    fn exponential_is_exact() {
        let d = ServiceDistribution::exponential(1.0).unwrap();
        let u = compute_renewal_function(&d, 0.01, 100.0).unwrap();
        assert_eq!(u.values()[0], 1.0);
        let worst = u
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - (1.0 + k as f64 * 0.01)).abs() / (1.0 + k as f64 * 0.01))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
        assert!((u.at(10.0).unwrap() - 11.0).abs() < 1e-8);
    }

    #[test]
    fn uniform_elementary_renewal() {
        let d = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        let u = compute_renewal_function(&d, 0.01, 100.0).unwrap();
        let ratio = u.at(40.0).unwrap() / 40.0;
        assert!((1.45..=1.55).contains(&ratio), "{ratio}");
    }

    #[test]
    fn residuals_and_monotonicity_for_builtins() {
        for d in builtin_families() {
            let u = compute_renewal_function(&d, 0.01, 100.0).unwrap();
            let last = *u.values().last().unwrap();
            assert!(u.residual_cert() <= 5e-3 * last, "{}: {}", d.label(), u.residual_cert());
            assert!(u.values().windows(2).all(|w| w[1] >= w[0]));
            if d.beta_e() > 0.0 {
                assert!((last / u.u_max() - d.beta_e()).abs() <= 0.05, "{}", d.label());
            }
        }
    }

    #[test]
    fn direct_and_divide_and_conquer_agree() {
        let k: Vec<f64> = (0..500)
            .map(|i| if i == 0 { 0.0 } else { 0.01 * (-(i as f64) * 0.01).exp() })
            .collect();
        let r: Vec<f64> = (0..500).map(|i| (i as f64 * 0.03).cos()).collect();
        let mut fast = vec![0.0; 500];
        solve_volterra(&r, &k, 0.99, &mut fast);
        let mut slow = vec![0.0; 500];
        for i in 1..500 {
            let s: f64 = (1..i).map(|j| slow[j] * k[i - j]).sum();
            slow[i] = (r[i] + s) / 0.99;
        }
        for i in 1..500 {
            assert!((fast[i] - slow[i]).abs() < 1e-10 * (1.0 + slow[i].abs()));
        }
    }

    #[test]
    fn blackwell_examples() {
        let d = ServiceDistribution::exponential(1.0).unwrap();
        let u = compute_renewal_function(&d, 0.01, 100.0).unwrap();
        assert!(blackwell_discrepancy(&u, 10.0, 0.5).unwrap().abs() < 2e-3);
        assert_eq!(blackwell_discrepancy(&u, 10.0, 0.0).unwrap(), 0.0);
        assert!(blackwell_discrepancy(&u, 99.5, 1.0).is_err());
        let d = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        let u = compute_renewal_function(&d, 0.01, 100.0).unwrap();
        assert!(blackwell_discrepancy(&u, 50.0, 1.0).unwrap().abs() <= 0.01);
        let p = ServiceDistribution::pareto(0.5, 2.0).unwrap();
        let u = compute_renewal_function(&p, 0.01, 10.0).unwrap();
        assert!(matches!(
            blackwell_discrepancy(&u, 1.0, 0.5),
            Err(Error::DegenerateRate(_))
        ));
    }

    #[test]
    fn divergent_scheme_detected() {
        // f_e(0) = α = 1/mean; mean 0.01 makes (h/2) f_e(0) = 5 for h = 1
        let d = ServiceDistribution::exponential(100.0).unwrap();
        assert_eq!(
            compute_renewal_function(&d, 1.0, 10.0).unwrap_err(),
            Error::DivergentScheme(1.0)
        );
    }

    #[test]
    fn convolution_examples() {
        let d = ServiceDistribution::exponential(1.0).unwrap();
        let u = compute_renewal_function(&d, 0.01, 20.0).unwrap();
        let zero = GridFunction::new(0.01, vec![0.0; 101]);
        assert!(convolve_with_renewal(&u, &zero)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
        let ones = GridFunction::new(0.01, vec![1.0; 2001]);
        let c = convolve_with_renewal(&u, &ones).unwrap();
        for k in (0..2001).step_by(100) {
            assert!((c.values[k] - u.values()[k]).abs() < 1e-8);
        }
        // H'_ξ for uniform density (0,2,1): 1 - x/2 on [0,2]
        let hp = GridFunction::from_fn(0.01, 2000, |x| (1.0 - x / 2.0).max(0.0));
        let c = convolve_with_renewal(&u, &hp).unwrap();
        assert!((c.at(1.0).unwrap() - 1.25).abs() < 1e-4);
        let bad = GridFunction::new(0.02, vec![1.0; 10]);
        assert!(matches!(convolve_with_renewal(&u, &bad), Err(Error::GridMismatch(_))));
    }
}
