//! The renewal solver against an independent forward series
//! `U_e = Σ_n F_e^{*n}`, built by repeated trapezoid convolution of the
//! excess density and truncated by a Chernoff bound on the remainder.

use fluidps_core::distributions::builtin_families;
use fluidps_core::renewal::compute_renewal_function;
use fluidps_core::ServiceDistribution;

const H: f64 = 0.005;
const U_MAX: f64 = 20.0;

/// `Σ_{n ≥ 0} P(S_n ≤ u)` on the nodes, with the truncation remainder.
fn series_oracle(d: &ServiceDistribution) -> (Vec<f64>, f64) {
    let n = (U_MAX / H).round() as usize;
    let fe: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                d.alpha()
            } else {
                d.excess_density(k as f64 * H)
            }
        })
        .collect();
    // Chernoff: P(S_m ≤ u) ≤ e^{θu} L(θ)^m with L the Laplace transform of ν_e
    let theta = 1.0;
    let lap = d.expect_excess(|x| (-theta * x).exp(), 1e-13);
    let mut u = vec![1.0; n + 1];
    let mut g = fe.clone();
    let mut m = 1;
    loop {
        let mut acc = 0.0;
        for k in 1..=n {
            acc += 0.5 * H * (g[k - 1] + g[k]);
            u[k] += acc;
        }
        m += 1;
        let remainder = (theta * U_MAX).exp() * lap.powi(m) / (1.0 - lap);
        if remainder < 1e-10 {
            return (u, remainder);
        }
        let mut next = vec![0.0; n + 1];
        for (k, slot) in next.iter_mut().enumerate().skip(1) {
            let mut s = 0.5 * (g[0] * fe[k] + g[k] * fe[0]);
            for j in 1..k {
                s += g[j] * fe[k - j];
            }
            *slot = H * s;
        }
        g = next;
    }
}

#[test]
fn matches_forward_series_for_builtin_families() {
    for d in builtin_families() {
        let (oracle, remainder) = series_oracle(&d);
        let u = compute_renewal_function(&d, 0.01, U_MAX).unwrap();
        let mut worst = 0.0_f64;
        for k in 0..u.len() {
            let o = oracle[2 * k];
            worst = worst.max((u.values()[k] - o).abs() / o);
        }
        assert!(remainder < 1e-10);
        assert!(worst < 1e-3, "{}: relative deviation {worst}", d.label());
    }
}

#[test]
fn poisson_case_is_linear() {
    let d = ServiceDistribution::exponential(2.0).unwrap();
    let u = compute_renewal_function(&d, 0.01, 10.0).unwrap();
    for (k, v) in u.values().iter().enumerate() {
        let x = k as f64 * 0.01;
        assert!((v - (1.0 + 2.0 * x)).abs() < 1e-6 * (1.0 + x));
    }
}
