//! Linear convolution of real sequences, direct for short inputs and via
//! FFT otherwise.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

const DIRECT_LIMIT: usize = 64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full linear convolution `c[k] = Σ_j a[j] b[k-j]`, length `len(a)+len(b)-1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n_out = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= DIRECT_LIMIT {
        return convolve_direct(a, b);
    }
    let size = n_out.next_power_of_two();
    let mut fa: Vec<Complex64> = a
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut fb: Vec<Complex64> = b
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fwd = p.plan_fft_forward(size);
        let inv = p.plan_fft_inverse(size);
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= *y;
        }
        inv.process(&mut fa);
    });
    let scale = 1.0 / size as f64;
    fa.iter().take(n_out).map(|z| z.re * scale).collect()
}

pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Trapezoid approximation of `∫_0^{kh} g(kh - s) m(s) ds` for every node
/// `k < len`, with `g`, `m` tabulated on the same grid.
pub fn trapezoid_convolution(g: &[f64], m: &[f64], h: f64) -> Vec<f64> {
    let n = g.len().min(m.len());
    if n == 0 {
        return Vec::new();
    }
    let full = convolve(&g[..n], &m[..n]);
    (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                h * (full[k] - 0.5 * g[k] * m[0] - 0.5 * g[0] * m[k])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..300).map(|k| ((k as f64) * 0.37).sin()).collect();
        let b: Vec<f64> = (0..200).map(|k| ((k as f64) * 0.11).cos()).collect();
        let f = convolve(&a, &b);
        let d = convolve_direct(&a, &b);
        let err = f.iter().zip(&d).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn trapezoid_convolution_of_constants() {
        // ∫_0^u 1 * 1 ds = u
        let h = 0.1;
        let ones = vec![1.0; 101];
        let c = trapezoid_convolution(&ones, &ones, h);
        assert!((c[100] - 10.0).abs() < 1e-10);
    }
}
