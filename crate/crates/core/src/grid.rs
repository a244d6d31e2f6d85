use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid parameters shared by every tabulated object.
///
/// `h` is the step in both space (residual service) and service level `u`.
/// `u_max` bounds the renewal / convolution tables, `x_max` the spatial
/// extent of state measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub h: f64,
    pub u_max: f64,
    pub x_max: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            h: 0.01,
            u_max: 100.0,
            x_max: 50.0,
        }
    }
}

impl GridParams {
    pub fn new(h: f64, u_max: f64, x_max: f64) -> Result<Self> {
        let g = Self { h, u_max, x_max };
        g.validate()?;
        Ok(g)
    }

    /// Default extents for heavy-tailed data.
    pub fn heavy_tailed() -> Self {
        Self {
            x_max: 200.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid step h = {}", self.h)));
        }
        if !(self.u_max >= self.h && self.u_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("u_max = {}", self.u_max)));
        }
        if !(self.x_max >= self.h && self.x_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("x_max = {}", self.x_max)));
        }
        Ok(())
    }

    /// Number of cells covering `[0, extent]` (rounded to the nearest node).
    pub fn cells(&self, extent: f64) -> usize {
        (extent / self.h).round().max(1.0) as usize
    }

    pub fn u_cells(&self) -> usize {
        self.cells(self.u_max)
    }

    pub fn x_cells(&self) -> usize {
        self.cells(self.x_max)
    }
}

/// Values at the nodes `0, h, 2h, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(h: f64, values: Vec<f64>) -> Self {
        Self { h, values }
    }

    pub fn from_fn(h: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            h,
            values: (0..=n).map(|k| f(k as f64 * h)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Extent `(len - 1) h`.
    pub fn extent(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.h
    }

    /// Linear interpolation; `None` outside `[0, extent]`.
    pub fn at(&self, x: f64) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        interp(&self.values, self.h, x)
    }
}

/// Linear interpolation of nodal values `v` (node `k` at `k*h`) at `x`.
///
/// Returns `None` outside `[0, (len-1) h]`, with a relative slack at the
/// right end so that `x = u_max` survives rounding.
pub(crate) fn interp(v: &[f64], h: f64, x: f64) -> Option<f64> {
    let last = (v.len() - 1) as f64;
    let pos = x / h;
    if !(pos >= 0.0) || pos > last * (1.0 + 1e-12) + 1e-9 {
        return None;
    }
    let pos = pos.min(last);
    let k = (pos.floor() as usize).min(v.len().saturating_sub(2));
    if v.len() == 1 {
        return Some(v[0]);
    }
    let w = pos - k as f64;
    Some(v[k] * (1.0 - w) + v[k + 1] * w)
}

/// Cumulative trapezoid of nodal values, starting at 0.
pub(crate) fn cumulative_trapezoid(v: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..v.len() {
        acc += 0.5 * h * (v[k - 1] + v[k]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_hits_nodes_and_midpoints() {
        let v = [0.0, 1.0, 4.0];
        assert_eq!(interp(&v, 0.5, 0.0), Some(0.0));
        assert_eq!(interp(&v, 0.5, 0.25), Some(0.5));
        assert_eq!(interp(&v, 0.5, 1.0), Some(4.0));
        assert_eq!(interp(&v, 0.5, 1.1), None);
        assert_eq!(interp(&v, 0.5, -0.1), None);
    }

    #[test]
    fn cumulative_trapezoid_is_exact_for_linear() {
        let v: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let c = cumulative_trapezoid(&v, 0.1);
        assert!((c[10] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(GridParams::new(0.0, 10.0, 10.0).is_err());
        assert!(GridParams::new(0.01, 10.0, 10.0).is_ok());
    }
}
