use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A member of the class `{g ∈ C_b^1(R+) : g(0) = 0, g'(0) = 0}` together
/// with its derivative and sup bounds.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    g: RealFn,
    g_prime: RealFn,
    sup_g: f64,
    sup_g_prime: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("sup_g", &self.sup_g)
            .field("sup_g_prime", &self.sup_g_prime)
            .finish()
    }
}

const SAMPLE_EXTENT: f64 = 200.0;
const SAMPLE_STEP: f64 = 0.01;

impl TestFunction {
    /// Validates `g(0) = 0`, `g'(0) = 0` and the declared sup bounds on a
    /// sampled grid over `[0, 200]`.
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_g: f64,
        sup_g_prime: f64,
    ) -> Result<Self> {
        let name = name.into();
        let g0 = g(0.0);
        let gp0 = g_prime(0.0);
        if g0.abs() > 1e-12 {
            return Err(Error::TestFunctionInvalid(format!("{name}: g(0) = {g0}")));
        }
        if gp0.abs() > 1e-12 {
            return Err(Error::TestFunctionInvalid(format!("{name}: g'(0) = {gp0}")));
        }
        let n = (SAMPLE_EXTENT / SAMPLE_STEP) as usize;
        for k in 0..=n {
            let x = k as f64 * SAMPLE_STEP;
            let (v, d) = (g(x), g_prime(x));
            if !(v.abs() <= sup_g * (1.0 + 1e-12)) || !(d.abs() <= sup_g_prime * (1.0 + 1e-12)) {
                return Err(Error::TestFunctionInvalid(format!(
                    "{name}: sup bound violated at x = {x} (g = {v}, g' = {d})"
                )));
            }
        }
        Ok(Self {
            name,
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            sup_g,
            sup_g_prime,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn eval_prime(&self, x: f64) -> f64 {
        (self.g_prime)(x)
    }

    pub fn sup(&self) -> f64 {
        self.sup_g
    }

    pub fn sup_prime(&self) -> f64 {
        self.sup_g_prime
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        let (g, gp) = (self.g.clone(), self.g_prime.clone());
        TestFunction {
            name: format!("{}*{}", c, self.name),
            g: Arc::new(move |x| c * g(x)),
            g_prime: Arc::new(move |x| c * gp(x)),
            sup_g: c.abs() * self.sup_g,
            sup_g_prime: c.abs() * self.sup_g_prime,
        }
    }

    /// Six smooth members of the class used throughout the checks.
    pub fn standard_suite() -> Vec<TestFunction> {
        let mut v = vec![
            TestFunction::new(
                "1-exp(-x^2)",
                |x| -(-x * x).exp_m1(),
                |x| 2.0 * x * (-x * x).exp(),
                1.0,
                1.0,
            ),
            TestFunction::new(
                "x^2/(1+x^2)",
                |x| x * x / (1.0 + x * x),
                |x| 2.0 * x / (1.0 + x * x).powi(2),
                1.0,
                0.65,
            ),
            TestFunction::new(
                "x^2 exp(-x)",
                |x| x * x * (-x).exp(),
                |x| (2.0 * x - x * x) * (-x).exp(),
                0.55,
                0.5,
            ),
            TestFunction::new(
                "tanh(x)^2",
                |x| x.tanh().powi(2),
                |x| 2.0 * x.tanh() / x.cosh().powi(2),
                1.0,
                0.77,
            ),
            TestFunction::new(
                "atan(x^2)",
                |x| (x * x).atan(),
                |x| 2.0 * x / (1.0 + x.powi(4)),
                std::f64::consts::FRAC_PI_2,
                1.2,
            ),
        ]
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .expect("standard suite is valid");
        let scaled = v[0].scaled(5.0);
        v.push(scaled);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonzero_value_or_slope_at_origin() {
        let e = TestFunction::new("x", |x| x, |_| 1.0, 1e9, 1.0).unwrap_err();
        assert!(matches!(e, Error::TestFunctionInvalid(_)));
        let e = TestFunction::new("1+x^2", |x| 1.0 + x * x, |x| 2.0 * x, 1e9, 1e9).unwrap_err();
        assert!(matches!(e, Error::TestFunctionInvalid(_)));
    }

    #[test]
    fn rejects_wrong_sup_bound() {
        assert!(TestFunction::new(
            "g",
            |x| x * x / (1.0 + x * x),
            |x| 2.0 * x / (1.0 + x * x).powi(2),
            0.5,
            1.0
        )
        .is_err());
    }

    #[test]
    fn suite_has_six_members() {
        let s = TestFunction::standard_suite();
        assert_eq!(s.len(), 6);
        assert!((s[5].eval(1.0) - 5.0 * s[0].eval(1.0)).abs() < 1e-15);
    }
}
