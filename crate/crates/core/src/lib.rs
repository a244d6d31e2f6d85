//! Critical fluid model of a processor-sharing queue.
//!
//! The crate computes fluid model solutions from their convolution
//! representation (renewal function `U_e`, time change `T̄ = H_ξ ∗ U_e`),
//! measures distances between state measures (extended Prohorov metric and
//! total variation), and validates the model against a discrete-event
//! processor-sharing simulator.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod distributions;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod measures;
pub mod metrics;
pub mod quad;
pub mod renewal;
pub mod sim;
mod spec;
pub mod test_function;
pub mod validation;

pub use distributions::{Family, Moment, MomentOf, ServiceDistribution};
pub use error::{Error, Result};
pub use fluid::{solve, FluidSolution, StationarityGap};
pub use grid::{GridFunction, GridParams};
pub use measures::{Ball, GridMeasure, MeasureShape, MeasureSpec};
pub use metrics::{fit_rate, prohorov, prohorov_rate_constant, total_variation, Distance, RateReport};
pub use renewal::{compute_renewal_function, RenewalFunction};
pub use test_function::TestFunction;
