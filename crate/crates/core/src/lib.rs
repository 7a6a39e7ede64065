//! Simultaneous prediction intervals and max-type multiple tests for linear
//! mixed models with block-diagonal covariance (nested error regression and
//! Fay-Herriot models).
//!
//! Critical values come from a parametric bootstrap, a Monte Carlo draw from
//! the joint normal approximation, Bonferroni, Beran's balanced intervals or
//! a volume-of-tube bound.

pub mod analytic;
pub mod bootstrap;
pub mod error;
pub mod estimation;
pub mod maxstat;
pub mod mc;
pub mod model;
pub mod orderstat;
pub mod seeds;
pub mod sim;

pub use error::{Error, Result};
pub use estimation::{eblup, fit_gls_blup, reml_fit, FitResult, RemlEstimate, VarianceComponents};
pub use maxstat::{CriticalValue, Method, SimultaneousIntervals};
pub use model::{BlockLmmData, ClusterBlock, MixedParameterSpec, ModelKind};
