//! U-statistics of block-local sample moments for testing constancy of
//! variance, skewness and kurtosis in weakly dependent time series.
//!
//! A series is cut into `b` consecutive blocks of length `l`; each block
//! contributes `W_j = sqrt(l) g(local moments)` and the test statistic is
//! `U_n = (b (b - 1))^{-1} sum_{j != k} h(W_j, W_k)`. The crate also ships
//! seeded Bernoulli-shift simulators, physical dependence coefficients and
//! a Monte Carlo harness for the limit theorems.

pub mod asymptotics;
pub mod blocks;
pub mod dependence;
pub mod error;
pub mod gfuncs;
pub mod gof;
pub mod harness;
pub mod numeric;
pub mod processes;
pub mod quadrature;
pub mod rng;
pub mod ustat;

pub use asymptotics::{CenteringMethod, LimitLaw};
pub use blocks::{local_moments, local_statistics, partition, BlockScheme, LocalMoments, Series};
pub use error::{Error, Result};
pub use gfuncs::{GPreset, GRegistry, GSpec};
pub use processes::{generate, generate_coupled, ProcessSpec};
pub use ustat::{u_statistic, Distribution, KernelSpec, TestReport};
