//! Langevin-dynamics estimation of risk measures.
//!
//! The optimized Average Value-at-Risk of a parameterized payoff `f(r, S)` is
//! the value of the Rockafellar-Uryasev problem
//!
//! ```text
//! inf_{r, m}  m + E[(f(r, S) - m)^+] / (1 - u)
//! ```
//!
//! This crate minimizes a penalized sample version of that objective with an
//! ensemble of stochastic gradient Langevin dynamics (SGLD) chains and averages
//! the objective over the final chain states. The VaR and the optimal
//! portfolio fall out of the same chains. On top of the AVaR estimator, the
//! [`riskmeasure`] module searches over discrete mixtures of AVaR levels to
//! estimate general law-invariant risk measures such as the entropic VaR.
//!
//! Module map:
//!
//! - [`payoff`]: payoff families and their portfolio gradients
//! - [`objective`]: the sampled objective and its (sub)gradient
//! - [`sgld`]: the Langevin chain and the reproducible parallel ensemble
//! - [`avar`]: AVaR / VaR / portfolio estimates and the deviation constant
//! - [`riskmeasure`]: random-partition search over risk-level measures, EVaR
//! - [`oracles`]: closed-form Gaussian references and the empirical AVaR
//! - [`ingest`]: CSV price tables, increments, Gaussian samplers

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avar;
pub mod error;
pub mod ingest;
pub mod objective;
pub mod oracles;
pub mod payoff;
pub mod riskmeasure;
pub mod sgld;

pub use avar::{
    deviation_probability_bound, estimate_avar, psi_constant, EstimateReport, PathPoint,
};
pub use error::{Error, Result};
pub use ingest::{
    gaussian_sampler, load_csv, to_increments, write_csv, CsvOptions, NaPolicy, PriceTable,
};
pub use objective::{ChainState, ObjectiveConfig, PenaltyMode, SampleMode, SampleSet};
pub use oracles::GaussianSpec;
pub use payoff::{PayoffKind, PayoffModel};
pub use riskmeasure::{DiscreteRiskLevelMeasure, EvarConfig, EvarReport};
pub use sgld::{run_ensemble, ChainTrace, SgldConfig, StepSpec};
