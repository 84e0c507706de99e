//! Numerical solvers for periodic portfolio selection with S-shaped
//! preferences and quasi-hyperbolic discounting in a Black-Scholes market.
//!
//! The crate computes optimal and equilibrium trading strategies for
//! pre-committing, naive, sophisticated, exponential-discounting and myopic
//! agents. The pipeline is: a lognormal pricing-kernel law with
//! discontinuity-aware quadrature ([`market`]), the concave majorant of the
//! one-period objective ([`envelope`]), the dual one-period solver
//! ([`one_period`]), contraction and set-valued fixed points that endogenize
//! the continuation weight ([`fixed_point`]), and agent-level strategy plans,
//! simulation and investment-level curves ([`agents`]).

pub mod agents;
pub mod envelope;
pub mod error;
pub mod fixed_point;
pub mod market;
pub mod one_period;
mod quad;
mod solve;

pub use error::{Error, Result};
pub use market::{
    kernel_law, validate, validate_with, KernelLaw, MarketParams, PreferenceParams, Tolerances,
    ValidatedModel,
};
