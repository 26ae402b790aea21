//! Exact tabular toolkit for configurable Markov decision processes on
//! finite metric spaces.
//!
//! The crate computes value functions, gamma-discounted stationary
//! distributions, Wasserstein distances, and Lipschitz semi-norms exactly
//! (direct linear solves, exact optimal transport, exhaustive pair
//! enumeration), evaluates the distribution-shift and performance
//! improvement bounds that hold for Lipschitz-continuous policies and
//! configurations, and runs a bound-guided safe policy-configuration
//! improvement loop.
//!
//! Modules:
//! - [`metric`]: finite metric spaces, distributions, exact 1-Wasserstein
//!   transport, Lipschitz semi-norms.
//! - [`mdp`]: Conf-MDP instances, policies, configurations, value bundles,
//!   discounted distributions, expected returns.
//! - [`advantage`]: pointwise, relative, and expected advantage functions.
//! - [`lipschitz`]: exact Lipschitz constants of rewards, policies,
//!   configurations, and value functions, plus the theoretical semi-norm
//!   bounds.
//! - [`bounds`]: evaluators for the distribution-shift bounds, the
//!   performance difference identity, the improvement lower bounds, and
//!   the supporting inequality checks.
//! - [`improvement`]: the safe policy-configuration improvement loop.
//! - [`generators`]: seeded random instances and benchmark environments.
//! - [`suite`]: the instance-level verification checks shared by the test
//!   suites and the command-line harness.

pub mod advantage;
pub mod bounds;
mod error;
pub mod generators;
pub mod improvement;
pub mod lipschitz;
pub mod mdp;
pub mod metric;
pub mod suite;

pub use error::{Error, Result};
