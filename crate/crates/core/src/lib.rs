//! Robust learning from data pooled across heterogeneous contexts.
//!
//! Training data arrives as (context, features, response) triples where the
//! context marginal of the deployment distribution is unknown. This crate
//! fits a decision parameter by minimizing the worst-case empirical excess
//! risk over a KL confidence set of context distributions
//!
//! ```text
//! P_beta = { p on the simplex : D(p_hat || p) <= eps(n, |C|, beta) }
//! ```
//!
//! where `p_hat` is the empirical context frequency vector and `eps` shrinks
//! at rate log(n)/n. The inner maximization over `P_beta` is solved exactly
//! from its KKT conditions ([`inner_solver`]); the outer minimization runs
//! projected subgradient descent with the inner solution's Danskin gradient
//! ([`optimize::fit_robust`]). Classical ERM and a group-DRO style minimax
//! baseline share the same interfaces, and [`synthetic`] + [`evaluate`]
//! provide the data generators and Monte Carlo harness used to compare them.
//!
//! All divergences and confidence radii are measured in bits (logs base 2).

pub mod confidence;
pub mod error;
pub mod evaluate;
pub mod inner_solver;
pub mod losses;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod synthetic;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
