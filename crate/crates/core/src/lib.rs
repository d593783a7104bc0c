//! Analysis toolkit for everlasting privacy and report untrackability in the
//! local model.
//!
//! Long-running telemetry collection keeps individual reports private by
//! correlating them (a permanent noisy state replayed at every collection),
//! but the correlation itself lets an observer link reports back to one
//! client. This crate provides the machinery to quantify that trade-off:
//!
//! - [`bounds`] — closed-form calculus for (ε, δ) privacy and (γ, δ)
//!   untrackability: chaining, advanced composition, permanent-state and
//!   multi-user bounds, and the tightness search for chained mechanisms.
//! - [`mech`] — finite stateless and permanent-state mechanisms with exact
//!   brute-force oracles for the untrackable, everlasting-privacy, and
//!   undetectable parameters.
//! - [`rappor`] — the RAPPOR report pipeline (Bloom encoding, permanent and
//!   instantaneous randomization), its worst-case trackability enumeration,
//!   and Monte-Carlo percentile estimation of the trackability random
//!   variable.
//! - [`bitwise`] — the single-bit everlasting-privacy mechanism: doubly
//!   randomized response with a remembered bit, frequency oracle, accuracy
//!   and trackability bounds.
//! - [`rnip`] — report-noisy-inner-product for d-bit values: stored noisy
//!   inner products replayed at random, the dense frequency oracle,
//!   parameter selection, and collision accounting.
//! - [`prob`], [`percentile`], [`rng`] — deterministic seedable randomness
//!   and the shared probability utilities (Bernoulli algebra, binomial CDF,
//!   Chernoff radius, order-statistic confidence intervals).
//!
//! All Monte-Carlo entry points take a [`SeededRng`] and derive one child
//! stream per sample, so results are bit-identical whether the sample loop
//! runs serially or data-parallel (the `parallel` feature, on by default,
//! runs it on rayon).
//!
//! ```
//! use untrack_core::bitwise::{self, BitwiseParams};
//! use untrack_core::bounds::permanent_state_untrackable;
//! use untrack_core::mech::{exact_untrackable_gamma, OracleBudget};
//!
//! // How linkable are four reports from the bitwise mechanism, exactly?
//! let params = BitwiseParams::new(0.5, 1.0).unwrap();
//! let mech = bitwise::as_permanent_mechanism(&params);
//! let gamma = exact_untrackable_gamma(&mech, 4, OracleBudget::default()).unwrap();
//! let bound = permanent_state_untrackable(params.eps2, 4);
//! assert!(gamma <= bound + 1e-12);
//! ```

pub mod bitwise;
pub mod bounds;
pub mod error;
pub mod mech;
pub mod parallel;
pub mod percentile;
pub mod prob;
pub mod rappor;
pub mod rng;
pub mod rnip;

pub use error::{Error, Result};
pub use percentile::{percentile_with_ci, PercentileEstimate};
pub use prob::Probability;
pub use rng::SeededRng;
