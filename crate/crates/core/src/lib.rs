//! Adversarial multi-armed bandits with multiple plays.
//!
//! Each round the learner selects `m` distinct arms out of `K`, observes the
//! gain of each selected arm only (semi-bandit feedback), and competes against
//! comparator strategies ranging from the best fixed m-arm to the best
//! strategy with at most `S` segments. The crate provides:
//!
//! - [`exp4mp`]: the expert-advice algorithm mixing underlying experts with a
//!   capped exponential-weights update and an implicit-exploration confidence
//!   bonus.
//! - [`exp3msp`]: the switching-strategy tracker that keeps `K` arm weights
//!   and applies a fixed-share style weight-sharing update.
//! - [`sampling`]: dependent rounding, which draws an m-subset whose per-arm
//!   membership probabilities match a fractional marginal vector.
//! - [`capping`]: the weight-capping threshold search that keeps every
//!   marginal probability at or below one.
//! - [`oracles`]: brute-force comparators (best fixed m-arm, best S-segment
//!   strategy, unconstrained optimum) and the exhaustive sequence-weighted
//!   reference used to certify the tracker's equivalence to an exponential
//!   update over all arm sequences.
//! - [`environments`]: adversarial game generators (stochastic shift, sudden
//!   change, random change with a planted optimum, an underlying-expert game,
//!   and latency-table ingestion).
//! - [`harness`]: seeded multi-trial experiment runner with CSV output and a
//!   uniform-random baseline.
//! - [`verify`]: the self-check suite run by the CLI and the acceptance test.
//!
//! Conventions: arms and rounds are 0-based `usize` indices throughout the
//! API; gains live in `[0, 1]`; all simplex-style sums are validated to a
//! tolerance of [`types::SIMPLEX_TOL`].

pub mod capping;
pub mod environments;
pub mod exp3msp;
pub mod exp4mp;
pub mod harness;
pub mod oracles;
pub mod sampling;
pub mod types;
pub mod verify;

pub use types::{
    count_segments, derive_seed, regret, total_gain, validate_actual_advice,
    validate_underlying_advice, AdviceMatrix, ArmSet, DomainError, GainMatrix, MarginalVector,
    RngStream, StrategyTrace, SIMPLEX_TOL,
};
