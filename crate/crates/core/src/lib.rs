//! Evaluation, solving and theorem checking for finite average-reward
//! Markov decision processes in which every stationary policy induces an
//! irreducible chain (unichain MDPs).
//!
//! The crate covers:
//!
//! * [`model`]: the MDP data model, validation and induced chains;
//! * [`chain`]: stationary distributions, average rewards and Cesàro
//!   averaging for reducible chains;
//! * [`closed_form`]: `O(|S|)` stationary-distribution updates for
//!   policies differing in one or two states;
//! * [`solver`]: brute-force optimal sets and policy iteration;
//! * [`theorem`]: closure checks for combinations and mixtures of
//!   optimal policies;
//! * [`sim`]: trajectory simulation under non-stationary schedules;
//! * [`format`], [`fixtures`], [`generate`]: instance I/O and sources.

// `!(x <= tol)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod closed_form;
mod error;
pub mod fixtures;
pub mod format;
pub mod generate;
mod linalg;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;
pub mod theorem;

pub use chain::{
    average_reward, cesaro_gain, mixed_average_reward, stationary_distribution, GainMethod,
    GainReport, StationaryDistribution,
};
pub use error::{Error, Result};
pub use model::{
    check_unichain_exhaustive, induced_chain, induced_mixed_chain, is_irreducible, validate_mdp,
    MdpModel, TransitionMatrix, Violation,
};
pub use policy::{MixedPolicy, PurePolicy};
pub use solver::{brute_force_optimal_set, enumerate_policies, policy_iteration, OptimalSet, TieBreak};
