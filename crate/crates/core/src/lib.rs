//! Combinatorial semi-bandits with black-box rewards.
//!
//! GT+QTS samples a parameter from a Beta posterior each round and asks a
//! group-testing oracle for the best `K`-subset, spending `O(log m)` reward
//! queries instead of the `m` that Oracle+ needs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod bandit;
pub mod error;
pub mod experiment;
pub mod gaps;
pub mod oracle;
pub mod posterior;
pub mod quantizer;
pub mod reward;
pub mod rng;
pub mod trace;
pub mod verify;

pub use algorithm::{run, AlgorithmConfig, AlgorithmKind, Budget, QMode, RunOutput};
pub use bandit::{BanditInstance, Family, Feedback, MeanVector, SuperArm};
pub use error::{Error, Result};
pub use posterior::PosteriorState;
pub use quantizer::Quantizer;
pub use reward::{NnWeights, RewardModel};
pub use rng::{Seed, Stream};
pub use trace::RegretTrace;
