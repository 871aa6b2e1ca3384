//! Decentralized no-coordination learning for hierarchical two-agent
//! bandits, multi-follower bandits, deep-hierarchy bandits, and two-agent
//! episodic tabular MDPs.
//!
//! In each round (or step) the leader acts first and never observes the
//! follower's action; the follower acts after seeing the leader's, and both
//! observe the same reward. The leader compensates for the follower's
//! learning by inflating her exploration bonus; the follower plans over the
//! joint action space. The crate ships the learners, centralized
//! common-information baselines, exact oracles for regret accounting and
//! optimism/dominance invariant checks, and a seeded experiment harness.

pub mod bandit;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod instance;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use harness::{run, run_seeds, Algorithm, Constants, Diagnostics, RunConfig};
pub use instance::{
    BanditInstance, DeepBanditInstance, Instance, MdpInstance, MultiFollowerInstance, NoiseKind,
};
pub use oracle::{compute_optimal_profile, OptimalProfile};
pub use trace::{aggregate, growth_exponent, RegretTrace, Summary};
