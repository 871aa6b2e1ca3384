//! Centralized common-information baselines: a fictitious coordinator treats
//! the joint action space as a single agent's arm set, so the bandit
//! baseline is UCB1 over `A * B` (or `A^D`) joint arms and the MDP baseline
//! is the follower's optimistic value iteration driven by the joint argmax.
//!
//! The shared-seed message-passing protocol that justifies this equivalence
//! collapses to a single agent in implementation; no message passing is
//! simulated.

use crate::bandit::{FollowerAlgorithm, Ucb1};
use crate::error::{Error, Result};
use crate::mdp::{FollowerQTables, MdpParams};
use crate::oracle::{FollowerPolicy, LeaderPolicy};

/// UCB1 state over a flattened joint action space. `dims` records the factor
/// sizes (e.g. `[A, B]`, or `[A; D]` for a deep instance), and joint arms
/// enumerate row-major so the tie order matches per-factor lowest-index
/// tie-breaking.
#[derive(Debug, Clone)]
pub struct JointArmState {
    ucb: Ucb1,
    dims: Vec<usize>,
}

impl JointArmState {
    pub fn new(dims: Vec<usize>, horizon: u64, delta: f64) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Contract(
                "joint action space needs at least one positive dimension".into(),
            ));
        }
        let total: usize = dims.iter().product();
        Ok(Self {
            ucb: Ucb1::new(total, horizon, delta)?,
            dims,
        })
    }

    /// Convenience constructor for the two-agent `[A, B]` case.
    pub fn for_bandit(
        num_leader_arms: usize,
        num_follower_arms: usize,
        horizon: u64,
        delta: f64,
    ) -> Result<Self> {
        Self::new(vec![num_leader_arms, num_follower_arms], horizon, delta)
    }

    pub fn num_joint_arms(&self) -> usize {
        self.ucb.num_arms()
    }

    /// The flattened UCB1 instance, for behavioral-identity checks.
    pub fn flat(&self) -> &Ucb1 {
        &self.ucb
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        out
    }

    fn flatten(&self, joint: &[usize]) -> Result<usize> {
        if joint.len() != self.dims.len() {
            return Err(Error::Contract(format!(
                "joint arm has {} factors, expected {}",
                joint.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0usize;
        for (&arm, &d) in joint.iter().zip(&self.dims) {
            if arm >= d {
                return Err(Error::IndexOutOfRange(format!("joint arm factor {arm} >= {d}")));
            }
            flat = flat * d + arm;
        }
        Ok(flat)
    }

    /// Selects a full joint action.
    pub fn select_joint(&self) -> Vec<usize> {
        self.unflatten(self.ucb.select())
    }

    /// Selects `(a, b)` in the two-agent case.
    pub fn select(&self) -> (usize, usize) {
        let joint = self.select_joint();
        (joint[0], joint[1])
    }

    pub fn observe_joint(&mut self, joint: &[usize], reward: f64) -> Result<()> {
        let flat = self.flatten(joint)?;
        self.ucb.observe(flat, reward)
    }

    pub fn observe(&mut self, leader_arm: usize, follower_arm: usize, reward: f64) -> Result<()> {
        self.observe_joint(&[leader_arm, follower_arm], reward)
    }
}

/// Centralized MDP baseline: the follower-side value iteration operated as a
/// single agent that selects the joint argmax `(a, b)` each step.
#[derive(Debug, Clone)]
pub struct CiMdpAgent {
    tables: FollowerQTables,
}

impl CiMdpAgent {
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_leader_actions: usize,
        num_follower_actions: usize,
        params: MdpParams,
    ) -> Result<Self> {
        Ok(Self {
            tables: FollowerQTables::new(
                horizon,
                num_states,
                num_leader_actions,
                num_follower_actions,
                params,
            )?,
        })
    }

    pub fn act(&self, state: usize, h: usize) -> (usize, usize) {
        self.tables.act_joint(state, h)
    }

    pub fn record_visit(
        &mut self,
        h: usize,
        state: usize,
        leader_action: usize,
        follower_action: usize,
        next_state: usize,
        reward: f64,
    ) {
        self.tables
            .record_visit(h, state, leader_action, follower_action, next_state, reward);
    }

    pub fn episode_update(&mut self) {
        self.tables.episode_update();
    }

    pub fn greedy_policy_pair(&self) -> (LeaderPolicy, FollowerPolicy) {
        self.tables.greedy_joint_policy()
    }

    pub fn tables(&self) -> &FollowerQTables {
        &self.tables
    }
}
