//! Hierarchical bandit agents: the leader's UCB index policy with the
//! follower-regret-inflated bonus, per-leader-arm follower algorithm
//! instances, and the multi-layer agents for deep hierarchies.

use std::collections::HashMap;

use crate::error::{Error, Result};

fn check_reward(reward: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&reward) {
        return Err(Error::Contract(format!("reward {reward} outside [0, 1]")));
    }
    Ok(())
}

fn argmax_lowest(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.enumerate() {
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Leader
// ---------------------------------------------------------------------------

/// Leader-side parameters. `avg_follower_arms` is `B` for a single follower
/// and `(1/N) sum_i B^i` when there are several.
#[derive(Debug, Clone, Copy)]
pub struct LeaderParams {
    pub kappa: f64,
    pub c: f64,
    /// Total number of rounds `T`.
    pub horizon: u64,
    pub delta: f64,
    pub avg_follower_arms: f64,
}

impl LeaderParams {
    pub fn new(kappa: f64, c: f64, horizon: u64, delta: f64, avg_follower_arms: f64) -> Result<Self> {
        if kappa < 1.0 {
            return Err(Error::Contract(format!("kappa {kappa} < 1")));
        }
        if c <= 0.0 {
            return Err(Error::Contract(format!("c {c} must be positive")));
        }
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::Contract(format!("delta {delta} outside (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::Contract("round horizon T must be >= 1".into()));
        }
        if avg_follower_arms <= 0.0 {
            return Err(Error::Contract(format!(
                "average follower arm count {avg_follower_arms} must be positive"
            )));
        }
        Ok(Self {
            kappa,
            c,
            horizon,
            delta,
            avg_follower_arms,
        })
    }

    /// Parameters for a leader facing several followers, with `B` set to the
    /// average arm count. The selection rule is otherwise unchanged.
    pub fn for_multi_follower(
        kappa: f64,
        c: f64,
        horizon: u64,
        delta: f64,
        follower_arm_counts: &[usize],
    ) -> Result<Self> {
        if follower_arm_counts.is_empty() {
            return Err(Error::Contract("at least one follower required".into()));
        }
        let avg = follower_arm_counts.iter().sum::<usize>() as f64
            / follower_arm_counts.len() as f64;
        Self::new(kappa, c, horizon, delta, avg)
    }

    fn log_term(&self) -> f64 {
        (self.horizon as f64 / self.delta).ln()
    }
}

/// Per-arm counts and reward sums for the leader, selecting by
/// `mu_hat(a) + sqrt(kappa B log(T/delta) / n+) + c sqrt(log(T/delta) / n+)`.
///
/// There is no forced initialization round: unplayed arms use `n+ = max(n, 1)`
/// and an empirical mean of zero.
#[derive(Debug, Clone)]
pub struct LeaderBanditState {
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    round: u64,
    params: LeaderParams,
    log_term: f64,
}

impl LeaderBanditState {
    pub fn new(num_arms: usize, params: LeaderParams) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::Contract("leader needs at least one arm".into()));
        }
        Ok(Self {
            counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            round: 0,
            log_term: params.log_term(),
            params,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn empirical_mean(&self, arm: usize) -> f64 {
        self.reward_sums[arm] / (self.counts[arm].max(1) as f64)
    }

    fn index(&self, arm: usize) -> f64 {
        let n_plus = self.counts[arm].max(1) as f64;
        self.empirical_mean(arm)
            + (self.params.kappa * self.params.avg_follower_arms * self.log_term / n_plus).sqrt()
            + self.params.c * (self.log_term / n_plus).sqrt()
    }

    /// Arm with the largest index; ties break toward the lowest arm.
    pub fn select_arm(&self) -> usize {
        argmax_lowest((0..self.num_arms()).map(|a| self.index(a)))
    }

    pub fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_reward(reward)?;
        if arm >= self.num_arms() {
            return Err(Error::IndexOutOfRange(format!("leader arm {arm}")));
        }
        self.counts[arm] += 1;
        self.reward_sums[arm] += reward;
        self.round += 1;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Followers
// ---------------------------------------------------------------------------

/// A follower-side bandit algorithm run independently per leader arm. The
/// leader's bonus assumes a high-probability sub-linear regret guarantee
/// from whatever implements this.
pub trait FollowerAlgorithm {
    fn num_arms(&self) -> usize;
    fn select(&self) -> usize;
    fn observe(&mut self, arm: usize, reward: f64) -> Result<()>;
    fn pull_count(&self, arm: usize) -> u64;
    fn total_pulls(&self) -> u64;
}

/// UCB1 with the fixed-budget confidence term `sqrt(2 log(T/delta) / n)` and
/// classical forced initialization (each unplayed arm once, lowest first).
#[derive(Debug, Clone)]
pub struct Ucb1 {
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    log_term: f64,
}

impl Ucb1 {
    pub fn new(num_arms: usize, horizon: u64, delta: f64) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::Contract("UCB1 needs at least one arm".into()));
        }
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::Contract(format!("delta {delta} outside (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::Contract("round horizon T must be >= 1".into()));
        }
        Ok(Self {
            counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            log_term: (horizon as f64 / delta).ln(),
        })
    }

    pub fn empirical_mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.reward_sums[arm] / self.counts[arm] as f64
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl FollowerAlgorithm for Ucb1 {
    fn num_arms(&self) -> usize {
        self.counts.len()
    }

    fn select(&self) -> usize {
        if let Some(unplayed) = self.counts.iter().position(|&n| n == 0) {
            return unplayed;
        }
        argmax_lowest((0..self.num_arms()).map(|b| {
            self.empirical_mean(b) + (2.0 * self.log_term / self.counts[b] as f64).sqrt()
        }))
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_reward(reward)?;
        if arm >= self.num_arms() {
            return Err(Error::IndexOutOfRange(format!("follower arm {arm}")));
        }
        self.counts[arm] += 1;
        self.reward_sums[arm] += reward;
        Ok(())
    }

    fn pull_count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    fn total_pulls(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One independent follower algorithm instance per leader arm; the instance
/// for arm `a` is consulted and updated only on rounds where the leader
/// played `a`.
#[derive(Debug, Clone)]
pub struct FollowerBank<F: FollowerAlgorithm = Ucb1> {
    instances: Vec<F>,
}

impl FollowerBank<Ucb1> {
    pub fn new_ucb1(
        num_leader_arms: usize,
        num_follower_arms: usize,
        horizon: u64,
        delta: f64,
    ) -> Result<Self> {
        let instances = (0..num_leader_arms)
            .map(|_| Ucb1::new(num_follower_arms, horizon, delta))
            .collect::<Result<Vec<_>>>()?;
        Self::from_instances(instances)
    }
}

impl<F: FollowerAlgorithm> FollowerBank<F> {
    pub fn from_instances(instances: Vec<F>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Contract("follower bank needs at least one leader arm".into()));
        }
        Ok(Self { instances })
    }

    pub fn num_leader_arms(&self) -> usize {
        self.instances.len()
    }

    pub fn instance(&self, leader_arm: usize) -> &F {
        &self.instances[leader_arm]
    }

    pub fn select(&self, leader_arm: usize) -> usize {
        self.instances[leader_arm].select()
    }

    pub fn observe(&mut self, leader_arm: usize, follower_arm: usize, reward: f64) -> Result<()> {
        self.instances[leader_arm].observe(follower_arm, reward)
    }
}

// ---------------------------------------------------------------------------
// Deep hierarchy
// ---------------------------------------------------------------------------

/// Bonus constants for a depth-`D` hierarchy: `C_D = last_layer_constant`
/// and `C_d = 6 C_{d+1} + 8` going upward. Returned as `[C_1, ..., C_D]`.
pub fn deep_constants(depth: usize, last_layer_constant: f64) -> Result<Vec<f64>> {
    if depth < 2 {
        return Err(Error::Contract(format!("depth {depth} < 2")));
    }
    if last_layer_constant < 2.0 {
        return Err(Error::Contract(format!(
            "C_D = {last_layer_constant} < 2"
        )));
    }
    let mut constants = vec![0.0; depth];
    constants[depth - 1] = last_layer_constant;
    for d in (0..depth - 1).rev() {
        constants[d] = 6.0 * constants[d + 1] + 8.0;
    }
    Ok(constants)
}

/// Agent at layer `d` of a deep hierarchy. It keeps a count and reward sum
/// per observed prefix `(a^1, ..., a^d)` and selects by
/// `mu_hat(prefix, a) + C_d sqrt(A^{D-d} log(A^D T / delta) / n+)`.
#[derive(Debug, Clone)]
pub struct DeepAgentState {
    layer: usize,
    depth: usize,
    arms_per_layer: usize,
    bonus_constant: f64,
    log_term: f64,
    stats: HashMap<Vec<usize>, (u64, f64)>,
}

impl DeepAgentState {
    /// `layer` is 1-based (`1..=depth`); `bonus_constant` is this layer's
    /// `C_d` from [`deep_constants`].
    pub fn new(
        layer: usize,
        depth: usize,
        arms_per_layer: usize,
        bonus_constant: f64,
        horizon: u64,
        delta: f64,
    ) -> Result<Self> {
        if layer == 0 || layer > depth {
            return Err(Error::Contract(format!("layer {layer} outside 1..={depth}")));
        }
        if arms_per_layer == 0 {
            return Err(Error::Contract("arms_per_layer must be >= 1".into()));
        }
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::Contract(format!("delta {delta} outside (0, 1)")));
        }
        let joint_actions = (arms_per_layer as f64).powi(depth as i32);
        Ok(Self {
            layer,
            depth,
            arms_per_layer,
            bonus_constant,
            log_term: (joint_actions * horizon as f64 / delta).ln(),
            stats: HashMap::new(),
        })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn count(&self, own_prefix: &[usize]) -> u64 {
        self.stats.get(own_prefix).map_or(0, |&(n, _)| n)
    }

    pub fn empirical_mean(&self, own_prefix: &[usize]) -> f64 {
        match self.stats.get(own_prefix) {
            Some(&(n, sum)) => sum / (n.max(1) as f64),
            None => 0.0,
        }
    }

    fn bonus(&self, count: u64) -> f64 {
        let n_plus = count.max(1) as f64;
        let subtree = (self.arms_per_layer as f64).powi((self.depth - self.layer) as i32);
        self.bonus_constant * (subtree * self.log_term / n_plus).sqrt()
    }

    /// Chooses this layer's arm given the arms of layers `1..d-1`.
    pub fn select_arm(&self, upstream_prefix: &[usize]) -> usize {
        assert_eq!(
            upstream_prefix.len(),
            self.layer - 1,
            "layer {} expects a prefix of length {}",
            self.layer,
            self.layer - 1
        );
        let mut key = Vec::with_capacity(self.layer);
        key.extend_from_slice(upstream_prefix);
        key.push(0);
        argmax_lowest((0..self.arms_per_layer).map(|arm| {
            key[self.layer - 1] = arm;
            self.empirical_mean(&key) + self.bonus(self.count(&key))
        }))
    }

    /// Records the round's reward under this agent's own prefix
    /// `(a^1, ..., a^d)`.
    pub fn observe(&mut self, own_prefix: &[usize], reward: f64) -> Result<()> {
        check_reward(reward)?;
        if own_prefix.len() != self.layer {
            return Err(Error::Contract(format!(
                "layer {} observation needs a prefix of length {}, got {}",
                self.layer,
                self.layer,
                own_prefix.len()
            )));
        }
        if own_prefix.iter().any(|&a| a >= self.arms_per_layer) {
            return Err(Error::IndexOutOfRange(format!(
                "prefix {own_prefix:?} with {} arms per layer",
                self.arms_per_layer
            )));
        }
        let entry = self.stats.entry(own_prefix.to_vec()).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += reward;
        Ok(())
    }
}
