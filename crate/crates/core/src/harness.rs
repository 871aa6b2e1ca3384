//! Run orchestration: wires environments to agents round by round (or
//! episode by episode), collects regret traces, optionally checks the
//! optimism and dominance invariants against the exact oracle, and fans
//! runs out across seeds.

use ndarray::Array4;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::bandit::{DeepAgentState, FollowerBank, LeaderBanditState, LeaderParams, deep_constants};
use crate::baselines::{CiMdpAgent, JointArmState};
use crate::error::{Error, Result};
use crate::instance::{BanditInstance, DeepBanditInstance, Instance, MdpInstance, MultiFollowerInstance};
use crate::mdp::{greedy_policies, FollowerQTables, LeaderQTables, MdpParams, Step};
use crate::oracle::{compute_optimal_profile, evaluate_policy_pair, instantaneous_regret, Chosen, OptimalProfile};
use crate::rng::{stream_rng, RunRng, Stream};
use crate::trace::{QSnapshot, RegretTrace};

/// Which algorithm a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    HierBandit,
    MultiFollower,
    Deep,
    HierMdp,
    CiBandit,
    CiMdp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HierBandit => "hier-bandit",
            Algorithm::MultiFollower => "multi-follower",
            Algorithm::Deep => "deep",
            Algorithm::HierMdp => "hier-mdp",
            Algorithm::CiBandit => "ci-bandit",
            Algorithm::CiMdp => "ci-mdp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "hier-bandit" => Algorithm::HierBandit,
            "multi-follower" => Algorithm::MultiFollower,
            "deep" => Algorithm::Deep,
            "hier-mdp" => Algorithm::HierMdp,
            "ci-bandit" => Algorithm::CiBandit,
            "ci-mdp" => Algorithm::CiMdp,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown algorithm `{other}`"
                )))
            }
        })
    }
}

/// Algorithm constants, all overridable per run.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub c_prime: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Deepest-layer bonus constant `C_D`.
    #[serde(rename = "C_D", default = "default_c_last")]
    pub deep_last_constant: f64,
    /// Exponent on `S` in the leader's MDP bonus; 1 unless ablating.
    #[serde(default = "one")]
    pub bns1_s_exponent: f64,
}

fn one() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.01
}

fn default_c_last() -> f64 {
    2.0
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_prime: 1.0,
            kappa: 1.0,
            delta: 0.01,
            deep_last_constant: 2.0,
            bns1_s_exponent: 1.0,
        }
    }
}

/// Diagnostics switches.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Check the optimism and dominance invariants against the oracle after
    /// every episode (hier-mdp runs only).
    #[serde(default)]
    pub check_invariants: bool,
    /// Snapshot the Q tables every this many episodes (0 = off).
    #[serde(default)]
    pub snapshot_every: u64,
}

/// A fully resolved run: what to execute and for how long. Seeds are
/// supplied separately so one config can fan out across seeds.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Rounds (bandits) or episodes (MDPs).
    pub horizon: u64,
    pub instance: Instance,
    pub constants: Constants,
    pub diagnostics: Diagnostics,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: String,
    #[serde(rename = "T")]
    horizon: u64,
    instance: Value,
    #[serde(default)]
    constants: Option<Constants>,
    #[serde(default)]
    diagnostics: Option<Diagnostics>,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let config = Self {
            algorithm: Algorithm::parse(&raw.algorithm)?,
            horizon: raw.horizon,
            instance: Instance::from_json_value(&raw.instance)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            constants: raw.constants.unwrap_or_default(),
            diagnostics: raw.diagnostics.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("T must be >= 1".into()));
        }
        let d = self.constants.delta;
        if !(0.0 < d && d < 1.0) {
            return Err(Error::InvalidConfig(format!("delta {d} outside (0, 1)")));
        }
        let compatible = matches!(
            (self.algorithm, &self.instance),
            (Algorithm::HierBandit, Instance::Bandit(_))
                | (Algorithm::CiBandit, Instance::Bandit(_))
                | (Algorithm::CiBandit, Instance::Deep(_))
                | (Algorithm::MultiFollower, Instance::MultiFollower(_))
                | (Algorithm::Deep, Instance::Deep(_))
                | (Algorithm::HierMdp, Instance::Mdp(_))
                | (Algorithm::CiMdp, Instance::Mdp(_))
        );
        if !compatible {
            return Err(Error::AlgorithmInstanceMismatch {
                algorithm: self.algorithm.name().into(),
                instance: self.instance.kind_name().into(),
            });
        }
        Ok(())
    }

    /// Canonical JSON echo of the resolved configuration (used for trace
    /// provenance and summary output).
    pub fn to_json_value(&self) -> Value {
        json!({
            "algorithm": self.algorithm.name(),
            "T": self.horizon,
            "instance": self.instance.to_json_value(),
            "constants": {
                "c": self.constants.c,
                "c_prime": self.constants.c_prime,
                "kappa": self.constants.kappa,
                "delta": self.constants.delta,
                "C_D": self.constants.deep_last_constant,
                "bns1_s_exponent": self.constants.bns1_s_exponent,
            },
            "diagnostics": {
                "check_invariants": self.diagnostics.check_invariants,
                "snapshot_every": self.diagnostics.snapshot_every,
            },
        })
    }
}

/// Outcome of one protocol round or episode.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub regret: f64,
    /// `(optimism, dominance)` violation counts, when checked.
    pub violations: Option<(u64, u64)>,
}

// ---------------------------------------------------------------------------
// Bandit sessions
// ---------------------------------------------------------------------------

/// One seeded two-agent bandit run: leader selects, follower observes the
/// leader's arm and selects, both observe the same reward sample and update.
pub struct BanditSession {
    instance: BanditInstance,
    wrapped: Instance,
    profile: OptimalProfile,
    leader: LeaderBanditState,
    followers: FollowerBank,
    rewards_rng: RunRng,
}

impl BanditSession {
    pub fn new(
        instance: &BanditInstance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let params = LeaderParams::new(
            constants.kappa,
            constants.c,
            horizon,
            constants.delta,
            instance.num_follower_arms() as f64,
        )?;
        let wrapped = Instance::Bandit(instance.clone());
        Ok(Self {
            profile: compute_optimal_profile(&wrapped),
            leader: LeaderBanditState::new(instance.num_leader_arms(), params)?,
            followers: FollowerBank::new_ucb1(
                instance.num_leader_arms(),
                instance.num_follower_arms(),
                horizon,
                constants.delta,
            )?,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            instance: instance.clone(),
            wrapped,
        })
    }

    pub fn advance(&mut self) -> Result<StepRecord> {
        let a = self.leader.select_arm();
        let b = self.followers.select(a);
        let r = self.instance.sample_reward(a, b, &mut self.rewards_rng)?;
        self.leader.observe(a, r)?;
        self.followers.observe(a, b, r)?;
        let regret = instantaneous_regret(
            &self.profile,
            &self.wrapped,
            Chosen::BanditAction {
                leader_arm: a,
                follower_arm: b,
            },
        )?;
        Ok(StepRecord {
            regret,
            violations: None,
        })
    }

    pub fn leader(&self) -> &LeaderBanditState {
        &self.leader
    }

    pub fn followers(&self) -> &FollowerBank {
        &self.followers
    }
}

/// One seeded multi-follower run. Each follower draws its own reward; the
/// leader observes the average.
pub struct MultiFollowerSession {
    instance: MultiFollowerInstance,
    wrapped: Instance,
    profile: OptimalProfile,
    leader: LeaderBanditState,
    follower_banks: Vec<FollowerBank>,
    rewards_rng: RunRng,
    chosen_arms: Vec<usize>,
}

impl MultiFollowerSession {
    pub fn new(
        instance: &MultiFollowerInstance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let params = LeaderParams::for_multi_follower(
            constants.kappa,
            constants.c,
            horizon,
            constants.delta,
            &instance.follower_arm_counts(),
        )?;
        let follower_banks = instance
            .follower_arm_counts()
            .iter()
            .map(|&b| {
                FollowerBank::new_ucb1(instance.num_leader_arms(), b, horizon, constants.delta)
            })
            .collect::<Result<Vec<_>>>()?;
        let wrapped = Instance::MultiFollower(instance.clone());
        Ok(Self {
            profile: compute_optimal_profile(&wrapped),
            leader: LeaderBanditState::new(instance.num_leader_arms(), params)?,
            follower_banks,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            chosen_arms: vec![0; instance.num_followers()],
            instance: instance.clone(),
            wrapped,
        })
    }

    pub fn advance(&mut self) -> Result<StepRecord> {
        let a = self.leader.select_arm();
        let mut reward_total = 0.0;
        for i in 0..self.instance.num_followers() {
            let b = self.follower_banks[i].select(a);
            let r = self
                .instance
                .sample_follower_reward(i, a, b, &mut self.rewards_rng)?;
            self.follower_banks[i].observe(a, b, r)?;
            self.chosen_arms[i] = b;
            reward_total += r;
        }
        self.leader
            .observe(a, reward_total / self.instance.num_followers() as f64)?;
        let regret = instantaneous_regret(
            &self.profile,
            &self.wrapped,
            Chosen::MultiActions {
                leader_arm: a,
                follower_arms: &self.chosen_arms,
            },
        )?;
        Ok(StepRecord {
            regret,
            violations: None,
        })
    }

    pub fn leader(&self) -> &LeaderBanditState {
        &self.leader
    }
}

/// One seeded deep-hierarchy run: agents choose in layer order, each seeing
/// its predecessors' arms, and every agent observes the same reward.
pub struct DeepSession {
    instance: DeepBanditInstance,
    wrapped: Instance,
    profile: OptimalProfile,
    agents: Vec<DeepAgentState>,
    rewards_rng: RunRng,
    joint_action: Vec<usize>,
}

impl DeepSession {
    pub fn new(
        instance: &DeepBanditInstance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let bonus_constants = deep_constants(instance.depth(), constants.deep_last_constant)?;
        let agents = (1..=instance.depth())
            .map(|layer| {
                DeepAgentState::new(
                    layer,
                    instance.depth(),
                    instance.arms_per_layer(),
                    bonus_constants[layer - 1],
                    horizon,
                    constants.delta,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let wrapped = Instance::Deep(instance.clone());
        Ok(Self {
            profile: compute_optimal_profile(&wrapped),
            agents,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            joint_action: Vec::with_capacity(instance.depth()),
            instance: instance.clone(),
            wrapped,
        })
    }

    pub fn advance(&mut self) -> Result<StepRecord> {
        self.joint_action.clear();
        for agent in &self.agents {
            let arm = agent.select_arm(&self.joint_action);
            self.joint_action.push(arm);
        }
        let r = self
            .instance
            .sample_reward(&self.joint_action, &mut self.rewards_rng)?;
        for (d, agent) in self.agents.iter_mut().enumerate() {
            agent.observe(&self.joint_action[..=d], r)?;
        }
        let regret = instantaneous_regret(
            &self.profile,
            &self.wrapped,
            Chosen::DeepActions(&self.joint_action),
        )?;
        Ok(StepRecord {
            regret,
            violations: None,
        })
    }

    pub fn agents(&self) -> &[DeepAgentState] {
        &self.agents
    }
}

/// One seeded centralized-bandit run (UCB1 over the joint arm space).
pub struct CiBanditSession {
    wrapped: Instance,
    profile: OptimalProfile,
    joint: JointArmState,
    rewards_rng: RunRng,
}

impl CiBanditSession {
    pub fn new(
        instance: &Instance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let dims = match instance {
            Instance::Bandit(inst) => vec![inst.num_leader_arms(), inst.num_follower_arms()],
            Instance::Deep(inst) => vec![inst.arms_per_layer(); inst.depth()],
            other => {
                return Err(Error::AlgorithmInstanceMismatch {
                    algorithm: Algorithm::CiBandit.name().into(),
                    instance: other.kind_name().into(),
                })
            }
        };
        Ok(Self {
            profile: compute_optimal_profile(instance),
            joint: JointArmState::new(dims, horizon, constants.delta)?,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            wrapped: instance.clone(),
        })
    }

    pub fn advance(&mut self) -> Result<StepRecord> {
        let joint = self.joint.select_joint();
        let (r, regret) = match &self.wrapped {
            Instance::Bandit(inst) => {
                let r = inst.sample_reward(joint[0], joint[1], &mut self.rewards_rng)?;
                let regret = instantaneous_regret(
                    &self.profile,
                    &self.wrapped,
                    Chosen::BanditAction {
                        leader_arm: joint[0],
                        follower_arm: joint[1],
                    },
                )?;
                (r, regret)
            }
            Instance::Deep(inst) => {
                let r = inst.sample_reward(&joint, &mut self.rewards_rng)?;
                let regret =
                    instantaneous_regret(&self.profile, &self.wrapped, Chosen::DeepActions(&joint))?;
                (r, regret)
            }
            _ => unreachable!("constructor rejects other kinds"),
        };
        self.joint.observe_joint(&joint, r)?;
        Ok(StepRecord {
            regret,
            violations: None,
        })
    }

    pub fn joint(&self) -> &JointArmState {
        &self.joint
    }
}

// ---------------------------------------------------------------------------
// MDP sessions
// ---------------------------------------------------------------------------

/// One seeded hierarchical-MDP run of the decentralized learners. Per
/// episode: regret of the greedy policy pair held at episode start, then the
/// H-step rollout with in-episode count updates, then both post-episode
/// table updates, then optional invariant checks against the oracle.
pub struct MdpSession {
    instance: MdpInstance,
    profile: OptimalProfile,
    wrapped: Instance,
    leader: LeaderQTables,
    follower: FollowerQTables,
    rewards_rng: RunRng,
    transitions_rng: RunRng,
    episode: u64,
    check_invariants: bool,
    snapshot_every: u64,
    prev_q2: Option<Array4<f64>>,
    monotonicity_violations: u64,
    trajectory: Vec<Step>,
    snapshots: Vec<QSnapshot>,
}

impl MdpSession {
    pub fn new(
        instance: &MdpInstance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let params = MdpParams::with_bns1_s_exponent(
            constants.c,
            constants.c_prime,
            constants.delta,
            horizon,
            constants.bns1_s_exponent,
        )?;
        let (h, s, a, b) = (
            instance.horizon(),
            instance.num_states(),
            instance.num_leader_actions(),
            instance.num_follower_actions(),
        );
        let wrapped = Instance::Mdp(instance.clone());
        Ok(Self {
            profile: compute_optimal_profile(&wrapped),
            leader: LeaderQTables::new(h, s, a, b, params)?,
            follower: FollowerQTables::new(h, s, a, b, params)?,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            transitions_rng: stream_rng(seed, Stream::Transitions),
            episode: 0,
            check_invariants: diagnostics.check_invariants,
            snapshot_every: diagnostics.snapshot_every,
            prev_q2: None,
            monotonicity_violations: 0,
            trajectory: Vec::with_capacity(h),
            snapshots: Vec::new(),
            instance: instance.clone(),
            wrapped,
        })
    }

    /// Runs one episode and returns its regret and invariant-check counts.
    pub fn advance(&mut self) -> Result<StepRecord> {
        // Exact pseudo-regret of the policies held at episode start. The
        // rollout below plays exactly these policies (tables are frozen
        // within an episode).
        let (pi1, pi2) = greedy_policies(&self.leader, &self.follower);
        let value = evaluate_policy_pair(&self.instance, &pi1, &pi2)?;
        let regret =
            instantaneous_regret(&self.profile, &self.wrapped, Chosen::PolicyValue(value))?;

        self.trajectory.clear();
        let mut state = self.instance.initial_state();
        for h in 0..self.instance.horizon() {
            let a = self.leader.act(state, h);
            let b = self.follower.act(state, a, h);
            let reward = self
                .instance
                .sample_reward(state, a, b, &mut self.rewards_rng)?;
            let next_state = self
                .instance
                .sample_transition(state, a, b, &mut self.transitions_rng)?;
            self.leader.record_visit(h, state, a);
            self.follower.record_visit(h, state, a, b, next_state, reward);
            self.trajectory.push(Step {
                state,
                leader_action: a,
                follower_action: b,
                reward,
                next_state,
            });
            state = next_state;
        }

        if self.check_invariants {
            self.prev_q2 = Some(self.follower.q().clone());
        }
        self.leader.episode_update(&self.trajectory)?;
        self.follower.episode_update();
        self.episode += 1;

        let violations = if self.check_invariants {
            Some(self.count_violations())
        } else {
            None
        };
        if self.snapshot_every > 0 && self.episode.is_multiple_of(self.snapshot_every) {
            self.snapshots.push(self.snapshot());
        }
        Ok(StepRecord { regret, violations })
    }

    /// Counts entries violating optimism (`Q^2 >= Q_*`), dominance
    /// (`Q^1 >= max_b Q^2`), and exact Q^2 monotonicity after this episode's
    /// updates. The epsilon guards against spurious floating-point flags;
    /// genuine violations are macroscopic.
    fn count_violations(&mut self) -> (u64, u64) {
        const EPS: f64 = 1e-12;
        let q_star = self
            .profile
            .optimal_q
            .as_ref()
            .expect("MDP profile carries Q_*");
        let q1 = self.leader.q();
        let q2 = self.follower.q();
        let (h_n, s_n, a_n, b_n) = q2.dim();
        let mut optimism = 0;
        let mut dominance = 0;
        for h in 0..h_n {
            for s in 0..s_n {
                for a in 0..a_n {
                    let mut best_b = f64::NEG_INFINITY;
                    for b in 0..b_n {
                        let entry = q2[[h, s, a, b]];
                        if entry < q_star[[h, s, a, b]] - EPS {
                            optimism += 1;
                        }
                        best_b = best_b.max(entry);
                    }
                    if q1[[h, s, a]] < best_b - EPS {
                        dominance += 1;
                    }
                }
            }
        }
        if let Some(prev) = &self.prev_q2 {
            for (now, before) in q2.iter().zip(prev.iter()) {
                if now > before {
                    self.monotonicity_violations += 1;
                }
            }
        }
        (optimism, dominance)
    }

    fn snapshot(&self) -> QSnapshot {
        let (h_n, s_n, a_n, b_n) = self.follower.q().dim();
        let q1 = (0..h_n)
            .map(|h| {
                let mut flat = Vec::with_capacity(s_n * a_n);
                for s in 0..s_n {
                    for a in 0..a_n {
                        flat.push(self.leader.q()[[h, s, a]]);
                    }
                }
                flat
            })
            .collect();
        let q2 = (0..h_n)
            .map(|h| {
                let mut flat = Vec::with_capacity(s_n * a_n * b_n);
                for s in 0..s_n {
                    for a in 0..a_n {
                        for b in 0..b_n {
                            flat.push(self.follower.q()[[h, s, a, b]]);
                        }
                    }
                }
                flat
            })
            .collect();
        QSnapshot {
            episode: self.episode,
            q1,
            q2,
        }
    }

    pub fn leader_tables(&self) -> &LeaderQTables {
        &self.leader
    }

    pub fn follower_tables(&self) -> &FollowerQTables {
        &self.follower
    }

    pub fn oracle(&self) -> &OptimalProfile {
        &self.profile
    }

    /// The steps of the most recently played episode.
    pub fn last_trajectory(&self) -> &[Step] {
        &self.trajectory
    }

    pub fn monotonicity_violations(&self) -> u64 {
        self.monotonicity_violations
    }
}

/// One seeded centralized-MDP run: the follower-side machinery driven by the
/// joint argmax.
pub struct CiMdpSession {
    instance: MdpInstance,
    profile: OptimalProfile,
    wrapped: Instance,
    agent: CiMdpAgent,
    rewards_rng: RunRng,
    transitions_rng: RunRng,
    trajectory: Vec<Step>,
}

impl CiMdpSession {
    pub fn new(
        instance: &MdpInstance,
        constants: &Constants,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let params = MdpParams::with_bns1_s_exponent(
            constants.c,
            constants.c_prime,
            constants.delta,
            horizon,
            constants.bns1_s_exponent,
        )?;
        let wrapped = Instance::Mdp(instance.clone());
        Ok(Self {
            profile: compute_optimal_profile(&wrapped),
            agent: CiMdpAgent::new(
                instance.horizon(),
                instance.num_states(),
                instance.num_leader_actions(),
                instance.num_follower_actions(),
                params,
            )?,
            rewards_rng: stream_rng(seed, Stream::Rewards),
            transitions_rng: stream_rng(seed, Stream::Transitions),
            trajectory: Vec::with_capacity(instance.horizon()),
            instance: instance.clone(),
            wrapped,
        })
    }

    pub fn advance(&mut self) -> Result<StepRecord> {
        let (pi1, pi2) = self.agent.greedy_policy_pair();
        let value = evaluate_policy_pair(&self.instance, &pi1, &pi2)?;
        let regret =
            instantaneous_regret(&self.profile, &self.wrapped, Chosen::PolicyValue(value))?;

        self.trajectory.clear();
        let mut state = self.instance.initial_state();
        for h in 0..self.instance.horizon() {
            let (a, b) = self.agent.act(state, h);
            let reward = self
                .instance
                .sample_reward(state, a, b, &mut self.rewards_rng)?;
            let next_state = self
                .instance
                .sample_transition(state, a, b, &mut self.transitions_rng)?;
            self.agent.record_visit(h, state, a, b, next_state, reward);
            self.trajectory.push(Step {
                state,
                leader_action: a,
                follower_action: b,
                reward,
                next_state,
            });
            state = next_state;
        }
        self.agent.episode_update();
        Ok(StepRecord {
            regret,
            violations: None,
        })
    }

    pub fn agent(&self) -> &CiMdpAgent {
        &self.agent
    }

    pub fn last_trajectory(&self) -> &[Step] {
        &self.trajectory
    }
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

enum Session {
    Bandit(BanditSession),
    Multi(MultiFollowerSession),
    Deep(DeepSession),
    Mdp(Box<MdpSession>),
    CiBandit(CiBanditSession),
    CiMdp(Box<CiMdpSession>),
}

impl Session {
    fn build(config: &RunConfig, seed: u64) -> Result<Self> {
        let c = &config.constants;
        let t = config.horizon;
        Ok(match (config.algorithm, &config.instance) {
            (Algorithm::HierBandit, Instance::Bandit(inst)) => {
                Session::Bandit(BanditSession::new(inst, c, t, seed)?)
            }
            (Algorithm::MultiFollower, Instance::MultiFollower(inst)) => {
                Session::Multi(MultiFollowerSession::new(inst, c, t, seed)?)
            }
            (Algorithm::Deep, Instance::Deep(inst)) => {
                Session::Deep(DeepSession::new(inst, c, t, seed)?)
            }
            (Algorithm::HierMdp, Instance::Mdp(inst)) => Session::Mdp(Box::new(MdpSession::new(
                inst,
                c,
                t,
                seed,
                config.diagnostics,
            )?)),
            (Algorithm::CiBandit, inst @ (Instance::Bandit(_) | Instance::Deep(_))) => {
                Session::CiBandit(CiBanditSession::new(inst, c, t, seed)?)
            }
            (Algorithm::CiMdp, Instance::Mdp(inst)) => {
                Session::CiMdp(Box::new(CiMdpSession::new(inst, c, t, seed)?))
            }
            (algorithm, instance) => {
                return Err(Error::AlgorithmInstanceMismatch {
                    algorithm: algorithm.name().into(),
                    instance: instance.kind_name().into(),
                })
            }
        })
    }

    fn advance(&mut self) -> Result<StepRecord> {
        match self {
            Session::Bandit(s) => s.advance(),
            Session::Multi(s) => s.advance(),
            Session::Deep(s) => s.advance(),
            Session::Mdp(s) => s.advance(),
            Session::CiBandit(s) => s.advance(),
            Session::CiMdp(s) => s.advance(),
        }
    }
}

/// Executes one seeded run to completion. A zero-round horizon yields an
/// empty trace.
pub fn run(config: &RunConfig, seed: u64) -> Result<RegretTrace> {
    let track_violations = config.diagnostics.check_invariants
        && matches!(config.algorithm, Algorithm::HierMdp);
    let mut trace = RegretTrace::new(seed, config.to_json_value(), track_violations);
    if config.horizon == 0 {
        return Ok(trace);
    }
    config.validate()?;
    let mut session = Session::build(config, seed)?;
    for _ in 0..config.horizon {
        let record = session.advance()?;
        trace.push(record.regret);
        if let Some((optimism, dominance)) = record.violations {
            trace.optimism_violations.as_mut().expect("tracked").push(optimism);
            trace.dominance_violations.as_mut().expect("tracked").push(dominance);
        }
    }
    if let Session::Mdp(s) = session {
        if track_violations {
            trace.q2_monotonicity_violations = Some(s.monotonicity_violations());
        }
        trace.snapshots = s.snapshots;
    }
    Ok(trace)
}

/// Runs the same config across seeds, optionally in parallel. Results come
/// back in seed order and are identical to sequential runs: each seed owns
/// its generators and agent state.
pub fn run_seeds(config: &RunConfig, seeds: &[u64], jobs: usize) -> Result<Vec<RegretTrace>> {
    if jobs <= 1 || seeds.len() <= 1 {
        return seeds.iter().map(|&s| run(config, s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.min(seeds.len()))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| run(config, s)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::FollowerAlgorithm;
    use crate::instance::NoiseKind;
    use ndarray::arr2;

    fn bandit_config(means: ndarray::Array2<f64>, horizon: u64) -> RunConfig {
        RunConfig {
            algorithm: Algorithm::HierBandit,
            horizon,
            instance: Instance::Bandit(
                BanditInstance::new(means, NoiseKind::Bernoulli).unwrap(),
            ),
            constants: Constants::default(),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn zero_horizon_yields_empty_trace() {
        let config = bandit_config(arr2(&[[0.5, 0.4]]), 0);
        let trace = run(&config, 1).unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn degenerate_single_joint_arm_has_zero_regret() {
        let config = bandit_config(arr2(&[[0.5]]), 200);
        let trace = run(&config, 1).unwrap();
        assert_eq!(trace.final_cumulative(), 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = bandit_config(arr2(&[[0.9, 0.2], [0.4, 0.7]]), 500);
        let a = run(&config, 7).unwrap();
        let b = run(&config, 7).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn parallel_runs_match_sequential() {
        let config = bandit_config(arr2(&[[0.9, 0.2], [0.4, 0.7]]), 300);
        let seeds = [1, 2, 3, 4, 5, 6];
        let seq = run_seeds(&config, &seeds, 1).unwrap();
        let par = run_seeds(&config, &seeds, 4).unwrap();
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }

    #[test]
    fn follower_bank_counts_match_leader_counts() {
        let config = bandit_config(arr2(&[[0.9, 0.2], [0.4, 0.7]]), 400);
        let Instance::Bandit(inst) = &config.instance else { unreachable!() };
        let mut session = BanditSession::new(inst, &config.constants, 400, 3).unwrap();
        for _ in 0..400 {
            session.advance().unwrap();
        }
        for a in 0..2 {
            assert_eq!(
                session.followers().instance(a).total_pulls(),
                session.leader().counts()[a]
            );
        }
    }

    #[test]
    fn cumulative_regret_is_nondecreasing() {
        let config = bandit_config(arr2(&[[0.9, 0.2], [0.4, 0.7]]), 1000);
        let trace = run(&config, 11).unwrap();
        for w in trace.cumulative.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for &x in &trace.instantaneous {
            assert!(x >= -1e-12);
        }
    }

    #[test]
    fn mismatched_algorithm_and_instance_rejected() {
        let mut config = bandit_config(arr2(&[[0.5]]), 10);
        config.algorithm = Algorithm::HierMdp;
        assert!(matches!(
            run(&config, 0),
            Err(Error::AlgorithmInstanceMismatch { .. })
        ));
    }

    #[test]
    fn config_json_round_trip() {
        let doc = r#"{
            "algorithm": "hier-bandit",
            "T": 100,
            "instance": {"kind": "bandit", "A": 1, "B": 2, "means": [[0.1, 0.9]]},
            "constants": {"kappa": 2.0},
            "diagnostics": {"check_invariants": false}
        }"#;
        let config = RunConfig::from_json_str(doc).unwrap();
        assert_eq!(config.constants.kappa, 2.0);
        assert_eq!(config.constants.c, 1.0);
        let echoed = config.to_json_value();
        assert_eq!(echoed["algorithm"], "hier-bandit");
        assert_eq!(echoed["constants"]["C_D"], 2.0);
    }

    #[test]
    fn config_rejects_zero_horizon_and_bad_delta() {
        let doc = r#"{"algorithm":"hier-bandit","T":0,
            "instance":{"kind":"bandit","A":1,"B":1,"means":[[0.5]]}}"#;
        assert!(RunConfig::from_json_str(doc).is_err());
        let doc = r#"{"algorithm":"hier-bandit","T":5,
            "instance":{"kind":"bandit","A":1,"B":1,"means":[[0.5]]},
            "constants":{"delta":1.5}}"#;
        assert!(RunConfig::from_json_str(doc).is_err());
    }
}
