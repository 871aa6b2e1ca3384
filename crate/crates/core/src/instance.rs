//! Environment instances: ground-truth mean structures, seeded reward and
//! transition sampling, and the JSON instance-file format.
//!
//! Instances are validated on construction and immutable afterwards, so they
//! are safe to share across concurrently running seeds.

use ndarray::{Array2, Array3, Array4};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Absolute tolerance for transition-row stochasticity checks. Construction
/// error in double precision only; anything larger is rejected.
pub const TRANSITION_TOLERANCE: f64 = 1e-9;

/// Reward noise model. Both choices keep samples in `[0, 1]` with the exact
/// configured mean; Bernoulli is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// 0/1 samples with success probability equal to the mean.
    Bernoulli,
    /// Mean plus symmetric uniform noise of half-width `min(m, 1 - m)`, so
    /// the sample stays in `[0, 1]` and the mean stays exact.
    UniformBounded,
}

impl NoiseKind {
    /// Draws one reward with the given mean, consuming a single uniform
    /// variate regardless of the noise kind.
    pub(crate) fn sample(self, mean: f64, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        match self {
            NoiseKind::Bernoulli => {
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseKind::UniformBounded => {
                let half_width = mean.min(1.0 - mean);
                mean + (2.0 * u - 1.0) * half_width
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            NoiseKind::Bernoulli => "bernoulli",
            NoiseKind::UniformBounded => "uniform",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(NoiseKind::Bernoulli),
            "uniform" => Ok(NoiseKind::UniformBounded),
            other => Err(Error::InvalidInstance(format!(
                "unknown noise kind `{other}` (expected `bernoulli` or `uniform`)"
            ))),
        }
    }
}

fn check_mean_range(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInstance(format!(
            "{what} value {x} outside [0, 1]"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Two-agent bandit
// ---------------------------------------------------------------------------

/// Ground truth for a two-agent hierarchical bandit: an `A x B` matrix of
/// joint-action means.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    means: Array2<f64>,
    noise: NoiseKind,
}

impl BanditInstance {
    pub fn new(means: Array2<f64>, noise: NoiseKind) -> Result<Self> {
        let (a, b) = means.dim();
        if a == 0 || b == 0 {
            return Err(Error::InvalidInstance(
                "bandit instance needs at least one arm per agent".into(),
            ));
        }
        for &m in &means {
            check_mean_range(m, "mean")?;
        }
        Ok(Self { means, noise })
    }

    pub fn num_leader_arms(&self) -> usize {
        self.means.nrows()
    }

    pub fn num_follower_arms(&self) -> usize {
        self.means.ncols()
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn mean(&self, leader_arm: usize, follower_arm: usize) -> f64 {
        self.means[[leader_arm, follower_arm]]
    }

    /// Draws the single per-round reward both agents observe.
    pub fn sample_reward(
        &self,
        leader_arm: usize,
        follower_arm: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        if leader_arm >= self.num_leader_arms() || follower_arm >= self.num_follower_arms() {
            return Err(Error::IndexOutOfRange(format!(
                "joint arm ({leader_arm}, {follower_arm}) for a {}x{} bandit",
                self.num_leader_arms(),
                self.num_follower_arms()
            )));
        }
        Ok(self.noise.sample(self.mean(leader_arm, follower_arm), rng))
    }
}

// ---------------------------------------------------------------------------
// Multi-follower bandit
// ---------------------------------------------------------------------------

/// One leader and `N` followers; follower `i` has its own `A x B^i` mean
/// matrix and its own reward, while the leader observes the average reward.
#[derive(Debug, Clone)]
pub struct MultiFollowerInstance {
    means: Vec<Array2<f64>>,
    noise: NoiseKind,
}

impl MultiFollowerInstance {
    pub fn new(means: Vec<Array2<f64>>, noise: NoiseKind) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidInstance(
                "multi-follower instance needs at least one follower".into(),
            ));
        }
        let a = means[0].nrows();
        for (i, m) in means.iter().enumerate() {
            if m.nrows() != a {
                return Err(Error::InvalidInstance(format!(
                    "follower {i} has {} leader rows, expected {a}",
                    m.nrows()
                )));
            }
            if m.ncols() == 0 || a == 0 {
                return Err(Error::InvalidInstance(
                    "multi-follower instance needs at least one arm per agent".into(),
                ));
            }
            for &x in m {
                check_mean_range(x, "mean")?;
            }
        }
        Ok(Self { means, noise })
    }

    pub fn num_followers(&self) -> usize {
        self.means.len()
    }

    pub fn num_leader_arms(&self) -> usize {
        self.means[0].nrows()
    }

    pub fn follower_arm_counts(&self) -> Vec<usize> {
        self.means.iter().map(|m| m.ncols()).collect()
    }

    /// `B = (1/N) * sum_i B^i`, the quantity entering the leader's bonus.
    pub fn average_follower_arms(&self) -> f64 {
        let total: usize = self.means.iter().map(|m| m.ncols()).sum();
        total as f64 / self.means.len() as f64
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn mean(&self, follower: usize, leader_arm: usize, follower_arm: usize) -> f64 {
        self.means[follower][[leader_arm, follower_arm]]
    }

    /// Average of the chosen joint action's means across followers.
    pub fn average_mean(&self, leader_arm: usize, follower_arms: &[usize]) -> Result<f64> {
        if follower_arms.len() != self.num_followers() {
            return Err(Error::Contract(format!(
                "{} follower arms supplied for {} followers",
                follower_arms.len(),
                self.num_followers()
            )));
        }
        let mut total = 0.0;
        for (i, &b) in follower_arms.iter().enumerate() {
            if leader_arm >= self.num_leader_arms() || b >= self.means[i].ncols() {
                return Err(Error::IndexOutOfRange(format!(
                    "joint arm ({leader_arm}, {b}) for follower {i}"
                )));
            }
            total += self.mean(i, leader_arm, b);
        }
        Ok(total / self.num_followers() as f64)
    }

    /// Draws follower `i`'s reward for the round.
    pub fn sample_follower_reward(
        &self,
        follower: usize,
        leader_arm: usize,
        follower_arm: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        if follower >= self.num_followers()
            || leader_arm >= self.num_leader_arms()
            || follower_arm >= self.means[follower].ncols()
        {
            return Err(Error::IndexOutOfRange(format!(
                "follower {follower} joint arm ({leader_arm}, {follower_arm})"
            )));
        }
        Ok(self
            .noise
            .sample(self.mean(follower, leader_arm, follower_arm), rng))
    }
}

// ---------------------------------------------------------------------------
// Deep hierarchy bandit
// ---------------------------------------------------------------------------

/// `D` agents acting in a fixed order, all with `A` arms; the mean of a joint
/// action lives in a dense `[A]^D` tensor stored row-major (layer 1 slowest).
#[derive(Debug, Clone)]
pub struct DeepBanditInstance {
    depth: usize,
    arms_per_layer: usize,
    means: Vec<f64>,
    noise: NoiseKind,
}

impl DeepBanditInstance {
    pub fn new(
        depth: usize,
        arms_per_layer: usize,
        means: Vec<f64>,
        noise: NoiseKind,
    ) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidInstance(format!(
                "deep instance depth {depth} < 2"
            )));
        }
        if arms_per_layer == 0 {
            return Err(Error::InvalidInstance("arms_per_layer must be >= 1".into()));
        }
        let expected = arms_per_layer.pow(depth as u32);
        if means.len() != expected {
            return Err(Error::InvalidInstance(format!(
                "deep mean tensor has {} entries, expected A^D = {expected}",
                means.len()
            )));
        }
        for &m in &means {
            check_mean_range(m, "mean")?;
        }
        Ok(Self {
            depth,
            arms_per_layer,
            means,
            noise,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn arms_per_layer(&self) -> usize {
        self.arms_per_layer
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    fn flat_index(&self, joint_action: &[usize]) -> Result<usize> {
        if joint_action.len() != self.depth {
            return Err(Error::Contract(format!(
                "joint action has {} layers, expected {}",
                joint_action.len(),
                self.depth
            )));
        }
        let mut idx = 0usize;
        for &arm in joint_action {
            if arm >= self.arms_per_layer {
                return Err(Error::IndexOutOfRange(format!(
                    "arm {arm} with {} arms per layer",
                    self.arms_per_layer
                )));
            }
            idx = idx * self.arms_per_layer + arm;
        }
        Ok(idx)
    }

    pub fn mean(&self, joint_action: &[usize]) -> Result<f64> {
        Ok(self.means[self.flat_index(joint_action)?])
    }

    /// Maximum mean over all joint actions with the given prefix fixed.
    pub fn best_mean_under_prefix(&self, prefix: &[usize]) -> Result<f64> {
        if prefix.len() > self.depth {
            return Err(Error::Contract(format!(
                "prefix has {} layers, deeper than D = {}",
                prefix.len(),
                self.depth
            )));
        }
        let mut start = 0usize;
        for &arm in prefix {
            if arm >= self.arms_per_layer {
                return Err(Error::IndexOutOfRange(format!(
                    "arm {arm} with {} arms per layer",
                    self.arms_per_layer
                )));
            }
            start = start * self.arms_per_layer + arm;
        }
        let block = self.arms_per_layer.pow((self.depth - prefix.len()) as u32);
        let lo = start * block;
        Ok(self.means[lo..lo + block]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn sample_reward(&self, joint_action: &[usize], rng: &mut impl Rng) -> Result<f64> {
        Ok(self.noise.sample(self.mean(joint_action)?, rng))
    }
}

// ---------------------------------------------------------------------------
// Two-agent episodic MDP
// ---------------------------------------------------------------------------

/// Tabular finite-horizon two-agent MDP. Rewards are `S x A x B`, transitions
/// `S x A x B x S` with rows summing to one, and every episode starts from a
/// fixed initial state.
#[derive(Debug, Clone)]
pub struct MdpInstance {
    rewards: Array3<f64>,
    transitions: Array4<f64>,
    horizon: usize,
    initial_state: usize,
    noise: NoiseKind,
}

impl MdpInstance {
    pub fn new(
        rewards: Array3<f64>,
        transitions: Array4<f64>,
        horizon: usize,
        initial_state: usize,
        noise: NoiseKind,
    ) -> Result<Self> {
        let (s, a, b) = rewards.dim();
        if s == 0 || a == 0 || b == 0 || horizon == 0 {
            return Err(Error::InvalidInstance(
                "MDP dimensions and horizon must all be >= 1".into(),
            ));
        }
        if transitions.dim() != (s, a, b, s) {
            return Err(Error::InvalidInstance(format!(
                "transition tensor has shape {:?}, expected ({s}, {a}, {b}, {s})",
                transitions.dim()
            )));
        }
        if initial_state >= s {
            return Err(Error::InvalidInstance(format!(
                "initial state {initial_state} with {s} states"
            )));
        }
        for &r in &rewards {
            check_mean_range(r, "reward")?;
        }
        for si in 0..s {
            for ai in 0..a {
                for bi in 0..b {
                    let mut row_sum = 0.0;
                    for sj in 0..s {
                        let p = transitions[[si, ai, bi, sj]];
                        if p.is_nan() || p < 0.0 {
                            return Err(Error::InvalidInstance(format!(
                                "P({sj}|{si},{ai},{bi}) = {p} is negative or NaN"
                            )));
                        }
                        row_sum += p;
                    }
                    if (row_sum - 1.0).abs() > TRANSITION_TOLERANCE {
                        return Err(Error::InvalidInstance(format!(
                            "P(.|{si},{ai},{bi}) sums to {row_sum}, not 1 within {TRANSITION_TOLERANCE:e}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            rewards,
            transitions,
            horizon,
            initial_state,
            noise,
        })
    }

    pub fn num_states(&self) -> usize {
        self.rewards.dim().0
    }

    pub fn num_leader_actions(&self) -> usize {
        self.rewards.dim().1
    }

    pub fn num_follower_actions(&self) -> usize {
        self.rewards.dim().2
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn rewards(&self) -> &Array3<f64> {
        &self.rewards
    }

    pub fn transitions(&self) -> &Array4<f64> {
        &self.transitions
    }

    pub fn reward_mean(&self, state: usize, a: usize, b: usize) -> f64 {
        self.rewards[[state, a, b]]
    }

    pub fn transition_probability(&self, state: usize, a: usize, b: usize, next: usize) -> f64 {
        self.transitions[[state, a, b, next]]
    }

    fn check_indices(&self, state: usize, a: usize, b: usize) -> Result<()> {
        if state >= self.num_states()
            || a >= self.num_leader_actions()
            || b >= self.num_follower_actions()
        {
            return Err(Error::IndexOutOfRange(format!(
                "(s, a, b) = ({state}, {a}, {b}) for an S={}, A={}, B={} MDP",
                self.num_states(),
                self.num_leader_actions(),
                self.num_follower_actions()
            )));
        }
        Ok(())
    }

    /// Draws the step reward both agents observe.
    pub fn sample_reward(
        &self,
        state: usize,
        a: usize,
        b: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        self.check_indices(state, a, b)?;
        Ok(self.noise.sample(self.reward_mean(state, a, b), rng))
    }

    /// Draws the next state by inverse CDF over one uniform variate.
    pub fn sample_transition(
        &self,
        state: usize,
        a: usize,
        b: usize,
        rng: &mut impl Rng,
    ) -> Result<usize> {
        self.check_indices(state, a, b)?;
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for next in 0..self.num_states() {
            cum += self.transitions[[state, a, b, next]];
            if u < cum {
                return Ok(next);
            }
        }
        // Row sums can round to slightly below 1; the draw belongs to the tail.
        Ok(self.num_states() - 1)
    }
}

// ---------------------------------------------------------------------------
// Instance documents
// ---------------------------------------------------------------------------

/// Any of the four environment kinds, as configured from an instance file.
#[derive(Debug, Clone)]
pub enum Instance {
    Bandit(BanditInstance),
    MultiFollower(MultiFollowerInstance),
    Deep(DeepBanditInstance),
    Mdp(MdpInstance),
}

impl Instance {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Instance::Bandit(_) => "bandit",
            Instance::MultiFollower(_) => "multi-follower",
            Instance::Deep(_) => "deep",
            Instance::Mdp(_) => "mdp",
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(s)
            .map_err(|e| Error::InvalidInstance(format!("not valid JSON: {e}")))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let map = as_object(value, "instance document")?;
        let kind = get_str(map, "kind")?;
        let noise = match map.get("noise") {
            None => NoiseKind::Bernoulli,
            Some(v) => NoiseKind::parse(v.as_str().ok_or_else(|| {
                Error::InvalidInstance("key `noise` must be a string".into())
            })?)?,
        };
        match kind {
            "bandit" => {
                let a = get_usize(map, "A")?;
                let b = get_usize(map, "B")?;
                let means = parse_nested(get(map, "means")?, &[a, b], "means")?;
                let means = Array2::from_shape_vec((a, b), means).expect("shape checked");
                Ok(Instance::Bandit(BanditInstance::new(means, noise)?))
            }
            "multi-follower" => {
                let a = get_usize(map, "A")?;
                let b_list = get_usize_list(map, "B_list")?;
                let rows = get(map, "means")?
                    .as_array()
                    .ok_or_else(|| Error::InvalidInstance("key `means` must be an array".into()))?;
                if rows.len() != b_list.len() {
                    return Err(Error::InvalidInstance(format!(
                        "`means` lists {} followers but `B_list` has {}",
                        rows.len(),
                        b_list.len()
                    )));
                }
                let mut means = Vec::with_capacity(b_list.len());
                for (i, (v, &bi)) in rows.iter().zip(&b_list).enumerate() {
                    let flat = parse_nested(v, &[a, bi], &format!("means[{i}]"))?;
                    means.push(Array2::from_shape_vec((a, bi), flat).expect("shape checked"));
                }
                Ok(Instance::MultiFollower(MultiFollowerInstance::new(
                    means, noise,
                )?))
            }
            "deep" => {
                let d = get_usize(map, "D")?;
                let a = get_usize(map, "A")?;
                let dims = vec![a; d];
                let means = parse_nested(get(map, "means")?, &dims, "means")?;
                Ok(Instance::Deep(DeepBanditInstance::new(d, a, means, noise)?))
            }
            "mdp" => {
                let s = get_usize(map, "S")?;
                let a = get_usize(map, "A")?;
                let b = get_usize(map, "B")?;
                let h = get_usize(map, "H")?;
                let initial_state = get_usize(map, "initial_state")?;
                let rewards = parse_nested(get(map, "rewards")?, &[s, a, b], "rewards")?;
                let rewards = Array3::from_shape_vec((s, a, b), rewards).expect("shape checked");
                let transitions =
                    parse_nested(get(map, "transitions")?, &[s, a, b, s], "transitions")?;
                let transitions =
                    Array4::from_shape_vec((s, a, b, s), transitions).expect("shape checked");
                Ok(Instance::Mdp(MdpInstance::new(
                    rewards,
                    transitions,
                    h,
                    initial_state,
                    noise,
                )?))
            }
            other => Err(Error::InvalidInstance(format!(
                "unknown instance kind `{other}`"
            ))),
        }
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            Instance::Bandit(inst) => json!({
                "kind": "bandit",
                "A": inst.num_leader_arms(),
                "B": inst.num_follower_arms(),
                "means": nest(inst.means.as_slice().expect("standard layout"),
                              &[inst.num_leader_arms(), inst.num_follower_arms()]),
                "noise": inst.noise.name(),
            }),
            Instance::MultiFollower(inst) => {
                let means: Vec<Value> = inst
                    .means
                    .iter()
                    .map(|m| {
                        nest(
                            m.as_slice().expect("standard layout"),
                            &[m.nrows(), m.ncols()],
                        )
                    })
                    .collect();
                json!({
                    "kind": "multi-follower",
                    "A": inst.num_leader_arms(),
                    "B_list": inst.follower_arm_counts(),
                    "means": means,
                    "noise": inst.noise.name(),
                })
            }
            Instance::Deep(inst) => json!({
                "kind": "deep",
                "D": inst.depth,
                "A": inst.arms_per_layer,
                "means": nest(&inst.means, &vec![inst.arms_per_layer; inst.depth]),
                "noise": inst.noise.name(),
            }),
            Instance::Mdp(inst) => {
                let (s, a, b) = inst.rewards.dim();
                json!({
                    "kind": "mdp",
                    "S": s,
                    "A": a,
                    "B": b,
                    "H": inst.horizon,
                    "initial_state": inst.initial_state,
                    "rewards": nest(inst.rewards.as_slice().expect("standard layout"), &[s, a, b]),
                    "transitions": nest(inst.transitions.as_slice().expect("standard layout"),
                                        &[s, a, b, s]),
                    "noise": inst.noise.name(),
                })
            }
        }
    }
}

fn as_object<'v>(value: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    value
        .as_object()
        .ok_or_else(|| Error::InvalidInstance(format!("{what} must be a JSON object")))
}

fn get<'v>(map: &'v Map<String, Value>, key: &str) -> Result<&'v Value> {
    map.get(key)
        .ok_or_else(|| Error::InvalidInstance(format!("missing key `{key}`")))
}

fn get_str<'v>(map: &'v Map<String, Value>, key: &str) -> Result<&'v str> {
    get(map, key)?
        .as_str()
        .ok_or_else(|| Error::InvalidInstance(format!("key `{key}` must be a string")))
}

fn get_usize(map: &Map<String, Value>, key: &str) -> Result<usize> {
    get(map, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::InvalidInstance(format!("key `{key}` must be a nonnegative integer")))
}

fn get_usize_list(map: &Map<String, Value>, key: &str) -> Result<Vec<usize>> {
    get(map, key)?
        .as_array()
        .ok_or_else(|| Error::InvalidInstance(format!("key `{key}` must be an array")))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Error::InvalidInstance(format!("key `{key}` must hold integers")))
        })
        .collect()
}

/// Parses a nested row-major array of the given shape into a flat vector.
fn parse_nested(value: &Value, dims: &[usize], what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dims.iter().product());
    flatten_into(value, dims, what, &mut out)?;
    Ok(out)
}

fn flatten_into(value: &Value, dims: &[usize], what: &str, out: &mut Vec<f64>) -> Result<()> {
    match dims.split_first() {
        None => {
            let x = value.as_f64().ok_or_else(|| {
                Error::InvalidInstance(format!("`{what}` must hold numbers at the innermost level"))
            })?;
            out.push(x);
            Ok(())
        }
        Some((&len, rest)) => {
            let arr = value.as_array().ok_or_else(|| {
                Error::InvalidInstance(format!("`{what}` must be nested arrays"))
            })?;
            if arr.len() != len {
                return Err(Error::InvalidInstance(format!(
                    "`{what}` has a level of length {}, expected {len}",
                    arr.len()
                )));
            }
            for v in arr {
                flatten_into(v, rest, what, out)?;
            }
            Ok(())
        }
    }
}

/// Rebuilds nested row-major arrays from a flat slice.
fn nest(flat: &[f64], dims: &[usize]) -> Value {
    match dims.split_first() {
        None => json!(flat[0]),
        Some((&len, rest)) => {
            let block: usize = rest.iter().product();
            let items: Vec<Value> = (0..len)
                .map(|i| nest(&flat[i * block..(i + 1) * block], rest))
                .collect();
            Value::Array(items)
        }
    }
}
