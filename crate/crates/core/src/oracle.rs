//! Exact oracle quantities used for regret accounting and invariant checks:
//! optimal means for the bandit kinds, and optimal value functions (by
//! backward induction) for MDPs, plus exact evaluation of a fixed policy
//! pair.

use ndarray::{Array2, Array3, Array4};

use crate::error::{Error, Result};
use crate::instance::{Instance, MdpInstance};

/// Deterministic Markov policy of the leader: `(h, s) -> a`.
pub type LeaderPolicy = Array2<usize>;

/// Deterministic Markov policy of the follower, conditioned on the leader's
/// action: `(h, s, a) -> b`.
pub type FollowerPolicy = Array3<usize>;

/// Exact optima for one instance. Bandit kinds fill only the mean fields;
/// MDPs also carry `V_*` ((H+1) x S) and `Q_*` (H x S x A x B).
#[derive(Debug, Clone)]
pub struct OptimalProfile {
    kind: &'static str,
    dims: Vec<usize>,
    /// Best achievable expected value: the maximal joint-action mean for
    /// bandit kinds, `V_{*,1}(s_1)` for MDPs.
    pub best_joint_mean: f64,
    /// Per leader arm, the best value the followers can deliver under it
    /// (for MDPs: `max_b Q_{*,1}(s_1, a, b)`).
    pub best_follower_mean_per_leader_arm: Vec<f64>,
    /// `V_{*,h}(s)` for MDP instances, with the all-zero row at `h = H`.
    pub optimal_values: Option<Array2<f64>>,
    /// `Q_{*,h}(s, a, b)` for MDP instances.
    pub optimal_q: Option<Array4<f64>>,
}

impl OptimalProfile {
    /// Whether this profile was computed for the given instance shape.
    pub fn matches(&self, instance: &Instance) -> bool {
        self.kind == instance.kind_name() && self.dims == instance_dims(instance)
    }
}

fn instance_dims(instance: &Instance) -> Vec<usize> {
    match instance {
        Instance::Bandit(inst) => vec![inst.num_leader_arms(), inst.num_follower_arms()],
        Instance::MultiFollower(inst) => {
            let mut d = vec![inst.num_leader_arms()];
            d.extend(inst.follower_arm_counts());
            d
        }
        Instance::Deep(inst) => vec![inst.depth(), inst.arms_per_layer()],
        Instance::Mdp(inst) => vec![
            inst.num_states(),
            inst.num_leader_actions(),
            inst.num_follower_actions(),
            inst.horizon(),
            inst.initial_state(),
        ],
    }
}

/// Computes the exact optimum for any instance kind. This is the independent
/// yardstick for all regret computation and runtime invariant checks.
pub fn compute_optimal_profile(instance: &Instance) -> OptimalProfile {
    let (best_joint_mean, per_arm, values, q) = match instance {
        Instance::Bandit(inst) => {
            let per_arm: Vec<f64> = (0..inst.num_leader_arms())
                .map(|a| {
                    (0..inst.num_follower_arms())
                        .map(|b| inst.mean(a, b))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let best = per_arm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (best, per_arm, None, None)
        }
        Instance::MultiFollower(inst) => {
            let n = inst.num_followers() as f64;
            let per_arm: Vec<f64> = (0..inst.num_leader_arms())
                .map(|a| {
                    (0..inst.num_followers())
                        .map(|i| {
                            (0..inst.follower_arm_counts()[i])
                                .map(|b| inst.mean(i, a, b))
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .sum::<f64>()
                        / n
                })
                .collect();
            let best = per_arm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (best, per_arm, None, None)
        }
        Instance::Deep(inst) => {
            let per_arm: Vec<f64> = (0..inst.arms_per_layer())
                .map(|a| inst.best_mean_under_prefix(&[a]).expect("arm in range"))
                .collect();
            let best = inst.best_mean_under_prefix(&[]).expect("empty prefix");
            (best, per_arm, None, None)
        }
        Instance::Mdp(inst) => {
            let (values, q) = optimal_value_tables(inst);
            let s1 = inst.initial_state();
            let per_arm: Vec<f64> = (0..inst.num_leader_actions())
                .map(|a| {
                    (0..inst.num_follower_actions())
                        .map(|b| q[[0, s1, a, b]])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let best = values[[0, s1]];
            (best, per_arm, Some(values), Some(q))
        }
    };
    OptimalProfile {
        kind: instance.kind_name(),
        dims: instance_dims(instance),
        best_joint_mean,
        best_follower_mean_per_leader_arm: per_arm,
        optimal_values: values,
        optimal_q: q,
    }
}

/// Backward induction: `Q_{*,h}(s,a,b) = R(s,a,b) + sum_s' P(s'|s,a,b) V_{*,h+1}(s')`
/// and `V_{*,h}(s) = max_{a,b} Q_{*,h}(s,a,b)`, with `V_{*,H+1} = 0`.
fn optimal_value_tables(inst: &MdpInstance) -> (Array2<f64>, Array4<f64>) {
    let (s_n, a_n, b_n) = (
        inst.num_states(),
        inst.num_leader_actions(),
        inst.num_follower_actions(),
    );
    let h_n = inst.horizon();
    let mut values = Array2::zeros((h_n + 1, s_n));
    let mut q = Array4::zeros((h_n, s_n, a_n, b_n));
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_n {
                for b in 0..b_n {
                    let mut expect = 0.0;
                    for s2 in 0..s_n {
                        expect += inst.transition_probability(s, a, b, s2) * values[[h + 1, s2]];
                    }
                    let value = inst.reward_mean(s, a, b) + expect;
                    q[[h, s, a, b]] = value;
                    best = best.max(value);
                }
            }
            values[[h, s]] = best;
        }
    }
    (values, q)
}

/// Exact value of a fixed deterministic policy pair from the initial state,
/// `V^{pi1, pi2}_1(s_1)`, by backward induction over the true dynamics.
pub fn evaluate_policy_pair(
    inst: &MdpInstance,
    leader: &LeaderPolicy,
    follower: &FollowerPolicy,
) -> Result<f64> {
    let (s_n, a_n, b_n) = (
        inst.num_states(),
        inst.num_leader_actions(),
        inst.num_follower_actions(),
    );
    let h_n = inst.horizon();
    if leader.dim() != (h_n, s_n) || follower.dim() != (h_n, s_n, a_n) {
        return Err(Error::Contract(format!(
            "policy shapes {:?}/{:?} do not match an H={h_n}, S={s_n}, A={a_n} MDP",
            leader.dim(),
            follower.dim()
        )));
    }
    let mut next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let mut cur = vec![0.0; s_n];
        for s in 0..s_n {
            let a = leader[[h, s]];
            if a >= a_n {
                return Err(Error::IndexOutOfRange(format!("leader action {a}")));
            }
            let b = follower[[h, s, a]];
            if b >= b_n {
                return Err(Error::IndexOutOfRange(format!("follower action {b}")));
            }
            let expect: f64 = next
                .iter()
                .enumerate()
                .map(|(s2, &v)| inst.transition_probability(s, a, b, s2) * v)
                .sum();
            cur[s] = inst.reward_mean(s, a, b) + expect;
        }
        next = cur;
    }
    Ok(next[inst.initial_state()])
}

/// What the agents actually did in one round or episode.
#[derive(Debug, Clone, Copy)]
pub enum Chosen<'a> {
    /// Two-agent bandit joint action.
    BanditAction {
        leader_arm: usize,
        follower_arm: usize,
    },
    /// Multi-follower joint action: the leader arm and one arm per follower.
    MultiActions {
        leader_arm: usize,
        follower_arms: &'a [usize],
    },
    /// Deep-hierarchy joint action across all layers.
    DeepActions(&'a [usize]),
    /// Exact value of the episode's policy pair (MDP kinds).
    PolicyValue(f64),
}

/// Instantaneous pseudo-regret of the chosen outcome against the optimum.
pub fn instantaneous_regret(
    profile: &OptimalProfile,
    instance: &Instance,
    chosen: Chosen<'_>,
) -> Result<f64> {
    if !profile.matches(instance) {
        return Err(Error::Contract(format!(
            "profile computed for a `{}` instance used with a `{}` instance",
            profile.kind,
            instance.kind_name()
        )));
    }
    let achieved = match (instance, chosen) {
        (
            Instance::Bandit(inst),
            Chosen::BanditAction {
                leader_arm,
                follower_arm,
            },
        ) => {
            if leader_arm >= inst.num_leader_arms() || follower_arm >= inst.num_follower_arms() {
                return Err(Error::IndexOutOfRange(format!(
                    "joint arm ({leader_arm}, {follower_arm})"
                )));
            }
            inst.mean(leader_arm, follower_arm)
        }
        (
            Instance::MultiFollower(inst),
            Chosen::MultiActions {
                leader_arm,
                follower_arms,
            },
        ) => inst.average_mean(leader_arm, follower_arms)?,
        (Instance::Deep(inst), Chosen::DeepActions(joint)) => inst.mean(joint)?,
        (Instance::Mdp(_), Chosen::PolicyValue(v)) => v,
        _ => {
            return Err(Error::Contract(
                "chosen outcome does not match the instance kind".into(),
            ))
        }
    };
    Ok(profile.best_joint_mean - achieved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{BanditInstance, NoiseKind};
    use ndarray::{arr2, Array3 as A3, Array4 as A4};

    fn mdp_from_matrix(means: &Array2<f64>, horizon: usize) -> MdpInstance {
        // One-state MDP whose step reward matrix is the bandit mean matrix.
        let (a, b) = means.dim();
        let rewards = A3::from_shape_vec((1, a, b), means.iter().cloned().collect()).unwrap();
        let transitions = A4::from_elem((1, a, b, 1), 1.0);
        MdpInstance::new(rewards, transitions, horizon, 0, NoiseKind::Bernoulli).unwrap()
    }

    #[test]
    fn one_step_mdp_is_a_bandit() {
        let means = arr2(&[[0.2, 0.7], [0.6, 0.1]]);
        let mdp = Instance::Mdp(mdp_from_matrix(&means, 1));
        let profile = compute_optimal_profile(&mdp);
        assert_eq!(profile.best_joint_mean, 0.7);
        let bandit = Instance::Bandit(
            BanditInstance::new(means.clone(), NoiseKind::Bernoulli).unwrap(),
        );
        let bandit_profile = compute_optimal_profile(&bandit);
        assert_eq!(profile.best_joint_mean, bandit_profile.best_joint_mean);
        assert_eq!(
            profile.best_follower_mean_per_leader_arm,
            bandit_profile.best_follower_mean_per_leader_arm
        );
    }

    #[test]
    fn constant_reward_adds_over_horizon() {
        let means = arr2(&[[0.3]]);
        let profile = compute_optimal_profile(&Instance::Mdp(mdp_from_matrix(&means, 2)));
        assert!((profile.best_joint_mean - 0.6).abs() < 1e-12);
    }

    #[test]
    fn value_consistency_and_range() {
        let means = arr2(&[[0.2, 0.9], [0.5, 0.4]]);
        let inst = mdp_from_matrix(&means, 3);
        let profile = compute_optimal_profile(&Instance::Mdp(inst.clone()));
        let v = profile.optimal_values.as_ref().unwrap();
        let q = profile.optimal_q.as_ref().unwrap();
        let h_n = inst.horizon();
        for h in 0..h_n {
            for s in 0..inst.num_states() {
                let mut best = f64::NEG_INFINITY;
                for a in 0..inst.num_leader_actions() {
                    for b in 0..inst.num_follower_actions() {
                        best = best.max(q[[h, s, a, b]]);
                    }
                }
                assert_eq!(v[[h, s]], best);
                assert!(v[[h, s]] >= 0.0 && v[[h, s]] <= (h_n - h) as f64);
            }
        }
        for s in 0..inst.num_states() {
            assert_eq!(v[[h_n, s]], 0.0);
        }
    }

    #[test]
    fn regret_of_optimal_action_is_zero() {
        let means = arr2(&[[0.9, 0.6], [0.3, 0.2]]);
        let inst = Instance::Bandit(BanditInstance::new(means, NoiseKind::Bernoulli).unwrap());
        let profile = compute_optimal_profile(&inst);
        let r = instantaneous_regret(
            &profile,
            &inst,
            Chosen::BanditAction {
                leader_arm: 0,
                follower_arm: 0,
            },
        )
        .unwrap();
        assert_eq!(r, 0.0);
        let r = instantaneous_regret(
            &profile,
            &inst,
            Chosen::BanditAction {
                leader_arm: 0,
                follower_arm: 1,
            },
        )
        .unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn greedy_optimal_policy_has_zero_regret() {
        let means = arr2(&[[0.2, 0.9], [0.5, 0.4]]);
        let inst = mdp_from_matrix(&means, 2);
        let profile = compute_optimal_profile(&Instance::Mdp(inst.clone()));
        let q = profile.optimal_q.as_ref().unwrap();
        let mut leader = Array2::zeros((2, 1));
        let mut follower = A3::zeros((2, 1, 2));
        for h in 0..2 {
            let mut best = (0, 0);
            let mut best_v = f64::NEG_INFINITY;
            for a in 0..2 {
                for b in 0..2 {
                    if q[[h, 0, a, b]] > best_v {
                        best_v = q[[h, 0, a, b]];
                        best = (a, b);
                    }
                }
                // The conditional best response under each leader action.
                follower[[h, 0, a]] = if q[[h, 0, a, 0]] >= q[[h, 0, a, 1]] { 0 } else { 1 };
            }
            leader[[h, 0]] = best.0;
        }
        let v = evaluate_policy_pair(&inst, &leader, &follower).unwrap();
        let inst = Instance::Mdp(inst);
        let r = instantaneous_regret(&profile, &inst, Chosen::PolicyValue(v)).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn profile_instance_mismatch_is_a_contract_error() {
        let bandit = Instance::Bandit(
            BanditInstance::new(arr2(&[[0.5]]), NoiseKind::Bernoulli).unwrap(),
        );
        let mdp = Instance::Mdp(mdp_from_matrix(&arr2(&[[0.5]]), 1));
        let profile = compute_optimal_profile(&bandit);
        assert!(matches!(
            instantaneous_regret(&profile, &mdp, Chosen::PolicyValue(0.0)),
            Err(Error::Contract(_))
        ));
    }
}
