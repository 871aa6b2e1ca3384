//! Shared helpers for integration tests: deterministic instance generators
//! and an exhaustive policy-enumeration oracle that is independent of the
//! library's backward-induction path.
//!
//! Each test binary uses its own subset of these.
#![allow(dead_code)]

use hierlearn::instance::{BanditInstance, MdpInstance, MultiFollowerInstance, NoiseKind};
use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A mean from the grid {0.05, 0.15, ..., 0.95}: every nonzero gap between
/// two such means is at least 0.1 (up to float representation).
pub fn grid_mean(rng: &mut ChaCha8Rng) -> f64 {
    0.05 + 0.1 * rng.random_range(0..10u32) as f64
}

pub fn random_bandit_instance(seed: u64, a: usize, b: usize) -> BanditInstance {
    let mut rng = test_rng(seed);
    let means = Array2::from_shape_fn((a, b), |_| grid_mean(&mut rng));
    BanditInstance::new(means, NoiseKind::Bernoulli).unwrap()
}

/// Grid-mean bandit instance that is guaranteed to have at least one
/// strictly suboptimal leader arm (redraws deterministically otherwise).
pub fn gapped_bandit_instance(seed: u64, a: usize, b: usize) -> BanditInstance {
    for attempt in 0..1000 {
        let inst = random_bandit_instance(seed.wrapping_add(attempt * 0x9e37), a, b);
        let per_arm: Vec<f64> = (0..a)
            .map(|i| (0..b).map(|j| inst.mean(i, j)).fold(f64::MIN, f64::max))
            .collect();
        let best = per_arm.iter().cloned().fold(f64::MIN, f64::max);
        if per_arm.iter().any(|&m| m < best - 1e-9) {
            return inst;
        }
    }
    unreachable!("grid draws produce a suboptimal arm within 1000 attempts");
}

pub fn random_multi_instance(seed: u64, a: usize, arm_counts: &[usize]) -> MultiFollowerInstance {
    let mut rng = test_rng(seed);
    let means = arm_counts
        .iter()
        .map(|&b| Array2::from_shape_fn((a, b), |_| grid_mean(&mut rng)))
        .collect();
    MultiFollowerInstance::new(means, NoiseKind::Bernoulli).unwrap()
}

/// Random MDP with grid rewards and strictly positive normalized transition
/// rows (exactly stochastic by construction).
pub fn random_mdp_instance(
    seed: u64,
    s: usize,
    a: usize,
    b: usize,
    h: usize,
) -> MdpInstance {
    let mut rng = test_rng(seed);
    let rewards = Array3::from_shape_fn((s, a, b), |_| grid_mean(&mut rng));
    let mut transitions = Array4::zeros((s, a, b, s));
    for si in 0..s {
        for ai in 0..a {
            for bi in 0..b {
                let weights: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.1).collect();
                let total: f64 = weights.iter().sum();
                let mut partial = 0.0;
                for sj in 0..s - 1 {
                    let p = weights[sj] / total;
                    transitions[[si, ai, bi, sj]] = p;
                    partial += p;
                }
                transitions[[si, ai, bi, s - 1]] = 1.0 - partial;
            }
        }
    }
    MdpInstance::new(rewards, transitions, h, 0, NoiseKind::Bernoulli).unwrap()
}

/// S=3, A=B=2, H=3 MDP built around an action-neutral hub: episodes start in
/// the hub (state 0, all joint actions equivalent), move to one of two
/// action states where the follower faces a large gap under each leader
/// action and the leader-level gap is small, then mostly return to the hub.
/// Transitions depend on the state only.
pub fn hub_mdp_instance() -> MdpInstance {
    let (s_n, a_n, b_n, h) = (3, 2, 2, 3);
    let mut rewards = Array3::from_elem((s_n, a_n, b_n), 0.05);
    for a in 0..a_n {
        for b in 0..b_n {
            rewards[[0, a, b]] = 0.5;
        }
    }
    // State 1: best pair (0,1) at 0.9, runner-up (1,0) at 0.8.
    rewards[[1, 0, 1]] = 0.9;
    rewards[[1, 1, 0]] = 0.8;
    // State 2: best pair (1,0) at 0.85, runner-up (0,1) at 0.75.
    rewards[[2, 1, 0]] = 0.85;
    rewards[[2, 0, 1]] = 0.75;

    let rows = [[0.0, 0.5, 0.5], [0.9, 0.05, 0.05], [0.9, 0.05, 0.05]];
    let mut transitions = Array4::zeros((s_n, a_n, b_n, s_n));
    for s in 0..s_n {
        for a in 0..a_n {
            for b in 0..b_n {
                for (s2, &p) in rows[s].iter().enumerate() {
                    transitions[[s, a, b, s2]] = p;
                }
            }
        }
    }
    MdpInstance::new(rewards, transitions, h, 0, NoiseKind::Bernoulli).unwrap()
}

/// Random MDP with dimensions drawn from S <= 3, A, B <= 2, H <= 3.
pub fn random_small_mdp(seed: u64) -> MdpInstance {
    let mut rng = test_rng(seed);
    let s = rng.random_range(1..=3);
    let a = rng.random_range(1..=2);
    let b = rng.random_range(1..=2);
    let h = rng.random_range(1..=3);
    random_mdp_instance(seed.wrapping_add(1), s, a, b, h)
}

/// Exhaustive oracle: the best value achievable at `h = 1` in every state by
/// ANY deterministic Markov joint policy `(h, s) -> (a, b)`, found by
/// enumerating all `(A*B)^(H*S)` policies and evaluating each exactly.
pub fn brute_force_optimal_initial_values(inst: &MdpInstance) -> Vec<f64> {
    let (s_n, a_n, b_n, h_n) = (
        inst.num_states(),
        inst.num_leader_actions(),
        inst.num_follower_actions(),
        inst.horizon(),
    );
    let joint = a_n * b_n;
    let slots = h_n * s_n;
    let total = joint.pow(slots as u32);
    let mut best = vec![f64::NEG_INFINITY; s_n];
    let mut policy = vec![(0usize, 0usize); slots];
    for code in 0..total {
        let mut rem = code;
        for slot in policy.iter_mut() {
            let ja = rem % joint;
            rem /= joint;
            *slot = (ja / b_n, ja % b_n);
        }
        let mut next = vec![0.0; s_n];
        for h in (0..h_n).rev() {
            let mut cur = vec![0.0; s_n];
            for s in 0..s_n {
                let (a, b) = policy[h * s_n + s];
                let expect: f64 = next
                    .iter()
                    .enumerate()
                    .map(|(s2, &v)| inst.transition_probability(s, a, b, s2) * v)
                    .sum();
                cur[s] = inst.reward_mean(s, a, b) + expect;
            }
            next = cur;
        }
        for s in 0..s_n {
            if next[s] > best[s] {
                best[s] = next[s];
            }
        }
    }
    best
}
