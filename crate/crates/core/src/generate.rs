//! Seeded random instance generators.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{check_unichain_exhaustive, MdpModel};
use crate::solver::{policy_iteration, TieBreak};

/// Largest policy space [`random_structured_instance`] will verify.
pub const STRUCTURED_MAX_POLICIES: u64 = 1 << 16;

fn check_dims(num_states: usize, num_actions: usize, reward_range: (f64, f64)) -> Result<()> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidArgument("need at least one state and one action".into()));
    }
    let (lo, hi) = reward_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad reward range [{lo}, {hi}]")));
    }
    Ok(())
}

fn random_rewards(rng: &mut ChaCha8Rng, n: usize, m: usize, (lo, hi): (f64, f64)) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n).map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect())
        .collect()
}

/// A model whose every transition entry is at least `min_prob`, so every
/// policy's chain is irreducible and aperiodic. Rows are uniform draws,
/// normalized and then shifted up by the floor:
/// `p_j = min_prob + (1 − n·min_prob) u_j / Σu`.
pub fn random_unichain_instance(
    num_states: usize,
    num_actions: usize,
    min_prob: f64,
    reward_range: (f64, f64),
    seed: u64,
) -> Result<MdpModel> {
    check_dims(num_states, num_actions, reward_range)?;
    let n = num_states;
    if !(min_prob > 0.0 && min_prob * (n as f64) < 1.0) {
        return Err(Error::InfeasibleMinProb {
            min_prob,
            num_states: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = 1.0 - n as f64 * min_prob;
    let transitions = (0..num_actions)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + f64::MIN_POSITIVE).collect();
                    let total: f64 = u.iter().sum();
                    u.iter().map(|x| min_prob + free * x / total).collect()
                })
                .collect()
        })
        .collect();
    let rewards = random_rewards(&mut rng, n, num_actions, reward_range);
    Ok(MdpModel::validated(transitions, rewards, None)?
        .with_name(format!("random-{n}x{num_actions}-p{min_prob}-s{seed}")))
}

/// A model with random structural zeros (each entry kept with
/// probability `keep_prob`), redrawn until every policy's chain is
/// irreducible. Chains may be periodic.
pub fn random_structured_instance(
    num_states: usize,
    num_actions: usize,
    keep_prob: f64,
    reward_range: (f64, f64),
    seed: u64,
    max_tries: usize,
) -> Result<MdpModel> {
    check_dims(num_states, num_actions, reward_range)?;
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!("keep_prob {keep_prob} is outside (0, 1]")));
    }
    let n = num_states;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_tries {
        let transitions: Vec<Vec<Vec<f64>>> = (0..num_actions)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let mut w: Vec<f64> = (0..n)
                            .map(|_| if rng.random_bool(keep_prob) { rng.random::<f64>() + 0.05 } else { 0.0 })
                            .collect();
                        if w.iter().all(|x| *x == 0.0) {
                            let j = rng.random_range(0..n);
                            w[j] = 1.0;
                        }
                        let total: f64 = w.iter().sum();
                        w.iter().map(|x| x / total).collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = random_rewards(&mut rng, n, num_actions, reward_range);
        let model = MdpModel::validated(transitions, rewards, None)?;
        if check_unichain_exhaustive(&model, STRUCTURED_MAX_POLICIES)?.unichain {
            return Ok(model.with_name(format!("structured-{n}x{num_actions}-k{keep_prob}-s{seed}")));
        }
    }
    Err(Error::GenerationExhausted { tries: max_tries })
}

/// Rewrites rewards so that `count` randomly chosen states each get a
/// second optimal action.
///
/// With `(g, h)` the gain and bias of an optimal policy, setting
/// `r_b(i) = g + h(i) − Σ_j p_b(i,j) h(j)` for a non-optimal action `b`
/// puts `b` on the argmax of the optimality equation at `i`, so swapping
/// it in keeps the gain at `g`.
pub fn plant_optimal_ties(model: &MdpModel, count: usize, seed: u64) -> Result<MdpModel> {
    if model.num_actions() < 2 {
        return Err(Error::InvalidArgument("ties need at least two actions".into()));
    }
    let n = model.num_states();
    let solved = policy_iteration(model, TieBreak::KeepIncumbent, crate::solver::default_max_iters(model))?;
    let (gain, bias, optimal) = (solved.gain.value, solved.bias, solved.policy);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(&mut rng);
    let mut out = model.clone();
    for &state in states.iter().take(count.min(n)) {
        let others: Vec<usize> = (0..model.num_actions()).filter(|&a| a != optimal.action(state)).collect();
        let action = *others.choose(&mut rng).expect("at least two actions");
        let lookahead: f64 = model.row(action, state).iter().zip(&bias).map(|(p, h)| p * h).sum();
        out.set_reward(action, state, gain + bias[state] - lookahead);
    }
    let name = model.name().unwrap_or("model");
    Ok(out.with_name(format!("{name}-ties{count}")))
}
