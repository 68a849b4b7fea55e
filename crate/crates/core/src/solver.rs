//! Optimal average-reward policies: exhaustive enumeration for small
//! instances and policy iteration on the unichain gain/bias equations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{average_reward, GainMethod, GainReport};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{induced_chain, is_irreducible, MdpModel};
use crate::policy::{policy_count, PolicyEnumerator, PurePolicy};

pub use crate::policy::policy_at;

/// Default absolute tolerance under which two gains count as equal.
pub const DEFAULT_OPT_TOL: f64 = 1e-8;
/// Default bound on the number of policies brute force will enumerate.
pub const DEFAULT_MAX_POLICIES: u64 = 1 << 20;

/// Relative margin a q-value must clear to displace the incumbent action.
const IMPROVEMENT_TOL: f64 = 1e-12;

/// All pure policies in lexicographic order of the action vector.
pub fn enumerate_policies(model: &MdpModel) -> PolicyEnumerator {
    PolicyEnumerator::new(model.num_states(), model.num_actions())
}

/// The optimal gain and every policy attaining it within `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSet {
    pub gain: f64,
    pub policies: Vec<PurePolicy>,
    pub tolerance: f64,
    /// Distance from `gain` to the best non-member, when one was enumerated.
    pub margin: Option<f64>,
}

impl OptimalSet {
    /// A set asserted by the caller rather than computed, e.g. to probe
    /// what happens when non-optimal policies are treated as optimal.
    pub fn claimed(gain: f64, policies: Vec<PurePolicy>, tolerance: f64) -> Self {
        Self {
            gain,
            policies,
            tolerance,
            margin: None,
        }
    }

    pub fn contains(&self, policy: &PurePolicy) -> bool {
        self.policies.contains(policy)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Actions used at `state` by some member, ascending.
    pub fn support(&self, state: usize) -> Vec<usize> {
        let mut actions: Vec<usize> = self.policies.iter().map(|p| p.action(state)).collect();
        actions.sort_unstable();
        actions.dedup();
        actions
    }
}

/// Evaluates every pure policy and keeps those within `tol` of the best.
/// Every induced chain must be irreducible.
pub fn brute_force_optimal_set(model: &MdpModel, tol: f64, max_policies: u64) -> Result<OptimalSet> {
    let too_large = || Error::PolicySpaceTooLarge {
        states: model.num_states(),
        actions: model.num_actions(),
        limit: max_policies,
    };
    let count = policy_count(model.num_states(), model.num_actions()).ok_or_else(too_large)?;
    if count > max_policies {
        return Err(too_large());
    }
    let mut values = Vec::with_capacity(count as usize);
    for policy in enumerate_policies(model) {
        let chain = induced_chain(model, &policy)?;
        if !is_irreducible(&chain, 0.0) {
            return Err(Error::ReduciblePolicy { policy });
        }
        let gain = match average_reward(model, &policy, crate::chain::DEFAULT_SOLVE_TOL) {
            Ok(g) => g.value,
            Err(Error::SingularSystem { .. } | Error::NonPositiveEntry { .. }) => {
                return Err(Error::ReduciblePolicy { policy })
            }
            Err(e) => return Err(e),
        };
        values.push((policy, gain));
    }
    let best = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let mut policies = Vec::new();
    let mut margin: Option<f64> = None;
    for (policy, v) in values {
        let gap = best - v;
        if gap <= tol {
            policies.push(policy);
        } else {
            margin = Some(margin.map_or(gap, |m| m.min(gap)));
        }
    }
    Ok(OptimalSet {
        gain: best,
        policies,
        tolerance: tol,
        margin,
    })
}

/// How policy improvement picks among equally good actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Keep the current action if it is among the best, else the lowest index.
    #[default]
    KeepIncumbent,
    /// Always take the lowest-index best action. Can alternate between
    /// tied policies; `max_iters` bounds the run.
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyIterationResult {
    pub policy: PurePolicy,
    pub gain: GainReport,
    /// Relative values with `bias[0] == 0`.
    pub bias: Vec<f64>,
    pub iterations: usize,
    /// Gain of the policy evaluated at each iteration.
    pub gain_history: Vec<f64>,
    pub converged: bool,
}

/// Default iteration cap: `num_actions^min(num_states, 20)`, at most 10⁵.
pub fn default_max_iters(model: &MdpModel) -> usize {
    let exp = model.num_states().min(20) as u32;
    (model.num_actions() as u64)
        .checked_pow(exp)
        .map_or(100_000, |c| c.min(100_000)) as usize
}

/// Solves `g + h(i) = r(i) + Σ_j P(i,j) h(j)` with `h(0) = 0`.
pub fn evaluate_gain_bias(model: &MdpModel, policy: &PurePolicy) -> Result<(f64, Vec<f64>)> {
    let chain = induced_chain(model, policy)?;
    let rewards = model.policy_rewards(policy);
    let n = model.num_states();
    // unknowns: [g, h(1), ..., h(n-1)]
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, 0)] = 1.0;
        for j in 1..n {
            a[(i, j)] = -chain.get(i, j);
        }
        if i > 0 {
            a[(i, i)] += 1.0;
        }
    }
    let b = DVector::from_vec(rewards);
    let x = solve_dense(a, b).map_err(|_| Error::SingularEvaluation {
        policy: policy.clone(),
    })?;
    let mut bias = vec![0.0; n];
    bias[1..].copy_from_slice(&x.as_slice()[1..]);
    Ok((x[0], bias))
}

fn q_value(model: &MdpModel, bias: &[f64], action: usize, state: usize) -> f64 {
    let row = model.row(action, state);
    model.reward(action, state) + row.iter().zip(bias).map(|(p, h)| p * h).sum::<f64>()
}

/// Howard policy iteration for unichain models, starting from the
/// all-zeros policy. Actions whose q-values are within a relative `1e-12`
/// of the best count as tied; under [`TieBreak::KeepIncumbent`] a tied
/// incumbent is never replaced, so the gain strictly increases on every
/// policy change.
pub fn policy_iteration(model: &MdpModel, tie_break: TieBreak, max_iters: usize) -> Result<PolicyIterationResult> {
    let n = model.num_states();
    let mut policy = PurePolicy::constant(n, 0);
    let mut gain_history = Vec::new();
    let mut iterations = 0;
    loop {
        let (gain, bias) = evaluate_gain_bias(model, &policy)?;
        gain_history.push(gain);
        iterations += 1;

        let mut next = policy.actions().to_vec();
        let mut changed = false;
        for (state, slot) in next.iter_mut().enumerate() {
            let qs: Vec<f64> = (0..model.num_actions())
                .map(|a| q_value(model, &bias, a, state))
                .collect();
            let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = IMPROVEMENT_TOL * best.abs().max(1.0);
            let incumbent = *slot;
            let keep = tie_break == TieBreak::KeepIncumbent && qs[incumbent] >= best - slack;
            if keep {
                continue;
            }
            let choice = qs.iter().position(|&q| q >= best - slack).unwrap_or(incumbent);
            if choice != incumbent {
                *slot = choice;
                changed = true;
            }
        }

        let done = !changed;
        if done || iterations >= max_iters {
            let residual = if done { 0.0 } else { f64::INFINITY };
            return Ok(PolicyIterationResult {
                policy,
                gain: GainReport {
                    value: gain,
                    method: GainMethod::DirectSolve,
                    residual,
                    converged: done,
                },
                bias,
                iterations,
                gain_history,
                converged: done,
            });
        }
        policy = PurePolicy::new(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{two_cycle, stay_or_jump};
    use approx::assert_abs_diff_eq;

    #[test]
    fn brute_force_on_two_cycle() {
        let set = brute_force_optimal_set(&two_cycle(), 1e-8, 100).unwrap();
        assert_abs_diff_eq!(set.gain, 1.0, epsilon = 1e-12);
        assert_eq!(set.policies, vec![PurePolicy::new(vec![1, 1])]);
        assert_abs_diff_eq!(set.margin.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_rewards_make_every_policy_optimal() {
        let model = MdpModel::new(
            vec![
                vec![vec![0.2, 0.8], vec![0.5, 0.5]],
                vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            ],
            vec![vec![3.0, 3.0], vec![3.0, 3.0]],
            None,
        )
        .unwrap();
        let set = brute_force_optimal_set(&model, 1e-8, 100).unwrap();
        assert_abs_diff_eq!(set.gain, 3.0, epsilon = 1e-12);
        assert_eq!(set.len(), 4);
        assert_eq!(set.margin, None);
    }

    #[test]
    fn brute_force_names_reducible_witness() {
        let err = brute_force_optimal_set(&stay_or_jump(), 1e-8, 100).unwrap_err();
        assert_eq!(
            err,
            Error::ReduciblePolicy {
                policy: PurePolicy::new(vec![0, 0])
            }
        );
        assert!(matches!(
            brute_force_optimal_set(&two_cycle(), 1e-8, 2),
            Err(Error::PolicySpaceTooLarge { .. })
        ));
    }

    #[test]
    fn policy_iteration_on_two_cycle() {
        let result = policy_iteration(&two_cycle(), TieBreak::KeepIncumbent, 100).unwrap();
        assert_eq!(result.policy, PurePolicy::new(vec![1, 1]));
        assert_abs_diff_eq!(result.gain.value, 1.0, epsilon = 1e-12);
        assert!(result.converged);
        assert_eq!(result.bias[0], 0.0);
    }

    #[test]
    fn single_action_model_converges_immediately() {
        let model = MdpModel::new(
            vec![vec![vec![0.25, 0.75], vec![0.6, 0.4]]],
            vec![vec![1.0, 2.0]],
            None,
        )
        .unwrap();
        let result = policy_iteration(&model, TieBreak::KeepIncumbent, 10).unwrap();
        assert_eq!(result.iterations, 1);
        let direct = average_reward(&model, &result.policy, 1e-10).unwrap();
        assert_abs_diff_eq!(result.gain.value, direct.value, epsilon = 1e-12);
    }

    #[test]
    fn gain_bias_satisfies_evaluation_equations() {
        let model = two_cycle();
        let policy = PurePolicy::new(vec![0, 1]);
        let (g, h) = evaluate_gain_bias(&model, &policy).unwrap();
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-12);
        for i in 0..2 {
            let a = policy.action(i);
            let rhs = model.reward(a, i) + model.row(a, i).iter().zip(&h).map(|(p, x)| p * x).sum::<f64>();
            assert_abs_diff_eq!(g + h[i], rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn reducible_policy_evaluation_is_singular() {
        let err = evaluate_gain_bias(&stay_or_jump(), &PurePolicy::new(vec![0, 0])).unwrap_err();
        assert!(matches!(err, Error::SingularEvaluation { .. }));
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let result = policy_iteration(&two_cycle(), TieBreak::LowestIndex, 1).unwrap();
        assert!(!result.converged);
        assert_eq!(result.policy, PurePolicy::new(vec![0, 0]));
    }

    #[test]
    fn default_cap() {
        assert_eq!(default_max_iters(&two_cycle()), 4);
    }
}
