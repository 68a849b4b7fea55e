//! The finite MDP data model, its validation, and the Markov chains
//! induced by pure and mixed stationary policies.
//!
//! All states share one action set of size `num_actions`. Models with
//! per-state action sets can be emulated by padding with duplicate
//! actions.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{policy_count, MixedPolicy, PolicyEnumerator, PurePolicy};

/// Tolerance on probability-vector sums.
pub const PROB_TOL: f64 = 1e-12;

/// A finite average-reward MDP.
///
/// `transitions` is indexed `[action][from][to]`, `rewards` is indexed
/// `[action][state]` and holds mean payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
    initial: Option<Vec<f64>>,
    name: Option<String>,
}

impl MdpModel {
    /// Builds a model after checking that every array has a consistent
    /// shape. Value invariants are checked separately by [`validate_mdp`].
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self> {
        let num_actions = transitions.len();
        if num_actions == 0 {
            return Err(Error::Shape("at least one action is required".into()));
        }
        let num_states = transitions[0].len();
        if num_states == 0 {
            return Err(Error::Shape("at least one state is required".into()));
        }
        for (a, matrix) in transitions.iter().enumerate() {
            if matrix.len() != num_states {
                return Err(Error::Shape(format!(
                    "transitions[{a}] has {} rows, expected {num_states}",
                    matrix.len()
                )));
            }
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::Shape(format!(
                        "transitions[{a}][{i}] has {} entries, expected {num_states}",
                        row.len()
                    )));
                }
            }
        }
        if rewards.len() != num_actions {
            return Err(Error::Shape(format!(
                "rewards has {} rows, expected {num_actions}",
                rewards.len()
            )));
        }
        for (a, row) in rewards.iter().enumerate() {
            if row.len() != num_states {
                return Err(Error::Shape(format!(
                    "rewards[{a}] has {} entries, expected {num_states}",
                    row.len()
                )));
            }
        }
        if let Some(init) = &initial {
            if init.len() != num_states {
                return Err(Error::Shape(format!(
                    "initial has {} entries, expected {num_states}",
                    init.len()
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            initial,
            name: None,
        })
    }

    /// Like [`MdpModel::new`], but also rejects models with value violations.
    pub fn validated(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self> {
        let model = Self::new(transitions, rewards, initial)?;
        let report = validate_mdp(&model);
        if report.is_empty() {
            Ok(model)
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn transitions(&self) -> &[Vec<Vec<f64>>] {
        &self.transitions
    }

    /// Transition row `p_action(state, ·)`.
    pub fn row(&self, action: usize, state: usize) -> &[f64] {
        &self.transitions[action][state]
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn reward(&self, action: usize, state: usize) -> f64 {
        self.rewards[action][state]
    }

    pub fn initial(&self) -> Option<&[f64]> {
        self.initial.as_deref()
    }

    /// The initial distribution, or uniform when the model has none.
    pub fn initial_or_uniform(&self) -> Vec<f64> {
        self.initial
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.num_states as f64; self.num_states])
    }

    /// Reward vector `r_{π(i)}(i)` of a pure policy.
    pub fn policy_rewards(&self, policy: &PurePolicy) -> Vec<f64> {
        policy
            .actions()
            .iter()
            .enumerate()
            .map(|(i, &a)| self.rewards[a][i])
            .collect()
    }

    pub(crate) fn set_reward(&mut self, action: usize, state: usize, value: f64) {
        self.rewards[action][state] = value;
    }
}

/// One broken invariant of an [`MdpModel`], addressed by index path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    RowSum { action: usize, state: usize, sum: f64 },
    NegativeTransition { action: usize, state: usize, to: usize, value: f64 },
    NonFiniteTransition { action: usize, state: usize, to: usize },
    NonFiniteReward { action: usize, state: usize },
    InitialSum { sum: f64 },
    NegativeInitial { state: usize, value: f64 },
    NonFiniteInitial { state: usize },
}

impl Violation {
    pub fn path(&self) -> String {
        match *self {
            Violation::RowSum { action, state, .. } => format!("transitions[{action}][{state}]"),
            Violation::NegativeTransition { action, state, to, .. }
            | Violation::NonFiniteTransition { action, state, to } => {
                format!("transitions[{action}][{state}][{to}]")
            }
            Violation::NonFiniteReward { action, state } => format!("rewards[{action}][{state}]"),
            Violation::InitialSum { .. } => "initial".to_string(),
            Violation::NegativeInitial { state, .. } | Violation::NonFiniteInitial { state } => {
                format!("initial[{state}]")
            }
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = self.path();
        match self {
            Violation::RowSum { sum, .. } => write!(f, "{path}: row sums to {sum}"),
            Violation::NegativeTransition { value, .. } => write!(f, "{path}: negative entry {value}"),
            Violation::NonFiniteTransition { .. } => write!(f, "{path}: non-finite entry"),
            Violation::NonFiniteReward { .. } => write!(f, "{path}: non-finite reward"),
            Violation::InitialSum { sum } => write!(f, "{path}: sums to {sum}"),
            Violation::NegativeInitial { value, .. } => write!(f, "{path}: negative entry {value}"),
            Violation::NonFiniteInitial { .. } => write!(f, "{path}: non-finite entry"),
        }
    }
}

fn check_probability_vector(
    values: &[f64],
    mut non_finite: impl FnMut(usize) -> Violation,
    mut negative: impl FnMut(usize, f64) -> Violation,
    sum_violation: impl FnOnce(f64) -> Violation,
    out: &mut Vec<Violation>,
) {
    let mut finite = true;
    for (j, &p) in values.iter().enumerate() {
        if !p.is_finite() {
            out.push(non_finite(j));
            finite = false;
        } else if p < 0.0 {
            out.push(negative(j, p));
        }
    }
    if finite {
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(sum_violation(sum));
        }
    }
}

/// Lists every invariant violation of `model`; empty iff the model is valid.
pub fn validate_mdp(model: &MdpModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (action, matrix) in model.transitions.iter().enumerate() {
        for (state, row) in matrix.iter().enumerate() {
            check_probability_vector(
                row,
                |to| Violation::NonFiniteTransition { action, state, to },
                |to, value| Violation::NegativeTransition { action, state, to, value },
                |sum| Violation::RowSum { action, state, sum },
                &mut out,
            );
        }
    }
    for (action, row) in model.rewards.iter().enumerate() {
        for (state, r) in row.iter().enumerate() {
            if !r.is_finite() {
                out.push(Violation::NonFiniteReward { action, state });
            }
        }
    }
    if let Some(init) = &model.initial {
        check_probability_vector(
            init,
            |state| Violation::NonFiniteInitial { state },
            |state, value| Violation::NegativeInitial { state, value },
            |sum| Violation::InitialSum { sum },
            &mut out,
        );
    }
    out
}

/// A square row-stochastic matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    /// Checks squareness, entries in [0, 1] and unit row sums.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("empty transition matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Shape(format!("row {i} is not a probability vector")));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_flat(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Row vector times matrix, `x P`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (xi, row) in x.iter().zip(self.rows()) {
            if *xi == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += xi * p;
            }
        }
        out
    }

    /// `‖x P − x‖∞`.
    pub fn invariance_residual(&self, x: &[f64]) -> f64 {
        self.left_mul(x)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The chain `P = (p_{π(i)}(i, j))` induced by a pure policy. Rows are
/// copied verbatim from the model.
pub fn induced_chain(model: &MdpModel, policy: &PurePolicy) -> Result<TransitionMatrix> {
    policy.check(model)?;
    let n = model.num_states;
    let mut data = Vec::with_capacity(n * n);
    for (i, &a) in policy.actions().iter().enumerate() {
        data.extend_from_slice(model.row(a, i));
    }
    Ok(TransitionMatrix::from_flat(n, data))
}

/// The chain and per-state expected reward induced by a mixed policy.
/// Row `i` is the `weights(i)`-convex combination of the action rows at `i`.
pub fn induced_mixed_chain(
    model: &MdpModel,
    policy: &MixedPolicy,
) -> Result<(TransitionMatrix, Vec<f64>)> {
    policy.check(model)?;
    let n = model.num_states;
    let mut data = vec![0.0; n * n];
    let mut rewards = vec![0.0; n];
    for i in 0..n {
        let row = &mut data[i * n..(i + 1) * n];
        for (a, &w) in policy.state_weights(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (out, p) in row.iter_mut().zip(model.row(a, i)) {
                *out += w * p;
            }
            rewards[i] += w * model.reward(a, i);
        }
    }
    Ok((TransitionMatrix::from_flat(n, data), rewards))
}

fn reaches_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for (j, visited) in seen.iter_mut().enumerate() {
            if !*visited && edge(i, j) {
                *visited = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Whether the graph with edges `{(i, j) : p(i, j) > eps}` is strongly connected.
pub fn is_irreducible(chain: &TransitionMatrix, eps: f64) -> bool {
    let n = chain.dim();
    reaches_all(n, |i, j| chain.get(i, j) > eps) && reaches_all(n, |i, j| chain.get(j, i) > eps)
}

/// Outcome of an exhaustive unichain check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnichainVerdict {
    pub unichain: bool,
    /// First policy (in enumeration order) whose chain is reducible.
    pub witness: Option<PurePolicy>,
    pub policies_checked: u64,
}

/// Checks every pure policy's chain for irreducibility. Fails with
/// [`Error::PolicySpaceTooLarge`] when there are more than `max_policies`.
pub fn check_unichain_exhaustive(model: &MdpModel, max_policies: u64) -> Result<UnichainVerdict> {
    let too_large = || Error::PolicySpaceTooLarge {
        states: model.num_states,
        actions: model.num_actions,
        limit: max_policies,
    };
    let count = policy_count(model.num_states, model.num_actions).ok_or_else(too_large)?;
    if count > max_policies {
        return Err(too_large());
    }
    let mut checked = 0;
    for policy in PolicyEnumerator::new(model.num_states, model.num_actions) {
        checked += 1;
        let chain = induced_chain(model, &policy)?;
        if !is_irreducible(&chain, 0.0) {
            return Ok(UnichainVerdict {
                unichain: false,
                witness: Some(policy),
                policies_checked: checked,
            });
        }
    }
    Ok(UnichainVerdict {
        unichain: true,
        witness: None,
        policies_checked: checked,
    })
}
