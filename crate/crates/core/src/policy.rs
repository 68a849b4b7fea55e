//! Stationary policies: pure (one action per state) and mixed (a
//! probability vector over actions per state), plus lexicographic
//! enumeration of the pure policy space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MdpModel, PROB_TOL};

/// A deterministic stationary policy, one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PurePolicy(Vec<usize>);

impl PurePolicy {
    pub fn new(choice: Vec<usize>) -> Self {
        Self(choice)
    }

    /// Policy that plays `action` everywhere.
    pub fn constant(num_states: usize, action: usize) -> Self {
        Self(vec![action; num_states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Copy of this policy with `state` switched to `action`.
    pub fn with_action(&self, state: usize, action: usize) -> Self {
        let mut choice = self.0.clone();
        choice[state] = action;
        Self(choice)
    }

    /// Number of states where the two policies choose different actions.
    pub fn hamming(&self, other: &PurePolicy) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn check(&self, model: &MdpModel) -> Result<()> {
        if self.0.len() != model.num_states() {
            return Err(Error::PolicyLength {
                expected: model.num_states(),
                got: self.0.len(),
            });
        }
        for (state, &action) in self.0.iter().enumerate() {
            if action >= model.num_actions() {
                return Err(Error::ActionOutOfRange {
                    state,
                    action,
                    num_actions: model.num_actions(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for PurePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl From<Vec<usize>> for PurePolicy {
    fn from(choice: Vec<usize>) -> Self {
        Self(choice)
    }
}

/// A randomized stationary policy: `weights[state][action]` is the
/// probability of playing `action` on each visit to `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedPolicy {
    weights: Vec<Vec<f64>>,
}

impl MixedPolicy {
    pub fn new(weights: Vec<Vec<f64>>) -> Self {
        Self { weights }
    }

    /// Point mass on each action of `policy`.
    pub fn from_pure(policy: &PurePolicy, num_actions: usize) -> Self {
        let weights = policy
            .actions()
            .iter()
            .map(|&a| {
                let mut w = vec![0.0; num_actions];
                w[a] = 1.0;
                w
            })
            .collect();
        Self { weights }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn state_weights(&self, state: usize) -> &[f64] {
        &self.weights[state]
    }

    /// Actions with positive weight at `state`.
    pub fn support(&self, state: usize) -> Vec<usize> {
        self.weights[state]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(a, _)| a)
            .collect()
    }

    /// Returns the pure policy when every state is a point mass.
    pub fn as_pure(&self) -> Option<PurePolicy> {
        self.weights
            .iter()
            .map(|w| {
                let support: Vec<usize> =
                    w.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(a, _)| a).collect();
                match support.as_slice() {
                    [a] if w[*a] == 1.0 => Some(*a),
                    _ => None,
                }
            })
            .collect::<Option<Vec<_>>>()
            .map(PurePolicy)
    }

    pub fn check(&self, model: &MdpModel) -> Result<()> {
        if self.weights.len() != model.num_states() {
            return Err(Error::PolicyLength {
                expected: model.num_states(),
                got: self.weights.len(),
            });
        }
        for (state, w) in self.weights.iter().enumerate() {
            if w.len() != model.num_actions() {
                return Err(Error::InvalidWeights { state });
            }
            let sum: f64 = w.iter().sum();
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidWeights { state });
            }
        }
        Ok(())
    }
}

/// Number of pure policies, `num_actions^num_states`, or `None` on overflow.
pub fn policy_count(num_states: usize, num_actions: usize) -> Option<u64> {
    let states = u32::try_from(num_states).ok()?;
    (num_actions as u64).checked_pow(states)
}

/// Streams every pure policy exactly once, in lexicographic order of
/// the action vector (state 0 is the most significant digit).
#[derive(Debug, Clone)]
pub struct PolicyEnumerator {
    num_actions: usize,
    next: Option<Vec<usize>>,
}

impl PolicyEnumerator {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        let next = (num_actions > 0).then(|| vec![0; num_states]);
        Self { num_actions, next }
    }
}

impl Iterator for PolicyEnumerator {
    type Item = PurePolicy;

    fn next(&mut self) -> Option<PurePolicy> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for digit in succ.iter_mut().rev() {
            *digit += 1;
            if *digit < self.num_actions {
                carry = false;
                break;
            }
            *digit = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        Some(PurePolicy(current))
    }
}

/// The `index`-th policy in enumeration order.
pub fn policy_at(index: u64, num_states: usize, num_actions: usize) -> PurePolicy {
    let mut choice = vec![0; num_states];
    let mut rest = index;
    for digit in choice.iter_mut().rev() {
        *digit = (rest % num_actions as u64) as usize;
        rest /= num_actions as u64;
    }
    PurePolicy(choice)
}
