//! Stationary distributions and average rewards of induced chains.
//!
//! Irreducible chains are solved directly: the system `(Pᵀ − I) μ = 0`
//! with its first equation replaced by `Σ μ = 1`. A singular system is
//! reported as evidence that the chain is reducible, never regularized.
//!
//! Reducible chains (which only arise on multichain inputs) are handled
//! by [`cesaro_gain`], which iterates the state distribution and
//! averages expected rewards, `(1/n) Σ_{t≤n} E[r_t]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{
    induced_chain, induced_mixed_chain, is_irreducible, MdpModel, TransitionMatrix, PROB_TOL,
};
use crate::policy::{MixedPolicy, PurePolicy};

/// Default tolerance for linear solves.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
/// Default tolerance for equalities between derived quantities.
pub const DEFAULT_EQ_TOL: f64 = 1e-8;
/// Default number of averaging steps for [`cesaro_gain`].
pub const DEFAULT_CESARO_HORIZON: u64 = 1_000_000;

/// Tolerance on the sum of a stationary distribution.
pub const STATIONARY_SUM_TOL: f64 = 1e-10;

/// Estimates before this many steps are never accepted as converged.
const CESARO_MIN_STEPS: u64 = 64;

/// A strictly positive probability vector, invariant for some chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryDistribution(Vec<f64>);

impl StationaryDistribution {
    /// Wraps `probs` after checking positivity and unit sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if let Some((state, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::NonPositiveEntry { state, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STATIONARY_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "distribution sums to {sum}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `Σ μ(i) r(i)`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(m, r)| m * r).sum()
    }
}

impl std::ops::Index<usize> for StationaryDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMethod {
    DirectSolve,
    ClosedForm,
    Cesaro,
    Simulation,
}

impl std::fmt::Display for GainMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GainMethod::DirectSolve => "direct-solve",
            GainMethod::ClosedForm => "closed-form",
            GainMethod::Cesaro => "cesaro",
            GainMethod::Simulation => "simulation",
        })
    }
}

/// An average reward together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub value: f64,
    pub method: GainMethod,
    /// Method-specific error diagnostic: the invariance residual for
    /// solves, the last change between successive estimates for Cesàro.
    pub residual: f64,
    pub converged: bool,
}

/// Stationary distribution of an irreducible chain, with
/// `‖μP − μ‖∞ ≤ tol` and every entry above `tol · n`.
pub fn stationary_distribution(chain: &TransitionMatrix, tol: f64) -> Result<StationaryDistribution> {
    let n = chain.dim();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in chain.rows().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            a[(j, i)] = p;
        }
        a[(i, i)] -= 1.0;
    }
    a.row_mut(0).fill(1.0);
    let mut b = DVector::<f64>::zeros(n);
    b[0] = 1.0;

    let solution = solve_dense(a, b)?;
    let floor = tol * n as f64;
    if let Some((state, &value)) = solution.iter().enumerate().find(|(_, &x)| !(x > floor)) {
        return Err(Error::NonPositiveEntry { state, value });
    }
    let sum: f64 = solution.iter().sum();
    let probs: Vec<f64> = solution.iter().map(|x| x / sum).collect();
    let residual = chain.invariance_residual(&probs);
    if !(residual <= tol) {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    Ok(StationaryDistribution(probs))
}

/// Stationary distribution and gain of a pure policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub distribution: StationaryDistribution,
    pub gain: GainReport,
}

pub fn evaluate_policy(model: &MdpModel, policy: &PurePolicy, tol: f64) -> Result<PolicyEvaluation> {
    let chain = induced_chain(model, policy)?;
    let distribution = stationary_distribution(&chain, tol)?;
    let value = distribution.expectation(&model.policy_rewards(policy));
    let residual = chain.invariance_residual(distribution.probs());
    Ok(PolicyEvaluation {
        distribution,
        gain: GainReport {
            value,
            method: GainMethod::DirectSolve,
            residual,
            converged: true,
        },
    })
}

/// `V(π) = Σ_i μ(i) r_{π(i)}(i)` by direct solve. The model's initial
/// distribution is never read.
pub fn average_reward(model: &MdpModel, policy: &PurePolicy, tol: f64) -> Result<GainReport> {
    evaluate_policy(model, policy, tol).map(|e| e.gain)
}

/// Stationary distribution and gain of a mixed policy.
pub fn evaluate_mixed(
    model: &MdpModel,
    policy: &MixedPolicy,
    tol: f64,
) -> Result<(StationaryDistribution, GainReport)> {
    let (chain, rewards) = induced_mixed_chain(model, policy)?;
    let distribution = stationary_distribution(&chain, tol)?;
    let value = distribution.expectation(&rewards);
    let residual = chain.invariance_residual(distribution.probs());
    let gain = GainReport {
        value,
        method: GainMethod::DirectSolve,
        residual,
        converged: true,
    };
    Ok((distribution, gain))
}

/// `Σ_i μ(i) Σ_a λ_i(a) r_a(i)` for the stationary `μ` of the mixed chain.
pub fn mixed_average_reward(model: &MdpModel, policy: &MixedPolicy, tol: f64) -> Result<GainReport> {
    evaluate_mixed(model, policy, tol).map(|(_, g)| g)
}

fn check_start(model: &MdpModel, start: &[f64]) -> Result<()> {
    if start.len() != model.num_states() {
        return Err(Error::InvalidArgument(format!(
            "start vector has {} entries, model has {} states",
            start.len(),
            model.num_states()
        )));
    }
    let sum: f64 = start.iter().sum();
    if start.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidArgument("start vector is not a probability vector".into()));
    }
    Ok(())
}

/// Long-run average reward from `start`, valid for reducible chains too.
///
/// The state distribution is propagated for up to `horizon` steps while
/// accumulating expected rewards. At every power-of-two step `n` the
/// Cesàro means `e_n` and `e_{n/2}` are combined as `2 e_n − e_{n/2}`,
/// which cancels the `O(1/n)` transient bias. The run stops once two
/// successive extrapolated estimates differ by less than `tol` at two
/// consecutive checkpoints. Otherwise the last estimate is returned with
/// `converged == false`.
pub fn cesaro_gain(
    model: &MdpModel,
    policy: &PurePolicy,
    start: &[f64],
    horizon: u64,
    tol: f64,
) -> Result<GainReport> {
    check_start(model, start)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let chain = induced_chain(model, policy)?;
    let rewards = model.policy_rewards(policy);

    let mut dist = start.to_vec();
    let mut total = 0.0;
    let mut prev_mean: Option<f64> = None;
    let mut prev_estimate: Option<f64> = None;
    let mut residual = f64::INFINITY;
    let mut below = 0;
    for t in 1..=horizon {
        dist = chain.left_mul(&dist);
        total += dist.iter().zip(&rewards).map(|(p, r)| p * r).sum::<f64>();
        if !t.is_power_of_two() {
            continue;
        }
        let mean = total / t as f64;
        if let Some(half) = prev_mean {
            let estimate = 2.0 * mean - half;
            if let Some(last) = prev_estimate {
                residual = (estimate - last).abs();
                below = if residual < tol { below + 1 } else { 0 };
                if below >= 2 && t >= CESARO_MIN_STEPS {
                    return Ok(GainReport {
                        value: estimate,
                        method: GainMethod::Cesaro,
                        residual,
                        converged: true,
                    });
                }
            }
            prev_estimate = Some(estimate);
        }
        prev_mean = Some(mean);
    }
    Ok(GainReport {
        value: prev_estimate.unwrap_or(total / horizon as f64),
        method: GainMethod::Cesaro,
        residual,
        converged: false,
    })
}

/// Direct solve when the policy's chain is irreducible, otherwise a
/// Cesàro average from the model's initial distribution (uniform if none).
pub fn gain_with_fallback(model: &MdpModel, policy: &PurePolicy, tol: f64) -> Result<GainReport> {
    let chain = induced_chain(model, policy)?;
    if is_irreducible(&chain, 0.0) {
        average_reward(model, policy, tol)
    } else {
        cesaro_gain(
            model,
            policy,
            &model.initial_or_uniform(),
            DEFAULT_CESARO_HORIZON,
            tol,
        )
    }
}
