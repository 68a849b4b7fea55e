//! Closed-form stationary distributions for policies that differ from
//! known ones in one or two states.
//!
//! Both formulas are `O(|S|)` updates. Neither checks that its inputs
//! really come from policies in the required configuration; see
//! [`crate::theorem::is_four_policy_configuration`] for that.

use crate::chain::StationaryDistribution;
use crate::error::{Error, Result};

/// Default relative tolerance on the four-policy denominator.
pub const DEFAULT_DENOM_TOL: f64 = 1e-12;

fn check_same_len(dists: &[&StationaryDistribution]) -> Result<usize> {
    let n = dists[0].len();
    if dists.iter().any(|d| d.len() != n) {
        return Err(Error::InvalidArgument("distributions have different lengths".into()));
    }
    Ok(n)
}

fn normalized(values: Vec<f64>) -> StationaryDistribution {
    let sum: f64 = values.iter().sum();
    StationaryDistribution::from_normalized(values.into_iter().map(|v| v / sum).collect())
}

/// Stationary distribution of the fourth policy `π₁₁` from those of
/// `π₀₀` (`a`), `π₀₁` (`b`, differs from `π₀₀` only at `s2`) and `π₁₀`
/// (`c`, differs only at `s1`):
///
/// ```text
/// d_i = (a_{s2} b_{s1} c_i − a_i b_{s1} c_{s2} + a_{s1} b_i c_{s2}) / α
/// α   =  a_{s2} b_{s1}     −     b_{s1} c_{s2} + a_{s1}     c_{s2}
/// ```
///
/// `denom_tol` is relative to `|a_{s2} b_{s1}| + |b_{s1} c_{s2}| + |a_{s1} c_{s2}|`.
/// A cancelled denominator or a non-positive entry is returned as an
/// error so the caller can fall back to a direct solve. Other role
/// assignments are obtained by relabeling the arguments.
pub fn four_policy_distribution(
    mu00: &StationaryDistribution,
    mu01: &StationaryDistribution,
    mu10: &StationaryDistribution,
    s1: usize,
    s2: usize,
    denom_tol: f64,
) -> Result<StationaryDistribution> {
    let n = check_same_len(&[mu00, mu01, mu10])?;
    if s1 >= n || s2 >= n || s1 == s2 {
        return Err(Error::InvalidArgument(format!(
            "states {s1} and {s2} must be distinct and below {n}"
        )));
    }
    let (a, b, c) = (mu00.probs(), mu01.probs(), mu10.probs());
    let t1 = a[s2] * b[s1];
    let t2 = b[s1] * c[s2];
    let t3 = a[s1] * c[s2];
    let alpha = t1 - t2 + t3;
    let scale = t1.abs() + t2.abs() + t3.abs();
    if !(alpha.abs() >= denom_tol * scale) || alpha == 0.0 {
        return Err(Error::DegenerateDenominator { alpha, scale });
    }
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let nu = t1 * c[i] - a[i] * t2 + t3 * b[i];
        let value = nu / alpha;
        if !(value > 0.0) {
            return Err(Error::NonPositiveResult { state: i, value });
        }
        d.push(value);
    }
    Ok(normalized(d))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mixing weight {lambda} is outside [0, 1]")))
    }
}

/// Stationary distribution of the policy that, at `s1` only, plays
/// policy 1's action with probability `lambda` and policy 2's otherwise:
///
/// ```text
/// c_i = (λ a_i b_{s1} + (1−λ) a_{s1} b_i) / (λ b_{s1} + (1−λ) a_{s1})
/// ```
pub fn mixture_distribution(
    mu1: &StationaryDistribution,
    mu2: &StationaryDistribution,
    s1: usize,
    lambda: f64,
) -> Result<StationaryDistribution> {
    let n = check_same_len(&[mu1, mu2])?;
    if s1 >= n {
        return Err(Error::InvalidArgument(format!("state {s1} out of range")));
    }
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return Ok(mu1.clone());
    }
    if lambda == 0.0 {
        return Ok(mu2.clone());
    }
    let (a, b) = (mu1.probs(), mu2.probs());
    let w1 = lambda * b[s1];
    let w2 = (1.0 - lambda) * a[s1];
    let denom = w1 + w2;
    let c = a.iter().zip(b).map(|(ai, bi)| (w1 * ai + w2 * bi) / denom).collect();
    Ok(normalized(c))
}

/// Average reward of the single-state mixture:
/// `(λ b_{s1} V₁ + (1−λ) a_{s1} V₂) / (λ b_{s1} + (1−λ) a_{s1})`.
///
/// Evaluated as `V₂ + w (V₁ − V₂)` with `w ∈ [0, 1]`, so the result is
/// exact when `V₁ = V₂` and always lies between them.
pub fn mixture_reward(v1: f64, v2: f64, a_s1: f64, b_s1: f64, lambda: f64) -> f64 {
    if lambda >= 1.0 {
        return v1;
    }
    if lambda <= 0.0 {
        return v2;
    }
    let w1 = lambda * b_s1;
    let w = w1 / (w1 + (1.0 - lambda) * a_s1);
    v2 + w * (v1 - v2)
}
