//! Executable checks of the closure properties of optimal policies in
//! unichain MDPs:
//!
//! * any state-wise combination of two optimal policies is optimal;
//! * any randomized mixture over optimal actions is optimal;
//! * four policies that differ in two states cannot have rewards in the
//!   forbidden "both diagonals dominate" patterns;
//! * the greedy one-switch-at-a-time path between two policies has
//!   non-increasing gain once its first step does not increase it.
//!
//! Gains are compared with tolerance semantics: `x > y` means
//! `x − y > tol`, `x ≥ y` means `x − y ≥ −tol`, and `x = y` means
//! `|x − y| ≤ tol`.

use std::collections::HashMap;
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{average_reward, evaluate_mixed, evaluate_policy, gain_with_fallback, GainMethod};
use crate::closed_form::mixture_reward;
use crate::error::{Error, Result};
use crate::model::{induced_chain, is_irreducible, MdpModel};
use crate::policy::{MixedPolicy, PurePolicy};
use crate::solver::OptimalSet;

/// Selectors per pair are enumerated exhaustively up to this many and
/// sampled beyond it.
pub const PER_PAIR_SELECTOR_CAP: u64 = 1 << 16;
pub const DEFAULT_MAX_COMBINATIONS: u64 = 1 << 22;
const MAX_WITNESSES: usize = 64;

/// Ascending list of states where two policies choose different actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DisagreementSet(Vec<usize>);

impl DisagreementSet {
    pub fn between(p1: &PurePolicy, p2: &PurePolicy) -> Self {
        Self(
            p1.actions()
                .iter()
                .zip(p2.actions())
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_same_len(p1: &PurePolicy, p2: &PurePolicy) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::PolicyLength {
            expected: p1.len(),
            got: p2.len(),
        });
    }
    Ok(())
}

/// The policy that follows `p1` where the policies agree and, on the
/// k-th disagreement state, `p1` if `selector[k]` is false, else `p2`.
pub fn combine(p1: &PurePolicy, p2: &PurePolicy, selector: &[bool]) -> Result<PurePolicy> {
    check_same_len(p1, p2)?;
    let diff = DisagreementSet::between(p1, p2);
    if selector.len() != diff.len() {
        return Err(Error::SelectorLength {
            expected: diff.len(),
            got: selector.len(),
        });
    }
    let mut choice = p1.actions().to_vec();
    for (&state, &take_second) in diff.states().iter().zip(selector) {
        if take_second {
            choice[state] = p2.action(state);
        }
    }
    Ok(PurePolicy::new(choice))
}

/// Whether four policies agree outside `{s1, s2}`, pair up as
/// `p00(s1) = p01(s1) ≠ p10(s1) = p11(s1)` and
/// `p00(s2) = p10(s2) ≠ p01(s2) = p11(s2)`.
pub fn is_four_policy_configuration(
    p00: &PurePolicy,
    p01: &PurePolicy,
    p10: &PurePolicy,
    p11: &PurePolicy,
    s1: usize,
    s2: usize,
) -> bool {
    let n = p00.len();
    if [p01, p10, p11].iter().any(|p| p.len() != n) || s1 >= n || s2 >= n || s1 == s2 {
        return false;
    }
    let same_elsewhere = (0..n).filter(|&i| i != s1 && i != s2).all(|i| {
        let a = p00.action(i);
        p01.action(i) == a && p10.action(i) == a && p11.action(i) == a
    });
    let first = p00.action(s1) == p01.action(s1)
        && p10.action(s1) == p11.action(s1)
        && p00.action(s1) != p10.action(s1);
    let second = p00.action(s2) == p10.action(s2)
        && p01.action(s2) == p11.action(s2)
        && p00.action(s2) != p01.action(s2);
    same_elsewhere && first && second
}

/// `[π₀₀, π₀₁, π₁₀, π₁₁]` built from `base` by switching `s1` to `alt1`
/// and/or `s2` to `alt2`.
pub fn four_policy_family(
    base: &PurePolicy,
    s1: usize,
    alt1: usize,
    s2: usize,
    alt2: usize,
) -> [PurePolicy; 4] {
    let p01 = base.with_action(s2, alt2);
    let p10 = base.with_action(s1, alt1);
    let p11 = p10.with_action(s2, alt2);
    [base.clone(), p01, p10, p11]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "policy", rename_all = "kebab-case")]
pub enum Candidate {
    Pure(PurePolicy),
    Mixed(MixedPolicy),
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Pure(p) => write!(f, "{p}"),
            Candidate::Mixed(m) => {
                f.write_str("[")?;
                for (i, w) in m.weights().iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    let parts: Vec<String> = w.iter().map(|x| format!("{x:.4}")).collect();
                    f.write_str(&parts.join(","))?;
                }
                f.write_str("]")
            }
        }
    }
}

/// A tested policy whose value is not within tolerance of the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub candidate: Candidate,
    pub value: f64,
    pub deviation: f64,
    pub method: GainMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub instance: String,
    pub gain: f64,
    pub num_optimal: usize,
    pub tested: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
    /// Combinations whose chain was reducible and were evaluated by
    /// Cesàro averaging instead of a direct solve.
    pub reducible: Vec<PurePolicy>,
    /// Largest gap between the closed-form single-state mixture reward
    /// and the direct solve (mixture checks only).
    pub closed_form_max_error: Option<f64>,
    /// Single-state mixtures whose value fell outside `[min(V₁,V₂), max(V₁,V₂)]`.
    pub sandwich_violations: u64,
}

impl ClosureReport {
    fn new(model: &MdpModel, optimal: &OptimalSet, tol: f64) -> Self {
        Self {
            instance: model.name().unwrap_or("unnamed").to_string(),
            gain: optimal.gain,
            num_optimal: optimal.len(),
            tested: 0,
            max_deviation: 0.0,
            tolerance: tol,
            pass: true,
            witnesses: Vec::new(),
            reducible: Vec::new(),
            closed_form_max_error: None,
            sandwich_violations: 0,
        }
    }

    fn record(&mut self, candidate: impl FnOnce() -> Candidate, value: f64, method: GainMethod) {
        self.tested += 1;
        let deviation = (value - self.gain).abs();
        if deviation.is_nan() || deviation > self.max_deviation {
            self.max_deviation = deviation;
        }
        if !(deviation <= self.tolerance) {
            self.pass = false;
            if self.witnesses.len() < MAX_WITNESSES {
                let candidate = candidate();
                if !self.witnesses.iter().any(|w| w.candidate == candidate) {
                    self.witnesses.push(Witness {
                        candidate,
                        value,
                        deviation,
                        method,
                    });
                }
            }
        }
    }
}

fn selectors(bits: usize, pair_seed: u64) -> Box<dyn Iterator<Item = Vec<bool>>> {
    let exhaustive = bits < 64 && (1u64 << bits) <= PER_PAIR_SELECTOR_CAP;
    if exhaustive {
        Box::new((0..1u64 << bits).map(move |mask| (0..bits).map(|k| mask >> k & 1 == 1).collect()))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
        Box::new((0..PER_PAIR_SELECTOR_CAP).map(move |_| (0..bits).map(|_| rng.random()).collect()))
    }
}

fn planned_selectors(bits: usize) -> u64 {
    if bits < 64 {
        (1u64 << bits).min(PER_PAIR_SELECTOR_CAP)
    } else {
        PER_PAIR_SELECTOR_CAP
    }
}

/// Evaluates every combination of every pair of policies in `optimal`
/// and passes iff each is within `tol` of `optimal.gain`. Reducible
/// combinations (possible only on multichain models) are evaluated by
/// Cesàro averaging and listed in the report.
pub fn verify_combination_closure(
    model: &MdpModel,
    optimal: &OptimalSet,
    tol: f64,
    max_combinations: u64,
) -> Result<ClosureReport> {
    let pairs: Vec<(usize, usize)> = (0..optimal.len())
        .flat_map(|i| (i + 1..optimal.len()).map(move |j| (i, j)))
        .collect();
    let planned = pairs.iter().fold(0u64, |acc, &(i, j)| {
        let bits = optimal.policies[i].hamming(&optimal.policies[j]);
        acc.saturating_add(planned_selectors(bits))
    });
    if planned > max_combinations {
        return Err(Error::TooManyCombinations {
            planned,
            limit: max_combinations,
        });
    }

    let mut report = ClosureReport::new(model, optimal, tol);
    let mut cache: HashMap<PurePolicy, (f64, GainMethod)> = HashMap::new();
    for (pair_index, &(i, j)) in pairs.iter().enumerate() {
        let (p1, p2) = (&optimal.policies[i], &optimal.policies[j]);
        let bits = p1.hamming(p2);
        for selector in selectors(bits, pair_index as u64) {
            let policy = combine(p1, p2, &selector)?;
            let (value, method) = match cache.get(&policy) {
                Some(&hit) => hit,
                None => {
                    let chain = induced_chain(model, &policy)?;
                    if !is_irreducible(&chain, 0.0) {
                        report.reducible.push(policy.clone());
                    }
                    let g = gain_with_fallback(model, &policy, crate::chain::DEFAULT_SOLVE_TOL)?;
                    cache.insert(policy.clone(), (g.value, g.method));
                    (g.value, g.method)
                }
            };
            report.record(|| Candidate::Pure(policy.clone()), value, method);
        }
    }
    report.reducible.sort();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLink {
    pub policy: PurePolicy,
    pub gain: f64,
}

/// Greedy path from `p1` to `p2` switching one disagreement state at a time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolationChain {
    pub links: Vec<ChainLink>,
    pub tolerance: f64,
    /// `V(π₀*) ≥ V(π₁*)`, the premise under which gains must not increase.
    pub premise_holds: bool,
    /// First index `i` with `V(π_i*) > V(π_{i−1}*)`.
    pub first_increase: Option<usize>,
}

impl InterpolationChain {
    /// False only if the premise holds and the gains still increase somewhere.
    pub fn is_consistent(&self) -> bool {
        !self.premise_holds || self.first_increase.is_none()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.gain).collect()
    }
}

/// Builds `π₀* = p1, …, π_s* = p2`, where each `π_i*` has the highest
/// gain among policies obtained from `π_{i−1}*` by switching one
/// remaining disagreement state to `p2`'s action. Gains within `tol` of
/// the best are tied and resolved by lowest state index.
pub fn interpolation_chain(
    model: &MdpModel,
    p1: &PurePolicy,
    p2: &PurePolicy,
    tol: f64,
) -> Result<InterpolationChain> {
    check_same_len(p1, p2)?;
    let solve_tol = crate::chain::DEFAULT_SOLVE_TOL;
    let mut remaining = DisagreementSet::between(p1, p2).states().to_vec();
    let mut current = p1.clone();
    let mut links = vec![ChainLink {
        gain: average_reward(model, &current, solve_tol)?.value,
        policy: current.clone(),
    }];
    while !remaining.is_empty() {
        let mut scored = Vec::with_capacity(remaining.len());
        for (k, &state) in remaining.iter().enumerate() {
            let next = current.with_action(state, p2.action(state));
            let gain = average_reward(model, &next, solve_tol)?.value;
            scored.push((k, next, gain));
        }
        let best = scored.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
        let (k, next, gain) = scored
            .into_iter()
            .find(|s| s.2 >= best - tol)
            .expect("at least one candidate");
        remaining.remove(k);
        current = next;
        links.push(ChainLink {
            policy: current.clone(),
            gain,
        });
    }
    let premise_holds = links.len() < 2 || links[0].gain >= links[1].gain - tol;
    let first_increase = (1..links.len()).find(|&i| links[i].gain - links[i - 1].gain > tol);
    Ok(InterpolationChain {
        links,
        tolerance: tol,
        premise_holds,
        first_increase,
    })
}

/// Relations among the gains of four policies in the two-state
/// configuration that can never be violated on a unichain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `V_ab > V_{¬a,b}, V_{a,¬b}` and `V_{¬a,¬b} ≥ V_{¬a,b}, V_{a,¬b}` is impossible.
    ForbiddenAbove,
    /// `V_ab < V_{¬a,b}, V_{a,¬b}` and `V_{¬a,¬b} ≤ V_{¬a,b}, V_{a,¬b}` is impossible.
    ForbiddenBelow,
    /// `V_ab < both` ⇒ `V_{¬a,¬b} > min`.
    StrictBelowImpliesAboveMin,
    /// `V_ab > both` ⇒ `V_{¬a,¬b} < max`.
    StrictAboveImpliesBelowMax,
    /// `V_ab ≤ both` ⇒ `V_{¬a,¬b} ≥ min`.
    BelowImpliesAtLeastMin,
    /// `V_ab ≥ both` ⇒ `V_{¬a,¬b} ≤ max`.
    AboveImpliesAtMostMax,
    /// `V_ab = V_{a,¬b} = V_{¬a,b}` ⇒ `V_{¬a,¬b} = V_ab`.
    EqualNeighborsImplyEqual,
    /// `V_ab, V_{¬a,¬b} ≥ both` ⇒ all four equal.
    DiagonalAboveImpliesAllEqual,
}

impl Rule {
    pub const ALL: [Rule; 8] = [
        Rule::ForbiddenAbove,
        Rule::ForbiddenBelow,
        Rule::StrictBelowImpliesAboveMin,
        Rule::StrictAboveImpliesBelowMax,
        Rule::BelowImpliesAtLeastMin,
        Rule::AboveImpliesAtMostMax,
        Rule::EqualNeighborsImplyEqual,
        Rule::DiagonalAboveImpliesAllEqual,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Rule::ForbiddenAbove => "forbidden-above",
            Rule::ForbiddenBelow => "forbidden-below",
            Rule::StrictBelowImpliesAboveMin => "implication-i",
            Rule::StrictAboveImpliesBelowMax => "implication-ii",
            Rule::BelowImpliesAtLeastMin => "implication-iii",
            Rule::AboveImpliesAtMostMax => "implication-iv",
            Rule::EqualNeighborsImplyEqual => "implication-v",
            Rule::DiagonalAboveImpliesAllEqual => "implication-vi",
        }
    }
}

/// One rule instantiated at corner `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Clause {
    pub rule: Rule,
    pub a: u8,
    pub b: u8,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[a={},b={}]", self.rule.id(), self.a, self.b)
    }
}

struct Tolerant(f64);

impl Tolerant {
    fn gt(&self, x: f64, y: f64) -> bool {
        x - y > self.0
    }
    fn lt(&self, x: f64, y: f64) -> bool {
        y - x > self.0
    }
    fn ge(&self, x: f64, y: f64) -> bool {
        x - y >= -self.0
    }
    fn le(&self, x: f64, y: f64) -> bool {
        y - x >= -self.0
    }
    fn eq(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.0
    }
}

fn rule_holds(rule: Rule, corner: f64, n1: f64, n2: f64, opposite: f64, t: &Tolerant) -> bool {
    let (lo, hi) = (n1.min(n2), n1.max(n2));
    match rule {
        Rule::ForbiddenAbove => {
            !(t.gt(corner, n1) && t.gt(corner, n2) && t.ge(opposite, n1) && t.ge(opposite, n2))
        }
        Rule::ForbiddenBelow => {
            !(t.lt(corner, n1) && t.lt(corner, n2) && t.le(opposite, n1) && t.le(opposite, n2))
        }
        Rule::StrictBelowImpliesAboveMin => {
            !(t.lt(corner, n1) && t.lt(corner, n2)) || t.gt(opposite, lo)
        }
        Rule::StrictAboveImpliesBelowMax => {
            !(t.gt(corner, n1) && t.gt(corner, n2)) || t.lt(opposite, hi)
        }
        Rule::BelowImpliesAtLeastMin => !(t.le(corner, n1) && t.le(corner, n2)) || t.ge(opposite, lo),
        Rule::AboveImpliesAtMostMax => !(t.ge(corner, n1) && t.ge(corner, n2)) || t.le(opposite, hi),
        Rule::EqualNeighborsImplyEqual => {
            !(t.eq(corner, n1) && t.eq(corner, n2)) || t.eq(opposite, corner)
        }
        Rule::DiagonalAboveImpliesAllEqual => {
            let premise = t.ge(corner, n1) && t.ge(corner, n2) && t.ge(opposite, n1) && t.ge(opposite, n2);
            !premise
                || (t.eq(corner, n1) && t.eq(corner, n2) && t.eq(corner, opposite) && t.eq(n1, n2))
        }
    }
}

/// Every rule at every corner that the four gains violate; empty when
/// the gains are consistent with a unichain model.
pub fn check_four_reward_relations(v00: f64, v01: f64, v10: f64, v11: f64, tol: f64) -> Vec<Clause> {
    let v = [[v00, v01], [v10, v11]];
    let t = Tolerant(tol);
    let mut violated = Vec::new();
    for a in 0..2usize {
        for b in 0..2usize {
            let corner = v[a][b];
            let n1 = v[1 - a][b];
            let n2 = v[a][1 - b];
            let opposite = v[1 - a][1 - b];
            for rule in Rule::ALL {
                if !rule_holds(rule, corner, n1, n2, opposite, &t) {
                    violated.push(Clause {
                        rule,
                        a: a as u8,
                        b: b as u8,
                    });
                }
            }
        }
    }
    violated
}

/// Uniform sample from the probability simplex on `k` vertices, as the
/// gaps between `k − 1` sorted uniforms.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..k.saturating_sub(1)).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(k);
    let mut prev = 0.0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(1.0 - prev);
    out
}

/// Samples mixed policies whose per-state support lies within the
/// actions of `optimal` and checks each is within `tol` of the optimal
/// gain. Every other sample mixes a single state between two actions,
/// and is also checked against the closed-form mixture reward.
pub fn verify_mixture_optimality(
    model: &MdpModel,
    optimal: &OptimalSet,
    num_samples: u64,
    seed: u64,
    tol: f64,
) -> Result<ClosureReport> {
    let n = model.num_states();
    let m = model.num_actions();
    let supports: Vec<Vec<usize>> = (0..n).map(|i| optimal.support(i)).collect();
    if let Some(state) = supports.iter().position(Vec::is_empty) {
        return Err(Error::EmptySupport { state });
    }
    let mixable: Vec<usize> = (0..n).filter(|&i| supports[i].len() >= 2).collect();
    let solve_tol = crate::chain::DEFAULT_SOLVE_TOL;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ClosureReport::new(model, optimal, tol);
    let mut closed_form_max: Option<f64> = None;

    for k in 0..num_samples {
        let mut weights = vec![vec![0.0; m]; n];
        if k % 2 == 1 && !mixable.is_empty() {
            let state = *mixable.choose(&mut rng).expect("nonempty");
            let mut pair = supports[state].clone();
            pair.shuffle(&mut rng);
            let (x, y) = (pair[0], pair[1]);
            let lambda: f64 = rng.random();
            let mut base: Vec<usize> = supports
                .iter()
                .map(|s| *s.choose(&mut rng).expect("nonempty"))
                .collect();
            base[state] = x;
            let pi1 = PurePolicy::new(base.clone());
            let pi2 = pi1.with_action(state, y);
            for (i, &a) in base.iter().enumerate() {
                weights[i][a] = 1.0;
            }
            weights[state][x] = lambda;
            weights[state][y] = 1.0 - lambda;
            let mixed = MixedPolicy::new(weights);
            let (_, direct) = evaluate_mixed(model, &mixed, solve_tol)?;
            let e1 = evaluate_policy(model, &pi1, solve_tol)?;
            let e2 = evaluate_policy(model, &pi2, solve_tol)?;
            let (v1, v2) = (e1.gain.value, e2.gain.value);
            let closed = mixture_reward(v1, v2, e1.distribution[state], e2.distribution[state], lambda);
            let err = (closed - direct.value).abs();
            closed_form_max = Some(closed_form_max.map_or(err, |e| e.max(err)));
            if direct.value < v1.min(v2) - tol || direct.value > v1.max(v2) + tol {
                report.sandwich_violations += 1;
            }
            report.record(|| Candidate::Mixed(mixed), direct.value, direct.method);
        } else {
            for (i, support) in supports.iter().enumerate() {
                let w = sample_simplex(&mut rng, support.len());
                for (&a, x) in support.iter().zip(w) {
                    weights[i][a] = x;
                }
            }
            let mixed = MixedPolicy::new(weights);
            let (_, direct) = evaluate_mixed(model, &mixed, solve_tol)?;
            report.record(|| Candidate::Mixed(mixed), direct.value, direct.method);
        }
    }
    report.closed_form_max_error = closed_form_max;
    Ok(report)
}
