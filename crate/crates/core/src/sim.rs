//! Trajectory simulation under deterministic, possibly non-stationary
//! action schedules.
//!
//! A [`Schedule`] picks the action for each visit to a state from that
//! state's visit count, so a growing-block schedule can make the action
//! frequencies oscillate forever while staying fully reproducible.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{parse_policy, parse_supports};
use crate::model::MdpModel;
use crate::policy::PurePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRule {
    /// Always the first action of the support.
    Stationary,
    /// Visit `v` plays `support[v mod len]`.
    RoundRobin,
    /// Visits `[2^k − 1, 2^{k+1} − 1)` form block `k`, which plays
    /// `support[k mod len]`. Action frequencies never converge.
    GrowingBlocks,
}

/// Maps `(state, visit count at that state)` to an action from the
/// state's declared support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub name: String,
    supports: Vec<Vec<usize>>,
    rule: ScheduleRule,
}

impl Schedule {
    pub fn new(name: impl Into<String>, supports: Vec<Vec<usize>>, rule: ScheduleRule) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one state".into()));
        }
        if let Some(state) = supports.iter().position(Vec::is_empty) {
            return Err(Error::EmptySupport { state });
        }
        Ok(Self {
            name: name.into(),
            supports,
            rule,
        })
    }

    /// Plays `policy` at every visit.
    pub fn stationary(policy: &PurePolicy) -> Self {
        Self {
            name: format!("pure{policy}"),
            supports: policy.actions().iter().map(|&a| vec![a]).collect(),
            rule: ScheduleRule::Stationary,
        }
    }

    /// Growing blocks alternating, per state, between the actions of `p1`
    /// and `p2`. States where they agree are stationary.
    pub fn alternating_blocks(p1: &PurePolicy, p2: &PurePolicy) -> Self {
        let supports = p1
            .actions()
            .iter()
            .zip(p2.actions())
            .map(|(&a, &b)| if a == b { vec![a] } else { vec![a, b] })
            .collect();
        Self {
            name: format!("blocks{p1}|{p2}"),
            supports,
            rule: ScheduleRule::GrowingBlocks,
        }
    }

    /// Parses `pure:<policy>`, `round-robin:<supports>`, `blocks:<supports>`
    /// or `between:<policy>|<policy>`, where a policy is comma-separated
    /// actions and supports are `;`-separated comma lists.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, body) = text
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("schedule `{text}` has no `kind:` prefix")))?;
        match kind.trim() {
            "pure" => Ok(Self::stationary(&parse_policy(body)?)),
            "round-robin" => Self::new(text, parse_supports(body)?, ScheduleRule::RoundRobin),
            "blocks" => Self::new(text, parse_supports(body)?, ScheduleRule::GrowingBlocks),
            "between" => {
                let (a, b) = body
                    .split_once('|')
                    .ok_or_else(|| Error::InvalidArgument("`between:` needs two policies separated by `|`".into()))?;
                let (p1, p2) = (parse_policy(a)?, parse_policy(b)?);
                if p1.len() != p2.len() {
                    return Err(Error::PolicyLength {
                        expected: p1.len(),
                        got: p2.len(),
                    });
                }
                Ok(Self::alternating_blocks(&p1, &p2))
            }
            other => Err(Error::InvalidArgument(format!("unknown schedule kind `{other}`"))),
        }
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn rule(&self) -> ScheduleRule {
        self.rule
    }

    pub fn action(&self, state: usize, visit: u64) -> usize {
        let support = &self.supports[state];
        let len = support.len() as u64;
        let index = match self.rule {
            ScheduleRule::Stationary => 0,
            ScheduleRule::RoundRobin => visit % len,
            ScheduleRule::GrowingBlocks => {
                let block = u64::from((visit + 1).ilog2());
                block % len
            }
        };
        support[index as usize]
    }

    pub fn check(&self, model: &MdpModel) -> Result<()> {
        if self.supports.len() != model.num_states() {
            return Err(Error::PolicyLength {
                expected: model.num_states(),
                got: self.supports.len(),
            });
        }
        for (state, support) in self.supports.iter().enumerate() {
            if let Some(&action) = support.iter().find(|&&a| a >= model.num_actions()) {
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: u64,
    pub running_average: f64,
    pub visits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub steps: u64,
    pub total_reward: f64,
    pub running_average: f64,
    pub visits: Vec<u64>,
    /// `action_counts[state][action]`.
    pub action_counts: Vec<Vec<u64>>,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryStats {
    /// Relative frequency of each action at `state`; all zeros if unvisited.
    pub fn frequencies(&self, state: usize) -> Vec<f64> {
        let visits = self.visits[state];
        self.action_counts[state]
            .iter()
            .map(|&c| if visits == 0 { 0.0 } else { c as f64 / visits as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    /// Standard deviation of Gaussian noise added to each payoff; 0 disables it.
    pub reward_noise: f64,
}

/// Steps `⌈10^{k/4}⌉`, k = 0, 1, …, up to `steps`, plus `steps` itself.
pub fn checkpoints(steps: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for k in 0.. {
        let t = 10f64.powf(k as f64 / 4.0).ceil() as u64;
        if t > steps {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    if out.last() != Some(&steps) && steps > 0 {
        out.push(steps);
    }
    out
}

fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
            acc += p;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

/// Runs `steps` transitions from the initial distribution (uniform if the
/// model has none), paying mean rewards.
pub fn simulate(model: &MdpModel, schedule: &Schedule, steps: u64, seed: u64) -> Result<TrajectoryStats> {
    simulate_with(model, schedule, steps, seed, SimOptions::default())
}

pub fn simulate_with(
    model: &MdpModel,
    schedule: &Schedule,
    steps: u64,
    seed: u64,
    options: SimOptions,
) -> Result<TrajectoryStats> {
    schedule.check(model)?;
    let noise = if options.reward_noise > 0.0 {
        Some(Normal::new(0.0, options.reward_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let n = model.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sample_index(&mut rng, &model.initial_or_uniform());
    let mut visits = vec![0u64; n];
    let mut action_counts = vec![vec![0u64; model.num_actions()]; n];
    let mut total = 0.0;
    let marks = checkpoints(steps);
    let mut next_mark = marks.iter().peekable();
    let mut snapshots = Vec::with_capacity(marks.len());

    for t in 1..=steps {
        let action = schedule.action(state, visits[state]);
        visits[state] += 1;
        action_counts[state][action] += 1;
        let mut reward = model.reward(action, state);
        if let Some(dist) = &noise {
            reward += dist.sample(&mut rng);
        }
        total += reward;
        state = sample_index(&mut rng, model.row(action, state));
        if next_mark.peek() == Some(&&t) {
            next_mark.next();
            snapshots.push(Snapshot {
                step: t,
                running_average: total / t as f64,
                visits: visits.clone(),
            });
        }
    }
    Ok(TrajectoryStats {
        steps,
        total_reward: total,
        running_average: if steps == 0 { 0.0 } else { total / steps as f64 },
        visits,
        action_counts,
        seed,
        snapshots,
    })
}

/// Writes snapshots as comma-separated rows:
/// `step,running_average,visits_0,…,visits_{n−1}`.
pub fn write_snapshots<W: Write>(stats: &TrajectoryStats, mut out: W) -> io::Result<()> {
    let n = stats.visits.len();
    let mut header = vec!["step".to_string(), "running_average".to_string()];
    header.extend((0..n).map(|i| format!("visits_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for snap in &stats.snapshots {
        let mut row = vec![snap.step.to_string(), format!("{:?}", snap.running_average)];
        row.extend(snap.visits.iter().map(u64::to_string));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
