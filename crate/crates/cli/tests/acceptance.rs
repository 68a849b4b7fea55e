//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any fails.

use std::process::Command;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use unichain::chain::{cesaro_gain, evaluate_policy, DEFAULT_SOLVE_TOL};
use unichain::closed_form::{four_policy_distribution, mixture_distribution, mixture_reward, DEFAULT_DENOM_TOL};
use unichain::fixtures::stay_or_jump;
use unichain::generate::{plant_optimal_ties, random_unichain_instance};
use unichain::sim::{simulate, Schedule};
use unichain::theorem::{
    check_four_reward_relations, four_policy_family, verify_combination_closure, verify_mixture_optimality, Clause,
    Rule, DEFAULT_MAX_COMBINATIONS,
};
use unichain::{
    brute_force_optimal_set, check_unichain_exhaustive, induced_mixed_chain, mixed_average_reward,
    policy_iteration, stationary_distribution, Error, MdpModel, MixedPolicy, PurePolicy, TieBreak,
};

const OPT_TOL: f64 = 1e-8;
const CLOSED_FORM_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_unichain")
}

/// Runs the CLI with a JSON report and returns (exit code, report).
fn run_cli(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().expect("temp dir");
    let report = dir.path().join("report.json");
    let output = Command::new(bin())
        .args(args)
        .arg("--report")
        .arg(&report)
        .output()
        .expect("run cli");
    let code = output.status.code().unwrap_or(-1);
    let value = std::fs::read_to_string(&report)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(Value::Null);
    (code, value)
}

fn dims(seed: u64) -> (usize, usize) {
    (3 + (seed % 3) as usize, 2 + ((seed / 3) % 2) as usize)
}

/// Random instance from the closure suite: a dense unichain model with
/// between one and `n − 1` states given a second optimal action.
fn closure_instance(seed: u64) -> MdpModel {
    let (n, m) = dims(seed);
    let base = random_unichain_instance(n, m, 0.05, (0.0, 1.0), seed).expect("instance");
    let ties = 1 + (seed as usize / 6) % (n - 1);
    plant_optimal_ties(&base, ties, seed).expect("ties")
}

fn random_policy(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PurePolicy {
    PurePolicy::new((0..n).map(|_| rng.random_range(0..m)).collect())
}

/// A base policy, two distinct states and an alternative action at each.
fn random_configuration(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (PurePolicy, usize, usize, usize, usize) {
    let base = random_policy(rng, n, m);
    let s1 = rng.random_range(0..n);
    let s2 = (s1 + rng.random_range(1..n)) % n;
    let alt1 = (base.action(s1) + rng.random_range(1..m)) % m;
    let alt2 = (base.action(s2) + rng.random_range(1..m)) % m;
    (base, s1, alt1, s2, alt2)
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn two_cycle_values() -> Outcome {
    let (code, report) = run_cli(&["eval", "fixture:two-cycle", "--all"]);
    let expected = [(vec![0, 0], 0.0), (vec![0, 1], 0.5), (vec![1, 0], 0.5), (vec![1, 1], 1.0)];
    let rows = report["evaluations"].as_array().cloned().unwrap_or_default();
    let mut worst = 0.0f64;
    let mut found = 0;
    for (policy, want) in &expected {
        let row = rows.iter().find(|r| {
            r["policy"].as_array().map(|a| a.iter().map(|x| x.as_u64().unwrap_or(9) as usize).collect::<Vec<_>>())
                == Some(policy.clone())
        });
        if let Some(v) = row.and_then(|r| r["gain"]["value"].as_f64()) {
            found += 1;
            worst = worst.max((v - want).abs());
        }
    }
    Outcome::new(
        code == 0 && found == 4 && worst <= 1e-9,
        format!("eval exit {code}, {found}/4 policies reported, max error {worst:e} <= 1e-9"),
    )
}

fn multichain_fixture() -> Outcome {
    let model = stay_or_jump();
    let verdict = check_unichain_exhaustive(&model, 16).expect("small");
    let witness_ok = !verdict.unichain && verdict.witness == Some(PurePolicy::new(vec![0, 0]));
    let expected = [(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0), (vec![1, 1], 0.0)];
    let starts = [vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.7]];
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for (policy, want) in &expected {
        for start in &starts {
            let g = cesaro_gain(&model, &PurePolicy::new(policy.clone()), start, 10_000_000, 1e-9).expect("cesaro");
            all_converged &= g.converged;
            worst = worst.max((g.value - want).abs());
        }
    }
    Outcome::new(
        witness_ok && all_converged && worst <= 1e-6,
        format!(
            "unichain={} witness={:?}, Cesàro max error {worst:e} <= 1e-6 over {} starts",
            verdict.unichain,
            verdict.witness.map(|w| w.to_string()),
            starts.len()
        ),
    )
}

fn combination_closure_and_solver() -> (Outcome, Outcome) {
    let mut closure_worst = 0.0f64;
    let mut closure_failures = 0;
    let mut tested = 0u64;
    let mut with_ties = 0;
    let mut solver_worst = 0.0f64;
    let mut solver_failures = 0;
    for seed in 0..200 {
        let model = closure_instance(seed);
        let optimal = brute_force_optimal_set(&model, OPT_TOL, 1 << 12).expect("brute force");
        if optimal.len() >= 2 {
            with_ties += 1;
        }
        let report = verify_combination_closure(&model, &optimal, OPT_TOL, DEFAULT_MAX_COMBINATIONS).expect("closure");
        closure_worst = closure_worst.max(report.max_deviation);
        tested += report.tested;
        if !report.pass || !report.reducible.is_empty() {
            closure_failures += 1;
        }
        for tie_break in [TieBreak::KeepIncumbent, TieBreak::LowestIndex] {
            let pi = policy_iteration(&model, tie_break, 10_000).expect("policy iteration");
            let gap = (pi.gain.value - optimal.gain).abs();
            solver_worst = solver_worst.max(gap);
            if !pi.converged || gap > OPT_TOL || !optimal.contains(&pi.policy) {
                solver_failures += 1;
            }
        }
    }
    let closure = Outcome::new(
        closure_failures == 0 && closure_worst <= OPT_TOL,
        format!(
            "200 instances ({with_ties} with several optimal policies), {tested} combinations, \
             {closure_failures} failures, max |V - V*| {closure_worst:e} <= 1e-8"
        ),
    );
    let solver = Outcome::new(
        solver_failures == 0,
        format!("400 runs (both tie-breaks), {solver_failures} failures, max gain gap {solver_worst:e} <= 1e-8"),
    );
    (closure, solver)
}

fn four_policy_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut degenerate = 0;
    for k in 0..1000u64 {
        let (n, m) = dims(k);
        let model = random_unichain_instance(n, m, 0.05, (0.0, 1.0), 10_000 + k).expect("instance");
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let (base, s1, alt1, s2, alt2) = random_configuration(&mut rng, n, m);
        let family = four_policy_family(&base, s1, alt1, s2, alt2);
        let mu: Vec<_> = family
            .iter()
            .map(|p| evaluate_policy(&model, p, DEFAULT_SOLVE_TOL).expect("solve").distribution)
            .collect();
        match four_policy_distribution(&mu[0], &mu[1], &mu[2], s1, s2, DEFAULT_DENOM_TOL) {
            Ok(d) => worst = worst.max(max_abs_diff(d.probs(), mu[3].probs())),
            Err(Error::DegenerateDenominator { .. } | Error::NonPositiveResult { .. }) => degenerate += 1,
            Err(e) => return Outcome::new(false, format!("sample {k}: {e}")),
        }
    }
    Outcome::new(
        worst <= CLOSED_FORM_TOL,
        format!("1000 quadruples, {degenerate} degenerate fallbacks, max error {worst:e} <= 1e-10"),
    )
}

fn mixture_closed_form() -> Outcome {
    let mut dist_worst = 0.0f64;
    let mut reward_worst = 0.0f64;
    for k in 0..1000u64 {
        let (n, m) = dims(k);
        let model = random_unichain_instance(n, m, 0.05, (0.0, 1.0), 20_000 + k).expect("instance");
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let p1 = random_policy(&mut rng, n, m);
        let s = rng.random_range(0..n);
        let p2 = p1.with_action(s, (p1.action(s) + rng.random_range(1..m)) % m);
        let lambda: f64 = rng.random();
        let e1 = evaluate_policy(&model, &p1, DEFAULT_SOLVE_TOL).expect("solve");
        let e2 = evaluate_policy(&model, &p2, DEFAULT_SOLVE_TOL).expect("solve");

        let mut weights: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..m).map(|a| if a == p1.action(i) { 1.0 } else { 0.0 }).collect())
            .collect();
        weights[s][p1.action(s)] = lambda;
        weights[s][p2.action(s)] = 1.0 - lambda;
        let mixed = MixedPolicy::new(weights);
        let (chain, _) = induced_mixed_chain(&model, &mixed).expect("chain");
        let direct_mu = stationary_distribution(&chain, DEFAULT_SOLVE_TOL).expect("solve");
        let direct_v = mixed_average_reward(&model, &mixed, DEFAULT_SOLVE_TOL).expect("solve").value;

        let c = mixture_distribution(&e1.distribution, &e2.distribution, s, lambda).expect("closed form");
        dist_worst = dist_worst.max(max_abs_diff(c.probs(), direct_mu.probs()));
        let v = mixture_reward(e1.gain.value, e2.gain.value, e1.distribution[s], e2.distribution[s], lambda);
        reward_worst = reward_worst.max((v - direct_v).abs());
    }
    Outcome::new(
        dist_worst <= CLOSED_FORM_TOL && reward_worst <= CLOSED_FORM_TOL,
        format!(
            "1000 samples, max distribution error {dist_worst:e}, max reward error {reward_worst:e} <= 1e-10"
        ),
    )
}

fn reward_relations() -> Outcome {
    let mut violated = 0;
    let mut first = None;
    for k in 0..1000u64 {
        let (n, m) = dims(k);
        let model = random_unichain_instance(n, m, 0.05, (0.0, 1.0), 30_000 + k).expect("instance");
        // every fourth instance has planted ties so equalities get exercised
        let model = if k % 4 == 0 { plant_optimal_ties(&model, n - 1, k).expect("ties") } else { model };
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let family = if k % 4 == 0 {
            let optimal = brute_force_optimal_set(&model, OPT_TOL, 1 << 12).expect("brute force");
            let base = optimal.policies[0].clone();
            let tied: Vec<usize> = (0..n).filter(|&i| optimal.support(i).len() >= 2).collect();
            if tied.len() >= 2 {
                let (s1, s2) = (tied[0], tied[1]);
                let other = |i: usize| *optimal.support(i).iter().find(|&&a| a != base.action(i)).expect("tie");
                four_policy_family(&base, s1, other(s1), s2, other(s2))
            } else {
                let (b, s1, a1, s2, a2) = random_configuration(&mut rng, n, m);
                four_policy_family(&b, s1, a1, s2, a2)
            }
        } else {
            let (b, s1, a1, s2, a2) = random_configuration(&mut rng, n, m);
            four_policy_family(&b, s1, a1, s2, a2)
        };
        let v: Vec<f64> = family
            .iter()
            .map(|p| evaluate_policy(&model, p, DEFAULT_SOLVE_TOL).expect("solve").gain.value)
            .collect();
        let clauses = check_four_reward_relations(v[0], v[1], v[2], v[3], OPT_TOL);
        if !clauses.is_empty() {
            violated += clauses.len();
            first.get_or_insert((k, v, clauses));
        }
    }
    let pattern = check_four_reward_relations(1.0, 0.0, 0.0, 1.0, OPT_TOL);
    let flagged = pattern.contains(&Clause {
        rule: Rule::ForbiddenAbove,
        a: 0,
        b: 0,
    });
    let mut detail = format!(
        "1000 quadruples, {violated} violated clauses; pattern (1,0,0,1) flagged: {flagged} ({} clauses)",
        pattern.len()
    );
    if let Some((k, v, c)) = first {
        detail.push_str(&format!("; first violation at sample {k}: {v:?} {c:?}"));
    }
    Outcome::new(violated == 0 && flagged, detail)
}

fn mixtures_of_optimal_policies() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut sandwich = 0;
    let mut tested = 0;
    let mut reseeds = 0;
    for k in 0..50u64 {
        let (n, m) = dims(k);
        let mut attempt = 0;
        let (model, optimal) = loop {
            let seed = 40_000 + 1000 * k + attempt;
            let base = random_unichain_instance(n, m, 0.05, (0.0, 1.0), seed).expect("instance");
            let model = plant_optimal_ties(&base, 1 + (k as usize % (n - 1)), seed).expect("ties");
            let optimal = brute_force_optimal_set(&model, OPT_TOL, 1 << 12).expect("brute force");
            if optimal.len() >= 2 {
                break (model, optimal);
            }
            attempt += 1;
            reseeds += 1;
        };
        let report = verify_mixture_optimality(&model, &optimal, 100, k, OPT_TOL).expect("mixtures");
        worst = worst.max(report.max_deviation);
        tested += report.tested;
        sandwich += report.sandwich_violations;
        if !report.pass {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0 && sandwich == 0 && worst <= OPT_TOL,
        format!(
            "50 instances ({reseeds} re-seeds), {tested} mixtures, {failures} failures, \
             {sandwich} sandwich violations, max |V - V*| {worst:e} <= 1e-8"
        ),
    )
}

fn non_stationary_convergence() -> Outcome {
    const STEPS: u64 = 1_000_000;
    let mut worst = 0.0f64;
    let mut failures = 0;
    for k in 0..10u64 {
        let (n, m) = dims(k);
        let seed = 50_000 + k;
        let base = random_unichain_instance(n, m, 0.05, (0.0, 1.0), seed).expect("instance");
        let model = plant_optimal_ties(&base, n - 1, seed).expect("ties");
        let optimal = brute_force_optimal_set(&model, OPT_TOL, 1 << 12).expect("brute force");
        let (p1, p2) = (&optimal.policies[0], &optimal.policies[optimal.len() - 1]);
        let schedule = Schedule::alternating_blocks(p1, p2);
        let stats = simulate(&model, &schedule, STEPS, k).expect("simulate");
        let gap = (stats.running_average - optimal.gain).abs();
        worst = worst.max(gap);
        if p1 == p2 || gap > 5e-3 {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("10 instances, 1e6 steps each, {failures} failures, max |V_t - V*| {worst:e} <= 5e-3"),
    )
}

fn witness_value(report: &Value, policy: &[u64]) -> Option<f64> {
    report["witnesses"].as_array()?.iter().find_map(|w| {
        let actions: Vec<u64> = w["candidate"]["policy"].as_array()?.iter().filter_map(Value::as_u64).collect();
        (actions == policy).then(|| w["value"].as_f64()).flatten()
    })
}

fn necessity_counterexamples() -> Outcome {
    let (code1, r1) = run_cli(&["closure", "fixture:two-cycle", "--policies", "0,1;1,0"]);
    let (code2, r2) = run_cli(&["closure", "fixture:stay-or-jump", "--policies", "0,0;0,1;1,0"]);
    let w1 = witness_value(&r1, &[1, 1]);
    let w2 = witness_value(&r2, &[1, 1]);
    let g1 = r1["gain"].as_f64();
    let ok1 = code1 == 1 && w1.is_some_and(|v| (v - 1.0).abs() <= 1e-9) && g1.is_some_and(|g| (g - 0.5).abs() <= 1e-9);
    let ok2 = code2 == 1 && w2.is_some_and(|v| v.abs() <= 1e-6);
    Outcome::new(
        ok1 && ok2,
        format!(
            "two-cycle: exit {code1}, witness (1,1) value {w1:?} vs claimed {g1:?}; \
             multichain: exit {code2}, witness (1,1) value {w2:?}"
        ),
    )
}

fn main() {
    let started = Instant::now();
    type Check = (u32, &'static str, fn() -> Outcome);
    let checks: [Check; 8] = [
        (1, "two-cycle fixture values", two_cycle_values),
        (2, "multichain fixture and Cesàro gains", multichain_fixture),
        (4, "two-state closed form", four_policy_closed_form),
        (5, "single-state mixture closed form", mixture_closed_form),
        (6, "four-reward relations", reward_relations),
        (7, "mixtures of optimal policies", mixtures_of_optimal_policies),
        (8, "non-stationary schedule convergence", non_stationary_convergence),
        (10, "necessity counterexamples", necessity_counterexamples),
    ];
    let mut results: Vec<(u32, &str, Outcome, f64)> = thread::scope(|scope| {
        let closure = scope.spawn(|| {
            let t = Instant::now();
            let (c, s) = combination_closure_and_solver();
            let secs = t.elapsed().as_secs_f64();
            vec![(3, "combination closure", c, secs), (9, "solver cross-validation", s, secs)]
        });
        let handles: Vec<_> = checks
            .iter()
            .map(|&(id, name, f)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let outcome = f();
                    (id, name, outcome, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        let mut out: Vec<_> = handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect();
        out.extend(closure.join().expect("criterion panicked"));
        out
    });
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, outcome, secs) in &results {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {} ({secs:.2} s)", outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
