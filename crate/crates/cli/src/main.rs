//! `unichain`: evaluate, solve and stress-test unichain MDPs from the shell.
//!
//! Every command takes an instance as a file path, `fixture:NAME` or
//! `random:STATES,ACTIONS,MIN_PROB,SEED`. Exit codes: 0 pass, 1
//! verification failure, 2 input error, 3 numerical non-convergence.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use unichain::chain::{evaluate_policy, gain_with_fallback, DEFAULT_SOLVE_TOL};
use unichain::fixtures::builtin_fixture;
use unichain::format::{
    parse_instance, parse_instance_unvalidated, parse_policy, parse_policy_list, parse_weights, write_instance,
};
use unichain::generate::{plant_optimal_ties, random_structured_instance, random_unichain_instance};
use unichain::sim::{simulate_with, write_snapshots, Schedule, SimOptions};
use unichain::solver::{default_max_iters, DEFAULT_MAX_POLICIES, DEFAULT_OPT_TOL};
use unichain::theorem::{
    interpolation_chain, verify_combination_closure, verify_mixture_optimality, ClosureReport,
    DEFAULT_MAX_COMBINATIONS,
};
use unichain::{
    brute_force_optimal_set, check_unichain_exhaustive, mixed_average_reward, policy_iteration, validate_mdp,
    Error, GainMethod, MdpModel, OptimalSet, PurePolicy, TieBreak,
};

/// Largest policy space `validate` checks for the unichain property.
const VALIDATE_MAX_POLICIES: u64 = 1 << 16;

#[derive(Debug, Parser)]
#[command(name = "unichain", version, about = "Average-reward tools for unichain MDPs")]
struct Cli {
    /// Also write a machine-readable JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance against every model invariant and for the unichain property.
    Validate { input: String },
    /// Average reward of pure policies (Cesàro averaging on reducible chains).
    Eval {
        input: String,
        /// Comma-separated actions, one per state; repeatable.
        #[arg(long, required_unless_present = "all")]
        policy: Vec<String>,
        /// Evaluate every pure policy.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = DEFAULT_SOLVE_TOL)]
        tol: f64,
    },
    /// Average reward of a mixed policy.
    EvalMixed {
        input: String,
        /// Per-state weight vectors, e.g. `0.5,0.5;0,1`.
        #[arg(long)]
        weights: String,
        #[arg(long, default_value_t = DEFAULT_SOLVE_TOL)]
        tol: f64,
    },
    /// Optimal gain and optimal policies.
    Solve {
        input: String,
        #[arg(long, value_enum, default_value_t = Method::Brute)]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_OPT_TOL)]
        tol: f64,
    },
    /// Check that all combinations of pairs of optimal policies are optimal.
    Closure {
        input: String,
        #[arg(long, default_value_t = DEFAULT_OPT_TOL)]
        tol: f64,
        /// Treat these `;`-separated policies as the optimal set instead of solving.
        #[arg(long)]
        policies: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_COMBINATIONS)]
        max_combinations: u64,
    },
    /// Greedy single-switch path between two policies.
    Chain {
        input: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = DEFAULT_OPT_TOL)]
        tol: f64,
    },
    /// Sample mixtures over optimal supports and check they stay optimal.
    MixCheck {
        input: String,
        #[arg(long, default_value_t = 100)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_OPT_TOL)]
        tol: f64,
        /// Treat these `;`-separated policies as the optimal set instead of solving.
        #[arg(long)]
        policies: Option<String>,
    },
    /// Simulate a trajectory under a schedule.
    Simulate {
        input: String,
        /// `optimal`, `optimal-blocks`, `pure:<policy>`, `round-robin:<supports>`,
        /// `blocks:<supports>` or `between:<policy>|<policy>`.
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write checkpoint snapshots as CSV.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Standard deviation of Gaussian reward noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Generate a random unichain instance.
    Gen {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 0.05)]
        min_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `dense` (every entry ≥ min-prob) or `structured` (random zeros, verified).
        #[arg(long, value_enum, default_value_t = Mode::Dense)]
        mode: Mode,
        /// Entry density for `structured` mode.
        #[arg(long, default_value_t = 0.5)]
        keep_prob: f64,
        /// Rewrite rewards so this many states get a second optimal action.
        #[arg(long, default_value_t = 0)]
        ties: usize,
        #[arg(long, default_value_t = 0.0)]
        reward_min: f64,
        #[arg(long, default_value_t = 1.0)]
        reward_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in fixture.
    Fixture {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Brute,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Dense,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    NoConvergence,
}

impl Verdict {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    fn code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::NoConvergence => 3,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularSystem { .. }
            | Error::NonPositiveEntry { .. }
            | Error::ResidualTooLarge { .. }
            | Error::SingularEvaluation { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<(Verdict, Value), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((verdict, report)) => {
            if let Some(path) = cli.report {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                if let Err(e) = fs::write(&path, text + "\n") {
                    eprintln!("error: cannot write report {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(verdict.code())
        }
        Err(e) => {
            let (CliError::Input(msg) | CliError::Numeric(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Validate { input } => validate(&input),
        Command::Eval { input, policy, all, tol } => eval(&load(&input)?, &policy, all, tol),
        Command::EvalMixed { input, weights, tol } => eval_mixed(&load(&input)?, &weights, tol),
        Command::Solve { input, method, tol } => solve(&load(&input)?, method, tol),
        Command::Closure {
            input,
            tol,
            policies,
            max_combinations,
        } => closure(&load(&input)?, tol, policies.as_deref(), max_combinations),
        Command::Chain { input, from, to, tol } => chain(&load(&input)?, &from, &to, tol),
        Command::MixCheck {
            input,
            samples,
            seed,
            tol,
            policies,
        } => mix_check(&load(&input)?, samples, seed, tol, policies.as_deref()),
        Command::Simulate {
            input,
            schedule,
            steps,
            seed,
            snapshots,
            noise,
        } => simulate(&load(&input)?, &schedule, steps, seed, snapshots, noise),
        Command::Gen {
            states,
            actions,
            min_prob,
            seed,
            mode,
            keep_prob,
            ties,
            reward_min,
            reward_max,
            out,
        } => {
            let range = (reward_min, reward_max);
            let mut model = match mode {
                Mode::Dense => random_unichain_instance(states, actions, min_prob, range, seed)?,
                Mode::Structured => random_structured_instance(states, actions, keep_prob, range, seed, 10_000)?,
            };
            if ties > 0 {
                model = plant_optimal_ties(&model, ties, seed)?;
            }
            emit_instance(&model, out)
        }
        Command::Fixture { name, out } => emit_instance(&builtin_fixture(&name)?, out),
    }
}

/// Resolves an instance argument.
fn load(input: &str) -> Result<MdpModel, CliError> {
    read_model(input, true)
}

fn read_model(input: &str, validated: bool) -> Result<MdpModel, CliError> {
    if let Some(name) = input.strip_prefix("fixture:") {
        return Ok(builtin_fixture(name)?);
    }
    if let Some(spec) = input.strip_prefix("random:") {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let bad = || CliError::Input(format!("`{input}` is not random:STATES,ACTIONS,MIN_PROB,SEED"));
        let [n, m, p, s] = parts[..] else { return Err(bad()) };
        let n = n.parse().map_err(|_| bad())?;
        let m = m.parse().map_err(|_| bad())?;
        let p = p.parse().map_err(|_| bad())?;
        let s = s.parse().map_err(|_| bad())?;
        return Ok(random_unichain_instance(n, m, p, (0.0, 1.0), s)?);
    }
    let text = fs::read_to_string(input).map_err(|e| CliError::Input(format!("cannot read {input}: {e}")))?;
    let model = if validated {
        parse_instance(&text)?
    } else {
        parse_instance_unvalidated(&text)?
    };
    Ok(model)
}

fn policy_value(p: &PurePolicy) -> Value {
    json!(p.actions())
}

fn method_name(m: GainMethod) -> Value {
    serde_json::to_value(m).expect("method serializes")
}

fn describe_optimal(set: &OptimalSet) -> Value {
    json!({
        "gain": set.gain,
        "tolerance": set.tolerance,
        "margin": set.margin,
        "policies": set.policies.iter().map(policy_value).collect::<Vec<_>>(),
    })
}

fn validate(input: &str) -> CmdResult {
    let model = read_model(input, false)?;
    let violations = validate_mdp(&model);
    println!(
        "{}: {} states, {} actions",
        model.name().unwrap_or(input),
        model.num_states(),
        model.num_actions()
    );
    for v in &violations {
        println!("  violation at {}: {v}", v.path());
    }
    if !violations.is_empty() {
        println!("invalid ({} violations)", violations.len());
        let report = json!({ "valid": false, "violations": violations });
        return Ok((Verdict::Fail, report));
    }
    println!("valid");
    let unichain = match check_unichain_exhaustive(&model, VALIDATE_MAX_POLICIES) {
        Ok(verdict) => {
            match &verdict.witness {
                None => println!("unichain: yes ({} policies checked)", verdict.policies_checked),
                Some(w) => println!("unichain: no, policy {w} induces a reducible chain"),
            }
            json!(verdict)
        }
        Err(Error::PolicySpaceTooLarge { .. }) => {
            println!("unichain: not checked (policy space exceeds {VALIDATE_MAX_POLICIES})");
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    Ok((Verdict::Pass, json!({ "valid": true, "violations": [], "unichain": unichain })))
}

fn eval(model: &MdpModel, policies: &[String], all: bool, tol: f64) -> CmdResult {
    let policies: Vec<PurePolicy> = if all {
        unichain::enumerate_policies(model).collect()
    } else {
        policies.iter().map(|p| parse_policy(p)).collect::<Result<_, _>>()?
    };
    let mut verdict = Verdict::Pass;
    let mut rows = Vec::new();
    for policy in &policies {
        policy.check(model)?;
        let gain = gain_with_fallback(model, policy, tol)?;
        let distribution = match gain.method {
            GainMethod::DirectSolve => Some(evaluate_policy(model, policy, tol)?.distribution.into_inner()),
            _ => None,
        };
        let note = if gain.converged { "" } else { " NOT CONVERGED" };
        println!(
            "{policy}  gain {}  [{}, residual {:e}]{note}",
            gain.value,
            method_name(gain.method).as_str().unwrap_or("?"),
            gain.residual
        );
        if let Some(mu) = &distribution {
            println!("  stationary {mu:?}");
        }
        if !gain.converged {
            verdict = Verdict::NoConvergence;
        }
        rows.push(json!({
            "policy": policy_value(policy),
            "gain": gain,
            "stationary": distribution,
        }));
    }
    Ok((verdict, json!({ "instance": model.name(), "evaluations": rows })))
}

fn eval_mixed(model: &MdpModel, weights: &str, tol: f64) -> CmdResult {
    let policy = parse_weights(weights)?;
    let gain = mixed_average_reward(model, &policy, tol)?;
    println!("gain {}  [residual {:e}]", gain.value, gain.residual);
    Ok((Verdict::Pass, json!({ "weights": policy.weights(), "gain": gain })))
}

fn solve(model: &MdpModel, method: Method, tol: f64) -> CmdResult {
    match method {
        Method::Brute => {
            let set = brute_force_optimal_set(model, tol, DEFAULT_MAX_POLICIES)?;
            println!("optimal gain {}  ({} optimal policies, tol {:e})", set.gain, set.len(), tol);
            for p in &set.policies {
                println!("  {p}");
            }
            if let Some(margin) = set.margin {
                println!("margin to best non-optimal policy {margin:e}");
            }
            Ok((Verdict::Pass, json!({ "method": "brute", "optimal": describe_optimal(&set) })))
        }
        Method::Pi => {
            let result = policy_iteration(model, TieBreak::KeepIncumbent, default_max_iters(model))?;
            println!(
                "policy {}  gain {}  after {} iterations",
                result.policy, result.gain.value, result.iterations
            );
            println!("  bias {:?}", result.bias);
            let verdict = if result.converged {
                Verdict::Pass
            } else {
                println!("NOT CONVERGED");
                Verdict::NoConvergence
            };
            Ok((verdict, json!({ "method": "pi", "result": result })))
        }
    }
}

/// The optimal set to test: either solved, or a claimed list whose
/// members must share a common value.
fn optimal_set(model: &MdpModel, tol: f64, policies: Option<&str>) -> Result<OptimalSet, CliError> {
    let Some(text) = policies else {
        return Ok(brute_force_optimal_set(model, tol, DEFAULT_MAX_POLICIES)?);
    };
    let policies = parse_policy_list(text)?;
    let mut values = Vec::with_capacity(policies.len());
    for p in &policies {
        p.check(model)?;
        let g = gain_with_fallback(model, p, DEFAULT_SOLVE_TOL)?;
        if !g.converged {
            return Err(CliError::Numeric(format!("gain of {p} did not converge")));
        }
        values.push(g.value);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo > tol {
        return Err(CliError::Input(format!(
            "claimed policies do not share a common value (range [{lo}, {hi}])"
        )));
    }
    println!("claimed set of {} policies with common value {}", policies.len(), values[0]);
    Ok(OptimalSet::claimed(values[0], policies, tol))
}

fn print_closure(report: &ClosureReport) {
    println!(
        "{}: {} policies at gain {}, {} tested, max deviation {:e} (tol {:e})",
        report.instance, report.num_optimal, report.gain, report.tested, report.max_deviation, report.tolerance
    );
    for p in &report.reducible {
        println!("  {p} induces a reducible chain, evaluated by Cesàro averaging");
    }
    if let Some(err) = report.closed_form_max_error {
        println!("  closed-form mixture error {err:e}, sandwich violations {}", report.sandwich_violations);
    }
    for w in &report.witnesses {
        println!("  witness {}  value {}  deviation {:e}", w.candidate, w.value, w.deviation);
    }
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
}

fn closure(model: &MdpModel, tol: f64, policies: Option<&str>, max_combinations: u64) -> CmdResult {
    let set = optimal_set(model, tol, policies)?;
    let report = verify_combination_closure(model, &set, tol, max_combinations)?;
    print_closure(&report);
    Ok((Verdict::from_pass(report.pass), json!(report)))
}

fn chain(model: &MdpModel, from: &str, to: &str, tol: f64) -> CmdResult {
    let (p1, p2) = (parse_policy(from)?, parse_policy(to)?);
    p1.check(model)?;
    p2.check(model)?;
    let chain = interpolation_chain(model, &p1, &p2, tol)?;
    for (i, link) in chain.links.iter().enumerate() {
        println!("  {i}: {}  gain {}", link.policy, link.gain);
    }
    println!("premise V0 >= V1: {}", chain.premise_holds);
    match chain.first_increase {
        Some(i) => println!("gain increases at step {i}"),
        None => println!("gains never increase"),
    }
    let pass = chain.is_consistent();
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok((Verdict::from_pass(pass), json!(chain)))
}

fn mix_check(model: &MdpModel, samples: u64, seed: u64, tol: f64, policies: Option<&str>) -> CmdResult {
    let set = optimal_set(model, tol, policies)?;
    let report = verify_mixture_optimality(model, &set, samples, seed, tol)?;
    print_closure(&report);
    let pass = report.pass && report.sandwich_violations == 0;
    Ok((Verdict::from_pass(pass), json!({ "seed": seed, "report": report })))
}

fn simulate(
    model: &MdpModel,
    spec: &str,
    steps: u64,
    seed: u64,
    snapshots: Option<PathBuf>,
    noise: f64,
) -> CmdResult {
    let (schedule, reference) = match spec {
        "optimal" => {
            let solved = policy_iteration(model, TieBreak::KeepIncumbent, default_max_iters(model))?;
            (Schedule::stationary(&solved.policy), Some(solved.gain.value))
        }
        "optimal-blocks" => {
            let set = brute_force_optimal_set(model, DEFAULT_OPT_TOL, DEFAULT_MAX_POLICIES)?;
            if set.len() < 2 {
                return Err(CliError::Input(
                    "optimal-blocks needs at least two optimal policies".into(),
                ));
            }
            let schedule = Schedule::alternating_blocks(&set.policies[0], &set.policies[set.len() - 1]);
            (schedule, Some(set.gain))
        }
        other => (Schedule::parse(other)?, None),
    };
    let stats = simulate_with(model, &schedule, steps, seed, SimOptions { reward_noise: noise })?;
    println!("schedule {}  steps {}  seed {}", schedule.name, steps, seed);
    println!("running average {}", stats.running_average);
    let gap = reference.map(|v| (stats.running_average - v).abs());
    if let (Some(v), Some(gap)) = (reference, gap) {
        println!("optimal gain {v}  |V_t - V*| {gap:e}");
    }
    for i in 0..model.num_states() {
        println!("  state {i}: visits {}  frequencies {:?}", stats.visits[i], stats.frequencies(i));
    }
    if let Some(path) = snapshots {
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
        write_snapshots(&stats, std::io::BufWriter::new(file))
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    let frequencies: Vec<Vec<f64>> = (0..model.num_states()).map(|i| stats.frequencies(i)).collect();
    Ok((
        Verdict::Pass,
        json!({
            "schedule": schedule,
            "optimal_gain": reference,
            "gap": gap,
            "frequencies": frequencies,
            "stats": stats,
        }),
    ))
}

fn emit_instance(model: &MdpModel, out: Option<PathBuf>) -> CmdResult {
    let text = write_instance(model);
    match &out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {} to {}", model.name().unwrap_or("instance"), path.display());
        }
        None => print!("{text}"),
    }
    Ok((
        Verdict::Pass,
        json!({ "name": model.name(), "path": out }),
    ))
}
