//! The instance file format and the small text grammars used for
//! policies, supports and mixture weights on the command line.
//!
//! An instance file is a JSON object with keys in this fixed order:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "name": "two-cycle",
//!   "num_states": 2,
//!   "num_actions": 2,
//!   "transitions": [
//!     [[0.0, 1.0], [1.0, 0.0]],
//!     [[0.0, 1.0], [1.0, 0.0]]
//!   ],
//!   "rewards": [
//!     [0.0, 0.0],
//!     [1.0, 1.0]
//!   ]
//! }
//! ```
//!
//! `name` and `initial` are optional. [`write_instance`] emits numbers in
//! shortest round-trip form, one transition matrix per line, so writing a
//! parsed canonical file reproduces it byte for byte.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{validate_mdp, MdpModel};
use crate::policy::{MixedPolicy, PurePolicy};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u32,
    #[serde(default)]
    name: Option<String>,
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
    #[serde(default)]
    initial: Option<Vec<f64>>,
}

/// Parses an instance and checks its shape, without value validation.
pub fn parse_instance_unvalidated(text: &str) -> Result<MdpModel> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Shape(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.transitions.len() != file.num_actions {
        return Err(Error::Shape(format!(
            "num_actions is {} but transitions has {} matrices",
            file.num_actions,
            file.transitions.len()
        )));
    }
    if let Some(first) = file.transitions.first() {
        if first.len() != file.num_states {
            return Err(Error::Shape(format!(
                "num_states is {} but transitions[0] has {} rows",
                file.num_states,
                first.len()
            )));
        }
    }
    let model = MdpModel::new(file.transitions, file.rewards, file.initial)?;
    Ok(match file.name {
        Some(name) => model.with_name(name),
        None => model,
    })
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<MdpModel> {
    let model = parse_instance_unvalidated(text)?;
    let violations = validate_mdp(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(Error::Invalid(violations))
    }
}

fn write_vector(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{v:?}").expect("write to string");
    }
    out.push(']');
}

fn write_matrix_block(out: &mut String, key: &str, rows: &[Vec<f64>], last: bool) {
    writeln!(out, "  \"{key}\": [").expect("write to string");
    for (i, row) in rows.iter().enumerate() {
        out.push_str("    ");
        write_vector(out, row);
        out.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
    }
    out.push_str(if last { "  ]\n" } else { "  ],\n" });
}

/// Canonical text of `model`.
pub fn write_instance(model: &MdpModel) -> String {
    let mut out = String::from("{\n");
    writeln!(out, "  \"format_version\": {FORMAT_VERSION},").expect("write to string");
    if let Some(name) = model.name() {
        let quoted = serde_json::to_string(name).expect("string serializes");
        writeln!(out, "  \"name\": {quoted},").expect("write to string");
    }
    writeln!(out, "  \"num_states\": {},", model.num_states()).expect("write to string");
    writeln!(out, "  \"num_actions\": {},", model.num_actions()).expect("write to string");

    out.push_str("  \"transitions\": [\n");
    for (a, matrix) in model.transitions().iter().enumerate() {
        out.push_str("    [");
        for (i, row) in matrix.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_vector(&mut out, row);
        }
        out.push(']');
        out.push_str(if a + 1 < model.num_actions() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n");

    let has_initial = model.initial().is_some();
    write_matrix_block(&mut out, "rewards", model.rewards(), !has_initial);
    if let Some(init) = model.initial() {
        out.push_str("  \"initial\": ");
        write_vector(&mut out, init);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn parse_action_list(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    let text = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(text);
    if text.trim().is_empty() {
        return Err(Error::InvalidArgument("empty action list".into()));
    }
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("`{}` is not an action index", tok.trim())))
        })
        .collect()
}

/// `"0,1,0"` (optionally parenthesized) to a pure policy.
pub fn parse_policy(text: &str) -> Result<PurePolicy> {
    parse_action_list(text).map(PurePolicy::new)
}

/// `"0,1;1,0"` to a list of pure policies.
pub fn parse_policy_list(text: &str) -> Result<Vec<PurePolicy>> {
    text.split(';').map(parse_policy).collect()
}

/// `"0,1;1;0,2"` to per-state action supports.
pub fn parse_supports(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|part| {
            let mut actions = parse_action_list(part)?;
            let len = actions.len();
            actions.dedup();
            if actions.len() != len {
                return Err(Error::InvalidArgument(format!("repeated action in support `{part}`")));
            }
            Ok(actions)
        })
        .collect()
}

/// `"0.5,0.5;0,1"` to a mixed policy (one `;`-separated weight vector per
/// state). Whether the weights fit a model is checked at use.
pub fn parse_weights(text: &str) -> Result<MixedPolicy> {
    let weights = text
        .split(';')
        .map(|part| {
            part.split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    tok.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::InvalidArgument(format!("`{tok}` is not a weight")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MixedPolicy::new(weights))
}
