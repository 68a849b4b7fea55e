//! Built-in two-state, two-action example MDPs. States s1, s2 and
//! actions a1, a2 map to indices 0 and 1.

use crate::error::{Error, Result};
use crate::model::MdpModel;

pub const FIXTURE_NAMES: [&str; 2] = ["two-cycle", "stay-or-jump"];

/// Both actions follow the deterministic 2-cycle; a1 pays 0 and a2 pays 1
/// in every state. Policies (a1,a2) and (a2,a1) have equal value 1/2 yet
/// their combination (a2,a2) earns 1.
pub fn two_cycle() -> MdpModel {
    let cycle = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    MdpModel::new(
        vec![cycle.clone(), cycle],
        vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        None,
    )
    .expect("fixture shape")
    .with_name("two-cycle")
}

/// Multichain: a1 is the identity (pays 1), a2 jumps uniformly (pays 0).
/// Three policies earn 1, but their combination (a2,a2) earns 0.
pub fn stay_or_jump() -> MdpModel {
    MdpModel::new(
        vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ],
        vec![vec![1.0, 1.0], vec![0.0, 0.0]],
        None,
    )
    .expect("fixture shape")
    .with_name("stay-or-jump")
}

pub fn builtin_fixture(name: &str) -> Result<MdpModel> {
    match name {
        "two-cycle" => Ok(two_cycle()),
        "stay-or-jump" => Ok(stay_or_jump()),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}
