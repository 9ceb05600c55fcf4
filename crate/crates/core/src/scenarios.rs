//! Built-in scenario files reproducing the simulation study setups.

use crate::harness::{HarnessError, Scenario};

pub const FIG_RANK: &str = include_str!("../scenarios/fig_rank.json");
pub const FIG_CONVERGENCE: &str = include_str!("../scenarios/fig_convergence.json");
pub const FIG_RANK_ADAPT: &str = include_str!("../scenarios/fig_rank_adapt.json");
pub const FIG_NONSTATIONARY: &str = include_str!("../scenarios/fig_nonstationary.json");

pub const BUILTIN_NAMES: [&str; 4] = [
    "fig_rank",
    "fig_convergence",
    "fig_rank_adapt",
    "fig_nonstationary",
];

pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "fig_rank" => Some(FIG_RANK),
        "fig_convergence" => Some(FIG_CONVERGENCE),
        "fig_rank_adapt" => Some(FIG_RANK_ADAPT),
        "fig_nonstationary" => Some(FIG_NONSTATIONARY),
        _ => None,
    }
}

/// Load a scenario from a built-in name or a JSON file path.
pub fn load(name_or_path: &str) -> Result<Scenario, HarnessError> {
    if let Some(text) = builtin(name_or_path) {
        return Scenario::from_json(text);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| HarnessError::Config(format!("cannot read '{name_or_path}': {e}")))?;
    Scenario::from_json(&text)
}
