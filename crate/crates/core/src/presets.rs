//! Named scenario files shipped with the crate.

use crate::scenario::{Scenario, ScenarioError};

/// `(name, TOML text)` of every preset, in listing order.
pub const PRESETS: &[(&str, &str)] = &[
    ("beta-eq-delta", include_str!("../presets/beta-eq-delta.toml")),
    ("blowup-attraction", include_str!("../presets/blowup-attraction.toml")),
    ("repulsion", include_str!("../presets/repulsion.toml")),
    ("diffusion-only", include_str!("../presets/diffusion-only.toml")),
    ("family-k", include_str!("../presets/family-k.toml")),
    ("refinement", include_str!("../presets/refinement.toml")),
    ("samples", include_str!("../presets/samples.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load_preset(name: &str) -> Result<Scenario, ScenarioError> {
    let text = preset_text(name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        ScenarioError::Config(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })?;
    Scenario::from_toml_str(text)
}
