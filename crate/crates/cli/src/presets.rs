//! Experiment presets bundled with the binary.

/// Name and JSON text of every preset.
pub const PRESETS: [(&str, &str); 6] = [
    ("mu-sweep-ppp", include_str!("../presets/mu-sweep-ppp.json")),
    (
        "mu-sweep-gpp-half",
        include_str!("../presets/mu-sweep-gpp-half.json"),
    ),
    (
        "mu-sweep-ginibre",
        include_str!("../presets/mu-sweep-ginibre.json"),
    ),
    ("alpha-sweep", include_str!("../presets/alpha-sweep.json")),
    (
        "voip-udp-density",
        include_str!("../presets/voip-udp-density.json"),
    ),
    (
        "game-udp-density",
        include_str!("../presets/game-udp-density.json"),
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, ExperimentConfig};

    #[test]
    fn every_preset_validates() {
        for (name, text) in PRESETS {
            let c = ExperimentConfig::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            validate_config(&c).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        }
        assert!(preset("alpha-sweep").is_some());
        assert!(preset("nope").is_none());
    }
}
