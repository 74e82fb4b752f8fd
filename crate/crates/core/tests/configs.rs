//! The config files in `configs/` spell out every key of each preset.
//!
//! Regenerate with `cargo test --test configs -- --ignored` after changing a
//! preset.

use std::path::PathBuf;

use gaitspace::config::Preset;
use gaitspace::RunConfig;

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

const FILES: [(&str, Preset); 2] = [("desk.toml", Preset::Desk), ("full.toml", Preset::Full)];

#[test]
fn shipped_configs_match_their_presets() {
    for (name, preset) in FILES {
        let loaded = RunConfig::load(path(name)).unwrap();
        assert_eq!(loaded, RunConfig::preset(preset), "{name}");
    }
}

#[test]
#[ignore = "rewrites configs/*.toml"]
fn regenerate_configs() {
    for (name, preset) in FILES {
        std::fs::write(path(name), RunConfig::preset(preset).to_toml_string().unwrap()).unwrap();
    }
}
