//! The example scenarios shipped in `scenarios/` parse and validate, and
//! the cadence file matches the built-in schedule experiment.

use std::path::PathBuf;

use gaitspace::experiments::schedule_scenario;
use gaitspace::sim::Scenario;
use gaitspace::RunConfig;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(dir().join(name)).unwrap();
    let s: Scenario = if name.ends_with(".json") {
        serde_json::from_str(&text).unwrap()
    } else {
        toml::from_str(&text).unwrap()
    };
    s.validate().unwrap();
    s
}

#[test]
fn every_example_scenario_loads() {
    let mut names: Vec<String> = std::fs::read_dir(dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["cadence.toml", "push.toml", "stand.json"]);
    for n in &names {
        load(n);
    }
}

#[test]
fn cadence_file_is_the_schedule_experiment() {
    assert_eq!(load("cadence.toml"), schedule_scenario(&RunConfig::desk()));
}

#[test]
fn misspelled_event_fields_are_rejected() {
    let bad = "[[events]]\nat_s = 1.0\ntype = \"set_amplitude\"\namplitud = 0.5\n";
    assert!(toml::from_str::<Scenario>(bad).is_err());
    let good = "[[events]]\nat_s = 1.0\ntype = \"set_amplitude\"\namplitude = 0.5\n";
    assert_eq!(toml::from_str::<Scenario>(good).unwrap().events.len(), 1);
}
