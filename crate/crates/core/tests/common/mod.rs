#![allow(dead_code)]

use std::path::PathBuf;

use damplast_core::scenario::{parse_scenario, Scenario};
use damplast_core::Model;

pub fn canned(name: &str) -> (Scenario, Model) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let s = parse_scenario(&path).expect("canned scenario parses");
    let m = s.build_model().expect("canned scenario builds");
    (s, m)
}

pub fn from_toml(text: &str) -> (Scenario, Model) {
    let s = Scenario::from_toml_str(text).expect("scenario parses");
    let m = s.build_model().expect("scenario builds");
    (s, m)
}
