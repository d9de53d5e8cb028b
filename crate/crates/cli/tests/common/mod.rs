#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const LABELS: [&str; 3] = ["entailment", "neutral", "contradiction"];
const NOUNS: [&str; 10] = [
    "farmer", "pilot", "singer", "doctor", "baker", "sailor", "teacher", "painter", "judge",
    "driver",
];
const PLACES: [&str; 10] = [
    "market", "harbour", "library", "station", "garden", "museum", "bridge", "school", "forest",
    "square",
];

/// `n` labelled pairs with unique ids, labels cycling through the classes.
pub fn corpus(prefix: &str, n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let noun = NOUNS[i % 10];
        let place = PLACES[(i / 10) % 10];
        writeln!(
            out,
            r#"{{"id":"{prefix}-{i}","premise":"The {noun} waited near the {place} on day {i}.","hypothesis":"Someone was at the {place} number {i}.","label":"{}"}}"#,
            LABELS[i % 3]
        )
        .unwrap();
    }
    out
}

pub fn copa(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        writeln!(
            out,
            r#"{{"id":"c{i}","premise":"The glass fell off table {i}.","choice1":"It broke.","choice2":"It sang.","question":"effect","label":{}}}"#,
            1 + i % 2
        )
        .unwrap();
    }
    out
}

/// Writes data files and a config for a toy run under `dir`; `selection` is
/// the body of the `[selection]` table.
pub fn fixture(dir: &Path, selection: &str, provider_extra: &str) -> PathBuf {
    std::fs::write(dir.join("train.jsonl"), corpus("tr", 200)).unwrap();
    std::fs::write(dir.join("dev.jsonl"), corpus("dev", 45)).unwrap();
    std::fs::write(dir.join("copa.jsonl"), copa(15)).unwrap();
    let config = format!(
        r#"run_id = "toy"
seeds = [0, 1]
train = "train"

[provider]
kind = "mock"
mock_seed = 7
{provider_extra}

[budget]
m = 60

[[datasets]]
name = "train"
path = "train.jsonl"
format = "jsonl"
split = "train"

[[datasets]]
name = "dev"
path = "dev.jsonl"
format = "jsonl"
split = "eval"

[[datasets]]
name = "copa"
path = "copa.jsonl"
format = "copa-jsonl"
split = "eval"

[selection]
{selection}

[eval]
datasets = ["dev", "copa"]
resamples = 500
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_nlicurate"))
}
