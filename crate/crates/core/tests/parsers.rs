//! Stable-toolchain stand-in for the fuzz targets: replays the checked-in
//! corpus and random inputs through the same entry points and round trips.

use std::fs;
use std::path::PathBuf;

use kernel_greedy::io::{read_candidates, read_gram, write_candidates, write_gram};
use kernel_greedy::{ExperimentConfig, MethodSummary, ModelSnapshot, NewtonModel, Point};
use proptest::prelude::*;

fn candidates(data: &[u8]) {
    let Ok(file) = read_candidates(data) else { return };
    let mut out = Vec::new();
    write_candidates(&mut out, &file.functionals, file.samples.as_deref()).unwrap();
    assert_eq!(read_candidates(out.as_slice()).unwrap(), file);
}

fn gram(data: &[u8]) {
    if let Ok(m) = read_gram(data) {
        let mut out = Vec::new();
        write_gram(&mut out, &m).unwrap();
        assert_eq!(read_gram(out.as_slice()).unwrap(), m);
    }
}

fn config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::from_toml(text) else { return };
    if config.validate().is_ok() {
        let _ = config.kernel();
        let _ = config.phantom();
        let _ = config.methods();
    }
    if let Ok(again) = config.to_toml() {
        assert_eq!(ExperimentConfig::from_toml(&again).unwrap(), config);
    }
}

fn model(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(snapshot) = ModelSnapshot::from_json(text) else { return };
    if let Ok(model) = NewtonModel::from_snapshot(&snapshot) {
        let x = if model.engine().kernel().dim() == 1 { Point::new1(0.25) } else { Point::new2(0.25, -0.5) };
        let _ = model.evaluate(&x);
    }
}

fn summary(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = MethodSummary::from_json(text) {
        MethodSummary::from_json(&s.to_json().unwrap()).unwrap();
    }
}

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn corpus_seeds_replay() {
    let targets: [(&str, fn(&[u8])); 5] = [
        ("candidates_csv", candidates),
        ("gram_csv", gram),
        ("config_toml", config),
        ("model_json", model),
        ("summary_json", summary),
    ];
    for (name, run) in targets {
        for seed in corpus(name) {
            run(&seed);
        }
    }
}

#[test]
fn seeds_that_should_parse_do() {
    let ok = |t: &str, i: usize| corpus(t)[i].clone();
    assert!(read_candidates(ok("candidates_csv", 0).as_slice()).is_ok());
    assert!(read_candidates(ok("candidates_csv", 1).as_slice()).is_err());
    assert!(read_gram(ok("gram_csv", 0).as_slice()).is_ok());
    assert!(read_gram(ok("gram_csv", 2).as_slice()).is_err());
    assert!(ExperimentConfig::from_toml(std::str::from_utf8(&ok("config_toml", 2)).unwrap()).is_err());
}

/// Mutates a valid seed: byte flips, truncation, and insertions.
fn mutated(seeds: Vec<Vec<u8>>) -> impl Strategy<Value = Vec<u8>> {
    (0..seeds.len(), prop::collection::vec((any::<usize>(), any::<u8>(), 0u8..3), 0..8)).prop_map(move |(i, edits)| {
        let mut s = seeds[i].clone();
        for (at, byte, op) in edits {
            let at = if s.is_empty() { 0 } else { at % s.len() };
            match op {
                0 if !s.is_empty() => s[at] = byte,
                1 => s.truncate(at),
                _ => s.insert(at, byte),
            }
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mutated_candidates(data in mutated(corpus("candidates_csv"))) { candidates(&data) }

    #[test]
    fn mutated_gram(data in mutated(corpus("gram_csv"))) { gram(&data) }

    #[test]
    fn mutated_config(data in mutated(corpus("config_toml"))) { config(&data) }

    #[test]
    fn mutated_model(data in mutated(corpus("model_json"))) { model(&data) }

    #[test]
    fn mutated_summary(data in mutated(corpus("summary_json"))) { summary(&data) }

    #[test]
    fn arbitrary_bytes(data in prop::collection::vec(any::<u8>(), 0..256)) {
        candidates(&data);
        gram(&data);
        config(&data);
        model(&data);
        summary(&data);
    }
}
