//! The checked-in fuzz corpus seeds must keep parsing: each seed runs
//! through the parser its fuzz target exercises.

use std::fs;
use std::path::PathBuf;

fn corpus_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(name)
}

fn seeds(name: &str) -> Vec<(PathBuf, String)> {
    let dir = corpus_dir(name);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("corpus dir {}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn spec_file_seeds_parse() {
    for (path, text) in seeds("spec_file") {
        arenkit::spec_file::parse_spec_str(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn arch_file_seeds_parse_and_round_trip() {
    for (path, text) in seeds("arch_file") {
        let file = arenkit::arch_file::parse_arch_str(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        arenkit::arch_file::layers_to_specs(&file)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = arenkit::arch_file::parse_arch_str(&arenkit::arch_file::to_json_string(&file))
            .unwrap();
        assert_eq!(file, again, "{}", path.display());
    }
}

#[test]
fn sweep_seeds_parse() {
    for (path, text) in seeds("sweep_desc") {
        arenkit::sweep::parse_sweep(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
