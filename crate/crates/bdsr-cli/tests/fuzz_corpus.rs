//! Replays the fuzz corpus seeds through the same parsers the fuzz targets drive.

use std::path::PathBuf;

use bdsr::io::parse_document;
use bdsr::localize::read_grid;
use bdsr_cli::config::ExperimentConfig;
use bdsr_cli::sweep::SweepConfig;
use bdsr_solver::triplet::{export, import};

fn seeds(dir: &str) -> Vec<(String, Vec<u8>)> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(dir);
    let mut out: Vec<_> = std::fs::read_dir(&root)
        .unwrap_or_else(|e| panic!("{}: {e}", root.display()))
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "{dir} corpus is empty");
    out
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("config") {
        if name == "sweep.json" {
            assert_eq!(SweepConfig::from_json(&data).unwrap().cells().len(), 4);
        } else {
            let c = ExperimentConfig::from_json(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(ExperimentConfig::from_json(&serde_json::to_vec(&c).unwrap()).unwrap(), c);
        }
    }
}

#[test]
fn document_seeds() {
    for (name, data) in seeds("document") {
        let d = parse_document(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_document(d.to_json().as_bytes()).unwrap(), d);
    }
}

#[test]
fn triplet_seeds() {
    for (name, data) in seeds("triplet") {
        let p = import(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(import(&export(&p)).unwrap(), p);
    }
}

#[test]
fn grid_header_seeds() {
    for (name, data) in seeds("grid_header") {
        let (&cut, rest) = data.split_first().unwrap();
        let (header, payload) = rest.split_at(cut as usize);
        let res = read_grid(std::str::from_utf8(header).unwrap(), payload);
        assert_eq!(res.is_ok(), !name.contains("short"), "{name}");
    }
}
