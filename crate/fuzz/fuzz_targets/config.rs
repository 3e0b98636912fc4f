#![no_main]

use bdsr_cli::config::ExperimentConfig;
use bdsr_cli::sweep::SweepConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = ExperimentConfig::from_json(data) {
        let again = ExperimentConfig::from_json(&serde_json::to_vec(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        let _ = c.assemble_options();
    }
    if let Ok(s) = SweepConfig::from_json(data) {
        assert!(!s.cells().is_empty());
    }
});
