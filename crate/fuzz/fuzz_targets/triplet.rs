#![no_main]

use bdsr_solver::triplet::{export, import};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = import(text) {
        assert_eq!(import(&export(&p)).unwrap(), p);
    }
});
