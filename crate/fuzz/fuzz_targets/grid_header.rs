#![no_main]

use bdsr::localize::read_grid;
use libfuzzer_sys::fuzz_target;

// First byte splits the input into header text and payload.
fuzz_target!(|data: &[u8]| {
    let Some((&cut, rest)) = data.split_first() else { return };
    let cut = (cut as usize).min(rest.len());
    let (header, payload) = rest.split_at(cut);
    let Ok(header) = std::str::from_utf8(header) else { return };
    if let Ok((h, g)) = read_grid(header, payload) {
        assert_eq!(g.data.len(), h.g * h.g);
    }
});
