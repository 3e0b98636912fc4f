#![no_main]

use bdsr::io::parse_document;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = parse_document(data) {
        let text = doc.to_json();
        assert_eq!(parse_document(text.as_bytes()).unwrap(), doc);
    }
});
