#![no_main]

use libfuzzer_sys::fuzz_target;

use ee_trajectory::scenario::{document_to_json, parse_document};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = parse_document(text) {
        // Anything accepted must survive a round trip unchanged.
        let again = parse_document(&document_to_json(&doc)).expect("re-parse of emitted document");
        assert_eq!(again, doc);
    }
});
