#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Expectation: never panic. Either Ok(_) or a clean Err(_).
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = arenkit::spec_file::parse_spec_str(text);
    }
});
