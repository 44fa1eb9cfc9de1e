#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // A file that parses must survive layer reconstruction and
        // round-trip back through the serializer.
        if let Ok(file) = arenkit::arch_file::parse_arch_str(text) {
            let _ = arenkit::arch_file::layers_to_specs(&file);
            let json = arenkit::arch_file::to_json_string(&file);
            let again = arenkit::arch_file::parse_arch_str(&json).expect("round trip");
            assert_eq!(file, again);
        }
    }
});
