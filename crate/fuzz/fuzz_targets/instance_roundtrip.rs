#![no_main]

use libfuzzer_sys::fuzz_target;
use unichain::format::{parse_instance, write_instance};

fuzz_target!(|text: &str| {
    if let Ok(model) = parse_instance(text) {
        let canonical = write_instance(&model);
        let reparsed = parse_instance(&canonical).expect("canonical text parses");
        assert_eq!(reparsed, model);
        assert_eq!(write_instance(&reparsed), canonical);
    }
});
