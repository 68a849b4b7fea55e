#![no_main]

use libfuzzer_sys::fuzz_target;
use unichain::format::{parse_instance, parse_instance_unvalidated};
use unichain::validate_mdp;

fuzz_target!(|text: &str| {
    if let Ok(model) = parse_instance_unvalidated(text) {
        // shape checks passed, so validation must not panic
        let violations = validate_mdp(&model);
        assert_eq!(violations.is_empty(), parse_instance(text).is_ok());
    }
});
