#![no_main]

use libfuzzer_sys::fuzz_target;
use unichain::format::{parse_policy, parse_policy_list, parse_supports};

fuzz_target!(|text: &str| {
    if let Ok(policy) = parse_policy(text) {
        // the display form parses back to the same policy
        assert_eq!(parse_policy(&policy.to_string()).ok(), Some(policy));
    }
    let _ = parse_policy_list(text);
    let _ = parse_supports(text);
});
