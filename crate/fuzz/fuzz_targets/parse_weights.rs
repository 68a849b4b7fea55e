#![no_main]

use libfuzzer_sys::fuzz_target;
use unichain::fixtures::two_cycle;
use unichain::format::parse_weights;
use unichain::mixed_average_reward;

fuzz_target!(|text: &str| {
    if let Ok(policy) = parse_weights(text) {
        let model = two_cycle();
        if policy.check(&model).is_ok() {
            let gain = mixed_average_reward(&model, &policy, 1e-10).expect("two-cycle mixtures are irreducible");
            assert!((0.0..=1.0).contains(&gain.value));
        }
    }
});
