#![no_main]

use libfuzzer_sys::fuzz_target;
use unichain::fixtures::two_cycle;
use unichain::sim::{simulate, Schedule};

fuzz_target!(|text: &str| {
    if let Ok(schedule) = Schedule::parse(text) {
        let model = two_cycle();
        if schedule.check(&model).is_ok() {
            let stats = simulate(&model, &schedule, 64, 0).expect("checked schedule simulates");
            assert_eq!(stats.visits.iter().sum::<u64>(), 64);
        }
    }
});
