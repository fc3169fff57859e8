#![no_main]

use countlab::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<ExperimentConfig>(data) {
        let once = serde_json::to_string(&cfg).unwrap();
        let twice = serde_json::to_string(&serde_json::from_str::<ExperimentConfig>(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }
});
