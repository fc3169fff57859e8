#![no_main]

use countlab::intervention::InterventionPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = InterventionPlan::from_json(text) {
        assert_eq!(plan.layer_map().len(), plan.num_layers());
        // Re-encoding is a fixed point after one round.
        let once = serde_json::to_string(&plan).unwrap();
        let twice = serde_json::to_string(&InterventionPlan::from_json(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }
});
