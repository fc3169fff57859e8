#![no_main]

use countlab::intervention::capture::CaptureSidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(side) = serde_json::from_slice::<CaptureSidecar>(data) {
        let _ = side.validate();
    }
});
