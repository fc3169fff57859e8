#![no_main]

use countlab::intervention::capture::CaptureLayer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = CaptureLayer::decode(data) {
        assert_eq!(c.encode(), data);
        let _ = c.to_array();
    }
});
