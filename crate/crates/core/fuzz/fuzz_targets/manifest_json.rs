#![no_main]

use countlab::scene::SceneManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = SceneManifest::from_json(text) {
        let once = serde_json::to_string(&m).unwrap();
        let twice = serde_json::to_string(&SceneManifest::from_json(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }
});
