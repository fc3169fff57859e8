#![no_main]

use countlab::metrics::{read_records_jsonl, write_records_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(recs) = read_records_jsonl(data) {
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(read_records_jsonl(&buf[..]).unwrap(), recs);
        let _ = countlab::metrics::mrce(&recs);
    }
});
