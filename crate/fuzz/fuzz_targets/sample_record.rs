#![no_main]

use libfuzzer_sys::fuzz_target;
use spinsqueeze::io::SampleRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = SampleRecord::decode(data) {
        let bytes = record.encode();
        let again = SampleRecord::decode(&bytes).expect("re-encoded record decodes");
        assert_eq!(again.encode(), bytes);
    }
});
