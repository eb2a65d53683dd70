#![no_main]

use libfuzzer_sys::fuzz_target;
use spinsqueeze::io::Sidecar;

fuzz_target!(|data: &[u8]| {
    if let Ok(sidecar) = Sidecar::from_json(data) {
        let text = sidecar.to_json().expect("parsed sidecar serializes");
        Sidecar::from_json(text.as_bytes()).expect("serialized sidecar parses");
    }
});
