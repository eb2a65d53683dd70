#![no_main]

use libfuzzer_sys::fuzz_target;
use spinsqueeze::io::{checkpoint, parse_checkpoint};
use spinsqueeze::model::BoxShape;

fuzz_target!(|data: &[u8]| {
    if let Ok(pair) = parse_checkpoint(data) {
        let bytes = checkpoint(&pair, BoxShape::Cubic);
        let again = parse_checkpoint(&bytes).expect("written checkpoint parses");
        assert_eq!(again.psi_a.len(), pair.psi_a.len());
    }
});
