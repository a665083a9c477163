#![no_main]

use libfuzzer_sys::fuzz_target;
use qchannel_core::CountSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(counts) = CountSet::from_json(text) {
        let again = CountSet::from_json(&counts.to_json().unwrap()).unwrap();
        assert_eq!(again, counts);
    }
});
