#![no_main]

use libfuzzer_sys::fuzz_target;
use qchannel_core::PolarizationKet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = text.parse::<PolarizationKet>() {
        assert_eq!(k.symbol().parse::<PolarizationKet>().unwrap(), k);
    }
});
