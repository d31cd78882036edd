#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::sos::SosCertificate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(c) = SosCertificate::from_json(text) else { return };
    let back = SosCertificate::from_json(&c.to_json()).expect("own output parses");
    assert_eq!(c, back);
    let _ = c.halfspace();
});
