#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::scenario::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(s) = Scenario::from_json(text) else { return };
    let again = Scenario::from_json(&s.to_json()).expect("own output parses");
    assert_eq!(s.file, again.file);
    let _ = s.model.default_sos_half_degree();
});
