#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::filter::StepRecord;
use polyfilt::sos::{verify_certificate, TOL_IDENTITY, TOL_PSD};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(rec) = serde_json::from_str::<StepRecord>(text) else { return };
    for c in &rec.certificates {
        // shape mismatches must come back as errors
        let _ = verify_certificate(&c.certificate, &rec.set, TOL_IDENTITY, TOL_PSD);
    }
});
