#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::sdp::{solve, SdpOptions, SdpProblem};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(p) = SdpProblem::from_json(text) else { return };
    let back = SdpProblem::from_json(&p.to_json()).expect("own output parses");
    assert_eq!(p, back);
    // keep each input cheap: only tiny problems reach the solver
    if p.variable_count() <= 40 && p.equalities().len() <= 40 {
        let opts = SdpOptions {
            max_iterations: 30,
            ..SdpOptions::default()
        };
        let _ = solve(&p, &opts);
    }
});
