#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::polynomial::Polynomial;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(p) = Polynomial::from_json(text) else { return };
    let back = Polynomial::from_json(&p.to_json()).expect("own output parses");
    assert_eq!(p, back);
    let x = vec![0.5; p.n_vars()];
    let _ = p.evaluate(&x).expect("point of matching length");
    if p.degree() <= 8 {
        let _ = &p * &p;
    }
});
