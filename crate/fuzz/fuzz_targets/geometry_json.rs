#![no_main]

use libfuzzer_sys::fuzz_target;
use polyfilt::geometry::{BoundingBox, HalfSpace, Polytope, SemialgebraicSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = serde_json::from_str::<HalfSpace>(text) {
        assert!(h.omega.iter().any(|&w| w != 0.0));
        let _ = h.contains(&vec![0.0; h.dim()], 1e-9).expect("matching dimension");
    }
    if let Ok(p) = serde_json::from_str::<Polytope>(text) {
        if let Some(d) = p.dim() {
            let _ = p.contains(&vec![0.0; d], 1e-9).expect("matching dimension");
        }
    }
    if let Ok(b) = serde_json::from_str::<BoundingBox>(text) {
        assert!(b.lower.iter().zip(&b.upper).all(|(l, u)| l <= u));
        assert!(b.contains(&b.center(), 0.0).expect("matching dimension"));
    }
    if let Ok(s) = serde_json::from_str::<SemialgebraicSet>(text) {
        let _ = s.max_violation(&vec![0.0; s.n_vars()]).expect("matching dimension");
    }
});
