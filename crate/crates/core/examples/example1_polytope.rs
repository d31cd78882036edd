//! One filter step on Example 1: box, greedy polytope and refinement.

use std::time::Instant;

use polyfilt::filter::filter_step;
use polyfilt::filter::FilterState;
use polyfilt::scenario::{bundled, Scenario};

fn main() -> polyfilt::Result<()> {
    env_logger::init();
    let s = Scenario::from_json(bundled("example1").unwrap())?;
    let (ys, _) = s.measurements()?;
    let t = Instant::now();
    let (_, rec) = filter_step(
        &s.model,
        &FilterState::initial(&s.model),
        &ys[0],
        &s.file.filter,
    )?;
    println!(
        "box {:?} .. {:?}",
        rec.bounding_box.lower, rec.bounding_box.upper
    );
    for h in rec.polytope.halfspaces() {
        println!(
            "  {:+.4} x1 {:+.4} x2 <= {:.6}",
            h.omega[0], h.omega[1], h.nu
        );
    }
    println!(
        "{} half-spaces, box volume {:.4e}, polytope ~{:.4e} ({:.1?})",
        rec.polytope.len(),
        rec.box_volume,
        rec.polytope_volume_mc,
        t.elapsed()
    );
    Ok(())
}
