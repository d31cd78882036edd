//! Runs the bundled Lotka–Volterra scenario and prints, per step, whether the
//! simulated state is inside the certified polytope and the two volumes.

use std::time::Instant;

use polyfilt::filter::run_filter;
use polyfilt::scenario::{bundled, Scenario};

fn main() -> polyfilt::Result<()> {
    env_logger::init();
    let scenario = Scenario::from_json(bundled("lotka_volterra").unwrap())?;
    let (measurements, truth) = scenario.measurements()?;
    let truth = truth.expect("scenario simulates its own data");
    let t = Instant::now();
    let mut smaller = 0;
    let records = run_filter(&scenario.model, &measurements, &scenario.file.filter, |r| {
        let x = &truth.states[r.step];
        let inside = r.polytope.contains(x, 1e-6).unwrap_or(false);
        println!(
            "k={:2}  inside={inside}  faces={:2}  box={:.3e}  polytope~{:.3e}  ({:.1?})",
            r.step,
            r.polytope.len(),
            r.box_volume,
            r.polytope_volume_mc,
            t.elapsed()
        );
    })?;
    for r in &records {
        if r.polytope_volume_mc < r.box_volume {
            smaller += 1;
        }
    }
    println!(
        "{} steps, polytope strictly smaller at {smaller}",
        records.len()
    );
    Ok(())
}
