//! Certified support of the Example-1 step set in direction (−1, −0.5).

use std::time::Instant;

use polyfilt::filter::{build_step_set, FilterState};
use polyfilt::scenario::{bundled, Scenario};
use polyfilt::sdp::SdpOptions;
use polyfilt::sos::{min_halfspace_offset, verify_certificate, TOL_IDENTITY, TOL_PSD};

fn main() -> polyfilt::Result<()> {
    env_logger::init();
    let scenario = Scenario::from_json(bundled("example1").unwrap())?;
    let set = build_step_set(
        &scenario.model,
        &FilterState::initial(&scenario.model),
        &[0.0],
    )?;
    let t = Instant::now();
    let cert = min_halfspace_offset(&set, &[-1.0, -0.5], 2, &SdpOptions::default())?;
    let report = verify_certificate(&cert, &set, TOL_IDENTITY, TOL_PSD)?;
    println!(
        "nu** = {:.6}  residual = {:.2e}  min eig = {:.2e}  ({:.2?})",
        cert.nu,
        report.identity_residual,
        report.min_eigenvalue(),
        t.elapsed()
    );
    Ok(())
}
