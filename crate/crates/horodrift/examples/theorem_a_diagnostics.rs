//! The horofunction route to the walk speed.
//!
//! For a distance-stationary walk the speed equals -E[xi(x_1)] for a random
//! boundary horofunction xi independent of the first step. Here xi comes
//! from an independent backward walk: its limiting direction on the tiling,
//! its loop-erased ray on a tree. The example prints both estimates with a
//! stationarity diagnostic of the per-step horofunction increments and an
//! escape report for the backward trajectory.
//!
//!     cargo run --release --example theorem_a_diagnostics

use horodrift::drift::{escape_diagnostic, DEFAULT_ESCAPE_RADII};
use horodrift::hyperbolic::Sides;
use horodrift::tiling::{theorem_a_check, TilingSpec, WalkParams};
use horodrift::tree::{tree_theorem_a_check, WeightedTree};

fn main() -> horodrift::Result<()> {
    let spec = TilingSpec::new(Sides::Finite(3), 10)?;
    let run = theorem_a_check(&spec, &WalkParams::new(5000, 400, 3))?;
    let r = &run.report;
    println!("{{3, 10}} tiling ({} trials of {} steps):", r.trials, r.n_steps);
    println!("  kingman speed:        {:.5} +- {:.5}", r.speed, r.speed_std_error);
    println!(
        "  -mean xi(x_1):        {:.5} +- {:.5}  (boundary horofunction)",
        r.horofunction_estimate, r.horofunction_std_error
    );
    println!(
        "  -mean xi_int(x_1):    {:.5} +- {:.5}  (interior, backward endpoint)",
        r.interior_estimate, r.interior_std_error
    );
    println!(
        "  discrepancy {:.5} vs 3 (joint stderr + bias allowance) = {:.5} -> {}",
        r.discrepancy,
        3.0 * (r.joint_std_error + r.bias_allowance),
        if r.passed { "PASS" } else { "FAIL" }
    );
    println!(
        "  increment stationarity: max window gap {:.2} sigma (flagged: {})",
        r.increment_stationarity.max_gap_sigmas, r.increment_stationarity.drift_flagged
    );
    let escape = escape_diagnostic(&run.backward_distances, &DEFAULT_ESCAPE_RADII)?;
    println!(
        "  backward walk escape: late-time fraction within radius {:?}: {:?}",
        escape.radii,
        escape
            .last_half_fractions
            .iter()
            .map(|f| (f * 1e3).round() / 1e3)
            .collect::<Vec<_>>()
    );

    let tree = WeightedTree::regular(3)?;
    let run = tree_theorem_a_check(&tree, 5000, 400, 3)?;
    let r = &run.report;
    println!("\n3-regular tree ({} trials of {} steps):", r.trials, r.n_steps);
    println!("  kingman speed:        {:.5} +- {:.5}", r.speed, r.speed_std_error);
    println!(
        "  -mean xi(x_1):        {:.5} +- {:.5}  (loop-erased-ray horofunction)",
        r.horofunction_estimate, r.horofunction_std_error
    );
    println!(
        "  discrepancy {:.5} vs 3 joint stderr = {:.5} -> {}",
        r.discrepancy,
        3.0 * r.joint_std_error,
        if r.passed { "PASS" } else { "FAIL" }
    );
    Ok(())
}
