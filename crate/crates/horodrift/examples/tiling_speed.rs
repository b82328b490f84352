//! Escape speed of the nearest-neighbor walk on a hyperbolic tiling.
//!
//! Runs seeded i.i.d. generator walks on the {3, 10} tiling, prints the
//! measured drift with its Monte Carlo error, and compares it against the
//! horofunction lower bound and the per-step cap (the edge length).
//!
//!     cargo run --release --example tiling_speed

use horodrift::hyperbolic::Sides;
use horodrift::tiling::{estimate_speed, TilingSpec, WalkParams};

fn main() -> horodrift::Result<()> {
    let spec = TilingSpec::new(Sides::Finite(3), 10)?;
    println!(
        "{{3, 10}} tiling: edge length r = {:.6}",
        spec.edge_length()
    );

    let params = WalkParams::new(10_000, 200, 1);
    let run = estimate_speed(&spec, &params)?;
    let r = &run.report;
    println!(
        "speed over {} trials of {} steps: {:.5} +- {:.5}",
        params.trials, params.n_steps, r.speed_estimate, r.std_error
    );
    println!(
        "lower bound (full graph, p = 1): {:.5}",
        r.lower_bound.unwrap()
    );
    println!("per-step cap (edge length):     {:.5}", r.upper_bound.unwrap());
    println!(
        "harmonic measure dimension bound log(Q)/speed = {:.4}",
        r.dim_upper_bound.unwrap()
    );

    let within = r.speed_estimate >= r.lower_bound.unwrap() - 3.0 * r.std_error;
    println!("bound check: {}", if within { "PASS" } else { "FAIL" });
    Ok(())
}
