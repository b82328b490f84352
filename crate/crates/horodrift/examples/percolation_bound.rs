//! Walk speed on Bernoulli percolation clusters against the lower bound.
//!
//! Each trial lazily samples the edge states of the {3, 50} tiling along the
//! walk and keeps the trials whose exploration certified a large graph
//! radius (the stand-in for conditioning on an infinite cluster). The
//! measured cluster speed is compared per retention probability with
//! r - max_f/(p Q).
//!
//!     cargo run --release --example percolation_bound

use horodrift::hyperbolic::Sides;
use horodrift::percolation::bound_check_report;
use horodrift::tiling::{TilingSpec, WalkParams};

fn main() -> horodrift::Result<()> {
    let spec = TilingSpec::new(Sides::Finite(3), 50)?;
    let params = WalkParams::new(4000, 60, 1);
    println!(
        "{{3, 50}} tiling, {} trials of {} steps, survival radius 30",
        params.trials, params.n_steps
    );
    let table = bound_check_report(&spec, &[0.8, 0.9, 1.0], &params, 30)?;
    println!(
        "{:>5} {:>12} {:>12} {:>10} {:>10} {:>6}",
        "p", "lower bound", "speed", "stderr", "retained", "check"
    );
    for row in &table.rows {
        match (row.speed_estimate, row.std_error, row.retained_fraction) {
            (Some(s), Some(se), Some(rf)) => println!(
                "{:>5.2} {:>12.4} {:>12.4} {:>10.4} {:>9.0}% {:>6}",
                row.p,
                row.lower_bound,
                s,
                se,
                100.0 * rf,
                if row.passed == Some(true) { "PASS" } else { "FAIL" }
            ),
            _ => println!(
                "{:>5.2} {:>12.4}  {}",
                row.p,
                row.lower_bound,
                row.error.as_deref().unwrap_or("no data")
            ),
        }
    }
    Ok(())
}
