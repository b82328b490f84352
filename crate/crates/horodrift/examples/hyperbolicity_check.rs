//! The sign condition behind the percolation speed bound.
//!
//! For each boundary point, sums the Busemann values over the generator
//! orbit; the bound applies when the maximum over the boundary circle is
//! strictly negative. Also verifies the Gromov-product reformulation
//! (sum of products <= half the total generator distance) on every sample.
//!
//!     cargo run --release --example hyperbolicity_check

use horodrift::hyperbolic::Sides;
use horodrift::tiling::{hyperbolicity_check, TilingSpec};

fn main() -> horodrift::Result<()> {
    for (p, q) in [
        (Sides::Finite(3), 10u32),
        (Sides::Finite(4), 8),
        (Sides::Finite(7), 7),
        (Sides::Finite(3), 50),
    ] {
        let spec = TilingSpec::new(p, q)?;
        let report = hyperbolicity_check(&spec, 64)?;
        println!(
            "{{{p}, {q}}}: max busemann sum {:>10.4} at angle {:.5} \
             (identity err {:.1e}, gromov equivalence {}) -> {}",
            report.max_busemann_sum,
            report.argmax_angle,
            report.identity_max_abs_err,
            report.gromov_equivalence_ok,
            if report.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
