//! Large-valence asymptotics of the tiling quantities.
//!
//! Across Q the edge length behaves like 2 log Q + O(1) uniformly in the
//! polygon count, and the maximal generator f-sum grows like Q log log Q, so
//! the speed lower bound r - max_f/(p Q) keeps pace with 2 log Q.
//!
//!     cargo run --release --example tiling_bounds

use horodrift::hyperbolic::Sides;
use horodrift::tiling::{max_f_sum, speed_lower_bound, TilingSpec};

fn main() -> horodrift::Result<()> {
    println!("edge length minus 2 log Q (rows: P, columns: Q):");
    print!("{:>6}", "P\\Q");
    for q in [10u32, 50, 200] {
        print!("{q:>10}");
    }
    println!();
    for p in [Sides::Finite(3), Sides::Finite(4), Sides::Finite(7), Sides::Ideal] {
        print!("{:>6}", p.to_string());
        for q in [10u32, 50, 200] {
            let spec = TilingSpec::new(p, q)?;
            print!("{:>10.4}", spec.edge_length() - 2.0 * (q as f64).ln());
        }
        println!();
    }

    println!("\ntriangle tilings, growing valence:");
    println!(
        "{:>5} {:>10} {:>12} {:>14} {:>12} {:>10}",
        "Q", "r", "max f-sum", "max_f/(Q llQ)", "bound(p=1)", "2 log Q"
    );
    for q in [50u32, 100, 200] {
        let spec = TilingSpec::new(Sides::Finite(3), q)?;
        let max_f = max_f_sum(&spec, 1e-6)?;
        let bound = speed_lower_bound(&spec, 1.0)?;
        let loglog = (q as f64).ln().ln();
        println!(
            "{:>5} {:>10.4} {:>12.4} {:>14.4} {:>12.4} {:>10.4}",
            q,
            spec.edge_length(),
            max_f,
            max_f / (q as f64 * loglog),
            bound,
            2.0 * (q as f64).ln()
        );
    }
    Ok(())
}
