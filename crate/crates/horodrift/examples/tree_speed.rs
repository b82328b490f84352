//! Electrical speed formula on regular trees.
//!
//! On the d-regular unit tree the conductance of each branch to infinity is
//! d - 2 (the wired truncation bounds converge there), and the formula
//! A C / (A B + A C + B C) around any edge gives (d - 2)/d. Simulated walks
//! agree.
//!
//!     cargo run --release --example tree_speed

use horodrift::drift::Estimate;
use horodrift::tree::{
    conductance_bounds_at_depth, simulate_tree_walk, speed_formula, ConductanceInterval,
    EdgeSplit, WeightedTree,
};

fn main() -> horodrift::Result<()> {
    println!(
        "{:>3} {:>22} {:>12} {:>12} {:>10} {:>6}",
        "d", "branch conductance", "formula", "simulated", "stderr", "check"
    );
    for d in [3u32, 4, 5] {
        let tree = WeightedTree::regular(d)?;
        let root = tree.root();
        let child = tree.neighbors(&root)[0].0.clone();
        let side = conductance_bounds_at_depth(&tree, &root, Some((&root, &child)), 96)?;

        // the wired bound has converged; evaluate the formula on it exactly
        let exact = ConductanceInterval::exact(side.upper);
        let formula = speed_formula(&EdgeSplit::new(exact, 1.0, exact)?)?;

        let speeds: Vec<f64> = (0..30)
            .map(|s| {
                let run = simulate_tree_walk(&tree, 50_000, 64, s).unwrap();
                run.final_distance as f64 / 50_000.0
            })
            .collect();
        let est = Estimate::from_samples(&speeds);
        let ok = (est.value - formula.upper).abs() <= 3.0 * est.std_error + 0.005;
        println!(
            "{:>3} {:>12.6} (={})  {:>10.6} {:>12.6} {:>10.6} {:>6}",
            d,
            side.upper,
            d - 2,
            formula.upper,
            est.value,
            est.std_error,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
