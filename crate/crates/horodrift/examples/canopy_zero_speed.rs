//! The weighted canopy tree: transient yet zero speed.
//!
//! With level-n edges of conductance lambda^n (1 < lambda < 2) the walk
//! escapes to infinity along the single end while its level stays positively
//! recurrent, so the graph distance to the start grows sublinearly. The
//! up-transition frequency from positive levels is lambda/(2 + lambda), the
//! level occupation matches the numerically solved stationary distribution,
//! and the speed formula vanishes because every edge has a finite side.
//!
//!     cargo run --release --example canopy_zero_speed

use horodrift::tree::{
    canopy_stationary_levels, effective_conductance, simulate_tree_walk, speed_formula,
    EdgeSplit, VertexHandle, WeightedTree,
};

fn main() -> horodrift::Result<()> {
    let lambda = 1.5;
    let tree = WeightedTree::canopy(lambda)?;
    let n = 100_000;
    let run = simulate_tree_walk(&tree, n, 64, 7)?;
    println!("canopy(lambda = {lambda}), one walk of {n} steps:");
    println!(
        "  final distance {} -> speed {:.5} (zero-speed check: <= 0.02 {})",
        run.final_distance,
        run.final_distance as f64 / n as f64,
        if (run.final_distance as f64 / n as f64) <= 0.02 { "PASS" } else { "FAIL" }
    );
    let up = run.up_moves_from_positive as f64 / run.moves_from_positive as f64;
    println!(
        "  up-transition frequency from levels >= 1: {:.5} (expected lambda/(2+lambda) = {:.5})",
        up,
        lambda / (2.0 + lambda)
    );

    let levels = canopy_stationary_levels(lambda, 16, 1e-10)?;
    println!(
        "  stationary level distribution head: {:?}",
        levels
            .iter()
            .take(6)
            .map(|x| (x * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    );

    // conductance to infinity from the root leaf: the upward geometric chain
    let to_infinity = effective_conductance(&tree, &tree.root(), None, 1e-9)?;
    println!(
        "  conductance to infinity from a leaf: [{:.6}, {:.6}] (chain value (lambda-1)/lambda = {:.6})",
        to_infinity.lower,
        to_infinity.upper,
        (lambda - 1.0) / lambda
    );

    // around any edge the downward side is finite, so the speed formula is 0
    let v = VertexHandle::Canopy { level: 2, index: 0 };
    let up_nbr = VertexHandle::Canopy { level: 3, index: 0 };
    let below = effective_conductance(&tree, &v, Some((&v, &up_nbr)), 1e-9)?;
    let above = effective_conductance(&tree, &up_nbr, Some((&v, &up_nbr)), 1e-9)?;
    let split = EdgeSplit::new(below, lambda.powi(2), above)?;
    let speed = speed_formula(&split)?;
    println!(
        "  speed formula around a level-2 edge: [{:.6}, {:.6}]",
        speed.lower, speed.upper
    );
    Ok(())
}
