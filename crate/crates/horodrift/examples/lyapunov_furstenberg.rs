//! Top Lyapunov exponent two ways.
//!
//! The direct route accumulates the log norm of the running product; the
//! integral route averages log |A v| over the empirical stationary direction
//! measure and the atom law. The product also drives the symmetric-space
//! cross-check: with the metric d(Id, [A]) = sqrt(2) log |A| the escape rate
//! is sqrt(2) times the exponent.
//!
//!     cargo run --release --example lyapunov_furstenberg

use horodrift::lyapunov::{
    boundary_horofunction_value, furstenberg_formula, lyap_direct, stationary_direction,
    MatrixLaw,
};

fn main() -> horodrift::Result<()> {
    let law = MatrixLaw::coin();
    println!("fair coin on diag(2, 1/2) and the unit shear:");

    let run = lyap_direct(&law, 20_000, 100, 1)?;
    println!(
        "  direct exponent:      {:.6} +- {:.6}",
        run.direct.value, run.direct.std_error
    );

    let dirs = stationary_direction(&law, 1000, 50_000, 1)?;
    let formula = furstenberg_formula(&law, &dirs)?;
    println!(
        "  integral formula:     {:.6} +- {:.6}  (non-proximal warning: {})",
        formula.value, formula.std_error, dirs.non_proximal_warning
    );
    println!(
        "  sqrt(2) chi:          {:.6}   symmetric-space drift: {:.6} +- {:.6}",
        std::f64::consts::SQRT_2 * run.direct.value,
        run.symmetric_drift.value,
        run.symmetric_drift.std_error
    );

    // the same numbers in horofunction language: -E[xi(x_1)] = sqrt(2) chi
    let mean_neg_xi: f64 = dirs
        .angles
        .iter()
        .map(|&theta| {
            law.atoms()
                .iter()
                .map(|(a, p)| -p * boundary_horofunction_value(a, theta))
                .sum::<f64>()
        })
        .sum::<f64>()
        / dirs.angles.len() as f64;
    println!("  -mean xi(x_1):        {mean_neg_xi:.6}");

    let joint = (run.direct.std_error.powi(2) + formula.std_error.powi(2)).sqrt();
    let ok = (run.direct.value - formula.value).abs() <= 3.0 * joint;
    println!(
        "  agreement within 3 joint stderr: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(())
}
