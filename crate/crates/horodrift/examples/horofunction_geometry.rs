//! Closed forms of the half-plane horofunction geometry.
//!
//! The sum f(z) = xi(z) + d(o, z) for the boundary point at infinity has the
//! closed form 2 log((|z - i| + |z + i|)/2) with elliptical level sets, and
//! the region where it exceeds r is seen from the origin within the visual
//! angle 4 arctan((e^r - 1)^{-1/2}). The example evaluates both along a
//! direction scan.
//!
//!     cargo run --release --example horofunction_geometry

use horodrift::hyperbolic::{
    busemann, cone_angle, f_xi, f_xi_at_orbit, BoundaryPoint, HPoint, Mobius,
};

fn main() -> horodrift::Result<()> {
    let inf = BoundaryPoint::infinity();
    println!("busemann values toward the point at infinity:");
    for (label, z) in [
        ("2i", HPoint::new(0.0, 2.0)?),
        ("1+i", HPoint::new(1.0, 1.0)?),
        ("e i", HPoint::new(0.0, std::f64::consts::E)?),
    ] {
        println!("  xi({label}) = {:+.6}", busemann(&inf, &z));
    }

    println!("\nf = xi + d(o, .) against its closed form:");
    for (x, y) in [(1.0, 1.0), (0.5, 2.0), (-3.0, 0.2)] {
        let z = HPoint::new(x, y)?;
        let closed = 2.0 * ((x.hypot(y - 1.0) + x.hypot(y + 1.0)) / 2.0).ln();
        println!(
            "  f({x:+.1} + {y:.1} i) = {:.9}   closed form {:.9}",
            f_xi(&inf, &z),
            closed
        );
    }

    println!("\nvisual angle of the region f > r, scan vs formula:");
    for r in [0.5f64, 1.0, 2.0, 4.0] {
        // bisect the limiting f value along rays for the crossing direction
        let limit_f = |theta: f64| {
            let g = Mobius::rotation(theta).compose(&Mobius::axis_translation(50.0));
            f_xi_at_orbit(&inf, &g)
        };
        let (mut lo, mut hi) = (1e-9, std::f64::consts::PI - 1e-9);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if limit_f(mid) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        println!(
            "  r = {r:<4}: scanned {:.8}, formula {:.8}",
            lo + hi,
            cone_angle(r)?
        );
    }
    Ok(())
}
