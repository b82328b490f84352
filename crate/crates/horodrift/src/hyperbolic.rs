//! Overflow-safe hyperbolic plane geometry.
//!
//! Points live in the upper half-plane model with base point `i`. Isometries
//! are unit-determinant 2x2 real matrices stored with an explicit logarithmic
//! prefactor, so compositions of millions of generators and distances up to
//! 1e5 stay finite. Boundary points are parametrized by their angle on the
//! circle at infinity of the Poincare disk (the half-plane point at infinity
//! sits at angle 0), and horofunctions are normalized to vanish at the base
//! point.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI, TAU};

/// A point of the upper half-plane, `im > 0` strictly.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HPoint {
    re: f64,
    im: f64,
}

impl HPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !im.is_finite() || !re.is_finite() {
            return Err(Error::InvalidPoint { im });
        }
        Ok(HPoint { re, im })
    }

    /// The base point `i = (0, 1)`.
    pub fn origin() -> Self {
        HPoint { re: 0.0, im: 1.0 }
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    /// Hyperbolic distance. Uses `2 asinh(|z-w| / (2 sqrt(im z im w)))`,
    /// which is exact in the log domain for large separations and avoids the
    /// cancellation of the `acosh(1 + ...)` form near zero.
    pub fn dist(&self, other: &HPoint) -> f64 {
        let dx = self.re - other.re;
        let dy = self.im - other.im;
        let chord = dx.hypot(dy);
        let s = chord / (2.0 * self.im.sqrt() * other.im.sqrt());
        2.0 * s.asinh()
    }

    /// Angle of the image of this point in the Poincare disk (conformal map
    /// `z -> (z - i)/(z + i)`), in `[0, 2pi)`. Undefined at the origin itself,
    /// where 0 is returned.
    pub fn disk_angle(&self) -> f64 {
        // (z - i)/(z + i) with z = x + iy
        let (x, y) = (self.re, self.im);
        // numerator x + (y-1)i, denominator x + (y+1)i
        let den2 = x * x + (y + 1.0) * (y + 1.0);
        let re = (x * x + (y - 1.0) * (y + 1.0)) / den2;
        let im = (x * (y + 1.0) - x * (y - 1.0)) / den2;
        wrap_angle(im.atan2(re))
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a < 0.0 {
        a += TAU;
    }
    a
}

/// A point of the circle at infinity, by its disk-model angle in `[0, 2pi)`.
/// The half-plane boundary point at infinity is the distinguished angle 0.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    angle: f64,
}

impl BoundaryPoint {
    pub fn from_angle(angle: f64) -> Self {
        BoundaryPoint {
            angle: wrap_angle(angle),
        }
    }

    /// The half-plane point at infinity.
    pub fn infinity() -> Self {
        BoundaryPoint { angle: 0.0 }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// Unit-determinant 2x2 real matrix acting on the half-plane, stored as
/// `e^{log_scale} * [[a, b], [c, d]]` with the normalized entries kept at
/// magnitude O(1). The represented matrix always has determinant 1 (up to
/// floating-point drift), i.e. `a d - b c = e^{-2 log_scale}`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Mobius {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    log_scale: f64,
}

impl Mobius {
    pub fn identity() -> Self {
        Mobius {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            log_scale: 0.0,
        }
    }

    /// Wraps a plain SL(2, R) matrix. Rejects entries whose determinant
    /// deviates from 1 by more than 1e-9.
    pub fn from_entries(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || (det - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnimodular {
                drift: (det - 1.0).abs(),
            });
        }
        Ok(Mobius {
            a,
            b,
            c,
            d,
            log_scale: 0.0,
        }
        .renormalized())
    }

    /// Rotation about the origin by `disk_angle` as seen in the disk model
    /// (the SO(2) matrix with half that angle; tangent vectors at the origin
    /// turn by exactly `disk_angle`).
    pub fn rotation(disk_angle: f64) -> Self {
        let t = disk_angle / 2.0;
        Mobius {
            a: t.cos(),
            b: t.sin(),
            c: -t.sin(),
            d: t.cos(),
            log_scale: 0.0,
        }
    }

    /// Translation of length `t` along the geodesic through the origin toward
    /// the boundary point at infinity: `o` maps to `e^t i`.
    pub fn axis_translation(t: f64) -> Self {
        // diag(e^{t/2}, e^{-t/2}) in prefactor form; never overflows.
        Mobius {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: (-t).exp(),
            log_scale: t / 2.0,
        }
        .renormalized()
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Rescales the entries so the largest magnitude lies in [1/2, 2],
    /// folding the factor into `log_scale`. The represented matrix is
    /// unchanged up to rounding.
    pub fn renormalized(&self) -> Self {
        let m = self
            .a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs());
        debug_assert!(m.is_finite() && m > 0.0, "degenerate matrix");
        if (0.5..=2.0).contains(&m) {
            return *self;
        }
        Mobius {
            a: self.a / m,
            b: self.b / m,
            c: self.c / m,
            d: self.d / m,
            log_scale: self.log_scale + m.ln(),
        }
    }

    /// `self ∘ rhs` (rhs acts first). The output is renormalized.
    pub fn compose(&self, rhs: &Mobius) -> Self {
        Mobius {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
            log_scale: self.log_scale + rhs.log_scale,
        }
        .renormalized()
    }

    /// Inverse of the represented unit-determinant matrix.
    pub fn inverse(&self) -> Self {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
            log_scale: self.log_scale,
        }
    }

    /// Fractional-linear action on the half-plane. The imaginary part is
    /// computed from the determinant invariant `e^{-2 log_scale}` rather than
    /// the cancelling difference `a d - b c`, which keeps the action accurate
    /// out to distances of several hundred. Beyond that the image underflows
    /// and an error is reported.
    pub fn apply(&self, z: &HPoint) -> Result<HPoint> {
        let (x, y) = (z.re, z.im);
        let nr = self.a * x + self.b; // real part of numerator
        let ni = self.a * y;
        let dr = self.c * x + self.d;
        let di = self.c * y;
        let den2 = dr * dr + di * di;
        let re = (nr * dr + ni * di) / den2;
        let det = (-2.0 * self.log_scale).exp();
        let im = y * det / den2;
        if !(im > 0.0) || !im.is_finite() || !re.is_finite() {
            return Err(Error::NumericalBreakdown { im });
        }
        Ok(HPoint { re, im })
    }

    /// `d(o, m·o)`, computed from the Frobenius norm in the log domain:
    /// `cosh d = ||M||_F^2 / 2` for unit-determinant M. Finite and accurate
    /// for `log_scale` up to 1e5 and beyond.
    pub fn dist_to_origin(&self) -> f64 {
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        // lc = log(cosh d)
        let lc = 2.0 * self.log_scale + f2.ln() - LN_2;
        if lc > 350.0 {
            lc + LN_2
        } else {
            // cosh d - 1 = expm1(lc); d = 2 asinh(sqrt((cosh d - 1)/2))
            let cm1 = lc.exp_m1().max(0.0);
            2.0 * (cm1 / 2.0).sqrt().asinh()
        }
    }

    /// `log Im(m·o)` without forming the image point; safe at any scale.
    pub fn origin_image_log_im(&self) -> f64 {
        -2.0 * self.log_scale - (self.c * self.c + self.d * self.d).ln()
    }

    /// Disk-model angle of `m·o`, computed scale-free from the entries.
    pub fn origin_disk_angle(&self) -> f64 {
        // ((b + c) + (a - d) i) / ((b - c) + (a + d) i)
        let nr = self.b + self.c;
        let ni = self.a - self.d;
        let dr = self.b - self.c;
        let di = self.a + self.d;
        let den2 = dr * dr + di * di;
        let re = (nr * dr + ni * di) / den2;
        let im = (ni * dr - nr * di) / den2;
        wrap_angle(im.atan2(re))
    }

    /// Determinant of the represented matrix. Meaningful only while
    /// `|log_scale|` is small enough that `e^{-2 log_scale}` is well above
    /// the rounding noise of the entries (say `|log_scale| < 15`).
    pub fn represented_determinant(&self) -> f64 {
        (self.a * self.d - self.b * self.c) * (2.0 * self.log_scale).exp()
    }

    /// Strict canonical form: largest entry magnitude exactly 1.
    pub(crate) fn canonical(&self) -> Self {
        let m = self
            .a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs());
        Mobius {
            a: self.a / m,
            b: self.b / m,
            c: self.c / m,
            d: self.d / m,
            log_scale: self.log_scale + m.ln(),
        }
    }

    /// Projective comparison (matrices are identified with their negatives).
    pub fn approx_eq(&self, other: &Mobius, tol: f64) -> bool {
        let ls = self.canonical();
        let lo = other.canonical();
        if (ls.log_scale - lo.log_scale).abs() > tol {
            return false;
        }
        let direct = (ls.a - lo.a)
            .abs()
            .max((ls.b - lo.b).abs())
            .max((ls.c - lo.c).abs())
            .max((ls.d - lo.d).abs());
        let flipped = (ls.a + lo.a)
            .abs()
            .max((ls.b + lo.b).abs())
            .max((ls.c + lo.c).abs())
            .max((ls.d + lo.d).abs());
        direct.min(flipped) <= tol
    }
}

/// Rotation of order two about `z`: fixes `z`, reverses every geodesic
/// through it, squares to the identity in PSL(2, R).
pub fn point_reflection(z: &HPoint) -> Mobius {
    let (x, y) = (z.re, z.im);
    // [[-x/y, (x^2 + y^2)/y], [-1/y, x/y]], determinant 1
    Mobius {
        a: -x / y,
        b: (x * x + y * y) / y,
        c: -1.0 / y,
        d: x / y,
        log_scale: 0.0,
    }
    .renormalized()
}

/// Busemann function of the boundary point `b`, normalized to vanish at the
/// origin and increasing toward `b`. For `b` at infinity this is `log im z`;
/// the general case conjugates by the rotation taking `b` to infinity.
pub fn busemann(b: &BoundaryPoint, z: &HPoint) -> f64 {
    // log Im(R z) where R = rotation(-angle); det R = 1 exactly.
    let t = -b.angle / 2.0;
    let (c, d) = (-t.sin(), t.cos());
    let dr = c * z.re + d;
    let di = c * z.im;
    z.im.ln() - (dr * dr + di * di).ln()
}

/// Busemann value at `g·o`, evaluated in the log domain so it stays accurate
/// when the orbit point is far beyond floating-point coordinates.
pub fn busemann_at_orbit(b: &BoundaryPoint, g: &Mobius) -> f64 {
    let t = -b.angle / 2.0;
    let (s, co) = (t.sin(), t.cos());
    // bottom row of rotation(-angle) * entries(g)
    let c2 = -s * g.a + co * g.c;
    let d2 = -s * g.b + co * g.d;
    -2.0 * g.log_scale - (c2 * c2 + d2 * d2).ln()
}

/// Horofunction: either based at an interior point (`d(x, o) - d(x, ·)`) or a
/// Busemann function of a boundary point. Both vanish at the origin and are
/// 1-Lipschitz.
#[derive(Copy, Clone, Debug)]
pub enum Horofunction {
    Interior(HPoint),
    Boundary(BoundaryPoint),
}

impl Horofunction {
    pub fn evaluate(&self, z: &HPoint) -> f64 {
        match self {
            Horofunction::Interior(base) => {
                base.dist(&HPoint::origin()) - base.dist(z)
            }
            Horofunction::Boundary(b) => busemann(b, z),
        }
    }
}

/// The nonnegative sum `xi_b(z) + d(o, z)`. For `b` at infinity its level
/// sets are ellipses with foci at `±i`, with the closed form
/// `2 log((|z - i| + |z + i|)/2)`.
pub fn f_xi(b: &BoundaryPoint, z: &HPoint) -> f64 {
    busemann(b, z) + HPoint::origin().dist(z)
}

/// Same quantity at an orbit point `g·o`, safe at any scale.
pub fn f_xi_at_orbit(b: &BoundaryPoint, g: &Mobius) -> f64 {
    busemann_at_orbit(b, g) + g.dist_to_origin()
}

/// Visual angle, seen from the origin, within which a horofunction-plus-
/// distance sum can exceed `r`: `4 arctan((e^r - 1)^{-1/2})`.
pub fn cone_angle(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param("r", format!("must be positive, got {r}")));
    }
    Ok(4.0 * (1.0 / r.exp_m1().sqrt()).atan())
}

/// Polygon side count of a `{P, Q}` tiling; `Ideal` is the limit of
/// infinitely many sides.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sides {
    Finite(u32),
    Ideal,
}

impl std::fmt::Display for Sides {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sides::Finite(p) => write!(f, "{p}"),
            Sides::Ideal => write!(f, "inf"),
        }
    }
}

/// Distance between adjacent vertices of the `{P, Q}` tiling by regular
/// P-gons with Q meeting at each vertex:
/// `2 acosh(cos(pi/P) / sin(pi/Q))`, with `cos(pi/P) -> 1` in the ideal
/// limit. The angle condition `1/P + 1/Q < 1/2` is checked exactly in
/// integer arithmetic.
pub fn side_length(p: Sides, q: u32) -> Result<f64> {
    let ok = match p {
        Sides::Finite(p) => 2 * (p as u64 + q as u64) < (p as u64) * (q as u64),
        Sides::Ideal => q > 2,
    };
    if !ok {
        return Err(Error::InvalidTiling {
            p: p.to_string(),
            q,
        });
    }
    let num = match p {
        Sides::Finite(p) => (PI / p as f64).cos(),
        Sides::Ideal => 1.0,
    };
    Ok(2.0 * (num / (PI / q as f64).sin()).acosh())
}
