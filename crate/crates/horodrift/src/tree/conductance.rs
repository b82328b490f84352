//! Effective conductance to infinity with certified two-sided truncation
//! bounds, and the electrical speed formula.
//!
//! Truncating the tree at depth D and giving the cut leaves conductance 0
//! ("free") or infinity ("wired") brackets the true conductance from below
//! and above. On a tree the free bound of any infinite subtree is 0, so for
//! transient trees the interval stops shrinking and the depth cap is reported
//! (not an error); the wired bound still converges to the true value.

use super::{TreeKind, VertexHandle, WeightedTree};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two-sided bracket on an effective conductance.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Set when the depth cap was hit before the bracket closed.
    pub depth_capped: bool,
    pub depth: u32,
}

impl ConductanceInterval {
    pub fn exact(value: f64) -> Self {
        ConductanceInterval {
            lower: value,
            upper: value,
            depth_capped: false,
            depth: 0,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Conductances in series: an edge of conductance `c` feeding a subtree of
/// conductance `s`. Handles the wired sentinel `s = inf`.
fn series(c: f64, s: f64) -> f64 {
    if s.is_infinite() {
        c
    } else if s == 0.0 {
        0.0
    } else {
        c * s / (c + s)
    }
}

const DEPTH_CAP: u32 = 512;

/// Effective conductance between `v` and infinity in the tree minus
/// `removed_edge` (an edge incident to `v`, или absent).
///
/// The truncation depth doubles until the free/wired bracket closes within
/// `tol` or the depth cap is reached; finite components come out as the exact
/// interval `[x, x]` (in particular `[0, 0]` when nothing is wired).
pub fn effective_conductance(
    tree: &WeightedTree,
    v: &VertexHandle,
    removed_edge: Option<(&VertexHandle, &VertexHandle)>,
    tol: f64,
) -> Result<ConductanceInterval> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    validate_removed(tree, v, removed_edge)?;
    let mut depth = 8;
    loop {
        let interval = conductance_bounds_at_depth(tree, v, removed_edge, depth)?;
        if interval.width() <= tol || !interval.depth_capped && interval.width() == 0.0 {
            return Ok(interval);
        }
        if depth >= DEPTH_CAP {
            return Ok(interval);
        }
        depth *= 2;
    }
}

fn validate_removed(
    tree: &WeightedTree,
    v: &VertexHandle,
    removed_edge: Option<(&VertexHandle, &VertexHandle)>,
) -> Result<()> {
    if let Some((a, b)) = removed_edge {
        let incident = a == v || b == v;
        if !incident {
            return Err(Error::param(
                "removed_edge",
                "must be incident to the vertex",
            ));
        }
        let other = if a == v { b } else { a };
        if !tree.neighbors(v).iter().any(|(w, _)| w == other) {
            return Err(Error::param("removed_edge", "edge does not exist"));
        }
    }
    Ok(())
}

/// Free/wired bounds at one fixed truncation depth. Wired bounds are
/// nonincreasing and free bounds nondecreasing in the depth.
pub fn conductance_bounds_at_depth(
    tree: &WeightedTree,
    v: &VertexHandle,
    removed_edge: Option<(&VertexHandle, &VertexHandle)>,
    depth: u32,
) -> Result<ConductanceInterval> {
    validate_removed(tree, v, removed_edge)?;
    let removed = removed_edge.map(|(a, b)| if a == v { b.clone() } else { a.clone() });
    let interval = match tree.kind() {
        TreeKind::Finite(_) => {
            let value = finite_value(tree, v, None, removed.as_ref());
            ConductanceInterval {
                lower: value,
                upper: value,
                depth_capped: false,
                depth,
            }
        }
        TreeKind::Regular { degree } => {
            let d = *degree;
            let branches = tree
                .neighbors(v)
                .iter()
                .filter(|(w, _)| Some(w) != removed.as_ref())
                .count() as f64;
            // branch subtree value after `depth` truncation levels
            let iterate = |mut k: f64| {
                for _ in 0..depth {
                    k = (d as f64 - 1.0) * series(1.0, k);
                }
                k
            };
            let free = branches * series(1.0, iterate(0.0));
            let wired = branches * series(1.0, iterate(f64::INFINITY));
            ConductanceInterval {
                lower: free,
                upper: wired,
                depth_capped: wired - free > 0.0,
                depth,
            }
        }
        TreeKind::Canopy { lambda } => {
            canopy_interval(*lambda, v, removed.as_ref(), depth)
        }
    };
    Ok(interval)
}

/// Exact recursion on a finite tree; wired-marked leaves count as a perfect
/// connection to infinity.
fn finite_value(
    tree: &WeightedTree,
    v: &VertexHandle,
    from: Option<&VertexHandle>,
    removed: Option<&VertexHandle>,
) -> f64 {
    let finite = match tree.kind() {
        TreeKind::Finite(t) => t,
        _ => unreachable!(),
    };
    let idx = match v {
        VertexHandle::Finite(i) => *i,
        _ => unreachable!(),
    };
    if finite.is_wired(idx) && from.is_some() {
        return f64::INFINITY;
    }
    // parallel edges to the same neighbor merge before the series law
    let mut merged: Vec<(VertexHandle, f64)> = Vec::new();
    for (w, c) in tree.neighbors(v) {
        if Some(&w) == from || (from.is_none() && Some(&w) == removed) {
            continue;
        }
        match merged.iter_mut().find(|(x, _)| *x == w) {
            Some((_, acc)) => *acc += c,
            None => merged.push((w, c)),
        }
    }
    let mut total = 0.0;
    for (w, c) in merged {
        let sub = finite_value(tree, &w, Some(v), None);
        if sub.is_infinite() {
            total += c;
        } else {
            total += series(c, sub);
        }
    }
    total
}

/// Canopy: every downward subtree is finite (exact 0 toward infinity), so
/// only the upward chain of edges `lambda^k, lambda^{k+1}, ...` carries
/// conductance to infinity and the computation reduces to a truncated
/// geometric series of resistances.
fn canopy_interval(
    lambda: f64,
    v: &VertexHandle,
    removed: Option<&VertexHandle>,
    depth: u32,
) -> ConductanceInterval {
    let level = match v {
        VertexHandle::Canopy { level, .. } => *level,
        _ => unreachable!(),
    };
    let removed_is_upward = match removed {
        Some(VertexHandle::Canopy { level: lw, .. }) => *lw > level,
        Some(_) => unreachable!(),
        None => false,
    };
    if removed_is_upward {
        // only the finite downward subtree remains
        return ConductanceInterval {
            lower: 0.0,
            upper: 0.0,
            depth_capped: false,
            depth,
        };
    }
    // wired: resistances of the first `depth` upward edges in series
    let mut resistance = 0.0;
    for j in 0..depth {
        resistance += lambda.powi(-((level + j) as i32));
    }
    ConductanceInterval {
        lower: 0.0, // free truncation of an infinite chain
        upper: 1.0 / resistance,
        depth_capped: true,
        depth,
    }
}

/// The three conductances around one edge: `A` from one endpoint to infinity
/// with the edge removed, `B` the edge itself, `C` from the other endpoint.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub side_a: ConductanceInterval,
    pub edge: f64,
    pub side_c: ConductanceInterval,
}

impl EdgeSplit {
    pub fn new(side_a: ConductanceInterval, edge: f64, side_c: ConductanceInterval) -> Result<Self> {
        if !(edge > 0.0) {
            return Err(Error::param("edge", "conductance must be positive"));
        }
        Ok(EdgeSplit {
            side_a,
            edge,
            side_c,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SpeedInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn formula_point(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 || c == 0.0 {
        // the expression vanishes as soon as either side is cut off
        return 0.0;
    }
    if a.is_infinite() || c.is_infinite() {
        // limit in A and/or C
        if a.is_infinite() && c.is_infinite() {
            return 1.0;
        }
        let finite = if a.is_infinite() { c } else { a };
        return finite / (finite + b);
    }
    a * c / (a * b + a * c + b * c)
}

/// Interval image of `A C / (A B + A C + B C)`. The expression is monotone
/// nondecreasing in both A and C, so evaluating the corner points suffices.
/// Rejects the совершенно degenerate case A = C = [0, 0] (a recurrent split).
pub fn speed_formula(split: &EdgeSplit) -> Result<SpeedInterval> {
    let a = split.side_a;
    let c = split.side_c;
    if a.upper == 0.0 && c.upper == 0.0 && !a.depth_capped && !c.depth_capped {
        return Err(Error::NotTransient);
    }
    Ok(SpeedInterval {
        lower: formula_point(a.lower, split.edge, c.lower),
        upper: formula_point(a.upper, split.edge, c.upper),
    })
}
