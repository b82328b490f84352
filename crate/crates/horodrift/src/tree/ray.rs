//! Loop erasure and the horofunction attached to a ray.

use super::{VertexHandle, WeightedTree};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Simple path from the root toward the escape direction of a walk. On a
/// tree the loop erasure of a path is the geodesic between its endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeRay {
    pub vertices: Vec<VertexHandle>,
    /// Length of the leading prefix not revisited during the second half of
    /// the recorded path: the part of the ray already stable at this length,
    /// final provided the walk never returns to it.
    pub stable_len: usize,
}

/// Erases all loops from a path starting at the root: keeps the vertices
/// whose last visit times are increasing. On a tree the result is the unique
/// simple path from the start to the final vertex.
pub fn loop_erase(path: &[VertexHandle]) -> Result<TreeRay> {
    if path.is_empty() {
        return Err(Error::param("path", "empty path"));
    }
    let mut stack: Vec<VertexHandle> = Vec::new();
    let mut position: HashMap<VertexHandle, usize> = HashMap::new();
    let mut last_visit: HashMap<VertexHandle, usize> = HashMap::new();
    for (step, v) in path.iter().enumerate() {
        last_visit.insert(v.clone(), step);
        if let Some(&pos) = position.get(v) {
            for dropped in stack.drain(pos + 1..) {
                position.remove(&dropped);
            }
        } else {
            position.insert(v.clone(), stack.len());
            stack.push(v.clone());
        }
    }
    let half = path.len() / 2;
    let stable_len = stack
        .iter()
        .take_while(|v| last_visit[*v] < half)
        .count();
    Ok(TreeRay {
        vertices: stack,
        stable_len,
    })
}

/// Value at `v` of the horofunction attached to `ray` (normalized to vanish
/// at the ray's start): `j - d(r_j, v)` where `r_j` is the last ray vertex on
/// the geodesic from the start to `v` (the confluence point). Equals the
/// limit of `d(r_n, start) - d(r_n, v)` once the ray passes the confluence.
pub fn ray_horofunction(tree: &WeightedTree, ray: &TreeRay, v: &VertexHandle) -> i64 {
    assert!(!ray.vertices.is_empty(), "ray needs at least its start");
    let base = &ray.vertices[0];
    let d0 = tree.graph_dist(base, v) as i64;
    // ray vertices on the geodesic form a prefix; binary search its end
    let on_geodesic =
        |j: usize| j as i64 + tree.graph_dist(&ray.vertices[j], v) as i64 == d0;
    let (mut lo, mut hi) = (0usize, ray.vertices.len() - 1);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if on_geodesic(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    2 * lo as i64 - d0
}
