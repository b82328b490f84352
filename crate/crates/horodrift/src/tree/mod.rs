//! Weighted trees: lazily generated self-similar families (regular trees and
//! the weighted canopy tree), finite trees loaded from edge lists, effective
//! conductance to infinity with certified truncation bounds, conductance-
//! proportional random walks, and loop-erased-ray horofunctions.
//!
//! Edge conductances only affect transition probabilities; all distances are
//! graph distances, so horofunctions take integer values.

mod conductance;
mod ray;
mod walk;

pub use conductance::{
    conductance_bounds_at_depth, effective_conductance, speed_formula, ConductanceInterval,
    EdgeSplit, SpeedInterval,
};
pub use ray::{loop_erase, ray_horofunction, TreeRay};
pub use walk::{
    canopy_stationary_levels, simulate_tree_walk, simulate_walk_from, tree_theorem_a_check,
    TreeTheoremARun, TreeTheoremAReport, TreeWalkRun,
};

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

/// Handle of a tree vertex. Regular trees address vertices by their child
/// path from the root; canopy vertices carry `(level, horizontal index)`;
/// finite trees use dense indices.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum VertexHandle {
    Path(Vec<u32>),
    Canopy { level: u32, index: u64 },
    Finite(u32),
}

#[derive(Clone, Debug)]
pub enum TreeKind {
    Finite(FiniteTree),
    /// Unit-weight d-regular tree.
    Regular { degree: u32 },
    /// One-ended canopy tree: leaves at level 0, level-n/level-(n+1) edges of
    /// conductance `lambda^n`, with `1 < lambda < 2`.
    Canopy { lambda: f64 },
}

#[derive(Clone, Debug)]
pub struct WeightedTree {
    kind: TreeKind,
}

impl WeightedTree {
    pub fn regular(degree: u32) -> Result<Self> {
        if degree < 3 {
            return Err(Error::param("degree", "need degree >= 3 for transience"));
        }
        Ok(WeightedTree {
            kind: TreeKind::Regular { degree },
        })
    }

    pub fn canopy(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0 && lambda < 2.0) {
            return Err(Error::param(
                "lambda",
                format!("need 1 < lambda < 2, got {lambda}"),
            ));
        }
        Ok(WeightedTree {
            kind: TreeKind::Canopy { lambda },
        })
    }

    pub fn finite(tree: FiniteTree) -> Self {
        WeightedTree {
            kind: TreeKind::Finite(tree),
        }
    }

    pub fn kind(&self) -> &TreeKind {
        &self.kind
    }

    pub fn root(&self) -> VertexHandle {
        match &self.kind {
            TreeKind::Finite(t) => VertexHandle::Finite(t.root),
            TreeKind::Regular { .. } => VertexHandle::Path(Vec::new()),
            TreeKind::Canopy { .. } => VertexHandle::Canopy { level: 0, index: 0 },
        }
    }

    /// Neighbor handles with the conductance of the joining edge. Lists are
    /// symmetric: `w` appears for `v` with the same conductance as `v` for
    /// `w`. Parallel edges of finite trees appear as repeated entries.
    pub fn neighbors(&self, v: &VertexHandle) -> Vec<(VertexHandle, f64)> {
        match (&self.kind, v) {
            (TreeKind::Finite(t), VertexHandle::Finite(i)) => t.adj[*i as usize]
                .iter()
                .map(|&(w, c)| (VertexHandle::Finite(w), c))
                .collect(),
            (TreeKind::Regular { degree }, VertexHandle::Path(path)) => {
                let d = *degree;
                let mut out = Vec::with_capacity(d as usize);
                if path.is_empty() {
                    for j in 0..d {
                        let mut child = path.clone();
                        child.push(j);
                        out.push((VertexHandle::Path(child), 1.0));
                    }
                } else {
                    let mut parent = path.clone();
                    parent.pop();
                    out.push((VertexHandle::Path(parent), 1.0));
                    for j in 0..d - 1 {
                        let mut child = path.clone();
                        child.push(j);
                        out.push((VertexHandle::Path(child), 1.0));
                    }
                }
                out
            }
            (TreeKind::Canopy { lambda }, VertexHandle::Canopy { level, index }) => {
                let mut out = Vec::with_capacity(3);
                out.push((
                    VertexHandle::Canopy {
                        level: level + 1,
                        index: index / 2,
                    },
                    lambda.powi(*level as i32),
                ));
                if *level > 0 {
                    let c = lambda.powi(*level as i32 - 1);
                    out.push((
                        VertexHandle::Canopy {
                            level: level - 1,
                            index: 2 * index,
                        },
                        c,
                    ));
                    out.push((
                        VertexHandle::Canopy {
                            level: level - 1,
                            index: 2 * index + 1,
                        },
                        c,
                    ));
                }
                out
            }
            _ => panic!("handle does not belong to this tree"),
        }
    }

    /// Graph distance between two vertices.
    pub fn graph_dist(&self, a: &VertexHandle, b: &VertexHandle) -> u64 {
        match (&self.kind, a, b) {
            (TreeKind::Finite(t), VertexHandle::Finite(i), VertexHandle::Finite(j)) => {
                t.dist(*i, *j)
            }
            (TreeKind::Regular { .. }, VertexHandle::Path(p), VertexHandle::Path(q)) => {
                let common = p.iter().zip(q.iter()).take_while(|(x, y)| x == y).count();
                (p.len() - common) as u64 + (q.len() - common) as u64
            }
            (TreeKind::Canopy { .. }, a, b) => canopy_dist(a, b),
            _ => panic!("handles do not belong to this tree"),
        }
    }

    pub fn dist_to_root(&self, v: &VertexHandle) -> u64 {
        self.graph_dist(&self.root(), v)
    }

    /// Canopy level of a vertex; `None` for other tree kinds.
    pub fn level(&self, v: &VertexHandle) -> Option<u32> {
        match v {
            VertexHandle::Canopy { level, .. } => Some(*level),
            _ => None,
        }
    }

}

fn canopy_ancestor(level: u32, index: u64, up: u32) -> (u32, u64) {
    (level + up, index >> up)
}

fn canopy_dist(a: &VertexHandle, b: &VertexHandle) -> u64 {
    let (la, ia) = match a {
        VertexHandle::Canopy { level, index } => (*level, *index),
        _ => panic!("not a canopy handle"),
    };
    let (lb, ib) = match b {
        VertexHandle::Canopy { level, index } => (*level, *index),
        _ => panic!("not a canopy handle"),
    };
    // lift to a common level, then to the lowest common ancestor
    let top = la.max(lb);
    let (_, ja) = canopy_ancestor(la, ia, top - la);
    let (_, jb) = canopy_ancestor(lb, ib, top - lb);
    let diff = ja ^ jb;
    let extra = 64 - diff.leading_zeros(); // levels above `top` to the LCA
    let lca = top + extra;
    ((lca - la) + (lca - lb)) as u64
}

/// Finite tree with conductances, loaded from a plain-text edge list
/// (`parentId childId conductance`, one edge per line, root = first line's
/// parent). Leaves can be wired to infinity for conductance computations.
#[derive(Clone, Debug)]
pub struct FiniteTree {
    ids: Vec<String>,
    adj: Vec<Vec<(u32, f64)>>,
    root: u32,
    wired: Vec<bool>,
}

impl FiniteTree {
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S, f64)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::param("edges", "empty edge list"));
        }
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut ids = Vec::new();
        let mut intern = |name: &str, ids: &mut Vec<String>| -> u32 {
            *index.entry(name.to_string()).or_insert_with(|| {
                ids.push(name.to_string());
                (ids.len() - 1) as u32
            })
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b, c) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            if !(*c > 0.0) || !c.is_finite() {
                return Err(Error::param(
                    "conductance",
                    format!("edge ({a}, {b}) has non-positive conductance {c}"),
                ));
            }
            if a == b {
                return Err(Error::param("edges", format!("self-loop at {a}")));
            }
            let ia = intern(a, &mut ids);
            let ib = intern(b, &mut ids);
            pairs.push((ia, ib, *c));
        }
        let n = ids.len();
        // acyclicity: parallel edges between one pair are allowed, any other
        // repeated connection is a cycle
        let mut parent_uf: Vec<u32> = (0..n as u32).collect();
        fn find(uf: &mut Vec<u32>, mut x: u32) -> u32 {
            while uf[x as usize] != x {
                uf[x as usize] = uf[uf[x as usize] as usize];
                x = uf[x as usize];
            }
            x
        }
        let mut seen_pairs: HashMap<(u32, u32), ()> = HashMap::new();
        let mut adj = vec![Vec::new(); n];
        for (ia, ib, c) in pairs {
            let key = (ia.min(ib), ia.max(ib));
            let (ra, rb) = (find(&mut parent_uf, ia), find(&mut parent_uf, ib));
            if ra == rb && !seen_pairs.contains_key(&key) {
                return Err(Error::param(
                    "edges",
                    format!("cycle through {} and {}", ids[ia as usize], ids[ib as usize]),
                ));
            }
            seen_pairs.insert(key, ());
            parent_uf[ra as usize] = rb;
            adj[ia as usize].push((ib, c));
            adj[ib as usize].push((ia, c));
        }
        let root0 = find(&mut parent_uf, 0);
        for v in 0..n as u32 {
            if find(&mut parent_uf, v) != root0 {
                return Err(Error::param(
                    "edges",
                    format!("vertex {} is disconnected from the root", ids[v as usize]),
                ));
            }
        }
        Ok(FiniteTree {
            wired: vec![false; n],
            ids,
            adj,
            root: 0,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut edges: Vec<(String, String, f64)> = Vec::new();
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => {
                    let c: f64 = c.parse().map_err(|e| Error::FileFormat {
                        path: path.display().to_string(),
                        reason: format!("line {}: bad conductance: {e}", lineno + 1),
                    })?;
                    edges.push((a.to_string(), b.to_string(), c));
                }
                _ => {
                    return Err(Error::FileFormat {
                        path: path.display().to_string(),
                        reason: format!(
                            "line {}: expected `parentId childId conductance`",
                            lineno + 1
                        ),
                    })
                }
            }
        }
        Self::from_edges(&edges).map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => Error::FileFormat {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    /// Marks a leaf as wired to infinity. Conductance computations treat it
    /// as a perfect connection to the point at infinity.
    pub fn wire_leaf(&mut self, id: &str) -> Result<()> {
        let idx = self
            .ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::param("id", format!("unknown vertex {id}")))?;
        if self.adj[idx].len() != 1 {
            return Err(Error::param("id", format!("{id} is not a leaf")));
        }
        self.wired[idx] = true;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id_of(&self, handle: &VertexHandle) -> &str {
        match handle {
            VertexHandle::Finite(i) => &self.ids[*i as usize],
            _ => panic!("not a finite-tree handle"),
        }
    }

    pub fn handle_of(&self, id: &str) -> Option<VertexHandle> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| VertexHandle::Finite(i as u32))
    }

    pub(crate) fn is_wired(&self, v: u32) -> bool {
        self.wired[v as usize]
    }

    fn dist(&self, a: u32, b: u32) -> u64 {
        if a == b {
            return 0;
        }
        // BFS; trees here are small
        let mut dist = vec![u64::MAX; self.ids.len()];
        let mut queue = std::collections::VecDeque::new();
        dist[a as usize] = 0;
        queue.push_back(a);
        while let Some(v) = queue.pop_front() {
            if v == b {
                return dist[v as usize];
            }
            for &(w, _) in &self.adj[v as usize] {
                if dist[w as usize] == u64::MAX {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        unreachable!("tree is connected")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_tree_structure() {
        let t = WeightedTree::regular(3).unwrap();
        let root = t.root();
        let nbrs = t.neighbors(&root);
        assert_eq!(nbrs.len(), 3);
        let (child, c) = &nbrs[0];
        assert_eq!(*c, 1.0);
        let back = t.neighbors(child);
        assert_eq!(back.len(), 3);
        assert!(back.iter().any(|(w, _)| *w == root));
        assert_eq!(t.graph_dist(&root, child), 1);
        assert!(WeightedTree::regular(2).is_err());
    }

    #[test]
    fn neighbor_lists_are_symmetric() {
        let trees = [
            WeightedTree::regular(4).unwrap(),
            WeightedTree::canopy(1.5).unwrap(),
        ];
        for t in &trees {
            let mut frontier = vec![t.root()];
            for _ in 0..3 {
                let mut next = Vec::new();
                for v in &frontier {
                    for (w, c) in t.neighbors(v) {
                        let back = t.neighbors(&w);
                        let found = back
                            .iter()
                            .filter(|(x, cb)| x == v && (cb - c).abs() < 1e-12)
                            .count();
                        assert!(found >= 1, "no symmetric edge for {v:?} -> {w:?}");
                        next.push(w);
                    }
                }
                frontier = next;
            }
        }
    }

    #[test]
    fn canopy_structure_and_distances() {
        let t = WeightedTree::canopy(1.5).unwrap();
        let root = t.root(); // leaf (0, 0)
        let nbrs = t.neighbors(&root);
        assert_eq!(nbrs.len(), 1, "leaves only touch their parent");
        assert_eq!(nbrs[0].1, 1.0); // lambda^0

        let v = VertexHandle::Canopy { level: 1, index: 0 };
        let nbrs = t.neighbors(&v);
        assert_eq!(nbrs.len(), 3);
        // parent edge has conductance lambda^1
        assert!((nbrs[0].1 - 1.5).abs() < 1e-12);

        // distance (0,2) to root: up to level 2 and down
        let w = VertexHandle::Canopy { level: 0, index: 2 };
        assert_eq!(t.graph_dist(&root, &w), 4);
        let u = VertexHandle::Canopy { level: 1, index: 1 };
        assert_eq!(t.graph_dist(&root, &u), 3);
        assert_eq!(t.graph_dist(&w, &u), 1);
        assert_eq!(t.dist_to_root(&VertexHandle::Canopy { level: 3, index: 0 }), 3);
        assert_eq!(t.level(&u), Some(1));
        assert!(WeightedTree::canopy(1.0).is_err());
        assert!(WeightedTree::canopy(2.0).is_err());
    }

    #[test]
    fn finite_tree_io_and_distances() {
        let t = FiniteTree::from_edges(&[
            ("root", "a", 1.0),
            ("root", "b", 2.0),
            ("a", "c", 0.5),
        ])
        .unwrap();
        assert_eq!(t.len(), 4);
        let tree = WeightedTree::finite(t);
        let root = tree.root();
        assert_eq!(tree.neighbors(&root).len(), 2);
        let (c_handle, _) = tree
            .neighbors(&tree.neighbors(&root)[0].0)
            .into_iter()
            .find(|(w, _)| *w != root)
            .unwrap();
        assert_eq!(tree.graph_dist(&root, &c_handle), 2);

        assert!(FiniteTree::from_edges(&[("a", "b", -1.0)]).is_err());
        assert!(FiniteTree::from_edges(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)])
            .is_err());
        assert!(FiniteTree::from_edges(&[("a", "b", 1.0), ("c", "d", 1.0)]).is_err());
        // parallel edges are allowed
        assert!(FiniteTree::from_edges(&[("a", "b", 1.0), ("a", "b", 1.0)]).is_ok());
    }

    #[test]
    fn finite_tree_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.txt");
        std::fs::write(&path, "# comment\nroot a 1.0\nroot b 2.5\na c 0.25\n").unwrap();
        let t = FiniteTree::from_file(&path).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.handle_of("root"), Some(VertexHandle::Finite(0)));
        std::fs::write(&path, "root a\n").unwrap();
        assert!(FiniteTree::from_file(&path).is_err());
    }
}
