//! Conductance-proportional random walks on weighted trees, the canopy level
//! chain, and the horofunction route to the walk speed.

use super::ray::{ray_horofunction, TreeRay};
use super::{TreeKind, VertexHandle, WeightedTree};
use crate::drift::{stationarity_diagnostic, Estimate, IncrementSeries, StationarityReport};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One walk's recorded checkpoints and counters.
#[derive(Clone, Debug)]
pub struct TreeWalkRun {
    /// `(step, graph distance to the start vertex)`.
    pub checkpoints: Vec<(u64, u64)>,
    /// Canopy level at each checkpoint.
    pub levels: Option<Vec<(u64, u32)>>,
    pub final_vertex: VertexHandle,
    pub final_distance: u64,
    /// Moves made from canopy vertices at level >= 1, and how many of those
    /// went up a level.
    pub moves_from_positive: u64,
    pub up_moves_from_positive: u64,
    /// Last step at which the walk sat at its start vertex.
    pub last_start_visit: u64,
    /// Full vertex sequence (start included), when requested.
    pub path: Option<Vec<VertexHandle>>,
}

/// Walk from the tree's root.
pub fn simulate_tree_walk(
    tree: &WeightedTree,
    n_steps: u64,
    checkpoint_stride: u64,
    seed: u64,
) -> Result<TreeWalkRun> {
    simulate_walk_from(tree, &tree.root(), n_steps, checkpoint_stride, seed, false)
}

/// Walk from an arbitrary start vertex, with transitions proportional to the
/// edge conductances. Graph distances are measured to the start vertex.
pub fn simulate_walk_from(
    tree: &WeightedTree,
    start: &VertexHandle,
    n_steps: u64,
    checkpoint_stride: u64,
    seed: u64,
    record_path: bool,
) -> Result<TreeWalkRun> {
    if n_steps < 1 {
        return Err(Error::param("n_steps", "need at least one step"));
    }
    if checkpoint_stride == 0 {
        return Err(Error::param("checkpoint_stride", "must be positive"));
    }
    let mut rng = stream(seed, Domain::TreeWalk, 0);
    match tree.kind() {
        TreeKind::Regular { degree } => Ok(walk_regular(
            tree,
            *degree,
            start,
            n_steps,
            checkpoint_stride,
            &mut rng,
            record_path,
        )),
        TreeKind::Canopy { lambda } => Ok(walk_canopy(
            tree,
            *lambda,
            start,
            n_steps,
            checkpoint_stride,
            &mut rng,
            record_path,
        )),
        TreeKind::Finite(_) => Ok(walk_finite(
            tree,
            start,
            n_steps,
            checkpoint_stride,
            &mut rng,
            record_path,
        )),
    }
}

fn walk_regular(
    tree: &WeightedTree,
    degree: u32,
    start: &VertexHandle,
    n_steps: u64,
    stride: u64,
    rng: &mut impl Rng,
    record_path: bool,
) -> TreeWalkRun {
    let start_path = match start {
        VertexHandle::Path(p) => p.clone(),
        _ => panic!("handle does not belong to this tree"),
    };
    assert!(
        start_path.is_empty(),
        "regular-tree walks start at the root"
    );
    let d = degree as usize;
    let mut path: Vec<u32> = Vec::new();
    let mut checkpoints = Vec::with_capacity((n_steps / stride + 2) as usize);
    let mut recorded = record_path.then(|| vec![VertexHandle::Path(Vec::new())]);
    let mut last_start_visit = 0;
    for step in 1..=n_steps {
        if path.is_empty() {
            path.push(rng.gen_range(0..d) as u32);
        } else {
            let choice = rng.gen_range(0..d);
            if choice == 0 {
                path.pop();
            } else {
                path.push(choice as u32 - 1);
            }
        }
        if path.is_empty() {
            last_start_visit = step;
        }
        if let Some(rec) = recorded.as_mut() {
            rec.push(VertexHandle::Path(path.clone()));
        }
        if step % stride == 0 || step == n_steps {
            checkpoints.push((step, path.len() as u64));
        }
    }
    let _ = tree;
    TreeWalkRun {
        checkpoints,
        levels: None,
        final_distance: path.len() as u64,
        final_vertex: VertexHandle::Path(path),
        moves_from_positive: 0,
        up_moves_from_positive: 0,
        last_start_visit,
        path: recorded,
    }
}

fn walk_canopy(
    tree: &WeightedTree,
    lambda: f64,
    start: &VertexHandle,
    n_steps: u64,
    stride: u64,
    rng: &mut impl Rng,
    record_path: bool,
) -> TreeWalkRun {
    let (mut level, mut index) = match start {
        VertexHandle::Canopy { level, index } => (*level, *index),
        _ => panic!("handle does not belong to this tree"),
    };
    let up_prob = lambda / (2.0 + lambda);
    let mut checkpoints = Vec::with_capacity((n_steps / stride + 2) as usize);
    let mut levels = Vec::with_capacity(checkpoints.capacity());
    let mut recorded = record_path.then(|| vec![start.clone()]);
    let mut moves_from_positive = 0;
    let mut up_moves = 0;
    let mut last_start_visit = 0;
    for step in 1..=n_steps {
        if level == 0 {
            level = 1;
            index /= 2;
        } else {
            moves_from_positive += 1;
            let u: f64 = rng.gen();
            if u < up_prob {
                up_moves += 1;
                level += 1;
                index /= 2;
            } else {
                // children get the remaining mass in equal halves
                let child = u >= up_prob + (1.0 - up_prob) / 2.0;
                level -= 1;
                index = 2 * index + child as u64;
            }
        }
        let here = VertexHandle::Canopy { level, index };
        if here == *start {
            last_start_visit = step;
        }
        if let Some(rec) = recorded.as_mut() {
            rec.push(here.clone());
        }
        if step % stride == 0 || step == n_steps {
            checkpoints.push((step, tree.graph_dist(start, &here)));
            levels.push((step, level));
        }
    }
    TreeWalkRun {
        final_distance: tree.graph_dist(start, &VertexHandle::Canopy { level, index }),
        checkpoints,
        levels: Some(levels),
        final_vertex: VertexHandle::Canopy { level, index },
        moves_from_positive,
        up_moves_from_positive: up_moves,
        last_start_visit,
        path: recorded,
    }
}

fn walk_finite(
    tree: &WeightedTree,
    start: &VertexHandle,
    n_steps: u64,
    stride: u64,
    rng: &mut impl Rng,
    record_path: bool,
) -> TreeWalkRun {
    let finite = match tree.kind() {
        TreeKind::Finite(t) => t,
        _ => unreachable!(),
    };
    let n = finite.len();
    // cumulative conductances per vertex for O(log deg) sampling
    let mut cumulative: Vec<Vec<(f64, u32)>> = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let mut acc = 0.0;
        let entries = tree
            .neighbors(&VertexHandle::Finite(v))
            .into_iter()
            .map(|(w, c)| {
                acc += c;
                let idx = match w {
                    VertexHandle::Finite(i) => i,
                    _ => unreachable!(),
                };
                (acc, idx)
            })
            .collect();
        cumulative.push(entries);
    }
    // BFS distances from the start
    let start_idx = match start {
        VertexHandle::Finite(i) => *i,
        _ => panic!("handle does not belong to this tree"),
    };
    let mut dist = vec![u64::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start_idx as usize] = 0;
    queue.push_back(start_idx);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in &finite.adj[v as usize] {
            if dist[w as usize] == u64::MAX {
                dist[w as usize] = dist[v as usize] + 1;
                queue.push_back(w);
            }
        }
    }

    let mut here = start_idx;
    let mut checkpoints = Vec::new();
    let mut recorded = record_path.then(|| vec![VertexHandle::Finite(start_idx)]);
    let mut last_start_visit = 0;
    for step in 1..=n_steps {
        let table = &cumulative[here as usize];
        let total = table.last().map(|&(a, _)| a).unwrap_or(0.0);
        let u: f64 = rng.gen_range(0.0..total);
        let pos = table.partition_point(|&(a, _)| a <= u);
        here = table[pos.min(table.len() - 1)].1;
        if here == start_idx {
            last_start_visit = step;
        }
        if let Some(rec) = recorded.as_mut() {
            rec.push(VertexHandle::Finite(here));
        }
        if step % stride == 0 || step == n_steps {
            checkpoints.push((step, dist[here as usize]));
        }
    }
    TreeWalkRun {
        checkpoints,
        levels: None,
        final_distance: dist[here as usize],
        final_vertex: VertexHandle::Finite(here),
        moves_from_positive: 0,
        up_moves_from_positive: 0,
        last_start_visit,
        path: recorded,
    }
}

/// Stationary distribution of the canopy level chain, solved numerically on
/// `{0, ..., L}` with reflecting truncation, increasing `L` from
/// `trunc_levels` until the total-variation change drops below `tol`.
pub fn canopy_stationary_levels(lambda: f64, trunc_levels: usize, tol: f64) -> Result<Vec<f64>> {
    if !(lambda > 1.0 && lambda < 2.0) {
        return Err(Error::param(
            "lambda",
            format!("need 1 < lambda < 2, got {lambda}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let mut len = trunc_levels.max(4);
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let pi = stationary_truncated(lambda, len, (tol * 1e-3).min(1e-12));
        if let Some(p) = prev {
            let tv = 0.5
                * pi.iter()
                    .zip(p.iter().chain(std::iter::repeat(&0.0)))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            if tv <= tol {
                return Ok(pi);
            }
        }
        prev = Some(pi);
        len += 8;
        if len > 512 {
            return Err(Error::param(
                "tol",
                "level distribution did not stabilize below the requested tolerance",
            ));
        }
    }
}

/// Power iteration on the lazy version of the truncated level chain (the
/// plain chain has period two).
fn stationary_truncated(lambda: f64, len: usize, inner_tol: f64) -> Vec<f64> {
    let up = lambda / (2.0 + lambda);
    let down = 2.0 / (2.0 + lambda);
    let mut pi = vec![1.0 / (len + 1) as f64; len + 1];
    let mut next = vec![0.0; len + 1];
    for _ in 0..200_000 {
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for k in 0..=len {
            let mass = pi[k];
            if k == 0 {
                next[1] += mass;
            } else if k == len {
                next[len - 1] += mass; // upward edge truncated
            } else {
                next[k + 1] += mass * up;
                next[k - 1] += mass * down;
            }
        }
        // lazy mixing step
        let mut tv = 0.0;
        for k in 0..=len {
            let v = 0.5 * pi[k] + 0.5 * next[k];
            tv += (v - pi[k]).abs();
            pi[k] = v;
        }
        if tv * 0.5 <= inner_tol {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= total;
    }
    pi
}

/// Geodesic between two vertices as an explicit handle list (inclusive).
pub(crate) fn geodesic(tree: &WeightedTree, a: &VertexHandle, b: &VertexHandle) -> Vec<VertexHandle> {
    match (a, b) {
        (VertexHandle::Path(pa), VertexHandle::Path(pb)) => {
            let common = pa.iter().zip(pb.iter()).take_while(|(x, y)| x == y).count();
            let mut out = Vec::with_capacity(pa.len() + pb.len() - 2 * common + 1);
            for k in (common..=pa.len()).rev() {
                out.push(VertexHandle::Path(pa[..k].to_vec()));
            }
            for k in common + 1..=pb.len() {
                out.push(VertexHandle::Path(pb[..k].to_vec()));
            }
            out
        }
        (VertexHandle::Canopy { .. }, VertexHandle::Canopy { .. }) => {
            let climb = |mut v: (u32, u64), stop_level: u32| {
                let mut chain = vec![v];
                while v.0 < stop_level {
                    v = (v.0 + 1, v.1 / 2);
                    chain.push(v);
                }
                chain
            };
            let (la, ia) = match a {
                VertexHandle::Canopy { level, index } => (*level, *index),
                _ => unreachable!(),
            };
            let (lb, ib) = match b {
                VertexHandle::Canopy { level, index } => (*level, *index),
                _ => unreachable!(),
            };
            let top = la.max(lb);
            let ja = ia >> (top - la);
            let jb = ib >> (top - lb);
            let extra = 64 - (ja ^ jb).leading_zeros();
            let lca = top + extra;
            let up = climb((la, ia), lca);
            let mut down = climb((lb, ib), lca);
            down.pop();
            let mut out: Vec<VertexHandle> = up
                .into_iter()
                .map(|(level, index)| VertexHandle::Canopy { level, index })
                .collect();
            out.extend(
                down.into_iter()
                    .rev()
                    .map(|(level, index)| VertexHandle::Canopy { level, index }),
            );
            out
        }
        _ => {
            // finite trees: BFS parent chase
            let finite_tree = tree;
            let mut frontier = vec![a.clone()];
            let mut parent: std::collections::HashMap<VertexHandle, VertexHandle> =
                std::collections::HashMap::new();
            parent.insert(a.clone(), a.clone());
            'bfs: while !frontier.is_empty() {
                let mut next = Vec::new();
                for v in frontier {
                    for (w, _) in finite_tree.neighbors(&v) {
                        if !parent.contains_key(&w) {
                            parent.insert(w.clone(), v.clone());
                            if w == *b {
                                break 'bfs;
                            }
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            let mut out = vec![b.clone()];
            let mut cur = b.clone();
            while cur != *a {
                cur = parent[&cur].clone();
                out.push(cur.clone());
            }
            out.reverse();
            out
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeTheoremAReport {
    pub speed: f64,
    pub speed_std_error: f64,
    /// `-mean xi(x_1)` with xi the loop-erased-ray horofunction of an
    /// independent backward walk.
    pub horofunction_estimate: f64,
    pub horofunction_std_error: f64,
    pub discrepancy: f64,
    pub joint_std_error: f64,
    pub n_steps: u64,
    pub trials: u64,
    pub increment_stationarity: StationarityReport,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct TreeTheoremARun {
    pub report: TreeTheoremAReport,
    /// Lead trial's per-step horofunction increments.
    pub increments: IncrementSeries,
    /// Lead trial's backward checkpoint distances (escape diagnostics).
    pub backward_distances: Vec<f64>,
}

/// Empirical check of `speed = -E[xi(x_1)]` on a transient tree.
///
/// Regular trees are vertex-transitive, so the walk is rooted at the fixed
/// root. The canopy environment is stationary only under the level
/// distribution of its level chain, so each trial roots the walk at a vertex
/// whose level is drawn from the numerically solved distribution.
pub fn tree_theorem_a_check(
    tree: &WeightedTree,
    n_steps: u64,
    trials: u64,
    seed: u64,
) -> Result<TreeTheoremARun> {
    if n_steps < 1000 {
        return Err(Error::param("n_steps", "need at least 1000 steps"));
    }
    if trials < 2 {
        return Err(Error::param("trials", "need at least two trials"));
    }
    let level_cdf: Option<Vec<f64>> = match tree.kind() {
        TreeKind::Regular { .. } => None,
        TreeKind::Canopy { lambda } => {
            let p = canopy_stationary_levels(*lambda, 16, 1e-10)?;
            let mut acc = 0.0;
            Some(
                p.iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect(),
            )
        }
        TreeKind::Finite(_) => {
            return Err(Error::param(
                "tree",
                "finite trees are recurrent; the check needs a transient kind",
            ))
        }
    };

    struct Trial {
        speed: f64,
        neg_xi_first_step: f64,
        lead: Option<(Vec<f64>, Vec<f64>)>, // (increments, backward distances)
    }

    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let root = match &level_cdf {
                None => tree.root(),
                Some(cdf) => {
                    let mut rng = stream(seed, Domain::TreeRootLevel, t);
                    let u: f64 = rng.gen();
                    let level = cdf.partition_point(|&c| c <= u) as u32;
                    VertexHandle::Canopy { level, index: 0 }
                }
            };
            let is_lead = t == 0;

            // backward walk defines the ray (its loop erasure is the
            // geodesic from the root to its endpoint)
            let backward = simulate_walk_from_with_domain(
                tree,
                &root,
                n_steps,
                64,
                seed,
                t,
                Domain::TreeBackward,
            );
            let ray = TreeRay {
                vertices: geodesic(tree, &root, &backward.final_vertex),
                stable_len: 0,
            };

            // independent first step, conductance-proportional
            let mut rng_x = stream(seed, Domain::TreeFirstStep, t);
            let nbrs = tree.neighbors(&root);
            let total: f64 = nbrs.iter().map(|(_, c)| c).sum();
            let mut u: f64 = rng_x.gen_range(0.0..total);
            let mut first = nbrs[0].0.clone();
            for (w, c) in &nbrs {
                if u < *c {
                    first = w.clone();
                    break;
                }
                u -= c;
            }
            let neg_xi = -ray_horofunction(tree, &ray, &first) as f64;

            // forward walk for the speed estimate; the lead trial also logs
            // per-step horofunction increments against the fixed ray
            let forward = simulate_walk_from_with_domain(
                tree,
                &root,
                n_steps,
                64,
                seed,
                t,
                Domain::TreeWalk,
            );
            let lead = is_lead.then(|| {
                let fwd_path = simulate_walk_path(tree, &root, n_steps, seed, t);
                let mut incs = Vec::with_capacity(n_steps as usize);
                let mut prev = 0i64;
                for v in fwd_path.iter().skip(1) {
                    let xi = ray_horofunction(tree, &ray, v);
                    incs.push((prev - xi) as f64);
                    prev = xi;
                }
                let back_d: Vec<f64> =
                    backward.checkpoints.iter().map(|&(_, d)| d as f64).collect();
                (incs, back_d)
            });

            Trial {
                speed: forward.final_distance as f64 / n_steps as f64,
                neg_xi_first_step: neg_xi,
                lead,
            }
        })
        .collect();

    let speeds: Vec<f64> = results.iter().map(|t| t.speed).collect();
    let horo: Vec<f64> = results.iter().map(|t| t.neg_xi_first_step).collect();
    let speed_est = Estimate::from_samples(&speeds);
    let horo_est = Estimate::from_samples(&horo);
    let (increments, backward_distances) = results
        .into_iter()
        .next()
        .and_then(|t| t.lead)
        .expect("trial 0 records the lead series");

    let windows = (increments.len() / 1000).clamp(2, 50);
    let stationarity = stationarity_diagnostic(&increments, windows)?;
    let discrepancy = (horo_est.value - speed_est.value).abs();
    let joint = (speed_est.std_error.powi(2) + horo_est.std_error.powi(2)).sqrt();
    let passed = discrepancy <= 3.0 * joint && !stationarity.drift_flagged;

    Ok(TreeTheoremARun {
        report: TreeTheoremAReport {
            speed: speed_est.value,
            speed_std_error: speed_est.std_error,
            horofunction_estimate: horo_est.value,
            horofunction_std_error: horo_est.std_error,
            discrepancy,
            joint_std_error: joint,
            n_steps,
            trials,
            increment_stationarity: stationarity,
            passed,
        },
        increments: IncrementSeries {
            values: increments,
            checkpoint_stride: 1,
        },
        backward_distances,
    })
}

/// Same walk driver with an explicit stream domain and trial index.
fn simulate_walk_from_with_domain(
    tree: &WeightedTree,
    start: &VertexHandle,
    n_steps: u64,
    stride: u64,
    seed: u64,
    trial: u64,
    domain: Domain,
) -> TreeWalkRun {
    let mut rng = stream(seed, domain, trial);
    match tree.kind() {
        TreeKind::Regular { degree } => {
            walk_regular_rooted(tree, *degree, start, n_steps, stride, &mut rng, false)
        }
        TreeKind::Canopy { lambda } => {
            walk_canopy(tree, *lambda, start, n_steps, stride, &mut rng, false)
        }
        TreeKind::Finite(_) => walk_finite(tree, start, n_steps, stride, &mut rng, false),
    }
}

/// Vertex sequence of the forward walk, re-generated from the same stream the
/// speed estimate used (identical trajectory by construction).
fn simulate_walk_path(
    tree: &WeightedTree,
    start: &VertexHandle,
    n_steps: u64,
    seed: u64,
    trial: u64,
) -> Vec<VertexHandle> {
    let mut rng = stream(seed, Domain::TreeWalk, trial);
    let run = match tree.kind() {
        TreeKind::Regular { degree } => {
            walk_regular_rooted(tree, *degree, start, n_steps, u64::MAX, &mut rng, true)
        }
        TreeKind::Canopy { lambda } => {
            walk_canopy(tree, *lambda, start, n_steps, u64::MAX, &mut rng, true)
        }
        TreeKind::Finite(_) => walk_finite(tree, start, n_steps, u64::MAX, &mut rng, true),
    };
    run.path.unwrap()
}

/// Regular-tree walk that also accepts non-root starts (used only through
/// the theorem-A driver, where the root is the fixed start anyway).
fn walk_regular_rooted(
    tree: &WeightedTree,
    degree: u32,
    start: &VertexHandle,
    n_steps: u64,
    stride: u64,
    rng: &mut impl Rng,
    record_path: bool,
) -> TreeWalkRun {
    walk_regular(tree, degree, start, n_steps, stride, rng, record_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_walk_speed_matches_formula() {
        for (d, expect) in [(3u32, 1.0 / 3.0), (4, 0.5), (5, 0.6)] {
            let tree = WeightedTree::regular(d).unwrap();
            let speeds: Vec<f64> = (0..20)
                .map(|s| {
                    let run = simulate_tree_walk(&tree, 20_000, 64, s).unwrap();
                    run.final_distance as f64 / 20_000.0
                })
                .collect();
            let est = Estimate::from_samples(&speeds);
            assert!(
                (est.value - expect).abs() <= 3.0 * est.std_error + 0.01,
                "d = {d}: {est:?}"
            );
        }
    }

    #[test]
    fn canopy_walk_has_vanishing_speed_and_up_rate() {
        let tree = WeightedTree::canopy(1.5).unwrap();
        let run = simulate_tree_walk(&tree, 100_000, 64, 5).unwrap();
        let speed = run.final_distance as f64 / 100_000.0;
        assert!(speed <= 0.02, "speed {speed}");
        let up_rate = run.up_moves_from_positive as f64 / run.moves_from_positive as f64;
        let expect = 1.5 / 3.5;
        let se = (expect * (1.0 - expect) / run.moves_from_positive as f64).sqrt();
        assert!((up_rate - expect).abs() <= 3.0 * se + 1e-3, "rate {up_rate}");
    }

    #[test]
    fn kingman_estimator_recovers_tree_speed() {
        // batch means over one long trajectory's checkpoints agree with the
        // electrical value 1/3 on the 3-regular tree
        use crate::drift::kingman_speed_from_checkpoints;
        let tree = WeightedTree::regular(3).unwrap();
        let run = simulate_tree_walk(&tree, 200_000, 64, 2).unwrap();
        let mut distances = vec![0.0];
        distances.extend(run.checkpoints.iter().map(|&(_, d)| d as f64));
        let est = kingman_speed_from_checkpoints(&distances, 64, 20).unwrap();
        assert!(
            (est.value - 1.0 / 3.0).abs() <= 3.0 * est.std_error + 0.01,
            "{est:?}"
        );
    }

    #[test]
    fn canopy_stationary_levels_solution() {
        let lambda = 1.5;
        let p = canopy_stationary_levels(lambda, 16, 1e-10).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // detailed-balance closed form as the independent oracle:
        // p_0 = 1/Z, p_k = ((2+lambda)/2) (lambda/2)^{k-1} / Z,
        // Z = 1 + (2+lambda)/(2-lambda)
        let z = 1.0 + (2.0 + lambda) / (2.0 - lambda);
        let closed = |k: usize| {
            if k == 0 {
                1.0 / z
            } else {
                (2.0 + lambda) / 2.0 * (lambda / 2.0f64).powi(k as i32 - 1) / z
            }
        };
        let tv: f64 = 0.5
            * p.iter()
                .enumerate()
                .map(|(k, v)| (v - closed(k)).abs())
                .sum::<f64>();
        assert!(tv < 1e-8, "tv {tv}");
        // decreasing beyond level 1
        for k in 1..p.len() - 1 {
            assert!(p[k + 1] <= p[k] + 1e-12);
        }
        assert!(canopy_stationary_levels(2.5, 16, 1e-6).is_err());
    }

    #[test]
    fn canopy_empirical_levels_match_solution() {
        let lambda = 1.5;
        let tree = WeightedTree::canopy(lambda).unwrap();
        let mut counts = std::collections::HashMap::new();
        let run = simulate_tree_walk(&tree, 1_000_000, 1, 9).unwrap();
        let total = run.levels.as_ref().unwrap().len() as f64;
        for &(_, l) in run.levels.as_ref().unwrap() {
            *counts.entry(l as usize).or_insert(0.0) += 1.0 / total;
        }
        let p = canopy_stationary_levels(lambda, 16, 1e-10).unwrap();
        let mut tv = 0.0;
        for k in 0..p.len().max(counts.len()) {
            let emp = counts.get(&k).copied().unwrap_or(0.0);
            let sol = p.get(k).copied().unwrap_or(0.0);
            tv += 0.5 * (emp - sol).abs();
        }
        assert!(tv <= 0.02, "tv {tv}");
    }

    #[test]
    fn canopy_transience_return_rate() {
        // walks of length 1e5: few return to the start after step 1e4
        let tree = WeightedTree::canopy(1.5).unwrap();
        let returns = (0..100)
            .into_par_iter()
            .filter(|&s| {
                let run = simulate_tree_walk(&tree, 100_000, 4096, s as u64).unwrap();
                run.last_start_visit > 10_000
            })
            .count();
        assert!(returns <= 5, "{returns} late returns out of 100");
    }

    #[test]
    fn theorem_a_regular_tree() {
        let tree = WeightedTree::regular(3).unwrap();
        let run = tree_theorem_a_check(&tree, 2000, 400, 17).unwrap();
        let rep = &run.report;
        assert!((rep.speed - 1.0 / 3.0).abs() <= 3.0 * rep.speed_std_error + 0.01);
        assert!(rep.discrepancy <= 3.0 * rep.joint_std_error, "{rep:?}");
        assert!(!rep.increment_stationarity.drift_flagged);
        // first-step horofunction values are +-1 on unit-edge trees
        for v in run.increments.values.iter().take(100) {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn theorem_a_canopy_zero() {
        let tree = WeightedTree::canopy(1.5).unwrap();
        let run = tree_theorem_a_check(&tree, 2000, 400, 23).unwrap();
        let rep = &run.report;
        assert!(
            rep.horofunction_estimate.abs() <= 3.0 * rep.horofunction_std_error + 0.02,
            "{rep:?}"
        );
        assert!(rep.speed <= 0.05, "{rep:?}");
    }

    #[test]
    fn geodesic_construction() {
        let tree = WeightedTree::regular(3).unwrap();
        let a = VertexHandle::Path(vec![0, 1]);
        let b = VertexHandle::Path(vec![0, 0, 1]);
        let g = geodesic(&tree, &a, &b);
        assert_eq!(g.len() as u64 - 1, tree.graph_dist(&a, &b));
        assert_eq!(g[0], a);
        assert_eq!(*g.last().unwrap(), b);

        let tree = WeightedTree::canopy(1.5).unwrap();
        let a = VertexHandle::Canopy { level: 0, index: 0 };
        let b = VertexHandle::Canopy { level: 0, index: 7 };
        let g = geodesic(&tree, &a, &b);
        assert_eq!(g.len() as u64 - 1, tree.graph_dist(&a, &b));
        assert_eq!(g[0], a);
        assert_eq!(*g.last().unwrap(), b);
        for w in g.windows(2) {
            assert_eq!(tree.graph_dist(&w[0], &w[1]), 1);
        }
    }
}
