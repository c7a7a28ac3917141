use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{
    center_cost, kahan_sum, pow_from_sq, CenterSolution, CostVector, PointSet,
};

use super::{improvement_below, AdamW, EmptyClusterPolicy, SolveTrace, SolverOptions, Stall};

fn cluster_cost(cluster: &[&[f64]], z: u32, s: &[f64]) -> f64 {
    kahan_sum(
        cluster
            .iter()
            .map(|p| pow_from_sq(linalg::dist_sq(p, s), z)),
    )
}

/// `f(s) = Σ ‖p - s‖^z` and its gradient `Σ z ‖p - s‖^{z-2} (s - p)`.
/// At `p = s` the (sub)gradient contribution is zero.
fn cost_and_grad(cluster: &[&[f64]], z: u32, s: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let zf = z as f64;
    let mut total = 0.0;
    for p in cluster {
        let d2 = linalg::dist_sq(p, s);
        total += pow_from_sq(d2, z);
        if d2 == 0.0 {
            continue;
        }
        let w = zf * pow_from_sq(d2, z).max(0.0) / d2;
        for ((g, si), pi) in grad.iter_mut().zip(s).zip(p.iter()) {
            *g += w * (si - pi);
        }
    }
    total
}

/// Moves a single center towards the minimiser of `Σ ‖p - s‖^z` with AdamW
/// steps. Returns the best iterate seen, which is never worse than `init`.
pub fn center_update_gd(
    cluster: &[&[f64]],
    z: u32,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if z == 0 {
        return Err(Error::domain("z must be a positive integer"));
    }
    for p in cluster {
        if p.len() != init.len() {
            return Err(Error::DimensionMismatch {
                expected: init.len(),
                actual: p.len(),
            });
        }
    }
    let mut x = init.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut best = x.clone();
    let mut best_cost = f64::INFINITY;
    let mut opt = AdamW::new(x.len(), opts.gd_learning_rate, opts.gd_weight_decay);
    let mut stall = Stall::new(cluster_cost(cluster, z, init), opts.gd_patience);
    for _ in 0..opts.gd_iters {
        let f = cost_and_grad(cluster, z, &x, &mut grad);
        if f < best_cost {
            best_cost = f;
            best.copy_from_slice(&x);
        }
        if stall.observe(f) || grad.iter().all(|g| *g == 0.0) {
            break;
        }
        opt.step(&mut x, &grad);
    }
    let f = cost_and_grad(cluster, z, &x, &mut grad);
    if f < best_cost {
        best = x;
    }
    Ok(best)
}

fn members<'a>(points: &'a PointSet, labels: &[usize], k: usize) -> Vec<Vec<&'a [f64]>> {
    let mut out = vec![Vec::new(); k];
    for (p, &l) in points.rows().zip(labels) {
        out[l].push(p);
    }
    out
}

/// Indices of the worst-served points, worst first (ties by lower index).
pub(crate) fn farthest_points(cv: &CostVector, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cv.len()).collect();
    idx.sort_by(|&a, &b| cv.values[b].total_cmp(&cv.values[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

fn m_step(
    points: &PointSet,
    sol: &CenterSolution,
    cv: &CostVector,
    opts: &SolverOptions,
) -> Result<CenterSolution> {
    let z = sol.z;
    let groups = members(points, &cv.labels, sol.k());
    let empty = groups.iter().filter(|g| g.is_empty()).count();
    let mut reseeds = farthest_points(cv, empty).into_iter();
    let mut centers = Vec::with_capacity(sol.k());
    for (center, group) in sol.centers.iter().zip(&groups) {
        if group.is_empty() {
            match opts.empty_cluster_policy {
                EmptyClusterPolicy::ReseedFarthest => {
                    let i = reseeds.next().expect("one reseed per empty cluster");
                    centers.push(points.row(i).to_vec());
                }
                EmptyClusterPolicy::Drop => {}
            }
            continue;
        }
        let next = if z == 2 {
            let mut mean = vec![0.0; points.dim()];
            for p in group {
                linalg::axpy(1.0, p, &mut mean);
            }
            let m = group.len() as f64;
            mean.iter_mut().for_each(|x| *x /= m);
            mean
        } else {
            center_update_gd(group, z, center, opts)?
        };
        // keep the old center unless the update helps this cluster
        if z != 2 && cluster_cost(group, z, &next) > cluster_cost(group, z, center) {
            centers.push(center.clone());
        } else {
            centers.push(next);
        }
    }
    CenterSolution::new(centers, z)
}

/// Alternates nearest-center assignment and per-cluster center updates
/// (cluster mean for `z = 2`, AdamW descent otherwise) until the relative
/// improvement falls below `rel_tol` or `max_em_iters` rounds have run.
pub fn em_center(
    points: &PointSet,
    init: &CenterSolution,
    opts: &SolverOptions,
) -> Result<(CenterSolution, SolveTrace)> {
    opts.validate()?;
    let mut sol = init.clone();
    let (mut cv, mut cost) = center_cost(points, &sol)?;
    let mut costs = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_em_iters {
        iterations += 1;
        let candidate = m_step(points, &sol, &cv, opts)?;
        let (next_cv, next_cost) = center_cost(points, &candidate)?;
        if next_cost > cost {
            converged = true;
            break;
        }
        let done = improvement_below(cost, next_cost, opts.rel_tol);
        sol = candidate;
        cv = next_cv;
        cost = next_cost;
        costs.push(cost);
        if done {
            converged = true;
            break;
        }
    }
    Ok((
        sol,
        SolveTrace {
            costs,
            iterations,
            converged,
        },
    ))
}
