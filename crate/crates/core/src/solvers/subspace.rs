use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OrthoBasis, PowerIterOptions};
use crate::objectives::{
    kahan_sum, pow_from_sq, subspace_cost, CostVector, PointSet, SubspaceSolution,
};

use super::center::farthest_points;
use super::{improvement_below, AdamW, EmptyClusterPolicy, SolveTrace, SolverOptions, Stall};

fn cluster_cost(cluster: &[&[f64]], z: u32, basis: &OrthoBasis) -> f64 {
    kahan_sum(
        cluster
            .iter()
            .map(|p| pow_from_sq(basis.residual_norm_sq(p), z)),
    )
}

/// Cost `Σ r_p^z` with `r_p² = ‖p‖² - ‖B^T p‖²` and its gradient with respect
/// to the columns of `B`: `-z r_p^{z-2} p (B^T p)^T`. Columns are stored
/// back to back in `cols` and `grad`.
fn cost_and_grad(cluster: &[&[f64]], z: u32, d: usize, cols: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let zf = z as f64;
    let mut total = 0.0;
    for p in cluster {
        let coords: Vec<f64> = cols.chunks_exact(d).map(|c| linalg::dot(c, p)).collect();
        let r2 = (linalg::norm_sq(p) - linalg::norm_sq(&coords)).max(0.0);
        total += pow_from_sq(r2, z);
        if r2 == 0.0 {
            continue;
        }
        let w = zf * pow_from_sq(r2, z) / r2;
        for (g, c) in grad.chunks_exact_mut(d).zip(&coords) {
            linalg::axpy(-w * c, p, g);
        }
    }
    total
}

/// Removes from `grad` its component inside the current column span,
/// `G - B(B^T G)`. What remains only rotates the basis; the dropped part
/// would be undone by re-orthonormalisation anyway.
fn tangent_part(d: usize, cols: &[f64], grad: &mut [f64]) {
    let basis: Vec<&[f64]> = cols.chunks_exact(d).collect();
    for g in grad.chunks_exact_mut(d) {
        for b in &basis {
            let a = linalg::dot(b, g);
            linalg::axpy(-a, b, g);
        }
    }
}

/// Projected AdamW descent on a basis for `Σ ‖(I - BB^T)p‖^z`: each step is
/// followed by Gram-Schmidt back onto orthonormal columns. Returns the best
/// basis seen, never worse than `init`.
pub fn basis_update_gd(
    cluster: &[&[f64]],
    z: u32,
    init: &OrthoBasis,
    opts: &SolverOptions,
) -> Result<OrthoBasis> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if z == 0 {
        return Err(Error::domain("z must be a positive integer"));
    }
    let d = init.dim();
    for p in cluster {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.len(),
            });
        }
    }
    let rank = init.rank();
    if rank == 0 {
        return Ok(init.clone());
    }
    let mut x: Vec<f64> = init.cols().concat();
    let mut grad = vec![0.0; x.len()];
    let mut best = init.clone();
    let mut best_cost = cluster_cost(cluster, z, init);
    let mut opt = AdamW::new(x.len(), opts.gd_learning_rate, opts.gd_weight_decay);
    let mut stall = Stall::new(best_cost, opts.gd_patience);
    for _ in 0..opts.gd_iters {
        cost_and_grad(cluster, z, d, &x, &mut grad);
        tangent_part(d, &x, &mut grad);
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        opt.step(&mut x, &grad);
        let cols: Vec<&[f64]> = x.chunks_exact(d).collect();
        let basis = match linalg::orthonormalize(&cols) {
            Ok(b) if b.rank() == rank => b,
            _ => break,
        };
        let cost = cluster_cost(cluster, z, &basis);
        if cost < best_cost {
            best_cost = cost;
            best = basis.clone();
        }
        if stall.observe(cost) {
            break;
        }
        x = basis.cols().concat();
    }
    Ok(best)
}

/// Rank-`j` uncentered PCA of the rows in `cluster`.
fn principal_subspace(cluster: &[&[f64]], j: usize) -> Result<OrthoBasis> {
    let a = Matrix::from_rows(cluster)?;
    match linalg::top_j_singular_subspace(&a, j, PowerIterOptions::default()) {
        Err(Error::NoConvergence { .. }) => {
            // nearly tied eigenvalues: fall back to a dense decomposition
            let (_, vecs) = linalg::symmetric_eigen(&a.gram())?;
            linalg::orthonormalize(&vecs[..j])
        }
        other => other,
    }
}

fn m_step(
    points: &PointSet,
    sol: &SubspaceSolution,
    cv: &CostVector,
    opts: &SolverOptions,
) -> Result<SubspaceSolution> {
    let (j, z, d) = (sol.j, sol.z, points.dim());
    let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); sol.k()];
    for (p, &l) in points.rows().zip(&cv.labels) {
        groups[l].push(p);
    }
    let empty = groups.iter().filter(|g| g.is_empty()).count();
    let mut reseeds = farthest_points(cv, empty).into_iter();
    let mut bases = Vec::with_capacity(sol.k());
    for (basis, group) in sol.bases.iter().zip(&groups) {
        if group.is_empty() {
            if opts.empty_cluster_policy == EmptyClusterPolicy::ReseedFarthest {
                let i = reseeds.next().expect("one reseed per empty cluster");
                let mut b = OrthoBasis::empty(d);
                b.try_extend(points.row(i))?;
                bases.push(b);
            }
            continue;
        }
        let next = if z == 2 {
            principal_subspace(group, j)?
        } else {
            basis_update_gd(group, z, basis, opts)?
        };
        if cluster_cost(group, z, &next) > cluster_cost(group, z, basis) {
            bases.push(basis.clone());
        } else {
            bases.push(next);
        }
    }
    SubspaceSolution::new(bases, j, z)
}

/// Residual energy of the best rank-`j` subspace for `rows`: the Gram trace
/// minus its top `j` eigenvalues.
fn pca_residual(rows: &[&[f64]], j: usize) -> Result<f64> {
    if rows.len() <= j {
        return Ok(0.0);
    }
    let (vals, _) = linalg::symmetric_eigen(&Matrix::from_rows(rows)?.gram())?;
    Ok(vals.iter().skip(j).sum::<f64>().max(0.0))
}

fn partition_cost(points: &PointSet, labels: &[usize], k: usize, j: usize) -> Result<Vec<f64>> {
    (0..k)
        .map(|c| {
            let rows: Vec<&[f64]> = points
                .rows()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            pca_residual(&rows, j)
        })
        .collect()
}

/// Hartigan-style refinement for `z = 2`: repeatedly moves the single point
/// whose reassignment, with both affected clusters refitted exactly, lowers
/// the total most. Returns whether any move was made.
fn refine_by_moves(points: &PointSet, labels: &mut [usize], k: usize, j: usize) -> Result<bool> {
    let mut per_cluster = partition_cost(points, labels, k, j)?;
    let mut moved = false;
    loop {
        let mut best: Option<(f64, usize, usize, f64, f64)> = None;
        for i in 0..labels.len() {
            let from = labels[i];
            let without: Vec<&[f64]> = (0..labels.len())
                .filter(|&t| t != i && labels[t] == from)
                .map(|t| points.row(t))
                .collect();
            let from_cost = pca_residual(&without, j)?;
            for to in (0..k).filter(|&c| c != from) {
                let mut with: Vec<&[f64]> = (0..labels.len())
                    .filter(|&t| labels[t] == to)
                    .map(|t| points.row(t))
                    .collect();
                with.push(points.row(i));
                let to_cost = pca_residual(&with, j)?;
                let gain = per_cluster[from] + per_cluster[to] - from_cost - to_cost;
                if gain > 1e-12 * (per_cluster[from] + per_cluster[to])
                    && best.is_none_or(|b| gain > b.0)
                {
                    best = Some((gain, i, to, from_cost, to_cost));
                }
            }
        }
        let Some((_, i, to, from_cost, to_cost)) = best else {
            return Ok(moved);
        };
        per_cluster[labels[i]] = from_cost;
        per_cluster[to] = to_cost;
        labels[i] = to;
        moved = true;
    }
}

struct EmRun {
    sol: SubspaceSolution,
    labels: Vec<usize>,
    costs: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn em_rounds(
    points: &PointSet,
    init: SubspaceSolution,
    max_iters: usize,
    opts: &SolverOptions,
) -> Result<EmRun> {
    let mut sol = init;
    let (mut cv, mut cost) = subspace_cost(points, &sol)?;
    let mut costs = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let candidate = m_step(points, &sol, &cv, opts)?;
        let (next_cv, next_cost) = subspace_cost(points, &candidate)?;
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
    Ok(EmRun {
        sol,
        labels: cv.labels,
        costs,
        iterations,
        converged,
    })
}

/// EM for the subspace objective: nearest-subspace assignment, then a
/// per-cluster basis update (top-`j` PCA for `z = 2`, projected AdamW
/// otherwise). Stops on relative improvement below `rel_tol`.
///
/// For `z = 2` and at most `opts.refine_max_points` points, a converged run
/// is followed by single-point moves ([`refine_by_moves`]) and EM resumes
/// from the improved partition; EM alone stalls in poor partitions on tiny
/// inputs. The trace then records the cost after each refinement as well.
pub fn em_subspace(
    points: &PointSet,
    init: &SubspaceSolution,
    opts: &SolverOptions,
) -> Result<(SubspaceSolution, SolveTrace)> {
    opts.validate()?;
    if init.j > points.dim() {
        return Err(Error::InvalidRank {
            rank: init.j,
            dim: points.dim(),
        });
    }
    let mut run = em_rounds(points, init.clone(), opts.max_em_iters, opts)?;
    let refine = init.z == 2 && init.k() > 1 && points.len() <= opts.refine_max_points;
    while refine && run.converged && run.iterations < opts.max_em_iters {
        let cost = *run.costs.last().expect("initial cost");
        let k = run.sol.k();
        let mut labels = run.labels.clone();
        if !refine_by_moves(points, &mut labels, k, run.sol.j)? {
            break;
        }
        let cv = CostVector {
            values: subspace_cost(points, &run.sol)?.0.values,
            labels,
        };
        let refitted = m_step(points, &run.sol, &cv, opts)?;
        if subspace_cost(points, &refitted)?.1 >= cost * (1.0 - 1e-12) {
            break;
        }
        let next = em_rounds(points, refitted, opts.max_em_iters - run.iterations, opts)?;
        run.costs.extend(next.costs);
        run.iterations += next.iterations;
        run.sol = next.sol;
        run.labels = next.labels;
        run.converged = next.converged;
    }
    Ok((
        run.sol,
        SolveTrace {
            costs: run.costs,
            iterations: run.iterations,
            converged: run.converged,
        },
    ))
}
