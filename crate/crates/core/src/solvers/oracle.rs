use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OrthoBasis};
use crate::objectives::{
    kahan_sum, pow_from_sq, CenterSolution, Objective, PointSet, Solution, SubspaceSolution,
};

/// Largest instance the exhaustive oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 10;

const SEARCH_TOL: f64 = 1e-10;

/// Global optimum of a tiny instance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub solution: Solution,
    pub cost: f64,
    /// Cluster index of every point in the optimal partition.
    pub labels: Vec<usize>,
}

fn weighted_center_cost(cluster: &[&[f64]], weights: &[f64], z: u32, s: &[f64]) -> f64 {
    kahan_sum(
        cluster
            .iter()
            .zip(weights)
            .map(|(p, w)| w * pow_from_sq(linalg::dist_sq(p, s), z)),
    )
}

fn weighted_mean(cluster: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let d = cluster[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; d];
    for (p, w) in cluster.iter().zip(weights) {
        linalg::axpy(*w, p, &mut mean);
    }
    if total > 0.0 {
        mean.iter_mut().for_each(|x| *x /= total);
    }
    mean
}

fn weiszfeld(cluster: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let mut x = weighted_mean(cluster, weights);
    for _ in 0..100_000 {
        let mut num = vec![0.0; x.len()];
        let mut den = 0.0;
        for (p, w) in cluster.iter().zip(weights) {
            let dist = linalg::dist_sq(p, &x).sqrt();
            if dist < 1e-15 {
                continue;
            }
            linalg::axpy(w / dist, p, &mut num);
            den += w / dist;
        }
        if den == 0.0 {
            break;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let step = linalg::dist_sq(&next, &x).sqrt();
        x = next;
        if step < 1e-13 {
            break;
        }
    }
    x
}

/// Cyclic coordinate minimisation of a convex objective, each coordinate by
/// ternary search over the bounding box of the cluster.
fn coordinate_search(cluster: &[&[f64]], weights: &[f64], z: u32, start: Vec<f64>) -> Vec<f64> {
    let d = start.len();
    let lo: Vec<f64> = (0..d)
        .map(|i| cluster.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|i| {
            cluster
                .iter()
                .map(|p| p[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut x = start;
    let mut cost = weighted_center_cost(cluster, weights, z, &x);
    for _ in 0..1000 {
        let before = cost;
        for i in 0..d {
            let (mut a, mut b) = (lo[i], hi[i]);
            let mut probe = x.clone();
            let mut eval = |t: f64| {
                probe[i] = t;
                weighted_center_cost(cluster, weights, z, &probe)
            };
            while b - a > SEARCH_TOL {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if eval(m1) <= eval(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            let t = 0.5 * (a + b);
            let c = eval(t);
            if c <= cost {
                x[i] = t;
                cost = c;
            }
        }
        if before - cost <= 1e-15 * before.max(1e-300) {
            break;
        }
    }
    x
}

/// Optimal single center for `Σ w_p ‖p - s‖^z`: the weighted mean for
/// `z = 2`, Weiszfeld for the geometric median, coordinate ternary search
/// otherwise. Returns the center and its weighted cost.
pub fn one_cluster_center(cluster: &[&[f64]], weights: &[f64], z: u32) -> Result<(Vec<f64>, f64)> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if weights.len() != cluster.len() {
        return Err(Error::DimensionMismatch {
            expected: cluster.len(),
            actual: weights.len(),
        });
    }
    if z == 0 {
        return Err(Error::domain("z must be a positive integer"));
    }
    let d = cluster[0].len();
    let center = match (z, d) {
        (2, _) => weighted_mean(cluster, weights),
        (1, d) if d > 1 => {
            // the median may sit exactly on a data point, where Weiszfeld stalls
            let mut best = weiszfeld(cluster, weights);
            let mut best_cost = weighted_center_cost(cluster, weights, z, &best);
            for p in cluster {
                let c = weighted_center_cost(cluster, weights, z, p);
                if c < best_cost {
                    best_cost = c;
                    best = p.to_vec();
                }
            }
            best
        }
        _ => coordinate_search(cluster, weights, z, weighted_mean(cluster, weights)),
    };
    let cost = weighted_center_cost(cluster, weights, z, &center);
    Ok((center, cost))
}

/// Rank-`j` weighted uncentered PCA via a dense eigen-decomposition of
/// `Σ w_p p p^T`.
fn one_cluster_subspace(
    cluster: &[&[f64]],
    weights: &[f64],
    j: usize,
) -> Result<(OrthoBasis, f64)> {
    let d = cluster[0].len();
    let rows: Vec<Vec<f64>> = cluster
        .iter()
        .zip(weights)
        .map(|(p, w)| p.iter().map(|x| x * w.sqrt()).collect())
        .collect();
    let (_, vecs) = linalg::symmetric_eigen(&Matrix::from_rows(&rows)?.gram())?;
    let basis = if j == 0 {
        OrthoBasis::empty(d)
    } else {
        linalg::orthonormalize(&vecs[..j])?
    };
    let cost = kahan_sum(
        cluster
            .iter()
            .zip(weights)
            .map(|(p, w)| w * basis.residual_norm_sq(p)),
    );
    Ok((basis, cost))
}

enum Part {
    Center(Vec<f64>),
    Subspace(OrthoBasis),
}

fn solve_part(
    points: &PointSet,
    weights: &[f64],
    mask: usize,
    objective: Objective,
) -> Result<(Part, f64)> {
    let idx: Vec<usize> = (0..points.len()).filter(|i| mask >> i & 1 == 1).collect();
    let cluster: Vec<&[f64]> = idx.iter().map(|&i| points.row(i)).collect();
    let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
    match objective {
        Objective::Center { z } => {
            let (c, cost) = one_cluster_center(&cluster, &w, z)?;
            Ok((Part::Center(c), cost))
        }
        Objective::Subspace { j, z: 2 } => {
            let (b, cost) = one_cluster_subspace(&cluster, &w, j)?;
            Ok((Part::Subspace(b), cost))
        }
        Objective::Subspace { z, .. } => Err(Error::Unsupported(format!(
            "exhaustive subspace oracle needs z = 2, got z = {z}"
        ))),
    }
}

/// Exhaustive optimum of a weighted instance with at most
/// [`ORACLE_MAX_POINTS`] points: every partition into at most `k` parts is
/// scored with its optimal per-part solution.
pub fn erm_oracle_weighted(
    points: &PointSet,
    weights: &[f64],
    k: usize,
    objective: Objective,
) -> Result<OracleResult> {
    let n = points.len();
    if n > ORACLE_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "exhaustive oracle handles at most {ORACLE_MAX_POINTS} points, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidK { k, n });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain("weights must be finite and non-negative"));
    }
    if let Objective::Subspace { j, .. } = objective {
        if j > points.dim() {
            return Err(Error::InvalidRank {
                rank: j,
                dim: points.dim(),
            });
        }
    }
    let full = (1usize << n) - 1;
    let mut parts = Vec::with_capacity(full + 1);
    parts.push(None);
    for mask in 1..=full {
        parts.push(Some(solve_part(points, weights, mask, objective)?));
    }

    // best[b][mask]: cheapest split of `mask` into at most b parts, with the
    // part that holds the lowest set bit recorded for reconstruction
    let blocks = k.min(n);
    let mut best = vec![vec![(f64::INFINITY, 0usize); full + 1]; blocks + 1];
    for row in best.iter_mut() {
        row[0] = (0.0, 0);
    }
    for b in 1..=blocks {
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let part = sub | low;
                let own = parts[part].as_ref().map_or(f64::INFINITY, |p| p.1);
                let c = own + best[b - 1][mask ^ part].0;
                if c < best[b][mask].0 {
                    best[b][mask] = (c, part);
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
    }

    let mut labels = vec![0; n];
    let mut chosen = Vec::new();
    let (mut mask, mut b) = (full, blocks);
    while mask != 0 {
        let part = best[b][mask].1;
        for (i, l) in labels.iter_mut().enumerate() {
            if part >> i & 1 == 1 {
                *l = chosen.len();
            }
        }
        chosen.push(part);
        mask ^= part;
        b -= 1;
    }
    let cost = kahan_sum(
        chosen
            .iter()
            .map(|&m| parts[m].as_ref().expect("nonempty part").1),
    );

    let pad = k - chosen.len();
    let solution = match objective {
        Objective::Center { z } => {
            let mut centers: Vec<Vec<f64>> = chosen
                .iter()
                .map(|&m| match &parts[m].as_ref().expect("nonempty part").0 {
                    Part::Center(c) => c.clone(),
                    Part::Subspace(_) => unreachable!(),
                })
                .collect();
            centers.extend(std::iter::repeat_n(centers[0].clone(), pad));
            Solution::Centers(CenterSolution::new(centers, z)?)
        }
        Objective::Subspace { j, z } => {
            let mut bases: Vec<OrthoBasis> = chosen
                .iter()
                .map(|&m| match &parts[m].as_ref().expect("nonempty part").0 {
                    Part::Subspace(b) => b.clone(),
                    Part::Center(_) => unreachable!(),
                })
                .collect();
            bases.extend(std::iter::repeat_n(bases[0].clone(), pad));
            Solution::Subspaces(SubspaceSolution::new(bases, j, z)?)
        }
    };
    Ok(OracleResult {
        solution,
        cost,
        labels,
    })
}

/// [`erm_oracle_weighted`] with unit weights.
pub fn erm_oracle_small(points: &PointSet, k: usize, objective: Objective) -> Result<OracleResult> {
    erm_oracle_weighted(points, &vec![1.0; points.len()], k, objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointSet::from_rows("p", &rows).unwrap()
    }

    #[test]
    fn two_means_on_the_line() {
        let r = erm_oracle_small(
            &line(&[0.0, 2.0, 10.0, 12.0]),
            2,
            Objective::Center { z: 2 },
        )
        .unwrap();
        assert!((r.cost - 4.0).abs() < 1e-12);
        assert_eq!(r.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn k_equals_n_is_free() {
        let p = line(&[0.1, 0.4, 0.9]);
        for z in 1..=4 {
            let r = erm_oracle_small(&p, 3, Objective::Center { z }).unwrap();
            assert!(r.cost < 1e-9, "z={z}: {}", r.cost);
        }
    }

    #[test]
    fn identity_gram_drops_one_direction() {
        let p = PointSet::from_rows(
            "p",
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let r = erm_oracle_small(&p, 1, Objective::Subspace { j: 2, z: 2 }).unwrap();
        assert!((r.cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn medians_and_higher_powers() {
        let p = line(&[0.0, 1.0, 5.0]);
        let r = erm_oracle_small(&p, 1, Objective::Center { z: 1 }).unwrap();
        assert!((r.cost - 5.0).abs() < 1e-6);
        let r = erm_oracle_small(&line(&[-1.0, 1.0]), 1, Objective::Center { z: 4 }).unwrap();
        assert!((r.cost - 2.0).abs() < 1e-6);
        // geometric median of an equilateral-ish triangle plus its centroid
        let q = PointSet::from_rows(
            "q",
            &[
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
            ],
        )
        .unwrap();
        let r = erm_oracle_small(&q, 1, Objective::Center { z: 1 }).unwrap();
        assert!((r.cost - 2.0).abs() < 1e-6, "{}", r.cost);
    }

    #[test]
    fn limits_and_unsupported() {
        let big = line(&[0.0; 11]);
        assert!(matches!(
            erm_oracle_small(&big, 1, Objective::Center { z: 2 }),
            Err(Error::TooLarge(_))
        ));
        let p = line(&[0.0, 1.0]);
        assert!(matches!(
            erm_oracle_small(&p, 1, Objective::Subspace { j: 1, z: 1 }),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn weights_shift_the_mean() {
        let p = line(&[0.0, 1.0]);
        let r = erm_oracle_weighted(&p, &[3.0, 1.0], 1, Objective::Center { z: 2 }).unwrap();
        match r.solution {
            Solution::Centers(s) => assert!((s.centers[0][0] - 0.25).abs() < 1e-12),
            Solution::Subspaces(_) => panic!("wrong kind"),
        }
    }
}
