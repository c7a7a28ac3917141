//! Randomised initialisation: `D^z` sampling for centers and adaptive
//! squared-residual sampling for subspaces.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, OrthoBasis};
use crate::objectives::{pow_from_sq, CenterSolution, PointSet, SubspaceSolution};

/// Name recorded in run metadata for the subspace initialiser.
pub const SUBSPACE_SEEDING: &str = "adaptive-squared-residual";

/// Index drawn with probability proportional to `weights`, or `None` when the
/// total weight is zero. Zero-weight entries are never drawn.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    match WeightedIndex::new(weights) {
        Ok(dist) => Some(dist.sample(rng)),
        Err(_) => None,
    }
}

/// `D^z` seeding: the first center uniform over `points`, then each next
/// center drawn with probability `dist^z / Σ dist^z` to the centers so far.
pub fn dz_seed<R: Rng + ?Sized>(
    points: &PointSet,
    k: usize,
    z: u32,
    rng: &mut R,
) -> Result<CenterSolution> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    let first = rng.random_range(0..points.len());
    dz_seed_from(points, first, k, z, rng)
}

/// `D^z` seeding with a fixed first center.
pub fn dz_seed_from<R: Rng + ?Sized>(
    points: &PointSet,
    first: usize,
    k: usize,
    z: u32,
    rng: &mut R,
) -> Result<CenterSolution> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    if first >= points.len() {
        return Err(Error::domain(format!("first index {first} out of range")));
    }
    let mut centers = vec![points.row(first).to_vec()];
    let mut weights: Vec<f64> = points
        .rows()
        .map(|p| pow_from_sq(linalg::dist_sq(p, &centers[0]), z))
        .collect();
    while centers.len() < k {
        // fewer than k distinct points: fall back to a uniform pick
        let idx =
            sample_weighted(&weights, rng).unwrap_or_else(|| rng.random_range(0..points.len()));
        let c = points.row(idx).to_vec();
        for (w, p) in weights.iter_mut().zip(points.rows()) {
            let v = pow_from_sq(linalg::dist_sq(p, &c), z);
            if v < *w {
                *w = v;
            }
        }
        centers.push(c);
    }
    CenterSolution::new(centers, z)
}

/// One subspace for [`adaptive_subspace_seed`], with the squared
/// residual of every point against it.
fn grow_basis<R: Rng + ?Sized>(
    points: &PointSet,
    j: usize,
    prev_cost: &[f64],
    rng: &mut R,
) -> Result<(OrthoBasis, Vec<f64>)> {
    let mut basis = OrthoBasis::empty(points.dim());
    let mut resid: Vec<f64> = points.rows().map(linalg::norm_sq).collect();
    for _ in 0..j {
        let gated: Vec<f64> = resid
            .iter()
            .zip(prev_cost)
            .map(|(r, c)| r.min(*c))
            .collect();
        let idx = match sample_weighted(&gated, rng).or_else(|| sample_weighted(&resid, rng)) {
            Some(i) => i,
            None => break,
        };
        if !basis.try_extend(points.row(idx))? {
            break;
        }
        let newest = basis.cols().last().expect("just extended");
        for (r, p) in resid.iter_mut().zip(points.rows()) {
            let c = linalg::dot(newest, p);
            *r = (*r - c * c).max(0.0);
        }
    }
    Ok((basis, resid))
}

/// Adaptive squared-residual seeding of `k` subspaces of rank at most `j`.
///
/// Subspace `t` is grown over `j` rounds. In each round a point is drawn with
/// probability proportional to
/// `min(‖(I-Π_t)p‖², min_{s<t} ‖(I-U_sU_s^T)p‖²)`, where `Π_t` projects onto
/// the points already picked for subspace `t`, and the basis is extended by
/// that point. Gating by earlier subspaces steers later ones towards data that
/// is still unexplained. If the gated mass is zero the draw falls back to the
/// ungated residual; if that is zero too the basis stops early with rank `< j`.
pub fn adaptive_subspace_seed<R: Rng + ?Sized>(
    points: &PointSet,
    k: usize,
    j: usize,
    z: u32,
    rng: &mut R,
) -> Result<SubspaceSolution> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    let d = points.dim();
    if j == 0 || j > d {
        return Err(Error::InvalidRank { rank: j, dim: d });
    }
    if points.max_norm() < linalg::ZERO_TOL {
        return Err(Error::AllZero);
    }

    let mut prev_cost = vec![f64::INFINITY; points.len()];
    let mut bases = Vec::with_capacity(k);
    for _ in 0..k {
        let (basis, resid) = grow_basis(points, j, &prev_cost, rng)?;
        for (c, r) in prev_cost.iter_mut().zip(&resid) {
            *c = c.min(*r);
        }
        bases.push(basis);
    }
    SubspaceSolution::new(bases, j, z)
}
