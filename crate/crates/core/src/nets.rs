//! Finite nets: grids covering the unit ball, clustering nets of cost
//! vectors, and the size bounds for nets of the two objectives.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{center_cost, CenterSolution, CostVector, PointSet};
use crate::reduction::random_in_ball;

/// Largest dimension [`unit_ball_net`] will enumerate.
pub const NET_MAX_DIM: usize = 4;

/// Largest number of grid points [`unit_ball_net`] will enumerate.
pub const NET_MAX_POINTS: usize = 200_000;

/// Largest number of cost vectors [`center_net`] will materialise.
pub const CENTER_NET_MAX: usize = 500_000;

fn grid_half_width(d: usize, eps: f64) -> usize {
    let pitch = eps / (d as f64).sqrt();
    ((1.0 / pitch) * (1.0 + 1e-12)).floor() as usize
}

/// Points of the grid with pitch `eps/√d` that lie in the unit ball.
///
/// Rounding every coordinate of `x` towards zero lands on a grid point no
/// farther from the origin than `x` and within `eps` of it, so the result
/// covers the ball at scale `eps`.
pub fn unit_ball_net(d: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    if d == 0 || !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!(
            "need d ≥ 1 and eps > 0, got d={d}, eps={eps}"
        )));
    }
    if d > NET_MAX_DIM {
        return Err(Error::TooLarge(format!(
            "unit-ball net in dimension {d} > {NET_MAX_DIM}"
        )));
    }
    let m = grid_half_width(d, eps);
    let side = 2 * m + 1;
    let cells = (side as f64).powi(d as i32);
    if cells > NET_MAX_POINTS as f64 * 2.0 {
        return Err(Error::TooLarge(format!(
            "grid with {side}^{d} cells exceeds the enumeration cap"
        )));
    }
    let pitch = eps / (d as f64).sqrt();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let point: Vec<f64> = idx.iter().map(|&i| (i as f64 - m as f64) * pitch).collect();
        if linalg::norm_sq(&point) <= 1.0 + 1e-12 {
            out.push(point);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == d {
                if out.len() > NET_MAX_POINTS {
                    return Err(Error::TooLarge(format!(
                        "net has {} > {NET_MAX_POINTS} points",
                        out.len()
                    )));
                }
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] < side {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Grid size next to the existential bound `(1 + 2/eps)^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetReport {
    pub d: usize,
    pub eps: f64,
    pub size: usize,
    pub bound: f64,
    pub ratio: f64,
}

pub fn unit_ball_net_report(d: usize, eps: f64) -> Result<NetReport> {
    let size = unit_ball_net(d, eps)?.len();
    let bound = (1.0 + 2.0 / eps).powi(d as i32);
    Ok(NetReport {
        d,
        eps,
        size,
        bound,
        ratio: size as f64 / bound,
    })
}

/// Largest distance from `queries` uniform points of the ball to the net.
pub fn covering_radius_audit<R: Rng + ?Sized>(
    net: &[Vec<f64>],
    d: usize,
    queries: usize,
    rng: &mut R,
) -> Result<f64> {
    if net.is_empty() {
        return Err(Error::EmptyNet);
    }
    let mut worst: f64 = 0.0;
    for _ in 0..queries {
        let x = random_in_ball(d, rng);
        let best = net
            .iter()
            .map(|g| linalg::dist_sq(g, &x))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best.sqrt());
    }
    Ok(worst)
}

/// The candidate whose cost vector is worst approximated by the net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetWitness {
    pub candidate: usize,
    /// Index into the net of the closest vector.
    pub nearest: usize,
    /// Point at which the closest net vector deviates most.
    pub point: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetVerification {
    pub eps: f64,
    pub max_deviation: f64,
    pub passed: bool,
    pub witness: Option<NetWitness>,
}

/// For every candidate, the `ℓ∞` distance from its cost vector to the
/// nearest vector in `net`; passes iff the worst such distance is at most
/// `eps`.
pub fn verify_clustering_net(
    points: &PointSet,
    candidates: &[CenterSolution],
    net: &[CostVector],
    eps: f64,
) -> Result<NetVerification> {
    if net.is_empty() {
        return Err(Error::EmptyNet);
    }
    for v in net {
        if v.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: v.len(),
            });
        }
    }
    let mut witness: Option<NetWitness> = None;
    for (ci, cand) in candidates.iter().enumerate() {
        let (cv, _) = center_cost(points, cand)?;
        let (nearest, deviation) = net
            .iter()
            .enumerate()
            .map(|(i, v)| (i, cv.linf_distance(&v.values)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if witness.as_ref().is_none_or(|w| deviation > w.deviation) {
            let point = cv
                .values
                .iter()
                .zip(&net[nearest].values)
                .map(|(a, b)| (a - b).abs())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                .0;
            witness = Some(NetWitness {
                candidate: ci,
                nearest,
                point,
                deviation,
            });
        }
    }
    let max_deviation = witness.as_ref().map_or(0.0, |w| w.deviation);
    Ok(NetVerification {
        eps,
        max_deviation,
        passed: max_deviation <= eps,
        witness,
    })
}

/// Grid scale that makes single-center nets accurate to `eps`:
/// `eps² / (4 (6z)^z)`.
pub fn center_net_scale(z: u32, eps: f64) -> f64 {
    eps * eps / (4.0 * (6.0 * z as f64).powi(z as i32))
}

/// Cost vectors of every multiset of `k` centers drawn from the unit-ball
/// grid at scale [`center_net_scale`].
pub fn center_net(points: &PointSet, k: usize, z: u32, eps: f64) -> Result<Vec<CostVector>> {
    if k == 0 {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    let grid = unit_ball_net(points.dim(), center_net_scale(z, eps))?;
    let combos = multiset_count(grid.len(), k);
    if combos > CENTER_NET_MAX as f64 {
        return Err(Error::TooLarge(format!(
            "{combos:.3e} candidate center sets"
        )));
    }
    let mut out = Vec::with_capacity(combos as usize);
    let mut pick = vec![0usize; k];
    loop {
        let centers = pick.iter().map(|&i| grid[i].clone()).collect();
        out.push(center_cost(points, &CenterSolution::new(centers, z)?)?.0);
        // next non-decreasing index tuple
        let Some(pos) = (0..k).rev().find(|&i| pick[i] + 1 < grid.len()) else {
            return Ok(out);
        };
        let v = pick[pos] + 1;
        pick[pos..].iter_mut().for_each(|x| *x = v);
    }
}

fn multiset_count(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n + i) as f64 / (i + 1) as f64)
}

/// Which objective a net-size bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Center,
    Subspace,
}

/// Natural log of a net-size bound, with the unspecified constant set to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetSizeBound {
    pub kind: NetKind,
    pub k: usize,
    pub j: usize,
    pub z: u32,
    pub eps: f64,
    pub n: usize,
    pub log_size: f64,
}

/// Exponent of the net-size bounds:
///
/// * center: `z³ k ε⁻² ln n (ln z + ln ε⁻¹)`
/// * subspace: `(3z)^{z+2} k j ε⁻² (ln n + j ln(j/ε)) ln ε⁻¹`
///
/// `j` is ignored for centers.
pub fn net_size_bound(
    kind: NetKind,
    k: usize,
    j: usize,
    z: u32,
    eps: f64,
    n: usize,
) -> Result<NetSizeBound> {
    if k == 0 || z == 0 || n == 0 || (kind == NetKind::Subspace && j == 0) {
        return Err(Error::domain(
            "k, z, n (and j for subspaces) must be positive",
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps={eps} must lie in (0, 1)")));
    }
    let (kf, jf, zf, nf) = (k as f64, j as f64, z as f64, n as f64);
    let inv_eps_sq = 1.0 / (eps * eps);
    let log_inv_eps = (1.0 / eps).ln();
    let log_size = match kind {
        NetKind::Center => zf.powi(3) * kf * inv_eps_sq * nf.ln() * (zf.ln() + log_inv_eps),
        NetKind::Subspace => {
            (3.0 * zf).powi(z as i32 + 2)
                * kf
                * jf
                * inv_eps_sq
                * (nf.ln() + jf * (jf / eps).ln())
                * log_inv_eps
        }
    };
    Ok(NetSizeBound {
        kind,
        k,
        j,
        z,
        eps,
        n,
        log_size,
    })
}
