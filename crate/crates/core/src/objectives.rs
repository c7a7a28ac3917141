//! Cost vectors and totals for center-based `(k,z)` and subspace `(k,j,z)`
//! clustering, plus numeric checkers for the power-distance inequalities the
//! net constructions rely on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, OrthoBasis};

/// Slack allowed on `‖p‖ ≤ 1` for points claimed to be in the unit ball.
pub const BALL_TOL: f64 = 1e-9;

/// `n` points in `R^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    name: String,
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(name: impl Into<String>, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if d == 0 {
            return Err(Error::domain("points must have at least one coordinate"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("point set contains non-finite values"));
        }
        Ok(Self {
            name: name.into(),
            n,
            d,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(name: impl Into<String>, rows: &[R]) -> Result<Self> {
        let d = rows.first().ok_or(Error::EmptyInput)?.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(name, rows.len(), d, data)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.rows().map(linalg::norm).fold(0.0, f64::max)
    }

    pub fn in_unit_ball(&self) -> bool {
        self.max_norm() <= 1.0 + BALL_TOL
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.name.clone(), indices.len(), self.d, data)
    }
}

/// `k` centers for the `(k,z)` objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSolution {
    pub centers: Vec<Vec<f64>>,
    pub z: u32,
}

impl CenterSolution {
    pub fn new(centers: Vec<Vec<f64>>, z: u32) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidK { k: 0, n: 0 });
        }
        if z == 0 {
            return Err(Error::domain("z must be a positive integer"));
        }
        let d = centers[0].len();
        for c in &centers {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: c.len(),
                });
            }
        }
        Ok(Self { centers, z })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    /// Radially clamps every center into the unit ball.
    pub fn clamped_to_ball(&self) -> Self {
        let centers = self
            .centers
            .iter()
            .map(|c| {
                let n = linalg::norm(c);
                if n > 1.0 {
                    c.iter().map(|x| x / n).collect()
                } else {
                    c.clone()
                }
            })
            .collect();
        Self { centers, z: self.z }
    }
}

/// `k` orthonormal bases of rank at most `j` for the `(k,j,z)` objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSolution {
    pub bases: Vec<OrthoBasis>,
    pub j: usize,
    pub z: u32,
}

impl SubspaceSolution {
    pub fn new(bases: Vec<OrthoBasis>, j: usize, z: u32) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidK { k: 0, n: 0 });
        }
        if z == 0 {
            return Err(Error::domain("z must be a positive integer"));
        }
        let d = bases[0].dim();
        for b in &bases {
            if b.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: b.dim(),
                });
            }
            if b.rank() > j {
                return Err(Error::InvalidRank {
                    rank: b.rank(),
                    dim: j,
                });
            }
        }
        Ok(Self { bases, j, z })
    }

    pub fn k(&self) -> usize {
        self.bases.len()
    }

    pub fn dim(&self) -> usize {
        self.bases.first().map_or(0, OrthoBasis::dim)
    }
}

/// Per-point costs and the index of the minimising center/subspace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostVector {
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
}

impl CostVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.values.iter().copied())
    }

    /// `‖self - other‖_∞`
    pub fn linf_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl AsRef<[f64]> for CostVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Compensated summation in iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `‖x‖^z` given `‖x‖²`. Even powers avoid the square root.
#[inline]
pub fn pow_from_sq(dist_sq: f64, z: u32) -> f64 {
    let dist_sq = dist_sq.max(0.0);
    match z {
        1 => dist_sq.sqrt(),
        2 => dist_sq,
        z if z % 2 == 0 => dist_sq.powi((z / 2) as i32),
        z => dist_sq.sqrt().powi(z as i32),
    }
}

/// Cost of one point against the nearest center; ties go to the lowest index.
#[inline]
pub fn nearest_center(p: &[f64], centers: &[Vec<f64>], z: u32) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let v = pow_from_sq(linalg::dist_sq(p, c), z);
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

#[inline]
pub fn nearest_subspace(p: &[f64], bases: &[OrthoBasis], z: u32) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, b) in bases.iter().enumerate() {
        let v = pow_from_sq(b.residual_norm_sq(p), z);
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn center_cost(points: &PointSet, sol: &CenterSolution) -> Result<(CostVector, f64)> {
    if sol.dim() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            actual: sol.dim(),
        });
    }
    let (labels, values): (Vec<usize>, Vec<f64>) = points
        .rows()
        .map(|p| nearest_center(p, &sol.centers, sol.z))
        .unzip();
    let cv = CostVector { values, labels };
    let total = cv.total();
    Ok((cv, total))
}

pub fn subspace_cost(points: &PointSet, sol: &SubspaceSolution) -> Result<(CostVector, f64)> {
    if sol.dim() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            actual: sol.dim(),
        });
    }
    let (labels, values): (Vec<usize>, Vec<f64>) = points
        .rows()
        .map(|p| nearest_subspace(p, &sol.bases, sol.z))
        .unzip();
    let cv = CostVector { values, labels };
    let total = cv.total();
    Ok((cv, total))
}

/// Which clustering objective a run optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    Center { z: u32 },
    Subspace { j: usize, z: u32 },
}

impl Objective {
    pub fn z(&self) -> u32 {
        match *self {
            Objective::Center { z } | Objective::Subspace { z, .. } => z,
        }
    }

    /// `0` for center objectives.
    pub fn j(&self) -> usize {
        match *self {
            Objective::Center { .. } => 0,
            Objective::Subspace { j, .. } => j,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Center { .. } => "center",
            Objective::Subspace { .. } => "subspace",
        }
    }
}

/// A solution to either objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Centers(CenterSolution),
    Subspaces(SubspaceSolution),
}

impl Solution {
    pub fn cost(&self, points: &PointSet) -> Result<(CostVector, f64)> {
        match self {
            Solution::Centers(s) => center_cost(points, s),
            Solution::Subspaces(u) => subspace_cost(points, u),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Solution::Centers(s) => s.k(),
            Solution::Subspaces(u) => u.k(),
        }
    }
}

/// One inequality evaluated on concrete numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    /// Whether the hypothesis of the implication held; unconditional
    /// inequalities always report `true`.
    pub applies: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
}

impl BoundCheck {
    fn new(name: &'static str, applies: bool, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            applies,
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }

    /// Violated only if the hypothesis held and `lhs > rhs` beyond rounding.
    pub fn violated(&self) -> bool {
        self.applies && self.lhs > self.rhs + 1e-12 * (1.0 + self.rhs.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| !c.violated())
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const WEAK_TRIANGLE: &str = "weak_triangle";
pub const POWER_DIFFERENCE: &str = "power_difference";
pub const ROOT_CLOSENESS: &str = "root_closeness";
pub const POWER_CLOSENESS: &str = "power_closeness";
pub const RESCALED_POWER_CLOSENESS: &str = "rescaled_power_closeness";

/// Both triangle inequalities for `z`-th powers on three pairwise distances:
///
/// `d_ab^z ≤ (1+ε)^{z-1} d_ac^z + ((1+ε)/ε)^{z-1} d_bc^z` and
/// `|d_ab^z - d_ac^z| ≤ ε d_ac^z + ((2z+ε)/ε)^{z-1} d_bc^z`.
pub fn weak_triangle_checks(d_ab: f64, d_ac: f64, d_bc: f64, z: u32, eps: f64) -> [BoundCheck; 2] {
    let zf = z as i32;
    let a = d_ab.powi(zf);
    let b = d_ac.powi(zf);
    let c = d_bc.powi(zf);
    let first = (1.0 + eps).powi(zf - 1) * b + ((1.0 + eps) / eps).powi(zf - 1) * c;
    let second = eps * b + ((2.0 * z as f64 + eps) / eps).powi(zf - 1) * c;
    [
        BoundCheck::new(WEAK_TRIANGLE, true, a, first),
        BoundCheck::new(POWER_DIFFERENCE, true, (a - b).abs(), second),
    ]
}

/// Evaluates the power inequalities on `a, b ∈ [0, 2]`.
///
/// The triangle inequalities use `a` and `b` as two distances from a common
/// point and `|a - b|` as the third (the tightest value the metric allows).
/// The closeness implications are reported with `applies = false` when their
/// hypotheses (`a² = b² ± εb`, resp. `a² = b² ± max(εb, ε²)/(4(3z)^z)`) fail.
pub fn power_bound_check(a: f64, b: f64, z: u32, eps: f64) -> Result<BoundReport> {
    if !(0.0..=2.0).contains(&a) || !(0.0..=2.0).contains(&b) {
        return Err(Error::domain(format!("a={a}, b={b} must lie in [0, 2]")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("eps={eps} must be positive")));
    }
    if z == 0 {
        return Err(Error::domain("z must be a positive integer"));
    }
    let [tri, diff] = weak_triangle_checks(a, b, (a - b).abs(), z, eps);

    let gap = (a * a - b * b).abs();
    let zf = z as i32;
    let three_z_pow = (3.0 * z as f64).powi(zf);
    let pow_gap = (a.powi(zf) - b.powi(zf)).abs();

    let base_hyp = gap <= eps * b;
    let root = BoundCheck::new(ROOT_CLOSENESS, base_hyp, (a - b).abs(), eps);
    let power = BoundCheck::new(POWER_CLOSENESS, base_hyp, pow_gap, 2.0 * three_z_pow * eps);

    let rescaled_hyp = gap <= (eps * b).max(eps * eps) / (4.0 * three_z_pow);
    let rescaled = BoundCheck::new(RESCALED_POWER_CLOSENESS, rescaled_hyp, pow_gap, eps);

    Ok(BoundReport {
        checks: vec![tri, diff, root, power, rescaled],
    })
}
