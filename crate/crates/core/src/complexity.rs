//! Monte-Carlo Rademacher and Gaussian complexities of finite pools of cost
//! vectors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::OrthoBasis;
use crate::objectives::PointSet;
use crate::reduction::random_basis;

/// Fewest trials an estimate may use.
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityKind {
    Rademacher,
    Gaussian,
}

impl ComplexityKind {
    pub fn name(self) -> &'static str {
        match self {
            ComplexityKind::Rademacher => "rademacher",
            ComplexityKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub kind: ComplexityKind,
    pub value: f64,
    /// Sample standard deviation of the per-trial sups over `√trials`.
    pub stderr: f64,
    pub trials: usize,
}

/// `trials` independent standard Gaussian vectors of length `n`. Rademacher
/// signs are derived from them as `sign(g)`, which is what lets both kinds
/// share draws.
pub fn gaussian_draws<R: Rng + ?Sized>(n: usize, trials: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..trials)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn check_pool<V: AsRef<[f64]>>(pool: &[V]) -> Result<usize> {
    let n = pool.first().ok_or(Error::EmptyPool)?.as_ref().len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    for v in pool {
        if v.as_ref().len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.as_ref().len(),
            });
        }
    }
    Ok(n)
}

/// `sup_v (1/n) v·s` for every draw, with `s = g` or `s = sign(g)`.
pub fn trial_sups<V: AsRef<[f64]>>(
    pool: &[V],
    draws: &[Vec<f64>],
    kind: ComplexityKind,
) -> Result<Vec<f64>> {
    let n = check_pool(pool)?;
    draws
        .iter()
        .map(|g| {
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: g.len(),
                });
            }
            let sup = pool
                .iter()
                .map(|v| {
                    v.as_ref()
                        .iter()
                        .zip(g)
                        .map(|(x, gi)| match kind {
                            ComplexityKind::Gaussian => x * gi,
                            ComplexityKind::Rademacher if *gi < 0.0 => -x,
                            ComplexityKind::Rademacher => *x,
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(sup / n as f64)
        })
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate of `(1/n) E sup_v v·s` over the pool.
pub fn empirical_complexity<V: AsRef<[f64]>, R: Rng + ?Sized>(
    pool: &[V],
    kind: ComplexityKind,
    trials: usize,
    rng: &mut R,
) -> Result<ComplexityEstimate> {
    let n = check_pool(pool)?;
    check_trials(trials)?;
    let draws = gaussian_draws(n, trials, rng);
    let sups = trial_sups(pool, &draws, kind)?;
    let (value, stderr) = mean_stderr(&sups);
    Ok(ComplexityEstimate {
        kind,
        value,
        stderr,
        trials,
    })
}

/// Rademacher and Gaussian estimates from the same draws, with the standard
/// error of the per-trial gap `rad_t - √(2π) gauss_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedEstimate {
    pub rademacher: ComplexityEstimate,
    pub gaussian: ComplexityEstimate,
    pub gap: f64,
    pub gap_stderr: f64,
}

impl PairedEstimate {
    /// `Rad ≤ √(2π) G` up to `sigmas` standard errors of the paired gap.
    pub fn comparison_holds(&self, sigmas: f64) -> bool {
        self.gap <= sigmas * self.gap_stderr
    }
}

pub fn paired_complexity<V: AsRef<[f64]>, R: Rng + ?Sized>(
    pool: &[V],
    trials: usize,
    rng: &mut R,
) -> Result<PairedEstimate> {
    let n = check_pool(pool)?;
    check_trials(trials)?;
    let draws = gaussian_draws(n, trials, rng);
    let rad = trial_sups(pool, &draws, ComplexityKind::Rademacher)?;
    let gauss = trial_sups(pool, &draws, ComplexityKind::Gaussian)?;
    let factor = (2.0 * std::f64::consts::PI).sqrt();
    let gaps: Vec<f64> = rad
        .iter()
        .zip(&gauss)
        .map(|(r, g)| r - factor * g)
        .collect();
    let (rv, rs) = mean_stderr(&rad);
    let (gv, gs) = mean_stderr(&gauss);
    let (gap, gap_stderr) = mean_stderr(&gaps);
    Ok(PairedEstimate {
        rademacher: ComplexityEstimate {
            kind: ComplexityKind::Rademacher,
            value: rv,
            stderr: rs,
            trials,
        },
        gaussian: ComplexityEstimate {
            kind: ComplexityKind::Gaussian,
            value: gv,
            stderr: gs,
            trials,
        },
        gap,
        gap_stderr,
    })
}

/// Cost vector `p ↦ ‖(I - UU^T)p‖²`.
pub fn residual_cost_vector(points: &PointSet, u: &OrthoBasis) -> Vec<f64> {
    points.rows().map(|p| u.residual_norm_sq(p)).collect()
}

/// Pool of cost vectors for `pool_size` random rank-`j` bases.
pub fn random_rank_j_pool<R: Rng + ?Sized>(
    points: &PointSet,
    j: usize,
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if pool_size == 0 {
        return Err(Error::EmptyPool);
    }
    (0..pool_size)
        .map(|_| {
            Ok(residual_cost_vector(
                points,
                &random_basis(points.dim(), j, rng)?,
            ))
        })
        .collect()
}

/// Estimate of the Rademacher complexity of a random rank-`j` pool next to
/// the bound `√(j/n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankJCheck {
    pub n: usize,
    pub d: usize,
    pub j: usize,
    pub pool_size: usize,
    pub estimate: ComplexityEstimate,
    pub bound: f64,
    pub passed: bool,
}

/// A finite pool can only under-estimate the supremum, so the estimate must
/// sit below `√(j/n)` up to three standard errors.
pub fn rank_j_pool_check<R: Rng + ?Sized>(
    points: &PointSet,
    j: usize,
    pool_size: usize,
    trials: usize,
    rng: &mut R,
) -> Result<RankJCheck> {
    let pool = random_rank_j_pool(points, j, pool_size, rng)?;
    let estimate = empirical_complexity(&pool, ComplexityKind::Rademacher, trials, rng)?;
    let n = points.len();
    let bound = (j as f64 / n as f64).sqrt();
    Ok(RankJCheck {
        n,
        d: points.dim(),
        j,
        pool_size,
        passed: estimate.value <= bound + 3.0 * estimate.stderr,
        estimate,
        bound,
    })
}
