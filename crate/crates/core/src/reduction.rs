//! Adaptive projection: greedily pick input points until the complement of
//! their span is nearly orthogonal to a given subspace.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, OrthoBasis, Projector, DROP_TOL};
use crate::objectives::PointSet;
use crate::rng::SeededRng;

/// Slack on the violation test so roundoff at the boundary cannot loop.
pub const VIOLATION_SLACK: f64 = 1e-12;

/// Tolerance used when auditing the guarantees after the fact.
pub const AUDIT_TOL: f64 = 1e-9;

/// Outcome of [`adaptive_projection`].
#[derive(Debug, Clone)]
pub struct AdaptiveReduction {
    /// Indices of the selected points, in selection order.
    pub selected: Vec<usize>,
    /// Projection onto the span of the selected points.
    pub projector: Projector,
    pub rounds: usize,
    /// `‖U^T Π_t‖_F²` after `t` rounds; entry 0 is the empty projection.
    pub potential_trace: Vec<f64>,
}

/// `‖U^T (I-Π)p‖` and `‖(I-Π)p‖`.
fn split_norms(p: &[f64], u: &OrthoBasis, pi: &Projector) -> (f64, f64) {
    let r = pi.complement(p);
    (linalg::norm(&u.coords(&r)), linalg::norm(&r))
}

/// Scans the points in index order and adds the first one with
/// `‖U^T(I-Π)p‖ > ε‖(I-Π)p‖` to the span, until no point violates it.
///
/// Each added point raises `‖U^T Π‖_F²` by more than `ε²`, and that quantity
/// never exceeds `rank(U)`, so at most `⌈j/ε²⌉` points are taken.
pub fn adaptive_projection(
    points: &PointSet,
    u: &OrthoBasis,
    eps: f64,
) -> Result<AdaptiveReduction> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps={eps} must lie in (0, 1)")));
    }
    if u.dim() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            actual: u.dim(),
        });
    }
    let mut span = OrthoBasis::empty(points.dim());
    let mut selected = Vec::new();
    let mut potential_trace = vec![0.0];
    // points whose residual is numerically inside the span cannot be added
    let mut stuck = vec![false; points.len()];
    loop {
        let pi = Projector::new(span.clone());
        let violator = points.rows().enumerate().position(|(i, p)| {
            if stuck[i] {
                return false;
            }
            let (lhs, rn) = split_norms(p, u, &pi);
            rn >= DROP_TOL && lhs > eps * rn + VIOLATION_SLACK
        });
        let Some(i) = violator else { break };
        if !span.try_extend(points.row(i))? {
            stuck[i] = true;
            continue;
        }
        selected.push(i);
        let newest = span.cols().last().expect("just extended");
        let gain = linalg::norm_sq(&u.coords(newest));
        let last = *potential_trace.last().expect("non-empty");
        potential_trace.push(last + gain);
    }
    Ok(AdaptiveReduction {
        rounds: selected.len(),
        selected,
        projector: Projector::new(span),
        potential_trace,
    })
}

/// Largest number of rounds the potential argument allows.
pub fn round_bound(rank: usize, eps: f64) -> usize {
    ((rank as f64) / (eps * eps) - 1e-9).ceil().max(0.0) as usize
}

/// Literal post-condition audit of a reduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionAudit {
    pub rounds: usize,
    pub round_bound: usize,
    /// `max_p ‖U^T(I-Π)p‖ - ε‖(I-Π)p‖` (non-positive when the guarantee holds).
    pub guarantee_excess: f64,
    /// `min_t potential[t] - ε² t`.
    pub potential_slack: f64,
    /// `max_p t4 - ε²‖(I-Π)p‖²`.
    pub t4_excess: f64,
    /// `max_p |t5| - 2ε‖p‖‖(I-Π)p‖`.
    pub t5_excess: f64,
    /// Whether the potential never decreased.
    pub potential_monotone: bool,
}

impl ReductionAudit {
    pub fn passed(&self) -> bool {
        self.rounds <= self.round_bound
            && self.guarantee_excess <= AUDIT_TOL
            && self.potential_slack >= -AUDIT_TOL
            && self.t4_excess <= AUDIT_TOL
            && self.t5_excess <= AUDIT_TOL
            && self.potential_monotone
    }
}

impl AdaptiveReduction {
    /// Checks the per-point guarantee, the round bound, the potential
    /// induction and the consequences for the decomposition terms.
    pub fn audit(&self, points: &PointSet, u: &OrthoBasis, eps: f64) -> Result<ReductionAudit> {
        let mut guarantee_excess = f64::NEG_INFINITY;
        let mut t4_excess = f64::NEG_INFINITY;
        let mut t5_excess = f64::NEG_INFINITY;
        for p in points.rows() {
            let (lhs, rn) = split_norms(p, u, &self.projector);
            guarantee_excess = guarantee_excess.max(lhs - eps * rn);
            let terms = linalg::decomposition_terms(p, u, &self.projector)?;
            t4_excess = t4_excess.max(terms.t4 - eps * eps * rn * rn);
            t5_excess = t5_excess.max(terms.t5.abs() - 2.0 * eps * linalg::norm(p) * rn);
        }
        let potential_slack = self
            .potential_trace
            .iter()
            .enumerate()
            .map(|(t, v)| v - eps * eps * t as f64)
            .fold(f64::INFINITY, f64::min);
        Ok(ReductionAudit {
            rounds: self.rounds,
            round_bound: round_bound(u.rank(), eps),
            guarantee_excess,
            potential_slack,
            t4_excess,
            t5_excess,
            potential_monotone: self.potential_trace.windows(2).all(|w| w[1] >= w[0]),
        })
    }
}

/// One randomised trial of [`reduction_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct ReductionTrial {
    pub trial: usize,
    pub n: usize,
    pub d: usize,
    pub j: usize,
    pub eps: f64,
    pub selected: Vec<usize>,
    #[serde(flatten)]
    pub audit: ReductionAudit,
    pub passed: bool,
}

/// The step sizes the sweep cycles through.
pub const SWEEP_EPS: [f64; 3] = [0.2, 0.35, 0.5];

/// Uniform point in the unit ball of `R^d`.
pub fn random_in_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = linalg::norm(&g).max(f64::MIN_POSITIVE);
    let radius: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    g.into_iter().map(|x| x * radius / n).collect()
}

/// Orthonormal basis of a uniformly random rank-`j` subspace of `R^d`.
pub fn random_basis<R: Rng + ?Sized>(d: usize, j: usize, rng: &mut R) -> Result<OrthoBasis> {
    if j > d {
        return Err(Error::InvalidRank { rank: j, dim: d });
    }
    let mut b = OrthoBasis::empty(d);
    while b.rank() < j {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        b.try_extend(&g)?;
    }
    Ok(b)
}

/// Runs `trials` random instances (`d ≤ 30`, `j ≤ min(4, d)`, `n ≤ 100`,
/// `eps` cycling through [`SWEEP_EPS`]) and audits each reduction. Trial `t`
/// draws from its own stream, so results do not depend on thread count.
pub fn reduction_sweep(trials: usize, seed: u64) -> Result<Vec<ReductionTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = SeededRng::new(seed, trial as u64);
            let d = rng.random_range(1..=30);
            let j = rng.random_range(1..=d.min(4));
            let n = rng.random_range(1..=100);
            let eps = SWEEP_EPS[trial % SWEEP_EPS.len()];
            let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(d, &mut rng)).collect();
            let points = PointSet::from_rows(format!("trial-{trial}"), &rows)?;
            let u = random_basis(d, j, &mut rng)?;
            let red = adaptive_projection(&points, &u, eps)?;
            let audit = red.audit(&points, &u, eps)?;
            Ok(ReductionTrial {
                trial,
                n,
                d,
                j,
                eps,
                selected: red.selected,
                passed: audit.passed(),
                audit,
            })
        })
        .collect()
}
