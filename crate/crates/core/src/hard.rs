//! The lower-bound distribution on `2kj` axis vectors: `kj` "good" axes of
//! mass `p` and `kj` "bad" axes of mass `p(1-ε)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{kahan_sum, PointSet};
use crate::rng::{stream_id, SeededRng};
use crate::table::RiskRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardInstance {
    pub k: usize,
    pub j: usize,
    pub eps: f64,
    /// Mass of each good axis.
    pub p: f64,
    pub masses: Vec<f64>,
}

impl HardInstance {
    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    /// Number of good axes, `kj`.
    pub fn good(&self) -> usize {
        self.k * self.j
    }

    pub fn is_good(&self, axis: usize) -> bool {
        axis < self.good()
    }
}

/// Solves `kj p + kj p(1-ε) = 1` for `p` and lays out the masses, good axes
/// first.
pub fn build_hard_instance(k: usize, j: usize, eps: f64) -> Result<HardInstance> {
    if k == 0 || j == 0 {
        return Err(Error::domain("k and j must be positive"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!("eps={eps} must lie in [0, 1)")));
    }
    let kj = k * j;
    let p = 1.0 / (kj as f64 * (2.0 - eps));
    let masses = (0..2 * kj)
        .map(|i| if i < kj { p } else { p * (1.0 - eps) })
        .collect();
    Ok(HardInstance {
        k,
        j,
        eps,
        p,
        masses,
    })
}

/// Optimal distributional cost `kj p (1-ε)`: the good axes are covered and
/// the bad ones pay their full mass.
pub fn analytic_opt(inst: &HardInstance) -> f64 {
    inst.good() as f64 * inst.p * (1.0 - inst.eps)
}

/// Multinomial axis counts of `n` draws, by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(
    inst: &HardInstance,
    n: usize,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut remaining = n as u64;
    let mut mass_left = 1.0;
    let d = inst.dim();
    let mut counts = Vec::with_capacity(d);
    for (i, &m) in inst.masses.iter().enumerate() {
        let c = if i + 1 == d || remaining == 0 {
            remaining
        } else {
            let q = (m / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| Error::domain(e.to_string()))?
                .sample(rng)
        };
        counts.push(c);
        remaining -= c;
        mass_left -= m;
    }
    Ok(counts)
}

/// `n` axis vectors drawn from the instance (grouped by axis) and their
/// counts.
pub fn sample_hard<R: Rng + ?Sized>(
    inst: &HardInstance,
    n: usize,
    rng: &mut R,
) -> Result<(PointSet, Vec<u64>)> {
    let counts = sample_counts(inst, n, rng)?;
    let d = inst.dim();
    let mut data = Vec::with_capacity(n * d);
    for (axis, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let mut e = vec![0.0; d];
            e[axis] = 1.0;
            data.extend(e);
        }
    }
    Ok((PointSet::new("hard", n, d, data)?, counts))
}

/// Empirical risk minimiser on axis counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardErm {
    /// The `kj` covered axes, in selection order.
    pub chosen: Vec<usize>,
    /// Number of bad axes among `chosen`.
    pub bad_chosen: usize,
    /// Fraction of the sample left uncovered.
    pub sample_cost: f64,
    /// Mass left uncovered under the true distribution.
    pub dist_cost: f64,
    pub excess: f64,
}

/// Covers the `kj` axes with the largest counts (ties go to good axes, then
/// to the lower index). For axis-supported data this is optimal over all
/// unions of `k` rank-`j` subspaces.
pub fn erm_hard(inst: &HardInstance, counts: &[u64]) -> Result<HardErm> {
    let d = inst.dim();
    if counts.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: counts.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..d).collect();
    // good axes have the lower indices, so the index breaks both ties
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let chosen: Vec<usize> = order[..inst.good()].to_vec();
    let mut covered = vec![false; d];
    chosen.iter().for_each(|&a| covered[a] = true);
    let uncovered_count: u64 = (0..d).filter(|&a| !covered[a]).map(|a| counts[a]).sum();
    let dist_cost = kahan_sum((0..d).filter(|&a| !covered[a]).map(|a| inst.masses[a]));
    Ok(HardErm {
        bad_chosen: chosen.iter().filter(|&&a| !inst.is_good(a)).count(),
        sample_cost: if n == 0 {
            0.0
        } else {
            uncovered_count as f64 / n as f64
        },
        dist_cost,
        excess: dist_cost - analytic_opt(inst),
        chosen,
    })
}

/// How `ε` is chosen for each sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSchedule {
    /// Every `ε` in the list at every `n`.
    Fixed(Vec<f64>),
    /// `ε_n = c √(kj/n)`, capped at [`EPS_CAP`].
    Scaled { c: f64 },
}

/// Upper limit for scheduled `ε` values.
pub const EPS_CAP: f64 = 0.5;

impl EpsSchedule {
    pub fn values(&self, kj: usize, n: usize) -> Vec<f64> {
        match self {
            EpsSchedule::Fixed(v) => v.clone(),
            EpsSchedule::Scaled { c } => vec![(c * (kj as f64 / n as f64).sqrt()).min(EPS_CAP)],
        }
    }
}

/// One sampled ERM run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardRun {
    pub k: usize,
    pub j: usize,
    pub eps: f64,
    pub p: f64,
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    pub bad_chosen: usize,
    pub sample_cost: f64,
    pub dist_cost: f64,
    pub excess: f64,
}

impl HardRun {
    /// The accounting identity `excess = p ε |B_ex|`.
    pub fn predicted_excess(&self) -> f64 {
        self.p * self.eps * self.bad_chosen as f64
    }

    pub fn to_risk_row(&self) -> RiskRow {
        RiskRow {
            dataset: format!("hard:eps={}", self.eps),
            objective: "subspace".into(),
            z: 2,
            j: self.j,
            k: self.k,
            n: self.n,
            repeat: self.repeat,
            seed: self.seed,
            sample_cost: self.sample_cost,
            full_cost: self.dist_cost,
            excess: self.excess,
        }
    }
}

/// Sample + ERM for every `(n, ε, repeat)`; each run draws from its own
/// stream so the output does not depend on scheduling. Rows are ordered by
/// `n`, then `ε`, then repeat.
pub fn hard_scaling_experiment(
    k: usize,
    j: usize,
    schedule: &EpsSchedule,
    n_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<HardRun>> {
    if n_grid.is_empty() || repeats == 0 {
        return Err(Error::EmptyInput);
    }
    let mut cells = Vec::new();
    for &n in n_grid {
        let eps_values = schedule.values(k * j, n);
        if eps_values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (ei, eps) in eps_values.into_iter().enumerate() {
            for repeat in 0..repeats {
                cells.push((n, ei, eps, repeat));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(n, ei, eps, repeat)| {
            let inst = build_hard_instance(k, j, eps)?;
            let mut rng = SeededRng::new(seed, stream_id(&[n as u64, ei as u64, repeat as u64]));
            let counts = sample_counts(&inst, n, &mut rng)?;
            let erm = erm_hard(&inst, &counts)?;
            Ok(HardRun {
                k,
                j,
                eps,
                p: inst.p,
                n,
                repeat,
                seed,
                bad_chosen: erm.bad_chosen,
                sample_cost: erm.sample_cost,
                dist_cost: erm.dist_cost,
                excess: erm.excess,
            })
        })
        .collect()
}
