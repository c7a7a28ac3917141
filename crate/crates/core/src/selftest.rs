//! A quick invariant sweep over every module, for `riskbench selftest`.

use rand::Rng;
use serde::Serialize;

use crate::complexity::paired_complexity;
use crate::error::Result;
use crate::fit::{fit_power_law, FitOptions, FitPoint};
use crate::hard::{build_hard_instance, hard_scaling_experiment, EpsSchedule};
use crate::linalg::{decomposition_terms, orthonormalize, Projector};
use crate::nets::{covering_radius_audit, unit_ball_net};
use crate::objectives::{power_bound_check, Objective, PointSet};
use crate::reduction::{random_basis, random_in_ball, reduction_sweep};
use crate::rng::SeededRng;
use crate::seeding::dz_seed;
use crate::solvers::{em_center, erm_oracle_small, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub check: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed violation margin, or another summary number.
    pub detail: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

fn decomposition(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 1);
    let trials = 200;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let d = rng.random_range(1..=10);
        let p = random_in_ball(d, &mut rng);
        let u = random_basis(d, rng.random_range(1..=d), &mut rng)?;
        let pi = Projector::new(random_basis(d, rng.random_range(0..=d), &mut rng)?);
        let terms = decomposition_terms(&p, &u, &pi)?;
        let residual = (terms.reconstruct() - u.residual_norm_sq(&p)).abs();
        worst = worst.max(residual);
        failures += usize::from(residual >= 1e-9);
    }
    Ok(CheckOutcome {
        module: "linalg",
        check: "decomposition_identity",
        trials,
        failures,
        detail: worst,
    })
}

fn orthonormality(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 2);
    let trials = 200;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let d = rng.random_range(1..=12);
        let m = rng.random_range(1..=d + 2);
        let vs: Vec<Vec<f64>> = (0..m).map(|_| random_in_ball(d, &mut rng)).collect();
        let b = orthonormalize(&vs)?;
        worst = worst.max(b.orthonormality_error());
        failures += usize::from(b.orthonormality_error() > 1e-10 || b.rank() > d);
    }
    Ok(CheckOutcome {
        module: "linalg",
        check: "orthonormalize",
        trials,
        failures,
        detail: worst,
    })
}

fn power_bounds(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 3);
    let trials = 10_000;
    let mut failures = 0;
    for _ in 0..trials {
        let a = rng.random_range(0.0..=2.0);
        let b = rng.random_range(0.0..=2.0);
        let z = rng.random_range(1..=4);
        let eps = rng.random_range(0.01..=1.0);
        failures += usize::from(!power_bound_check(a, b, z, eps)?.all_satisfied());
    }
    Ok(CheckOutcome {
        module: "objectives",
        check: "power_bounds",
        trials,
        failures,
        detail: 0.0,
    })
}

fn reduction(seed: u64) -> Result<CheckOutcome> {
    let sweep = reduction_sweep(30, seed)?;
    Ok(CheckOutcome {
        module: "reduction",
        check: "adaptive_projection_audit",
        trials: sweep.len(),
        failures: sweep.iter().filter(|t| !t.passed).count(),
        detail: sweep
            .iter()
            .map(|t| t.audit.guarantee_excess)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

fn nets(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 4);
    let eps = 0.25;
    let net = unit_ball_net(3, eps)?;
    let radius = covering_radius_audit(&net, 3, 2000, &mut rng)?;
    Ok(CheckOutcome {
        module: "nets",
        check: "unit_ball_covering",
        trials: 2000,
        failures: usize::from(radius > eps),
        detail: radius,
    })
}

fn complexity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 5);
    let pool: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..32).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let est = paired_complexity(&pool, 200, &mut rng)?;
    Ok(CheckOutcome {
        module: "complexity",
        check: "rademacher_vs_gaussian",
        trials: 200,
        failures: usize::from(!est.comparison_holds(5.0)),
        detail: est.gap,
    })
}

fn hard(seed: u64) -> Result<CheckOutcome> {
    let runs = hard_scaling_experiment(
        2,
        1,
        &EpsSchedule::Fixed(vec![0.1, 0.3]),
        &[16, 64, 256],
        10,
        seed,
    )?;
    let worst = runs
        .iter()
        .map(|r| (r.excess - r.predicted_excess()).abs())
        .fold(0.0, f64::max);
    let inst = build_hard_instance(2, 1, 0.1)?;
    let mass: f64 = inst.masses.iter().sum();
    Ok(CheckOutcome {
        module: "hard",
        check: "excess_accounting",
        trials: runs.len(),
        failures: runs
            .iter()
            .filter(|r| (r.excess - r.predicted_excess()).abs() > 1e-12)
            .count()
            + usize::from((mass - 1.0).abs() > 1e-12),
        detail: worst,
    })
}

fn fit() -> Result<CheckOutcome> {
    let (c, q1, q2) = (0.03, 0.44, 0.54);
    let rows: Vec<FitPoint> = [10.0, 20.0, 30.0]
        .iter()
        .flat_map(|&k| {
            (6..=12).map(move |e| {
                let n = 2f64.powi(e);
                FitPoint {
                    k,
                    n,
                    y: c * f64::powf(k, q1) / n.powf(q2),
                }
            })
        })
        .collect();
    let f = fit_power_law(&rows, &FitOptions::default())?;
    let err = (f.c - c)
        .abs()
        .max((f.q1 - q1).abs())
        .max((f.q2 - q2).abs());
    Ok(CheckOutcome {
        module: "fit",
        check: "planted_recovery",
        trials: 1,
        failures: usize::from(err > 1e-2),
        detail: err,
    })
}

fn solvers(seed: u64) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(seed, 6);
    let trials = 10;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(3..=7);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(2, &mut rng)).collect();
        let points = PointSet::from_rows("selftest", &rows)?;
        let k = rng.random_range(1..=2);
        let oracle = erm_oracle_small(&points, k, Objective::Center { z: 2 })?;
        let best = (0..20)
            .map(|_| {
                let init = dz_seed(&points, k, 2, &mut rng)?;
                Ok(em_center(&points, &init, &SolverOptions::default())?
                    .1
                    .final_cost())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let ratio = if oracle.cost > 0.0 {
            best / oracle.cost
        } else {
            1.0
        };
        worst = worst.max(ratio);
        failures += usize::from(best > 1.05 * oracle.cost + 1e-12);
    }
    Ok(CheckOutcome {
        module: "solvers",
        check: "em_vs_oracle",
        trials,
        failures,
        detail: worst,
    })
}

/// Runs every check; takes a second or two in an optimised build.
pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let checks = vec![
        decomposition(seed)?,
        orthonormality(seed)?,
        power_bounds(seed)?,
        reduction(seed)?,
        nets(seed)?,
        complexity(seed)?,
        hard(seed)?,
        fit()?,
        solvers(seed)?,
    ];
    Ok(SelftestReport { seed, checks })
}
