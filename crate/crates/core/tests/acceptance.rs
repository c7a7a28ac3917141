//! End-to-end acceptance suite: one PASS/FAIL line per criterion, with the
//! measured value, the threshold and the wall time.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use riskbench_core::complexity::{paired_complexity, random_rank_j_pool, rank_j_pool_check};
use riskbench_core::fit::{fit_points_from_rows, fit_power_law, FitOptions, FitPoint};
use riskbench_core::hard::{
    analytic_opt, build_hard_instance, erm_hard, hard_scaling_experiment, sample_counts,
    EpsSchedule,
};
use riskbench_core::harness::{best_of_restarts, run_experiment, ExperimentConfig};
use riskbench_core::linalg::{decomposition_terms, Projector};
use riskbench_core::objectives::{
    power_bound_check, weak_triangle_checks, Objective, PointSet, POWER_CLOSENESS,
    POWER_DIFFERENCE, RESCALED_POWER_CLOSENESS, ROOT_CLOSENESS, WEAK_TRIANGLE,
};
use riskbench_core::reduction::{adaptive_projection, random_basis, random_in_ball};
use riskbench_core::rng::SeededRng;
use riskbench_core::solvers::{erm_oracle_small, SolverOptions};
use riskbench_core::table::{read_risk_csv, summarize};

struct Verdict {
    passed: bool,
    summary: String,
}

fn verdict(passed: bool, summary: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        summary: summary.into(),
    }
}

// ---------- small independent linear algebra ----------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt with two passes; drops near-dependent vectors.
fn orthonormal_span(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let n = norm(&r);
        if n > 1e-10 {
            out.push(r.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// `p - Σ q (q·p)` over an orthonormal list.
fn remove_span(p: &[f64], span: &[Vec<f64>]) -> Vec<f64> {
    let mut r = p.to_vec();
    for q in span {
        let c = dot(q, p);
        r.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
    }
    r
}

fn coords(p: &[f64], span: &[Vec<f64>]) -> Vec<f64> {
    span.iter().map(|q| dot(q, p)).collect()
}

// ---------- criteria ----------

fn decomposition_identity() -> Verdict {
    let mut rng = SeededRng::new(101, 0);
    let mut worst: f64 = 0.0;
    let trials = 1000;
    for _ in 0..trials {
        let d = rng.random_range(1..=10);
        let p = random_in_ball(d, &mut rng);
        let u = random_basis(d, rng.random_range(1..=d), &mut rng).unwrap();
        let pi = Projector::new(random_basis(d, rng.random_range(0..=d), &mut rng).unwrap());
        let terms = decomposition_terms(&p, &u, &pi).unwrap();
        let direct = norm(&remove_span(&p, u.cols())).powi(2);
        worst = worst.max((terms.reconstruct() - direct).abs());
    }
    verdict(
        worst < 1e-9,
        format!("{trials} trials, max residual {worst:.2e} (< 1e-9)"),
    )
}

fn adaptive_projection_suite() -> Verdict {
    let mut rng = SeededRng::new(202, 0);
    let trials = 200;
    let mut violations = 0;
    let mut worst_guarantee = f64::NEG_INFINITY;
    let mut max_rounds_ratio: f64 = 0.0;
    for t in 0..trials {
        let d = rng.random_range(2..=20);
        let j = rng.random_range(1..=d.min(4));
        let n = rng.random_range(5..=80);
        let eps = [0.2, 0.35, 0.5][t % 3];
        let u = random_basis(d, j, &mut rng).unwrap();
        // half the points sit close to U, so the greedy loop has work to do
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    let c = random_in_ball(j, &mut rng);
                    let mut p = vec![0.0; d];
                    for (b, ci) in u.cols().iter().zip(&c) {
                        p.iter_mut().zip(b).for_each(|(x, bi)| *x += 0.8 * ci * bi);
                    }
                    let noise = random_in_ball(d, &mut rng);
                    p.iter_mut().zip(&noise).for_each(|(x, e)| *x += 0.15 * e);
                    let s = norm(&p).max(1.0);
                    p.into_iter().map(|x| x / s).collect()
                } else {
                    random_in_ball(d, &mut rng)
                }
            })
            .collect();
        let points = PointSet::from_rows("c2", &rows).unwrap();
        let red = adaptive_projection(&points, &u, eps).unwrap();

        let bound = (j as f64 / (eps * eps)).ceil() as usize;
        max_rounds_ratio = max_rounds_ratio.max(red.selected.len() as f64 / bound as f64);
        if red.selected.len() > bound {
            violations += 1;
        }
        let chosen: Vec<Vec<f64>> = red.selected.iter().map(|&i| rows[i].clone()).collect();
        let span = orthonormal_span(&chosen);
        for p in &rows {
            let r = remove_span(p, &span);
            let lhs = norm(&coords(&r, u.cols()));
            let excess = lhs - eps * norm(&r);
            worst_guarantee = worst_guarantee.max(excess);
            if excess > 1e-9 {
                violations += 1;
            }
        }
        for step in 0..=chosen.len() {
            let prefix = orthonormal_span(&chosen[..step]);
            let potential: f64 = prefix
                .iter()
                .map(|q| norm(&coords(q, u.cols())).powi(2))
                .sum();
            if potential < eps * eps * step as f64 - 1e-9 {
                violations += 1;
            }
            if (potential - red.potential_trace[step]).abs() > 1e-9 {
                violations += 1;
            }
        }
        if !red.audit(&points, &u, eps).unwrap().passed() {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!(
            "{trials} trials, {violations} violations, worst guarantee slack {worst_guarantee:.2e}, max |M|/ceil(j/eps^2) = {max_rounds_ratio:.2}"
        ),
    )
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * (1.0 + rhs.abs())
}

fn power_bounds() -> Verdict {
    let mut rng = SeededRng::new(303, 0);
    let instances = 100_000;
    let mut violations = 0;
    let mut hypothesis_misses = 0;
    for i in 0..instances {
        let z: u32 = rng.random_range(1..=4);
        let zi = z as i32;
        let eps: f64 = rng.random_range(1e-3..=1.0);
        match i % 3 {
            0 => {
                let d = rng.random_range(1..=5);
                let (a, b, c) = (
                    random_in_ball(d, &mut rng),
                    random_in_ball(d, &mut rng),
                    random_in_ball(d, &mut rng),
                );
                let dist = |x: &[f64], y: &[f64]| {
                    norm(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>())
                };
                let (ab, ac, bc) = (dist(&a, &b), dist(&a, &c), dist(&b, &c));
                let checks = weak_triangle_checks(ab, ac, bc, z, eps);
                let first = (1.0 + eps).powi(zi - 1) * ac.powi(zi)
                    + ((1.0 + eps) / eps).powi(zi - 1) * bc.powi(zi);
                let second =
                    eps * ac.powi(zi) + ((2.0 * z as f64 + eps) / eps).powi(zi - 1) * bc.powi(zi);
                let ok = within(ab.powi(zi), first)
                    && within((ab.powi(zi) - ac.powi(zi)).abs(), second)
                    && checks.iter().all(|c| !c.violated())
                    && checks[0].name == WEAK_TRIANGLE
                    && checks[1].name == POWER_DIFFERENCE;
                violations += usize::from(!ok);
            }
            kind => {
                let b: f64 = rng.random_range(0.0..=2.0);
                let three_z = (3.0 * z as f64).powi(zi);
                let allowed = if kind == 1 {
                    eps * b
                } else {
                    (eps * b).max(eps * eps) / (4.0 * three_z)
                };
                let shift = rng.random_range(-1.0..=1.0) * allowed * (1.0 - 1e-9);
                let a2 = b * b + shift;
                if !(0.0..=4.0).contains(&a2) {
                    // outside [0, 2]; draw a shift towards the interior instead
                    continue;
                }
                let a = a2.sqrt();
                let report = power_bound_check(a, b, z, eps).unwrap();
                let gap = (a.powi(zi) - b.powi(zi)).abs();
                let ok = if kind == 1 {
                    let root = report.get(ROOT_CLOSENESS).unwrap();
                    let power = report.get(POWER_CLOSENESS).unwrap();
                    hypothesis_misses += usize::from(!root.applies || !power.applies);
                    within((a - b).abs(), eps)
                        && within(gap, 2.0 * three_z * eps)
                        && !root.violated()
                        && !power.violated()
                } else {
                    let rescaled = report.get(RESCALED_POWER_CLOSENESS).unwrap();
                    hypothesis_misses += usize::from(!rescaled.applies);
                    within(gap, eps) && !rescaled.violated()
                };
                violations += usize::from(!ok || !report.all_satisfied());
            }
        }
    }
    verdict(
        violations == 0 && hypothesis_misses == 0,
        format!("{instances} instances, {violations} violations, {hypothesis_misses} hypothesis misclassifications"),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut rng = SeededRng::new(404, 0);
    let opts = SolverOptions::default();
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for objective_kind in 0..2 {
        for t in 0..50 {
            let n = rng.random_range(3..=8);
            let k = rng.random_range(1..=3.min(n));
            let (d, objective) = if objective_kind == 0 {
                (rng.random_range(1..=3), Objective::Center { z: 2 })
            } else {
                (
                    3,
                    Objective::Subspace {
                        j: rng.random_range(1..=2),
                        z: 2,
                    },
                )
            };
            let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(d, &mut rng)).collect();
            let points = PointSet::from_rows("c4", &rows).unwrap();
            let oracle = erm_oracle_small(&points, k, objective).unwrap();
            let (_, totals) = best_of_restarts(&points, objective, k, 20, 1000 + t, &opts).unwrap();
            let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
            instances += 1;
            if oracle.cost > 1e-12 {
                worst = worst.max(best / oracle.cost);
            }
            if best > 1.05 * oracle.cost + 1e-12 {
                failures += 1;
            }
        }
    }
    verdict(
        failures == 0,
        format!("{instances} instances, {failures} above 1.05x oracle, worst ratio {worst:.4}"),
    )
}

/// Cheapest uncovered mass over all `kj`-subsets of axes.
fn subset_brute_force(masses: &[f64], size: usize) -> f64 {
    let d = masses.len();
    (0u32..1 << d)
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| {
            (0..d)
                .filter(|i| m & (1 << i) == 0)
                .map(|i| masses[i])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn hard_accounting() -> Verdict {
    let mut worst_identity: f64 = 0.0;
    let mut worst_opt: f64 = 0.0;
    let mut runs = 0;
    for (k, j) in [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (3, 2)] {
        for eps in [0.0, 0.1, 0.3, 0.5] {
            let inst = build_hard_instance(k, j, eps).unwrap();
            let kj = k * j;
            let analytic = kj as f64 * inst.p * (1.0 - eps);
            worst_opt = worst_opt.max((analytic_opt(&inst) - analytic).abs());
            if kj <= 3 {
                worst_opt = worst_opt
                    .max((analytic_opt(&inst) - subset_brute_force(&inst.masses, kj)).abs());
            }
            let mut rng = SeededRng::new(505, (k * 100 + j * 10) as u64 + (eps * 1000.0) as u64);
            for &n in &[8usize, 32, 128, 1024] {
                for _ in 0..25 {
                    let counts = sample_counts(&inst, n, &mut rng).unwrap();
                    let erm = erm_hard(&inst, &counts).unwrap();
                    let bad = erm.chosen.iter().filter(|&&a| a >= kj).count();
                    let uncovered: f64 = (0..inst.dim())
                        .filter(|a| !erm.chosen.contains(a))
                        .map(|a| inst.masses[a])
                        .sum();
                    worst_identity = worst_identity
                        .max((erm.excess - inst.p * eps * bad as f64).abs())
                        .max((uncovered - analytic - erm.excess).abs());
                    runs += 1;
                }
            }
        }
    }
    for eps in [0.1, 0.25] {
        for r in hard_scaling_experiment(
            2,
            1,
            &EpsSchedule::Fixed(vec![eps]),
            &[16, 256, 4096],
            50,
            9,
        )
        .unwrap()
        {
            worst_identity = worst_identity.max((r.excess - r.predicted_excess()).abs());
            runs += 1;
        }
    }
    verdict(
        worst_identity <= 1e-12 && worst_opt <= 1e-12,
        format!("{runs} runs, max |excess - p*eps*B_ex| {worst_identity:.1e}, max OPT error {worst_opt:.1e}"),
    )
}

fn lower_bound_scaling() -> Verdict {
    let n_grid: Vec<usize> = (6..=14).map(|e| 1usize << e).collect();
    let runs =
        hard_scaling_experiment(2, 1, &EpsSchedule::Scaled { c: 1.0 }, &n_grid, 400, 606).unwrap();
    let rows: Vec<_> = runs.iter().map(|r| r.to_risk_row()).collect();
    let points: Vec<FitPoint> = n_grid
        .iter()
        .map(|&n| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.excess).collect();
            FitPoint {
                k: 2.0,
                n: n as f64,
                y: xs.iter().sum::<f64>() / xs.len() as f64,
            }
        })
        .collect();
    let opts = FitOptions {
        q1_fixed: Some(0.0),
        ..FitOptions::default()
    };
    let f = fit_power_law(&points, &opts).unwrap();
    verdict(
        (0.35..=0.65).contains(&f.q2),
        format!(
            "k=2 j=1, n=2^6..2^14, 400 repeats, eps_n=sqrt(kj/n): q2 = {:.3} (window [0.35, 0.65])",
            f.q2
        ),
    )
}

fn rademacher_checks() -> Verdict {
    let mut failures = Vec::new();
    let mut worst_gap_sigmas = f64::NEG_INFINITY;
    let mut worst_ratio: f64 = 0.0;
    for (ni, &n) in [64usize, 256, 1024].iter().enumerate() {
        for (ji, &j) in [1usize, 2, 4].iter().enumerate() {
            let mut rng = SeededRng::new(707, (ni * 3 + ji) as u64);
            let d = 8;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(d, &mut rng)).collect();
            let points = PointSet::from_rows("c7", &rows).unwrap();
            let check = rank_j_pool_check(&points, j, 100, 500, &mut rng).unwrap();
            worst_ratio = worst_ratio.max(check.estimate.value / check.bound);
            if !check.passed {
                failures.push(format!("rank-j n={n} j={j}"));
            }
            let pool = random_rank_j_pool(&points, j, 100, &mut rng).unwrap();
            let paired = paired_complexity(&pool, 500, &mut rng).unwrap();
            if paired.gap_stderr > 0.0 {
                worst_gap_sigmas = worst_gap_sigmas.max(paired.gap / paired.gap_stderr);
            }
            if !paired.comparison_holds(5.0) {
                failures.push(format!("paired n={n} j={j}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "3x3 grid: max estimate/sqrt(j/n) = {worst_ratio:.3}, max paired gap = {worst_gap_sigmas:.1} stderr; failures: {failures:?}"
        ),
    )
}

fn curve_fit_recovery() -> Verdict {
    let (c, q1, q2) = (0.03, 0.44, 0.54);
    let rows: Vec<FitPoint> = [10.0f64, 20.0, 30.0, 50.0]
        .iter()
        .flat_map(|&k| {
            (6..=12).map(move |e| {
                let n = 2f64.powi(e);
                FitPoint {
                    k,
                    n,
                    y: c * k.powf(q1) / n.powf(q2),
                }
            })
        })
        .collect();
    let f = fit_power_law(&rows, &FitOptions::default()).unwrap();
    let err = (f.c - c)
        .abs()
        .max((f.q1 - q1).abs())
        .max((f.q2 - q2).abs());
    verdict(
        err <= 1e-2,
        format!(
            "fitted (c, q1, q2) = ({:.4}, {:.4}, {:.4}), max error {err:.1e}",
            f.c, f.q1, f.q2
        ),
    )
}

/// Synthetic stand-in for the real datasets: 20k points from five broad
/// Gaussian blobs in ten dimensions.
const DESK_DATASET: &str = "mixture:20000:10:5:0.4";

fn desk_replication() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for z in [1u32, 2] {
        let mut cfg = ExperimentConfig::new(
            DESK_DATASET,
            Objective::Center { z },
            vec![10, 20],
            (6..=12).map(|e| 1usize << e).collect(),
        );
        cfg.seed = 7;
        let out = dir.path().join(format!("desk-z{z}.csv"));
        run_experiment(&cfg, &out).unwrap();
        let rows = read_risk_csv(&out).unwrap();
        let f = fit_power_law(&fit_points_from_rows(&rows), &FitOptions::default()).unwrap();
        let cells = summarize(&rows);
        let decreasing = [10usize, 20].iter().all(|&k| {
            let means: Vec<f64> = cells.iter().filter(|c| c.k == k).map(|c| c.mean).collect();
            means.windows(2).all(|w| w[1] < w[0])
        });
        let in_window = (0.30..=0.70).contains(&f.q1) && (0.30..=0.70).contains(&f.q2);
        ok &= in_window && decreasing;
        lines.push(format!(
            "z={z}: q1={:.3} q2={:.3} c={:.3}, means decreasing: {decreasing}",
            f.q1, f.q2, f.c
        ));
    }
    verdict(
        ok,
        format!(
            "{DESK_DATASET}, k in {{10,20}}, n=2^6..2^12, 5 repeats; {}",
            lines.join("; ")
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    // a filter argument (as passed by `cargo test <name>`) selects criteria by number
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [Criterion; 9] = [
        (
            1,
            "decomposition identity",
            Duration::from_secs(5),
            decomposition_identity,
        ),
        (
            2,
            "adaptive projection guarantees",
            Duration::from_secs(30),
            adaptive_projection_suite,
        ),
        (
            3,
            "power inequalities",
            Duration::from_secs(10),
            power_bounds,
        ),
        (
            4,
            "EM vs exhaustive oracle",
            Duration::from_secs(120),
            oracle_equivalence,
        ),
        (
            5,
            "hard-instance accounting",
            Duration::from_secs(60),
            hard_accounting,
        ),
        (
            6,
            "lower-bound scaling exponent",
            Duration::from_secs(600),
            lower_bound_scaling,
        ),
        (
            7,
            "Rademacher checks",
            Duration::from_secs(300),
            rademacher_checks,
        ),
        (
            8,
            "curve-fit recovery",
            Duration::from_secs(10),
            curve_fit_recovery,
        ),
        (
            9,
            "desk-scale excess-risk replication",
            Duration::from_secs(1800),
            desk_replication,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| f == &id.to_string() || name.contains(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let on_time = elapsed <= budget;
        let passed = v.passed && on_time;
        failed += usize::from(!passed);
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s of {}s budget{})",
            if passed { "PASS" } else { "FAIL" },
            v.summary,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if on_time { "" } else { ", over budget" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
