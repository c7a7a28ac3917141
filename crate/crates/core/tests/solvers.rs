use proptest::prelude::*;

use riskbench_core::harness::solve;
use riskbench_core::linalg::OrthoBasis;
use riskbench_core::objectives::{CenterSolution, Objective, PointSet, SubspaceSolution};
use riskbench_core::reduction::random_in_ball;
use riskbench_core::rng::SeededRng;
use riskbench_core::seeding::adaptive_subspace_seed;
use riskbench_core::solvers::{
    center_update_gd, em_center, em_subspace, erm_oracle_small, SolverOptions,
};

fn pts(rows: &[&[f64]]) -> PointSet {
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    PointSet::from_rows("p", &owned).unwrap()
}

/// k-means optimum by enumerating every labelling and using cluster means.
fn brute_force_kmeans(rows: &[Vec<f64>], k: usize) -> f64 {
    let n = rows.len();
    let d = rows[0].len();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let labels: Vec<usize> = (0..n)
            .map(|_| {
                let l = c % k;
                c /= k;
                l
            })
            .collect();
        let mut total = 0.0;
        for cluster in 0..k {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == cluster)
                .map(|(r, _)| r)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mean: Vec<f64> = (0..d)
                .map(|a| members.iter().map(|r| r[a]).sum::<f64>() / members.len() as f64)
                .collect();
            total += members
                .iter()
                .map(|r| {
                    r.iter()
                        .zip(&mean)
                        .map(|(x, m)| (x - m) * (x - m))
                        .sum::<f64>()
                })
                .sum::<f64>();
        }
        best = best.min(total);
    }
    best
}

#[test]
fn two_cluster_line() {
    let p = pts(&[&[0.0], &[2.0], &[10.0], &[12.0]]);
    let init = CenterSolution::new(vec![vec![0.0], vec![10.0]], 2).unwrap();
    let (sol, trace) = em_center(&p, &init, &SolverOptions::default()).unwrap();
    assert_eq!(sol.centers, vec![vec![1.0], vec![11.0]]);
    assert!((trace.final_cost() - 4.0).abs() < 1e-12);
    assert!(
        (erm_oracle_small(&p, 2, Objective::Center { z: 2 })
            .unwrap()
            .cost
            - 4.0)
            .abs()
            < 1e-12
    );
}

#[test]
fn centers_on_points_are_a_fixed_point() {
    let p = pts(&[&[0.1, 0.2], &[0.5, -0.3], &[-0.4, 0.0]]);
    for z in 1..=4 {
        let init = CenterSolution::new(p.rows().map(|r| r.to_vec()).collect(), z).unwrap();
        let (_, trace) = em_center(&p, &init, &SolverOptions::default()).unwrap();
        assert_eq!(trace.final_cost(), 0.0);
        assert_eq!(trace.iterations, 1);
    }
}

#[test]
fn median_for_z1() {
    let p = pts(&[&[0.0], &[1.0], &[5.0]]);
    let init = CenterSolution::new(vec![vec![3.0]], 1).unwrap();
    let (sol, trace) = em_center(&p, &init, &SolverOptions::default()).unwrap();
    assert!((sol.centers[0][0] - 1.0).abs() <= 1e-3, "{:?}", sol.centers);
    assert!((trace.final_cost() - 5.0).abs() <= 2e-3);
}

#[test]
fn gradient_center_updates() {
    let opts = SolverOptions::default();
    let c = center_update_gd(&[&[-1.0], &[1.0]], 4, &[0.7], &opts).unwrap();
    assert!(c[0].abs() <= 1e-3, "{c:?}");
    let c = center_update_gd(&[&[0.0], &[0.0], &[1.0]], 1, &[0.6], &opts).unwrap();
    assert!(c[0].abs() <= 1e-3, "{c:?}");
}

#[test]
fn subspace_examples() {
    let p = pts(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
    let init = SubspaceSolution::new(vec![OrthoBasis::axes(2, &[1]).unwrap()], 1, 2).unwrap();
    let (sol, trace) = em_subspace(&p, &init, &SolverOptions::default()).unwrap();
    assert!((sol.bases[0].cols()[0][0].abs() - 1.0).abs() < 1e-8);
    assert!((trace.final_cost() - 1.0).abs() < 1e-9);

    let flat = pts(&[&[0.3, 0.1, 0.0], &[-0.2, 0.4, 0.0], &[0.5, 0.5, 0.0]]);
    let init = SubspaceSolution::new(vec![OrthoBasis::axes(3, &[0, 2]).unwrap()], 2, 2).unwrap();
    let (_, trace) = em_subspace(&flat, &init, &SolverOptions::default()).unwrap();
    assert!(trace.final_cost() < 1e-20);
}

#[test]
fn two_lines_are_recovered() {
    let rows: Vec<Vec<f64>> = (1..=10)
        .flat_map(|i| {
            let t = i as f64 / 10.0;
            [vec![t, 0.0, 0.0], vec![0.0, t, 0.0]]
        })
        .collect();
    let p = PointSet::from_rows("lines", &rows).unwrap();
    let opts = SolverOptions::default();
    let hits = (0..100)
        .filter(|&s| {
            let init = adaptive_subspace_seed(&p, 2, 1, 2, &mut SeededRng::new(s, 0)).unwrap();
            em_subspace(&p, &init, &opts).unwrap().1.final_cost() < 1e-10
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn oracle_matches_labelling_enumeration() {
    let mut rng = SeededRng::new(21, 0);
    for n in 2..=7 {
        for k in 1..=3.min(n) {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(2, &mut rng)).collect();
            let p = PointSet::from_rows("p", &rows).unwrap();
            let oracle = erm_oracle_small(&p, k, Objective::Center { z: 2 }).unwrap();
            let brute = brute_force_kmeans(&rows, k);
            assert!(
                (oracle.cost - brute).abs() < 1e-12,
                "n={n} k={k}: {} vs {brute}",
                oracle.cost
            );
        }
    }
}

#[test]
fn oracle_examples() {
    let p = pts(&[&[0.1, 0.2], &[0.5, -0.3], &[-0.4, 0.0]]);
    assert!(
        erm_oracle_small(&p, 3, Objective::Center { z: 2 })
            .unwrap()
            .cost
            < 1e-24
    );
    let axes = pts(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    let r = erm_oracle_small(&axes, 1, Objective::Subspace { j: 2, z: 2 }).unwrap();
    assert!((r.cost - 1.0).abs() < 1e-12);
}

#[test]
fn solve_never_beats_the_oracle() {
    let mut rng = SeededRng::new(31, 0);
    let opts = SolverOptions::default();
    for t in 0..30 {
        let rows: Vec<Vec<f64>> = (0..6).map(|_| random_in_ball(2, &mut rng)).collect();
        let p = PointSet::from_rows("p", &rows).unwrap();
        for objective in [
            Objective::Center { z: 2 },
            Objective::Subspace { j: 1, z: 2 },
        ] {
            let oracle = erm_oracle_small(&p, 2, objective).unwrap().cost;
            let (_, total) = solve(&p, objective, 2, &mut SeededRng::new(t, 1), &opts).unwrap();
            assert!(total >= oracle - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_traces_never_increase(seed in any::<u64>(), k in 1usize..4, z in 1u32..=3, subspace in any::<bool>()) {
        let mut rng = SeededRng::new(seed, 0);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| random_in_ball(3, &mut rng)).collect();
        let p = PointSet::from_rows("p", &rows).unwrap();
        let opts = SolverOptions { gd_iters: 100, ..SolverOptions::default() };
        let costs = if subspace {
            let init = adaptive_subspace_seed(&p, k, 1, z, &mut rng).unwrap();
            em_subspace(&p, &init, &opts).unwrap().1.costs
        } else {
            let init = riskbench_core::seeding::dz_seed(&p, k, z, &mut rng).unwrap();
            em_center(&p, &init, &opts).unwrap().1.costs
        };
        for w in costs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", costs);
        }
    }
}
