use proptest::prelude::*;
use rand::Rng;

use riskbench_core::linalg::{
    decomposition_terms, orthonormalize, project_residual, top_j_singular_subspace, Matrix,
    OrthoBasis, PowerIterOptions, Projector,
};
use riskbench_core::reduction::{random_basis, random_in_ball};
use riskbench_core::rng::SeededRng;

/// Cyclic Jacobi eigenvalues of a small symmetric matrix, sorted decreasing.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn orthonormal_inputs_are_kept() {
    let b = orthonormalize(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
    assert_eq!(b.rank(), 2);
    assert_eq!(b.cols()[0], vec![1.0, 0.0, 0.0]);
    assert_eq!(b.cols()[1], vec![0.0, 1.0, 0.0]);
}

#[test]
fn dependent_vector_is_dropped() {
    let b = orthonormalize(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
    assert_eq!(b.rank(), 1);
    assert_eq!(b.cols()[0], vec![1.0, 0.0, 0.0]);
}

#[test]
fn random_vectors_span_check_via_gram() {
    let mut rng = SeededRng::new(3, 0);
    let vs: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let b = orthonormalize(&vs).unwrap();
    assert_eq!(b.rank(), 5);
    for (i, x) in b.cols().iter().enumerate() {
        for (j, y) in b.cols().iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((dot(x, y) - target).abs() < 1e-8);
        }
    }
    for v in &vs {
        let mut r = v.clone();
        for q in b.cols() {
            let c = dot(q, v);
            r.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
        assert!(dot(&r, &r).sqrt() < 1e-8);
    }
}

#[test]
fn residual_examples() {
    let e1 = OrthoBasis::axes(2, &[0]).unwrap();
    let (r, n) = project_residual(&[0.0, 1.0], &e1).unwrap();
    assert_eq!(r, vec![0.0, 1.0]);
    assert!((n - 1.0).abs() < 1e-15);
    let (r, n) = project_residual(&[0.6, 0.8], &e1).unwrap();
    assert!(r[0].abs() < 1e-15 && (r[1] - 0.8).abs() < 1e-15);
    assert!((n - 0.8).abs() < 1e-15);
    let (_, n) = project_residual(&[0.7, 0.0], &e1).unwrap();
    assert!(n < 1e-10);
}

#[test]
fn top_singular_direction_of_small_matrix() {
    let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let u = top_j_singular_subspace(&a, 1, PowerIterOptions::default()).unwrap();
    assert!((u.cols()[0][0].abs() - 1.0).abs() < 1e-8);

    let diag = Matrix::from_rows(&[
        vec![0.5, 0.0, 0.0],
        vec![0.0, -3.0, 0.0],
        vec![0.0, 0.0, 2.0],
    ])
    .unwrap();
    let u = top_j_singular_subspace(&diag, 2, PowerIterOptions::default()).unwrap();
    let captured: Vec<f64> = (0..3)
        .map(|axis| u.cols().iter().map(|c| c[axis] * c[axis]).sum())
        .collect();
    assert!(
        captured[0] < 1e-8 && (captured[1] - 1.0).abs() < 1e-8 && (captured[2] - 1.0).abs() < 1e-8
    );
}

#[test]
fn captured_energy_matches_jacobi() {
    let mut rng = SeededRng::new(11, 0);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let u = top_j_singular_subspace(&a, 2, PowerIterOptions::default()).unwrap();
        let energy: f64 = rows
            .iter()
            .map(|r| u.cols().iter().map(|c| dot(c, r).powi(2)).sum::<f64>())
            .sum();
        let gram: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| rows.iter().map(|r| r[i] * r[j]).sum())
                    .collect()
            })
            .collect();
        let vals = jacobi_eigenvalues(gram);
        let expected = vals[0] + vals[1];
        assert!(
            (energy - expected).abs() <= 1e-6 * expected,
            "{energy} vs {expected}"
        );
    }
}

proptest! {
    #[test]
    fn five_term_identity(seed in any::<u64>(), d in 1usize..=10, j_raw in 1usize..=3, m_raw in 0usize..=10) {
        let mut rng = SeededRng::new(seed, 0);
        let j = j_raw.min(d);
        let p = random_in_ball(d, &mut rng);
        let u = random_basis(d, j, &mut rng).unwrap();
        let pi = Projector::new(random_basis(d, m_raw.min(d), &mut rng).unwrap());
        let t = decomposition_terms(&p, &u, &pi).unwrap();
        let coords: Vec<f64> = u.cols().iter().map(|c| dot(c, &p)).collect();
        let direct = dot(&p, &p) - dot(&coords, &coords);
        prop_assert!((t.reconstruct() - direct).abs() < 1e-9);
    }

    #[test]
    fn orthonormalize_is_orthonormal(seed in any::<u64>(), d in 1usize..=8, m in 1usize..=8) {
        let mut rng = SeededRng::new(seed, 1);
        let vs: Vec<Vec<f64>> = (0..m).map(|_| random_in_ball(d, &mut rng)).collect();
        let b = orthonormalize(&vs).unwrap();
        prop_assert!(b.rank() <= m.min(d));
        prop_assert!(b.orthonormality_error() < 1e-10);
    }
}
