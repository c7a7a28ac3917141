//! Dense linear-algebra primitives: orthonormal bases, projections, the
//! top-j singular subspace of a data matrix and the five-term expansion of a
//! subspace residual.
//!
//! Vectors are plain `[f64]` slices. Bases store their columns explicitly so
//! that a projection `UU^T` is never materialised unless asked for.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Residual norm below which a vector is treated as dependent during
/// Gram-Schmidt elimination.
pub const DROP_TOL: f64 = 1e-10;

/// Input norm below which a vector counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A^T A`, accumulated row by row.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                let dst = &mut g.data[a * d..(a + 1) * d];
                for (b, rb) in r.iter().enumerate().skip(a) {
                    dst[b] += ra * rb;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

/// A set of `rank` orthonormal columns in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    dim: usize,
    cols: Vec<Vec<f64>>,
}

impl OrthoBasis {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            cols: Vec::new(),
        }
    }

    /// Basis made of the given standard axes.
    pub fn axes(dim: usize, axes: &[usize]) -> Result<Self> {
        let mut b = Self::empty(dim);
        for &a in axes {
            if a >= dim {
                return Err(Error::InvalidRank { rank: a + 1, dim });
            }
            let mut e = vec![0.0; dim];
            e[a] = 1.0;
            b.try_extend(&e)?;
        }
        Ok(b)
    }

    /// Wraps columns that are already orthonormal, checking within `1e-8`.
    pub fn from_orthonormal(dim: usize, cols: Vec<Vec<f64>>) -> Result<Self> {
        for c in &cols {
            check_dim(dim, c.len())?;
        }
        if cols.len() > dim {
            return Err(Error::InvalidRank {
                rank: cols.len(),
                dim,
            });
        }
        let b = Self { dim, cols };
        if b.orthonormality_error() > 1e-8 {
            return Err(Error::domain("columns are not orthonormal"));
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.cols.len()
    }

    pub fn cols(&self) -> &[Vec<f64>] {
        &self.cols
    }

    /// `U^T p`
    pub fn coords(&self, p: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, p)).collect()
    }

    /// `UU^T p`
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in &self.cols {
            axpy(dot(c, p), c, &mut out);
        }
        out
    }

    /// `(I - UU^T) p`, computed by modified Gram-Schmidt sweeps.
    pub fn residual(&self, p: &[f64]) -> Vec<f64> {
        let mut r = p.to_vec();
        for c in &self.cols {
            let a = dot(c, &r);
            axpy(-a, c, &mut r);
        }
        r
    }

    pub fn residual_norm_sq(&self, p: &[f64]) -> f64 {
        norm_sq(&self.residual(p))
    }

    /// Orthogonalises `v` against the basis (two passes) and appends it when
    /// the remaining norm is at least [`DROP_TOL`]. Returns whether a column
    /// was added.
    pub fn try_extend(&mut self, v: &[f64]) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        if self.rank() == self.dim {
            return Ok(false);
        }
        let mut r = self.residual(v);
        // second pass restores orthogonality lost to cancellation
        r = self.residual(&r);
        let nr = norm(&r);
        if !(nr >= DROP_TOL) {
            return Ok(false);
        }
        r.iter_mut().for_each(|x| *x /= nr);
        self.cols.push(r);
        Ok(true)
    }

    /// `max |U^T U - I|`
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.cols.iter().enumerate() {
            for (j, b) in self.cols.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    /// Dense `UU^T`.
    pub fn projection_matrix(&self) -> Matrix {
        let d = self.dim;
        let mut m = Matrix::zeros(d, d);
        for c in &self.cols {
            for a in 0..d {
                for b in 0..d {
                    m.data[a * d + b] += c[a] * c[b];
                }
            }
        }
        m
    }
}

/// Orthonormal basis for the span of `vectors`, by modified Gram-Schmidt with
/// a re-orthogonalisation pass. Near-dependent vectors are dropped.
pub fn orthonormalize<V: AsRef<[f64]>>(vectors: &[V]) -> Result<OrthoBasis> {
    let dim = match vectors.first() {
        Some(v) => v.as_ref().len(),
        None => return Err(Error::AllZero),
    };
    for v in vectors {
        let v = v.as_ref();
        check_dim(dim, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite vector entry"));
        }
    }
    if vectors.iter().all(|v| norm(v.as_ref()) < ZERO_TOL) {
        return Err(Error::AllZero);
    }
    let mut basis = OrthoBasis::empty(dim);
    for v in vectors {
        basis.try_extend(v.as_ref())?;
    }
    if basis.rank() == 0 {
        return Err(Error::AllZero);
    }
    Ok(basis)
}

/// `(p - BB^T p, ‖p - BB^T p‖)`
pub fn project_residual(p: &[f64], basis: &OrthoBasis) -> Result<(Vec<f64>, f64)> {
    check_dim(basis.dim(), p.len())?;
    let r = basis.residual(p);
    let n = norm(&r);
    Ok((r, n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

/// Rank-`j` orthonormal basis maximising `‖AU‖_F²` (uncentered PCA).
///
/// Runs power iteration with deflation on the `d × d` Gram matrix `A^T A`.
/// Directions with zero captured energy (when `rank(A) < j`) are completed
/// with arbitrary orthonormal vectors.
pub fn top_j_singular_subspace(a: &Matrix, j: usize, opts: PowerIterOptions) -> Result<OrthoBasis> {
    let gram = a.gram();
    top_j_eigen_subspace(&gram, j, opts)
}

/// Top-`j` eigenvectors of a symmetric PSD matrix by deflated power iteration.
pub fn top_j_eigen_subspace(gram: &Matrix, j: usize, opts: PowerIterOptions) -> Result<OrthoBasis> {
    let d = gram.cols();
    check_dim(gram.rows(), d)?;
    if j > d {
        return Err(Error::InvalidRank { rank: j, dim: d });
    }
    let trace = gram.trace().abs();
    let floor = 1e-14 * trace.max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = OrthoBasis::empty(d);
    let mut eigvals: Vec<f64> = Vec::with_capacity(j);

    // deflated product: (G - Σ λ_i u_i u_i^T) v
    let apply = |basis: &OrthoBasis, eigvals: &[f64], v: &[f64]| -> Vec<f64> {
        let mut w = gram.mul_vec(v);
        for (u, &lam) in basis.cols().iter().zip(eigvals) {
            axpy(-lam * dot(u, v), u, &mut w);
        }
        basis.residual(&w)
    };

    while basis.rank() < j {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        v = basis.residual(&v);
        let nv = norm(&v);
        if nv < DROP_TOL {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);

        let mut lambda = f64::NAN;
        let mut converged = false;
        let mut stable_steps = 0;
        for _ in 0..opts.max_iter {
            let w = apply(&basis, &eigvals, &v);
            let new_lambda = dot(&v, &w);
            let nw = norm(&w);
            if nw <= floor {
                // remaining spectrum is numerically zero; any direction works
                lambda = 0.0;
                converged = true;
                break;
            }
            let change = (new_lambda - lambda).abs();
            v = w.iter().map(|x| x / nw).collect();
            if change <= opts.tol * new_lambda.abs() + floor {
                stable_steps += 1;
                if stable_steps >= 3 {
                    lambda = new_lambda;
                    converged = true;
                    break;
                }
            } else {
                stable_steps = 0;
            }
            lambda = new_lambda;
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: opts.max_iter,
            });
        }
        if basis.try_extend(&v)? {
            eigvals.push(lambda.max(0.0));
        }
    }
    Ok(basis)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by decreasing eigenvalue; the
/// eigenvectors are the columns of the returned list. Independent of the
/// power-iteration path and used where an exact small-matrix answer is needed.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.rows();
    check_dim(n, m.cols())?;
    let mut a = m.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v.get(k, i)).collect())
        .collect();
    Ok((values, vectors))
}

/// Orthogonal projector `Π = BB^T`, represented by its basis `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    basis: OrthoBasis,
}

impl Projector {
    pub fn new(basis: OrthoBasis) -> Self {
        Self { basis }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(OrthoBasis::empty(dim))
    }

    pub fn identity(dim: usize) -> Self {
        let axes: Vec<usize> = (0..dim).collect();
        Self::new(OrthoBasis::axes(dim, &axes).expect("axes are in range"))
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn into_basis(self) -> OrthoBasis {
        self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `Π p`
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.basis.project(p)
    }

    /// `(I - Π) p`
    pub fn complement(&self, p: &[f64]) -> Vec<f64> {
        self.basis.residual(p)
    }

    pub fn matrix(&self) -> Matrix {
        self.basis.projection_matrix()
    }
}

/// The five terms of
/// `‖(I-UU^T)p‖² = ‖Πp‖² - ‖U^TΠp‖² + ‖(I-Π)p‖² - ‖UU^T(I-Π)p‖² - 2p^TΠUU^T(I-Π)p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionTerms {
    /// `‖Πp‖²`
    pub t1: f64,
    /// `‖U^T Π p‖²`
    pub t2: f64,
    /// `‖(I-Π)p‖²`
    pub t3: f64,
    /// `‖UU^T (I-Π) p‖²`
    pub t4: f64,
    /// `2 p^T Π UU^T (I-Π) p`
    pub t5: f64,
}

impl DecompositionTerms {
    /// Reassembles `‖(I-UU^T)p‖²`. The cross term enters with a minus sign:
    /// `‖U^T p‖² = t2 + t4 + t5`.
    pub fn reconstruct(&self) -> f64 {
        self.t1 - self.t2 + self.t3 - self.t4 - self.t5
    }
}

pub fn decomposition_terms(
    p: &[f64],
    u: &OrthoBasis,
    pi: &Projector,
) -> Result<DecompositionTerms> {
    check_dim(u.dim(), p.len())?;
    check_dim(pi.dim(), p.len())?;
    let inside = pi.apply(p);
    let outside = pi.complement(p);
    let a = u.coords(&inside);
    let b = u.coords(&outside);
    Ok(DecompositionTerms {
        t1: norm_sq(&inside),
        t2: norm_sq(&a),
        t3: norm_sq(&outside),
        t4: norm_sq(&b),
        t5: 2.0 * dot(&a, &b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_input() {
        let b = orthonormalize(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(b.rank(), 2);
        assert_eq!(b.cols()[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(b.cols()[1], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let b = orthonormalize(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(b.rank(), 1);
        assert_eq!(b.cols()[0], vec![1.0, 0.0]);
    }

    #[test]
    fn orthonormalize_all_zero() {
        assert!(matches!(
            orthonormalize(&[vec![0.0, 0.0], vec![1e-13, 0.0]]),
            Err(Error::AllZero)
        ));
    }

    #[test]
    fn orthonormalize_random_spans_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vs: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 8)).collect();
        let b = orthonormalize(&vs).unwrap();
        assert_eq!(b.rank(), 5);
        // explicit Gram matrix of the basis
        for i in 0..5 {
            for j in 0..5 {
                let g = dot(&b.cols()[i], &b.cols()[j]);
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((g - t).abs() < 1e-8);
            }
        }
        // span check through the dense projector
        let pm = b.projection_matrix();
        for v in &vs {
            let pv = pm.mul_vec(v);
            let r: f64 = v
                .iter()
                .zip(&pv)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn residual_examples() {
        let e1 = OrthoBasis::axes(2, &[0]).unwrap();
        let (r, n) = project_residual(&[0.0, 1.0], &e1).unwrap();
        assert_eq!(r, vec![0.0, 1.0]);
        assert_eq!(n, 1.0);

        let (r, n) = project_residual(&[0.6, 0.8], &e1).unwrap();
        assert_eq!(r, vec![0.0, 0.8]);
        assert!((n - 0.8).abs() < 1e-15);

        let b = orthonormalize(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let p = vec![2.0, 3.0, 1.0];
        let (_, n) = project_residual(&p, &b).unwrap();
        assert!(n < 1e-10);

        assert!(matches!(
            project_residual(&[1.0, 2.0, 3.0], &e1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn residual_is_orthogonal_and_pythagorean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.random_range(2..10);
            let j = rng.random_range(1..d);
            let vs: Vec<Vec<f64>> = (0..j).map(|_| rand_vec(&mut rng, d)).collect();
            let b = orthonormalize(&vs).unwrap();
            let p = rand_vec(&mut rng, d);
            let (r, rn) = project_residual(&p, &b).unwrap();
            for c in b.cols() {
                assert!(dot(c, &r).abs() < 1e-8);
            }
            let proj = b.project(&p);
            assert!((norm_sq(&p) - norm_sq(&proj) - rn * rn).abs() < 1e-9);
        }
    }

    #[test]
    fn top_singular_two_by_two() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let u = top_j_singular_subspace(&a, 1, PowerIterOptions::default()).unwrap();
        assert_eq!(u.rank(), 1);
        assert!((u.cols()[0][0].abs() - 1.0).abs() < 1e-8);
        assert!(u.cols()[0][1].abs() < 1e-6);
    }

    #[test]
    fn top_singular_diagonal_picks_largest_axes() {
        let a = Matrix::from_rows(&[
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, -3.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.1, 0.0],
            vec![0.0, 0.0, 0.0, 2.0],
        ])
        .unwrap();
        let u = top_j_singular_subspace(&a, 2, PowerIterOptions::default()).unwrap();
        let pm = u.projection_matrix();
        assert!((pm.get(1, 1) - 1.0).abs() < 1e-8);
        assert!((pm.get(3, 3) - 1.0).abs() < 1e-8);
        assert!(pm.get(0, 0).abs() < 1e-8);
    }

    #[test]
    fn top_singular_rank_deficient_completes_basis() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 0.0]]).unwrap();
        let u = top_j_singular_subspace(&a, 3, PowerIterOptions::default()).unwrap();
        assert_eq!(u.rank(), 3);
        assert!(u.orthonormality_error() < 1e-8);
    }

    #[test]
    fn jacobi_diagonalises() {
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vals[2] - 0.5).abs() < 1e-12);
        for (lam, v) in vals.iter().zip(&vecs) {
            let mv = m.mul_vec(v);
            for (a, b) in mv.iter().zip(v) {
                assert!((a - lam * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_identity_and_trivial_projectors() {
        let u = orthonormalize(&[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, -1.0]]).unwrap();
        let p = vec![0.3, -0.2, 0.4];
        let direct = u.residual_norm_sq(&p);

        let id = decomposition_terms(&p, &u, &Projector::identity(3)).unwrap();
        assert!(id.t3.abs() < 1e-15 && id.t4.abs() < 1e-15 && id.t5.abs() < 1e-15);
        assert!((id.t1 - id.t2 - direct).abs() < 1e-12);

        let zero = decomposition_terms(&p, &u, &Projector::zero(3)).unwrap();
        assert!(zero.t1 == 0.0 && zero.t2 == 0.0 && zero.t5 == 0.0);
        assert!((zero.t3 - zero.t4 - direct).abs() < 1e-12);

        let pi = Projector::new(orthonormalize(&[vec![1.0, 0.0, 1.0]]).unwrap());
        let t = decomposition_terms(&p, &u, &pi).unwrap();
        assert!((t.reconstruct() - direct).abs() < 1e-12);
    }
}
