use super::matrix::{dot, gemm, Matrix};
use super::NumericsError;

const BLOCK: usize = 64;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: Matrix,
}

/// Factorizes a symmetric positive definite matrix.
///
/// Blocked left-looking variant: the trailing update of each block column is a
/// single gemm, the diagonal block and the panel below it are finished with
/// short dot products.
pub fn cholesky(a: &Matrix) -> Result<CholeskyFactor, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let scale = a.as_slice().iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let asym = a.max_asymmetry();
    if asym > 1e-10 * scale {
        return Err(NumericsError::NotSymmetric { deviation: asym });
    }

    let mut l = a.clone();
    let buf = l.as_mut_slice();
    for j0 in (0..n).step_by(BLOCK) {
        let jb = BLOCK.min(n - j0);
        if j0 > 0 {
            // A[j0.., j0..j0+jb] -= L[j0.., ..j0] * L[j0..j0+jb, ..j0]ᵀ
            // The read region (columns < j0) and the written region (columns
            // j0..j0+jb) are disjoint, so raw pointers into one buffer are fine.
            let ptr = buf.as_mut_ptr();
            // SAFETY: all offsets stay inside the n*n buffer; see comment above.
            unsafe {
                matrixmultiply::dgemm(
                    n - j0,
                    j0,
                    jb,
                    -1.0,
                    ptr.add(j0 * n),
                    n as isize,
                    1,
                    ptr.add(j0 * n),
                    1,
                    n as isize,
                    1.0,
                    ptr.add(j0 * n + j0),
                    n as isize,
                    1,
                );
            }
        }
        for j in j0..j0 + jb {
            let rj = j * n;
            let tail = dot(&buf[rj + j0..rj + j], &buf[rj + j0..rj + j]);
            let d = buf[rj + j] - tail;
            if !(d > 0.0) || !d.is_finite() {
                return Err(NumericsError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            buf[rj + j] = djj;
            for i in j + 1..n {
                let ri = i * n;
                let s = buf[ri + j] - dot(&buf[ri + j0..ri + j], &buf[rj + j0..rj + j]);
                buf[ri + j] = s / djj;
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            l[(i, j)] = 0.0;
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// `log |A| = 2 Σ log L_ii`
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>() * 2.0
    }

    fn check_len(&self, len: usize) -> Result<(), NumericsError> {
        if len != self.dim() {
            return Err(NumericsError::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        for i in 0..x.len() {
            let row = self.l.row(i);
            x[i] = (x[i] - dot(&row[..i], &x[..i])) / row[i];
        }
        Ok(x)
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        for i in (0..x.len()).rev() {
            let row = self.l.row(i);
            x[i] /= row[i];
            let xi = x[i];
            for (xk, lk) in x[..i].iter_mut().zip(&row[..i]) {
                *xk -= lk * xi;
            }
        }
        Ok(x)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        self.solve_upper(&self.solve_lower(b)?)
    }

    /// Solves `L X = B` for a block of right-hand sides (`B` is `n x m`).
    pub fn solve_lower_matrix(&self, b: &Matrix) -> Result<Matrix, NumericsError> {
        self.check_len(b.rows())?;
        let m = b.cols();
        let mut x = b.clone();
        for i in 0..x.rows() {
            let lrow = self.l.row(i);
            let (done, rest) = x.as_mut_slice().split_at_mut(i * m);
            let xi = &mut rest[..m];
            for (k, &lik) in lrow[..i].iter().enumerate() {
                if lik != 0.0 {
                    let xk = &done[k * m..(k + 1) * m];
                    for (a, b) in xi.iter_mut().zip(xk) {
                        *a -= lik * b;
                    }
                }
            }
            let inv = 1.0 / lrow[i];
            xi.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(x)
    }

    /// `L⁻¹`, lower triangular.
    pub fn lower_inverse(&self) -> Matrix {
        lower_triangular_inverse(&self.l)
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> Matrix {
        let w = self.lower_inverse();
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        gemm(n, n, n, 1.0, w.as_slice(), (1, n), w.as_slice(), (n, 1), 0.0, out.as_mut_slice(), (n, 1));
        out
    }

    /// `L Lᵀ`, used to check reconstruction.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        let l = self.l.as_slice();
        gemm(n, n, n, 1.0, l, (n, 1), l, (1, n), 0.0, out.as_mut_slice(), (n, 1));
        out
    }
}

/// Inverse of a nonsingular lower-triangular matrix by recursive 2x2 blocking.
pub fn lower_triangular_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    if n <= BLOCK {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            w[(i, i)] = 1.0 / l[(i, i)];
            for j in 0..i {
                let mut s = 0.0;
                for k in j..i {
                    s += l[(i, k)] * w[(k, j)];
                }
                w[(i, j)] = -s / l[(i, i)];
            }
        }
        return w;
    }
    let h = n / 2;
    let top: Vec<usize> = (0..h).collect();
    let bottom: Vec<usize> = (h..n).collect();
    let a = l.select_rows(&top).select_columns(&top);
    let b = l.select_rows(&bottom).select_columns(&top);
    let c = l.select_rows(&bottom).select_columns(&bottom);
    let ai = lower_triangular_inverse(&a);
    let ci = lower_triangular_inverse(&c);
    let t = b.matmul(&ai).expect("block shapes agree");
    let mut ll = ci.matmul(&t).expect("block shapes agree");
    ll.as_mut_slice().iter_mut().for_each(|v| *v = -*v);

    let mut w = Matrix::zeros(n, n);
    for i in 0..h {
        w.row_mut(i)[..h].copy_from_slice(ai.row(i));
    }
    for i in 0..n - h {
        let row = w.row_mut(h + i);
        row[..h].copy_from_slice(ll.row(i));
        row[h..].copy_from_slice(ci.row(i));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::seeded;
    use rand::Rng;

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += n as f64 * 0.1;
        }
        a
    }

    #[test]
    fn identity_factor() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.lower(), &Matrix::identity(3));
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let f = cholesky(&a).unwrap();
        let l = f.lower();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        match cholesky(&a) {
            Err(NumericsError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]);
        assert!(matches!(cholesky(&a), Err(NumericsError::NotSymmetric { .. })));
    }

    #[test]
    fn blocked_reconstruction_across_block_edges() {
        for &n in &[1, 63, 64, 65, 130, 257] {
            let a = random_spd(n, n as u64);
            let f = cholesky(&a).unwrap();
            let err = f.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(err < 1e-12, "n={n}: {err}");
            assert!((0..n).all(|i| f.lower()[(i, i)] > 0.0));
        }
    }

    #[test]
    fn solves_and_inverse() {
        let n = 150;
        let a = random_spd(n, 7);
        let f = cholesky(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        let r = a.matvec(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-9 * b.iter().map(|v| v * v).sum::<f64>().sqrt());

        let inv = f.inverse();
        let eye = a.matmul(&inv).unwrap();
        assert!(eye.sub(&Matrix::identity(n)).frobenius_norm() < 1e-9);
    }

    #[test]
    fn matrix_rhs_matches_vector_solve() {
        let a = random_spd(70, 3);
        let f = cholesky(&a).unwrap();
        let b = Matrix::from_fn(70, 3, |i, j| (i * 3 + j) as f64 * 0.01);
        let x = f.solve_lower_matrix(&b).unwrap();
        for j in 0..3 {
            let v = f.solve_lower(&b.column(j)).unwrap();
            for i in 0..70 {
                assert!((x[(i, j)] - v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 8.0]]);
        let f = cholesky(&a).unwrap();
        assert!((f.log_det() - 16f64.ln()).abs() < 1e-14);
    }
}
