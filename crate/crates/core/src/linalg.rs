//! Small dense linear algebra: least squares through a one-sided Jacobi SVD
//! and a cyclic Jacobi symmetric eigensolver.
//!
//! Problem sizes here are tiny (tens of rows, fewer than twenty columns), so
//! both routines favour accuracy and rank transparency over speed.

use crate::error::{Error, Result};

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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large inputs
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Thin SVD `A = U diag(s) V^T` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x cols`, columns are left singular vectors (zero for null directions)
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    /// `cols x cols`, orthogonal
    pub v: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Requires `rows >= cols`.
pub fn svd(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(Error::Rank {
            rank: m,
            required: n,
        });
    }
    let mut w = a.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(&w.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)] / s;
            }
        }
        for i in 0..n {
            vs[(i, k)] = v[(i, j)];
        }
    }
    Ok(Svd {
        u,
        singular_values,
        v: vs,
    })
}

/// Relative singular-value cutoff below which a direction counts as null.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub singular_values: Vec<f64>,
    /// `sigma_max / sigma_min`
    pub condition: f64,
    svd: Svd,
}

impl LeastSquares {
    /// `(A^T A)^{-1} = V diag(s^-2) V^T`.
    pub fn gram_inverse(&self) -> Matrix {
        let n = self.svd.v.cols();
        let mut g = Matrix::zeros(n, n);
        for k in 0..n {
            let inv = self.svd.singular_values[k].powi(-2);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += self.svd.v[(i, k)] * inv * self.svd.v[(j, k)];
                }
            }
        }
        g
    }
}

/// Minimizes `||A u - b||_2` for full-column-rank `A`.
///
/// Returns [`Error::Rank`] with the numerical rank when any singular value
/// falls below [`RANK_TOLERANCE`] times the largest.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    if b.len() != a.rows() {
        return Err(Error::Dimension {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let n = a.cols();
    let svd = svd(a)?;
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > RANK_TOLERANCE * smax)
        .count();
    if rank < n {
        return Err(Error::Rank { rank, required: n });
    }

    // u = V diag(1/s) U^T b
    let mut coefficients = vec![0.0; n];
    for k in 0..n {
        let proj: f64 = (0..a.rows()).map(|i| svd.u[(i, k)] * b[i]).sum();
        let scaled = proj / svd.singular_values[k];
        for i in 0..n {
            coefficients[i] += svd.v[(i, k)] * scaled;
        }
    }
    let fitted = a.matvec(&coefficients)?;
    let residuals: Vec<f64> = b.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let residual_norm = norm2(&residuals);
    let condition = smax / svd.singular_values[n - 1];
    Ok(LeastSquares {
        coefficients,
        residuals,
        residual_norm,
        singular_values: svd.singular_values.clone(),
        condition,
        svd,
    })
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// descending
    pub values: Vec<f64>,
    /// column `k` pairs with `values[k]`
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver. The input is symmetrized before iterating.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.cols(),
        });
    }
    let mut s = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = s.data.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (skp, skq) = (s[(k, p)], s[(k, q)]);
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let (spk, sqk) = (s[(p, k)], s[(q, k)]);
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| s[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let mut vectors = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = v[(i, j)];
        }
    }
    Ok(SymmetricEigen {
        values: order.iter().map(|&j| diag[j]).collect(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data
            .iter()
            .zip(&b.data)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn svd_reconstructs() {
        let a = Matrix::from_rows(&[
            [1.0, 2.0, 0.5],
            [0.0, -1.0, 3.0],
            [4.0, 0.3, 1.0],
            [2.0, 2.0, 2.0],
        ])
        .unwrap();
        let svd = svd(&a).unwrap();
        let mut us = svd.u.clone();
        for i in 0..us.rows() {
            for k in 0..us.cols() {
                us[(i, k)] *= svd.singular_values[k];
            }
        }
        let back = us.matmul(&svd.v.transpose()).unwrap();
        assert!(max_abs_diff(&back, &a) < 1e-13);
        let vtv = svd.v.transpose().matmul(&svd.v).unwrap();
        assert!(max_abs_diff(&vtv, &Matrix::identity(3)) < 1e-14);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let b = [1.0, 2.0, 2.0, 4.0];
        let ls = least_squares(&a, &b).unwrap();
        // closed form for simple regression: slope 0.9, intercept 0.9
        assert!((ls.coefficients[0] - 0.9).abs() < 1e-14);
        assert!((ls.coefficients[1] - 0.9).abs() < 1e-14);
        let at = a.transpose();
        let grad = at.matvec(&ls.residuals).unwrap();
        assert!(norm2(&grad) < 1e-13);
    }

    #[test]
    fn rank_deficiency_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        match least_squares(&a, &[1.0, 2.0, 3.0]) {
            Err(Error::Rank { rank, required }) => {
                assert_eq!(rank, 1);
                assert_eq!(required, 2);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn underdetermined_is_rank_error() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(least_squares(&a, &[1.0]), Err(Error::Rank { .. })));
    }

    #[test]
    fn gram_inverse_is_inverse() {
        let a = Matrix::from_rows(&[[1.0, -1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.5, 0.25], [1.0, 1.0, 1.0]])
            .unwrap();
        let ls = least_squares(&a, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let gram = a.transpose().matmul(&a).unwrap();
        let prod = gram.matmul(&ls.gram_inverse()).unwrap();
        assert!(max_abs_diff(&prod, &Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn eigen_of_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = e.vectors.column(0);
        assert!((v0[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((v0[0] - v0[1]).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs() {
        let a = Matrix::from_rows(&[
            [4.0, 1.0, -2.0, 0.5],
            [1.0, 3.0, 0.0, 1.5],
            [-2.0, 0.0, 5.0, -1.0],
            [0.5, 1.5, -1.0, 2.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&a).unwrap();
        let mut vl = e.vectors.clone();
        for i in 0..4 {
            for k in 0..4 {
                vl[(i, k)] *= e.values[k];
            }
        }
        let back = vl.matmul(&e.vectors.transpose()).unwrap();
        assert!(max_abs_diff(&back, &a) < 1e-12);
        let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
        assert!(max_abs_diff(&vtv, &Matrix::identity(4)) < 1e-12);
    }
}
