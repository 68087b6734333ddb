//! Small dense linear algebra over any [`Scalar`].
//!
//! Matrices here are at most a few dozen rows (Gram systems of size 2M, bordered
//! determinants of size 2M+1), so everything is row-major `Vec` storage with
//! straightforward O(n^3) algorithms chosen for accuracy over speed.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|v| v.to_f64())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, v| m.max_of(v.abs()))
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{:.6e}", v.to_f64())).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Determinant by Gaussian elimination with complete pivoting.
#[derive(Clone, Copy, Debug)]
pub struct PivotedDeterminant<T> {
    pub value: T,
    /// max |U_ij| / max |A_ij|, the classical growth factor.
    pub growth: f64,
}

pub fn determinant<T: Scalar>(a: &Matrix<T>) -> PivotedDeterminant<T> {
    assert_eq!(a.rows(), a.cols(), "determinant of non-square matrix");
    let n = a.rows();
    if n == 0 {
        return PivotedDeterminant {
            value: T::one(),
            growth: 1.0,
        };
    }
    let mut m = a.clone();
    let scale = a.max_abs().to_f64();
    let mut max_seen = scale;
    let mut det = T::one();
    for k in 0..n {
        let (mut pi, mut pj) = (k, k);
        let mut best = T::zero();
        for i in k..n {
            for j in k..n {
                let v = m[(i, j)].abs();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        if best == T::zero() {
            return PivotedDeterminant {
                value: T::zero(),
                growth: max_seen / scale.max(f64::MIN_POSITIVE),
            };
        }
        if pi != k {
            m.swap_rows(pi, k);
            det = -det;
        }
        if pj != k {
            m.swap_cols(pj, k);
            det = -det;
        }
        let pivot = m[(k, k)];
        det *= pivot;
        for i in k + 1..n {
            let f = m[(i, k)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in k + 1..n {
                let upd = m[(i, j)] - f * m[(k, j)];
                m[(i, j)] = upd;
                max_seen = max_seen.max(upd.abs().to_f64());
            }
        }
    }
    PivotedDeterminant {
        value: det,
        growth: max_seen / scale.max(f64::MIN_POSITIVE),
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unsorted) and the matrix whose columns are the
/// corresponding orthonormal eigenvectors.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::from_f64(T::epsilon());
    let two = T::from_f64(2.0);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // relative off-diagonal criterion (Demmel-Veselic)
                if apq.abs() <= eps * (app.abs() * aqq.abs()).sqrt() {
                    m[(p, q)] = T::zero();
                    m[(q, p)] = T::zero();
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (two * apq);
                let mut t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                if theta < T::zero() {
                    t = -t;
                }
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Rank-revealing factorization of a symmetric positive semi-definite system.
///
/// The matrix is first scaled to unit diagonal, `S = D^-1/2 G D^-1/2`, then
/// diagonalized by Jacobi rotations. Eigenvalues of `S` below
/// `threshold * max eigenvalue` are reported as a rank deficiency.
#[derive(Clone)]
pub struct SpdFactor<T> {
    inv_sqrt_diag: Vec<T>,
    eigenvalues: Vec<T>,
    eigenvectors: Matrix<T>,
    pub condition: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankDeficiency {
    pub min_ratio: f64,
    pub threshold: f64,
}

impl<T: Scalar> SpdFactor<T> {
    pub fn new(g: &Matrix<T>, threshold: f64) -> Result<Self, RankDeficiency> {
        let n = g.rows();
        let mut inv_sqrt_diag = Vec::with_capacity(n);
        for i in 0..n {
            let d = g[(i, i)];
            if !(d > T::zero()) {
                return Err(RankDeficiency {
                    min_ratio: 0.0,
                    threshold,
                });
            }
            inv_sqrt_diag.push(T::one() / d.sqrt());
        }
        let scaled = Matrix::from_fn(n, n, |i, j| g[(i, j)] * inv_sqrt_diag[i] * inv_sqrt_diag[j]);
        let (eigenvalues, eigenvectors) = symmetric_eigen(&scaled);
        let max = eigenvalues.iter().fold(T::zero(), |m, &v| m.max_of(v));
        let min = eigenvalues.iter().fold(max, |m, &v| m.min_of(v));
        let ratio = if max > T::zero() {
            (min / max).to_f64()
        } else {
            0.0
        };
        if !(ratio > threshold) {
            return Err(RankDeficiency {
                min_ratio: ratio,
                threshold,
            });
        }
        Ok(Self {
            inv_sqrt_diag,
            eigenvalues,
            eigenvectors,
            condition: 1.0 / ratio,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.inv_sqrt_diag.len();
        assert_eq!(rhs.len(), n);
        let b: Vec<T> = rhs.iter().zip(&self.inv_sqrt_diag).map(|(&r, &d)| r * d).collect();
        // y = V diag(1/lambda) V^T b
        let mut coef = vec![T::zero(); n];
        for k in 0..n {
            let proj: T = (0..n).map(|i| self.eigenvectors[(i, k)] * b[i]).sum();
            let w = proj / self.eigenvalues[k];
            for (i, c) in coef.iter_mut().enumerate() {
                *c += self.eigenvectors[(i, k)] * w;
            }
        }
        coef.iter().zip(&self.inv_sqrt_diag).map(|(&c, &d)| c * d).collect()
    }
}
