//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! and the scaling-and-squaring Padé matrix exponential.
//!
//! Composed state spaces top out at a few hundred states, so everything is
//! dense and allocation-light rather than blocked or sparse.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Dense row-major matrix. Indexing is 0-based `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows; returns `None` when rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add_scaled");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + factor * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "shape mismatch in left_mul");
        let mut out = vec![T::zero(); self.cols];
        for (k, &a) in v.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.row(k)) {
                *o = *o + a * b;
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows).map(|i| self.row(i).iter().fold(T::zero(), |acc, v| acc + v.abs())).fold(T::zero(), T::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorisation `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

/// Raised when a pivot falls below the caller's threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub column: usize,
}

impl<T: Scalar> Lu<T> {
    /// Factorises `a`. Pivots with magnitude `<= pivot_tol` are treated as zero.
    pub fn new(a: &Matrix<T>, pivot_tol: T) -> Result<Self, Singular> {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n).map(|i| (i, lu[(i, k)].abs())).fold((k, T::neg_infinity()), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
            if !(best > pivot_tol) {
                return Err(Singular { column: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - factor * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut column = vec![T::zero(); b.rows()];
        for j in 0..b.cols() {
            for (i, c) in column.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            for (i, v) in self.solve_vec(&column).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant meets double-precision backward error.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a [13/13] Padé approximant.
pub fn expm<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return a.clone();
    }
    let norm = a.norm_1().as_f64();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale(T::lit(0.5f64.powi(squarings)));

    let b = PADE13.map(T::lit);
    let ident = Matrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scale(b[13]);
    inner_u.add_scaled(b[11], &a4);
    inner_u.add_scaled(b[9], &a2);
    let mut u = a6.matmul(&inner_u);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &ident);
    let u = a.matmul(&u);

    let mut inner_v = a6.scale(b[12]);
    inner_v.add_scaled(b[10], &a4);
    inner_v.add_scaled(b[8], &a2);
    let mut v = a6.matmul(&inner_v);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &ident);

    let mut denom = v.clone();
    denom.add_scaled(-T::one(), &u);
    let numer = v.add(&u);
    // V - U is well conditioned for ||A||_1 <= theta_13.
    let lu = Lu::new(&denom, T::zero()).expect("Pade denominator is nonsingular after scaling");
    let mut result = lu.solve(&numer);
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z), Matrix::identity(3));
    }

    #[test]
    fn expm_diagonal() {
        let a = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 2.5]]).unwrap();
        let e = expm(&a);
        assert!(close(e[(0, 0)], (-1.0f64).exp(), 1e-14));
        assert!(close(e[(1, 1)], 2.5f64.exp(), 1e-14));
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_nilpotent_and_rotation() {
        let n = Matrix::from_rows(&[vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let e = expm(&n);
        assert!(close(e[(0, 1)], 3.0, 1e-15));
        let r = Matrix::from_rows(&[vec![0.0, -40.0], vec![40.0, 0.0]]).unwrap();
        let e = expm(&r);
        assert!((e[(0, 0)] - 40f64.cos()).abs() < 1e-11);
        assert!((e[(1, 0)] - 40f64.sin()).abs() < 1e-11);
    }

    #[test]
    fn two_state_generator_closed_form() {
        // exp(Qt) for [[-a, a], [b, -b]] has a closed form.
        let (a, b, t) = (3.0f64, 1.0f64, 30.0f64);
        let q = Matrix::from_rows(&[vec![-a * t, a * t], vec![b * t, -b * t]]).unwrap();
        let e = expm(&q);
        let s = a + b;
        let decay = (-s * t).exp();
        assert!(close(e[(0, 0)], b / s + a / s * decay, 1e-13));
        assert!(close(e[(1, 0)], b / s - b / s * decay, 1e-13));
    }

    #[test]
    fn lu_solves_and_detects_singularity() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let lu = Lu::new(&a, 1e-12).unwrap();
        let x = lu.solve_vec(&[3.0, 2.0, 4.0]);
        for (i, &xi) in x.iter().enumerate() {
            assert!((xi - 1.0).abs() < 1e-14, "x[{i}] = {xi}");
        }
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(Lu::new(&s, 1e-12).is_err());
    }

    #[test]
    fn matmul_and_left_mul_agree() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let v = [1.0, -2.0, 0.5];
        let row = Matrix::from_rows(&[v.to_vec()]).unwrap();
        assert_eq!(row.matmul(&a).row(0), a.left_mul(&v).as_slice());
    }
}
