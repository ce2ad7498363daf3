//! Small dense matrix and LU factorization.
//!
//! Feeders here have at most a few hundred buses, so every system the solver
//! touches is stored densely in row-major order.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * k).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factor(self)
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

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    packed: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn factor(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Numerical(format!(
                "cannot factor a non-square {}x{} matrix",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(T::min_positive_value());
        let singular_tol = scale * T::epsilon() * T::lit(n.max(1) as f64);

        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= singular_tol {
                return Err(Error::Numerical(format!("singular matrix (pivot {k})")));
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != T::zero() {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= factor * ukj;
                    }
                }
            }
        }
        Ok(Self { n, packed: lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "dimension mismatch");
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.packed[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.packed[(i, j)] * x[j];
            }
            x[i] = s / self.packed[(i, i)];
        }
        x
    }

    /// Solves for every column of the identity, returning `A⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoted_system() {
        // zero leading entry forces a row swap
        let a = Matrix::from_fn(3, 3, |i, j| [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]][i][j]);
        let x = [1.0f64, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let got = a.lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Matrix::from_fn(4, 4, |i, j| if i == j { 4.0 } else { 1.0 / (1 + i + j) as f64 });
        let inv = a.lu().unwrap().inverse();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_is_an_error() {
        let a = Matrix::from_fn(2, 2, |i, j| [[1.0, 2.0], [2.0, 4.0]][i][j]);
        assert!(matches!(a.lu(), Err(Error::Numerical(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::from_fn(2, 2, |i, j| [[2.0f32, 1.0], [1.0, 3.0]][i][j]);
        let x = a.lu().unwrap().solve(&[3.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }
}
