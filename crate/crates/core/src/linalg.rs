//! Gaussian elimination over an arbitrary finite [`Field`].

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::gf::Field;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: fmt::Debug> fmt::Debug for Matrix<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[E]> = self.data.chunks(self.cols.max(1)).take(self.rows).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl<E: Copy> Matrix<E> {
    pub fn filled(rows: usize, cols: usize, value: E) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<E>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.into_iter().flatten().collect() }
    }

    /// Builds an `rows x cols` matrix from `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<E> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<E>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Horizontal concatenation.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

pub fn zeros<F: Field>(field: &F, rows: usize, cols: usize) -> Matrix<F::Elem> {
    Matrix::filled(rows, cols, field.zero())
}

pub fn identity<F: Field>(field: &F, n: usize) -> Matrix<F::Elem> {
    Matrix::from_fn(n, n, |i, j| if i == j { field.one() } else { field.zero() })
}

pub fn mat_mul<F: Field>(field: &F, a: &Matrix<F::Elem>, b: &Matrix<F::Elem>) -> Matrix<F::Elem> {
    assert_eq!(a.cols, b.rows, "dimension mismatch");
    let mut out = zeros(field, a.rows, b.cols);
    for i in 0..a.rows {
        for t in 0..a.cols {
            let x = a[(i, t)];
            if field.is_zero(x) {
                continue;
            }
            for j in 0..b.cols {
                out[(i, j)] = field.add(out[(i, j)], field.mul(x, b[(t, j)]));
            }
        }
    }
    out
}

pub fn is_zero_matrix<F: Field>(field: &F, m: &Matrix<F::Elem>) -> bool {
    m.data.iter().all(|&x| field.is_zero(x))
}

/// Reduces `m` in place to reduced row echelon form; returns pivot columns.
pub fn rref<F: Field>(field: &F, m: &mut Matrix<F::Elem>) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        let Some(p) = (r..m.rows).find(|&i| !field.is_zero(m[(i, c)])) else {
            continue;
        };
        if p != r {
            for j in 0..m.cols {
                m.data.swap(p * m.cols + j, r * m.cols + j);
            }
        }
        let inv = field.inv(m[(r, c)]).expect("pivot is nonzero");
        for j in c..m.cols {
            m[(r, j)] = field.mul(m[(r, j)], inv);
        }
        for i in 0..m.rows {
            if i == r {
                continue;
            }
            let f = m[(i, c)];
            if field.is_zero(f) {
                continue;
            }
            for j in c..m.cols {
                m[(i, j)] = field.sub(m[(i, j)], field.mul(f, m[(r, j)]));
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(field: &F, m: &Matrix<F::Elem>) -> usize {
    rref(field, &mut m.clone()).len()
}

/// Basis of the right kernel `{v : m v = 0}`, one vector per free column.
pub fn kernel<F: Field>(field: &F, m: &Matrix<F::Elem>) -> Vec<Vec<F::Elem>> {
    let mut red = m.clone();
    let pivots = rref(field, &mut red);
    kernel_from_rref(field, &red, &pivots)
}

fn kernel_from_rref<F: Field>(field: &F, red: &Matrix<F::Elem>, pivots: &[usize]) -> Vec<Vec<F::Elem>> {
    let n = red.cols;
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![field.zero(); n];
            v[free] = field.one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = field.neg(red[(r, free)]);
            }
            v
        })
        .collect()
}

/// Solution set `particular + span(kernel)` of a linear system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSolution<E> {
    pub particular: Vec<E>,
    pub kernel: Vec<Vec<E>>,
}

impl<E> AffineSolution<E> {
    pub fn dimension(&self) -> usize {
        self.kernel.len()
    }
}

/// Solves `a x = b`; `None` when the system is inconsistent.
pub fn solve<F: Field>(field: &F, a: &Matrix<F::Elem>, b: &[F::Elem]) -> Option<AffineSolution<F::Elem>> {
    assert_eq!(a.rows, b.len());
    let n = a.cols;
    let mut aug = Matrix::from_fn(a.rows, n + 1, |i, j| if j < n { a[(i, j)] } else { b[i] });
    let pivots = rref(field, &mut aug);
    if pivots.last() == Some(&n) {
        return None;
    }
    let mut particular = vec![field.zero(); n];
    for (r, &pc) in pivots.iter().enumerate() {
        particular[pc] = aug[(r, n)];
    }
    let coeff = Matrix::from_fn(a.rows, n, |i, j| aug[(i, j)]);
    let kernel = kernel_from_rref(field, &coeff, &pivots);
    Some(AffineSolution { particular, kernel })
}

/// Inverse of a square matrix, `None` when singular.
pub fn invert<F: Field>(field: &F, m: &Matrix<F::Elem>) -> Option<Matrix<F::Elem>> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut aug = m.hcat(&identity(field, n));
    let pivots = rref(field, &mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(Matrix::from_fn(n, n, |i, j| aug[(i, n + j)]))
}

/// Vandermonde rows `(1, x, ..., x^(cols-1))` for each point.
pub fn vandermonde<F: Field>(field: &F, points: &[F::Elem], cols: usize) -> Matrix<F::Elem> {
    Matrix::from_fn(points.len(), cols, |i, j| field.pow(points[i], j as u64))
}
