//! Dense symmetric positive-definite solves for small systems.

use alloc::vec::Vec;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: alloc::vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Symmetric matrix from a generator evaluated on the lower triangle.
    pub fn from_symmetric_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    /// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
    ///
    /// Returns `None` when a pivot falls below `rel_tol` times the largest
    /// diagonal entry, i.e. the matrix is singular to working precision.
    pub fn solve_spd(&self, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let scale = (0..n).map(|i| self.get(i, i)).fold(0.0, f64::max);
        if n > 0 && !(scale > 0.0) {
            return None;
        }
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let row_j = &mut l.data[j * n..(j + 1) * n];
            let diag = self.get(j, j) - dot(&row_j[..j], &row_j[..j]);
            if !(diag > rel_tol * scale) {
                return None;
            }
            let ljj = libm::sqrt(diag);
            row_j[j] = ljj;
            for i in (j + 1)..n {
                let (upper, lower) = l.data.split_at_mut(i * n);
                let row_j = &upper[j * n..j * n + j];
                let row_i = &mut lower[..n];
                row_i[j] = (self.get(i, j) - dot(&row_i[..j], row_j)) / ljj;
            }
        }
        let mut y = alloc::vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        let mut x = alloc::vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        Some(x)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
