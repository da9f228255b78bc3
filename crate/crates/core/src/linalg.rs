//! Dense square matrices for the linear and affine catalog entries.

use alloc::vec;
use alloc::vec::Vec;

use crate::space::Point;
use crate::{Error, Result};

/// A dense `d × d` matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::config("matrix must be nonempty"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::config("matrix must be square"));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix construction"));
        }
        Ok(Matrix { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        Matrix { dim, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Matrix { dim, data }
    }

    /// Counterclockwise planar rotation.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Matrix {
            dim: 2,
            data: vec![c, -s, s, c],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn mul_vec(&self, x: &Point) -> Point {
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let out = (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(x.as_slice())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Point::raw(out)
    }

    /// `I + scale · self`.
    pub fn shifted_identity(&self, scale: f64) -> Matrix {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= scale;
        }
        for i in 0..self.dim {
            m.data[i * self.dim + i] += 1.0;
        }
        m
    }

    /// `⟨x, Mx⟩ ≥ 0` on the symmetric part, checked through its leading
    /// principal minors after symmetrization.
    pub fn is_monotone(&self) -> bool {
        let d = self.dim;
        let mut sym = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                sym[i * d + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        // Positive semidefinite test via eigen-free Cholesky with a small
        // diagonal shift.
        let shift = 1e-12 * (1.0 + sym.iter().map(|v| v.abs()).fold(0.0, f64::max));
        for i in 0..d {
            sym[i * d + i] += shift;
        }
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = sym[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * d + i] = libm::sqrt(s);
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        true
    }

    /// Solves `self · x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Point) -> Result<Point> {
        rhs.check_dim(self.dim)?;
        let d = self.dim;
        let mut a = self.data.clone();
        let mut b = rhs.as_slice().to_vec();
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&r, &s| a[r * d + col].abs().total_cmp(&a[s * d + col].abs()))
                .expect("nonempty range");
            if a[pivot * d + col].abs() < 1e-300 {
                return Err(Error::config("singular linear system in resolvent"));
            }
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                }
                b.swap(pivot, col);
            }
            let p = a[col * d + col];
            for r in col + 1..d {
                let f = a[r * d + col] / p;
                if f != 0.0 {
                    for k in col..d {
                        a[r * d + k] -= f * a[col * d + k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        let mut x = vec![0.0; d];
        for r in (0..d).rev() {
            let s: f64 = (r + 1..d).map(|k| a[r * d + k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r * d + r];
        }
        Ok(Point::raw(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = m.solve(&Point::from_slice(&[3.0, 5.0]).unwrap()).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(m.solve(&Point::from_slice(&[1.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn monotonicity_of_matrices() {
        assert!(Matrix::rotation(0.3).is_monotone());
        assert!(Matrix::identity(3).is_monotone());
        assert!(!Matrix::scaled_identity(2, -1.0).is_monotone());
        // skew-symmetric maps are monotone
        assert!(Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])
            .unwrap()
            .is_monotone());
    }
}
