//! Small dense linear algebra for linear fields `F(z) = Mz`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("matrix must be non-empty"));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mul_slice(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.data[i * n..(i + 1) * n]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn mul(&self, x: &Point) -> Point {
        let mut out = vec![0.0; self.n];
        self.mul_slice(x.coords(), &mut out);
        Point::new(out)
    }

    /// `I + s * self`
    pub fn shifted_identity(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= s;
        }
        for i in 0..self.n {
            m.data[i * self.n + i] += 1.0;
        }
        m
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Point) -> Result<Point> {
        b.ensure_dim(self.n)?;
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.coords().to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if a[pivot * n + col].abs() < 1e-300 {
                return Err(Error::Unsupported("singular linear system".into()));
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                x.swap(col, pivot);
            }
            let diag = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / diag;
                if factor != 0.0 {
                    for k in col..n {
                        a[row * n + k] -= factor * a[col * n + k];
                    }
                    x[row] -= factor * x[col];
                }
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for k in col + 1..n {
                s -= a[col * n + k] * x[k];
            }
            x[col] = s / a[col * n + col];
        }
        Ok(Point::new(x))
    }

    /// Largest singular value, by power iteration on `MᵀM` (closed form for 2×2).
    pub fn spectral_norm(&self) -> f64 {
        let n = self.n;
        if n == 2 {
            let (a, b, c, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 0), self.get(1, 1));
            let s = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
            return ((s + disc) / 2.0).sqrt();
        }
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut mv = vec![0.0; n];
        let mut sigma = 0.0;
        for _ in 0..500 {
            self.mul_slice(&v, &mut mv);
            // w = Mᵀ (M v)
            let mut w = vec![0.0; n];
            for (i, mvi) in mv.iter().enumerate() {
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj += self.get(i, j) * mvi;
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            v = w.into_iter().map(|x| x / norm).collect();
            if (next - sigma).abs() <= 1e-15 * next {
                sigma = next;
                break;
            }
            sigma = next;
        }
        sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolvent_of_rotation() {
        // (I + 0.5 M)^{-1} (1, 0) with M = [[0, 1], [-1, 0]]
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let j = m.shifted_identity(0.5).solve(&Point::from([1.0, 0.0])).unwrap();
        assert!(j.max_abs_diff(&Point::from([0.8, 0.4])) < 1e-15);
    }

    #[test]
    fn solve_3x3_with_pivoting() {
        let m = Matrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![3.0, 1.0, 4.0],
        ])
        .unwrap();
        let x = Point::from([1.0, -2.0, 0.5]);
        let b = m.mul(&x);
        assert!(m.solve(&b).unwrap().max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn spectral_norms() {
        let rot = Matrix::from_rows(&[vec![0.3, 0.9], vec![-0.9, 0.3]]).unwrap();
        assert!((rot.spectral_norm() - (0.9f64.powi(2) + 0.09).sqrt()).abs() < 1e-14);
        let diag = Matrix::from_rows(&[
            vec![2.0, 0.0, 0.0],
            vec![0.0, -5.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((diag.spectral_norm() - 5.0).abs() < 1e-9);
    }
}
