//! Small dense symmetric matrices: Cholesky solve and a Jacobi eigenvalue
//! sweep. Council sizes are tiny, so everything here is direct and
//! deterministic.

use crate::error::{CbmError, Result};

pub const MAX_DIM: usize = 64;
const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric `n x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(CbmError::model(format!(
                "matrix dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        if data.len() != n * n {
            return Err(CbmError::model(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let (x, y) = (data[i * n + j], data[j * n + i]);
                if !x.is_finite() || !y.is_finite() || (x - y).abs() > SYMMETRY_TOL * scale {
                    return Err(CbmError::model(format!(
                        "matrix is not symmetric at ({i}, {j}): {x} vs {y}"
                    )));
                }
            }
        }
        // Store the exactly symmetrised version.
        let mut data = data;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 }).expect("identity is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &SymMatrix) -> Vec<Vec<f64>> {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
                    .collect()
            })
            .collect()
    }

    /// `(x, A x)`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Lower-triangular factor `L` with `A = L L^T`.
    pub fn cholesky(&self) -> Result<Cholesky> {
        let n = self.n;
        let max_diag = (0..n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max);
        let floor = 1e-14 * max_diag.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > floor) {
                return Err(CbmError::SingularOrIndefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / ljj;
            }
        }
        Ok(Cholesky { n, l })
    }

    /// All eigenvalues in ascending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.data.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(|x, y| x.total_cmp(y));
        ev
    }
}

/// Cholesky factor of a positive-definite [`SymMatrix`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch");
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[i * n + k] * y[k];
            }
            y[i] = v / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
        x
    }
}

/// Solve `A x = b` for positive-definite `A`.
pub fn spd_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(CbmError::model(format!(
            "right-hand side has length {}, matrix is {}x{}",
            b.len(),
            a.dim(),
            a.dim()
        )));
    }
    Ok(a.cholesky()?.solve(b))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigen_estimate(a: &SymMatrix) -> f64 {
    a.eigenvalues()[0]
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |_, _| 1.0).unwrap()
    }

    #[test]
    fn identity_solve_is_rhs() {
        let b = vec![0.3, -1.5, 2.0];
        assert_eq!(spd_solve(&SymMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn all_ones_is_singular() {
        for n in 2..6 {
            assert!(matches!(
                spd_solve(&ones(n), &vec![1.0; n]),
                Err(CbmError::SingularOrIndefinite { pivot: 1 })
            ));
        }
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = SymMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            a.cholesky(),
            Err(CbmError::SingularOrIndefinite { pivot: 1 })
        ));
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.5]).is_err());
        assert!(SymMatrix::new(0, vec![]).is_err());
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        assert!((min_eigen_estimate(&SymMatrix::identity(5)) - 1.0).abs() < 1e-14);
        for n in [2, 3, 7] {
            assert!(min_eigen_estimate(&ones(n)).abs() < 1e-12);
            let top = *ones(n).eigenvalues().last().unwrap();
            assert!((top - n as f64).abs() < 1e-12);
        }
        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = a.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
