//! Minimal dense linear algebra for small symmetric systems.
//!
//! Context dimensions here are single digits, so everything is plain
//! row-major `Vec<f64>` with O(d^2)/O(d^3) loops. No external solver.

// Explicit indices read better than iterator chains in matrix kernels.
#![allow(clippy::needless_range_loop)]

/// Dense symmetric d x d matrix, full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SymMat {
    d: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = scale;
        }
        SymMat { d, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    /// `self += w * x x^T`, written symmetrically so exact symmetry is
    /// preserved bit-for-bit.
    pub fn rank_one_add(&mut self, x: &[f64], w: f64) {
        let d = self.d;
        for i in 0..d {
            let wxi = w * x[i];
            for j in i..d {
                let v = wxi * x[j];
                self.data[i * d + j] += v;
                if j != i {
                    self.data[j * d + i] = self.data[i * d + j];
                }
            }
        }
    }

    /// Sherman-Morrison downdate: assuming `self` is the inverse of some A,
    /// replace it by the inverse of `A + x x^T`. `ax` must hold `self * x`.
    pub fn sherman_morrison(&mut self, ax: &[f64], x: &[f64]) {
        let denom = 1.0 + dot(x, ax);
        let d = self.d;
        for i in 0..d {
            let num_i = ax[i] / denom;
            for j in i..d {
                let v = num_i * ax[j];
                self.data[i * d + j] -= v;
                if j != i {
                    self.data[j * d + i] = self.data[i * d + j];
                }
            }
        }
    }

    pub fn mat_vec(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            out[i] = dot(row, x);
        }
    }

    /// Quadratic form `x^T M x` without allocating.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            acc += x[i] * dot(row, x);
        }
        acc
    }

    /// Lower Cholesky factor. Returns `None` if the matrix is not numerically
    /// positive definite.
    pub fn cholesky(&self) -> Option<Chol> {
        let d = self.d;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut sum = self.data[i * d + j];
                for k in 0..j {
                    sum -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * d + i] = sum.sqrt();
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        Some(Chol { d, l })
    }
}

/// Lower-triangular Cholesky factor L with `L L^T = A`.
#[derive(Debug, Clone)]
pub(crate) struct Chol {
    d: usize,
    l: Vec<f64>,
}

impl Chol {
    /// Solve `A y = b` via forward/backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * d + k] * y[k];
            }
            y[i] = sum / self.l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut sum = y[i];
            for k in i + 1..d {
                sum -= self.l[k * d + i] * y[k];
            }
            y[i] = sum / self.l[i * d + i];
        }
        y
    }

    /// Solve `L^T y = z`. If `A = L L^T`, then `y` has covariance `A^{-1}`
    /// when `z` is standard normal, which is exactly what posterior sampling
    /// needs.
    pub fn solve_transposed(&self, z: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in (0..d).rev() {
            let mut sum = z[i];
            for k in i + 1..d {
                sum -= self.l[k * d + i] * out[k];
            }
            out[i] = sum / self.l[i * d + i];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
