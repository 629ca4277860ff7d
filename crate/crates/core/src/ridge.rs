//! Incremental regularized least squares with weighted responses.
//!
//! `RidgeState` accumulates `V = lambda*I + sum x x^T` and `b = sum y x`
//! where `y` is the (possibly importance-weighted) response, and keeps the
//! inverse of `V` current through Sherman-Morrison rank-one updates. The
//! point estimate is `theta = V^{-1} b`. A weight-zero response grows the
//! design matrix without touching `b`, which is exactly what the attacker's
//! estimator needs on rounds where an arm was scheduled but not served.

use crate::linalg::{dot, SymMat};
use crate::{Error, Result};

/// Per-arm ridge accumulator: design matrix, response vector, observation
/// count, and the cached solve.
#[derive(Debug, Clone)]
pub struct RidgeState {
    v: SymMat,
    v_inv: SymMat,
    b: Vec<f64>,
    theta: Vec<f64>,
    n: u64,
    lambda: f64,
}

impl RidgeState {
    /// Fresh state with `V = lambda*I`, `b = 0`.
    pub fn new(d: usize, lambda: f64) -> Self {
        assert!(
            d >= 1 && lambda > 0.0,
            "ridge state needs d >= 1, lambda > 0"
        );
        RidgeState {
            v: SymMat::scaled_identity(d, lambda),
            v_inv: SymMat::scaled_identity(d, 1.0 / lambda),
            b: vec![0.0; d],
            theta: vec![0.0; d],
            n: 0,
            lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Number of updates applied since initialization.
    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Current estimate `theta = V^{-1} b`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Ingest one observation: `V += x x^T`, `b += y x`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        debug_assert_eq!(x.len(), self.dim());
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite ridge update (y = {y})")));
        }
        self.v.rank_one_add(x, 1.0);
        let mut ax = vec![0.0; self.dim()];
        self.v_inv.mat_vec(x, &mut ax);
        self.v_inv.sherman_morrison(&ax, x);
        for (bi, xi) in self.b.iter_mut().zip(x.iter()) {
            *bi += y * xi;
        }
        self.v_inv.mat_vec(&self.b, &mut self.theta);
        self.n += 1;
        Ok(())
    }

    /// Predicted response `<x, theta>`.
    pub fn point_estimate(&self, x: &[f64]) -> f64 {
        dot(&self.theta, x)
    }

    /// Weighted norm `sqrt(x^T V^{-1} x)`. Shrinks (weakly) along any
    /// direction as observations accumulate.
    pub fn mahalanobis_norm(&self, x: &[f64]) -> f64 {
        self.v_inv.quad_form(x).max(0.0).sqrt()
    }

    /// Draw from the Gaussian centered at `theta` with covariance
    /// `scale^2 * V^{-1}`, consuming the caller-supplied standard normals
    /// `z`. Deterministic given `z`.
    pub fn sample_posterior(&self, scale: f64, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim());
        let chol = self
            .v
            .cholesky()
            .expect("ridge design matrix must stay positive definite");
        chol.solve_transposed(z, out);
        for (o, t) in out.iter_mut().zip(self.theta.iter()) {
            *o = t + scale * *o;
        }
    }

    /// Copy of the accumulated design matrix `V` (diagnostics and tests).
    pub fn design_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.v.get(i, j)).collect())
            .collect()
    }
}
