//! Global model parameters and confidence-width functions.
//!
//! All widths use natural logarithms. The agent-side width is the standard
//! OFUL-style radius for ridge regression under sub-Gaussian noise; the
//! attacker-side width inflates it by the importance weights the attacker's
//! estimator uses.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameter bundle shared by environment, agents and attackers.
///
/// `d` is the context dimension, `k` the number of arms, `l`/`s` the bounds
/// on context and coefficient norms, `r` the sub-Gaussian noise scale,
/// `lambda` the ridge regularization, `delta` the confidence level, `alpha`
/// the attack margin, and `horizon` the number of rounds a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub k: usize,
    pub l: f64,
    pub s: f64,
    pub r: f64,
    pub lambda: f64,
    pub delta: f64,
    pub alpha: f64,
    pub horizon: u64,
}

impl ModelParams {
    /// Validate every construction invariant, returning the bundle on success.
    ///
    /// Besides positivity and range checks, `lambda >= l` is required: the
    /// attack-cost accounting assumes the regularizer dominates the largest
    /// context norm, and proceeding without it would silently invalidate
    /// every downstream width.
    pub fn validated(self) -> Result<Self> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.d < 1 {
            return fail("d must be >= 1");
        }
        if self.k < 2 {
            return fail("k must be >= 2");
        }
        for (name, v) in [
            ("l", self.l),
            ("s", self.s),
            ("r", self.r),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return fail(&format!("{name} must be finite"));
            }
        }
        if self.l <= 0.0 {
            return fail("l must be > 0");
        }
        if self.s <= 0.0 {
            return fail("s must be > 0");
        }
        if self.r < 0.0 {
            return fail("r must be >= 0");
        }
        if self.lambda <= 0.0 {
            return fail("lambda must be > 0");
        }
        if self.lambda < self.l {
            return fail("lambda must be >= l");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail("delta must lie in (0, 1)");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return fail("alpha must lie in (0, 1/2)");
        }
        if self.horizon < 1 {
            return fail("horizon must be >= 1");
        }
        Ok(self)
    }

    /// Defaults for the synthetic setup: d=6, K=10, L=S=√2, R=0.1, λ=2,
    /// δ=0.1. `alpha` is a placeholder until resolved from the environment
    /// or config.
    pub fn synthetic_defaults(horizon: u64) -> Self {
        ModelParams {
            d: 6,
            k: 10,
            l: std::f64::consts::SQRT_2,
            s: std::f64::consts::SQRT_2,
            r: 0.1,
            lambda: 2.0,
            delta: 0.1,
            alpha: 0.2,
            horizon,
        }
    }

    /// Return a copy with a different attack margin.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Confidence width for a ridge estimate built from `n` observations:
    ///
    /// `w(n) = sqrt(lambda)*s + r*sqrt(2*ln(k/delta) + d*ln(1 + l^2 n/(lambda d)))`
    ///
    /// Monotonically nondecreasing in `n` and bounded below by
    /// `sqrt(lambda)*s`.
    pub fn confidence_width(&self, n: u64) -> f64 {
        let log_det = (self.d as f64)
            * (1.0 + self.l * self.l * (n as f64) / (self.lambda * self.d as f64)).ln();
        self.lambda.sqrt() * self.s
            + self.r * (2.0 * (self.k as f64 / self.delta).ln() + log_det).sqrt()
    }

    /// Context-independent slack term `l*s*sqrt(0.5*ln(2*k*horizon/delta))`
    /// shared by the attacker-side widths.
    pub fn mixing_slack(&self) -> f64 {
        self.l
            * self.s
            * (0.5 * (2.0 * self.k as f64 * self.horizon as f64 / self.delta).ln()).sqrt()
    }

    /// Attacker-side confidence width for an arm whose importance-weighted
    /// design matrix has accumulated `n_scheduled` rounds:
    ///
    /// `phi * (w(n_scheduled) + l*s*sqrt(0.5*ln(2*k*horizon/delta)))`
    ///
    /// with `phi = 2` for the target arm and `phi = 1/alpha` otherwise (the
    /// importance weights are bounded by 2 and 1/alpha respectively).
    pub fn attacker_width(&self, n_scheduled: u64, is_target: bool) -> f64 {
        let phi = if is_target { 2.0 } else { 1.0 / self.alpha };
        phi * (self.confidence_width(n_scheduled) + self.mixing_slack())
    }
}
