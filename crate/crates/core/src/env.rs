//! Ground-truth linear contextual bandit environment.
//!
//! An environment bundles the per-arm coefficient vectors, a context source
//! (synthetic recipe or a replay pool of dataset rows), and a Gaussian noise
//! model. Construction validates the environment against a probe sample:
//! every arm's mean reward must be positive at every probe, and the target
//! arm must never be the worst arm there. The largest observed ratio between
//! worst-arm mean and target mean determines the attack margin estimate.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{dot, norm2};
use crate::params::ModelParams;
use crate::seeding::{self, Stream};
use crate::{Error, Result};

/// Relative slack allowed when checking norm bounds against `l`/`s`.
const NORM_TOL: f64 = 1e-9;

/// Coefficient vectors, one per arm.
#[derive(Debug, Clone)]
pub struct ArmSet {
    thetas: Vec<Vec<f64>>,
}

impl ArmSet {
    pub fn new(thetas: Vec<Vec<f64>>) -> Self {
        ArmSet { thetas }
    }

    /// Draw `k` coefficient vectors with the synthetic recipe: first entry
    /// fixed to 1, remaining entries uniform on
    /// `(-1/sqrt(d-1), +1/sqrt(d-1))`. The resulting norms never exceed
    /// `sqrt(2)`.
    pub fn sample_synthetic(d: usize, k: usize, rng: &mut StdRng) -> Self {
        let thetas = (0..k).map(|_| sample_unit_affine(d, rng)).collect();
        ArmSet { thetas }
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn theta(&self, arm: usize) -> &[f64] {
        &self.thetas[arm]
    }
}

fn sample_unit_affine(d: usize, rng: &mut StdRng) -> Vec<f64> {
    let mut v = vec![1.0; d];
    if d > 1 {
        let hw = 1.0 / ((d - 1) as f64).sqrt();
        for e in v.iter_mut().skip(1) {
            *e = rng.random_range(-hw..hw);
        }
    }
    v
}

/// Where contexts come from.
#[derive(Debug, Clone)]
pub enum ContextSource {
    /// Synthetic recipe: first entry 1, tail uniform on the centered box.
    Synthetic { d: usize },
    /// Uniform draws from a fixed pool of dataset rows.
    Pool(Vec<Vec<f64>>),
}

impl ContextSource {
    fn dim(&self) -> Option<usize> {
        match self {
            ContextSource::Synthetic { d } => Some(*d),
            ContextSource::Pool(rows) => rows.first().map(|r| r.len()),
        }
    }
}

/// Per-trial context stream over a shared source.
pub struct ContextStream<'a> {
    source: &'a ContextSource,
    rng: StdRng,
}

impl ContextStream<'_> {
    /// Write the next context into `x`.
    pub fn fill(&mut self, x: &mut Vec<f64>) {
        match self.source {
            ContextSource::Synthetic { d } => {
                x.clear();
                x.push(1.0);
                if *d > 1 {
                    let hw = 1.0 / ((*d - 1) as f64).sqrt();
                    for _ in 1..*d {
                        x.push(self.rng.random_range(-hw..hw));
                    }
                }
            }
            ContextSource::Pool(rows) => {
                let idx = self.rng.random_range(0..rows.len());
                x.clear();
                x.extend_from_slice(&rows[idx]);
            }
        }
    }
}

/// Zero-mean Gaussian reward noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    std_dev: f64,
}

impl NoiseModel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "noise variance must be finite and >= 0, got {variance}"
            )));
        }
        Ok(NoiseModel {
            std_dev: variance.sqrt(),
        })
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    fn draw(&self, rng: &mut StdRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.std_dev * z
    }
}

/// Validation evidence recorded at construction.
#[derive(Debug, Clone, Copy)]
pub struct ValidationStats {
    /// Number of probe contexts examined.
    pub probes: usize,
    /// Smallest mean reward seen over all (probe, arm) pairs.
    pub min_mean: f64,
    /// Smallest target-arm mean seen (the gamma of the cost analysis).
    pub min_target_mean: f64,
    /// Largest ratio worst-arm mean / target mean seen.
    pub max_ratio: f64,
    /// Attack margin implied by `max_ratio`: `(1 - max_ratio) / 2`.
    pub alpha_probe: f64,
}

/// Immutable ground truth: arms, context source, noise, target arm.
#[derive(Debug, Clone)]
pub struct Environment {
    arms: ArmSet,
    source: ContextSource,
    noise: NoiseModel,
    target: usize,
    d: usize,
    validation: ValidationStats,
}

/// Minimum probe sample used to validate an environment.
pub const MIN_VALIDATION_PROBES: usize = 10_000;

/// Default floor applied to probe-derived attack margins.
pub const DEFAULT_ALPHA_MIN: f64 = 1e-6;

impl Environment {
    /// Build and validate an environment.
    ///
    /// Validation draws at least [`MIN_VALIDATION_PROBES`] contexts (for a
    /// pool source the whole pool is swept instead, since the pool is the
    /// entire context domain) and fails with [`Error::AssumptionViolated`]
    /// if any arm mean is non-positive or the target arm is worst anywhere.
    pub fn new(
        arms: ArmSet,
        source: ContextSource,
        noise_variance: f64,
        target: usize,
        params: &ModelParams,
        validation_seed: u64,
        n_probes: usize,
    ) -> Result<Self> {
        let k = arms.k();
        if k != params.k {
            return Err(Error::InvalidParams(format!(
                "arm count {k} does not match params.k = {}",
                params.k
            )));
        }
        if target >= k {
            return Err(Error::InvalidParams(format!(
                "target arm {target} out of range for k = {k}"
            )));
        }
        let d = source.dim().ok_or_else(|| Error::Data {
            line: None,
            msg: "context pool is empty".to_string(),
        })?;
        if d != params.d {
            return Err(Error::InvalidParams(format!(
                "context dimension {d} does not match params.d = {}",
                params.d
            )));
        }
        for (i, theta) in arms.thetas.iter().enumerate() {
            if theta.len() != d {
                return Err(Error::InvalidParams(format!(
                    "arm {i} has dimension {} != {d}",
                    theta.len()
                )));
            }
            let n = norm2(theta);
            if !n.is_finite() || n > params.s * (1.0 + NORM_TOL) {
                return Err(Error::InvalidParams(format!(
                    "arm {i} norm {n} exceeds s = {}",
                    params.s
                )));
            }
        }
        if let ContextSource::Pool(rows) = &source {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::Data {
                        line: None,
                        msg: format!("pool row {i} has dimension {} != {d}", row.len()),
                    });
                }
                let n = norm2(row);
                if !n.is_finite() || n > params.l * (1.0 + NORM_TOL) {
                    return Err(Error::Data {
                        line: None,
                        msg: format!("pool row {i} norm {n} exceeds l = {}", params.l),
                    });
                }
            }
        }
        let noise = NoiseModel::gaussian(noise_variance)?;
        let mut env = Environment {
            arms,
            source,
            noise,
            target,
            d,
            validation: ValidationStats {
                probes: 0,
                min_mean: f64::INFINITY,
                min_target_mean: f64::INFINITY,
                max_ratio: f64::NEG_INFINITY,
                alpha_probe: 0.0,
            },
        };
        env.validation = env.run_validation(validation_seed, n_probes)?;
        Ok(env)
    }

    /// Synthetic environment: arms drawn from `arm_seed`, validated with a
    /// probe stream derived from the same seed.
    pub fn synthetic(
        params: &ModelParams,
        arm_seed: u64,
        noise_variance: f64,
        target: usize,
        n_probes: usize,
    ) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seeding::stream_seed(arm_seed, Stream::ArmDraw));
        let arms = ArmSet::sample_synthetic(params.d, params.k, &mut rng);
        Environment::new(
            arms,
            ContextSource::Synthetic { d: params.d },
            noise_variance,
            target,
            params,
            seeding::stream_seed(arm_seed, Stream::Validation),
            n_probes,
        )
    }

    // `!(m > 0.0)` deliberately catches NaN means as violations.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn run_validation(&self, seed: u64, n_probes: usize) -> Result<ValidationStats> {
        let mut stats = ValidationStats {
            probes: 0,
            min_mean: f64::INFINITY,
            min_target_mean: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
            alpha_probe: 0.0,
        };
        let visit = |idx: usize, x: &[f64], stats: &mut ValidationStats| -> Result<()> {
            let mut min_mean = f64::INFINITY;
            for arm in 0..self.k() {
                let m = self.mean_reward(x, arm);
                if !(m > 0.0) {
                    return Err(Error::AssumptionViolated {
                        probe_index: idx,
                        msg: format!("arm {arm} has non-positive mean {m}"),
                    });
                }
                min_mean = min_mean.min(m);
            }
            let target_mean = self.mean_reward(x, self.target);
            let ratio = min_mean / target_mean;
            if ratio >= 1.0 {
                return Err(Error::AssumptionViolated {
                    probe_index: idx,
                    msg: format!(
                        "target arm {} is the worst arm (ratio {ratio})",
                        self.target
                    ),
                });
            }
            stats.min_mean = stats.min_mean.min(min_mean);
            stats.min_target_mean = stats.min_target_mean.min(target_mean);
            stats.max_ratio = stats.max_ratio.max(ratio);
            stats.probes += 1;
            Ok(())
        };
        match &self.source {
            // The pool is the whole domain: sweep it exhaustively.
            ContextSource::Pool(rows) => {
                for (idx, row) in rows.iter().enumerate() {
                    visit(idx, row, &mut stats)?;
                }
            }
            ContextSource::Synthetic { .. } => {
                let n = n_probes.max(MIN_VALIDATION_PROBES);
                let mut stream = ContextStream {
                    source: &self.source,
                    rng: StdRng::seed_from_u64(seed),
                };
                let mut x = Vec::with_capacity(self.d);
                for idx in 0..n {
                    stream.fill(&mut x);
                    visit(idx, &x, &mut stats)?;
                }
            }
        }
        stats.alpha_probe = ((1.0 - stats.max_ratio) / 2.0).max(DEFAULT_ALPHA_MIN);
        Ok(stats)
    }

    pub fn k(&self) -> usize {
        self.arms.k()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise.variance()
    }

    pub fn validation(&self) -> &ValidationStats {
        &self.validation
    }

    /// Context stream for one trial.
    pub fn context_stream(&self, seed: u64) -> ContextStream<'_> {
        ContextStream {
            source: &self.source,
            rng: StdRng::seed_from_u64(seed),
        }
    }

    /// True mean reward `<x, theta_arm>`. Panics on an out-of-range arm.
    pub fn mean_reward(&self, x: &[f64], arm: usize) -> f64 {
        assert!(arm < self.k(), "arm {arm} out of range");
        dot(x, &self.arms.thetas[arm])
    }

    /// Draw a noisy reward for `arm` under context `x`.
    pub fn draw_reward(&self, x: &[f64], arm: usize, rng: &mut StdRng) -> f64 {
        self.mean_reward(x, arm) + self.noise.draw(rng)
    }

    /// Arm with the smallest mean at `x` (ties to the lowest index), and
    /// that mean. Scans every arm including the target.
    pub fn worst_arm(&self, x: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_mean = self.mean_reward(x, 0);
        for arm in 1..self.k() {
            let m = self.mean_reward(x, arm);
            if m < best_mean {
                best = arm;
                best_mean = m;
            }
        }
        (best, best_mean)
    }

    /// Largest mean at `x`, for pseudo-regret accounting.
    pub fn best_mean(&self, x: &[f64]) -> f64 {
        (0..self.k())
            .map(|arm| self.mean_reward(x, arm))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Attack margin over an explicit probe set:
    /// `alpha = (1 - max over probes of min_i mean_i / mean_target) / 2`,
    /// floored at `alpha_min`. Fails if the target is (tied-)worst or any
    /// mean is non-positive at some probe.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN means count as violations
    pub fn compute_alpha<'a, I>(&self, probes: I, alpha_min: f64) -> Result<f64>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut max_ratio = f64::NEG_INFINITY;
        let mut seen = 0usize;
        for (idx, x) in probes.into_iter().enumerate() {
            let (_, min_mean) = self.worst_arm(x);
            if !(min_mean > 0.0) {
                return Err(Error::AssumptionViolated {
                    probe_index: idx,
                    msg: format!("non-positive mean {min_mean} at probe"),
                });
            }
            let ratio = min_mean / self.mean_reward(x, self.target);
            if ratio >= 1.0 {
                return Err(Error::AssumptionViolated {
                    probe_index: idx,
                    msg: format!("target arm is the worst arm (ratio {ratio})"),
                });
            }
            max_ratio = max_ratio.max(ratio);
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::InvalidParams("empty probe set".to_string()));
        }
        Ok(((1.0 - max_ratio) / 2.0).max(alpha_min))
    }

    /// Probe-derived attack margin recorded at construction (unshrunk).
    pub fn probe_alpha(&self) -> f64 {
        self.validation.alpha_probe
    }
}
