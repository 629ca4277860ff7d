//! Shared fixtures for the integration suites.

// Each test target compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use banditlab::env::{ArmSet, ContextSource, Environment};
use banditlab::ModelParams;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Parameters matching the full-scale synthetic setup, with the margin the
/// canonical configs grant the attacker.
pub fn synthetic_params(horizon: u64) -> ModelParams {
    ModelParams::synthetic_defaults(horizon)
        .validated()
        .unwrap()
        .with_alpha(0.2)
}

/// The pinned synthetic environment used by the full-scale experiments.
pub fn canonical_env(params: &ModelParams) -> Environment {
    Environment::synthetic(params, 245, 0.01, params.k - 1, 10_000).unwrap()
}

/// Random finite-pool environment valid for the margin it returns.
///
/// The pool is the entire context domain, so validation is exhaustive and
/// the margin from `compute_alpha` is exact; the returned params carry that
/// margin shrunk by 0.9, which makes the (environment, alpha) pair satisfy
/// the attackers' precondition everywhere, not just on a sample.
pub fn random_pool_env(seed: u64, horizon: u64) -> Option<(Environment, ModelParams)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let d = rng.random_range(2..=4usize);
    let k = rng.random_range(2..=6usize);
    let n_pool = rng.random_range(1..=8usize);
    let scale = 1.0 / (d as f64).sqrt();
    // Positive entries keep every mean positive.
    let draw_row = |rng: &mut StdRng, lo: f64| -> Vec<f64> {
        (0..d).map(|_| rng.random_range(lo..1.0) * scale).collect()
    };
    let pool: Vec<Vec<f64>> = (0..n_pool).map(|_| draw_row(&mut rng, 0.1)).collect();
    let thetas: Vec<Vec<f64>> = (0..k).map(|_| draw_row(&mut rng, 0.05)).collect();
    let mean = |x: &[f64], t: &[f64]| x.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
    // Pick a target arm that is never (weakly) the worst on the pool.
    let target = (0..k).find(|&cand| {
        pool.iter().all(|x| {
            let m_t = mean(x, &thetas[cand]);
            let min = thetas
                .iter()
                .map(|t| mean(x, t))
                .fold(f64::INFINITY, f64::min);
            m_t > min
        })
    })?;
    let params = ModelParams {
        d,
        k,
        l: 2.0,
        s: 2.0,
        r: 0.05,
        lambda: 2.0,
        delta: 0.1,
        alpha: 0.2, // replaced below
        horizon,
    };
    let env = Environment::new(
        ArmSet::new(thetas),
        ContextSource::Pool(pool),
        0.01,
        target,
        &params,
        seed ^ 0xA5A5,
        0,
    )
    .ok()?;
    let alpha = (env.probe_alpha() * 0.9).clamp(1e-9, 0.499);
    Some((env, params.with_alpha(alpha).validated().ok()?))
}
