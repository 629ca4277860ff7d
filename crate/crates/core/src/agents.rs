//! Victim bandit agents.
//!
//! All agents share one interface: observe a context, choose an arm, then
//! ingest `(context, chosen arm, reward)`. The reward an agent ingests is
//! always booked under the arm the agent itself selected; nothing in this
//! module can see what the adversary substituted downstream.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::dot;
use crate::params::ModelParams;
use crate::ridge::RidgeState;
use crate::Result;

/// Which agent to run, with its algorithm-specific knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentKind {
    /// Optimism: ridge estimate plus a confidence width times the
    /// Mahalanobis norm.
    LinUcb,
    /// Posterior sampling with covariance `scale^2 * V^{-1}` per arm.
    /// `scale = None` uses the per-arm confidence width.
    LinTs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// Explore uniformly with probability `min(1, c*K/t)`, else greedy.
    EpsGreedy {
        #[serde(default = "default_eps_c")]
        c: f64,
    },
}

fn default_eps_c() -> f64 {
    1.0
}

impl AgentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::LinUcb => "linucb",
            AgentKind::LinTs { .. } => "lints",
            AgentKind::EpsGreedy { .. } => "epsgreedy",
        }
    }
}

/// Shared per-arm state: one ridge accumulator per arm plus the cached
/// confidence width for its current pull count.
#[derive(Debug, Clone)]
struct ArmBank {
    arms: Vec<RidgeState>,
    widths: Vec<f64>,
    params: ModelParams,
    rounds: u64,
}

impl ArmBank {
    fn new(params: ModelParams) -> Self {
        let w0 = params.confidence_width(0);
        ArmBank {
            arms: (0..params.k)
                .map(|_| RidgeState::new(params.d, params.lambda))
                .collect(),
            widths: vec![w0; params.k],
            params,
            rounds: 0,
        }
    }

    fn observe(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        assert!(arm < self.arms.len(), "arm {arm} out of range");
        self.arms[arm].update(x, reward)?;
        self.widths[arm] = self.params.confidence_width(self.arms[arm].count());
        self.rounds += 1;
        Ok(())
    }

    fn greedy_arm(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = self.arms[0].point_estimate(x);
        for (i, arm) in self.arms.iter().enumerate().skip(1) {
            let score = arm.point_estimate(x);
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }
}

/// A running agent instance.
#[derive(Debug, Clone)]
pub struct Agent {
    bank: ArmBank,
    policy: Policy,
}

#[derive(Debug, Clone)]
enum Policy {
    LinUcb,
    LinTs {
        scale: Option<f64>,
        rng: StdRng,
        z: Vec<f64>,
        sample: Vec<f64>,
    },
    EpsGreedy {
        c: f64,
        rng: StdRng,
    },
}

impl Agent {
    /// Instantiate `kind` with its own RNG stream. Deterministic agents
    /// ignore the seed.
    pub fn new(kind: AgentKind, params: ModelParams, seed: u64) -> Self {
        let policy = match kind {
            AgentKind::LinUcb => Policy::LinUcb,
            AgentKind::LinTs { scale } => Policy::LinTs {
                scale,
                rng: StdRng::seed_from_u64(seed),
                z: vec![0.0; params.d],
                sample: vec![0.0; params.d],
            },
            AgentKind::EpsGreedy { c } => Policy::EpsGreedy {
                c,
                rng: StdRng::seed_from_u64(seed),
            },
        };
        Agent {
            bank: ArmBank::new(params),
            policy,
        }
    }

    /// Choose an arm for context `x`. Ties break toward the lowest index.
    pub fn select(&mut self, x: &[f64]) -> usize {
        match &mut self.policy {
            Policy::LinUcb => {
                let bank = &self.bank;
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (i, arm) in bank.arms.iter().enumerate() {
                    let score = arm.point_estimate(x) + bank.widths[i] * arm.mahalanobis_norm(x);
                    if score > best_score {
                        best = i;
                        best_score = score;
                    }
                }
                best
            }
            Policy::LinTs {
                scale,
                rng,
                z,
                sample,
            } => {
                let bank = &self.bank;
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (i, arm) in bank.arms.iter().enumerate() {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(rng);
                    }
                    let v = scale.unwrap_or(bank.widths[i]);
                    arm.sample_posterior(v, z, sample);
                    let score = dot(x, sample);
                    if score > best_score {
                        best = i;
                        best_score = score;
                    }
                }
                best
            }
            Policy::EpsGreedy { c, rng } => {
                let t = self.bank.rounds + 1;
                let k = self.bank.arms.len();
                let explore = (*c * k as f64 / t as f64).min(1.0);
                let u: f64 = rng.random();
                if u < explore {
                    rng.random_range(0..k)
                } else {
                    self.bank.greedy_arm(x)
                }
            }
        }
    }

    /// Ingest the reward for the arm this agent selected this round. Only
    /// that arm's state changes.
    pub fn observe(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        self.bank.observe(x, arm, reward)
    }

    /// Pull count `N_i` per arm.
    pub fn pull_counts(&self) -> Vec<u64> {
        self.bank.arms.iter().map(|a| a.count()).collect()
    }

    /// Rounds observed so far.
    pub fn rounds(&self) -> u64 {
        self.bank.rounds
    }

    /// Ridge state of one arm (read-only).
    pub fn arm_state(&self, arm: usize) -> &RidgeState {
        &self.bank.arms[arm]
    }

    /// Cached confidence width for one arm.
    pub fn width(&self, arm: usize) -> f64 {
        self.bank.widths[arm]
    }
}
