//! Action-poisoning attack policies.
//!
//! Both attackers intercept the agent's chosen arm after selection and
//! before the environment draws a reward. When the agent picks the target
//! arm they stay silent. Otherwise they redirect the pull to the target arm
//! with probability `eps` and to a "worst" arm with probability `1 - eps`,
//! choosing `eps` so the mixture's mean reward lands at `(1 - alpha)` times
//! the target arm's mean. The agent, which books every reward under its own
//! choice, is thereby steered into believing each non-target arm is
//! uniformly worse than the target.
//!
//! The white-box attacker reads true means from the environment. The
//! black-box attacker estimates them with per-arm importance-weighted ridge
//! regressions and explores the worst arm by lower confidence bound.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::params::ModelParams;
use crate::ridge::RidgeState;
use crate::{Error, Result};

/// Which attack policy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerKind {
    None,
    WhiteBox,
    BlackBox,
}

impl AttackerKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackerKind::None => "none",
            AttackerKind::WhiteBox => "whitebox",
            AttackerKind::BlackBox => "blackbox",
        }
    }
}

/// Outcome of one interception.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackDecision {
    /// Arm actually forwarded to the environment.
    pub post_action: usize,
    /// Redirect arm considered this round (the target itself on no-attack
    /// rounds, by convention).
    pub redirect_arm: usize,
    /// Mixing probability used; exactly 1 when the agent picked the target.
    pub epsilon: f64,
    /// True iff `post_action` differs from the agent's choice.
    pub attacked: bool,
}

impl AttackDecision {
    fn pass_through(arm: usize) -> Self {
        AttackDecision {
            post_action: arm,
            redirect_arm: arm,
            epsilon: 1.0,
            attacked: false,
        }
    }
}

/// Full-knowledge attacker: reads true arm means from the environment.
#[derive(Debug, Clone)]
pub struct WhiteBoxAttacker {
    alpha: f64,
    target: usize,
    rng: StdRng,
}

impl WhiteBoxAttacker {
    pub fn new(alpha: f64, target: usize, seed: u64) -> Self {
        WhiteBoxAttacker {
            alpha,
            target,
            rng: StdRng::seed_from_u64(seed),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Intercept the agent's choice under context `x`.
    ///
    /// On a non-target choice, redirects to the target with probability
    /// `eps = ((1-alpha)*m_K - m_min) / (m_K - m_min)` and to the worst arm
    /// otherwise; the mixture mean is then `(1-alpha)*m_K` exactly. Consumes
    /// exactly one RNG event per intercepted round.
    pub fn transform(
        &mut self,
        env: &Environment,
        x: &[f64],
        agent_arm: usize,
    ) -> Result<AttackDecision> {
        if agent_arm == self.target {
            return Ok(AttackDecision::pass_through(agent_arm));
        }
        let m_target = env.mean_reward(x, self.target);
        let (redirect_arm, m_min) = env.worst_arm(x);
        let denom = m_target - m_min;
        if denom == 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        let epsilon = ((1.0 - self.alpha) * m_target - m_min) / denom;
        let u: f64 = self.rng.random();
        let post_action = if u < epsilon {
            self.target
        } else {
            redirect_arm
        };
        Ok(AttackDecision {
            post_action,
            redirect_arm,
            epsilon,
            attacked: post_action != agent_arm,
        })
    }
}

/// Estimation-based attacker.
///
/// Keeps one importance-weighted ridge state per arm. The target arm's
/// design matrix absorbs every round's context; a non-target arm's design
/// matrix absorbs the rounds where it was the scheduled redirect arm. The
/// response side is weighted by the inverse selection probability, so each
/// arm's estimate stays unbiased for its true coefficient vector even
/// though the attacker only samples two arms per round.
#[derive(Debug, Clone)]
pub struct BlackBoxAttacker {
    states: Vec<RidgeState>,
    /// Cached confidence width per arm at its current schedule count.
    widths: Vec<f64>,
    params: ModelParams,
    target: usize,
    rng: StdRng,
    degenerate_rounds: u64,
}

impl BlackBoxAttacker {
    /// `params.alpha` must already hold the margin this attacker assumes
    /// (a known value or a lower bound for the environment).
    pub fn new(params: ModelParams, target: usize, seed: u64) -> Self {
        let w0 = params.confidence_width(0);
        BlackBoxAttacker {
            states: (0..params.k)
                .map(|_| RidgeState::new(params.d, params.lambda))
                .collect(),
            widths: vec![w0; params.k],
            params,
            target,
            rng: StdRng::seed_from_u64(seed),
            degenerate_rounds: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    /// Rounds on which the estimate denominator was exactly zero and the
    /// mixing probability fell back to `1 - alpha`.
    pub fn degenerate_rounds(&self) -> u64 {
        self.degenerate_rounds
    }

    /// Attacker-side mean estimate for an arm.
    pub fn estimate(&self, arm: usize, x: &[f64]) -> f64 {
        self.states[arm].point_estimate(x)
    }

    /// Attacker-side confidence width for an arm at its current count.
    pub fn width(&self, arm: usize) -> f64 {
        let phi = if arm == self.target {
            2.0
        } else {
            1.0 / self.params.alpha
        };
        phi * (self.widths[arm] + self.params.mixing_slack())
    }

    /// Mahalanobis norm of `x` under an arm's inverse design matrix.
    pub fn mahalanobis(&self, arm: usize, x: &[f64]) -> f64 {
        self.states[arm].mahalanobis_norm(x)
    }

    /// Rounds absorbed into an arm's design matrix.
    pub fn scheduled_rounds(&self, arm: usize) -> u64 {
        self.states[arm].count()
    }

    /// Intercept the agent's choice under context `x`.
    ///
    /// The redirect arm is the non-target arm with the smallest lower
    /// confidence bound. The mixing probability is the white-box formula
    /// evaluated on estimates and clipped to `[1/2, 1 - alpha]`; a zero
    /// denominator resolves to the upper rail. Consumes exactly one RNG
    /// event per intercepted round.
    pub fn transform(&mut self, x: &[f64], agent_arm: usize) -> AttackDecision {
        if agent_arm == self.target {
            return AttackDecision::pass_through(agent_arm);
        }
        let mut redirect_arm = usize::MAX;
        let mut redirect_lcb = f64::INFINITY;
        for arm in 0..self.params.k {
            if arm == self.target {
                continue;
            }
            let lcb = self.states[arm].point_estimate(x)
                - self.width(arm) * self.states[arm].mahalanobis_norm(x);
            if lcb < redirect_lcb {
                redirect_arm = arm;
                redirect_lcb = lcb;
            }
        }
        let alpha = self.params.alpha;
        let m_target = self.states[self.target].point_estimate(x);
        let m_dag = self.states[redirect_arm].point_estimate(x);
        let denom = m_target - m_dag;
        let epsilon = if denom == 0.0 {
            self.degenerate_rounds += 1;
            1.0 - alpha
        } else {
            (((1.0 - alpha) * m_target - m_dag) / denom).clamp(0.5, 1.0 - alpha)
        };
        let u: f64 = self.rng.random();
        let post_action = if u < epsilon {
            self.target
        } else {
            redirect_arm
        };
        AttackDecision {
            post_action,
            redirect_arm,
            epsilon,
            attacked: post_action != agent_arm,
        }
    }

    /// Ingest the revealed reward for this round's decision.
    ///
    /// The target arm's design matrix grows every round; its response side
    /// gains `reward / eps` only when the target was actually served. On
    /// attack rounds the redirect arm's design matrix also grows, with
    /// response weight `1/(1-eps)` when it was served and zero otherwise.
    pub fn observe(&mut self, x: &[f64], decision: &AttackDecision, reward: f64) -> Result<()> {
        if decision.redirect_arm == self.target {
            // Agent picked the target: eps = 1, plain unweighted update.
            return self.update_arm(self.target, x, reward);
        }
        let w_target = if decision.post_action == self.target {
            reward / decision.epsilon
        } else {
            0.0
        };
        self.update_arm(self.target, x, w_target)?;
        let w_dag = if decision.post_action == decision.redirect_arm {
            reward / (1.0 - decision.epsilon)
        } else {
            0.0
        };
        self.update_arm(decision.redirect_arm, x, w_dag)
    }

    fn update_arm(&mut self, arm: usize, x: &[f64], weighted_reward: f64) -> Result<()> {
        self.states[arm].update(x, weighted_reward)?;
        self.widths[arm] = self.params.confidence_width(self.states[arm].count());
        Ok(())
    }
}

/// Dispatching wrapper owned by one trial.
#[derive(Debug, Clone)]
pub enum Attacker {
    None,
    WhiteBox(WhiteBoxAttacker),
    BlackBox(BlackBoxAttacker),
}

impl Attacker {
    pub fn build(kind: AttackerKind, params: ModelParams, target: usize, seed: u64) -> Self {
        match kind {
            AttackerKind::None => Attacker::None,
            AttackerKind::WhiteBox => {
                Attacker::WhiteBox(WhiteBoxAttacker::new(params.alpha, target, seed))
            }
            AttackerKind::BlackBox => {
                Attacker::BlackBox(BlackBoxAttacker::new(params, target, seed))
            }
        }
    }

    pub fn transform(
        &mut self,
        env: &Environment,
        x: &[f64],
        agent_arm: usize,
    ) -> Result<AttackDecision> {
        match self {
            Attacker::None => Ok(AttackDecision::pass_through(agent_arm)),
            Attacker::WhiteBox(a) => a.transform(env, x, agent_arm),
            Attacker::BlackBox(a) => Ok(a.transform(x, agent_arm)),
        }
    }

    pub fn observe(&mut self, x: &[f64], decision: &AttackDecision, reward: f64) -> Result<()> {
        match self {
            Attacker::None | Attacker::WhiteBox(_) => Ok(()),
            Attacker::BlackBox(a) => a.observe(x, decision, reward),
        }
    }
}
