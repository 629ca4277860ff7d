//! Trial and experiment orchestration.
//!
//! One trial runs the interaction protocol for a fixed horizon: sample a
//! context, let the agent pick an arm, let the attacker possibly swap it,
//! draw the reward from the post-attack arm, then feed the reward back to
//! the agent (under the agent's own arm label) and to the attacker. A trial
//! is a pure function of `(environment, params, kinds, trial seed)`.
//! Experiments fan trials out across threads; results never depend on the
//! thread count because every random stream derives from the trial seed.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind};
use crate::attackers::{AttackDecision, Attacker, AttackerKind};
use crate::env::Environment;
use crate::params::ModelParams;
use crate::seeding::{self, Stream};
use crate::{Error, Result};

/// Everything logged about a single round (only kept when round recording
/// is switched on; a million-round trial does not want this by default).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub context: Vec<f64>,
    /// Arm the agent chose.
    pub agent_arm: usize,
    /// Arm the environment actually served.
    pub post_arm: usize,
    pub epsilon: f64,
    pub reward: f64,
    pub attacked: bool,
    /// Instantaneous pseudo-regret of the agent's choice.
    pub regret: f64,
}

/// Aggregates of one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Rounds where the agent itself chose the target arm.
    pub target_pulls: u64,
    /// Rounds where the served arm differed from the chosen arm.
    pub attack_cost: u64,
    /// Cumulative pseudo-regret at the horizon.
    pub final_regret: f64,
    /// Agent-side pull counts per arm.
    pub pull_counts: Vec<u64>,
    /// Attack cost at each checkpoint.
    pub cost_curve: Vec<(u64, u64)>,
    /// Cumulative pseudo-regret at each checkpoint.
    pub regret_curve: Vec<(u64, f64)>,
    /// Rounds where the black-box mixing denominator was exactly zero.
    pub degenerate_rounds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<RoundRecord>>,
}

/// Read-only view of one completed round, exposed to trial observers for
/// instrumented verification.
pub struct RoundView<'a> {
    pub t: u64,
    pub x: &'a [f64],
    pub agent_arm: usize,
    pub decision: &'a AttackDecision,
    pub reward: f64,
    pub regret_step: f64,
    pub agent: &'a Agent,
    pub attacker: &'a Attacker,
}

/// Run one trial. See [`run_trial_observed`] for the instrumented variant.
pub fn run_trial(
    env: &Environment,
    params: &ModelParams,
    agent_kind: AgentKind,
    attacker_kind: AttackerKind,
    trial_seed: u64,
    checkpoints: &[u64],
    record_rounds: bool,
) -> Result<TrialResult> {
    run_trial_observed(
        env,
        params,
        agent_kind,
        attacker_kind,
        trial_seed,
        checkpoints,
        record_rounds,
        |_| {},
    )
}

/// Run one trial, invoking `observer` after every completed round.
#[allow(clippy::too_many_arguments)]
pub fn run_trial_observed<F>(
    env: &Environment,
    params: &ModelParams,
    agent_kind: AgentKind,
    attacker_kind: AttackerKind,
    trial_seed: u64,
    checkpoints: &[u64],
    record_rounds: bool,
    mut observer: F,
) -> Result<TrialResult>
where
    F: FnMut(&RoundView<'_>),
{
    let attach = |e: Error| Error::Trial {
        seed: trial_seed,
        source: Box::new(e),
    };
    let target = env.target();
    let mut agent = Agent::new(
        agent_kind,
        *params,
        seeding::stream_seed(trial_seed, Stream::Agent),
    );
    let mut attacker = Attacker::build(
        attacker_kind,
        *params,
        target,
        seeding::stream_seed(trial_seed, Stream::Attacker),
    );
    let mut ctx = env.context_stream(seeding::stream_seed(trial_seed, Stream::Context));
    let mut noise_rng = StdRng::seed_from_u64(seeding::stream_seed(trial_seed, Stream::Noise));

    let mut cps: Vec<u64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| c >= 1 && c <= params.horizon)
        .collect();
    cps.sort_unstable();
    cps.dedup();

    let mut x: Vec<f64> = Vec::with_capacity(params.d);
    let mut target_pulls = 0u64;
    let mut attack_cost = 0u64;
    let mut regret = 0.0f64;
    let mut cost_curve = Vec::with_capacity(cps.len());
    let mut regret_curve = Vec::with_capacity(cps.len());
    let mut next_cp = 0usize;
    let mut rounds = record_rounds.then(Vec::new);

    for t in 1..=params.horizon {
        ctx.fill(&mut x);
        let agent_arm = agent.select(&x);
        let decision = attacker.transform(env, &x, agent_arm).map_err(attach)?;
        let reward = env.draw_reward(&x, decision.post_action, &mut noise_rng);
        if !reward.is_finite() {
            return Err(attach(Error::Numeric(format!(
                "non-finite reward at round {t}"
            ))));
        }
        agent.observe(&x, agent_arm, reward).map_err(attach)?;
        attacker.observe(&x, &decision, reward).map_err(attach)?;

        if agent_arm == target {
            target_pulls += 1;
        }
        if decision.attacked {
            attack_cost += 1;
        }
        let regret_step = env.best_mean(&x) - env.mean_reward(&x, agent_arm);
        regret += regret_step;

        if next_cp < cps.len() && t == cps[next_cp] {
            cost_curve.push((t, attack_cost));
            regret_curve.push((t, regret));
            next_cp += 1;
        }
        if let Some(recs) = rounds.as_mut() {
            recs.push(RoundRecord {
                t,
                context: x.clone(),
                agent_arm,
                post_arm: decision.post_action,
                epsilon: decision.epsilon,
                reward,
                attacked: decision.attacked,
                regret: regret_step,
            });
        }
        observer(&RoundView {
            t,
            x: &x,
            agent_arm,
            decision: &decision,
            reward,
            regret_step,
            agent: &agent,
            attacker: &attacker,
        });
    }

    if !regret.is_finite() {
        return Err(attach(Error::Numeric(
            "non-finite cumulative regret".into(),
        )));
    }
    let degenerate_rounds = match &attacker {
        Attacker::BlackBox(b) => b.degenerate_rounds(),
        _ => 0,
    };
    Ok(TrialResult {
        seed: trial_seed,
        target_pulls,
        attack_cost,
        final_regret: regret,
        pull_counts: agent.pull_counts(),
        cost_curve,
        regret_curve,
        degenerate_rounds,
        rounds,
    })
}

/// Experiment setup: one (environment, agent, attacker) cell repeated over
/// seeded trials.
pub struct ExperimentSetup<'a> {
    pub env: &'a Environment,
    pub params: ModelParams,
    pub agent: AgentKind,
    pub attacker: AttackerKind,
    pub n_trials: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    /// Worker threads; 0 means use the machine's available parallelism.
    pub threads: usize,
    pub record_rounds: bool,
    /// Free-form dataset label carried into the report ("synthetic", file
    /// stem, ...).
    pub dataset: String,
    /// How the attack margin was obtained ("fixed" or "probe").
    pub alpha_source: String,
}

/// Mean/std pair over trials.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> Moments {
    let n = values.clone().count();
    if n == 0 {
        return Moments {
            mean: 0.0,
            std: 0.0,
        };
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    };
    Moments { mean, std }
}

/// Per-checkpoint attack-cost statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u64,
    pub mean_cost: f64,
    pub std_cost: f64,
}

/// Aggregated outcome of an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub agent: String,
    pub attacker: String,
    pub dataset: String,
    pub alpha_source: String,
    pub params: ModelParams,
    pub n_trials: usize,
    pub master_seed: u64,
    pub target_pulls: Moments,
    pub attack_cost: Moments,
    pub final_regret: Moments,
    pub cost_curve: Vec<CurvePoint>,
    pub trials: Vec<TrialResult>,
}

/// Run `n_trials` independent trials and aggregate.
///
/// Trial `k` uses the seed `seeding::trial_seed(master_seed, k)`. Trials are
/// distributed over worker threads; any trial error aborts the experiment,
/// reported with the failing trial's seed (the lowest-index failure, so the
/// error is deterministic too).
pub fn run_experiment(setup: &ExperimentSetup<'_>) -> Result<ExperimentReport> {
    if setup.n_trials == 0 {
        return Err(Error::InvalidParams("n_trials must be >= 1".to_string()));
    }
    let n = setup.n_trials;
    let threads = if setup.threads == 0 {
        std::thread::available_parallelism()
            .map(|v| v.get())
            .unwrap_or(1)
    } else {
        setup.threads
    }
    .clamp(1, n);

    let slots: Vec<Mutex<Option<Result<TrialResult>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let seed = seeding::trial_seed(setup.master_seed, i as u64);
                let res = run_trial(
                    setup.env,
                    &setup.params,
                    setup.agent,
                    setup.attacker,
                    seed,
                    &setup.checkpoints,
                    setup.record_rounds,
                );
                *slots[i].lock().unwrap() = Some(res);
            });
        }
    });

    let mut trials = Vec::with_capacity(n);
    for slot in slots {
        trials.push(slot.into_inner().unwrap().expect("trial slot filled")?);
    }

    let target_pulls = moments(trials.iter().map(|t| t.target_pulls as f64));
    let attack_cost = moments(trials.iter().map(|t| t.attack_cost as f64));
    let final_regret = moments(trials.iter().map(|t| t.final_regret));
    let n_points = trials[0].cost_curve.len();
    let mut cost_curve = Vec::with_capacity(n_points);
    for p in 0..n_points {
        let t = trials[0].cost_curve[p].0;
        let m = moments(trials.iter().map(|tr| tr.cost_curve[p].1 as f64));
        cost_curve.push(CurvePoint {
            t,
            mean_cost: m.mean,
            std_cost: m.std,
        });
    }

    Ok(ExperimentReport {
        agent: setup.agent.label().to_string(),
        attacker: setup.attacker.label().to_string(),
        dataset: setup.dataset.clone(),
        alpha_source: setup.alpha_source.clone(),
        params: setup.params,
        n_trials: n,
        master_seed: setup.master_seed,
        target_pulls,
        attack_cost,
        final_regret,
        cost_curve,
        trials,
    })
}

/// Checkpoint grid: powers of ten from 1000 up to the horizon, with the
/// horizon itself always included last.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut v = Vec::new();
    let mut c = 1000u64;
    while c < horizon {
        v.push(c);
        match c.checked_mul(10) {
            Some(next) => c = next,
            None => break,
        }
    }
    v.push(horizon);
    v
}

/// Growth diagnostics over a cost curve: the per-checkpoint values and the
/// ratio between successive checkpoints (`None` where the earlier value is
/// zero). A linear-cost curve on a decade grid shows ratios near 10;
/// sublinear attacks show much smaller ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostGrowth {
    pub points: Vec<(u64, f64)>,
    pub ratios: Vec<Option<f64>>,
}

pub fn cost_growth_summary(curve: &[(u64, f64)]) -> Result<CostGrowth> {
    if curve.len() < 2 {
        return Err(Error::InvalidParams(
            "cost growth needs at least two checkpoints".to_string(),
        ));
    }
    let ratios = curve
        .windows(2)
        .map(|w| {
            if w[0].1 > 0.0 {
                Some(w[1].1 / w[0].1)
            } else {
                None
            }
        })
        .collect();
    Ok(CostGrowth {
        points: curve.to_vec(),
        ratios,
    })
}
