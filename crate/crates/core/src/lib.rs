//! Simulation laboratory for action-poisoning attacks on linear contextual bandits.
//!
//! An action-poisoning adversary sits between a bandit agent and the
//! environment: after the agent commits to an arm, the adversary may swap it
//! for a different arm before the environment draws the reward. The agent
//! never learns that the swap happened and books the reward under its own
//! choice. This crate provides:
//!
//! - the shared ridge-regression state and confidence-width functions used by
//!   both sides ([`params`], [`ridge`]),
//! - ground-truth linear environments, synthetic or built from rating data
//!   ([`mod@env`], [`dataprep`]),
//! - victim agents: LinUCB, linear Thompson sampling, ε-greedy ([`agents`]),
//! - white-box and black-box attack policies ([`attackers`]),
//! - a deterministic trial/experiment harness with attack-cost and regret
//!   accounting ([`harness`]),
//! - config parsing and result serialization for the CLI ([`config`],
//!   [`output`]).
//!
//! Everything is seed-deterministic: a trial is a pure function of its seed
//! and configuration, and experiments parallelize across trials without
//! changing any result.
//!
//! ```
//! use banditlab::agents::AgentKind;
//! use banditlab::attackers::AttackerKind;
//! use banditlab::env::Environment;
//! use banditlab::harness::run_trial;
//! use banditlab::ModelParams;
//!
//! let params = ModelParams::synthetic_defaults(500).validated()?.with_alpha(0.2);
//! let env = Environment::synthetic(&params, 245, 0.01, params.k - 1, 10_000)?;
//! let trial = run_trial(&env, &params, AgentKind::LinUcb, AttackerKind::WhiteBox, 1, &[500], false)?;
//! assert_eq!(trial.pull_counts.iter().sum::<u64>(), 500);
//! assert!(trial.attack_cost <= 500 - trial.target_pulls);
//! # Ok::<(), banditlab::Error>(())
//! ```

pub mod agents;
pub mod attackers;
pub mod config;
pub mod dataprep;
pub mod env;
pub mod harness;
mod linalg;
pub mod output;
pub mod params;
pub mod ridge;
pub mod seeding;

mod error;

pub use error::Error;
pub use params::ModelParams;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
