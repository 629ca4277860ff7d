//! Minimal library walkthrough: build the synthetic environment, run one
//! attacked trial, and print what the adversary achieved.

use banditlab::agents::AgentKind;
use banditlab::attackers::AttackerKind;
use banditlab::env::Environment;
use banditlab::harness::{default_checkpoints, run_trial};
use banditlab::ModelParams;

fn main() {
    let horizon = 100_000;
    let params = ModelParams::synthetic_defaults(horizon)
        .validated()
        .unwrap()
        .with_alpha(0.2);
    let env = Environment::synthetic(&params, 245, 0.01, params.k - 1, 10_000).unwrap();

    let result = run_trial(
        &env,
        &params,
        AgentKind::LinUcb,
        AttackerKind::WhiteBox,
        42,
        &default_checkpoints(horizon),
        false,
    )
    .unwrap();

    println!(
        "target arm pulled {} / {} rounds ({:.2}%), attack cost {} ({:.2}%)",
        result.target_pulls,
        horizon,
        100.0 * result.target_pulls as f64 / horizon as f64,
        result.attack_cost,
        100.0 * result.attack_cost as f64 / horizon as f64,
    );
    for (t, cost) in &result.cost_curve {
        println!("  |C|({t}) = {cost}");
    }
}
