//! Acceptance suite: the exit criteria for the whole artifact, one test and
//! one printed PASS/FAIL line per criterion. Run with
//! `cargo test -p banditlab --test acceptance -- --nocapture` to see the
//! lines; the full-scale experiments (a million rounds, ten trials per
//! cell) are shared between criteria, so the suite runs each cell once.

mod common;

use std::sync::OnceLock;

use banditlab::agents::AgentKind;
use banditlab::attackers::{Attacker, AttackerKind, BlackBoxAttacker, WhiteBoxAttacker};
use banditlab::config::ExperimentConfig;
use banditlab::dataprep::{self, FactorizeOptions};
use banditlab::env::{ArmSet, ContextSource, Environment};
use banditlab::harness::{
    cost_growth_summary, default_checkpoints, run_experiment, run_trial_observed, ExperimentReport,
    ExperimentSetup,
};
use banditlab::output;
use banditlab::ridge::RidgeState;
use banditlab::ModelParams;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const T: u64 = 1_000_000;
const N_TRIALS: usize = 10;
const MASTER_SEED: u64 = 7;

fn check(criterion: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} - {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{criterion} failed: {detail}");
}

fn params() -> &'static ModelParams {
    static P: OnceLock<ModelParams> = OnceLock::new();
    P.get_or_init(|| common::synthetic_params(T))
}

fn env() -> &'static Environment {
    static E: OnceLock<Environment> = OnceLock::new();
    E.get_or_init(|| common::canonical_env(params()))
}

fn cell(agent: AgentKind, attacker: AttackerKind) -> ExperimentReport {
    run_experiment(&ExperimentSetup {
        env: env(),
        params: *params(),
        agent,
        attacker,
        n_trials: N_TRIALS,
        master_seed: MASTER_SEED,
        checkpoints: default_checkpoints(T),
        threads: 0,
        record_rounds: false,
        dataset: "synthetic".to_string(),
        alpha_source: "fixed".to_string(),
    })
    .unwrap()
}

macro_rules! shared_cell {
    ($fn_name:ident, $agent:expr, $attacker:expr) => {
        fn $fn_name() -> &'static ExperimentReport {
            static R: OnceLock<ExperimentReport> = OnceLock::new();
            R.get_or_init(|| cell($agent, $attacker))
        }
    };
}

shared_cell!(wb_linucb, AgentKind::LinUcb, AttackerKind::WhiteBox);
shared_cell!(bb_linucb, AgentKind::LinUcb, AttackerKind::BlackBox);
shared_cell!(none_linucb, AgentKind::LinUcb, AttackerKind::None);
shared_cell!(
    wb_eps,
    AgentKind::EpsGreedy { c: 20.0 },
    AttackerKind::WhiteBox
);
shared_cell!(
    bb_eps,
    AgentKind::EpsGreedy { c: 20.0 },
    AttackerKind::BlackBox
);
shared_cell!(
    wb_lints,
    AgentKind::LinTs { scale: Some(0.5) },
    AttackerKind::WhiteBox
);
shared_cell!(
    bb_lints,
    AgentKind::LinTs { scale: Some(0.5) },
    AttackerKind::BlackBox
);

#[test]
fn criterion_01_whitebox_linucb_pulls_target() {
    let mean = wb_linucb().target_pulls.mean;
    check(
        "criterion 1 (white-box LinUCB target pulls)",
        mean >= 0.95 * T as f64,
        &format!(
            "mean target pulls {mean:.1} of {T} (need >= {})",
            0.95 * T as f64
        ),
    );
}

#[test]
fn criterion_02_blackbox_linucb_pulls_target() {
    let mean = bb_linucb().target_pulls.mean;
    check(
        "criterion 2 (black-box LinUCB target pulls)",
        mean >= 0.85 * T as f64,
        &format!(
            "mean target pulls {mean:.1} of {T} (need >= {})",
            0.85 * T as f64
        ),
    );
}

#[test]
fn criterion_03_unattacked_linucb_ignores_target() {
    let mean = none_linucb().target_pulls.mean;
    check(
        "criterion 3 (no-attack LinUCB target pulls)",
        mean <= 0.05 * T as f64,
        &format!(
            "mean target pulls {mean:.1} of {T} (need <= {})",
            0.05 * T as f64
        ),
    );
}

#[test]
fn criterion_04_baseline_agents_under_attack() {
    let cells = [
        ("white-box eps-greedy", wb_eps().target_pulls.mean, 0.90),
        ("white-box lints", wb_lints().target_pulls.mean, 0.90),
        ("black-box eps-greedy", bb_eps().target_pulls.mean, 0.80),
        ("black-box lints", bb_lints().target_pulls.mean, 0.80),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (name, mean, frac) in cells {
        let pass = mean >= frac * T as f64;
        ok &= pass;
        detail.push_str(&format!("{name} {:.3} (need >= {frac}) ", mean / T as f64));
    }
    check("criterion 4 (eps-greedy and lints rows)", ok, detail.trim());
}

#[test]
fn criterion_05_attack_cost_grows_sublinearly() {
    let ratio_of = |r: &ExperimentReport| {
        let curve: Vec<(u64, f64)> = r.cost_curve.iter().map(|p| (p.t, p.mean_cost)).collect();
        let growth = cost_growth_summary(&curve).unwrap();
        growth.ratios.last().cloned().flatten()
    };
    let wb = ratio_of(wb_linucb());
    let bb = ratio_of(bb_linucb());
    let ok = matches!(wb, Some(r) if r <= 4.0) && matches!(bb, Some(r) if r <= 6.0);
    check(
        "criterion 5 (cost sublinearity over the last decade)",
        ok,
        &format!("white-box ratio {wb:?} (need <= 4), black-box ratio {bb:?} (need <= 6)"),
    );
}

#[test]
fn criterion_06_whitebox_mixture_identity_is_exact() {
    // Over at least 10^4 random valid (environment, context) pairs, the
    // mixing probability places the mixture mean exactly at
    // (1 - alpha) * target mean.
    let mut cases = 0usize;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    while cases < 10_000 {
        seed += 1;
        assert!(seed < 200_000, "pool-env generator starved");
        let Some((env, params)) = common::random_pool_env(seed, 100) else {
            continue;
        };
        let target = env.target();
        let mut wb = WhiteBoxAttacker::new(params.alpha, target, seed);
        let mut stream = env.context_stream(seed ^ 0x5555);
        let mut x = Vec::new();
        for _ in 0..4 {
            stream.fill(&mut x);
            let agent_arm = (target + 1) % params.k;
            let d = wb.transform(&env, &x, agent_arm).unwrap();
            let m_target = env.mean_reward(&x, target);
            let (_, m_min) = env.worst_arm(&x);
            let gap = (d.epsilon * m_target + (1.0 - d.epsilon) * m_min
                - (1.0 - params.alpha) * m_target)
                .abs();
            worst = worst.max(gap);
            cases += 1;
        }
    }
    check(
        "criterion 6 (white-box exact-mean identity)",
        worst <= 1e-12,
        &format!("{cases} cases, worst |mixture - (1-alpha)*target| = {worst:.3e}"),
    );
}

#[test]
fn criterion_07_epsilon_ranges() {
    // White-box on environments whose margin is certified over the whole
    // (finite) context domain: eps in (1/2, 1-alpha]. Black-box everywhere,
    // including the full-scale synthetic environment: eps in [1/2, 1-alpha].
    let mut wb_ok = true;
    let mut envs = 0;
    let mut seed = 0u64;
    while envs < 20 {
        seed += 1;
        assert!(seed < 2_000, "pool-env generator starved");
        let Some((env, params)) = common::random_pool_env(seed, 2_000) else {
            continue;
        };
        envs += 1;
        let target = env.target();
        for (agent, attacker) in [
            (AgentKind::LinUcb, AttackerKind::WhiteBox),
            (AgentKind::LinUcb, AttackerKind::BlackBox),
            (AgentKind::EpsGreedy { c: 5.0 }, AttackerKind::BlackBox),
        ] {
            run_trial_observed(&env, &params, agent, attacker, seed, &[], false, |view| {
                if view.agent_arm == target {
                    return;
                }
                let eps = view.decision.epsilon;
                match attacker {
                    AttackerKind::WhiteBox => {
                        wb_ok &= eps > 0.5 && eps <= 1.0 - params.alpha + 1e-15;
                    }
                    _ => {
                        wb_ok &= (0.5..=1.0 - params.alpha + 1e-15).contains(&eps);
                    }
                }
            })
            .unwrap();
        }
    }
    // Black-box on the canonical synthetic environment at 10^5 rounds.
    let p = ModelParams {
        horizon: 100_000,
        ..*params()
    };
    let mut bb_ok = true;
    run_trial_observed(
        env(),
        &p,
        AgentKind::LinUcb,
        AttackerKind::BlackBox,
        42,
        &[],
        false,
        |view| {
            if view.agent_arm != env().target() {
                bb_ok &= (0.5..=1.0 - p.alpha).contains(&view.decision.epsilon);
            }
        },
    )
    .unwrap();
    check(
        "criterion 7 (epsilon ranges)",
        wb_ok && bb_ok,
        &format!("{envs} certified environments plus full-scale black-box trial"),
    );
}

#[test]
fn criterion_08_blackbox_confidence_coverage() {
    // During a black-box trial at 10^5 rounds, the attacker's confidence
    // interval must contain the true mean on at least 78% of rounds, per
    // arm, counting rounds where that arm has at least 50 observations.
    let p = ModelParams {
        horizon: 100_000,
        ..*params()
    };
    let k = p.k;
    let mut hits = vec![0u64; k];
    let mut rounds = vec![0u64; k];
    run_trial_observed(
        env(),
        &p,
        AgentKind::LinUcb,
        AttackerKind::BlackBox,
        1234,
        &[],
        false,
        |view| {
            let Attacker::BlackBox(bb) = view.attacker else {
                panic!("expected black-box attacker");
            };
            for arm in 0..k {
                if bb.scheduled_rounds(arm) < 50 {
                    continue;
                }
                rounds[arm] += 1;
                let err = (bb.estimate(arm, view.x) - env().mean_reward(view.x, arm)).abs();
                if err <= bb.width(arm) * bb.mahalanobis(arm, view.x) {
                    hits[arm] += 1;
                }
            }
        },
    )
    .unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for arm in 0..k {
        if rounds[arm] == 0 {
            continue;
        }
        let cov = hits[arm] as f64 / rounds[arm] as f64;
        ok &= cov >= 0.78;
        detail.push_str(&format!("arm{arm} {cov:.3} "));
    }
    check(
        "criterion 8 (attacker interval coverage)",
        ok,
        detail.trim(),
    );
}

#[test]
fn criterion_09_importance_weighting_is_unbiased() {
    // Frozen eps, fixed context: the weighted responses must average to the
    // true mean of each served arm, within 4 standard errors. The oracle is
    // the two-point mixture expectation itself. The attacker's own ridge
    // estimate built from the same stream must land on the same value.
    let p = params();
    let e = env();
    let target = e.target();
    let redirect = (target + 3) % p.k;
    let eps = 0.65;
    let n = 100_000usize;
    let mut stream = e.context_stream(99);
    let mut x = Vec::new();
    stream.fill(&mut x);
    let m_target = e.mean_reward(&x, target);
    let m_redirect = e.mean_reward(&x, redirect);

    let mut rng = StdRng::seed_from_u64(4321);
    let mut bb = BlackBoxAttacker::new(*p, target, 1);
    let mut w_target = Vec::with_capacity(n);
    let mut w_redirect = Vec::with_capacity(n);
    for _ in 0..n {
        let coin: f64 = rng.random();
        let served = if coin < eps { target } else { redirect };
        let reward = e.draw_reward(&x, served, &mut rng);
        w_target.push(if served == target { reward / eps } else { 0.0 });
        w_redirect.push(if served == redirect {
            reward / (1.0 - eps)
        } else {
            0.0
        });
        let decision = banditlab::attackers::AttackDecision {
            post_action: served,
            redirect_arm: redirect,
            epsilon: eps,
            attacked: true,
        };
        bb.observe(&x, &decision, reward).unwrap();
    }
    let tol = |vals: &[f64], truth: f64| {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() as f64 - 1.0);
        let stderr = (var / vals.len() as f64).sqrt();
        ((mean - truth).abs(), 4.0 * stderr)
    };
    let (err_t, band_t) = tol(&w_target, m_target);
    let (err_d, band_d) = tol(&w_redirect, m_redirect);
    let est_t = (bb.estimate(target, &x) - m_target).abs();
    let est_d = (bb.estimate(redirect, &x) - m_redirect).abs();
    let ok = err_t <= band_t && err_d <= band_d && est_t <= band_t + 1e-3 && est_d <= band_d + 1e-3;
    check(
        "criterion 9 (importance-weighting unbiasedness)",
        ok,
        &format!(
            "target err {err_t:.2e} (band {band_t:.2e}), redirect err {err_d:.2e} (band {band_d:.2e}), estimator errs {est_t:.2e}/{est_d:.2e}"
        ),
    );
}

#[test]
fn criterion_10_incremental_ridge_matches_batch_oracle() {
    let d = 6;
    let lambda = 2.0;
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut s = RidgeState::new(d, lambda);
        let mut a = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = lambda;
        }
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.6..0.6)).collect();
            let w = rng.random_range(1.0..5.0);
            let y = w * rng.random_range(-1.0..1.0);
            s.update(&x, y).unwrap();
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
                b[i] += y * x[i];
            }
        }
        let oracle = gauss_solve(a, b);
        let err = s
            .theta()
            .iter()
            .zip(&oracle)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        let scale = oracle.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(err / scale);
    }
    check(
        "criterion 10 (ridge oracle equivalence)",
        worst < 1e-9,
        &format!("worst relative error over 100 x 1000 weighted updates: {worst:.3e}"),
    );
}

#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..d {
            let f = a[row][col] / a[col][col];
            for j in col..d {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = b[i];
        for j in i + 1..d {
            sum -= a[i][j] * x[j];
        }
        x[i] = sum / a[i][i];
    }
    x
}

#[test]
fn criterion_11_als_monotone_and_rank_one_recovery() {
    let mut triples = Vec::new();
    for u in 0..25u32 {
        for i in 0..8u32 {
            let a = 0.5 + 0.04 * u as f64;
            let b = 0.6 + 0.09 * i as f64;
            triples.push((u, i, a * b));
        }
    }
    let table = dataprep::RatingsTable::from_triples(25, 8, triples.clone());
    let mut opts = FactorizeOptions::new(1, 1e-9, 60, 17);
    opts.l_bound = 10.0;
    opts.s_bound = 10.0;
    let ff = dataprep::factorize(&table, &opts).unwrap();
    let monotone = ff
        .meta
        .objective
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    let mut rmse = 0.0;
    for &(u, i, r) in &triples {
        let e: f64 = r - ff.users[u as usize]
            .iter()
            .zip(&ff.items[i as usize])
            .map(|(a, b)| a * b)
            .sum::<f64>();
        rmse += e * e;
    }
    rmse = (rmse / triples.len() as f64).sqrt();
    check(
        "criterion 11 (ALS monotonicity and rank-1 recovery)",
        monotone && rmse <= 1e-6,
        &format!("objective monotone: {monotone}, rank-1 rmse {rmse:.2e}"),
    );
}

const DETERMINISM_CONFIG: &str = r#"
[environment]
kind = "synthetic"
seed = 245
noise_var = 0.01

[agent]
kind = "linucb"

[attacker]
kind = "blackbox"
alpha_source = "fixed"
alpha = 0.2

[run]
horizon = 10000
n_trials = 3
master_seed = 99
out_dir = "unused"
"#;

#[test]
fn criterion_12_identical_seeds_give_identical_summaries() {
    let run_once = || {
        let cfg = ExperimentConfig::parse(DETERMINISM_CONFIG).unwrap();
        let built = cfg.build(std::path::Path::new(".")).unwrap();
        let report = run_experiment(&ExperimentSetup {
            env: &built.env,
            params: built.params,
            agent: built.agent,
            attacker: built.attacker,
            n_trials: built.n_trials,
            master_seed: built.master_seed,
            checkpoints: built.checkpoints,
            threads: 0,
            record_rounds: false,
            dataset: built.dataset,
            alpha_source: built.alpha_source,
        })
        .unwrap();
        (
            output::summary_csv(&report),
            output::cost_curve_csv(&report),
        )
    };
    let (sum_a, curve_a) = run_once();
    let (sum_b, curve_b) = run_once();
    check(
        "criterion 12 (determinism: identical config and seed)",
        sum_a == sum_b && curve_a == curve_b,
        &format!(
            "summary.csv {} bytes, byte-identical across runs",
            sum_a.len()
        ),
    );
}

#[test]
fn criterion_13_dataset_mode_attack_dominates_baseline() {
    // Feature files from ratings data are not exactly reproducible, so the
    // dataset-mode gate is qualitative: on a validated feature file, the
    // attacked agent must pull the target at least 10x as often as the
    // unattacked agent at the full horizon.
    let mut rng = StdRng::seed_from_u64(5150);
    let mut csv = String::from("user,item,rating\n");
    for u in 0..60 {
        for i in 0..6 {
            let a = 0.8 + 0.4 * rng.random::<f64>();
            let b = [0.25, 0.4, 0.55, 0.7, 0.85, 1.0][i];
            csv.push_str(&format!("u{u},i{i},{}\n", a * b));
        }
    }
    let table = dataprep::parse_ratings(&csv).unwrap();
    let table = dataprep::normalize_ratings(&table, 0.1, 1.0).unwrap();
    // Target a middling item: never the worst arm (validation requires it),
    // never the best (the unattacked baseline must have no reason to pull it).
    let mut fopts = FactorizeOptions::new(3, 1e-3, 40, 8);
    fopts.target_arm = Some(2);
    let ff = dataprep::factorize(&table, &fopts).unwrap();
    let text = dataprep::feature_file_to_string(&ff);
    let ff = dataprep::feature_file_from_str(&text).unwrap();
    assert!(ff.meta.alpha > 0.0);

    let params = ModelParams {
        d: ff.d,
        k: ff.items.len(),
        l: std::f64::consts::SQRT_2,
        s: std::f64::consts::SQRT_2,
        r: 0.1,
        lambda: 2.0,
        delta: 0.1,
        alpha: 0.2,
        horizon: T,
    };
    let target = ff.meta.target_arm;
    let env = Environment::new(
        ArmSet::new(ff.items.clone()),
        ContextSource::Pool(ff.users.clone()),
        0.01,
        target,
        &params,
        0,
        0,
    )
    .unwrap();
    // Pool domain: the probe margin is exact; grant the attacker its
    // shrunken value.
    let params = params
        .with_alpha((env.probe_alpha() * 0.9).min(0.49))
        .validated()
        .unwrap();
    let run = |attacker: AttackerKind| {
        run_experiment(&ExperimentSetup {
            env: &env,
            params,
            agent: AgentKind::LinUcb,
            attacker,
            n_trials: 3,
            master_seed: 11,
            checkpoints: vec![T],
            threads: 0,
            record_rounds: false,
            dataset: "toy".to_string(),
            alpha_source: "probe".to_string(),
        })
        .unwrap()
        .target_pulls
        .mean
    };
    let attacked = run(AttackerKind::WhiteBox);
    let baseline = run(AttackerKind::None);
    check(
        "criterion 13 (dataset mode: attack >= 10x baseline target pulls)",
        attacked >= 10.0 * baseline && baseline > 0.0,
        &format!(
            "alpha (exact over pool) {:.4}, attacked {attacked:.1} vs baseline {baseline:.1}",
            params.alpha
        ),
    );
}
