use std::path::PathBuf;
use std::process::ExitCode;

use banditlab_cli::{cmd_prep, cmd_run, cmd_table, exit_code, PrepOptions, THREADS_ENV};

fn usage() -> String {
    format!(
        "\
banditlab - action-poisoning attack simulator for linear contextual bandits

USAGE:
  banditlab run <config.toml>
  banditlab table <dir>
  banditlab prep <ratings.csv> --out <features> [FLAGS]

COMMANDS:
  run     Execute the configured experiment; writes report.json,
          summary.csv and cost_curve.csv into the config's out_dir and
          prints a one-line summary (mean target pulls).
  table   Merge every report.json found under <dir> into one CSV
          (rows: agent x attacker, columns: datasets); prints it and
          writes <dir>/table.csv.
  prep    Build a feature file from a user,item,rating CSV via low-rank
          factorization.

PREP FLAGS:
  --out PATH      Output feature file (required)
  --d N           Latent dimension (default 6)
  --reg X         ALS regularization (default 0.1)
  --iters N       ALS sweeps (default 20)
  --seed N        Factorization seed (default 1)
  --lo X --hi X   Rating normalization range (default 0 1)
  --l X --s X     Norm bounds for user/item rows (default sqrt(2))
  --target N      Target arm for margin validation (default: last item)
  --bias X        Append a constant feature: 1 to users, X to items

ENVIRONMENT:
  {THREADS_ENV}   Worker threads for trials (default: all cores)

EXIT CODES:
  0 success, 2 config error, 3 data error, 4 numeric failure
"
    )
}

fn parse_prep(args: &[String]) -> Result<PrepOptions, String> {
    if args.is_empty() {
        return Err("prep needs a ratings file".to_string());
    }
    let mut opts = PrepOptions::new(PathBuf::from(&args[0]), PathBuf::new());
    let mut out_set = false;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} needs a value"))
        };
        match flag.as_str() {
            "--out" => {
                opts.out = PathBuf::from(value("--out")?);
                out_set = true;
            }
            "--d" => opts.d = value("--d")?.parse().map_err(|_| "bad --d".to_string())?,
            "--reg" => {
                opts.reg = value("--reg")?
                    .parse()
                    .map_err(|_| "bad --reg".to_string())?
            }
            "--iters" => {
                opts.iterations = value("--iters")?
                    .parse()
                    .map_err(|_| "bad --iters".to_string())?
            }
            "--seed" => {
                opts.seed = value("--seed")?
                    .parse()
                    .map_err(|_| "bad --seed".to_string())?
            }
            "--lo" => opts.lo = value("--lo")?.parse().map_err(|_| "bad --lo".to_string())?,
            "--hi" => opts.hi = value("--hi")?.parse().map_err(|_| "bad --hi".to_string())?,
            "--l" => opts.l_bound = value("--l")?.parse().map_err(|_| "bad --l".to_string())?,
            "--s" => opts.s_bound = value("--s")?.parse().map_err(|_| "bad --s".to_string())?,
            "--target" => {
                opts.target_arm = Some(
                    value("--target")?
                        .parse()
                        .map_err(|_| "bad --target".to_string())?,
                )
            }
            "--bias" => {
                opts.bias = Some(
                    value("--bias")?
                        .parse()
                        .map_err(|_| "bad --bias".to_string())?,
                )
            }
            other => return Err(format!("unknown flag {other}")),
        }
    }
    if !out_set {
        return Err("prep requires --out".to_string());
    }
    Ok(opts)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match args.first().map(String::as_str) {
        Some("run") if args.len() == 2 => cmd_run(PathBuf::from(&args[1]).as_path()).map(|_| ()),
        Some("table") if args.len() == 2 => {
            cmd_table(PathBuf::from(&args[1]).as_path()).map(|_| ())
        }
        Some("prep") => match parse_prep(&args[1..]) {
            Ok(opts) => cmd_prep(&opts),
            Err(msg) => {
                eprintln!("error: usage: {msg}");
                return ExitCode::from(2);
            }
        },
        Some("--help") | Some("-h") | Some("help") => {
            print!("{}", usage());
            return ExitCode::SUCCESS;
        }
        _ => {
            eprint!("{}", usage());
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Single-line, machine-readable: kind + message.
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: exit={} {}", exit_code(&e), msg);
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
