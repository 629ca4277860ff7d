//! Turn ratings data into bandit environments.
//!
//! The pipeline is: ingest a `user,item,rating` CSV, normalize ratings onto
//! a target interval, run alternating least squares to get low-rank user and
//! item features, rescale them to the norm bounds, validate positivity and
//! the target-arm margin over the full user pool, and write everything to a
//! self-describing feature file the environment module can load.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2, SymMat};
use crate::{Error, Result};

/// Dense-remapped rating triples.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    /// `(user index, item index, rating)`, one entry per distinct pair.
    triples: Vec<(u32, u32, f64)>,
    normalization: Option<NormalizationMap>,
}

/// Affine map applied by [`normalize_ratings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub observed_min: f64,
    pub observed_max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RatingsTable {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[(u32, u32, f64)] {
        &self.triples
    }

    pub fn normalization(&self) -> Option<&NormalizationMap> {
        self.normalization.as_ref()
    }

    /// Build a table directly from triples with stringified ids. Mainly for
    /// tests and synthetic fixtures.
    pub fn from_triples(n_users: usize, n_items: usize, triples: Vec<(u32, u32, f64)>) -> Self {
        RatingsTable {
            user_ids: (0..n_users).map(|u| u.to_string()).collect(),
            item_ids: (0..n_items).map(|i| i.to_string()).collect(),
            triples,
            normalization: None,
        }
    }
}

/// Parse ratings CSV text with header `user,item,rating`.
///
/// Ids are remapped to dense indices in first-appearance order; duplicate
/// `(user, item)` pairs keep the last rating seen. Malformed rows are
/// rejected with their 1-based line number.
pub fn parse_ratings(text: &str) -> Result<RatingsTable> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((n, l)) => break (n, l),
            None => {
                return Err(Error::Data {
                    line: None,
                    msg: "empty ratings file".to_string(),
                })
            }
        }
    };
    let cols: Vec<String> = header
        .1
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    if cols != ["user", "item", "rating"] {
        return Err(Error::Data {
            line: Some(header.0 + 1),
            msg: format!("expected header user,item,rating, got {:?}", header.1),
        });
    }

    let mut user_index: HashMap<String, u32> = HashMap::new();
    let mut item_index: HashMap<String, u32> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 3 {
            return Err(Error::Data {
                line: Some(line_no),
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Data {
                line: Some(line_no),
                msg: "empty user or item id".to_string(),
            });
        }
        let rating: f64 = fields[2].parse().map_err(|_| Error::Data {
            line: Some(line_no),
            msg: format!("non-numeric rating {:?}", fields[2]),
        })?;
        if !rating.is_finite() {
            return Err(Error::Data {
                line: Some(line_no),
                msg: format!("non-finite rating {rating}"),
            });
        }
        let u = *user_index.entry(fields[0].to_string()).or_insert_with(|| {
            user_ids.push(fields[0].to_string());
            (user_ids.len() - 1) as u32
        });
        let i = *item_index.entry(fields[1].to_string()).or_insert_with(|| {
            item_ids.push(fields[1].to_string());
            (item_ids.len() - 1) as u32
        });
        match seen.get(&(u, i)) {
            Some(&pos) => triples[pos].2 = rating,
            None => {
                seen.insert((u, i), triples.len());
                triples.push((u, i, rating));
            }
        }
    }
    if triples.is_empty() {
        return Err(Error::Data {
            line: None,
            msg: "ratings file has no data rows".to_string(),
        });
    }
    Ok(RatingsTable {
        user_ids,
        item_ids,
        triples,
        normalization: None,
    })
}

/// Read and parse a ratings CSV file.
pub fn ingest_ratings(path: &Path) -> Result<RatingsTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
        line: None,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_ratings(&text)
}

/// Affinely map the observed rating range onto `[lo, hi]`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must be rejected
pub fn normalize_ratings(table: &RatingsTable, lo: f64, hi: f64) -> Result<RatingsTable> {
    if !(hi > lo) {
        return Err(Error::InvalidParams(format!(
            "normalization needs hi > lo, got [{lo}, {hi}]"
        )));
    }
    if table.is_empty() {
        return Err(Error::Data {
            line: None,
            msg: "cannot normalize an empty table".to_string(),
        });
    }
    let observed_min = table
        .triples
        .iter()
        .map(|t| t.2)
        .fold(f64::INFINITY, f64::min);
    let observed_max = table
        .triples
        .iter()
        .map(|t| t.2)
        .fold(f64::NEG_INFINITY, f64::max);
    if observed_max == observed_min {
        return Err(Error::Data {
            line: None,
            msg: format!("constant ratings ({observed_min}); range is empty"),
        });
    }
    let scale = (hi - lo) / (observed_max - observed_min);
    let mut out = table.clone();
    for t in &mut out.triples {
        t.2 = lo + (t.2 - observed_min) * scale;
    }
    out.normalization = Some(NormalizationMap {
        observed_min,
        observed_max,
        lo,
        hi,
    });
    Ok(out)
}

/// Options for [`factorize`].
#[derive(Debug, Clone)]
pub struct FactorizeOptions {
    /// Latent dimension of the factorization (feature dimension before any
    /// bias augmentation).
    pub d: usize,
    /// L2 regularization on both factor matrices.
    pub reg: f64,
    /// Number of full ALS sweeps.
    pub iterations: usize,
    pub seed: u64,
    /// Norm bound the exported user rows must satisfy.
    pub l_bound: f64,
    /// Norm bound the exported item rows must satisfy.
    pub s_bound: f64,
    /// Target arm for the margin validation; defaults to the last item.
    pub target_arm: Option<usize>,
    /// Optional constant-feature augmentation: appends a 1 to every user
    /// row and this value to every item row, shifting all means up.
    pub bias: Option<f64>,
}

impl FactorizeOptions {
    pub fn new(d: usize, reg: f64, iterations: usize, seed: u64) -> Self {
        FactorizeOptions {
            d,
            reg,
            iterations,
            seed,
            l_bound: std::f64::consts::SQRT_2,
            s_bound: std::f64::consts::SQRT_2,
            target_arm: None,
            bias: None,
        }
    }
}

/// Metadata carried by a feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub normalization: Option<NormalizationMap>,
    pub reg: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Uniform factor applied to user rows to satisfy the norm bound.
    pub user_scale: f64,
    /// Uniform factor applied to item rows to satisfy the norm bound.
    pub item_scale: f64,
    /// Bias entry appended to item rows, if augmentation was requested.
    pub bias: Option<f64>,
    /// Training objective after each full sweep.
    pub objective: Vec<f64>,
    /// Smallest mean reward over every (user, item) pair.
    pub min_mean: f64,
    /// Exact attack margin over the user pool for `target_arm`.
    pub alpha: f64,
    pub target_arm: usize,
}

/// Feature matrices plus provenance, ready to back an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub d: usize,
    /// Context pool rows (one per user).
    pub users: Vec<Vec<f64>>,
    /// Arm coefficient rows (one per item).
    pub items: Vec<Vec<f64>>,
    pub meta: FeatureMeta,
}

/// Alternating least squares on the observed entries, followed by bound
/// rescaling and positivity/margin validation over the whole user pool.
///
/// Minimizes `sum (r_ui - <u_u, v_i>)^2 + reg*(sum |u|^2 + sum |v|^2)` by
/// exact block updates, so the objective never increases across sweeps.
pub fn factorize(table: &RatingsTable, opts: &FactorizeOptions) -> Result<FeatureFile> {
    if opts.d < 1 {
        return Err(Error::InvalidParams(
            "factorization needs d >= 1".to_string(),
        ));
    }
    if table.is_empty() {
        return Err(Error::Data {
            line: None,
            msg: "cannot factorize an empty table".to_string(),
        });
    }
    if opts.reg < 0.0 || !opts.reg.is_finite() {
        return Err(Error::InvalidParams(
            "reg must be finite and >= 0".to_string(),
        ));
    }
    let n_users = table.n_users();
    let n_items = table.n_items();
    let d = opts.d;

    let mut by_user: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_users];
    let mut by_item: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_items];
    for &(u, i, r) in &table.triples {
        by_user[u as usize].push((i, r));
        by_item[i as usize].push((u, r));
    }

    let mut rng = StdRng::seed_from_u64(opts.seed);
    let init = |rng: &mut StdRng| -> Vec<f64> {
        (0..d)
            .map(|_| rng.random::<f64>() / (d as f64).sqrt())
            .collect()
    };
    let mut users: Vec<Vec<f64>> = (0..n_users).map(|_| init(&mut rng)).collect();
    let mut items: Vec<Vec<f64>> = (0..n_items).map(|_| init(&mut rng)).collect();

    let solve_side =
        |rows: &mut Vec<Vec<f64>>, other: &[Vec<f64>], obs: &[Vec<(u32, f64)>]| -> Result<()> {
            for (row, row_obs) in rows.iter_mut().zip(obs.iter()) {
                if row_obs.is_empty() {
                    // No observations: the regularized minimizer is zero.
                    row.iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                let mut m = SymMat::scaled_identity(d, opts.reg);
                let mut rhs = vec![0.0; d];
                for &(j, r) in row_obs {
                    let v = &other[j as usize];
                    m.rank_one_add(v, 1.0);
                    for (acc, vj) in rhs.iter_mut().zip(v.iter()) {
                        *acc += r * vj;
                    }
                }
                let chol = m.cholesky().ok_or_else(|| {
                    Error::Numeric("singular ALS system; increase reg".to_string())
                })?;
                *row = chol.solve(&rhs);
            }
            Ok(())
        };

    let objective = |users: &[Vec<f64>], items: &[Vec<f64>]| -> f64 {
        let fit: f64 = table
            .triples
            .iter()
            .map(|&(u, i, r)| {
                let e = r - dot(&users[u as usize], &items[i as usize]);
                e * e
            })
            .sum();
        let pen: f64 = users.iter().chain(items.iter()).map(|v| dot(v, v)).sum();
        fit + opts.reg * pen
    };

    let mut trace = Vec::with_capacity(opts.iterations);
    for sweep in 0..opts.iterations {
        solve_side(&mut users, &items, &by_user)?;
        solve_side(&mut items, &users, &by_item)?;
        let obj = objective(&users, &items);
        if !obj.is_finite() {
            return Err(Error::Numeric(format!(
                "ALS objective became non-finite at sweep {sweep}"
            )));
        }
        trace.push(obj);
    }

    // Optional bias augmentation, then uniform rescaling onto the bounds.
    if let Some(bias) = opts.bias {
        for u in &mut users {
            u.push(1.0);
        }
        for v in &mut items {
            v.push(bias);
        }
    }
    let d_out = d + usize::from(opts.bias.is_some());
    let max_user = users.iter().map(|u| norm2(u)).fold(0.0, f64::max);
    let max_item = items.iter().map(|v| norm2(v)).fold(0.0, f64::max);
    let user_scale = if max_user > opts.l_bound {
        opts.l_bound / max_user
    } else {
        1.0
    };
    let item_scale = if max_item > opts.s_bound {
        opts.s_bound / max_item
    } else {
        1.0
    };
    for u in &mut users {
        u.iter_mut().for_each(|v| *v *= user_scale);
    }
    for v in &mut items {
        v.iter_mut().for_each(|e| *e *= item_scale);
    }

    let target = opts.target_arm.unwrap_or(n_items - 1);
    if target >= n_items {
        return Err(Error::InvalidParams(format!(
            "target arm {target} out of range for {n_items} items"
        )));
    }
    let (min_mean, alpha) = validate_features(&users, &items, target)?;

    Ok(FeatureFile {
        d: d_out,
        users,
        items,
        meta: FeatureMeta {
            normalization: table.normalization,
            reg: opts.reg,
            iterations: opts.iterations,
            seed: opts.seed,
            user_scale,
            item_scale,
            bias: opts.bias,
            objective: trace,
            min_mean,
            alpha,
            target_arm: target,
        },
    })
}

/// Positivity and margin sweep over every (user, item) pair. The user pool
/// is the entire context domain, so the computed margin is exact.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN means count as violations
fn validate_features(users: &[Vec<f64>], items: &[Vec<f64>], target: usize) -> Result<(f64, f64)> {
    let mut min_mean = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    for (uidx, x) in users.iter().enumerate() {
        let mut row_min = f64::INFINITY;
        for (iidx, theta) in items.iter().enumerate() {
            let mean = dot(x, theta);
            if !(mean > 0.0) {
                return Err(Error::AssumptionViolated {
                    probe_index: uidx,
                    msg: format!("user {uidx} x item {iidx} has non-positive mean {mean}"),
                });
            }
            row_min = row_min.min(mean);
        }
        let target_mean = dot(x, &items[target]);
        let ratio = row_min / target_mean;
        if ratio >= 1.0 {
            return Err(Error::AssumptionViolated {
                probe_index: uidx,
                msg: format!("target item {target} is worst for user {uidx}"),
            });
        }
        min_mean = min_mean.min(row_min);
        max_ratio = max_ratio.max(ratio);
    }
    Ok((min_mean, (1.0 - max_ratio) / 2.0))
}

const FEATURE_MAGIC: &str = "banditlab-features";
const FEATURE_VERSION: u32 = 1;

/// Serialize a feature file to its textual container format.
///
/// Layout: a magic/version line, `key value` header lines, then the two
/// row-major matrices and a trailing `end` sentinel that makes truncation
/// detectable. Floats are written in shortest round-trip form, so a
/// load-after-export reproduces every matrix bit-for-bit.
pub fn feature_file_to_string(ff: &FeatureFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FEATURE_MAGIC} v{FEATURE_VERSION}");
    let _ = writeln!(out, "d {}", ff.d);
    let _ = writeln!(out, "n_users {}", ff.users.len());
    let _ = writeln!(out, "n_items {}", ff.items.len());
    let _ = writeln!(out, "target_arm {}", ff.meta.target_arm);
    let _ = writeln!(out, "reg {}", ff.meta.reg);
    let _ = writeln!(out, "iterations {}", ff.meta.iterations);
    let _ = writeln!(out, "seed {}", ff.meta.seed);
    match &ff.meta.normalization {
        Some(n) => {
            let _ = writeln!(
                out,
                "normalization {} {} {} {}",
                n.observed_min, n.observed_max, n.lo, n.hi
            );
        }
        None => {
            let _ = writeln!(out, "normalization none");
        }
    }
    let _ = writeln!(out, "user_scale {}", ff.meta.user_scale);
    let _ = writeln!(out, "item_scale {}", ff.meta.item_scale);
    match ff.meta.bias {
        Some(b) => {
            let _ = writeln!(out, "bias {b}");
        }
        None => {
            let _ = writeln!(out, "bias none");
        }
    }
    let _ = writeln!(out, "min_mean {}", ff.meta.min_mean);
    let _ = writeln!(out, "alpha {}", ff.meta.alpha);
    let joined = ff
        .meta
        .objective
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "objective {joined}");
    let _ = writeln!(out, "users");
    for row in &ff.users {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "items");
    for row in &ff.items {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{line}");
    }
    out.push_str("end\n");
    out
}

/// Parse the textual feature-file container.
pub fn feature_file_from_str(text: &str) -> Result<FeatureFile> {
    let corrupt = |msg: String| Error::Data { line: None, msg };
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| corrupt("empty feature file".into()))?;
    let expected = format!("{FEATURE_MAGIC} v{FEATURE_VERSION}");
    if magic != expected {
        return Err(corrupt(format!(
            "bad magic/version line {magic:?}, expected {expected:?}"
        )));
    }

    let mut next_kv = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| corrupt(format!("truncated feature file: missing {key}")))?;
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| corrupt(format!("malformed line {line:?}")))?;
        if k != key {
            return Err(corrupt(format!("expected key {key}, found {k}")));
        }
        Ok(v.to_string())
    };
    let parse_usize = |s: &str, what: &str| -> Result<usize> {
        s.parse().map_err(|_| corrupt(format!("bad {what}: {s:?}")))
    };
    let parse_f64 = |s: &str, what: &str| -> Result<f64> {
        s.parse().map_err(|_| corrupt(format!("bad {what}: {s:?}")))
    };

    let d = parse_usize(&next_kv("d")?, "d")?;
    let n_users = parse_usize(&next_kv("n_users")?, "n_users")?;
    let n_items = parse_usize(&next_kv("n_items")?, "n_items")?;
    let target_arm = parse_usize(&next_kv("target_arm")?, "target_arm")?;
    let reg = parse_f64(&next_kv("reg")?, "reg")?;
    let iterations = parse_usize(&next_kv("iterations")?, "iterations")?;
    let seed: u64 = next_kv("seed")?
        .parse()
        .map_err(|_| corrupt("bad seed".into()))?;
    let norm_raw = next_kv("normalization")?;
    let normalization = if norm_raw == "none" {
        None
    } else {
        let parts: Vec<&str> = norm_raw.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(corrupt(format!("bad normalization line {norm_raw:?}")));
        }
        Some(NormalizationMap {
            observed_min: parse_f64(parts[0], "normalization")?,
            observed_max: parse_f64(parts[1], "normalization")?,
            lo: parse_f64(parts[2], "normalization")?,
            hi: parse_f64(parts[3], "normalization")?,
        })
    };
    let user_scale = parse_f64(&next_kv("user_scale")?, "user_scale")?;
    let item_scale = parse_f64(&next_kv("item_scale")?, "item_scale")?;
    let bias_raw = next_kv("bias")?;
    let bias = if bias_raw == "none" {
        None
    } else {
        Some(parse_f64(&bias_raw, "bias")?)
    };
    let min_mean = parse_f64(&next_kv("min_mean")?, "min_mean")?;
    let alpha = parse_f64(&next_kv("alpha")?, "alpha")?;
    let objective_raw = next_kv("objective")?;
    let objective = objective_raw
        .split_whitespace()
        .map(|s| parse_f64(s, "objective"))
        .collect::<Result<Vec<f64>>>()?;

    let mut read_matrix = |label: &str, rows: usize| -> Result<Vec<Vec<f64>>> {
        let head = lines
            .next()
            .ok_or_else(|| corrupt(format!("truncated feature file: missing {label}")))?;
        if head != label {
            return Err(corrupt(format!("expected section {label}, found {head:?}")));
        }
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| corrupt(format!("truncated feature file in {label} row {r}")))?;
            let row = line
                .split_whitespace()
                .map(|s| parse_f64(s, label))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != d {
                return Err(corrupt(format!(
                    "{label} row {r} has {} entries, expected {d}",
                    row.len()
                )));
            }
            out.push(row);
        }
        Ok(out)
    };
    let users = read_matrix("users", n_users)?;
    let items = read_matrix("items", n_items)?;
    match lines.next() {
        Some("end") => {}
        _ => {
            return Err(corrupt(
                "truncated feature file: missing end sentinel".into(),
            ))
        }
    }
    if target_arm >= n_items {
        return Err(corrupt(format!(
            "target arm {target_arm} out of range for {n_items} items"
        )));
    }
    Ok(FeatureFile {
        d,
        users,
        items,
        meta: FeatureMeta {
            normalization,
            reg,
            iterations,
            seed,
            user_scale,
            item_scale,
            bias,
            objective,
            min_mean,
            alpha,
            target_arm,
        },
    })
}

/// Write a feature file (atomically: temp file then rename).
pub fn export_features(ff: &FeatureFile, path: &Path) -> Result<()> {
    crate::output::atomic_write(path, feature_file_to_string(ff).as_bytes())
}

/// Load a feature file from disk.
pub fn load_features(path: &Path) -> Result<FeatureFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
        line: None,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    feature_file_from_str(&text)
}
