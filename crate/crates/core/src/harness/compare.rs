use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

const REQUIRED_KEYS: [&str; 5] = ["step0", "step1", "n_tasks", "n_rollouts", "seed"];

/// One evaluated run: its seed and every numeric field of its `eval.json`.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub path: PathBuf,
    pub seed: u64,
    pub fields: serde_json::Map<String, Value>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)?;
        let Value::Object(fields) = value else {
            return Err(Error::Schema(format!(
                "{} is not a JSON object",
                path.display()
            )));
        };
        for key in REQUIRED_KEYS {
            if !fields.get(key).is_some_and(Value::is_number) {
                return Err(Error::Schema(format!(
                    "{} lacks numeric `{key}`",
                    path.display()
                )));
            }
        }
        let seed = fields["seed"]
            .as_u64()
            .ok_or_else(|| Error::Schema(format!("{}: seed is not an integer", path.display())))?;
        Ok(RunRecord {
            path: path.to_path_buf(),
            seed,
            fields,
        })
    }

    fn metric(&self, metric: &str) -> Result<f64> {
        if metric == "gap" {
            return Ok(self.metric("step1")? - self.metric("step0")?);
        }
        self.fields
            .get(metric)
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "{} has no numeric metric `{metric}`",
                    self.path.display()
                ))
            })
    }

    fn protocol(&self) -> (u64, u64) {
        (
            self.fields["n_tasks"].as_u64().unwrap_or(0),
            self.fields["n_rollouts"].as_u64().unwrap_or(0),
        )
    }
}

/// Loads the runs below `dir`: either `dir/eval.json` itself, or one
/// `eval.json` per immediate subdirectory (one per seed).
pub fn load_group(dir: &Path) -> Result<Vec<RunRecord>> {
    let direct = dir.join("eval.json");
    if direct.is_file() {
        return Ok(vec![RunRecord::load(&direct)?]);
    }
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("eval.json"))
        .filter(|p| p.is_file())
        .collect();
    if paths.is_empty() {
        return Err(Error::Schema(format!(
            "no eval.json in {} or its subdirectories",
            dir.display()
        )));
    }
    paths.sort();
    paths.iter().map(|p| RunRecord::load(p)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub dir: PathBuf,
    pub seeds: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Paired sign test between two groups over their shared seeds.
#[derive(Debug, Clone, Serialize)]
pub struct PairTest {
    pub a: usize,
    pub b: usize,
    pub pairs: usize,
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
    pub mean_difference: f64,
    /// Two-sided exact sign-test p-value (ties dropped).
    pub p_two_sided: f64,
    /// One-sided p-value for "a beats b".
    pub p_a_better: f64,
    pub p_b_better: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub metric: String,
    pub groups: Vec<GroupStats>,
    pub pairs: Vec<PairTest>,
    /// Index of the group with the highest mean; `None` on an exact tie.
    pub winner: Option<usize>,
}

/// `P(X ≥ k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mut coef = 1.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i >= k {
            total += coef;
        }
        coef = coef * (n - i) as f64 / (i + 1) as f64;
    }
    total / 2f64.powi(n as i32)
}

fn sign_test(a_wins: usize, b_wins: usize) -> (f64, f64, f64) {
    let n = a_wins + b_wins;
    let p_a = binomial_upper_tail(a_wins, n);
    let p_b = binomial_upper_tail(b_wins, n);
    ((2.0 * p_a.min(p_b)).min(1.0), p_a, p_b)
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Compares run groups on one metric of `eval.json` (`step0`, `step1`,
/// `gap`, or any other numeric key).
pub fn compare_runs(dirs: &[PathBuf], metric: &str) -> Result<ComparisonReport> {
    if dirs.len() < 2 {
        return Err(Error::InvalidArgument(
            "compare needs at least two run directories".into(),
        ));
    }
    let groups: Vec<Vec<RunRecord>> = dirs.iter().map(|d| load_group(d)).collect::<Result<_>>()?;
    let protocol = groups[0][0].protocol();
    for run in groups.iter().flatten() {
        if run.protocol() != protocol {
            return Err(Error::Schema(format!(
                "{} was evaluated with {:?} (tasks, rollouts), expected {:?}",
                run.path.display(),
                run.protocol(),
                protocol
            )));
        }
    }

    let mut stats = Vec::new();
    for (dir, runs) in dirs.iter().zip(&groups) {
        let values: Vec<f64> = runs
            .iter()
            .map(|r| r.metric(metric))
            .collect::<Result<_>>()?;
        let (mean, stderr) = mean_and_stderr(&values);
        stats.push(GroupStats {
            dir: dir.clone(),
            seeds: values.len(),
            mean,
            stderr,
        });
    }

    let mut pairs = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let mut diffs = Vec::new();
            for ra in &groups[a] {
                if let Some(rb) = groups[b].iter().find(|r| r.seed == ra.seed) {
                    diffs.push(ra.metric(metric)? - rb.metric(metric)?);
                }
            }
            if diffs.is_empty() {
                return Err(Error::Schema(format!(
                    "{} and {} share no seeds",
                    dirs[a].display(),
                    dirs[b].display()
                )));
            }
            let a_wins = diffs.iter().filter(|d| **d > 0.0).count();
            let b_wins = diffs.iter().filter(|d| **d < 0.0).count();
            let (p_two_sided, p_a_better, p_b_better) = sign_test(a_wins, b_wins);
            pairs.push(PairTest {
                a,
                b,
                pairs: diffs.len(),
                a_wins,
                b_wins,
                ties: diffs.len() - a_wins - b_wins,
                mean_difference: diffs.iter().sum::<f64>() / diffs.len() as f64,
                p_two_sided,
                p_a_better,
                p_b_better,
            });
        }
    }

    let best = stats
        .iter()
        .map(|s| s.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<usize> = (0..stats.len())
        .filter(|&i| stats[i].mean == best)
        .collect();
    let winner = (leaders.len() == 1).then(|| leaders[0]);
    Ok(ComparisonReport {
        metric: metric.to_string(),
        groups: stats,
        pairs,
        winner,
    })
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric: {}", self.metric)?;
        for (i, g) in self.groups.iter().enumerate() {
            writeln!(
                f,
                "[{i}] {}: {:.4} ± {:.4} over {} seed(s)",
                g.dir.display(),
                g.mean,
                g.stderr,
                g.seeds
            )?;
        }
        for p in &self.pairs {
            writeln!(
                f,
                "[{}] vs [{}]: {} pairs, wins {}-{} (ties {}), mean diff {:.4}, sign test p = {:.4} (two-sided), {:.4} ([{}] better), {:.4} ([{}] better)",
                p.a, p.b, p.pairs, p.a_wins, p.b_wins, p.ties, p.mean_difference,
                p.p_two_sided, p.p_a_better, p.a, p.p_b_better, p.b
            )?;
        }
        match self.winner {
            Some(i) => writeln!(f, "winner: [{i}] {}", self.groups[i].dir.display()),
            None => writeln!(f, "winner: tie"),
        }
    }
}
