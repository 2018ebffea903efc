//! Analysis tables computed from a directory of traces.
//!
//! Every table starts with the line `# asyncbo-analysis v1` followed by a
//! CSV header. Keys shared by all tables: `objective`, `workers`, `mode`
//! (`async` or `sequential`) and `rule`.
//!
//! * `regret_curves.csv`: `time, median, q1, q3, seeds`; natural-log simple
//!   regret on a 200-point grid over `[0, T]`.
//! * `distance_series.csv`: `seed, query, sim_time, delta`; one row per
//!   proposal with a defined distance.
//! * `lengthscale_series.csv`: `seed, query, sim_time, mean_lengthscale,
//!   delta_lengthscale`.
//! * `win_rate.csv` and `mwu.csv`: one row per rule with one column per
//!   opponent rule. Entries compare log-regret at the evaluation time, paired
//!   by seed; empty cells mean no common seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use asyncbo::acquisition::Rule;
use asyncbo::metrics::{
    aggregate, distance_series, lengthscale_stats, log_regret, mann_whitney_u, step_value, time_grid, win_rate,
    GRID_POINTS,
};
use asyncbo::simulator::{Mode, RunTrace};
use asyncbo::trace_io::{load_trace, meta_path};

pub const TABLE_FORMAT_LINE: &str = "# asyncbo-analysis v1";
pub const TABLES: [&str; 5] =
    ["regret_curves.csv", "distance_series.csv", "lengthscale_series.csv", "win_rate.csv", "mwu.csv"];

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Restrict to these rules; rules without traces are skipped with a warning.
    pub rules: Option<Vec<Rule>>,
    /// Compare regret at this simulated time instead of the end of each run.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey<'a> {
    objective: &'a str,
    workers: usize,
    mode: u8,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Async => "async",
        Mode::Sequential => "sequential",
    }
}

fn mode_order(mode: Mode) -> u8 {
    match mode {
        Mode::Async => 0,
        Mode::Sequential => 1,
    }
}

/// All traces below `dir` (files with a `.meta.json` sidecar), sorted by
/// file name.
pub fn load_traces(dir: &Path) -> Result<Vec<(PathBuf, RunTrace)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv") && meta_path(p).exists())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let t = load_trace(&p).with_context(|| format!("loading {}", p.display()))?;
            Ok((p, t))
        })
        .collect()
}

/// Seed-ordered traces per rule, per (objective, workers, mode).
type Groups<'a> = BTreeMap<GroupKey<'a>, BTreeMap<Rule, Vec<&'a RunTrace>>>;

fn group<'a>(traces: &'a [(PathBuf, RunTrace)], opts: &AnalyzeOptions) -> Groups<'a> {
    let mut groups: Groups = BTreeMap::new();
    for (_, t) in traces {
        let c = &t.meta.config;
        if opts.rules.as_ref().is_some_and(|r| !r.contains(&c.rule)) {
            continue;
        }
        let key = GroupKey { objective: &c.objective, workers: c.workers, mode: mode_order(t.meta.mode) };
        groups.entry(key).or_default().entry(c.rule).or_default().push(t);
    }
    for rules in groups.values_mut() {
        for runs in rules.values_mut() {
            runs.sort_by_key(|t| t.meta.config.seed);
        }
        if let Some(wanted) = &opts.rules {
            for r in wanted.iter().filter(|r| !rules.contains_key(r)) {
                log::warn!("no traces for rule {r}; skipping its comparisons");
            }
        }
    }
    groups
}

fn key_fields(key: &GroupKey, rule: Rule) -> Vec<String> {
    let mode = if key.mode == 0 { Mode::Async } else { Mode::Sequential };
    vec![key.objective.to_string(), key.workers.to_string(), mode_name(mode).to_string(), rule.to_string()]
}

fn regret_series(t: &RunTrace) -> (Vec<f64>, Vec<f64>) {
    (t.records.iter().map(|r| r.sim_time).collect(), log_regret(t))
}

fn horizon(runs: &[&RunTrace]) -> f64 {
    runs.iter()
        .map(|t| t.meta.config.budget_time.unwrap_or_else(|| t.records.last().map_or(0.0, |r| r.sim_time)))
        .fold(0.0, f64::max)
}

fn regret_at(t: &RunTrace, at: Option<f64>) -> f64 {
    let (times, values) = regret_series(t);
    match at {
        Some(at) => step_value(&times, &values, at),
        None => *values.last().expect("trace has records"),
    }
}

struct Table {
    rows: Vec<Vec<String>>,
    header: Vec<String>,
}

impl Table {
    /// Key columns followed by `extra`.
    fn keyed(extra: &[&str]) -> Self {
        let header = KEY.iter().chain(extra).map(|s| s.to_string()).collect();
        Self { rows: Vec::new(), header }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner()?)?;
        fs::write(path, format!("{TABLE_FORMAT_LINE}\n{body}"))?;
        Ok(())
    }
}

const KEY: [&str; 4] = ["objective", "workers", "mode", "rule"];

/// Computes every table from the traces in `dir` and writes them to `out`.
/// Returns the paths written.
pub fn analyze(dir: &Path, out: &Path, opts: &AnalyzeOptions) -> Result<Vec<PathBuf>> {
    let traces = load_traces(dir)?;
    if traces.is_empty() {
        log::warn!("no traces found in {}", dir.display());
    }
    let groups = group(&traces, opts);
    fs::create_dir_all(out)?;

    let mut regret = Table::keyed(&["time", "median", "q1", "q3", "seeds"]);
    let mut distance = Table::keyed(&["seed", "query", "sim_time", "delta"]);
    let mut lengthscale =
        Table::keyed(&["seed", "query", "sim_time", "mean_lengthscale", "delta_lengthscale"]);
    let all_rules: Vec<Rule> = {
        let mut v: Vec<Rule> = groups.values().flat_map(|g| g.keys().copied()).collect();
        v.sort();
        v.dedup();
        v
    };
    let names: Vec<&str> = all_rules.iter().map(|r| r.name()).collect();
    let mut wins = Table::keyed(&names);
    let mut mwu = Table::keyed(&names);

    for (key, rules) in &groups {
        let t_max = horizon(&rules.values().flatten().copied().collect::<Vec<_>>());
        let grid = time_grid(t_max, GRID_POINTS);
        for (&rule, runs) in rules {
            let curves: Vec<_> = runs.iter().map(|t| regret_series(t)).collect();
            let agg = aggregate(&curves, &grid)?;
            for (g, t) in grid.iter().enumerate() {
                let mut row = key_fields(key, rule);
                row.extend([t, &agg.median[g], &agg.q1[g], &agg.q3[g]].map(|v| v.to_string()));
                row.push(runs.len().to_string());
                regret.rows.push(row);
            }
            for t in runs {
                let seed = t.meta.config.seed.to_string();
                let completions = t.completions();
                for (i, delta) in distance_series(t) {
                    let mut row = key_fields(key, rule);
                    row.extend([seed.clone(), i.to_string(), completions[i].sim_time.to_string(), delta.to_string()]);
                    distance.rows.push(row);
                }
                for (i, (mean, change)) in lengthscale_stats(t).into_iter().enumerate() {
                    let mut row = key_fields(key, rule);
                    row.extend([
                        seed.clone(),
                        i.to_string(),
                        completions[i].sim_time.to_string(),
                        mean.to_string(),
                        change.to_string(),
                    ]);
                    lengthscale.rows.push(row);
                }
            }
        }
        for (&row_rule, row_runs) in rules {
            let mut w_row = key_fields(key, row_rule);
            let mut p_row = w_row.clone();
            for col_rule in &all_rules {
                let (w, p) = match rules.get(col_rule) {
                    Some(col_runs) => compare(row_runs, col_runs, opts.at)?,
                    None => (None, None),
                };
                w_row.push(w.map(|v| v.to_string()).unwrap_or_default());
                p_row.push(p.map(|v| v.to_string()).unwrap_or_default());
            }
            wins.rows.push(w_row);
            mwu.rows.push(p_row);
        }
    }

    let mut written = Vec::new();
    for (name, table) in TABLES.iter().zip([&regret, &distance, &lengthscale, &wins, &mwu]) {
        let path = out.join(name);
        table.write(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Win-rate and Mann-Whitney p-value of `a` against `b` on the seeds both
/// have.
fn compare(a: &[&RunTrace], b: &[&RunTrace], at: Option<f64>) -> Result<(Option<f64>, Option<f64>)> {
    let by_seed: BTreeMap<u64, &RunTrace> = b.iter().map(|t| (t.meta.config.seed, *t)).collect();
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for t in a {
        if let Some(other) = by_seed.get(&t.meta.config.seed) {
            xa.push(regret_at(t, at));
            xb.push(regret_at(other, at));
        }
    }
    if xa.is_empty() {
        return Ok((None, None));
    }
    Ok((Some(win_rate(&xa, &xb)?), Some(mann_whitney_u(&xa, &xb)?.p)))
}
