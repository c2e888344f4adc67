//! Experiment runner: independent certification trials over a fixed pool,
//! collected in trial order, then written as CSV, per-trial JSON and an
//! aggregate report.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use statgap_core::bounds::certify_sample;
use statgap_core::format::read_expected;
use statgap_core::randgraph::sample;
use statgap_core::{ConcentrationCertificate, ExpectedAdjacency, Verdict};

use crate::config::{ExperimentConfig, Source};
use crate::error::{error_code, CliError};

pub const CSV_SCHEMA: &str = "statgap-trials/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialError {
    pub code: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    /// Position in the whole experiment; groups are laid out one after another.
    pub index: usize,
    pub group: usize,
    pub trial: usize,
    pub n: usize,
    pub seed: u64,
    pub certificate: Option<ConcentrationCertificate>,
    pub error: Option<TrialError>,
    pub wall_ms: f64,
}

impl TrialRow {
    pub fn succeeded(&self) -> bool {
        self.certificate.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

impl Quantiles {
    /// Linear-interpolation quantiles of `values`.
    pub fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let q = |t: f64| -> Option<f64> {
            if values.is_empty() {
                return None;
            }
            let pos = t * (values.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
        };
        Self {
            count: values.len(),
            min: q(0.0),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: q(1.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerdictCounts {
    pub certified: usize,
    pub vacuous: usize,
    pub violated: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: usize,
    pub n: usize,
    pub trials: usize,
    pub succeeded: usize,
    pub verdicts: VerdictCounts,
    pub lhs: Quantiles,
    pub rhs: Quantiles,
    pub lhs_over_rhs: Quantiles,
    pub sigma2: Quantiles,
    pub degree_events_rate: Option<f64>,
    pub lemma_dd_rate: Option<f64>,
    pub lemma_a_rate: Option<f64>,
    pub lemma_amb_rate: Option<f64>,
}

fn rate(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + usize::from(f), t + 1));
    (total > 0).then(|| hits as f64 / total as f64)
}

impl GroupSummary {
    pub fn from_rows(group: usize, rows: &[&TrialRow]) -> Self {
        let certs: Vec<&ConcentrationCertificate> = rows.iter().filter_map(|r| r.certificate.as_ref()).collect();
        let mut verdicts = VerdictCounts {
            errors: rows.len() - certs.len(),
            ..Default::default()
        };
        for c in &certs {
            match c.verdict {
                Verdict::Certified => verdicts.certified += 1,
                Verdict::BoundHoldsVacuousProbability => verdicts.vacuous += 1,
                Verdict::Violated => verdicts.violated += 1,
            }
        }
        let pick = |f: fn(&ConcentrationCertificate) -> Option<f64>| Quantiles::of(certs.iter().filter_map(|c| f(c)).collect());
        Self {
            group,
            n: rows.first().map_or(0, |r| r.n),
            trials: rows.len(),
            succeeded: certs.len(),
            verdicts,
            lhs: pick(|c| c.lhs),
            rhs: pick(|c| c.rhs),
            lhs_over_rhs: pick(|c| Some(c.lhs? / c.rhs?)),
            sigma2: pick(|c| c.sigma2),
            degree_events_rate: rate(certs.iter().map(|c| c.degree_events_held)),
            lemma_dd_rate: rate(certs.iter().filter_map(|c| c.lemma_dd_held)),
            lemma_a_rate: rate(certs.iter().filter_map(|c| c.lemma_a_held)),
            lemma_amb_rate: rate(certs.iter().map(|c| c.lemma_amb_held)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub trials_per_group: usize,
    pub base_seed: u64,
    pub groups: Vec<GroupSummary>,
    pub rows: Vec<TrialRow>,
    pub wall_ms: f64,
}

impl ExperimentReport {
    /// Recomputes the group summaries from `rows`.
    pub fn aggregate(rows: &[TrialRow]) -> Vec<GroupSummary> {
        let groups = rows.iter().map(|r| r.group + 1).max().unwrap_or(0);
        (0..groups)
            .map(|g| {
                let members: Vec<&TrialRow> = rows.iter().filter(|r| r.group == g).collect();
                GroupSummary::from_rows(g, &members)
            })
            .collect()
    }

    pub fn any_succeeded(&self) -> bool {
        self.rows.iter().any(TrialRow::succeeded)
    }

    /// Fixed-width table of the group summaries; no timings, so it is
    /// deterministic for a fixed config.
    pub fn table(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let pct = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{:.3}", v));
        let mut out = format!("experiment {} ({} trials per size, base seed {})\n", self.name, self.trials_per_group, self.base_seed);
        out.push_str(&format!(
            "{:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>14} {:>14} {:>14} {:>14} {:>7} {:>7} {:>7} {:>7}\n",
            "n", "ok", "cert", "vac", "viol", "err", "lhs_median", "rhs_median", "ratio_max", "sigma2_min", "events", "dd", "a", "amb"
        ));
        for g in &self.groups {
            out.push_str(&format!(
                "{:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>14} {:>14} {:>14} {:>14} {:>7} {:>7} {:>7} {:>7}\n",
                g.n,
                g.succeeded,
                g.verdicts.certified,
                g.verdicts.vacuous,
                g.verdicts.violated,
                g.verdicts.errors,
                fmt(g.lhs.median),
                fmt(g.rhs.median),
                fmt(g.lhs_over_rhs.max),
                fmt(g.sigma2.min),
                pct(g.degree_events_rate),
                pct(g.lemma_dd_rate),
                pct(g.lemma_a_rate),
                pct(g.lemma_amb_rate),
            ));
        }
        out
    }
}

struct Task<'a> {
    index: usize,
    group: usize,
    trial: usize,
    seed: u64,
    expected: &'a Result<ExpectedAdjacency, TrialError>,
}

fn trial_error(e: &statgap_core::Error) -> TrialError {
    TrialError {
        code: error_code(e),
        message: e.to_string(),
    }
}

fn run_task(task: &Task<'_>) -> TrialRow {
    let start = Instant::now();
    let (n, outcome) = match task.expected {
        Ok(expected) => (
            expected.n(),
            sample(expected, task.seed)
                .and_then(|g| certify_sample(expected, &g))
                .map_err(|e| trial_error(&e)),
        ),
        Err(e) => (0, Err(e.clone())),
    };
    let (certificate, error) = match outcome {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e)),
    };
    TrialRow {
        index: task.index,
        group: task.group,
        trial: task.trial,
        n,
        seed: task.seed,
        certificate,
        error,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn load(source: &Source) -> Result<ExpectedAdjacency, TrialError> {
    match source {
        Source::Family(spec) => spec.expected(),
        Source::File(path) => read_expected(path),
    }
    .map_err(|e| trial_error(&e))
}

/// Runs every trial on a pool of `workers` threads. Results do not depend
/// on `workers`: each trial is a pure function of its seed.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentReport, CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let loaded: Vec<Result<ExpectedAdjacency, TrialError>> = pool.install(|| config.sources.par_iter().map(load).collect());
    let tasks: Vec<Task<'_>> = loaded
        .iter()
        .enumerate()
        .flat_map(|(group, expected)| {
            (0..config.trials).map(move |trial| (group, trial, expected))
        })
        .enumerate()
        .map(|(index, (group, trial, expected))| Task {
            index,
            group,
            trial,
            seed: config.trial_seed(trial),
            expected,
        })
        .collect();
    // collect() on an indexed parallel iterator keeps trial order
    let rows: Vec<TrialRow> = pool.install(|| tasks.par_iter().map(run_task).collect());
    Ok(ExperimentReport {
        name: config.name.clone(),
        trials_per_group: config.trials,
        base_seed: config.base_seed,
        groups: ExperimentReport::aggregate(&rows),
        rows,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub const CSV_COLUMNS: &[&str] = &[
    "index",
    "group",
    "trial",
    "n",
    "seed",
    "status",
    "error_code",
    "verdict",
    "lhs",
    "rhs",
    "sigma2",
    "sigma2_expected",
    "inflation_factor",
    "degree_bracket",
    "spread_factor",
    "phi_bar_max",
    "phi_bar_min",
    "d_bar_min",
    "d_min_sampled",
    "degree_events_held",
    "degree_event_violations",
    "lemma_dd_held",
    "lemma_a_held",
    "lemma_amb_held",
    "prob_bound",
    "prob_bound_unclamped",
    "vacuous",
    "diagnostic",
    "wall_ms",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn csv_record(row: &TrialRow) -> Vec<String> {
    let mut rec = vec![
        row.index.to_string(),
        row.group.to_string(),
        row.trial.to_string(),
        row.n.to_string(),
        row.seed.to_string(),
    ];
    match (&row.certificate, &row.error) {
        (Some(c), _) => rec.extend([
            "ok".to_string(),
            String::new(),
            c.verdict.as_str().to_string(),
            opt(c.lhs),
            opt(c.rhs),
            opt(c.sigma2),
            c.sigma2_expected.to_string(),
            c.inflation_factor.to_string(),
            c.degree_bracket.to_string(),
            c.spread_factor.to_string(),
            c.phi_bar_max.to_string(),
            c.phi_bar_min.to_string(),
            c.d_bar_min.to_string(),
            c.d_min_sampled.to_string(),
            c.degree_events_held.to_string(),
            c.degree_event_violations.to_string(),
            opt(c.lemma_dd_held),
            opt(c.lemma_a_held),
            c.lemma_amb_held.to_string(),
            c.prob_bound.to_string(),
            c.prob_bound_unclamped.to_string(),
            c.vacuous.to_string(),
            opt(c.diagnostic.clone()),
        ]),
        (None, e) => {
            let e = e.as_ref().expect("row without certificate carries an error");
            rec.extend(["error".to_string(), e.code.to_string()]);
            rec.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 8));
            let last = rec.len() - 1;
            rec[last] = e.message.clone();
        }
    }
    rec.push(format!("{:.3}", row.wall_ms));
    debug_assert_eq!(rec.len(), CSV_COLUMNS.len());
    rec
}

/// CSV with a `# schema:` preamble; `wall_ms` is the only
/// nondeterministic column and is always last.
pub fn write_csv(report: &ExperimentReport, out: impl Write) -> std::io::Result<()> {
    let mut out = out;
    writeln!(out, "# schema: {CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in &report.rows {
        w.write_record(csv_record(row))?;
    }
    w.flush()
}

pub fn csv_string(report: &ExperimentReport) -> String {
    let mut buf = Vec::new();
    write_csv(report, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn trial_json(row: &TrialRow) -> serde_json::Value {
    match &row.certificate {
        Some(c) => serde_json::to_value(c).expect("certificate serializes"),
        None => serde_json::json!({
            "n": row.n,
            "seed": row.seed,
            "error_code": row.error.as_ref().map(|e| e.code),
            "error": row.error.as_ref().map(|e| &e.message),
        }),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes every output named in the config, in trial order.
pub fn persist(config: &ExperimentConfig, report: &ExperimentReport) -> Result<(), CliError> {
    if let Some(path) = &config.csv {
        write_file(path, csv_string(report).as_bytes())?;
    }
    if let Some(dir) = &config.json_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for row in &report.rows {
            let path = dir.join(format!("{}-g{}-trial{:04}.json", config.name, row.group, row.trial));
            let mut text = serde_json::to_string_pretty(&trial_json(row)).expect("json");
            text.push('\n');
            write_file(&path, text.as_bytes())?;
        }
    }
    if let Some(path) = &config.report {
        let mut text = serde_json::to_string_pretty(&report_json(report)).expect("json");
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

/// Report without per-row timings.
pub fn report_json(report: &ExperimentReport) -> serde_json::Value {
    serde_json::json!({
        "name": report.name,
        "trials_per_group": report.trials_per_group,
        "base_seed": report.base_seed,
        "groups": report.groups,
    })
}
