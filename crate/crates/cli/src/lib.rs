//! Command-line front end for `statgap-core`: file-based sampling, solvers,
//! certificates, the example families and a parallel experiment runner.
//!
//! Exit status: 0 success, 1 bound violated, 2 invalid input, 3 I/O failure.

pub mod config;
pub mod error;
pub mod runner;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use statgap_core::bounds::{certify, certify_sample};
use statgap_core::chain::{
    expected_transition, stationarity_residual, stationary_direct, stationary_power, transition, DEFAULT_POWER_TOL,
};
use statgap_core::format::{
    digraph_to_string, expected_to_string, parse_digraph, read_document, read_expected, transition_to_string,
    Document, Layout,
};
use statgap_core::randgraph::{degree_events, degree_stats, sample};
use statgap_core::spectral::{singular_gap, singular_gap_with, GapMethod};
use statgap_core::zoo::{
    alpha_grid, conjecture_search, log_spaced, pagerank_from_digraph, pagerank_matrix, DriftVariant, FamilySpec,
};
use statgap_core::{Distribution, TransitionMatrix, Verdict};

pub use config::ExperimentConfig;
pub use error::{exit, CliError};
pub use runner::{run_experiment, ExperimentReport};

#[derive(Debug, Parser)]
#[command(name = "statgap", version, about = "Stationary distributions of random digraphs and their concentration certificates")]
pub struct Cli {
    /// Seed for sampling (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance for iterative solvers.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "STATGAP_WORKERS")]
    pub workers: Option<usize>,
    /// Output format for standard output.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveMethod {
    Direct,
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GapChoice {
    Auto,
    Full,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ZooFamily {
    Gamblers,
    Tourists,
    Gnp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    DecreaseHeavy,
    IncreaseHeavy,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<DriftVariant> {
        match self {
            VariantArg::DecreaseHeavy => vec![DriftVariant::DecreaseHeavy],
            VariantArg::IncreaseHeavy => vec![DriftVariant::IncreaseHeavy],
            VariantArg::Both => vec![DriftVariant::DecreaseHeavy, DriftVariant::IncreaseHeavy],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a digraph from an expected-adjacency file.
    Sample {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Stationary distribution of a transition, digraph or expected-adjacency file.
    Stationary {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        method: SolveMethod,
    },
    /// Singular gap σ₂(I − P).
    Gap {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: GapChoice,
    },
    /// Sample (or read) a digraph and certify its stationary distribution.
    Certify {
        input: PathBuf,
        /// Certify this digraph instead of sampling one.
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Write the certificate JSON here.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// PageRank coupling R = α/(n−1)(J − I) + (1 − α)P.
    Pagerank {
        input: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Write R as a transition file.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Generate a member of an example family.
    Zoo {
        #[arg(value_enum)]
        family: ZooFamily,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum, default_value = "decrease-heavy")]
        variant: VariantArg,
        #[arg(long, default_value_t = statgap_core::zoo::DEFAULT_SHORTCUT_PROBABILITY)]
        shortcut_prob: f64,
        /// Write the expected adjacency here instead of standard output.
        #[arg(long)]
        expected_out: Option<PathBuf>,
        /// Also write the sample at --seed.
        #[arg(long)]
        sample_out: Option<PathBuf>,
    },
    /// Largest α/σ₂(I − R) over a grid of family members and damping values.
    Conjecture {
        #[arg(long, value_enum, default_value = "gamblers")]
        family: ZooFamily,
        #[arg(long, value_enum, default_value = "both")]
        variant: VariantArg,
        /// Explicit sizes; otherwise log-spaced from --n-min to --n-max.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        n_min: usize,
        #[arg(long, default_value_t = 200)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        n_count: usize,
        /// Explicit α values; otherwise multiples of --alpha-step.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha_step: f64,
        /// Shortcut probabilities (Gambler's Ruin).
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        shortcuts: Vec<f64>,
        /// Arc probability (G(n, p)) or β (Tourist's Ruin).
        #[arg(long)]
        param: Option<f64>,
    },
    /// Run an experiment config.
    Experiment { config: PathBuf },
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(out: &mut dyn Write, format: Format, value: &Value) -> Result<(), CliError> {
    let text = match format {
        Format::Json => serde_json::to_string_pretty(value).expect("json") + "\n",
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", value, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).expect("memory");
            for (k, v) in rows {
                w.write_record([k, v]).expect("memory");
            }
            String::from_utf8(w.into_inner().expect("memory")).expect("utf-8")
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("standard output: {e}")))
}

/// `a.b[2]`-style keys for every scalar in `value`.
fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, rows);
            }
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// Transition matrix from any chain-bearing document: `tm` as is, `dg` as
/// the walk on the digraph, `ea` as the expected chain.
fn load_chain(path: &Path) -> Result<TransitionMatrix, CliError> {
    match read_document(path)? {
        Document::Transition(p) => Ok(p),
        Document::Digraph(g) => Ok(transition(&g)?),
        Document::Expected(a) => Ok(expected_transition(&a)?),
        Document::Distribution(_) => Err(CliError::input(format!(
            "{}: expected a transition, digraph or expected-adjacency file",
            path.display()
        ))),
    }
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}

fn distribution_json(d: &Distribution) -> Value {
    json!(d.values())
}

/// Runs one parsed command, writing its report to `out`. Returns the exit status.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let seed = cli.seed.unwrap_or(0);
    let format = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Sample { input, output } => {
            let a = read_expected(input)?;
            let g = sample(&a, seed)?;
            write_output(output, &digraph_to_string(&g))?;
            let s = degree_stats(&g);
            let ev = degree_events(&a, &g)?;
            emit(
                out,
                format,
                &json!({
                    "n": g.n(),
                    "seed": seed,
                    "arcs": g.arc_count(),
                    "out_degree_min": s.d_min_out,
                    "out_degree_max": s.d_max_out,
                    "in_degree_min": s.d_min_in,
                    "in_degree_max": s.d_max_in,
                    "expected_degree_min": degree_stats(&a).d_min,
                    "sinks": g.sinks(),
                    "degree_events_held": ev.all_held,
                    "degree_event_violations": ev.violations(),
                }),
            )?;
            Ok(exit::SUCCESS)
        }
        Command::Stationary { input, method } => {
            let p = load_chain(input)?;
            let report = match method {
                SolveMethod::Direct => {
                    let phi = stationary_direct(&p)?;
                    json!({
                        "n": p.n(),
                        "method": "direct",
                        "residual": stationarity_residual(&p, &phi.to_vector()),
                        "distribution": distribution_json(&phi),
                    })
                }
                SolveMethod::Power => {
                    let gap = singular_gap(&p)?.sigma2;
                    let tol = cli.tol.unwrap_or(DEFAULT_POWER_TOL);
                    let r = stationary_power(&p, &Distribution::uniform(p.n()), tol, gap)?;
                    json!({
                        "n": p.n(),
                        "method": "power",
                        "tol": tol,
                        "sigma2": gap,
                        "iterations": r.iterations,
                        "certified_error": r.certified_error,
                        "residual": stationarity_residual(&p, &r.distribution.to_vector()),
                        "distribution": distribution_json(&r.distribution),
                    })
                }
            };
            emit(out, format, &report)?;
            Ok(exit::SUCCESS)
        }
        Command::Gap { input, method } => {
            let p = load_chain(input)?;
            let s = match method {
                GapChoice::Auto => singular_gap(&p)?,
                GapChoice::Full => singular_gap_with(&p, GapMethod::FullDecomposition)?,
                GapChoice::Iterative => singular_gap_with(&p, GapMethod::Iterative)?,
            };
            emit(
                out,
                format,
                &json!({ "n": p.n(), "sigma2": s.sigma2, "method": s.method, "residual": s.residual }),
            )?;
            Ok(exit::SUCCESS)
        }
        Command::Certify { input, sample: given, output } => {
            let a = read_expected(input)?;
            let cert = match given {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    certify_sample(&a, &parse_digraph(&text)?)?
                }
                None => certify(&a, seed)?,
            };
            let value = serde_json::to_value(&cert).expect("json");
            if let Some(path) = output {
                write_output(path, &(serde_json::to_string_pretty(&value).expect("json") + "\n"))?;
            }
            emit(out, format, &value)?;
            if cert.verdict == Verdict::Violated {
                eprintln!("bound violated: {}", cert.diagnostic.as_deref().unwrap_or("lhs exceeds rhs"));
                Ok(exit::VIOLATED)
            } else {
                Ok(exit::SUCCESS)
            }
        }
        Command::Pagerank { input, alpha, output } => {
            let r = match read_document(input)? {
                Document::Digraph(g) => pagerank_from_digraph(&g, *alpha)?,
                _ => pagerank_matrix(&load_chain(input)?, *alpha)?,
            };
            let sigma2 = singular_gap(&r)?.sigma2;
            let phi = stationary_direct(&r)?;
            if let Some(path) = output {
                write_output(path, &transition_to_string(&r))?;
            }
            emit(
                out,
                format,
                &json!({
                    "n": r.n(),
                    "alpha": alpha,
                    "sigma2": sigma2,
                    "k": alpha / sigma2,
                    "stationary": distribution_json(&phi),
                }),
            )?;
            Ok(exit::SUCCESS)
        }
        Command::Zoo {
            family,
            n,
            p,
            beta,
            variant,
            shortcut_prob,
            expected_out,
            sample_out,
        } => {
            let spec = match family {
                ZooFamily::Gamblers => {
                    let [v] = variant.variants()[..] else {
                        return Err(CliError::input("zoo gamblers needs a single --variant"));
                    };
                    FamilySpec::gamblers(*n, v, *shortcut_prob, seed)
                }
                ZooFamily::Tourists => {
                    FamilySpec::tourists(*n, beta.ok_or_else(|| CliError::input("tourists needs --beta"))?, seed)
                }
                ZooFamily::Gnp => FamilySpec::gnp(*n, p.ok_or_else(|| CliError::input("gnp needs --p"))?, seed),
            };
            let (a, g) = spec.generate()?;
            let text = expected_to_string(&a, Layout::auto(&a));
            if let Some(path) = sample_out {
                write_output(path, &digraph_to_string(&g))?;
            }
            match expected_out {
                Some(path) => {
                    write_output(path, &text)?;
                    emit(
                        out,
                        format,
                        &json!({
                            "spec": spec,
                            "vertices": a.n(),
                            "expected_arcs": a.entries().sum(),
                            "sampled_arcs": g.arc_count(),
                            "sha256": statgap_core::bounds::expected_digest(&a),
                        }),
                    )?;
                }
                None => out
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(format!("standard output: {e}")))?,
            }
            Ok(exit::SUCCESS)
        }
        Command::Conjecture {
            family,
            variant,
            n,
            n_min,
            n_max,
            n_count,
            alphas,
            alpha_step,
            shortcuts,
            param,
        } => {
            let sizes = if n.is_empty() {
                if *n_min < 1 || n_min > n_max || *n_count < 1 {
                    return Err(CliError::input("need 1 <= --n-min <= --n-max and --n-count >= 1"));
                }
                log_spaced(*n_min, *n_max, *n_count)
            } else {
                n.clone()
            };
            let alphas = if alphas.is_empty() {
                if !(*alpha_step > 0.0 && *alpha_step < 1.0) {
                    return Err(CliError::input("--alpha-step must be in (0, 1)"));
                }
                alpha_grid(*alpha_step)
            } else {
                alphas.clone()
            };
            let mut grid = Vec::new();
            for &size in &sizes {
                match family {
                    ZooFamily::Gamblers => {
                        for v in variant.variants() {
                            for &q in shortcuts {
                                grid.push(FamilySpec::gamblers(size, v, q, seed));
                            }
                        }
                    }
                    ZooFamily::Gnp => grid.push(FamilySpec::gnp(size, param.ok_or_else(|| CliError::input("gnp needs --param"))?, seed)),
                    ZooFamily::Tourists => {
                        grid.push(FamilySpec::tourists(size, param.ok_or_else(|| CliError::input("tourists needs --param"))?, seed))
                    }
                }
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers(cli))
                .build()
                .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
            let result = pool.install(|| conjecture_search(&grid, &alphas))?;
            emit(
                out,
                format,
                &json!({
                    "k_max": result.k_max,
                    "witness": result.witness,
                    "evaluated": result.evaluated,
                    "sizes": sizes,
                    "alphas": alphas,
                }),
            )?;
            Ok(exit::SUCCESS)
        }
        Command::Experiment { config } => {
            let config = ExperimentConfig::from_file(config)?;
            let report = run_experiment(&config, workers(cli))?;
            runner::persist(&config, &report)?;
            let text = match cli.format {
                None => report.table(),
                Some(Format::Json) => serde_json::to_string_pretty(&runner::report_json(&report)).expect("json") + "\n",
                Some(Format::Csv) => runner::csv_string(&report),
            };
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("standard output: {e}")))?;
            eprintln!("{} trials in {:.1} ms", report.rows.len(), report.wall_ms);
            Ok(if report.any_succeeded() { exit::SUCCESS } else { exit::INVALID_INPUT })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_keys() {
        let mut rows = Vec::new();
        flatten("", &json!({"a": 1, "b": [0.5, null], "c": {"d": "x"}}), &mut rows);
        assert_eq!(
            rows,
            vec![
                ("a".into(), "1".into()),
                ("b[0]".into(), "0.5".into()),
                ("b[1]".into(), String::new()),
                ("c.d".into(), "x".into()),
            ]
        );
    }

    #[test]
    fn global_flags_parse_after_subcommand() {
        let cli = Cli::try_parse_from(["statgap", "gap", "x.tm", "--format", "csv", "--seed", "3"]).unwrap();
        assert_eq!(cli.format, Some(Format::Csv));
        assert_eq!(cli.seed, Some(3));
    }

    #[test]
    fn conjecture_lists() {
        let cli = Cli::try_parse_from(["statgap", "conjecture", "--n", "10,20", "--alphas", "0.1,0.2"]).unwrap();
        match cli.command {
            Command::Conjecture { n, alphas, shortcuts, .. } => {
                assert_eq!(n, vec![10, 20]);
                assert_eq!(alphas, vec![0.1, 0.2]);
                assert_eq!(shortcuts, vec![0.0, 1.0]);
            }
            _ => panic!(),
        }
    }
}
