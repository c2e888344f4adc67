//! Experiment configuration: one experiment per file, `key = value` lines.
//!
//! ```text
//! # G(n, 1/2) trend
//! name = gnp-trend
//! family = gnp
//! n = 100, 200, 400
//! p = 0.5
//! trials = 10
//! base_seed = 0
//! csv = gnp.csv
//! json_dir = certs
//! ```
//!
//! `family` is one of `gamblers`, `tourists`, `gnp`; `input` names an
//! expected-adjacency file instead. Relative paths are resolved against the
//! directory holding the config file. Trial `i` of every size uses seed
//! `base_seed + i`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use statgap_core::zoo::{DriftVariant, FamilySpec, DEFAULT_SHORTCUT_PROBABILITY};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Family(FamilySpec),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    /// One source per size; a file source has a single entry.
    pub sources: Vec<Source>,
    pub trials: usize,
    pub base_seed: u64,
    pub csv: Option<PathBuf>,
    pub json_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "name",
    "family",
    "input",
    "n",
    "p",
    "beta",
    "variant",
    "shortcut_probability",
    "trials",
    "base_seed",
    "csv",
    "json_dir",
    "report",
];

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("config line {lineno}: expected key = value")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::input(format!("config line {lineno}: unknown key `{key}`")));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::input(format!("config line {lineno}: duplicate key `{key}`")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let path = |k: &str| get(k).map(|v| base.join(v));

        let trials: usize = parse_value(&map, "trials")?.unwrap_or(1);
        if trials < 1 {
            return Err(CliError::input("trials must be at least 1"));
        }
        let base_seed = parse_value(&map, "base_seed")?.unwrap_or(0);

        let sources = match (get("family"), get("input")) {
            (Some(_), Some(_)) => return Err(CliError::input("give either family or input, not both")),
            (None, None) => return Err(CliError::input("missing family or input")),
            (None, Some(_)) => vec![Source::File(path("input").expect("present"))],
            (Some(family), None) => {
                let sizes: Vec<usize> = match get("n") {
                    Some(v) => parse_list(v, "n")?,
                    None => return Err(CliError::input("missing n")),
                };
                let variant = match get("variant") {
                    Some(v) => parse_variant(v)?,
                    None => DriftVariant::default(),
                };
                let shortcut = parse_value(&map, "shortcut_probability")?.unwrap_or(DEFAULT_SHORTCUT_PROBABILITY);
                let p: Option<f64> = parse_value(&map, "p")?;
                let beta: Option<f64> = parse_value(&map, "beta")?;
                let mut out = Vec::new();
                for n in sizes {
                    let spec = match family {
                        "gamblers" => FamilySpec::gamblers(n, variant, shortcut, base_seed),
                        "gnp" => FamilySpec::gnp(n, p.ok_or_else(|| CliError::input("gnp needs p"))?, base_seed),
                        "tourists" => {
                            FamilySpec::tourists(n, beta.ok_or_else(|| CliError::input("tourists needs beta"))?, base_seed)
                        }
                        other => return Err(CliError::input(format!("unknown family `{other}`"))),
                    };
                    spec.validate().map_err(CliError::from)?;
                    out.push(Source::Family(spec));
                }
                out
            }
        };

        Ok(Self {
            name: get("name").unwrap_or("experiment").to_string(),
            sources,
            trials,
            base_seed,
            csv: path("csv"),
            json_dir: path("json_dir"),
            report: path("report"),
        })
    }

    /// `base_seed + index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }
}

pub fn parse_variant(v: &str) -> Result<DriftVariant, CliError> {
    match v {
        "decrease-heavy" => Ok(DriftVariant::DecreaseHeavy),
        "increase-heavy" => Ok(DriftVariant::IncreaseHeavy),
        other => Err(CliError::input(format!("unknown variant `{other}`"))),
    }
}

fn parse_value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| v.parse().map_err(|_| CliError::input(format!("invalid value for {key}: `{v}`"))))
        .transpose()
}

pub fn parse_list<T: FromStr>(v: &str, key: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = v
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| CliError::input(format!("invalid value for {key}: `{s}`"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::input(format!("{key} is empty")));
    }
    Ok(items)
}
