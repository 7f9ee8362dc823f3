//! Run configuration shared by the corpus, training, restore and bench stages.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::degrade::{order_label, parse_order, DegradationKind};
use crate::error::{Error, Result};
use crate::evidential::{check_zeta, DEFAULT_ZETA};

/// How the candidate restorations of one image are turned into an output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    /// Structural-entropy selection and weighting.
    Seros,
    /// One fixed order, restricted to the active kinds.
    Fixed(Vec<DegradationKind>),
    /// One uniformly random order per image.
    Rps,
    /// Equal-weight mean over every order.
    Pea,
}

impl Strategy {
    /// The default comparison set: seros, rps, pea and all six fixed orders.
    pub fn all() -> Vec<Strategy> {
        let mut out = vec![Strategy::Seros, Strategy::Rps, Strategy::Pea];
        out.extend(crate::restore_ops::permutations(&DegradationKind::ALL).into_iter().map(Strategy::Fixed));
        out
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Seros => f.write_str("seros"),
            Strategy::Fixed(order) => write!(f, "fixed:{}", order_label(order)),
            Strategy::Rps => f.write_str("rps"),
            Strategy::Pea => f.write_str("pea"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "seros" => return Ok(Strategy::Seros),
            "rps" => return Ok(Strategy::Rps),
            "pea" => return Ok(Strategy::Pea),
            _ => {}
        }
        let order = s
            .strip_prefix("fixed:")
            .ok_or_else(|| Error::Parse(format!("unknown strategy {s:?}")))?;
        let kinds = parse_order(order)?;
        if kinds.len() != 3 {
            return Err(Error::Parse(format!("fixed order must name c, b and n once each, got {order:?}")));
        }
        Ok(Strategy::Fixed(kinds))
    }
}

/// Parses a comma-separated strategy list; `all` expands to [`Strategy::all`].
pub fn parse_strategies(list: &str) -> Result<Vec<Strategy>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("all") {
            out.extend(Strategy::all());
        } else {
            out.push(item.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("strategy list is empty".into()));
    }
    Ok(out)
}

/// Every stage's settings. Missing TOML keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus directory written by `make-corpus` and read by training and bench.
    pub corpus_dir: PathBuf,
    /// Image file or directory to restore.
    pub input: Option<PathBuf>,
    /// Where restored images go.
    pub output_dir: PathBuf,
    /// Heads weights file.
    pub heads: PathBuf,
    /// Text report; the CSV and diagnostics files are written next to it.
    pub report: PathBuf,
    pub seed: u64,
    pub corpus_size: usize,
    pub image_size: usize,
    pub severity_min: f64,
    pub severity_max: f64,
    /// Restrict the corpus to one class ("single", "double", "triple").
    pub class: Option<String>,
    pub zeta: f64,
    pub strategy: String,
    /// Comma-separated list for `bench`.
    pub strategies: String,
    pub epochs: usize,
    pub step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: PathBuf::from("corpus"),
            input: None,
            output_dir: PathBuf::from("restored"),
            heads: PathBuf::from("heads.txt"),
            report: PathBuf::from("report.txt"),
            seed: 0,
            corpus_size: 300,
            image_size: 64,
            severity_min: 0.3,
            severity_max: 1.0,
            class: None,
            zeta: DEFAULT_ZETA,
            strategy: "seros".into(),
            strategies: "all".into(),
            epochs: 1500,
            step: 0.5,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_zeta(self.zeta)?;
        self.parsed_strategy()?;
        self.parsed_strategies()?;
        self.class_filter()?;
        if self.image_size < 16 {
            return Err(Error::InvalidArgument(format!("image_size must be at least 16, got {}", self.image_size)));
        }
        if !(self.severity_min > 0.0 && self.severity_min <= self.severity_max && self.severity_max <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "severity range must satisfy 0 < min <= max <= 1, got [{}, {}]",
                self.severity_min, self.severity_max
            )));
        }
        if self.epochs == 0 || !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument("epochs and step must be positive".into()));
        }
        Ok(())
    }

    pub fn parsed_strategy(&self) -> Result<Strategy> {
        self.strategy.parse()
    }

    pub fn parsed_strategies(&self) -> Result<Vec<Strategy>> {
        parse_strategies(&self.strategies)
    }

    pub fn class_filter(&self) -> Result<Option<super::corpus::DegradationClass>> {
        self.class.as_deref().map(str::parse).transpose()
    }

    /// CSV report path: the text report with a `.csv` extension.
    pub fn csv_path(&self) -> PathBuf {
        self.report.with_extension("csv")
    }

    /// Per-image diagnostics path: the text report with `.diag.jsonl`.
    pub fn diagnostics_path(&self) -> PathBuf {
        self.report.with_extension("diag.jsonl")
    }
}
