//! Strategy comparison over a corpus.
//!
//! Rows are grouped by degradation class and strategy. Two summary rows per
//! strategy follow: `avg-image`, the mean over every image, and `avg-class`,
//! the unweighted mean of the class means.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, Strategy};
use super::corpus::{load_corpus, CorpusItem, DegradationClass};
use super::restore::{candidates, perceive, Diagnostics};
use crate::error::{Error, Result};
use crate::evidential::Heads;
use crate::metrics::MetricReport;
use crate::rng::derive_seed;

pub const CSV_HEADER: &str = "class,strategy,count,psnr,ssim,mae";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub class: String,
    pub strategy: String,
    pub count: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
}

/// One restored image under one strategy.
#[derive(Debug, Clone, Serialize)]
pub struct ImageResult {
    pub index: usize,
    pub class: DegradationClass,
    pub strategy: String,
    pub metrics: MetricReport,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub images: Vec<ImageResult>,
}

impl BenchReport {
    /// Mean PSNR of a strategy over a class, if any image was measured.
    pub fn psnr(&self, class: &str, strategy: &Strategy) -> Option<f64> {
        let name = strategy.to_string();
        self.rows.iter().find(|r| r.class == class && r.strategy == name).map(|r| r.psnr)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{:.6},{:.6},{:.6}", r.class, r.strategy, r.count, r.psnr, r.ssim, r.mae);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let cw = self.rows.iter().map(|r| r.class.len()).max().unwrap_or(0).max(5);
        let sw = self.rows.iter().map(|r| r.strategy.len()).max().unwrap_or(0).max(8);
        let mut s = format!(
            "{:<cw$}  {:<sw$}  {:>5}  {:>10}  {:>8}  {:>8}\n",
            "class", "strategy", "count", "psnr_db", "ssim", "mae"
        );
        let mut last = None;
        for r in &self.rows {
            if last.is_some() && last != Some(&r.class) {
                s.push('\n');
            }
            last = Some(&r.class);
            let _ = writeln!(
                s,
                "{:<cw$}  {:<sw$}  {:>5}  {:>10.6}  {:>8.6}  {:>8.6}",
                r.class, r.strategy, r.count, r.psnr, r.ssim, r.mae
            );
        }
        s
    }

    /// One JSON object per image and strategy, in corpus order.
    pub fn diagnostics_jsonl(&self) -> String {
        let mut s = String::new();
        for img in &self.images {
            s.push_str(&serde_json::to_string(img).expect("diagnostics serialise"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, cfg: &RunConfig) -> Result<()> {
        write_file(&cfg.report, &self.to_text())?;
        write_file(&cfg.csv_path(), &self.to_csv())?;
        write_file(&cfg.diagnostics_path(), &self.diagnostics_jsonl())
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mean_row(class: &str, strategy: &str, metrics: &[MetricReport]) -> BenchRow {
    let n = metrics.len() as f64;
    BenchRow {
        class: class.into(),
        strategy: strategy.into(),
        count: metrics.len(),
        psnr: metrics.iter().map(|m| m.psnr).sum::<f64>() / n,
        ssim: metrics.iter().map(|m| m.ssim).sum::<f64>() / n,
        mae: metrics.iter().map(|m| m.mae).sum::<f64>() / n,
    }
}

/// Restores every item with every strategy and tabulates the metrics.
///
/// Images are processed in parallel; results are gathered by corpus index,
/// so the report does not depend on scheduling. The random-order strategy
/// draws from `derive_seed(seed, index)`.
pub fn run_bench(items: &[CorpusItem], heads: &Heads, strategies: &[Strategy], zeta: f64, seed: u64) -> Result<BenchReport> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("strategy list is empty".into()));
    }
    if items.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let per_item: Vec<Vec<ImageResult>> = items
        .par_iter()
        .map(|item| {
            let cands = candidates(&item.degraded, perceive(&item.degraded, heads, zeta)?)?;
            strategies
                .iter()
                .map(|s| {
                    let (out, diagnostics) = cands.finish(s, derive_seed(seed, item.index as u64), Some(&item.clean))?;
                    Ok(ImageResult {
                        index: item.index,
                        class: item.class,
                        strategy: s.to_string(),
                        metrics: MetricReport::compute(&out, &item.clean)?,
                        diagnostics,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let images: Vec<ImageResult> = per_item.into_iter().flatten().collect();

    let mut rows = Vec::new();
    let mut class_rows: Vec<Vec<BenchRow>> = vec![Vec::new(); strategies.len()];
    for class in DegradationClass::ALL {
        for (si, s) in strategies.iter().enumerate() {
            let name = s.to_string();
            let m: Vec<MetricReport> = images
                .iter()
                .filter(|r| r.class == class && r.strategy == name)
                .map(|r| r.metrics)
                .collect();
            if !m.is_empty() {
                let row = mean_row(class.name(), &name, &m);
                class_rows[si].push(row.clone());
                rows.push(row);
            }
        }
    }
    for s in strategies {
        let name = s.to_string();
        let m: Vec<MetricReport> = images.iter().filter(|r| r.strategy == name).map(|r| r.metrics).collect();
        rows.push(mean_row("avg-image", &name, &m));
    }
    for (si, s) in strategies.iter().enumerate() {
        let cr = &class_rows[si];
        let k = cr.len() as f64;
        rows.push(BenchRow {
            class: "avg-class".into(),
            strategy: s.to_string(),
            count: cr.iter().map(|r| r.count).sum(),
            psnr: cr.iter().map(|r| r.psnr).sum::<f64>() / k,
            ssim: cr.iter().map(|r| r.ssim).sum::<f64>() / k,
            mae: cr.iter().map(|r| r.mae).sum::<f64>() / k,
        });
    }
    Ok(BenchReport { rows, images })
}

/// Loads the corpus and heads named by `cfg`, benchmarks the configured
/// strategies and writes the text, CSV and diagnostics reports.
pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let strategies = cfg.parsed_strategies()?;
    let items = load_corpus(&cfg.corpus_dir)?;
    let heads = Heads::load(&cfg.heads)?;
    let report = run_bench(&items, &heads, &strategies, cfg.zeta, cfg.seed)?;
    report.write(cfg)?;
    Ok(report)
}
