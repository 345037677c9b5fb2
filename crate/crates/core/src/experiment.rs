//! Experiment grids: a JSON config expands into one training run per
//! (loss, noise level, seed); results go to CSV and JSON-lines files with a
//! manifest that reproduces the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::DataSource;
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::numeric::{mean_stderr, paired_t_test_greater};
use crate::optim::AmsGradConfig;
use crate::risk::{NoiseSpec, DEFAULT_PAIR_BUDGET};
use crate::rng::derive_seed;
use crate::trainer::{train, EpochRecord, ExperimentConfig, ModelConfig, Objective};

/// Column order of `results.csv`.
pub const RESULT_COLUMNS: [&str; 8] = ["dataset", "loss", "pi", "pi_prime", "objective", "seed", "bac", "auc"];

/// Significance level of the optional one-sided paired t-test.
pub const SIGNIFICANCE: f64 = 0.05;

fn default_losses() -> Vec<Loss> {
    ["sigmoid", "ramp", "unhinged", "barrier", "squared", "logistic", "hinge"]
        .iter()
        .map(|s| s.parse().expect("zoo name"))
        .collect()
}

fn default_data() -> String {
    "gauss:2:4".into()
}

fn default_noise() -> Vec<NoiseSpec> {
    NoiseSpec::grid().to_vec()
}

fn default_repeats() -> usize {
    10
}

fn default_epochs() -> usize {
    50
}

fn default_batch() -> usize {
    500
}

fn default_pair_budget() -> usize {
    DEFAULT_PAIR_BUDGET
}

fn default_count() -> usize {
    500
}

fn default_true() -> bool {
    true
}

/// The experiment config file. Every field except `objective` has a
/// desk-scale default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default = "default_data")]
    pub data: String,
    pub objective: Objective,
    #[serde(default = "default_losses")]
    pub losses: Vec<Loss>,
    #[serde(default = "default_noise")]
    pub noise: Vec<NoiseSpec>,
    /// Root seed; run `k` uses a seed derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Number of seeds per (loss, noise) cell.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: AmsGradConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
    #[serde(default = "default_count")]
    pub n_cp: usize,
    #[serde(default = "default_count")]
    pub n_cn: usize,
    #[serde(default = "default_count")]
    pub n_test: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

/// A run manifest carries the full config, so it can be fed back in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub timestamp: u64,
    pub seed: u64,
    pub standardized: bool,
    pub outputs: BTreeMap<String, String>,
    pub config: ExperimentGrid,
}

fn config_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::Config {
        path,
        message: e.into_inner().to_string(),
    }
}

impl ExperimentGrid {
    /// Parses a config, or the config embedded in a run manifest. Schema
    /// errors carry the JSON path of the offending value.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value {
            serde_json::Value::Object(mut m) if m.contains_key("config_hash") => m
                .remove("config")
                .ok_or_else(|| Error::Config {
                    path: "config".into(),
                    message: "manifest has no config".into(),
                })?,
            other => other,
        };
        let grid: ExperimentGrid = serde_path_to_error::deserialize(value).map_err(config_error)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        self.data.parse::<DataSource>().map_err(|e| cfg_err("data", e.to_string()))?;
        if self.losses.is_empty() {
            return Err(cfg_err("losses", "at least one loss is required".into()));
        }
        if self.noise.is_empty() {
            return Err(cfg_err("noise", "at least one noise level is required".into()));
        }
        if self.repeats == 0 {
            return Err(cfg_err("repeats", "must be positive".into()));
        }
        for (i, loss) in self.losses.iter().enumerate() {
            if loss.deriv(0.5).is_err() {
                return Err(cfg_err(&format!("losses[{i}]"), format!("`{loss}` has no gradient and cannot be trained")));
            }
        }
        let probe = self.run_config(&self.losses[0], self.noise[0], self.seed)?;
        probe.validate().map_err(|e| cfg_err(".", e.to_string()))
    }

    fn run_config(&self, loss: &Loss, noise: NoiseSpec, seed: u64) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            loss: *loss,
            noise,
            objective: self.objective,
            model: self.model,
            optimizer: self.optimizer,
            epochs: self.epochs,
            batch_size: self.batch_size,
            pair_budget: self.pair_budget,
            seed,
            data: self.data.parse()?,
            n_cp: self.n_cp,
            n_cn: self.n_cn,
            n_test: self.n_test,
            standardize: self.standardize,
        })
    }

    /// Seeds of the `repeats` runs per cell.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|k| derive_seed(self.seed, k)).collect()
    }

    /// All runs, ordered by noise level, then loss, then seed.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        for &noise in &self.noise {
            for loss in &self.losses {
                for seed in self.run_seeds() {
                    out.push(self.run_config(loss, noise, seed)?);
                }
            }
        }
        Ok(out)
    }

    /// SHA-256 of the config serialized with sorted keys.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes").to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub dataset: String,
    pub loss: String,
    pub pi: f64,
    pub pi_prime: f64,
    pub objective: Objective,
    pub seed: u64,
    pub bac: f64,
    pub auc: f64,
    #[serde(skip)]
    pub curve: Vec<EpochRecord>,
}

/// Runs every expanded config on up to `jobs` threads. Results come back in
/// expansion order regardless of scheduling.
pub fn run_grid(grid: &ExperimentGrid, jobs: usize) -> Result<Vec<RunResult>> {
    let runs = grid.expand()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| {
        runs.par_iter()
            .map(|cfg| {
                let out = train(cfg)?;
                let last = *out.last();
                Ok(RunResult {
                    dataset: grid.data.clone(),
                    loss: cfg.loss.to_string(),
                    pi: cfg.noise.pi,
                    pi_prime: cfg.noise.pi_prime,
                    objective: cfg.objective,
                    seed: cfg.seed,
                    bac: last.test_bac,
                    auc: last.test_auc,
                    curve: out.records,
                })
            })
            .collect()
    })
}

pub fn results_csv(rows: &[RunResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.loss.clone(),
            r.pi.to_string(),
            r.pi_prime.to_string(),
            r.objective.to_string(),
            r.seed.to_string(),
            r.bac.to_string(),
            r.auc.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

pub fn curves_jsonl(rows: &[RunResult]) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        dataset: &'a str,
        loss: &'a str,
        pi: f64,
        pi_prime: f64,
        objective: Objective,
        seed: u64,
        #[serde(flatten)]
        record: &'a EpochRecord,
    }
    let mut out = String::new();
    for r in rows {
        for rec in &r.curve {
            let line = Line {
                dataset: &r.dataset,
                loss: &r.loss,
                pi: r.pi,
                pi_prime: r.pi_prime,
                objective: r.objective,
                seed: r.seed,
                record: rec,
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Mean and standard error per (dataset, objective, noise, loss) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub dataset: String,
    pub loss: String,
    pub pi: f64,
    pub pi_prime: f64,
    pub objective: Objective,
    pub n: usize,
    pub bac_mean: f64,
    pub bac_stderr: f64,
    pub auc_mean: f64,
    pub auc_stderr: f64,
}

/// Cells in first-appearance order; within a cell rows keep their order.
fn cells(rows: &[RunResult]) -> Vec<Vec<&RunResult>> {
    let mut order: Vec<(String, String, u64, u64, Objective)> = Vec::new();
    let mut groups: Vec<Vec<&RunResult>> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.loss.clone(), r.pi.to_bits(), r.pi_prime.to_bits(), r.objective);
        match order.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                order.push(key);
                groups.push(vec![r]);
            }
        }
    }
    groups
}

pub fn summarize(rows: &[RunResult]) -> Vec<CellSummary> {
    cells(rows)
        .into_iter()
        .map(|g| {
            let bac: Vec<f64> = g.iter().map(|r| r.bac).collect();
            let auc: Vec<f64> = g.iter().map(|r| r.auc).collect();
            let (bac_mean, bac_stderr) = mean_stderr(&bac);
            let (auc_mean, auc_stderr) = mean_stderr(&auc);
            CellSummary {
                dataset: g[0].dataset.clone(),
                loss: g[0].loss.clone(),
                pi: g[0].pi,
                pi_prime: g[0].pi_prime,
                objective: g[0].objective,
                n: g.len(),
                bac_mean,
                bac_stderr,
                auc_mean,
                auc_stderr,
            }
        })
        .collect()
}

pub fn summary_csv(cells: &[CellSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(c)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

/// Per noise level, the loss with the best mean metric (BAC for the BER
/// objective, AUC for the AUC objective) and, for every other loss, the
/// one-sided paired p-value that the best beats it. Losses not
/// significantly worse than the best are marked `bold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTestRow {
    pub dataset: String,
    pub pi: f64,
    pub pi_prime: f64,
    pub objective: Objective,
    pub metric: &'static str,
    pub loss: String,
    pub mean: f64,
    pub best: String,
    pub p_value: f64,
    pub bold: bool,
}

pub fn ttest(rows: &[RunResult]) -> Vec<TTestRow> {
    let mut out = Vec::new();
    let all = cells(rows);
    let mut levels: Vec<(String, u64, u64, Objective)> = Vec::new();
    for g in &all {
        let key = (g[0].dataset.clone(), g[0].pi.to_bits(), g[0].pi_prime.to_bits(), g[0].objective);
        if !levels.contains(&key) {
            levels.push(key);
        }
    }
    for (dataset, pi, pip, objective) in levels {
        let level: Vec<&Vec<&RunResult>> = all
            .iter()
            .filter(|g| g[0].dataset == dataset && g[0].pi.to_bits() == pi && g[0].pi_prime.to_bits() == pip && g[0].objective == objective)
            .collect();
        let (metric, pick): (&'static str, fn(&RunResult) -> f64) = match objective {
            Objective::Ber => ("bac", |r| r.bac),
            Objective::Auc => ("auc", |r| r.auc),
        };
        // pair runs by seed
        let values: Vec<Vec<f64>> = level
            .iter()
            .map(|g| {
                let mut v: Vec<(u64, f64)> = g.iter().map(|r| (r.seed, pick(r))).collect();
                v.sort_by_key(|p| p.0);
                v.into_iter().map(|p| p.1).collect()
            })
            .collect();
        let means: Vec<f64> = values.iter().map(|v| mean_stderr(v).0).collect();
        let best = (0..means.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
        for (i, g) in level.iter().enumerate() {
            let p = if i == best { 1.0 } else { paired_t_test_greater(&values[best], &values[i]) };
            out.push(TTestRow {
                dataset: dataset.clone(),
                pi: f64::from_bits(pi),
                pi_prime: f64::from_bits(pip),
                objective,
                metric,
                loss: g[0].loss.clone(),
                mean: means[i],
                best: level[best][0].loss.clone(),
                p_value: p,
                bold: i == best || !(p < SIGNIFICANCE),
            });
        }
    }
    out
}

pub fn ttest_csv(rows: &[TTestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

/// Runs a grid and writes `results.csv`, `curves.jsonl`, `summary.csv`,
/// optionally `ttest.csv`, and `manifest.json` into `out_dir`.
pub fn run_to_dir(grid: &ExperimentGrid, out_dir: &Path, jobs: usize, with_ttest: bool) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::from(e).context(format!("creating {}", out_dir.display())))?;
    let rows = run_grid(grid, jobs)?;
    let mut outputs = BTreeMap::new();
    let mut write = |name: &str, contents: &str| -> Result<()> {
        let path: PathBuf = out_dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
        f.write_all(contents.as_bytes())?;
        let key = name.split('.').next().unwrap_or(name);
        outputs.insert(key.to_string(), path.display().to_string());
        Ok(())
    };
    write("results.csv", &results_csv(&rows)?)?;
    write("curves.jsonl", &curves_jsonl(&rows))?;
    write("summary.csv", &summary_csv(&summarize(&rows))?)?;
    if with_ttest {
        write("ttest.csv", &ttest_csv(&ttest(&rows))?)?;
    }
    let manifest = RunManifest {
        config_hash: grid.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        seed: grid.seed,
        standardized: grid.standardize,
        outputs,
        config: grid.clone(),
    };
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// The `losses` table.
pub fn losses_table() -> String {
    let yes = |b: bool| if b { "yes" } else { "no" };
    let mut out = format!(
        "{:<22} {:<7} {:<10} {:<12} {:<22} {}\n",
        "loss", "convex", "symmetric", "recover_eta", "minimizer", "formula"
    );
    for l in Loss::zoo() {
        let symmetric = match l.symmetry() {
            crate::loss::Symmetry::Full { .. } => "yes",
            crate::loss::Symmetry::Band { .. } => "band",
            crate::loss::Symmetry::None => "no",
        };
        let _ = writeln!(
            out,
            "{:<22} {:<7} {:<10} {:<12} {:<22} {}",
            l.to_string(),
            yes(l.is_convex()),
            symmetric,
            yes(l.recovers_eta()),
            l.minimizer_formula(),
            l.formula()
        );
    }
    out
}
