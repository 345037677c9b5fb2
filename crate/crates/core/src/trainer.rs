//! Minibatch AMSGrad on the empirical corrupted BER or AUC objective, with
//! clean-test balanced accuracy and AUC tracked per epoch.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corruption::{corrupt, CorruptedSample};
use crate::dataio::{split_counts, DataSource, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::model::{GradAccum, Mlp};
use crate::optim::{AmsGradConfig, AmsGradState};
use crate::risk::{auc_objective_from_scores, ber_objective_from_scores, NoiseSpec, PairPlan, Scorer, DEFAULT_PAIR_BUDGET};
use crate::rng::{derive_seed, stream_rng, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Ber,
    Auc,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Ber => "ber",
            Objective::Auc => "auc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: 32 }
    }
}

/// One training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub loss: Loss,
    pub noise: NoiseSpec,
    pub objective: Objective,
    pub model: ModelConfig,
    pub optimizer: AmsGradConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub pair_budget: usize,
    pub seed: u64,
    #[serde(serialize_with = "serialize_display")]
    pub data: DataSource,
    pub n_cp: usize,
    pub n_cn: usize,
    pub n_test: usize,
    pub standardize: bool,
}

fn serialize_display<S: serde::Serializer>(v: &DataSource, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl ExperimentConfig {
    /// Desk-scale defaults: 2-D Gaussians, 500 + 500 corrupted training
    /// points, 500 balanced clean test points, hidden 32, batch 500.
    pub fn new(loss: Loss, noise: NoiseSpec, objective: Objective, seed: u64) -> Self {
        ExperimentConfig {
            loss,
            noise,
            objective,
            model: ModelConfig::default(),
            optimizer: AmsGradConfig::default(),
            epochs: 50,
            batch_size: 500,
            pair_budget: DEFAULT_PAIR_BUDGET,
            seed,
            data: DataSource::Gauss { d: 2, separation: 4.0 },
            n_cp: 500,
            n_cn: 500,
            n_test: 500,
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        NoiseSpec::new(self.noise.pi, self.noise.pi_prime)?;
        self.optimizer.validate()?;
        if self.loss.deriv(0.5).is_err() {
            return Err(Error::Unsupported(format!(
                "`{}` has no usable gradient and cannot be trained",
                self.loss
            )));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("n_cp", self.n_cp),
            ("n_cn", self.n_cn),
            ("n_test", self.n_test),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidInput("batch_size must be at least 2".into()));
        }
        if self.n_test < 2 {
            return Err(Error::InvalidInput("n_test must be at least 2 for a balanced test set".into()));
        }
        if self.objective == Objective::Auc && self.pair_budget == 0 {
            return Err(Error::InvalidInput("pair_budget must be positive for the auc objective".into()));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "run loss={} pi={} pi_prime={} objective={} seed={}",
            self.loss, self.noise.pi, self.noise.pi_prime, self.objective, self.seed
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the initial model.
    pub epoch: usize,
    pub train_objective: f64,
    pub test_bac: f64,
    pub test_auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub records: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("at least the initial record")
    }
}

/// Corrupted training samples and a clean test set, standardized by the
/// statistics of the training samples.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub sample: CorruptedSample,
    pub test: Dataset,
}

/// Loads the source, holds out a balanced test set, and mixes the corrupted
/// samples. The underlying pool depends only on the data source and seed, not
/// on the noise level, so noise levels can be compared on matched data.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let half_test = cfg.n_test / 2;
    let per_class = cfg.n_cp + cfg.n_cn + half_test;
    let ds = cfg.data.load(per_class, per_class, cfg.seed)?;
    let (pool, test) = split_counts(&ds, half_test, half_test, cfg.seed)?;
    let mut sample = corrupt(&pool, cfg.noise, cfg.n_cp, cfg.n_cn, cfg.seed)?;
    let test = if cfg.standardize {
        let s = Standardizer::fit(&[sample.cp.view(), sample.cn.view()]);
        sample.cp = s.apply(&sample.cp);
        sample.cn = s.apply(&sample.cn);
        s.apply_dataset(&test)
    } else {
        test
    };
    Ok(PreparedData { sample, test })
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate().map_err(|e| e.context(cfg.describe()))?;
    let data = prepare_data(cfg).map_err(|e| e.context(cfg.describe()))?;
    train_on(cfg, &data).map_err(|e| e.context(cfg.describe()))
}

/// Trains on already prepared data.
pub fn train_on(cfg: &ExperimentConfig, data: &PreparedData) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (cp, cn) = (&data.sample.cp, &data.sample.cn);
    let d = cp.ncols();
    let mut model = Mlp::init(d, cfg.model.hidden, cfg.seed);
    let sizes: Vec<usize> = GradAccum::zeros_like(&model).blocks().iter().map(|b| b.1.len()).collect();
    let mut opt = AmsGradState::new(cfg.optimizer, &sizes);
    let mut acc = GradAccum::zeros_like(&model);
    let mut rng = stream_rng(cfg.seed, streams::BATCHES);
    let full_plan = PairPlan::new(cp.nrows(), cn.nrows(), cfg.pair_budget, derive_seed(cfg.seed, 0));

    let mut records = vec![evaluate(cfg, &model, cp.view(), cn.view(), &full_plan, &data.test, 0)?];
    let half = cfg.batch_size / 2;
    let steps = cp.nrows().max(cn.nrows()).div_ceil(half);
    let mut p_order: Vec<usize> = (0..cp.nrows()).collect();
    let mut n_order: Vec<usize> = (0..cn.nrows()).collect();
    for epoch in 1..=cfg.epochs {
        p_order.shuffle(&mut rng);
        n_order.shuffle(&mut rng);
        for step in 0..steps {
            let bp = cyclic_batch(&p_order, step, half);
            let bn = cyclic_batch(&n_order, step, half);
            let xp = cp.select(Axis(0), &bp);
            let xn = cn.select(Axis(0), &bn);
            let gp = model.forward_batch(xp.view())?;
            let gn = model.forward_batch(xn.view())?;
            let (up, un) = match cfg.objective {
                Objective::Ber => ber_upstream(&cfg.loss, &gp, &gn)?,
                Objective::Auc => auc_upstream(&cfg.loss, &gp, &gn, cfg.pair_budget, &mut rng)?,
            };
            acc.zero();
            model.backward_batch(xp.view(), up.view(), &mut acc)?;
            model.backward_batch(xn.view(), un.view(), &mut acc)?;
            opt.step(model.blocks_mut(), &acc.blocks())?;
        }
        records.push(evaluate(cfg, &model, cp.view(), cn.view(), &full_plan, &data.test, epoch)?);
    }
    Ok(TrainOutcome { model, records })
}

/// `half` indices starting at `step · half`, wrapping around `order`.
fn cyclic_batch(order: &[usize], step: usize, half: usize) -> Vec<usize> {
    let take = half.min(order.len());
    (0..take).map(|k| order[(step * half + k) % order.len()]).collect()
}

/// Per-row upstream gradients of `½[mean ℓ(g_p) + mean ℓ(-g_n)]`.
fn ber_upstream(loss: &Loss, gp: &Array1<f64>, gn: &Array1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let wp = 0.5 / gp.len() as f64;
    let wn = 0.5 / gn.len() as f64;
    let mut up = Array1::zeros(gp.len());
    let mut un = Array1::zeros(gn.len());
    for (u, &g) in up.iter_mut().zip(gp) {
        *u = wp * loss.deriv(g)?;
    }
    for (u, &g) in un.iter_mut().zip(gn) {
        *u = -wn * loss.deriv(-g)?;
    }
    Ok((up, un))
}

/// Per-row upstream gradients of the mean pairwise loss over all batch
/// pairs, or over `budget` uniformly drawn pairs when there are more.
fn auc_upstream(
    loss: &Loss,
    gp: &Array1<f64>,
    gn: &Array1<f64>,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (np, nn) = (gp.len(), gn.len());
    let mut up = Array1::zeros(np);
    let mut un = Array1::zeros(nn);
    let mut add = |i: usize, j: usize, w: f64| -> Result<()> {
        let g = w * loss.deriv(gp[i] - gn[j])?;
        up[i] += g;
        un[j] -= g;
        Ok(())
    };
    if np * nn <= budget {
        let w = 1.0 / (np * nn) as f64;
        for i in 0..np {
            for j in 0..nn {
                add(i, j, w)?;
            }
        }
    } else {
        let w = 1.0 / budget as f64;
        for k in index::sample(rng, np * nn, budget) {
            add(k / nn, k % nn, w)?;
        }
    }
    Ok((up, un))
}

fn evaluate(
    cfg: &ExperimentConfig,
    model: &Mlp,
    cp: ArrayView2<'_, f64>,
    cn: ArrayView2<'_, f64>,
    plan: &PairPlan,
    test: &Dataset,
    epoch: usize,
) -> Result<EpochRecord> {
    let gp = model.score_rows(cp);
    let gn = model.score_rows(cn);
    let train_objective = match cfg.objective {
        Objective::Ber => ber_objective_from_scores(&cfg.loss, &gp, &gn),
        Objective::Auc => auc_objective_from_scores(&cfg.loss, &gp, &gn, plan),
    };
    let scores = model.score_rows(test.patterns.view());
    Ok(EpochRecord {
        epoch,
        train_objective,
        test_bac: bac_from_scores(&scores, &test.labels)?,
        test_auc: auc_from_scores(&scores, &test.labels)?,
    })
}

fn require_both_classes(scores: &[f64], labels: &[i8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if let Some(y) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidInput(format!("labels must be +1 or -1, got {y}")));
    }
    let pos = labels.iter().filter(|&&y| y > 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("test set must contain both classes".into()));
    }
    Ok((pos, neg))
}

/// `100 · (TPR + TNR) / 2`; a zero score is wrong for either class.
pub fn bac_from_scores(scores: &[f64], labels: &[i8]) -> Result<f64> {
    let (pos, neg) = require_both_classes(scores, labels)?;
    let tp = scores.iter().zip(labels).filter(|(&s, &y)| y > 0 && s > 0.0).count();
    let tn = scores.iter().zip(labels).filter(|(&s, &y)| y < 0 && s < 0.0).count();
    Ok(50.0 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

/// `100 ·` the Mann–Whitney statistic, with ties worth one half.
pub fn auc_from_scores(scores: &[f64], labels: &[i8]) -> Result<f64> {
    let (pos, neg) = require_both_classes(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // wins = Σ over positives of (#negatives below) + ½ (#negatives tied)
    let mut wins2: u128 = 0;
    let mut negs_below: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let group = &order[k..end];
        let gp = group.iter().filter(|&&i| labels[i] > 0).count() as u128;
        let gn = group.len() as u128 - gp;
        wins2 += gp * (2 * negs_below + gn);
        negs_below += gn;
        k = end;
    }
    Ok(100.0 * wins2 as f64 / (2.0 * pos as f64 * neg as f64))
}

pub fn eval_bac(scorer: &impl Scorer, test: &Dataset) -> Result<f64> {
    bac_from_scores(&scorer.score_rows(test.patterns.view()), &test.labels)
}

pub fn eval_auc(scorer: &impl Scorer, test: &Dataset) -> Result<f64> {
    auc_from_scores(&scorer.score_rows(test.patterns.view()), &test.labels)
}

/// Builds a dataset from explicit rows; convenient for small fixtures.
pub fn dataset_from_rows(rows: &[(Vec<f64>, i8)]) -> Result<Dataset> {
    let d = rows.first().map_or(0, |r| r.0.len());
    let mut x = Array2::zeros((rows.len(), d));
    for (i, (r, _)) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Dimension { expected: d, got: r.len() });
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(r.as_slice()));
    }
    Dataset::new(x, rows.iter().map(|r| r.1).collect(), "inline")
}
