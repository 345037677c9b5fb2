//! Population BER/AUC risks on finite distributions, their corrupted
//! counterparts, and empirical estimators on samples.
//!
//! A [`DiscreteDist`] stores the two class-conditional distributions on a
//! shared finite support. The corrupted-positive and corrupted-negative
//! marginals are the mixtures `π·P + (1-π)·N` and `π'·P + (1-π')·N`.

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::numeric::{csum, CompensatedSum};
use crate::rng::stream_rng;

type Dd = twofloat::TwoFloat;

/// Mass-sum tolerance for [`DiscreteDist`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default number of pairs evaluated by the empirical AUC objective.
pub const DEFAULT_PAIR_BUDGET: usize = 250_000;

/// Anything that maps a pattern to a real score.
pub trait Scorer {
    fn score(&self, x: &[f64]) -> f64;

    fn score_rows(&self, xs: ArrayView2<'_, f64>) -> Vec<f64> {
        xs.rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.score(s),
                None => self.score(&row.to_vec()),
            })
            .collect()
    }
}

impl<F: Fn(&[f64]) -> f64> Scorer for F {
    fn score(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    /// Mass under `p(x | y = +1)`.
    pub p_pos: f64,
    /// Mass under `p(x | y = -1)`.
    pub p_neg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteDist {
    points: Vec<SupportPoint>,
}

impl DiscreteDist {
    pub fn new(points: Vec<SupportPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("distribution has no support points".into()));
        }
        let dim = points[0].x.len();
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.x.len(),
                });
            }
            if !(p.p_pos >= 0.0 && p.p_neg >= 0.0) || !p.p_pos.is_finite() || !p.p_neg.is_finite() {
                return Err(Error::InvalidInput(format!("point {i} has a negative or non-finite mass")));
            }
        }
        let pos = csum(points.iter().map(|p| p.p_pos));
        let neg = csum(points.iter().map(|p| p.p_neg));
        if (pos - 1.0).abs() > MASS_TOLERANCE || (neg - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "class-conditional masses must each sum to 1 (got {pos} and {neg})"
            )));
        }
        Ok(DiscreteDist { points })
    }

    /// Random distribution on `n` points in `dim` dimensions. Every point gets
    /// positive mass under both classes.
    pub fn random<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Self {
        assert!(n > 0);
        let mut pos: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let mut neg: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        for w in [&mut pos, &mut neg] {
            let total = csum(w.iter().copied());
            w.iter_mut().for_each(|v| *v /= total);
        }
        let points = (0..n)
            .map(|i| SupportPoint {
                x: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                p_pos: pos[i],
                p_neg: neg[i],
            })
            .collect();
        DiscreteDist::new(points).expect("normalized masses")
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn scores(&self, scorer: &impl Scorer) -> Vec<f64> {
        self.points.iter().map(|p| scorer.score(&p.x)).collect()
    }
}

impl<'de> Deserialize<'de> for DiscreteDist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            points: Vec<SupportPoint>,
        }
        let raw = Raw::deserialize(d)?;
        DiscreteDist::new(raw.points).map_err(serde::de::Error::custom)
    }
}

/// The mutually-contaminated pair `(π, π')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseSpec {
    /// Fraction of true positives inside the corrupted-positive sample.
    pub pi: f64,
    /// Fraction of true positives inside the corrupted-negative sample.
    pub pi_prime: f64,
}

impl NoiseSpec {
    pub fn new(pi: f64, pi_prime: f64) -> Result<Self> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(Error::NoiseSpec(format!("pi must lie in (0, 1], got {pi}")));
        }
        if !(0.0..1.0).contains(&pi_prime) {
            return Err(Error::NoiseSpec(format!("pi_prime must lie in [0, 1), got {pi_prime}")));
        }
        if pi <= pi_prime {
            return Err(Error::NoiseSpec(format!(
                "pi ({pi}) must exceed pi_prime ({pi_prime}); otherwise the two \
                 corrupted samples must be swapped and the classifier's labels flipped"
            )));
        }
        Ok(NoiseSpec { pi, pi_prime })
    }

    pub const fn clean() -> Self {
        NoiseSpec { pi: 1.0, pi_prime: 0.0 }
    }

    /// The experiment grid: clean and three increasingly corrupted levels.
    pub fn grid() -> [NoiseSpec; 4] {
        [
            NoiseSpec { pi: 1.0, pi_prime: 0.0 },
            NoiseSpec { pi: 0.8, pi_prime: 0.3 },
            NoiseSpec { pi: 0.7, pi_prime: 0.4 },
            NoiseSpec { pi: 0.65, pi_prime: 0.45 },
        ]
    }

    /// `π - π'`, the factor in front of the clean risk.
    pub fn scale(&self) -> f64 {
        self.pi - self.pi_prime
    }

    /// `(1 - π + π') / 2`, the symmetric-loss excess per unit of `K`.
    pub fn symmetric_offset(&self) -> f64 {
        (1.0 - self.pi + self.pi_prime) / 2.0
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            pi: f64,
            pi_prime: f64,
        }
        let raw = Raw::deserialize(d)?;
        NoiseSpec::new(raw.pi, raw.pi_prime).map_err(serde::de::Error::custom)
    }
}

/// A corrupted risk computed directly and through its decomposition
/// `scale · clean_risk + excess`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskDecomposition {
    pub corrupted_risk: f64,
    pub clean_risk: f64,
    pub scale: f64,
    pub excess: f64,
    pub reconstruction_defect: f64,
}

// The risk algebra below runs in double-double arithmetic: with the steep
// barrier pieces risks reach 1e4, where one f64 ulp already exceeds the
// 1e-12 tolerance the identities are checked at.

/// `Σ_i w_i v_i`.
fn dd_dot<'a>(w: impl IntoIterator<Item = &'a Dd>, v: impl IntoIterator<Item = f64>) -> Dd {
    w.into_iter().zip(v).fold(Dd::from(0.0), |acc, (wi, vi)| acc + *wi * vi)
}

fn class_masses(dist: &DiscreteDist) -> (Vec<Dd>, Vec<Dd>) {
    dist.points.iter().map(|p| (Dd::from(p.p_pos), Dd::from(p.p_neg))).unzip()
}

/// `w · p + (1 - w) · n`, exactly.
fn mixture(pos: &[Dd], neg: &[Dd], w: f64) -> Vec<Dd> {
    let rest = Dd::from(1.0) - w;
    pos.iter().zip(neg).map(|(p, n)| *p * w + *n * rest).collect()
}

fn ber_parts(loss: &Loss, dist: &DiscreteDist, scorer: &impl Scorer) -> (Vec<f64>, Vec<f64>) {
    let g = dist.scores(scorer);
    let plus = g.iter().map(|&s| loss.eval(s)).collect();
    let minus = g.iter().map(|&s| loss.eval(-s)).collect();
    (plus, minus)
}

fn ber_risk_dd(loss: &Loss, dist: &DiscreteDist, scorer: &impl Scorer) -> Dd {
    let (pos, neg) = class_masses(dist);
    let (plus, minus) = ber_parts(loss, dist, scorer);
    (dd_dot(&pos, plus) + dd_dot(&neg, minus)) * 0.5
}

fn ber_corr_risk_dd(loss: &Loss, dist: &DiscreteDist, noise: NoiseSpec, scorer: &impl Scorer) -> Dd {
    let (pos, neg) = class_masses(dist);
    let cp = mixture(&pos, &neg, noise.pi);
    let cn = mixture(&pos, &neg, noise.pi_prime);
    let (plus, minus) = ber_parts(loss, dist, scorer);
    (dd_dot(&cp, plus) + dd_dot(&cn, minus)) * 0.5
}

/// `½[E_P ℓ(g(x)) + E_N ℓ(-g(x))]`.
pub fn ber_risk(loss: &Loss, dist: &DiscreteDist, scorer: &impl Scorer) -> f64 {
    ber_risk_dd(loss, dist, scorer).into()
}

/// `½[R_CP + R_CN]` with each term taken over its corrupted mixture.
pub fn ber_corr_risk(loss: &Loss, dist: &DiscreteDist, noise: NoiseSpec, scorer: &impl Scorer) -> f64 {
    ber_corr_risk_dd(loss, dist, noise, scorer).into()
}

/// Double sum `Σ_i Σ_j a_i b_j ℓ(g_i - g_j)`.
fn pair_sum(loss: &Loss, g: &[f64], a: &[Dd], b: &[Dd]) -> Dd {
    g.iter().zip(a).fold(Dd::from(0.0), |acc, (&gi, ai)| {
        acc + *ai * dd_dot(b, g.iter().map(|&gj| loss.eval(gi - gj)))
    })
}

/// Double sum of `γ(x_i, x_j) = ℓ(g_i - g_j) + ℓ(g_j - g_i)`, with `γ`
/// itself formed exactly.
fn gamma_pair_sum(loss: &Loss, g: &[f64], a: &[Dd], b: &[Dd]) -> Dd {
    g.iter().zip(a).fold(Dd::from(0.0), |acc, (&gi, ai)| {
        let row = b.iter().zip(g).fold(Dd::from(0.0), |r, (bj, &gj)| {
            r + *bj * Dd::new_add(loss.eval(gi - gj), loss.eval(gj - gi))
        });
        acc + *ai * row
    })
}

/// `E_P E_N ℓ(g(x_P) - g(x_N))`.
pub fn auc_risk(loss: &Loss, dist: &DiscreteDist, scorer: &impl Scorer) -> f64 {
    let g = dist.scores(scorer);
    let (pos, neg) = class_masses(dist);
    pair_sum(loss, &g, &pos, &neg).into()
}

/// `E_CP E_CN ℓ(g(x_CP) - g(x_CN))`.
pub fn auc_corr_risk(loss: &Loss, dist: &DiscreteDist, noise: NoiseSpec, scorer: &impl Scorer) -> f64 {
    let g = dist.scores(scorer);
    let (pos, neg) = class_masses(dist);
    let cp = mixture(&pos, &neg, noise.pi);
    let cn = mixture(&pos, &neg, noise.pi_prime);
    pair_sum(loss, &g, &cp, &cn).into()
}

/// Corrupted BER risk versus `(π-π')·R_BER + ½[π' E_P γ + (1-π) E_N γ]`
/// with `γ(x) = ℓ(g(x)) + ℓ(-g(x))`.
pub fn verify_ber_decomposition(
    loss: &Loss,
    dist: &DiscreteDist,
    noise: NoiseSpec,
    scorer: &impl Scorer,
) -> RiskDecomposition {
    let corrupted = ber_corr_risk_dd(loss, dist, noise, scorer);
    let clean = ber_risk_dd(loss, dist, scorer);
    let (pos, neg) = class_masses(dist);
    let (plus, minus) = ber_parts(loss, dist, scorer);
    let gamma: Vec<Dd> = plus.iter().zip(&minus).map(|(&a, &b)| Dd::new_add(a, b)).collect();
    let e_pos = pos.iter().zip(&gamma).fold(Dd::from(0.0), |acc, (p, y)| acc + *p * *y);
    let e_neg = neg.iter().zip(&gamma).fold(Dd::from(0.0), |acc, (n, y)| acc + *n * *y);
    let excess = (e_pos * noise.pi_prime + e_neg * (Dd::from(1.0) - noise.pi)) * 0.5;
    let scale = Dd::new_sub(noise.pi, noise.pi_prime);
    decomposition(corrupted, clean, scale, excess)
}

/// Corrupted AUC risk versus
/// `(π-π')·R_AUC + (1-π)π' E_P E_N γ + (ππ'/2) E_P' E_P γ + ((1-π)(1-π')/2) E_N' E_N γ`.
///
/// The same-class terms run over independent copies of one marginal,
/// diagonal included; there `γ(x, x) = 2ℓ(0)` and halving it gives back the
/// `ℓ(0)` that the direct route sees, so the identity is exact on finite
/// supports.
pub fn verify_auc_decomposition(
    loss: &Loss,
    dist: &DiscreteDist,
    noise: NoiseSpec,
    scorer: &impl Scorer,
) -> RiskDecomposition {
    let g = dist.scores(scorer);
    let (pos, neg) = class_masses(dist);
    let (pi, pip) = (noise.pi, noise.pi_prime);
    let corrupted = pair_sum(loss, &g, &mixture(&pos, &neg, pi), &mixture(&pos, &neg, pip));
    let clean = pair_sum(loss, &g, &pos, &neg);
    let pn = gamma_pair_sum(loss, &g, &pos, &neg);
    let pp = gamma_pair_sum(loss, &g, &pos, &pos);
    let nn = gamma_pair_sum(loss, &g, &neg, &neg);
    let one_minus_pi = Dd::from(1.0) - pi;
    let one_minus_pip = Dd::from(1.0) - pip;
    let excess = one_minus_pi * pip * pn + Dd::new_mul(pi, pip) * 0.5 * pp + one_minus_pi * one_minus_pip * 0.5 * nn;
    let scale = Dd::new_sub(pi, pip);
    decomposition(corrupted, clean, scale, excess)
}

fn decomposition(corrupted: Dd, clean: Dd, scale: Dd, excess: Dd) -> RiskDecomposition {
    let rebuilt = scale * clean + excess;
    RiskDecomposition {
        corrupted_risk: corrupted.into(),
        clean_risk: clean.into(),
        scale: scale.into(),
        excess: excess.into(),
        reconstruction_defect: f64::from(corrupted - rebuilt).abs(),
    }
}

fn require_nonempty(xs: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if xs.nrows() == 0 {
        Err(Error::InvalidInput(format!("{what} sample is empty")))
    } else {
        Ok(())
    }
}

/// `½[mean_cp ℓ(g(x)) + mean_cn ℓ(-g(x))]`.
pub fn empirical_ber_corr(
    loss: &Loss,
    cp: ArrayView2<'_, f64>,
    cn: ArrayView2<'_, f64>,
    scorer: &impl Scorer,
) -> Result<f64> {
    require_nonempty(cp, "corrupted-positive")?;
    require_nonempty(cn, "corrupted-negative")?;
    let gp = scorer.score_rows(cp);
    let gn = scorer.score_rows(cn);
    Ok(ber_objective_from_scores(loss, &gp, &gn))
}

/// The BER objective on precomputed scores.
pub fn ber_objective_from_scores(loss: &Loss, gp: &[f64], gn: &[f64]) -> f64 {
    let p = csum(gp.iter().map(|&s| loss.eval(s))) / gp.len() as f64;
    let n = csum(gn.iter().map(|&s| loss.eval(-s))) / gn.len() as f64;
    0.5 * (p + n)
}

/// Which (cp, cn) index pairs an AUC objective evaluates.
#[derive(Clone, Debug, PartialEq)]
pub enum PairPlan {
    All { n_cp: usize, n_cn: usize },
    Sampled(Vec<(u32, u32)>),
}

impl PairPlan {
    /// All pairs when they fit in `budget`, otherwise `budget` pairs drawn
    /// uniformly with replacement from a stream seeded by `seed`.
    pub fn new(n_cp: usize, n_cn: usize, budget: usize, seed: u64) -> Self {
        if n_cp.saturating_mul(n_cn) <= budget {
            return PairPlan::All { n_cp, n_cn };
        }
        let mut rng = stream_rng(seed, crate::rng::streams::PAIRS);
        PairPlan::Sampled(
            (0..budget)
                .map(|_| (rng.random_range(0..n_cp) as u32, rng.random_range(0..n_cn) as u32))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        match self {
            PairPlan::All { n_cp, n_cn } => n_cp * n_cn,
            PairPlan::Sampled(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(i, j)` for every pair in the plan.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize)) {
        match self {
            PairPlan::All { n_cp, n_cn } => {
                for i in 0..*n_cp {
                    for j in 0..*n_cn {
                        f(i, j);
                    }
                }
            }
            PairPlan::Sampled(pairs) => {
                for &(i, j) in pairs {
                    f(i as usize, j as usize);
                }
            }
        }
    }
}

/// The AUC objective on precomputed scores over the pairs in `plan`.
pub fn auc_objective_from_scores(loss: &Loss, gp: &[f64], gn: &[f64], plan: &PairPlan) -> f64 {
    let mut acc = CompensatedSum::new();
    plan.for_each(|i, j| acc.add(loss.eval(gp[i] - gn[j])));
    acc.value() / plan.len() as f64
}

/// Mean of `ℓ(g(x_cp) - g(x_cn))` over all pairs, or over a seeded
/// subsample of `pair_budget` pairs when there are more than that.
pub fn empirical_auc_corr(
    loss: &Loss,
    cp: ArrayView2<'_, f64>,
    cn: ArrayView2<'_, f64>,
    scorer: &impl Scorer,
    pair_budget: usize,
    seed: u64,
) -> Result<f64> {
    require_nonempty(cp, "corrupted-positive")?;
    require_nonempty(cn, "corrupted-negative")?;
    if pair_budget == 0 {
        return Err(Error::InvalidInput("pair budget must be at least 1".into()));
    }
    let gp = scorer.score_rows(cp);
    let gn = scorer.score_rows(cn);
    let plan = PairPlan::new(gp.len(), gn.len(), pair_budget, seed);
    Ok(auc_objective_from_scores(loss, &gp, &gn, &plan))
}
