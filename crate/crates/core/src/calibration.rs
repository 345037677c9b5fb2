//! Classification-calibration, excess-risk constants, conditional risk
//! minimizers, and a search for AUC-inconsistency witnesses.
//!
//! Everything here works pointwise in `η = p(y = +1 | x)`:
//! the conditional risk of a score `α` is `C_η(α) = η ℓ(α) + (1 - η) ℓ(-α)`.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{Interval, Loss};
use crate::numeric::{csum, CompensatedSum};
use crate::risk::Scorer;
use crate::rng::stream_rng;

/// Default minimizer-search step.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// Tolerance under which two conditional-risk values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub loss_name: String,
    pub descriptor: String,
    pub symmetric: bool,
    pub inf_pos: f64,
    pub inf_nonpos: f64,
    pub calibrated: bool,
    /// `C` in `ψ(θ) = Cθ`, i.e. `inf_nonpos - inf_pos`.
    pub psi_slope: f64,
    pub excess_bound_denominator: f64,
}

/// Calibration verdict from the half-line infima: calibrated iff
/// `inf_{α>0} ℓ < inf_{α≤0} ℓ`.
pub fn check_calibration(loss: &Loss) -> CalibrationReport {
    let inf_pos = loss.inf_pos();
    let inf_nonpos = loss.inf_nonpos();
    let slope = inf_nonpos - inf_pos;
    CalibrationReport {
        loss_name: loss.name().to_string(),
        descriptor: loss.to_string(),
        symmetric: loss.is_symmetric(),
        inf_pos,
        inf_nonpos,
        calibrated: inf_pos < inf_nonpos,
        psi_slope: slope,
        excess_bound_denominator: slope,
    }
}

/// Zero-one excess risk implied by a surrogate excess risk, for calibrated
/// symmetric losses: `surrogate_excess / (inf_{α≤0} ℓ - inf_{α>0} ℓ)`.
pub fn excess_risk_bound(loss: &Loss, surrogate_excess: f64) -> Result<f64> {
    if !(surrogate_excess >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "surrogate excess risk must be non-negative, got {surrogate_excess}"
        )));
    }
    if !loss.is_symmetric() {
        return Err(Error::Unsupported(format!(
            "the linear excess-risk bound is only available for symmetric losses, `{loss}` is not"
        )));
    }
    let report = check_calibration(loss);
    if !report.calibrated {
        return Err(Error::Unsupported(format!(
            "`{loss}` is not classification-calibrated, so no excess risk bound exists"
        )));
    }
    Ok(surrogate_excess / report.psi_slope)
}

/// Uniform search grid `lo, lo + step, ..., hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub domain: Interval,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo < hi) || !(step > 0.0) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("bad grid [{lo}, {hi}] step {step}")));
        }
        Ok(Grid {
            domain: Interval::new(lo, hi),
            step,
        })
    }

    /// The clamp domain when the loss has one, `[-2r, 2r]` for the barrier,
    /// `[-10, 10]` otherwise.
    pub fn default_for(loss: &Loss) -> Self {
        let domain = match (loss.clamp_domain(), loss) {
            (Some(d), _) => d,
            (None, Loss::Barrier { r, .. }) => Interval::new(-2.0 * r, 2.0 * r),
            _ => Interval::new(-10.0, 10.0),
        };
        Grid {
            domain,
            step: DEFAULT_GRID_STEP,
        }
    }

    fn intervals(&self) -> usize {
        ((self.domain.hi - self.domain.lo) / self.step).round().max(1.0) as usize
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.intervals();
        let Interval { lo, hi } = self.domain;
        (0..=n).map(move |k| lo + (hi - lo) * k as f64 / n as f64)
    }
}

pub fn conditional_risk(loss: &Loss, eta: f64, alpha: f64) -> f64 {
    eta * loss.eval(alpha) + (1.0 - eta) * loss.eval(-alpha)
}

/// Grid minimizer of the conditional risk at one value of `η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaPoint {
    pub eta: f64,
    pub grid: Grid,
    pub minimizer: f64,
    pub minimum: f64,
    /// `C_η` is constant over the grid, so any point is a minimizer.
    pub degenerate: bool,
}

/// Grid argmin of `C_η(α)`; ties go to the smallest `|α|`, then the smaller `α`.
pub fn conditional_minimizer(loss: &Loss, eta: f64, grid: &Grid) -> Result<EtaPoint> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("eta must lie in [0, 1], got {eta}")));
    }
    let values: Vec<(f64, f64)> = grid.points().map(|a| (a, conditional_risk(loss, eta, a))).collect();
    let minimum = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let maximum = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * minimum.abs().max(1.0);
    let minimizer = values
        .iter()
        .filter(|(_, c)| *c <= minimum + tol)
        .map(|&(a, _)| a)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
        .expect("grid is non-empty");
    Ok(EtaPoint {
        eta,
        grid: *grid,
        minimizer,
        minimum,
        degenerate: maximum - minimum <= tol,
    })
}

/// Whether `η ↦ f*(η)` separates the given class probabilities.
///
/// Needs at least two distinct values of `η` strictly on one side of ½.
pub fn eta_recovery_probe(loss: &Loss, etas: &[f64]) -> Result<bool> {
    let grid = Grid::default_for(loss);
    let mut above: Vec<f64> = etas.iter().copied().filter(|&e| e > 0.5).collect();
    let mut below: Vec<f64> = etas.iter().copied().filter(|&e| e < 0.5).collect();
    for side in [&mut above, &mut below] {
        side.sort_by(f64::total_cmp);
        side.dedup();
    }
    if above.len() < 2 && below.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two distinct class probabilities on one side of 0.5".into(),
        ));
    }
    let mut minimizers = Vec::with_capacity(etas.len());
    for &eta in etas {
        minimizers.push(conditional_minimizer(loss, eta, &grid)?.minimizer);
    }
    let mut distinct = true;
    for i in 0..etas.len() {
        for j in i + 1..etas.len() {
            if etas[i] != etas[j] && (minimizers[i] - minimizers[j]).abs() <= 2.0 * grid.step {
                distinct = false;
            }
        }
    }
    Ok(distinct)
}

/// `H⁻(η) - H(η)` at `η = (1 + θ)/2`, where `H` minimizes `C_η` over the grid
/// and `H⁻` over grid points of the wrong sign (`α(2η - 1) ≤ 0`).
pub fn psi_transform(loss: &Loss, theta: f64, grid: &Grid) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta must lie in [0, 1], got {theta}")));
    }
    let eta = 0.5 * (1.0 + theta);
    let mut h = f64::INFINITY;
    let mut h_wrong = f64::INFINITY;
    for a in grid.points() {
        let c = conditional_risk(loss, eta, a);
        h = h.min(c);
        if a * (2.0 * eta - 1.0) <= 0.0 {
            h_wrong = h_wrong.min(c);
        }
    }
    Ok(h_wrong - h)
}

/// A support point of a discrete distribution with its class probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightedEta {
    pub mass: f64,
    pub eta: f64,
}

/// `E[ℓ(y g(x))]` on a discrete distribution given per-point scores.
pub fn classification_risk(loss: &Loss, points: &[WeightedEta], scores: &[f64]) -> f64 {
    csum(points.iter().zip(scores).map(|(p, &s)| p.mass * conditional_risk(loss, p.eta, s)))
}

/// `inf_g E[ℓ(y g(x))]` by per-point exhaustive grid minimization.
pub fn minimal_classification_risk(loss: &Loss, points: &[WeightedEta], grid: &Grid) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for p in points {
        acc.add(p.mass * conditional_minimizer(loss, p.eta, grid)?.minimum);
    }
    Ok(acc.value())
}

/// Variable part of the pairwise AUC risk on a uniform discrete support:
/// `Σ_i Σ_{j≠i} (η_i - η_j) ℓ(g(x_i) - g(x_j))`. Constants and the positive
/// normalizer are dropped, so only comparisons between scorers are meaningful.
pub fn pairwise_discrete_auc_risk(loss: &Loss, supports: &[(Vec<f64>, f64)], scorer: &impl Scorer) -> Result<f64> {
    if supports.len() < 2 {
        return Err(Error::InvalidInput("pairwise risk needs at least two support points".into()));
    }
    if let Some((_, eta)) = supports.iter().find(|(_, e)| !(0.0..=1.0).contains(e)) {
        return Err(Error::InvalidInput(format!("eta must lie in [0, 1], got {eta}")));
    }
    let etas: Vec<f64> = supports.iter().map(|s| s.1).collect();
    let scores: Vec<f64> = supports.iter().map(|s| scorer.score(&s.0)).collect();
    Ok(pairwise_variable_risk(loss, &etas, &scores))
}

fn pairwise_variable_risk(loss: &Loss, etas: &[f64], scores: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..etas.len() {
        for j in 0..etas.len() {
            if i != j {
                acc.add((etas[i] - etas[j]) * loss.eval(scores[i] - scores[j]));
            }
        }
    }
    acc.value()
}

/// An exact multiple of one half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Halves(pub i64);

impl Halves {
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for Halves {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// An exact multiple of one quarter (product of two [`Halves`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Quarters(pub i64);

impl Quarters {
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }
}

impl fmt::Display for Quarters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// The point-mass loss on an integer margin, in halves.
fn point_mass_halves(margin: i64) -> Halves {
    match margin {
        1 => Halves(0),
        -1 => Halves(2),
        _ => Halves(1),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRow {
    /// 1-based support indices.
    pub i: usize,
    pub j: usize,
    pub eta_diff: Halves,
    /// One entry per scoring function.
    pub losses: Vec<Halves>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankFunctionTable {
    pub etas: [Halves; 3],
    pub function_names: Vec<String>,
    /// Integer scores of each function on the three supports.
    pub functions: Vec<[i64; 3]>,
    pub rows: Vec<PairRow>,
    /// `Σ (η_i - η_j) ℓ(g(x_i) - g(x_j))` per function.
    pub scores: Vec<Quarters>,
    pub minimizers: Vec<String>,
}

impl RankFunctionTable {
    /// CSV with one row per ordered pair and a trailing `score` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,eta_i-eta_j");
        for name in &self.function_names {
            out.push_str(&format!(",{name}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("eta{}-eta{},{}", row.i, row.j, row.eta_diff));
            for l in &row.losses {
                out.push_str(&format!(",{l}"));
            }
            out.push('\n');
        }
        out.push_str("score,");
        for s in &self.scores {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        out
    }
}

/// The three-point uniform distribution with `η = (1, 0.5, 0)`, the
/// point-mass loss, and four scorers, two of which (`g1`, `g4`) minimize the
/// pairwise risk without ranking by `η`.
pub fn counterexample_table() -> RankFunctionTable {
    let etas = [Halves(2), Halves(1), Halves(0)];
    let function_names: Vec<String> = ["g1", "g2", "g3", "g4"].iter().map(|s| s.to_string()).collect();
    let functions: Vec<[i64; 3]> = vec![[1, 0, 0], [2, 1, 0], [0, 0, 0], [1, 1, 0]];
    let order = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
    let rows: Vec<PairRow> = order
        .iter()
        .map(|&(i, j)| PairRow {
            i: i + 1,
            j: j + 1,
            eta_diff: Halves(etas[i].0 - etas[j].0),
            losses: functions.iter().map(|g| point_mass_halves(g[i] - g[j])).collect(),
        })
        .collect();
    let scores: Vec<Quarters> = (0..functions.len())
        .map(|f| Quarters(rows.iter().map(|r| r.eta_diff.0 * r.losses[f].0).sum()))
        .collect();
    let best = *scores.iter().min().expect("four functions");
    let minimizers = function_names
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s == best)
        .map(|(n, _)| n.clone())
        .collect();
    RankFunctionTable {
        etas,
        function_names,
        functions,
        rows,
        scores,
        minimizers,
    }
}

/// A pairwise-risk minimizer that does not rank strictly by `η`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InconsistencyWitness {
    pub etas: Vec<f64>,
    pub scores: Vec<f64>,
    pub risk: f64,
}

const PROBE_SPACINGS: [f64; 3] = [0.5, 1.0, 2.0];

/// All weak orderings of `n` items as level vectors using levels `0..k`.
fn weak_orderings(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut levels = vec![0u8; n];
    let total = (n as u64).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for slot in levels.iter_mut() {
            *slot = (c % n as u64) as u8;
            c /= n as u64;
        }
        let max = *levels.iter().max().unwrap_or(&0);
        if (0..=max).all(|l| levels.contains(&l)) {
            out.push(levels.clone());
        }
    }
    out
}

fn violates_bayes_order(etas: &[f64], scores: &[f64]) -> bool {
    for i in 0..etas.len() {
        for j in 0..etas.len() {
            if (etas[i] - etas[j]).abs() > TIE_TOLERANCE && (scores[i] - scores[j]) * (etas[i] - etas[j]) <= 0.0 {
                return true;
            }
        }
    }
    false
}

/// Minimizes the pairwise risk over scorers built from weak orderings of the
/// supports with spacing 0.5, 1 or 2, and returns a minimizer that breaks
/// the `η` order if there is one.
fn search_instance(loss: &Loss, etas: &[f64], orderings: &[Vec<u8>]) -> Option<InconsistencyWitness> {
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for levels in orderings {
        for &delta in &PROBE_SPACINGS {
            let scores: Vec<f64> = levels.iter().map(|&l| delta * l as f64).collect();
            let risk = pairwise_variable_risk(loss, etas, &scores);
            candidates.push((risk, scores));
        }
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    candidates
        .into_iter()
        .filter(|(r, _)| *r <= best + tol)
        .find(|(_, s)| violates_bayes_order(etas, s))
        .map(|(risk, scores)| InconsistencyWitness {
            etas: etas.to_vec(),
            scores,
            risk,
        })
}

/// Searches the three-point counterexample distribution and then `trials`
/// random uniform supports of 3 to 6 points for an inconsistency witness.
///
/// The scorer family is exhaustive over weak orderings for every instance
/// size used, so a witness is a proof of AUC-inconsistency; its absence is
/// only evidence of consistency.
pub fn find_auc_inconsistency(loss: &Loss, trials: usize, seed: u64) -> Result<Option<InconsistencyWitness>> {
    if !loss.is_symmetric() {
        return Err(Error::Unsupported(format!(
            "the AUC-consistency probe relies on the symmetric rewriting of the pairwise \
             risk; `{loss}` is not symmetric"
        )));
    }
    let orderings: Vec<Vec<Vec<u8>>> = (0..=6).map(weak_orderings).collect();
    if let Some(w) = search_instance(loss, &[1.0, 0.5, 0.0], &orderings[3]) {
        return Ok(Some(w));
    }
    for trial in 0..trials {
        let mut rng = stream_rng(seed, trial as u64);
        let n = rng.random_range(3..=6);
        let etas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if let Some(w) = search_instance(loss, &etas, &orderings[n]) {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// `false` when some pairwise-risk minimizer is found to break the `η` order.
pub fn auc_consistency_probe(loss: &Loss, trials: usize, seed: u64) -> Result<bool> {
    Ok(find_auc_inconsistency(loss, trials, seed)?.is_none())
}
