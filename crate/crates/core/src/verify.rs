//! Numerical sweeps behind `symloss verify` and the acceptance tests.
//!
//! Each sweep returns a [`SweepReport`] with its worst defect; a sweep
//! passes when every checked quantity is within its tolerance.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::calibration::{
    check_calibration, conditional_minimizer, counterexample_table, eta_recovery_probe, find_auc_inconsistency,
    psi_transform, Grid,
};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::model::Mlp;
use crate::risk::{
    auc_corr_risk, auc_risk, ber_corr_risk, ber_risk, verify_auc_decomposition, verify_ber_decomposition,
    DiscreteDist, NoiseSpec, Scorer, SupportPoint,
};
use crate::rng::{derive_seed, stream_rng};

/// Tolerance of the exact risk identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    pub tolerance: f64,
    pub worst_defect: f64,
    pub worst_case: String,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl SweepReport {
    fn new(suite: &str, tolerance: f64) -> Self {
        SweepReport {
            suite: suite.to_string(),
            checks: 0,
            failures: 0,
            tolerance,
            worst_defect: 0.0,
            worst_case: String::new(),
            notes: Vec::new(),
            seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Records a defect measured against `self.tolerance`.
    fn defect(&mut self, value: f64, case: impl FnOnce() -> String) {
        self.checks += 1;
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > self.tolerance {
            self.failures += 1;
        }
        if value > self.worst_defect || self.worst_case.is_empty() {
            self.worst_defect = value;
            self.worst_case = case();
        }
    }

    /// Records a boolean check.
    fn check(&mut self, ok: bool, case: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            let msg = case();
            if self.worst_case.is_empty() {
                self.worst_case = msg.clone();
            }
            self.notes.push(msg);
        }
    }

    fn finish(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }
}

/// `scale · g(x)` for a random small ReLU network `g` with `O(1)` outputs.
/// The scale is log-uniform in `[0.1, 10]` times the loss's natural margin
/// scale (`r` for the barrier, so every linear piece is reached; 1 otherwise).
#[derive(Clone, Debug)]
pub struct RandomScorer {
    net: Mlp,
    scale: f64,
}

impl RandomScorer {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self::for_loss(&Loss::Sigmoid, dim, seed)
    }

    pub fn for_loss(loss: &Loss, dim: usize, seed: u64) -> Self {
        let mut net = Mlp::init(dim, 8, seed);
        let mut rng = stream_rng(seed, 101);
        net.b1.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        net.b2 = rng.random_range(-1.0..1.0);
        let unit = match loss {
            Loss::Barrier { r, .. } => *r,
            _ => 1.0,
        };
        let scale = unit * 10f64.powf(rng.random_range(-1.0..1.0));
        RandomScorer { net, scale }
    }
}

impl Scorer for RandomScorer {
    fn score(&self, x: &[f64]) -> f64 {
        self.scale * self.net.score(x)
    }
}

/// Random distribution with 2 to `max_points` support points in 2-D.
pub fn random_dist(max_points: usize, seed: u64) -> DiscreteDist {
    let mut rng = stream_rng(seed, 100);
    let n = rng.random_range(2..=max_points);
    DiscreteDist::random(n, 2, &mut rng)
}

fn identity_sweep(
    suite: &str,
    seed: u64,
    verify: impl Fn(&Loss, &DiscreteDist, NoiseSpec, &RandomScorer) -> f64,
) -> SweepReport {
    let start = Instant::now();
    let mut rep = SweepReport::new(suite, IDENTITY_TOLERANCE);
    for (li, loss) in Loss::zoo().iter().enumerate() {
        for di in 0..20u64 {
            let dseed = derive_seed(seed, 1000 * li as u64 + di);
            let dist = random_dist(20, dseed);
            for noise in NoiseSpec::grid() {
                for si in 0..5u64 {
                    let scorer = RandomScorer::for_loss(loss, 2, derive_seed(dseed, si));
                    let defect = verify(loss, &dist, noise, &scorer);
                    rep.defect(defect, || {
                        format!(
                            "{loss} dist#{di} ({} pts) pi={} pi'={} scorer#{si}",
                            dist.len(),
                            noise.pi,
                            noise.pi_prime
                        )
                    });
                }
            }
        }
    }
    rep.finish(start)
}

/// Corrupted BER risk against its decomposition: 9 losses × 20 random
/// distributions × 4 noise levels × 5 random scorers.
pub fn ber_identity_sweep(seed: u64) -> SweepReport {
    identity_sweep("ber", seed, |l, d, n, s| verify_ber_decomposition(l, d, n, s).reconstruction_defect)
}

/// Same sweep for the corrupted AUC risk.
pub fn auc_identity_sweep(seed: u64) -> SweepReport {
    identity_sweep("auc", seed, |l, d, n, s| verify_auc_decomposition(l, d, n, s).reconstruction_defect)
}

/// For symmetric losses the excess term of both decompositions equals the
/// constant `K(1 - π + π')/2`; for the non-symmetric convex losses it moves
/// with the scorer (spread above `1e-3`).
pub fn excess_term_sweep(seed: u64) -> SweepReport {
    let start = Instant::now();
    let mut rep = SweepReport::new("excess", IDENTITY_TOLERANCE);
    let symmetric = [Loss::Sigmoid, Loss::Ramp, Loss::Unhinged, Loss::ZeroOne];
    let others = [Loss::Hinge, Loss::Logistic, Loss::Squared, Loss::Savage];
    for (li, loss) in symmetric.iter().chain(&others).enumerate() {
        let dist = random_dist(10, derive_seed(seed, li as u64));
        for noise in NoiseSpec::grid() {
            let mut ber_excess = Vec::new();
            let mut auc_excess = Vec::new();
            for si in 0..10u64 {
                let scorer = RandomScorer::for_loss(loss, 2, derive_seed(seed, 100 * li as u64 + si));
                ber_excess.push(verify_ber_decomposition(loss, &dist, noise, &scorer).excess);
                auc_excess.push(verify_auc_decomposition(loss, &dist, noise, &scorer).excess);
            }
            let case = |what: &str| format!("{loss} {what} pi={} pi'={}", noise.pi, noise.pi_prime);
            match loss.symmetry_constant() {
                Some(k) => {
                    let want = k * (1.0 - noise.pi + noise.pi_prime) / 2.0;
                    for (i, e) in ber_excess.iter().enumerate() {
                        rep.defect((e - want).abs(), || case(&format!("ber scorer#{i}")));
                    }
                    for (i, e) in auc_excess.iter().enumerate() {
                        rep.defect((e - want).abs(), || case(&format!("auc scorer#{i}")));
                    }
                }
                None => {
                    // the clean level has no excess at all, so spread is
                    // only required under actual corruption
                    if noise == NoiseSpec::clean() {
                        continue;
                    }
                    for (what, xs) in [("ber", &ber_excess), ("auc", &auc_excess)] {
                        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                            - xs.iter().cloned().fold(f64::INFINITY, f64::min);
                        rep.check(spread > 1e-3, || format!("{} excess spread only {spread:e}", case(what)));
                    }
                }
            }
        }
    }
    rep.finish(start)
}

/// Indices within `1e-12 · max(1, |min|)` of the minimum.
pub fn argmin_set(values: &[f64]) -> Vec<usize> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = IDENTITY_TOLERANCE * min.abs().max(1.0);
    (0..values.len()).filter(|&i| values[i] <= min + tol).collect()
}

/// Over 50 random scorers on a random 10-point distribution, the corrupted
/// and clean risks of every symmetric loss share their argmin at every grid
/// noise level, for both BER and AUC.
pub fn argmin_preservation_sweep(seed: u64) -> SweepReport {
    let start = Instant::now();
    let mut rep = SweepReport::new("argmin", 0.0);
    let mut rng = stream_rng(seed, 102);
    let dist = DiscreteDist::random(10, 2, &mut rng);
    let scorers: Vec<RandomScorer> = (0..50).map(|k| RandomScorer::new(2, derive_seed(seed, k))).collect();
    for loss in Loss::zoo().into_iter().filter(Loss::is_symmetric) {
        for noise in NoiseSpec::grid() {
            type Pair = (fn(&Loss, &DiscreteDist, &RandomScorer) -> f64, fn(&Loss, &DiscreteDist, NoiseSpec, &RandomScorer) -> f64);
            let risks: [(&str, Pair); 2] = [
                ("ber", (|l, d, s| ber_risk(l, d, s), |l, d, n, s| ber_corr_risk(l, d, n, s))),
                ("auc", (|l, d, s| auc_risk(l, d, s), |l, d, n, s| auc_corr_risk(l, d, n, s))),
            ];
            for (what, (clean, corr)) in risks {
                let a: Vec<f64> = scorers.iter().map(|s| clean(&loss, &dist, s)).collect();
                let b: Vec<f64> = scorers.iter().map(|s| corr(&loss, &dist, noise, s)).collect();
                let (sa, sb) = (argmin_set(&a), argmin_set(&b));
                rep.check(sa == sb, || {
                    format!("{loss} {what} pi={} pi'={}: clean argmin {sa:?} vs corrupted {sb:?}", noise.pi, noise.pi_prime)
                });
            }
        }
    }
    let fx = ArgminDivergence::fixture();
    rep.check(fx.diverges(), || "squared-loss divergence fixture does not diverge".into());
    rep.notes.push(format!(
        "fixture: squared loss, pi={} pi'={}: clean risks {:?}, corrupted risks {:?}",
        fx.noise.pi, fx.noise.pi_prime, fx.clean, fx.corrupted
    ));
    rep.finish(start)
}

/// A two-point distribution on which the squared loss' corrupted BER risk
/// prefers a different scorer than its clean risk.
///
/// The support is `x = +1` (positive only) and `x = -1` (negative only).
/// Scorer A outputs `±1` and has clean risk 0, but corrupted risk 1.6 at
/// `(0.65, 0.45)`; the shrunk scorer B outputs `±0.2`, with clean risk 0.64
/// and corrupted risk 0.96.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgminDivergence {
    pub noise: NoiseSpec,
    pub scorer_outputs: Vec<f64>,
    pub clean: Vec<f64>,
    pub corrupted: Vec<f64>,
}

impl ArgminDivergence {
    pub fn fixture() -> Self {
        let dist = DiscreteDist::new(vec![
            SupportPoint {
                x: vec![1.0],
                p_pos: 1.0,
                p_neg: 0.0,
            },
            SupportPoint {
                x: vec![-1.0],
                p_pos: 0.0,
                p_neg: 1.0,
            },
        ])
        .expect("valid fixture");
        let noise = NoiseSpec::new(0.65, 0.45).expect("valid noise");
        let scorer_outputs = vec![1.0, 0.2];
        let mut clean = Vec::new();
        let mut corrupted = Vec::new();
        for &c in &scorer_outputs {
            let g = move |x: &[f64]| c * x[0];
            clean.push(ber_risk(&Loss::Squared, &dist, &g));
            corrupted.push(ber_corr_risk(&Loss::Squared, &dist, noise, &g));
        }
        ArgminDivergence {
            noise,
            scorer_outputs,
            clean,
            corrupted,
        }
    }

    pub fn diverges(&self) -> bool {
        argmin_set(&self.clean) != argmin_set(&self.corrupted)
    }
}

/// The `η` grid `0.1, ..., 0.9` without `0.5`.
pub fn eta_grid() -> Vec<f64> {
    (1..=9).filter(|&k| k != 5).map(|k| k as f64 / 10.0).collect()
}

/// Whether the grid minimizer agrees with the closed form: within two grid
/// steps, or, where the argmin is not unique, the closed form attains the
/// grid minimum.
pub fn minimizer_matches(loss: &Loss, eta: f64, grid: &Grid) -> Result<(bool, f64, f64)> {
    let p = conditional_minimizer(loss, eta, grid)?;
    let want = loss
        .bayes_minimizer(eta)
        .ok_or_else(|| Error::Unsupported(format!("`{loss}` has no closed-form minimizer")))?;
    let close = (p.minimizer - want).abs() <= 2.0 * grid.step;
    let attains = crate::calibration::conditional_risk(loss, eta, want) <= p.minimum + IDENTITY_TOLERANCE;
    Ok((close || attains, p.minimizer, want))
}

/// Calibration verdicts, η-recovery, conditional minimizers, linear `ψ`,
/// and the excess-risk bound on a grid of surrogate excess values.
pub fn calibration_suite() -> SweepReport {
    let start = Instant::now();
    let mut rep = SweepReport::new("calibration", 0.0);
    let table: Vec<Loss> = Loss::zoo().into_iter().filter(|l| !matches!(l, Loss::Barrier { .. })).collect();
    let mut calibrated = 0;
    for loss in &table {
        let report = check_calibration(loss);
        calibrated += report.calibrated as usize;
        rep.check(report.calibrated, || format!("{loss} not calibrated"));
        rep.check(report.symmetric == loss.is_symmetric(), || format!("{loss} symmetry flag"));
        let probe = eta_recovery_probe(loss, &[0.6, 0.7, 0.9]);
        rep.check(probe.as_ref().ok() == Some(&loss.recovers_eta()), || {
            format!("{loss} eta recovery probe {probe:?}")
        });
        let grid = Grid::default_for(loss);
        for eta in eta_grid() {
            match minimizer_matches(loss, eta, &grid) {
                Ok((ok, got, want)) => rep.check(ok, || format!("{loss} eta={eta}: grid {got} vs closed form {want}")),
                Err(e) => rep.check(false, || format!("{loss} eta={eta}: {e}")),
            }
        }
    }
    rep.notes.push(format!("{calibrated}/{} calibrated", table.len()));

    for loss in Loss::zoo().into_iter().filter(Loss::is_symmetric) {
        let c = check_calibration(&loss).psi_slope;
        let grid = psi_grid(&loss);
        for k in 1..=10 {
            let theta = k as f64 / 10.0;
            let psi = psi_transform(&loss, theta, &grid).expect("theta in range");
            rep.check((psi - c * theta).abs() <= 2.0 * grid.step, || {
                format!("{loss} psi({theta}) = {psi}, expected {}", c * theta)
            });
        }
    }
    excess_bound_checks(&mut rep);
    rep.finish(start)
}

/// Grid on which the half-line infima are (numerically) attained: the clamp
/// for the unhinged loss, `[-10, 10]` otherwise.
fn psi_grid(loss: &Loss) -> Grid {
    match loss {
        Loss::Unhinged => Grid::new(-1.0, 1.0, 1e-3).expect("valid grid"),
        _ => Grid::new(-10.0, 10.0, 1e-3).expect("valid grid"),
    }
}

/// Zero-one excess risk never exceeds the bound obtained from the surrogate
/// excess risk, for random discrete class-probability profiles and scorers.
fn excess_bound_checks(rep: &mut SweepReport) {
    use crate::calibration::{classification_risk, excess_risk_bound, minimal_classification_risk, WeightedEta};
    let domains = [
        (Loss::Sigmoid, Grid::new(-40.0, 40.0, 1e-3).expect("valid grid")),
        (Loss::Ramp, Grid::new(-1.0, 1.0, 1e-3).expect("valid grid")),
        (Loss::Unhinged, Grid::new(-1.0, 1.0, 1e-3).expect("valid grid")),
        (Loss::ZeroOne, Grid::new(-1.0, 1.0, 1e-3).expect("valid grid")),
    ];
    let mut rng = stream_rng(0, 103);
    for (loss, grid) in domains {
        for trial in 0..20 {
            let n = rng.random_range(2..=8);
            let mut points: Vec<WeightedEta> = (0..n)
                .map(|_| WeightedEta {
                    mass: rng.random_range(0.05..1.0),
                    eta: rng.random::<f64>(),
                })
                .collect();
            let total: f64 = points.iter().map(|p| p.mass).sum();
            points.iter_mut().for_each(|p| p.mass /= total);
            let best = minimal_classification_risk(&loss, &points, &grid).expect("valid etas");
            let best01: f64 = points.iter().map(|p| p.mass * p.eta.min(1.0 - p.eta)).sum();
            let (lo, hi) = (grid.domain.lo, grid.domain.hi);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
            let surrogate = (classification_risk(&loss, &points, &scores) - best).max(0.0);
            let zero_one = classification_risk(&Loss::ZeroOne, &points, &scores) - best01;
            let bound = excess_risk_bound(&loss, surrogate).expect("calibrated symmetric loss");
            rep.check(zero_one <= bound + 1e-9, || {
                format!("{loss} trial {trial}: zero-one excess {zero_one} above bound {bound}")
            });
        }
    }
}

/// The three-point counterexample: table values, scores and minimizers, and
/// the probe's witness for the point-mass loss.
pub fn counterexample_suite() -> SweepReport {
    let start = Instant::now();
    let mut rep = SweepReport::new("counterexample", 0.0);
    let t = counterexample_table();
    let scores: Vec<f64> = t.scores.iter().map(|s| s.to_f64()).collect();
    rep.check(scores == [-1.5, -1.0, 0.0, -1.5], || format!("scores {scores:?}"));
    rep.check(t.minimizers == ["g1", "g4"], || format!("minimizers {:?}", t.minimizers));
    // float recomputation of every score through the generic pairwise risk
    let supports: Vec<(Vec<f64>, f64)> = t.etas.iter().enumerate().map(|(i, e)| (vec![i as f64], e.to_f64())).collect();
    for (name, g) in t.function_names.iter().zip(&t.functions) {
        let g = *g;
        let scorer = move |x: &[f64]| g[x[0] as usize] as f64;
        let r = crate::calibration::pairwise_discrete_auc_risk(&Loss::PointMass, &supports, &scorer)
            .expect("valid supports");
        let exact = t.scores[t.function_names.iter().position(|n| n == name).expect("name")].to_f64();
        rep.check(r == exact, || format!("{name}: float risk {r} vs exact {exact}"));
    }
    match find_auc_inconsistency(&Loss::PointMass, 0, 0) {
        Ok(Some(w)) => rep.notes.push(format!("witness scores {:?} on etas {:?}", w.scores, w.etas)),
        other => rep.check(false, || format!("no witness for the point-mass loss: {other:?}")),
    }
    rep.notes.push(format!("minimizers {{{}}}", t.minimizers.join(", ")));
    rep.finish(start)
}

pub const SUITES: [&str; 4] = ["ber", "auc", "calibration", "counterexample"];

/// Runs a named suite. `ber` and `auc` include the excess-term and argmin
/// sweeps for that risk family.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<SweepReport>> {
    match name {
        "ber" => Ok(vec![ber_identity_sweep(seed), excess_term_sweep(seed), argmin_preservation_sweep(seed)]),
        "auc" => Ok(vec![auc_identity_sweep(seed)]),
        "calibration" => Ok(vec![calibration_suite()]),
        "counterexample" => Ok(vec![counterexample_suite()]),
        other => Err(Error::InvalidInput(format!(
            "unknown suite `{other}`; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_values() {
        let f = ArgminDivergence::fixture();
        assert!((f.clean[0] - 0.0).abs() < 1e-15 && (f.clean[1] - 0.64).abs() < 1e-12);
        assert!((f.corrupted[0] - 1.6).abs() < 1e-12 && (f.corrupted[1] - 0.96).abs() < 1e-12);
        assert!(f.diverges());
    }

    #[test]
    fn argmin_set_keeps_ties() {
        assert_eq!(argmin_set(&[1.0, 0.5, 0.5, 2.0]), vec![1, 2]);
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", 0).is_err());
    }

    #[test]
    fn report_tracks_failures() {
        let mut r = SweepReport::new("t", 1e-3);
        r.defect(1e-4, || "a".into());
        assert!(r.passed());
        r.defect(f64::NAN, || "nan".into());
        assert!(!r.passed());
        assert_eq!(r.worst_case, "nan");
    }
}
