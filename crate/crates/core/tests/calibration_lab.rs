use symloss::calibration::*;
use symloss::{Error, Loss};

fn loss(s: &str) -> Loss {
    s.parse().unwrap()
}

#[test]
fn calibration_slopes() {
    let sig = check_calibration(&loss("sigmoid"));
    assert!(sig.calibrated && sig.symmetric);
    assert_eq!(sig.psi_slope, 0.5);
    let un = check_calibration(&loss("unhinged"));
    assert!(un.calibrated);
    assert_eq!(un.psi_slope, 1.0);
    let c = check_calibration(&Loss::constant(0.7));
    assert!(!c.calibrated);
    assert_eq!(c.psi_slope, 0.0);
    for l in Loss::zoo() {
        assert!(check_calibration(&l).calibrated, "{l}");
    }
}

#[test]
fn excess_bound_examples() {
    assert_eq!(excess_risk_bound(&loss("sigmoid"), 0.1).unwrap(), 0.2);
    assert_eq!(excess_risk_bound(&loss("sigmoid"), 0.0).unwrap(), 0.0);
    assert!((excess_risk_bound(&loss("ramp"), 0.3).unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(excess_risk_bound(&loss("unhinged"), 0.3).unwrap(), 0.3);
    assert!(matches!(excess_risk_bound(&loss("hinge"), 0.1), Err(Error::Unsupported(_))));
    assert!(matches!(excess_risk_bound(&Loss::constant(1.0), 0.1), Err(Error::Unsupported(_))));
    assert!(matches!(excess_risk_bound(&loss("sigmoid"), -0.1), Err(Error::InvalidInput(_))));
}

#[test]
fn conditional_minimizer_examples() {
    let wide = Grid::new(-5.0, 5.0, 1e-3).unwrap();
    let sq = conditional_minimizer(&loss("squared"), 0.8, &wide).unwrap();
    assert!((sq.minimizer - 0.6).abs() <= 1e-3);
    let lg = conditional_minimizer(&loss("logistic"), 0.8, &wide).unwrap();
    assert!((lg.minimizer - 4f64.ln()).abs() <= 1e-3);
    let unit = Grid::new(-1.0, 1.0, 1e-3).unwrap();
    let sg = conditional_minimizer(&loss("sigmoid"), 0.3, &unit).unwrap();
    assert_eq!(sg.minimizer, -1.0);
    assert!(!sg.degenerate);
    // at η = ½ the conditional risk of a symmetric loss is flat at K/2
    let half = conditional_minimizer(&loss("sigmoid"), 0.5, &unit).unwrap();
    assert!(half.degenerate);
    assert_eq!(half.minimizer, 0.0);
    assert!((half.minimum - 0.5).abs() < 1e-15);
    assert!(conditional_minimizer(&loss("sigmoid"), 1.5, &unit).is_err());
    assert!(Grid::new(1.0, -1.0, 0.1).is_err());
    assert!(Grid::new(-1.0, 1.0, 0.0).is_err());
}

#[test]
fn symmetric_minimizers_sit_on_the_grid_edge() {
    for name in ["ramp", "sigmoid", "unhinged"] {
        let l = loss(name);
        let g = Grid::default_for(&l);
        let m = g.domain.hi;
        assert_eq!(g.domain.lo, -m);
        for k in 1..=19 {
            let eta = 0.05 * k as f64;
            if k == 10 {
                continue;
            }
            let p = conditional_minimizer(&l, eta, &g).unwrap();
            let want = m * (2.0 * eta - 1.0).signum();
            assert!((p.minimizer - want).abs() <= g.step, "{name} at {eta}: {}", p.minimizer);
        }
    }
}

#[test]
fn conditional_risk_by_hand() {
    let h = loss("hinge");
    // η(1 - α)₊ + (1 - η)(1 + α)₊ at α = 0.5, η = 0.25
    assert_eq!(conditional_risk(&h, 0.25, 0.5), 0.25 * 0.5 + 0.75 * 1.5);
    let pts = [WeightedEta { mass: 0.25, eta: 0.9 }, WeightedEta { mass: 0.75, eta: 0.2 }];
    let r = classification_risk(&loss("zero_one"), &pts, &[1.0, 1.0]);
    assert!((r - (0.25 * 0.1 + 0.75 * 0.8)).abs() < 1e-15);
    let best = minimal_classification_risk(&loss("zero_one"), &pts, &Grid::new(-1.0, 1.0, 0.5).unwrap()).unwrap();
    assert!((best - (0.25 * 0.1 + 0.75 * 0.2)).abs() < 1e-15);
}

#[test]
fn psi_is_linear_for_symmetric_losses() {
    let g = Grid::new(-10.0, 10.0, 1e-3).unwrap();
    for theta in [0.0, 0.2, 0.4, 0.8, 1.0] {
        let psi = psi_transform(&loss("sigmoid"), theta, &g).unwrap();
        assert!((psi - 0.5 * theta).abs() <= 1e-3, "{theta}: {psi}");
        let psi = psi_transform(&loss("unhinged"), theta, &Grid::new(-1.0, 1.0, 1e-3).unwrap()).unwrap();
        assert!((psi - theta).abs() <= 1e-9, "{theta}: {psi}");
    }
    assert!(psi_transform(&loss("sigmoid"), 1.5, &g).is_err());
}

#[test]
fn eta_probe_examples() {
    assert!(eta_recovery_probe(&loss("squared"), &[0.6, 0.7, 0.9]).unwrap());
    assert!(eta_recovery_probe(&loss("logistic"), &[0.6, 0.7, 0.9]).unwrap());
    assert!(!eta_recovery_probe(&loss("sigmoid"), &[0.6, 0.7, 0.9]).unwrap());
    assert!(!eta_recovery_probe(&loss("ramp"), &[0.1, 0.3, 0.9]).unwrap());
    assert!(matches!(eta_recovery_probe(&loss("squared"), &[0.3, 0.8]), Err(Error::InvalidInput(_))));
}

#[test]
fn pairwise_risk_on_the_three_point_support() {
    let pm = Loss::PointMass;
    let supports: Vec<(Vec<f64>, f64)> = vec![(vec![0.0], 1.0), (vec![1.0], 0.5), (vec![2.0], 0.0)];
    let on = |g: [f64; 3]| move |x: &[f64]| g[x[0] as usize];
    let risk = |g| pairwise_discrete_auc_risk(&pm, &supports, &on(g)).unwrap();
    assert_eq!(risk([1.0, 0.0, 0.0]), -1.5);
    assert_eq!(risk([2.0, 1.0, 0.0]), -1.0);
    assert_eq!(risk([0.0, 0.0, 0.0]), 0.0);
    assert_eq!(risk([1.0, 1.0, 0.0]), -1.5);
    assert!(pairwise_discrete_auc_risk(&pm, &supports[..1], &on([0.0; 3])).is_err());
    let bad = vec![(vec![0.0], 1.2), (vec![1.0], 0.0)];
    assert!(pairwise_discrete_auc_risk(&pm, &bad, &on([0.0; 3])).is_err());
}

#[test]
fn counterexample_table_shape() {
    let t = counterexample_table();
    assert_eq!(t.function_names, ["g1", "g2", "g3", "g4"]);
    let scores: Vec<f64> = t.scores.iter().map(|q| q.to_f64()).collect();
    assert_eq!(scores, [-1.5, -1.0, 0.0, -1.5]);
    assert_eq!(t.minimizers, ["g1", "g4"]);
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[0], "pair,eta_i-eta_j,g1,g2,g3,g4");
    assert!(lines[7].starts_with("score,"));
}

#[test]
fn auc_consistency_probe_separates_the_losses() {
    let w = find_auc_inconsistency(&Loss::PointMass, 10, 0).unwrap().expect("witness");
    assert_eq!(w.etas.len(), w.scores.len());
    assert!(!auc_consistency_probe(&Loss::PointMass, 10, 0).unwrap());
    assert!(auc_consistency_probe(&loss("sigmoid"), 20, 1).unwrap());
    assert!(auc_consistency_probe(&loss("unhinged"), 20, 1).unwrap());
    assert!(matches!(auc_consistency_probe(&loss("squared"), 5, 0), Err(Error::Unsupported(_))));
}
