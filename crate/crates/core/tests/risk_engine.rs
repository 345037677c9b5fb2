// Index loops spell out the double sums the library is checked against.
#![allow(clippy::needless_range_loop)]

use ndarray::{array, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use symloss::risk::*;
use symloss::rng::stream_rng;
use symloss::{Error, Loss};

fn loss(s: &str) -> Loss {
    s.parse().unwrap()
}

fn pt(x: f64, p_pos: f64, p_neg: f64) -> SupportPoint {
    SupportPoint { x: vec![x], p_pos, p_neg }
}

fn random_dist(n: usize, seed: u64) -> DiscreteDist {
    let mut rng = stream_rng(seed, 900);
    let pos: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let neg: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let (sp, sn): (f64, f64) = (pos.iter().sum(), neg.iter().sum());
    DiscreteDist::new((0..n).map(|i| pt(rng.random_range(-2.0..2.0), pos[i] / sp, neg[i] / sn)).collect()).unwrap()
}

/// Plain nested loops over the mixture masses.
struct Oracle {
    x: Vec<f64>,
    p: Vec<f64>,
    n: Vec<f64>,
}

impl Oracle {
    fn of(d: &DiscreteDist) -> Self {
        Oracle {
            x: d.points().iter().map(|p| p.x[0]).collect(),
            p: d.points().iter().map(|p| p.p_pos).collect(),
            n: d.points().iter().map(|p| p.p_neg).collect(),
        }
    }

    fn mix(&self, w: f64) -> Vec<f64> {
        self.p.iter().zip(&self.n).map(|(p, n)| w * p + (1.0 - w) * n).collect()
    }

    fn ber(&self, l: &Loss, g: impl Fn(f64) -> f64, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.x.len() {
            s += a[i] * l.eval(g(self.x[i])) + b[i] * l.eval(-g(self.x[i]));
        }
        0.5 * s
    }

    fn auc(&self, l: &Loss, g: impl Fn(f64) -> f64, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.x.len() {
            for j in 0..self.x.len() {
                s += a[i] * b[j] * l.eval(g(self.x[i]) - g(self.x[j]));
            }
        }
        s
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn risks_match_nested_loops() {
    let g = |x: f64| 1.3 * x - 0.2;
    for seed in 0..5 {
        let d = random_dist(7, seed);
        let o = Oracle::of(&d);
        let scorer = |x: &[f64]| g(x[0]);
        for name in ["sigmoid", "logistic", "hinge", "savage", "ramp", "squared"] {
            let l = loss(name);
            assert!(close(ber_risk(&l, &d, &scorer), o.ber(&l, g, &o.p, &o.n)));
            assert!(close(auc_risk(&l, &d, &scorer), o.auc(&l, g, &o.p, &o.n)));
            for noise in NoiseSpec::grid() {
                let (cp, cn) = (o.mix(noise.pi), o.mix(noise.pi_prime));
                assert!(close(ber_corr_risk(&l, &d, noise, &scorer), o.ber(&l, g, &cp, &cn)), "{name}");
                assert!(close(auc_corr_risk(&l, &d, noise, &scorer), o.auc(&l, g, &cp, &cn)), "{name}");
            }
        }
    }
}

#[test]
fn logistic_auc_identity_term_by_term() {
    let d = random_dist(6, 42);
    let o = Oracle::of(&d);
    let l = loss("logistic");
    let g = |x: f64| 2.0 * (x * 0.7).sin() + 0.3 * x;
    let scorer = |x: &[f64]| g(x[0]);
    let (pi, pip) = (0.8, 0.3);
    let noise = NoiseSpec::new(pi, pip).unwrap();
    let gamma = |i: usize, j: usize| l.eval(g(o.x[j]) - g(o.x[i])) + l.eval(g(o.x[i]) - g(o.x[j]));
    let pair = |a: &[f64], b: &[f64]| {
        let mut s = 0.0;
        for i in 0..o.x.len() {
            for j in 0..o.x.len() {
                s += a[i] * b[j] * gamma(i, j);
            }
        }
        s
    };
    let expansion = (pi - pip) * o.auc(&l, g, &o.p, &o.n)
        + (1.0 - pi) * pip * pair(&o.p, &o.n)
        + pi * pip / 2.0 * pair(&o.p, &o.p)
        + (1.0 - pi) * (1.0 - pip) / 2.0 * pair(&o.n, &o.n);
    assert!(close(auc_corr_risk(&l, &d, noise, &scorer), expansion));
    let dec = verify_auc_decomposition(&l, &d, noise, &scorer);
    assert!(close(dec.scale * dec.clean_risk + dec.excess, expansion));
}

#[test]
fn ber_examples() {
    let zo = loss("zero_one");
    let d = DiscreteDist::new(vec![pt(1.0, 1.0, 0.0), pt(-1.0, 0.0, 1.0)]).unwrap();
    assert_eq!(ber_risk(&zo, &d, &|_: &[f64]| 0.0), 0.5);
    assert_eq!(ber_risk(&zo, &d, &|x: &[f64]| x[0]), 0.0);
    assert_eq!(auc_risk(&zo, &d, &|x: &[f64]| x[0]), 0.0);
    let single = DiscreteDist::new(vec![pt(0.0, 1.0, 1.0)]).unwrap();
    assert_eq!(ber_risk(&loss("sigmoid"), &single, &|_: &[f64]| 0.0), 0.5);
}

#[test]
fn clean_noise_reduces_to_clean_risks() {
    let d = random_dist(9, 3);
    let s = |x: &[f64]| x[0] * 3.0;
    for name in ["hinge", "savage", "barrier"] {
        let l = loss(name);
        assert!(close(ber_corr_risk(&l, &d, NoiseSpec::clean(), &s), ber_risk(&l, &d, &s)));
        assert!(close(auc_corr_risk(&l, &d, NoiseSpec::clean(), &s), auc_risk(&l, &d, &s)));
    }
}

#[test]
fn symmetric_losses_are_affine_in_the_clean_risk() {
    let d = random_dist(8, 5);
    let s = |x: &[f64]| 4.0 * x[0] - 1.0;
    for name in ["sigmoid", "ramp", "unhinged", "zero_one"] {
        let l = loss(name);
        let k = l.symmetry_constant().unwrap();
        for noise in NoiseSpec::grid() {
            let off = k * (1.0 - noise.pi + noise.pi_prime) / 2.0;
            assert!(close(ber_corr_risk(&l, &d, noise, &s), noise.scale() * ber_risk(&l, &d, &s) + off), "{name}");
            assert!(close(auc_corr_risk(&l, &d, noise, &s), noise.scale() * auc_risk(&l, &d, &s) + off), "{name}");
        }
        // constant scorer: every pair margin is 0 and ℓ(0) = K/2
        assert!(close(auc_risk(&l, &d, &|_: &[f64]| 0.7), k / 2.0));
    }
}

#[test]
fn hinge_excess_moves_with_the_scorer() {
    let d = DiscreteDist::new(vec![pt(-1.0, 0.2, 0.7), pt(1.0, 0.8, 0.3)]).unwrap();
    let noise = NoiseSpec::new(0.8, 0.3).unwrap();
    let h = loss("hinge");
    let wide = |x: &[f64]| 3.0 * x[0];
    let tight = |x: &[f64]| 0.2 * x[0];
    let (a, b) = (
        verify_ber_decomposition(&h, &d, noise, &wide),
        verify_ber_decomposition(&h, &d, noise, &tight),
    );
    assert!((a.excess - b.excess).abs() > 1e-3);
    // the affine formula of the symmetric case misses by the excess
    let affine = noise.scale() * a.clean_risk + (1.0 - noise.pi + noise.pi_prime) / 2.0;
    assert!((a.corrupted_risk - affine).abs() > 1e-3);
    let (a, b) = (
        verify_auc_decomposition(&h, &d, noise, &wide),
        verify_auc_decomposition(&h, &d, noise, &tight),
    );
    assert!((a.excess - b.excess).abs() > 1e-3);
}

#[test]
fn squared_loss_zero_scorer_excess() {
    let d = random_dist(5, 8);
    let sq = loss("squared");
    for noise in NoiseSpec::grid() {
        let dec = verify_ber_decomposition(&sq, &d, noise, &|_: &[f64]| 0.0);
        assert!(close(dec.excess, noise.pi_prime + (1.0 - noise.pi)));
        assert!(dec.reconstruction_defect <= 1e-12);
    }
    let dec = verify_ber_decomposition(&loss("savage"), &d, NoiseSpec::new(0.7, 0.4).unwrap(), &|x: &[f64]| x[0]);
    assert!(dec.reconstruction_defect <= 1e-12);
}

#[test]
fn clean_auc_identity_has_no_excess() {
    let d = random_dist(6, 13);
    let s = |x: &[f64]| x[0];
    let dec = verify_auc_decomposition(&loss("squared"), &d, NoiseSpec::clean(), &s);
    assert_eq!(dec.scale, 1.0);
    assert_eq!(dec.excess, 0.0);
    assert!(dec.reconstruction_defect <= 1e-12);
}

fn draw(d: &DiscreteDist, w: f64, n: usize, seed: u64) -> Array2<f64> {
    let weights: Vec<f64> = d.points().iter().map(|p| w * p.p_pos + (1.0 - w) * p.p_neg).collect();
    let idx = WeightedIndex::new(&weights).unwrap();
    let mut rng = stream_rng(seed, 901);
    Array2::from_shape_fn((n, 1), |_| d.points()[idx.sample(&mut rng)].x[0])
}

#[test]
fn empirical_estimators_converge() {
    let d = random_dist(12, 21);
    let noise = NoiseSpec::new(0.7, 0.4).unwrap();
    let s = |x: &[f64]| 2.0 * x[0] + 0.5;
    let n = 100_000;
    let cp = draw(&d, noise.pi, n, 1);
    let cn = draw(&d, noise.pi_prime, n, 2);
    for name in ["sigmoid", "ramp", "savage", "zero_one"] {
        let l = loss(name);
        let exact = ber_corr_risk(&l, &d, noise, &s);
        let emp = empirical_ber_corr(&l, cp.view(), cn.view(), &s).unwrap();
        assert!((emp - exact).abs() <= 0.01, "{name}: {emp} vs {exact}");
        let exact = auc_corr_risk(&l, &d, noise, &s);
        let emp = empirical_auc_corr(&l, cp.view(), cn.view(), &s, n, 3).unwrap();
        assert!((emp - exact).abs() <= 0.01, "{name}: {emp} vs {exact}");
    }
}

#[test]
fn empirical_ber_examples() {
    let un = loss("unhinged");
    let cp = array![[0.5], [2.0]];
    let cn = array![[-1.0]];
    let s = |x: &[f64]| x[0];
    // ½[((1 - 0.5) + (1 - 2)) / 2 + (1 + (-1))]
    assert_eq!(empirical_ber_corr(&un, cp.view(), cn.view(), &s).unwrap(), 0.5 * (-0.25 + 0.0));

    // one pattern per side = a point mass at each pattern
    let l = loss("logistic");
    let (a, b) = (array![[0.3]], array![[0.9]]);
    let d = DiscreteDist::new(vec![pt(0.3, 1.0, 0.0), pt(0.9, 0.0, 1.0)]).unwrap();
    let emp = empirical_ber_corr(&l, a.view(), b.view(), &s).unwrap();
    assert!(close(emp, ber_corr_risk(&l, &d, NoiseSpec::clean(), &s)));

    let perfect = empirical_ber_corr(&loss("zero_one"), array![[1.0], [2.0]].view(), array![[-3.0]].view(), &s).unwrap();
    assert_eq!(perfect, 0.0);
    let empty = Array2::<f64>::zeros((0, 1));
    assert!(matches!(empirical_ber_corr(&un, empty.view(), cn.view(), &s), Err(Error::InvalidInput(_))));
    assert!(empirical_auc_corr(&un, cp.view(), empty.view(), &s, 10, 0).is_err());
    assert!(empirical_auc_corr(&un, cp.view(), cn.view(), &s, 0, 0).is_err());
}

#[test]
fn empirical_auc_modes() {
    let mut rng = stream_rng(4, 902);
    let cp = Array2::from_shape_fn((30, 2), |_| rng.random_range(-1.0..2.0));
    let cn = Array2::from_shape_fn((20, 2), |_| rng.random_range(-2.0..1.0));
    let s = |x: &[f64]| x[0] - 0.5 * x[1];
    let l = loss("sigmoid");
    let mut oracle = 0.0;
    for a in cp.rows() {
        for b in cn.rows() {
            oracle += l.eval(s(a.as_slice().unwrap()) - s(b.as_slice().unwrap()));
        }
    }
    let full = empirical_auc_corr(&l, cp.view(), cn.view(), &s, 600, 0).unwrap();
    assert!(close(full, oracle / 600.0));
    let constant = empirical_auc_corr(&l, cp.view(), cn.view(), &|_: &[f64]| 1.0, 600, 0).unwrap();
    assert_eq!(constant, 0.5);
    let a = empirical_auc_corr(&l, cp.view(), cn.view(), &s, 100, 9).unwrap();
    let b = empirical_auc_corr(&l, cp.view(), cn.view(), &s, 100, 9).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_ne!(a, full);
}

#[test]
fn dist_and_noise_validation() {
    let d = DiscreteDist::from_json(r#"{"points":[{"x":[0.0],"p_pos":0.25,"p_neg":1.0},{"x":[1.0],"p_pos":0.75,"p_neg":0.0}]}"#).unwrap();
    assert_eq!(d.len(), 2);
    assert!(DiscreteDist::from_json(r#"{"points":[{"x":[0.0],"p_pos":0.5,"p_neg":1.0}]}"#).is_err());
    assert!(DiscreteDist::new(vec![pt(0.0, 1.2, 1.0), pt(1.0, -0.2, 0.0)]).is_err());
    let err = NoiseSpec::new(0.4, 0.6).unwrap_err();
    assert!(matches!(err, Error::NoiseSpec(_)));
    assert!(err.to_string().contains("flip"), "{err}");
    assert!(NoiseSpec::new(0.0, 0.0).is_err());
    assert!(NoiseSpec::new(1.0, 1.0).is_err());
}
