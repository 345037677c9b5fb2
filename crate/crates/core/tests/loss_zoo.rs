use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use symloss::loss::{loss_grad, symmetry_defect, Symmetry};
use symloss::{make_loss, Error, Loss};

fn loss(s: &str) -> Loss {
    s.parse().unwrap()
}

/// Closed forms written out independently of the library.
fn oracle(name: &str, z: f64) -> f64 {
    match name {
        "zero_one" => {
            if z > 0.0 {
                0.0
            } else if z < 0.0 {
                1.0
            } else {
                0.5
            }
        }
        "squared" => (1.0 - z) * (1.0 - z),
        "hinge" => (1.0 - z).max(0.0),
        "logistic" => (1.0 + (-z).exp()).ln(),
        "savage" => 1.0 / ((1.0 + (2.0 * z).exp()) * (1.0 + (2.0 * z).exp())),
        "ramp" => (0.5 - 0.5 * z).clamp(0.0, 1.0),
        "sigmoid" => 1.0 / (1.0 + z.exp()),
        "unhinged" => 1.0 - z,
        "barrier" => (-200.0 * (50.0 + z) + 50.0).max((200.0 * (z - 50.0)).max(50.0 - z)),
        _ => unreachable!(),
    }
}

const NAMES: [&str; 9] = ["zero_one", "squared", "hinge", "logistic", "savage", "ramp", "sigmoid", "unhinged", "barrier"];

#[test]
fn point_values() {
    assert_eq!(loss("sigmoid").eval(0.0), 0.5);
    assert_eq!(loss("savage").eval(0.0), 0.25);
    assert_eq!(loss("barrier(b=200,r=50)").eval(50.0), 0.0);
    // half-scaled barrier with b = 10, r = 1
    let b = make_loss("barrier", &[("b", 10.0), ("r", 1.0)]).unwrap();
    let half: Vec<f64> = [-1.0, 0.0, 1.0].iter().map(|&z| 0.5 * b.eval(z)).collect();
    assert_eq!(half, [1.0, 0.5, 0.0]);
}

#[test]
fn zoo_matches_closed_forms() {
    let zs: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.25).collect();
    for name in NAMES {
        let l = loss(name);
        assert_eq!(l.name(), name);
        for &z in &zs {
            let (got, want) = (l.eval(z), oracle(name, z));
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{name}({z}) = {got}, want {want}");
        }
    }
}

#[test]
fn symmetry_sums() {
    assert_abs_diff_eq!(symmetry_defect(&loss("sigmoid"), 3.7), 1.0, epsilon = 1e-15);
    assert_eq!(symmetry_defect(&loss("barrier(b=200,r=50)"), 10.0), 100.0);
    assert_eq!(symmetry_defect(&loss("hinge"), 2.0), 3.0);
}

#[test]
fn symmetric_flags_follow_the_zoo_table() {
    let symmetric: Vec<&str> = NAMES.iter().copied().filter(|n| loss(n).is_symmetric()).collect();
    assert_eq!(symmetric, ["zero_one", "ramp", "sigmoid", "unhinged"]);
    let convex: Vec<&str> = NAMES.iter().copied().filter(|n| loss(n).is_convex()).collect();
    assert_eq!(convex, ["squared", "hinge", "logistic", "unhinged", "barrier"]);
    assert!(matches!(loss("barrier").symmetry(), Symmetry::Band { .. }));
}

#[test]
fn symmetric_losses_on_the_dense_grid() {
    for name in ["zero_one", "ramp", "sigmoid", "unhinged"] {
        let l = loss(name);
        let k = l.symmetry_constant().unwrap();
        let worst = (0..=10_000)
            .map(|i| -50.0 + 100.0 * i as f64 / 10_000.0)
            .map(|z| (symmetry_defect(&l, z) - k).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{name}: {worst}");
    }
}

#[test]
fn gradient_examples() {
    assert_eq!(loss_grad(&loss("unhinged"), 0.3).unwrap(), -1.0);
    assert_abs_diff_eq!(loss_grad(&loss("sigmoid"), 0.0).unwrap(), -0.25, epsilon = 1e-15);
    assert_eq!(loss_grad(&loss("hinge"), 1.0).unwrap(), 0.0);
    // steep sides at the barrier kinks; the left one is where -b(r+z)+r meets
    // r-z, at -br/(b-1), and z = -r itself is inside the unit-slope piece
    let b = loss("barrier(b=200,r=50)");
    let left = -200.0 * 50.0 / 199.0;
    assert_eq!(b.kinks(), vec![left, 50.0]);
    assert_eq!(loss_grad(&b, 50.0).unwrap(), 200.0);
    assert_eq!(loss_grad(&b, left).unwrap(), -200.0);
    assert_eq!(loss_grad(&b, -50.0).unwrap(), -1.0);
    assert!(matches!(loss_grad(&loss("zero_one"), 0.5), Err(Error::Unsupported(_))));
}

#[test]
fn hinge_kink_sits_between_one_sided_differences() {
    let h = loss("hinge");
    let left = (h.eval(1.0) - h.eval(1.0 - 1e-6)) / 1e-6;
    let right = (h.eval(1.0 + 1e-6) - h.eval(1.0)) / 1e-6;
    let g = loss_grad(&h, 1.0).unwrap();
    assert!(left - 1e-9 <= g && g <= right + 1e-9);
}

#[test]
fn constructor_errors() {
    assert!(matches!(make_loss("exponential", &[]), Err(Error::UnknownLoss(_))));
    assert!(matches!(make_loss("barrier", &[("b", 1.0), ("r", 50.0)]), Err(Error::ParamDomain(_))));
    assert!(matches!(make_loss("barrier", &[("b", 200.0), ("r", 0.0)]), Err(Error::ParamDomain(_))));
    assert!("barrier(b=200".parse::<Loss>().is_err());
    assert!("barrier(b=x)".parse::<Loss>().is_err());
}

proptest! {
    #[test]
    fn barrier_band_sums_to_2r(b in 1.001f64..500.0, r in 0.01f64..100.0, t in -1.0f64..=1.0) {
        let l = make_loss("barrier", &[("b", b), ("r", r)]).unwrap();
        let z = t * r;
        prop_assert!((symmetry_defect(&l, z) - 2.0 * r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn barrier_leaves_the_band_with_a_penalty(b in 1.5f64..500.0, r in 0.01f64..100.0, t in 1.01f64..5.0) {
        let l = make_loss("barrier", &[("b", b), ("r", r)]).unwrap();
        prop_assert!(symmetry_defect(&l, t * r) > 2.0 * r);
    }

    #[test]
    fn descriptors_round_trip(i in 0usize..9, b in 1.001f64..1e3, r in 0.001f64..1e3) {
        let l = if NAMES[i] == "barrier" {
            make_loss("barrier", &[("b", b), ("r", r)]).unwrap()
        } else {
            loss(NAMES[i])
        };
        prop_assert_eq!(l.to_string().parse::<Loss>().unwrap(), l);
    }

    #[test]
    fn derivatives_match_central_differences(i in 1usize..9, z in -60.0f64..60.0) {
        let l = loss(NAMES[i]);
        prop_assume!(l.kinks().iter().all(|k| (z - k).abs() >= 1e-3));
        let h = 1e-5;
        let fd = (l.eval(z + h) - l.eval(z - h)) / (2.0 * h);
        let g = loss_grad(&l, z).unwrap();
        prop_assert!((g - fd).abs() / g.abs().max(1.0) <= 1e-6, "{} at {}: {} vs {}", NAMES[i], z, g, fd);
    }

    #[test]
    fn convex_losses_pass_midpoint_checks(i in 1usize..9, a in -60.0f64..60.0, c in -60.0f64..60.0) {
        let l = loss(NAMES[i]);
        prop_assume!(l.is_convex());
        let chord = 0.5 * (l.eval(a) + l.eval(c));
        prop_assert!(l.eval(0.5 * (a + c)) <= chord + 1e-12 * chord.abs().max(1.0));
    }
}

#[test]
fn non_convex_losses_fail_some_midpoint_check() {
    for name in ["zero_one", "savage", "ramp", "sigmoid"] {
        let l = loss(name);
        let found = (0..1000).any(|k| {
            let a = -3.0 + 6.0 * (k as f64) / 1000.0;
            let c = a + 2.5;
            l.eval(0.5 * (a + c)) > 0.5 * (l.eval(a) + l.eval(c)) + 1e-12
        });
        assert!(found, "{name} looked convex");
    }
}
