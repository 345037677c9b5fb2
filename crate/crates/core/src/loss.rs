//! Margin losses `ℓ(z)` where `z = y·g(x)`.
//!
//! Every loss carries the metadata the rest of the crate relies on: whether
//! `ℓ(z) + ℓ(-z)` is constant, the infima of `ℓ` over the two half-lines,
//! and the domain on which its conditional risk minimizer is unique.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default barrier slope used when a descriptor omits `b`.
pub const BARRIER_DEFAULT_B: f64 = 200.0;
/// Default barrier half-width used when a descriptor omits `r`.
pub const BARRIER_DEFAULT_R: f64 = 50.0;

/// Names accepted by [`make_loss`], in table order.
pub const ZOO_NAMES: [&str; 9] = [
    "zero_one", "squared", "hinge", "logistic", "savage", "ramp", "sigmoid", "unhinged", "barrier",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    ZeroOne,
    Squared,
    Hinge,
    Logistic,
    Savage,
    Ramp,
    Sigmoid,
    Unhinged,
    Barrier { b: f64, r: f64 },
    /// `ℓ ≡ c`. Never calibrated; used to exercise the negative branch of the
    /// calibration test.
    Constant { c: f64 },
    /// Symmetric step loss with `ℓ(1) = 0`, `ℓ(-1) = 1` and `0.5` elsewhere.
    /// Calibrated but not AUC-consistent.
    PointMass,
}

/// How `ℓ(z) + ℓ(-z)` behaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Symmetry {
    /// Constant `k` on all of ℝ.
    Full { k: f64 },
    /// Constant `k` for `|z| <= half_width` only.
    Band { half_width: f64, k: f64 },
    None,
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }

    pub fn clamp(&self, z: f64) -> f64 {
        z.clamp(self.lo, self.hi)
    }
}

/// Build a loss by name. Parameters are only meaningful for `barrier`;
/// missing barrier parameters fall back to `b = 200`, `r = 50`.
pub fn make_loss(name: &str, params: &[(&str, f64)]) -> Result<Loss> {
    let reject_params = |loss: Loss| {
        if let Some((key, _)) = params.first() {
            Err(Error::BadDescriptor(format!(
                "loss `{name}` takes no parameters (got `{key}`)"
            )))
        } else {
            Ok(loss)
        }
    };
    match name {
        "zero_one" => reject_params(Loss::ZeroOne),
        "squared" => reject_params(Loss::Squared),
        "hinge" => reject_params(Loss::Hinge),
        "logistic" => reject_params(Loss::Logistic),
        "savage" => reject_params(Loss::Savage),
        "ramp" => reject_params(Loss::Ramp),
        "sigmoid" => reject_params(Loss::Sigmoid),
        "unhinged" => reject_params(Loss::Unhinged),
        "barrier" => {
            let mut b = BARRIER_DEFAULT_B;
            let mut r = BARRIER_DEFAULT_R;
            for &(key, value) in params {
                match key {
                    "b" => b = value,
                    "r" => r = value,
                    other => {
                        return Err(Error::BadDescriptor(format!(
                            "barrier has no parameter `{other}`"
                        )))
                    }
                }
            }
            Loss::barrier(b, r)
        }
        other => Err(Error::UnknownLoss(other.to_string())),
    }
}

#[inline]
fn sigmoid_of_neg(z: f64) -> f64 {
    // 1 / (1 + e^z), evaluated without overflow.
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl Loss {
    pub fn barrier(b: f64, r: f64) -> Result<Loss> {
        if !(b > 1.0) || !b.is_finite() {
            return Err(Error::ParamDomain(format!("barrier requires b > 1, got b = {b}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::ParamDomain(format!("barrier requires r > 0, got r = {r}")));
        }
        Ok(Loss::Barrier { b, r })
    }

    pub fn constant(c: f64) -> Loss {
        Loss::Constant { c }
    }

    /// The nine losses that [`make_loss`] knows about, barrier at its defaults.
    pub fn zoo() -> Vec<Loss> {
        ZOO_NAMES
            .iter()
            .map(|name| make_loss(name, &[]).expect("zoo names are valid"))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::ZeroOne => "zero_one",
            Loss::Squared => "squared",
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
            Loss::Savage => "savage",
            Loss::Ramp => "ramp",
            Loss::Sigmoid => "sigmoid",
            Loss::Unhinged => "unhinged",
            Loss::Barrier { .. } => "barrier",
            Loss::Constant { .. } => "constant",
            Loss::PointMass => "point_mass",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Loss::Barrier { b, r } => vec![("b", b), ("r", r)],
            Loss::Constant { c } => vec![("c", c)],
            _ => Vec::new(),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Loss::ZeroOne => {
                if z > 0.0 {
                    0.0
                } else if z < 0.0 {
                    1.0
                } else {
                    0.5
                }
            }
            Loss::Squared => (1.0 - z) * (1.0 - z),
            Loss::Hinge => (1.0 - z).max(0.0),
            Loss::Logistic => {
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            Loss::Savage => {
                let s = sigmoid_of_neg(2.0 * z);
                s * s
            }
            Loss::Ramp => (0.5 - 0.5 * z).clamp(0.0, 1.0),
            Loss::Sigmoid => sigmoid_of_neg(z),
            Loss::Unhinged => 1.0 - z,
            Loss::Barrier { b, r } => (-b * (r + z) + r).max((b * (z - r)).max(r - z)),
            Loss::Constant { c } => c,
            Loss::PointMass => {
                if z == 1.0 {
                    0.0
                } else if z == -1.0 {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }

    /// A subderivative of `ℓ` at `z`.
    ///
    /// At kinks the right derivative is used, except for the barrier whose
    /// kinks take the steep slope (`-b` on the left, `b` on the right).
    pub fn deriv(&self, z: f64) -> Result<f64> {
        let d = match *self {
            Loss::ZeroOne | Loss::PointMass => {
                return Err(Error::Unsupported(format!(
                    "`{}` is evaluation-only and has no usable gradient",
                    self.name()
                )))
            }
            Loss::Squared => -2.0 * (1.0 - z),
            Loss::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Logistic => -sigmoid_of_neg(z),
            Loss::Savage => {
                let s = sigmoid_of_neg(2.0 * z);
                -4.0 * s * s * (1.0 - s)
            }
            Loss::Ramp => {
                if (-1.0..1.0).contains(&z) {
                    -0.5
                } else {
                    0.0
                }
            }
            Loss::Sigmoid => {
                let s = sigmoid_of_neg(z);
                -s * (1.0 - s)
            }
            Loss::Unhinged => -1.0,
            Loss::Barrier { b, r } => {
                if z <= Self::barrier_left_kink(b, r) {
                    -b
                } else if z < r {
                    -1.0
                } else {
                    b
                }
            }
            Loss::Constant { .. } => 0.0,
        };
        Ok(d)
    }

    /// Where the left barrier arm `-b(r+z)+r` overtakes `r-z`.
    pub fn barrier_left_kink(b: f64, r: f64) -> f64 {
        -b * r / (b - 1.0)
    }

    /// Points where `deriv` is only a one-sided choice.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Loss::ZeroOne => vec![0.0],
            Loss::Hinge => vec![1.0],
            Loss::Ramp => vec![-1.0, 1.0],
            Loss::Barrier { b, r } => vec![Self::barrier_left_kink(b, r), r],
            Loss::PointMass => vec![-1.0, 1.0],
            _ => Vec::new(),
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        match *self {
            Loss::ZeroOne | Loss::Ramp | Loss::Sigmoid | Loss::PointMass => Symmetry::Full { k: 1.0 },
            Loss::Unhinged => Symmetry::Full { k: 2.0 },
            Loss::Constant { c } => Symmetry::Full { k: 2.0 * c },
            Loss::Barrier { r, .. } => Symmetry::Band {
                half_width: r,
                k: 2.0 * r,
            },
            Loss::Squared | Loss::Hinge | Loss::Logistic | Loss::Savage => Symmetry::None,
        }
    }

    /// `K` for losses symmetric on all of ℝ.
    pub fn symmetry_constant(&self) -> Option<f64> {
        match self.symmetry() {
            Symmetry::Full { k } => Some(k),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_constant().is_some()
    }

    pub fn is_convex(&self) -> bool {
        matches!(
            self,
            Loss::Squared
                | Loss::Hinge
                | Loss::Logistic
                | Loss::Unhinged
                | Loss::Barrier { .. }
                | Loss::Constant { .. }
        )
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Loss::ZeroOne | Loss::PointMass)
    }

    /// Whether `η` can be read back from the conditional risk minimizer.
    pub fn recovers_eta(&self) -> bool {
        matches!(self, Loss::Squared | Loss::Logistic | Loss::Savage)
    }

    /// Interval on which the conditional risk minimizer is unique, if the
    /// loss needs one.
    pub fn clamp_domain(&self) -> Option<Interval> {
        match self {
            Loss::Ramp | Loss::Sigmoid | Loss::Unhinged => Some(Interval::new(-1.0, 1.0)),
            _ => None,
        }
    }

    /// `inf_{α>0} ℓ(α)` over ℝ; over the clamp domain for the unhinged loss,
    /// which is unbounded below.
    pub fn inf_pos(&self) -> f64 {
        match *self {
            Loss::Constant { c } => c,
            _ => 0.0,
        }
    }

    /// `inf_{α≤0} ℓ(α)`, same domain convention as [`Loss::inf_pos`].
    pub fn inf_nonpos(&self) -> f64 {
        match *self {
            Loss::ZeroOne | Loss::Ramp | Loss::Sigmoid | Loss::PointMass => 0.5,
            Loss::Squared | Loss::Hinge | Loss::Unhinged => 1.0,
            Loss::Logistic => std::f64::consts::LN_2,
            Loss::Savage => 0.25,
            Loss::Barrier { r, .. } => r,
            Loss::Constant { c } => c,
        }
    }

    /// The closed-form conditional risk minimizer `f*(η)`, where one exists.
    ///
    /// Sign-type minimizers use `M = 1` except the barrier, whose minimizer
    /// sits at the edge of its symmetric band, `r·sign(η - 1/2)`.
    pub fn bayes_minimizer(&self, eta: f64) -> Option<f64> {
        let sign = |v: f64| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let logit = (eta / (1.0 - eta)).ln();
        match *self {
            Loss::ZeroOne | Loss::Hinge | Loss::Ramp | Loss::Sigmoid | Loss::Unhinged => {
                Some(sign(eta - 0.5))
            }
            Loss::Squared => Some(2.0 * eta - 1.0),
            Loss::Logistic => Some(logit),
            Loss::Savage => Some(0.5 * logit),
            Loss::Barrier { r, .. } => Some(r * sign(eta - 0.5)),
            Loss::Constant { .. } | Loss::PointMass => None,
        }
    }

    /// Human-readable form of [`Loss::bayes_minimizer`].
    pub fn minimizer_formula(&self) -> &'static str {
        match self {
            Loss::ZeroOne | Loss::Hinge | Loss::Ramp | Loss::Sigmoid | Loss::Unhinged => {
                "sign(eta-0.5)"
            }
            Loss::Squared => "2*eta-1",
            Loss::Logistic => "log(eta/(1-eta))",
            Loss::Savage => "0.5*log(eta/(1-eta))",
            Loss::Barrier { .. } => "r*sign(eta-0.5)",
            Loss::Constant { .. } => "any",
            Loss::PointMass => "sign(eta-0.5)",
        }
    }

    /// Closed-form expression of `ℓ(z)`.
    pub fn formula(&self) -> String {
        match *self {
            Loss::ZeroOne => "-0.5*sign(z)+0.5".into(),
            Loss::Squared => "(1-z)^2".into(),
            Loss::Hinge => "max(0,1-z)".into(),
            Loss::Logistic => "log(1+exp(-z))".into(),
            Loss::Savage => "1/(1+exp(2z))^2".into(),
            Loss::Ramp => "max(0,min(1,0.5-0.5z))".into(),
            Loss::Sigmoid => "1/(1+exp(z))".into(),
            Loss::Unhinged => "1-z".into(),
            Loss::Barrier { b, r } => format!("max(-{b}({r}+z)+{r},max({b}(z-{r}),{r}-z))"),
            Loss::Constant { c } => format!("{c}"),
            Loss::PointMass => "0 at 1, 1 at -1, 0.5 elsewhere".into(),
        }
    }
}

/// `ℓ(z) + ℓ(-z)`.
pub fn symmetry_defect(loss: &Loss, z: f64) -> f64 {
    loss.eval(z) + loss.eval(-z)
}

/// Subderivative of a trainable loss; rejects the zero-one loss.
pub fn loss_grad(loss: &Loss, z: f64) -> Result<f64> {
    loss.deriv(z)
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        if params.is_empty() {
            return f.write_str(self.name());
        }
        write!(f, "{}(", self.name())?;
        for (i, (key, value)) in params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{key}={value}")?;
        }
        f.write_str(")")
    }
}

/// Parses `name` or `name(key=value,...)`.
impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::BadDescriptor(s.to_string());
        let (name, args) = match s.find('(') {
            None => (s, ""),
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
                (s[..open].trim(), inner)
            }
        };
        if name.is_empty() {
            return Err(bad());
        }
        let mut params = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            params.push((key.trim(), value));
        }
        match name {
            "constant" => {
                let c = match params.as_slice() {
                    [] => 1.0,
                    [("c", c)] => *c,
                    _ => return Err(bad()),
                };
                Ok(Loss::constant(c))
            }
            "point_mass" if params.is_empty() => Ok(Loss::PointMass),
            _ => make_loss(name, &params),
        }
    }
}

impl serde::Serialize for Loss {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Loss {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
