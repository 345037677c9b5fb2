//! One-hidden-layer ReLU scorer `g(x) = w2 · relu(W1 x + b1) + b2`, or the
//! linear scorer `g(x) = w · x + b` when `hidden = 0`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::Scorer;
use crate::rng::{stream_rng, streams};

/// Parameter block names, in the order of [`Mlp::blocks_mut`].
pub const BLOCK_NAMES: [&str; 4] = ["w1", "b1", "w2", "b2"];

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// `hidden × d`, or `1 × d` for the linear model.
    pub w1: Array2<f64>,
    /// Empty for the linear model.
    pub b1: Array1<f64>,
    /// Empty for the linear model.
    pub w2: Array1<f64>,
    pub b2: f64,
    pub hidden: usize,
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradAccum {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl GradAccum {
    pub fn zeros_like(m: &Mlp) -> Self {
        GradAccum {
            w1: Array2::zeros(m.w1.raw_dim()),
            b1: Array1::zeros(m.b1.len()),
            w2: Array1::zeros(m.w2.len()),
            b2: 0.0,
        }
    }

    pub fn zero(&mut self) {
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2 = 0.0;
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("w1", self.w1.as_slice().expect("standard layout")),
            ("b1", self.b1.as_slice().expect("standard layout")),
            ("w2", self.w2.as_slice().expect("standard layout")),
            ("b2", std::slice::from_ref(&self.b2)),
        ]
    }
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(d: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, streams::INIT);
        if hidden == 0 {
            let a = glorot_bound(d, 1);
            return Mlp {
                w1: Array2::from_shape_simple_fn((1, d), || rng.random_range(-a..=a)),
                b1: Array1::zeros(0),
                w2: Array1::zeros(0),
                b2: 0.0,
                hidden,
            };
        }
        let a1 = glorot_bound(d, hidden);
        let w1 = Array2::from_shape_simple_fn((hidden, d), || rng.random_range(-a1..=a1));
        let a2 = glorot_bound(hidden, 1);
        let w2 = Array1::from_shape_simple_fn(hidden, || rng.random_range(-a2..=a2));
        Mlp {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: 0.0,
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn is_linear(&self) -> bool {
        self.hidden == 0
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: ArrayView1<'_, f64>) -> f64 {
        if self.is_linear() {
            return self.w1.row(0).dot(&x) + self.b2;
        }
        let pre = self.w1.dot(&x) + &self.b1;
        pre.iter().zip(&self.w2).map(|(&p, &w)| w * p.max(0.0)).sum::<f64>() + self.b2
    }

    /// Hidden pre-activations for a batch (`n × hidden`).
    fn pre_activations(&self, xs: ArrayView2<'_, f64>) -> Array2<f64> {
        xs.dot(&self.w1.t()) + &self.b1
    }

    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(xs.ncols())?;
        if self.is_linear() {
            return Ok(xs.dot(&self.w1.row(0)) + self.b2);
        }
        let h = self.pre_activations(xs).mapv(|v| v.max(0.0));
        Ok(h.dot(&self.w2) + self.b2)
    }

    /// Adds `upstream · ∂g(x)/∂θ` to `acc`.
    pub fn backward_margin(&self, x: ArrayView1<'_, f64>, upstream: f64, acc: &mut GradAccum) -> Result<()> {
        self.check_dim(x.len())?;
        acc.b2 += upstream;
        if self.is_linear() {
            acc.w1.row_mut(0).scaled_add(upstream, &x);
            return Ok(());
        }
        let pre = self.w1.dot(&x) + &self.b1;
        for k in 0..self.hidden {
            if pre[k] > 0.0 {
                acc.w2[k] += upstream * pre[k];
                let delta = upstream * self.w2[k];
                acc.b1[k] += delta;
                acc.w1.row_mut(k).scaled_add(delta, &x);
            }
        }
        Ok(())
    }

    /// Adds `Σ_i upstream_i · ∂g(x_i)/∂θ` to `acc`.
    pub fn backward_batch(&self, xs: ArrayView2<'_, f64>, upstream: ArrayView1<'_, f64>, acc: &mut GradAccum) -> Result<()> {
        self.check_dim(xs.ncols())?;
        if xs.nrows() != upstream.len() {
            return Err(Error::Dimension {
                expected: xs.nrows(),
                got: upstream.len(),
            });
        }
        acc.b2 += upstream.sum();
        if self.is_linear() {
            let g = upstream.dot(&xs);
            acc.w1.row_mut(0).scaled_add(1.0, &g);
            return Ok(());
        }
        let pre = self.pre_activations(xs);
        let h = pre.mapv(|v| v.max(0.0));
        acc.w2.scaled_add(1.0, &upstream.dot(&h));
        let mut delta = pre;
        for (mut row, &u) in delta.axis_iter_mut(Axis(0)).zip(upstream) {
            row.zip_mut_with(&self.w2, |p, &w| *p = if *p > 0.0 { u * w } else { 0.0 });
        }
        acc.b1.scaled_add(1.0, &delta.sum_axis(Axis(0)));
        acc.w1.scaled_add(1.0, &delta.t().dot(&xs));
        Ok(())
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 4] {
        [
            ("w1", self.w1.as_slice_mut().expect("standard layout")),
            ("b1", self.b1.as_slice_mut().expect("standard layout")),
            ("w2", self.w2.as_slice_mut().expect("standard layout")),
            ("b2", std::slice::from_mut(&mut self.b2)),
        ]
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            input_dim: self.input_dim(),
            hidden: self.hidden,
            w1_shape: [self.w1.nrows(), self.w1.ncols()],
            w1: self.w1.iter().copied().collect(),
            b1: self.b1.to_vec(),
            w2: self.w2.to_vec(),
            b2: self.b2,
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        let rows = if c.hidden == 0 { 1 } else { c.hidden };
        let bias_len = c.hidden;
        if c.w1_shape != [rows, c.input_dim] || c.b1.len() != bias_len || c.w2.len() != bias_len {
            return Err(Error::InvalidInput(format!(
                "checkpoint shapes do not match input_dim {} and hidden {}",
                c.input_dim, c.hidden
            )));
        }
        let w1 = Array2::from_shape_vec((rows, c.input_dim), c.w1)
            .map_err(|e| Error::InvalidInput(format!("checkpoint w1: {e}")))?;
        let m = Mlp {
            w1,
            b1: Array1::from(c.b1),
            w2: Array1::from(c.w2),
            b2: c.b2,
            hidden: c.hidden,
        };
        if m.w1.iter().chain(&m.b1).chain(&m.w2).any(|v| !v.is_finite()) || !m.b2.is_finite() {
            return Err(Error::InvalidInput("checkpoint contains non-finite parameters".into()));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Mlp::from_checkpoint(serde_json::from_str(text)?)
    }
}

/// JSON checkpoint: weight lists in row-major order plus their shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub input_dim: usize,
    pub hidden: usize,
    pub w1_shape: [usize; 2],
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Scorer for Mlp {
    fn score(&self, x: &[f64]) -> f64 {
        self.forward(ArrayView1::from(x)).expect("pattern dimension matches the model")
    }

    fn score_rows(&self, xs: ArrayView2<'_, f64>) -> Vec<f64> {
        self.forward_batch(xs).expect("pattern dimension matches the model").to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Loop-based forward pass used as an independent oracle.
    fn naive_forward(m: &Mlp, x: &[f64]) -> f64 {
        if m.hidden == 0 {
            return (0..x.len()).map(|j| m.w1[[0, j]] * x[j]).sum::<f64>() + m.b2;
        }
        let mut out = m.b2;
        for k in 0..m.hidden {
            let mut a = m.b1[k];
            for (j, &xj) in x.iter().enumerate() {
                a += m.w1[[k, j]] * xj;
            }
            out += m.w2[k] * a.max(0.0);
        }
        out
    }

    fn randomized(d: usize, h: usize, seed: u64) -> Mlp {
        let mut m = Mlp::init(d, h, seed);
        let mut rng = stream_rng(seed, 99);
        m.b1.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        m.b2 = rng.random_range(-0.5..0.5);
        m
    }

    #[test]
    fn zero_weights_give_zero() {
        let mut m = Mlp::init(3, 4, 1);
        for (_, b) in m.blocks_mut() {
            b.fill(0.0);
        }
        assert_eq!(m.forward(array![1.0, -2.0, 3.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_is_relu() {
        let m = Mlp {
            w1: array![[1.0]],
            b1: array![0.0],
            w2: array![1.0],
            b2: 0.0,
            hidden: 1,
        };
        assert_eq!(m.forward(array![2.5].view()).unwrap(), 2.5);
        assert_eq!(m.forward(array![-2.5].view()).unwrap(), 0.0);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for (d, h) in [(3, 5), (2, 0), (7, 32)] {
            let m = randomized(d, h, 3);
            let mut rng = stream_rng(4, 0);
            let xs = Array2::from_shape_simple_fn((20, d), || rng.random_range(-2.0..2.0));
            let batch = m.forward_batch(xs.view()).unwrap();
            for (i, row) in xs.rows().into_iter().enumerate() {
                let want = naive_forward(&m, row.as_slice().unwrap());
                assert!((m.forward(row).unwrap() - want).abs() <= 1e-12);
                assert!((batch[i] - want).abs() <= 1e-12);
            }
        }
        assert!(matches!(Mlp::init(3, 2, 0).forward(array![1.0].view()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = Mlp::init(10, 500, 7);
        assert_eq!(a, Mlp::init(10, 500, 7));
        assert!(a.b1.iter().all(|&b| b == 0.0) && a.b2 == 0.0);
        let var = a.w1.iter().map(|w| w * w).sum::<f64>() / a.w1.len() as f64;
        let want = 2.0 / 510.0;
        assert!((var / want - 1.0).abs() < 0.2, "{var} vs {want}");
    }

    #[test]
    fn backward_zero_upstream_is_noop() {
        let m = randomized(3, 4, 2);
        let mut acc = GradAccum::zeros_like(&m);
        m.backward_margin(array![0.3, -0.1, 1.0].view(), 0.0, &mut acc).unwrap();
        assert_eq!(acc, GradAccum::zeros_like(&m));
    }

    #[test]
    fn batch_backward_matches_per_example_and_pair_rule() {
        let m = randomized(4, 6, 5);
        let mut rng = stream_rng(6, 0);
        let xs = Array2::from_shape_simple_fn((9, 4), || rng.random_range(-2.0..2.0));
        let up = Array1::from_shape_simple_fn(9, || rng.random_range(-1.0..1.0));
        let mut a = GradAccum::zeros_like(&m);
        let mut b = GradAccum::zeros_like(&m);
        m.backward_batch(xs.view(), up.view(), &mut a).unwrap();
        for (row, &u) in xs.rows().into_iter().zip(&up) {
            m.backward_margin(row, u, &mut b).unwrap();
        }
        for ((_, x), (_, y)) in a.blocks().iter().zip(b.blocks().iter()) {
            for (p, q) in x.iter().zip(y.iter()) {
                assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        for h in [0, 3] {
            let m = randomized(2, h, 8);
            assert_eq!(Mlp::from_json(&m.to_json()).unwrap(), m);
        }
        let mut c = Mlp::init(2, 3, 0).to_checkpoint();
        c.w2.pop();
        assert!(Mlp::from_checkpoint(c).is_err());
    }
}
