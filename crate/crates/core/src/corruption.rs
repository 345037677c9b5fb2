//! Mutually-contaminated samples from a clean labeled pool.
//!
//! Mixing is by exact counts: the corrupted-positive sample of size `n_cp`
//! holds `round(π · n_cp)` true positives, the corrupted-negative sample
//! `round(π' · n_cn)`. No pool row is used twice.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::dataio::LabeledPool;
use crate::error::{Error, Result};
use crate::risk::NoiseSpec;
use crate::rng::{stream_rng, streams};

/// Where a corrupted-sample row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Origin {
    pub positive: bool,
    /// Row index inside the pool's class matrix.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptedSample {
    pub cp: Array2<f64>,
    pub cn: Array2<f64>,
    pub cp_origin: Vec<Origin>,
    pub cn_origin: Vec<Origin>,
}

impl CorruptedSample {
    pub fn cp_positive_count(&self) -> usize {
        self.cp_origin.iter().filter(|o| o.positive).count()
    }

    pub fn cn_positive_count(&self) -> usize {
        self.cn_origin.iter().filter(|o| o.positive).count()
    }
}

/// Half-up rounding of `fraction · n`.
pub fn mixed_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

pub fn corrupt(pool: &LabeledPool, noise: NoiseSpec, n_cp: usize, n_cn: usize, seed: u64) -> Result<CorruptedSample> {
    let noise = NoiseSpec::new(noise.pi, noise.pi_prime)?;
    if n_cp == 0 || n_cn == 0 {
        return Err(Error::InvalidInput("both corrupted samples need at least one row".into()));
    }
    let cp_pos = mixed_count(noise.pi, n_cp);
    let cn_pos = mixed_count(noise.pi_prime, n_cn);
    let need_pos = cp_pos + cn_pos;
    let need_neg = (n_cp - cp_pos) + (n_cn - cn_pos);
    let (have_pos, have_neg) = (pool.positives.nrows(), pool.negatives.nrows());
    if need_pos > have_pos {
        return Err(Error::Budget(format!(
            "positive pool too small: need {need_pos} rows, have {have_pos}"
        )));
    }
    if need_neg > have_neg {
        return Err(Error::Budget(format!(
            "negative pool too small: need {need_neg} rows, have {have_neg}"
        )));
    }

    let mut rng = stream_rng(seed, streams::CORRUPT);
    let mut pos: Vec<usize> = (0..have_pos).collect();
    let mut neg: Vec<usize> = (0..have_neg).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let tag = |positive: bool| move |&index: &usize| Origin { positive, index };
    let mut cp_origin: Vec<Origin> = pos[..cp_pos]
        .iter()
        .map(tag(true))
        .chain(neg[..n_cp - cp_pos].iter().map(tag(false)))
        .collect();
    let mut cn_origin: Vec<Origin> = pos[cp_pos..need_pos]
        .iter()
        .map(tag(true))
        .chain(neg[n_cp - cp_pos..need_neg].iter().map(tag(false)))
        .collect();
    cp_origin.shuffle(&mut rng);
    cn_origin.shuffle(&mut rng);

    let gather = |origin: &[Origin]| -> Array2<f64> {
        let mut out = Array2::zeros((origin.len(), pool.dim()));
        for (mut row, o) in out.axis_iter_mut(Axis(0)).zip(origin) {
            let src = if o.positive { &pool.positives } else { &pool.negatives };
            row.assign(&src.row(o.index));
        }
        out
    };
    Ok(CorruptedSample {
        cp: gather(&cp_origin),
        cn: gather(&cn_origin),
        cp_origin,
        cn_origin,
    })
}
