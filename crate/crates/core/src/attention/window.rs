use super::memory::{MemoryAccountant, MemoryReport, Tensor};
use crate::error::{Error, Result};

/// Additive pair bias stored only inside the band `|i − j| ≤ window`,
/// `2·window + 1` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedPairBias {
    n: usize,
    window: usize,
    values: Vec<f32>,
}

impl BandedPairBias {
    pub fn zeros(n: usize, window: usize) -> Self {
        Self {
            n,
            window,
            values: vec![0.0; n * (2 * window + 1)],
        }
    }

    /// Fill the band from `f(i, j)`.
    pub fn from_fn(n: usize, window: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut b = Self::zeros(n, window);
        for i in 0..n {
            for j in i.saturating_sub(window)..(i + window + 1).min(n) {
                b.set(i, j, f(i, j));
            }
        }
        b
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        (i < self.n && j < self.n && i.abs_diff(j) <= self.window)
            .then(|| i * (2 * self.window + 1) + (j + self.window - i))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f32> {
        self.slot(i, j).map(|s| self.values[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        let s = self.slot(i, j).expect("pair outside the band");
        self.values[s] = v;
    }

    pub fn stored(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindowSpec {
    pub window: usize,
    pub pair_bias: BandedPairBias,
}

impl SlidingWindowSpec {
    pub fn new(window: usize, pair_bias: BandedPairBias) -> Result<Self> {
        if pair_bias.window != window {
            return Err(Error::InvalidParameter(format!(
                "bias band {} does not match window {window}",
                pair_bias.window
            )));
        }
        Ok(Self { window, pair_bias })
    }

    pub fn unbiased(n: usize, window: usize) -> Self {
        Self {
            window,
            pair_bias: BandedPairBias::zeros(n, window),
        }
    }
}

/// Single-head projections `(c_in, d)`.
#[derive(Debug, Clone)]
pub struct SlidingWindowAttention {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
}

#[derive(Debug)]
pub struct WindowOutput {
    /// `(N, d)`.
    pub output: Tensor,
    /// Number of query-key logits evaluated.
    pub logit_evaluations: usize,
    pub memory: MemoryReport,
}

fn project(x: &Tensor, w: &Tensor, acc: &MemoryAccountant) -> Tensor {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let d = w.shape()[1];
    let mut out = Tensor::zeros(&[n, d], Some(acc));
    for i in 0..n {
        for o in 0..d {
            let s: f64 = (0..c).map(|k| x.at(&[i, k]) as f64 * w.at(&[k, o]) as f64).sum();
            out.data_mut()[i * d + o] = s as f32;
        }
    }
    out
}

impl SlidingWindowAttention {
    pub fn forward(&self, x: &Tensor, spec: &SlidingWindowSpec) -> Result<WindowOutput> {
        sliding_window_attention(x, self, spec)
    }
}

/// Each atom attends to the atoms within `window` indices of it, with the
/// banded bias added to the logits. Work and memory are linear in `N`.
pub fn sliding_window_attention(
    x: &Tensor,
    layer: &SlidingWindowAttention,
    spec: &SlidingWindowSpec,
) -> Result<WindowOutput> {
    if x.shape().len() != 2 {
        return Err(Error::InvalidParameter("features must be (N, c)".into()));
    }
    let (n, c) = (x.shape()[0], x.shape()[1]);
    for w in [&layer.wq, &layer.wk, &layer.wv] {
        if w.shape().len() != 2 || w.shape()[0] != c {
            return Err(Error::InvalidParameter(format!("projection must be ({c}, d), got {:?}", w.shape())));
        }
    }
    if spec.pair_bias.n != n || spec.pair_bias.window != spec.window {
        return Err(Error::InvalidParameter("pair bias does not match features or window".into()));
    }
    if spec.window > n {
        return Err(Error::InvalidParameter(format!("window {} exceeds N = {n}", spec.window)));
    }
    let acc = MemoryAccountant::new();
    let q = project(x, &layer.wq, &acc);
    let k = project(x, &layer.wk, &acc);
    let v = project(x, &layer.wv, &acc);
    let d = v.shape()[1];
    let scale = 1.0 / (layer.wq.shape()[1] as f64).sqrt();
    let mut output = Tensor::zeros(&[n, d], Some(&acc));
    let mut evaluations = 0;
    let mut scores = Vec::with_capacity(2 * spec.window + 1);
    for i in 0..n {
        let lo = i.saturating_sub(spec.window);
        let hi = (i + spec.window + 1).min(n);
        scores.clear();
        for j in lo..hi {
            let dot: f64 = q.row(&[i]).iter().zip(k.row(&[j])).map(|(a, b)| *a as f64 * *b as f64).sum();
            let b = spec.pair_bias.get(i, j).unwrap_or(0.0) as f64;
            scores.push(dot * scale + b);
            evaluations += 1;
        }
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
        for o in 0..d {
            let val: f64 = (lo..hi).map(|j| (scores[j - lo] - m).exp() / z * v.at(&[j, o]) as f64).sum();
            output.data_mut()[i * d + o] = val as f32;
        }
    }
    drop((q, k, v));
    Ok(WindowOutput {
        output,
        logit_evaluations: evaluations,
        memory: acc.report(),
    })
}
