use super::memory::{MemoryAccountant, MemoryReport, Tensor, TrackedBuf};
use crate::error::{Error, Result};

/// Attention along the last `N` axis of `(G, N, N, d)` tensors, the middle
/// axis acting as a batch. The bias `(G, N, N)` is shared by every batch
/// row `i`: `logit[g,i,j,k] = scale·q[g,i,j]·k[g,i,k] + bias[g,j,k]`.
#[derive(Debug, Clone)]
pub struct BiasedAttentionProblem {
    pub q: Tensor,
    pub k: Tensor,
    pub v: Tensor,
    pub bias: Tensor,
    pub scale: f32,
}

impl BiasedAttentionProblem {
    /// Uses `scale = 1/√d`.
    pub fn new(q: Tensor, k: Tensor, v: Tensor, bias: Tensor) -> Result<Self> {
        let s = q.shape().to_vec();
        if s.len() != 4 || s[1] != s[2] {
            return Err(Error::InvalidParameter(format!("q must be (G, N, N, d), got {s:?}")));
        }
        if k.shape() != s.as_slice() || v.shape() != s.as_slice() {
            return Err(Error::InvalidParameter("q, k and v shapes differ".into()));
        }
        if bias.shape() != &s[..3] {
            return Err(Error::InvalidParameter(format!(
                "bias must be {:?}, got {:?}",
                &s[..3],
                bias.shape()
            )));
        }
        if [&q, &k, &v, &bias].iter().any(|t| t.data().iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter("non-finite attention input".into()));
        }
        let scale = 1.0 / (s[3] as f32).sqrt();
        Ok(Self { q, k, v, bias, scale })
    }

    pub fn g(&self) -> usize {
        self.q.shape()[0]
    }

    pub fn n(&self) -> usize {
        self.q.shape()[1]
    }

    pub fn d(&self) -> usize {
        self.q.shape()[3]
    }

    fn logit(&self, g: usize, i: usize, j: usize, k: usize) -> f64 {
        let q = self.q.row(&[g, i, j]);
        let kk = self.k.row(&[g, i, k]);
        let dot: f64 = q.iter().zip(kk).map(|(a, b)| *a as f64 * *b as f64).sum();
        dot * self.scale as f64 + self.bias.at(&[g, j, k]) as f64
    }
}

#[derive(Debug)]
pub struct AttentionOutput {
    /// `(G, N, N, d)`.
    pub output: Tensor,
    /// Per-row log normaliser, `(G, N, N)` flattened.
    pub logsumexp: TrackedBuf<f64>,
    /// Memory charged during the call, outputs included.
    pub memory: MemoryReport,
}

#[derive(Debug)]
pub struct AttentionGradients {
    pub dq: Tensor,
    pub dk: Tensor,
    pub dv: Tensor,
    /// Shared-bias gradient `(G, N, N)`, summed over the broadcast rows.
    pub dbias: Tensor,
    pub memory: MemoryReport,
}

/// Reference path: materialises the broadcast bias and all logits as a
/// `(G, N, N, N)` buffer.
pub fn naive_biased_attention(p: &BiasedAttentionProblem) -> AttentionOutput {
    let acc = MemoryAccountant::new();
    let (g, n, d) = (p.g(), p.n(), p.d());
    let mut output = Tensor::zeros(&[g, n, n, d], Some(&acc));
    let mut lse = TrackedBuf::<f64>::zeros(g * n * n, Some(&acc));
    let mut logits = Tensor::zeros(&[g, n, n, n], Some(&acc));
    {
        let mut bias_full = Tensor::zeros(&[g, n, n, n], Some(&acc));
        for gi in 0..g {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let o = bias_full.offset(&[gi, i, j, k]);
                        bias_full.data_mut()[o] = p.bias.at(&[gi, j, k]);
                    }
                }
            }
        }
        for gi in 0..g {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let q = p.q.row(&[gi, i, j]);
                        let kk = p.k.row(&[gi, i, k]);
                        let dot: f32 = q.iter().zip(kk).map(|(a, b)| a * b).sum();
                        let o = logits.offset(&[gi, i, j, k]);
                        logits.data_mut()[o] = dot * p.scale + bias_full.data()[o];
                    }
                }
            }
        }
    }
    for row in 0..g * n * n {
        let s = &mut logits.data_mut()[row * n..(row + 1) * n];
        let m = s.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b as f64));
        let z: f64 = s.iter().map(|&x| (x as f64 - m).exp()).sum();
        for x in s.iter_mut() {
            *x = ((*x as f64 - m).exp() / z) as f32;
        }
        lse[row] = m + z.ln();
    }
    for gi in 0..g {
        for i in 0..n {
            for j in 0..n {
                let row = (gi * n + i) * n + j;
                let probs = &logits.data()[row * n..(row + 1) * n];
                let mut out = vec![0.0f64; d];
                for (k, &pk) in probs.iter().enumerate() {
                    for (o, v) in out.iter_mut().zip(p.v.row(&[gi, i, k])) {
                        *o += pk as f64 * *v as f64;
                    }
                }
                let o = output.offset(&[gi, i, j, 0]);
                for (dst, src) in output.data_mut()[o..o + d].iter_mut().zip(&out) {
                    *dst = *src as f32;
                }
            }
        }
    }
    drop(logits);
    AttentionOutput {
        output,
        logsumexp: lse,
        memory: acc.report(),
    }
}

/// Streaming online softmax over key tiles. The bias entry for each
/// `(j, k)` is read straight from the shared matrix, so nothing of size
/// `N³` is ever allocated; scratch is one tile of scores plus one output
/// accumulator.
pub fn tiled_biased_attention(p: &BiasedAttentionProblem, tile: usize) -> Result<AttentionOutput> {
    if tile == 0 {
        return Err(Error::InvalidParameter("tile must be at least 1".into()));
    }
    let acc = MemoryAccountant::new();
    let (g, n, d) = (p.g(), p.n(), p.d());
    let tile = tile.min(n.max(1));
    let mut output = Tensor::zeros(&[g, n, n, d], Some(&acc));
    let mut lse = TrackedBuf::<f64>::zeros(g * n * n, Some(&acc));
    let mut scores = TrackedBuf::<f64>::zeros(tile, Some(&acc));
    let mut out = TrackedBuf::<f64>::zeros(d, Some(&acc));

    for gi in 0..g {
        for i in 0..n {
            for j in 0..n {
                let mut m = f64::NEG_INFINITY;
                let mut l = 0.0f64;
                out.fill(0.0);
                for start in (0..n).step_by(tile) {
                    let end = (start + tile).min(n);
                    let mut tile_max = f64::NEG_INFINITY;
                    for k in start..end {
                        let s = p.logit(gi, i, j, k);
                        scores[k - start] = s;
                        tile_max = tile_max.max(s);
                    }
                    let m_new = m.max(tile_max);
                    let rescale = (m - m_new).exp();
                    l *= rescale;
                    for o in out.iter_mut() {
                        *o *= rescale;
                    }
                    for k in start..end {
                        let w = (scores[k - start] - m_new).exp();
                        l += w;
                        for (o, v) in out.iter_mut().zip(p.v.row(&[gi, i, k])) {
                            *o += w * *v as f64;
                        }
                    }
                    m = m_new;
                }
                let o = output.offset(&[gi, i, j, 0]);
                for (dst, src) in output.data_mut()[o..o + d].iter_mut().zip(out.iter()) {
                    *dst = (src / l) as f32;
                }
                lse[(gi * n + i) * n + j] = m + l.ln();
            }
        }
    }
    drop(scores);
    drop(out);
    Ok(AttentionOutput {
        output,
        logsumexp: lse,
        memory: acc.report(),
    })
}

/// Gradients by recomputing probabilities from the stored log normaliser.
/// Contributions to the bias from every broadcast row `i` accumulate into
/// one `(G, N, N)` buffer.
pub fn tiled_biased_attention_backward(
    p: &BiasedAttentionProblem,
    forward: &AttentionOutput,
    d_out: &Tensor,
) -> Result<AttentionGradients> {
    if d_out.shape() != p.q.shape() {
        return Err(Error::InvalidParameter("upstream gradient shape differs from output".into()));
    }
    let acc = MemoryAccountant::new();
    let (g, n, d) = (p.g(), p.n(), p.d());
    let scale = p.scale as f64;
    let mut dq = Tensor::zeros(&[g, n, n, d], Some(&acc));
    let mut dk = Tensor::zeros(&[g, n, n, d], Some(&acc));
    let mut dv = Tensor::zeros(&[g, n, n, d], Some(&acc));
    let mut dbias = Tensor::zeros(&[g, n, n], Some(&acc));
    let mut dbias_acc = TrackedBuf::<f64>::zeros(n * n, Some(&acc));
    let mut dk_acc = TrackedBuf::<f64>::zeros(n * d, Some(&acc));
    let mut dv_acc = TrackedBuf::<f64>::zeros(n * d, Some(&acc));
    let mut dq_row = TrackedBuf::<f64>::zeros(d, Some(&acc));

    for gi in 0..g {
        dbias_acc.fill(0.0);
        for i in 0..n {
            dk_acc.fill(0.0);
            dv_acc.fill(0.0);
            for j in 0..n {
                let row = (gi * n + i) * n + j;
                let go = d_out.row(&[gi, i, j]);
                let o = forward.output.row(&[gi, i, j]);
                let delta: f64 = go.iter().zip(o).map(|(a, b)| *a as f64 * *b as f64).sum();
                let q = p.q.row(&[gi, i, j]);
                dq_row.fill(0.0);
                for k in 0..n {
                    let prob = (p.logit(gi, i, j, k) - forward.logsumexp[row]).exp();
                    let v = p.v.row(&[gi, i, k]);
                    let dp: f64 = go.iter().zip(v).map(|(a, b)| *a as f64 * *b as f64).sum();
                    let ds = prob * (dp - delta);
                    dbias_acc[j * n + k] += ds;
                    let kk = p.k.row(&[gi, i, k]);
                    for c in 0..d {
                        dq_row[c] += ds * scale * kk[c] as f64;
                        dk_acc[k * d + c] += ds * scale * q[c] as f64;
                        dv_acc[k * d + c] += prob * go[c] as f64;
                    }
                }
                let off = dq.offset(&[gi, i, j, 0]);
                for (dst, src) in dq.data_mut()[off..off + d].iter_mut().zip(dq_row.iter()) {
                    *dst = *src as f32;
                }
            }
            let off = dk.offset(&[gi, i, 0, 0]);
            for (dst, src) in dk.data_mut()[off..off + n * d].iter_mut().zip(dk_acc.iter()) {
                *dst = *src as f32;
            }
            for (dst, src) in dv.data_mut()[off..off + n * d].iter_mut().zip(dv_acc.iter()) {
                *dst = *src as f32;
            }
        }
        let off = dbias.offset(&[gi, 0, 0]);
        for (dst, src) in dbias.data_mut()[off..off + n * n].iter_mut().zip(dbias_acc.iter()) {
            *dst = *src as f32;
        }
    }
    drop((dbias_acc, dk_acc, dv_acc, dq_row));
    Ok(AttentionGradients {
        dq,
        dk,
        dv,
        dbias,
        memory: acc.report(),
    })
}
