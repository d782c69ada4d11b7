//! Dense layers with hand-written backward passes. Activations are N×d
//! matrices (one row per atom).

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

const LN_EPS: f64 = 1e-5;

/// `x·w + b` with `b` a 1×out row.
pub fn linear(x: &Mat, w: &Mat, b: &Mat) -> Mat {
    let mut y = x * w;
    add_row(&mut y, b);
    y
}

pub fn add_row(y: &mut Mat, b: &Mat) {
    for j in 0..y.ncols() {
        let bj = b[(0, j)];
        for v in y.column_mut(j).iter_mut() {
            *v += bj;
        }
    }
}

/// Accumulates weight and bias gradients, returns dL/dx.
pub fn linear_backward(x: &Mat, w: &Mat, dy: &Mat, gw: &mut Mat, gb: Option<&mut Mat>) -> Mat {
    gw.gemm_tr(1.0, x, dy, 1.0);
    if let Some(gb) = gb {
        for j in 0..dy.ncols() {
            gb[(0, j)] += dy.column(j).sum();
        }
    }
    dy * w.transpose()
}

pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

/// Row-wise layer norm with gain and bias rows.
pub fn layer_norm(x: &Mat, g: &Mat, b: &Mat) -> (Mat, LayerNormCache) {
    let (n, d) = x.shape();
    let mut xhat = Mat::zeros(n, d);
    let mut inv_std = vec![0.0; n];
    let mut y = Mat::zeros(n, d);
    for i in 0..n {
        let row = x.row(i);
        let mu = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = is;
        for j in 0..d {
            let h = (x[(i, j)] - mu) * is;
            xhat[(i, j)] = h;
            y[(i, j)] = h * g[(0, j)] + b[(0, j)];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(cache: &LayerNormCache, g: &Mat, dy: &Mat, gg: &mut Mat, gb: &mut Mat) -> Mat {
    let (n, d) = dy.shape();
    let mut dx = Mat::zeros(n, d);
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for j in 0..d {
            let dyv = dy[(i, j)];
            let h = cache.xhat[(i, j)];
            gg[(0, j)] += dyv * h;
            gb[(0, j)] += dyv;
            dxhat[j] = dyv * g[(0, j)];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * h;
        }
        mean_d /= d as f64;
        mean_dx /= d as f64;
        for j in 0..d {
            dx[(i, j)] = cache.inv_std[i] * (dxhat[j] - mean_d - cache.xhat[(i, j)] * mean_dx);
        }
    }
    dx
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub fn gelu(x: &Mat) -> Mat {
    x.map(|v| 0.5 * v * (1.0 + (GELU_K * (v + 0.044715 * v * v * v)).tanh()))
}

pub fn gelu_backward(x: &Mat, dy: &Mat) -> Mat {
    x.zip_map(dy, |v, g| {
        let th = (GELU_K * (v + 0.044715 * v * v * v)).tanh();
        let d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * GELU_K * (1.0 + 3.0 * 0.044715 * v * v);
        d * g
    })
}

/// Multi-head self-attention weights for one block.
pub struct AttentionParams<'a> {
    pub wq: &'a Mat,
    pub wk: &'a Mat,
    pub wv: &'a Mat,
    pub wo: &'a Mat,
    pub bo: &'a Mat,
    /// n_pair × n_heads projection of pair features to per-head bias.
    pub wb: &'a Mat,
}

pub struct AttentionGrads<'a> {
    pub wq: &'a mut Mat,
    pub wk: &'a mut Mat,
    pub wv: &'a mut Mat,
    pub wo: &'a mut Mat,
    pub bo: &'a mut Mat,
    pub wb: &'a mut Mat,
}

pub struct AttentionCache {
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    o: Mat,
}

fn head_cols(m: &Mat, h: usize, dh: usize) -> Mat {
    m.columns(h * dh, dh).into_owned()
}

pub fn attention(a: &Mat, p: &AttentionParams, pair: &[Mat], n_heads: usize) -> (Mat, AttentionCache) {
    let n = a.nrows();
    let d = a.ncols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = a * p.wq;
    let k = a * p.wk;
    let v = a * p.wv;
    let mut o = Mat::zeros(n, d);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = head_cols(&q, h, dh);
        let kh = head_cols(&k, h, dh);
        let vh = head_cols(&v, h, dh);
        let mut s = qh * kh.transpose() * scale;
        for (f, pf) in pair.iter().enumerate() {
            let w = p.wb[(f, h)];
            if w != 0.0 {
                s += pf * w;
            }
        }
        for i in 0..n {
            let m = s.row(i).max();
            let mut z = 0.0;
            for j in 0..n {
                let e = (s[(i, j)] - m).exp();
                s[(i, j)] = e;
                z += e;
            }
            for j in 0..n {
                s[(i, j)] /= z;
            }
        }
        let oh = &s * vh;
        o.columns_mut(h * dh, dh).copy_from(&oh);
        probs.push(s);
    }
    let out = linear(&o, p.wo, p.bo);
    (out, AttentionCache { q, k, v, probs, o })
}

pub fn attention_backward(
    a: &Mat,
    p: &AttentionParams,
    g: AttentionGrads,
    pair: &[Mat],
    n_heads: usize,
    cache: &AttentionCache,
    dout: &Mat,
) -> Mat {
    let (n, d) = a.shape();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let d_o = linear_backward(&cache.o, p.wo, dout, g.wo, Some(g.bo));
    let mut dq = Mat::zeros(n, d);
    let mut dk = Mat::zeros(n, d);
    let mut dv = Mat::zeros(n, d);
    for h in 0..n_heads {
        let pr = &cache.probs[h];
        let doh = head_cols(&d_o, h, dh);
        let vh = head_cols(&cache.v, h, dh);
        let qh = head_cols(&cache.q, h, dh);
        let kh = head_cols(&cache.k, h, dh);
        let dp = &doh * vh.transpose();
        let dvh = pr.transpose() * &doh;
        let mut ds = Mat::zeros(n, n);
        for i in 0..n {
            let mut dot = 0.0;
            for j in 0..n {
                dot += dp[(i, j)] * pr[(i, j)];
            }
            for j in 0..n {
                ds[(i, j)] = pr[(i, j)] * (dp[(i, j)] - dot);
            }
        }
        for (f, pf) in pair.iter().enumerate() {
            g.wb[(f, h)] += ds.component_mul(pf).sum();
        }
        let dqh = &ds * kh * scale;
        let dkh = ds.transpose() * qh * scale;
        dq.columns_mut(h * dh, dh).copy_from(&dqh);
        dk.columns_mut(h * dh, dh).copy_from(&dkh);
        dv.columns_mut(h * dh, dh).copy_from(&dvh);
    }
    let mut da = linear_backward(a, p.wq, &dq, g.wq, None);
    da += linear_backward(a, p.wk, &dk, g.wk, None);
    da += linear_backward(a, p.wv, &dv, g.wv, None);
    da
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Scalar objective Σ y ⊙ probe for checking backward passes.
    fn objective(y: &Mat, probe: &Mat) -> f64 {
        y.component_mul(probe).sum()
    }

    fn check_input_grad(f: impl Fn(&Mat) -> Mat, x: &Mat, dx: &Mat, probe: &Mat) {
        let h = 1e-6;
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp[idx] += h;
            let mut xm = x.clone();
            xm[idx] -= h;
            let fd = (objective(&f(&xp), probe) - objective(&f(&xm), probe)) / (2.0 * h);
            assert!((fd - dx[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "{idx}: {fd} vs {}", dx[idx]);
        }
    }

    #[test]
    fn layer_norm_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_mat(&mut rng, 3, 6);
        let g = rand_mat(&mut rng, 1, 6);
        let b = rand_mat(&mut rng, 1, 6);
        let probe = rand_mat(&mut rng, 3, 6);
        let (_, cache) = layer_norm(&x, &g, &b);
        let mut gg = Mat::zeros(1, 6);
        let mut gb = Mat::zeros(1, 6);
        let dx = layer_norm_backward(&cache, &g, &probe, &mut gg, &mut gb);
        check_input_grad(|x| layer_norm(x, &g, &b).0, &x, &dx, &probe);
        let h = 1e-6;
        for j in 0..6 {
            let mut gp = g.clone();
            gp[(0, j)] += h;
            let mut gm = g.clone();
            gm[(0, j)] -= h;
            let fd = (objective(&layer_norm(&x, &gp, &b).0, &probe) - objective(&layer_norm(&x, &gm, &b).0, &probe)) / (2.0 * h);
            assert!((fd - gg[(0, j)]).abs() < 1e-6);
        }
    }

    #[test]
    fn gelu_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_mat(&mut rng, 4, 3) * 3.0;
        let probe = rand_mat(&mut rng, 4, 3);
        let dx = gelu_backward(&x, &probe);
        check_input_grad(gelu, &x, &dx, &probe);
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, d, heads) = (5, 8, 2);
        let a = rand_mat(&mut rng, n, d);
        let ws: Vec<Mat> = (0..4).map(|_| rand_mat(&mut rng, d, d) * 0.5).collect();
        let bo = rand_mat(&mut rng, 1, d);
        let wb = rand_mat(&mut rng, 2, heads);
        let pair = vec![rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, n)];
        let probe = rand_mat(&mut rng, n, d);
        let params = |wq: &Mat, wb_: &Mat| -> Mat {
            let p = AttentionParams { wq, wk: &ws[1], wv: &ws[2], wo: &ws[3], bo: &bo, wb: wb_ };
            attention(&a, &p, &pair, heads).0
        };
        let p = AttentionParams { wq: &ws[0], wk: &ws[1], wv: &ws[2], wo: &ws[3], bo: &bo, wb: &wb };
        let (_, cache) = attention(&a, &p, &pair, heads);
        let mut g: Vec<Mat> = (0..4).map(|_| Mat::zeros(d, d)).collect();
        let mut gbo = Mat::zeros(1, d);
        let mut gwb = Mat::zeros(2, heads);
        let (g0, rest) = g.split_at_mut(1);
        let (g1, rest) = rest.split_at_mut(1);
        let (g2, g3) = rest.split_at_mut(1);
        let grads = AttentionGrads {
            wq: &mut g0[0],
            wk: &mut g1[0],
            wv: &mut g2[0],
            wo: &mut g3[0],
            bo: &mut gbo,
            wb: &mut gwb,
        };
        let da = attention_backward(&a, &p, grads, &pair, heads, &cache, &probe);
        check_input_grad(
            |x| {
                let p = AttentionParams { wq: &ws[0], wk: &ws[1], wv: &ws[2], wo: &ws[3], bo: &bo, wb: &wb };
                attention(x, &p, &pair, heads).0
            },
            &a,
            &da,
            &probe,
        );
        let h = 1e-6;
        for idx in 0..ws[0].len() {
            let mut wp = ws[0].clone();
            wp[idx] += h;
            let mut wm = ws[0].clone();
            wm[idx] -= h;
            let fd = (objective(&params(&wp, &wb), &probe) - objective(&params(&wm, &wb), &probe)) / (2.0 * h);
            assert!((fd - g[0][idx]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
        for idx in 0..wb.len() {
            let mut wp = wb.clone();
            wp[idx] += h;
            let mut wm = wb.clone();
            wm[idx] -= h;
            let fd = (objective(&params(&ws[0], &wp), &probe) - objective(&params(&ws[0], &wm), &probe)) / (2.0 * h);
            assert!((fd - gwb[idx]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
