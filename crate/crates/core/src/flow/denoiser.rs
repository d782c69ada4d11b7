use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{label_frame, time_embedding, INPUT_DIM, PAIR_DIM, STATIC_DIM};
use super::nn::{self, AttentionCache, AttentionGrads, AttentionParams, LayerNormCache, Mat};
use crate::geometry::Vec3;
use crate::topology::MolecularSystem;

pub use super::features::Conditioning;

/// Predicts clean coordinates from a noisy state.
pub trait Denoiser: Sync {
    /// Parameter-free per-system features, computed once per system.
    fn condition(&self, system: &MolecularSystem) -> Conditioning;
    /// Estimate x₁ from `x_t` at (already shifted) time `t_star`.
    fn denoise(&self, cond: &Conditioning, x_t: &[Vec3], t_star: f64) -> Vec<Vec3>;
}

/// Always returns the stored ground truth.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub truth: Vec<Vec3>,
}

impl Denoiser for OracleDenoiser {
    fn condition(&self, system: &MolecularSystem) -> Conditioning {
        Conditioning::from_system(system)
    }

    fn denoise(&self, _cond: &Conditioning, _x_t: &[Vec3], _t_star: f64) -> Vec<Vec3> {
        self.truth.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyDenoiserConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub mlp_hidden: usize,
    /// Å per unit of network output.
    pub output_scale: f64,
    /// Å per unit of coordinate input.
    pub input_scale: f64,
    /// Standard deviation of the output head at initialisation.
    pub head_init: f64,
    pub init_seed: u64,
}

impl Default for ToyDenoiserConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_blocks: 4,
            mlp_hidden: 128,
            output_scale: 4.0,
            input_scale: 10.0,
            head_init: 1e-2,
            init_seed: 0,
        }
    }
}

const PER_BLOCK: usize = 14;
// Offsets inside a block.
const LN1_G: usize = 0;
const LN1_B: usize = 1;
const WQ: usize = 2;
const WB: usize = 7;
const LN2_G: usize = 8;
const LN2_B: usize = 9;
const W1: usize = 10;
const B1: usize = 11;
const W2: usize = 12;
const B2: usize = 13;

/// Small attention network over atoms: input projection, pre-norm attention
/// blocks with pair bias, MLPs, and a linear coordinate head. Coordinates
/// enter and leave through [`label_frame`], so predictions move rigidly
/// with the input.
#[derive(Debug)]
pub struct ToyDenoiser {
    pub config: ToyDenoiserConfig,
    params: Vec<Mat>,
    condition_calls: AtomicUsize,
}

impl Clone for ToyDenoiser {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            params: self.params.clone(),
            condition_calls: AtomicUsize::new(self.condition_calls()),
        }
    }
}

struct BlockCache {
    h_in: Mat,
    ln1: LayerNormCache,
    a: Mat,
    attn: AttentionCache,
    ln2: LayerNormCache,
    m: Mat,
    z: Mat,
    gz: Mat,
}

pub(crate) struct ForwardCache {
    input: Mat,
    pair: Vec<Mat>,
    blocks: Vec<BlockCache>,
    lnf: LayerNormCache,
    hf: Mat,
    rotation: Matrix3<f64>,
}

impl ToyDenoiser {
    pub fn new(config: ToyDenoiserConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let d = config.d_model;
        let hid = config.mlp_hidden;
        let mut init = |r: usize, c: usize, std: f64| -> Mat {
            let dist = Normal::new(0.0, std).expect("finite std");
            Mat::from_fn(r, c, |_, _| dist.sample(&mut rng))
        };
        let ones = |c: usize| Mat::from_element(1, c, 1.0);
        let zeros = |r: usize, c: usize| Mat::zeros(r, c);
        let mut params = vec![init(INPUT_DIM, d, (1.0 / INPUT_DIM as f64).sqrt()), zeros(1, d)];
        let depth = (2.0 * config.n_blocks as f64).sqrt();
        for _ in 0..config.n_blocks {
            let s = (1.0 / d as f64).sqrt();
            params.push(ones(d));
            params.push(zeros(1, d));
            params.push(init(d, d, s));
            params.push(init(d, d, s));
            params.push(init(d, d, s));
            params.push(init(d, d, s / depth));
            params.push(zeros(1, d));
            params.push(zeros(PAIR_DIM, config.n_heads));
            params.push(ones(d));
            params.push(zeros(1, d));
            params.push(init(d, hid, s));
            params.push(zeros(1, hid));
            params.push(init(hid, d, (1.0 / hid as f64).sqrt() / depth));
            params.push(zeros(1, d));
        }
        params.push(ones(d));
        params.push(zeros(1, d));
        params.push(init(d, 3, config.head_init));
        params.push(zeros(1, 3));
        Self {
            config,
            params,
            condition_calls: AtomicUsize::new(0),
        }
    }

    pub fn params(&self) -> &[Mat] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|m| m.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Mat> {
        self.params.iter().map(|m| Mat::zeros(m.nrows(), m.ncols())).collect()
    }

    /// Number of `condition` calls so far.
    pub fn condition_calls(&self) -> usize {
        self.condition_calls.load(Ordering::Relaxed)
    }

    /// Replace all parameters, checking shapes.
    pub fn set_params(&mut self, params: Vec<Mat>) -> crate::Result<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(crate::Error::Checkpoint("parameter shapes do not match the model config".into()));
        }
        self.params = params;
        Ok(())
    }

    fn final_base(&self) -> usize {
        2 + PER_BLOCK * self.config.n_blocks
    }

    pub(crate) fn forward(&self, cond: &Conditioning, x_t: &[Vec3], t_star: f64) -> (Vec<Vec3>, ForwardCache) {
        let n = x_t.len();
        assert_eq!(n, cond.n_atoms, "coordinate count does not match conditioning");
        let (c, rot) = label_frame(x_t);
        let temb = time_embedding(t_star);
        let mut input = Mat::zeros(n, INPUT_DIM);
        input.columns_mut(0, STATIC_DIM).copy_from(&cond.static_features);
        for (i, p) in x_t.iter().enumerate() {
            let y = rot * (p - c) / self.config.input_scale;
            for k in 0..3 {
                input[(i, STATIC_DIM + k)] = y[k];
            }
            for (k, v) in temb.iter().enumerate() {
                input[(i, STATIC_DIM + 3 + k)] = *v;
            }
        }
        let pair = cond.pair_features(x_t);
        let p = &self.params;
        let mut h = nn::linear(&input, &p[0], &p[1]);
        let mut blocks = Vec::with_capacity(self.config.n_blocks);
        for b in 0..self.config.n_blocks {
            let o = 2 + PER_BLOCK * b;
            let (a, ln1) = nn::layer_norm(&h, &p[o + LN1_G], &p[o + LN1_B]);
            let ap = AttentionParams {
                wq: &p[o + WQ],
                wk: &p[o + WQ + 1],
                wv: &p[o + WQ + 2],
                wo: &p[o + WQ + 3],
                bo: &p[o + WQ + 4],
                wb: &p[o + WB],
            };
            let (att, attn) = nn::attention(&a, &ap, &pair, self.config.n_heads);
            let h1 = &h + att;
            let (m, ln2) = nn::layer_norm(&h1, &p[o + LN2_G], &p[o + LN2_B]);
            let z = nn::linear(&m, &p[o + W1], &p[o + B1]);
            let gz = nn::gelu(&z);
            let f = nn::linear(&gz, &p[o + W2], &p[o + B2]);
            let h_in = std::mem::replace(&mut h, &h1 + f);
            blocks.push(BlockCache { h_in, ln1, a, attn, ln2, m, z, gz });
        }
        let fb = self.final_base();
        let (hf, lnf) = nn::layer_norm(&h, &p[fb], &p[fb + 1]);
        let out = nn::linear(&hf, &p[fb + 2], &p[fb + 3]);
        let rt = rot.transpose();
        let pred = (0..n)
            .map(|i| c + rt * Vec3::new(out[(i, 0)], out[(i, 1)], out[(i, 2)]) * self.config.output_scale)
            .collect();
        (
            pred,
            ForwardCache {
                input,
                pair,
                blocks,
                lnf,
                hf,
                rotation: rot,
            },
        )
    }

    /// Accumulate dL/dθ into `grads` given dL/d(prediction).
    pub(crate) fn backward(&self, cache: &ForwardCache, dpred: &[Vec3], grads: &mut [Mat]) {
        let n = dpred.len();
        let p = &self.params;
        let mut dout = Mat::zeros(n, 3);
        for (i, g) in dpred.iter().enumerate() {
            let local = cache.rotation * g * self.config.output_scale;
            for k in 0..3 {
                dout[(i, k)] = local[k];
            }
        }
        let fb = self.final_base();
        let dhf = {
            let (gw, gb) = pair_mut(grads, fb + 2, fb + 3);
            nn::linear_backward(&cache.hf, &p[fb + 2], &dout, gw, Some(gb))
        };
        let mut dh = {
            let (gg, gb) = pair_mut(grads, fb, fb + 1);
            nn::layer_norm_backward(&cache.lnf, &p[fb], &dhf, gg, gb)
        };
        for b in (0..self.config.n_blocks).rev() {
            let o = 2 + PER_BLOCK * b;
            let bc = &cache.blocks[b];
            // MLP branch.
            let dgz = {
                let (gw, gb) = pair_mut(grads, o + W2, o + B2);
                nn::linear_backward(&bc.gz, &p[o + W2], &dh, gw, Some(gb))
            };
            let dz = nn::gelu_backward(&bc.z, &dgz);
            let dm = {
                let (gw, gb) = pair_mut(grads, o + W1, o + B1);
                nn::linear_backward(&bc.m, &p[o + W1], &dz, gw, Some(gb))
            };
            let dln2 = {
                let (gg, gb) = pair_mut(grads, o + LN2_G, o + LN2_B);
                nn::layer_norm_backward(&bc.ln2, &p[o + LN2_G], &dm, gg, gb)
            };
            let dh1 = dh + dln2;
            // Attention branch.
            let ap = AttentionParams {
                wq: &p[o + WQ],
                wk: &p[o + WQ + 1],
                wv: &p[o + WQ + 2],
                wo: &p[o + WQ + 3],
                bo: &p[o + WQ + 4],
                wb: &p[o + WB],
            };
            let da = {
                let [wq, wk, wv, wo, bo, wb] = &mut grads[o + WQ..o + WB + 1] else {
                    unreachable!("block layout")
                };
                let g = AttentionGrads { wq, wk, wv, wo, bo, wb };
                nn::attention_backward(&bc.a, &ap, g, &cache.pair, self.config.n_heads, &bc.attn, &dh1)
            };
            let dln1 = {
                let (gg, gb) = pair_mut(grads, o + LN1_G, o + LN1_B);
                nn::layer_norm_backward(&bc.ln1, &p[o + LN1_G], &da, gg, gb)
            };
            dh = dh1 + dln1;
            debug_assert_eq!(bc.h_in.shape(), dh.shape());
        }
        let (gw, gb) = pair_mut(grads, 0, 1);
        nn::linear_backward(&cache.input, &p[0], &dh, gw, Some(gb));
    }
}

fn pair_mut(v: &mut [Mat], i: usize, j: usize) -> (&mut Mat, &mut Mat) {
    debug_assert!(i < j);
    let (a, b) = v.split_at_mut(j);
    (&mut a[i], &mut b[0])
}

impl Denoiser for ToyDenoiser {
    fn condition(&self, system: &MolecularSystem) -> Conditioning {
        self.condition_calls.fetch_add(1, Ordering::Relaxed);
        Conditioning::from_system(system)
    }

    fn denoise(&self, cond: &Conditioning, x_t: &[Vec3], t_star: f64) -> Vec<Vec3> {
        self.forward(cond, x_t, t_star).0
    }
}
