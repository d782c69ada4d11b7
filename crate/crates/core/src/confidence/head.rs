use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::bins::{expected_value, Bins};
use crate::error::{Error, Result};
use crate::flow::nn::{gelu, gelu_backward, linear, linear_backward, Mat};
use crate::flow::{read_container, write_container, Conditioning};
use crate::geometry::{centroid, Vec3};
use crate::topology::MolecularSystem;

pub const CONFIDENCE_MAGIC: &[u8; 8] = b"PLXCONF\0";

/// Structure-derived per-atom features appended to the static ones.
const STRUCT_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceConfig {
    pub plddt_bins: usize,
    pub pde_bins: usize,
    /// Upper edge of the pDE bins in Å.
    pub pde_max: f64,
    pub hidden: usize,
    pub pair_hidden: usize,
    /// Radial basis functions on the predicted anchor distance.
    pub rbf: usize,
    pub init_seed: u64,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            plddt_bins: 50,
            pde_bins: 64,
            pde_max: 32.0,
            hidden: 64,
            pair_hidden: 32,
            rbf: 16,
            init_seed: 0,
        }
    }
}

impl ConfidenceConfig {
    pub fn plddt(&self) -> Bins {
        Bins::new(self.plddt_bins, 0.0, 1.0)
    }

    pub fn pde(&self) -> Bins {
        Bins::new(self.pde_bins, 0.0, self.pde_max)
    }
}

/// Head logits for one structure. Pair rows are ordered `a·n + b` over
/// the anchor list.
#[derive(Debug, Clone)]
pub struct ConfidenceOutput {
    pub anchors: Vec<usize>,
    pub plddt_logits: Mat,
    pub pde_logits: Mat,
    pub plddt_bins: Bins,
    pub pde_bins: Bins,
}

impl ConfidenceOutput {
    pub fn plddt(&self) -> Vec<f64> {
        (0..self.plddt_logits.nrows())
            .map(|i| expected_value(&row(&self.plddt_logits, i), &self.plddt_bins))
            .collect()
    }

    /// Expected distance error between anchor positions `a` and `b`.
    pub fn pde_pair(&self, a: usize, b: usize) -> f64 {
        expected_value(&row(&self.pde_logits, a * self.anchors.len() + b), &self.pde_bins)
    }

    pub fn pde(&self) -> DMatrix<f64> {
        let n = self.anchors.len();
        DMatrix::from_fn(n, n, |a, b| self.pde_pair(a, b))
    }
}

pub(crate) fn row(m: &Mat, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Small MLP over per-atom features, with a pair head fed by the sum of
/// the two atom embeddings and an RBF of their predicted distance, so pair
/// logits are symmetric by construction.
#[derive(Debug, Clone)]
pub struct ConfidenceHead {
    pub config: ConfidenceConfig,
    params: Vec<Mat>,
}

pub(crate) struct HeadCache {
    x: Mat,
    pre1: Mat,
    h: Mat,
    u: Mat,
    r: Mat,
    pre2: Mat,
    z: Mat,
    n_anchor: usize,
    anchors: Vec<usize>,
}

fn structure_features(system: &MolecularSystem, x: &[Vec3]) -> Mat {
    let n = x.len();
    let c = centroid(x);
    let rg = (x.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / n.max(1) as f64).sqrt() + 1e-6;
    Mat::from_fn(n, STRUCT_DIM, |i, f| match f {
        0..=2 => {
            let r = [4.0, 8.0, 12.0][f];
            (0..n).filter(|&j| j != i && (x[i] - x[j]).norm() < r).count() as f64 / 10.0
        }
        3 | 4 => {
            let errs: Vec<f64> = system.neighbors(i).iter().map(|&j| ((x[i] - x[j]).norm() - 1.5).abs()).collect();
            if errs.is_empty() {
                0.0
            } else if f == 3 {
                errs.iter().sum::<f64>() / errs.len() as f64
            } else {
                errs.iter().cloned().fold(0.0, f64::max)
            }
        }
        5 => {
            let m = (0..n)
                .filter(|&j| j != i && !system.is_bonded(i, j))
                .map(|j| (x[i] - x[j]).norm())
                .fold(6.0, f64::min);
            m / 6.0
        }
        6 => (0..n)
            .filter(|&j| j != i && !system.is_bonded(i, j) && (x[i] - x[j]).norm() < 2.0)
            .count() as f64,
        _ => (x[i] - c).norm() / rg,
    })
}

impl ConfidenceHead {
    pub fn new(config: ConfidenceConfig, static_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut init = |r: usize, c: usize, std: f64| -> Mat {
            let dist = Normal::new(0.0, std).expect("finite std");
            Mat::from_fn(r, c, |_, _| dist.sample(&mut rng))
        };
        let f = static_dim + STRUCT_DIM;
        let (h, hp) = (config.hidden, config.pair_hidden);
        let params = vec![
            init(f, h, (1.0 / f as f64).sqrt()),
            Mat::zeros(1, h),
            init(h, config.plddt_bins, 1e-2),
            Mat::zeros(1, config.plddt_bins),
            init(h, hp, (1.0 / h as f64).sqrt()),
            init(config.rbf, hp, (1.0 / config.rbf as f64).sqrt()),
            Mat::zeros(1, hp),
            init(hp, config.pde_bins, 1e-2),
            Mat::zeros(1, config.pde_bins),
        ];
        Self { config, params }
    }

    /// Head sized for the static features of `system`.
    pub fn for_system(config: ConfidenceConfig, system: &MolecularSystem) -> Self {
        let dim = Conditioning::from_system(system).static_features.ncols();
        Self::new(config, dim)
    }

    pub fn params(&self) -> &[Mat] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<Mat> {
        self.params.iter().map(|m| Mat::zeros(m.nrows(), m.ncols())).collect()
    }

    fn rbf(&self, d: f64) -> Vec<f64> {
        let k = self.config.rbf;
        let step = self.config.pde_max / (k.max(2) - 1) as f64;
        (0..k)
            .map(|m| {
                let z = (d - m as f64 * step) / step;
                (-0.5 * z * z).exp()
            })
            .collect()
    }

    pub(crate) fn forward(&self, system: &MolecularSystem, x: &[Vec3], anchors: &[usize]) -> (ConfidenceOutput, HeadCache) {
        let cond = Conditioning::from_system(system);
        let s = structure_features(system, x);
        let n = x.len();
        let x_in = Mat::from_fn(n, cond.static_features.ncols() + STRUCT_DIM, |i, f| {
            if f < cond.static_features.ncols() {
                cond.static_features[(i, f)]
            } else {
                s[(i, f - cond.static_features.ncols())]
            }
        });
        let p = &self.params;
        let pre1 = linear(&x_in, &p[0], &p[1]);
        let h = gelu(&pre1);
        let plddt_logits = linear(&h, &p[2], &p[3]);

        let na = anchors.len();
        let hd = h.ncols();
        let mut u = Mat::zeros(na * na, hd);
        let mut r = Mat::zeros(na * na, self.config.rbf);
        for (a, &ia) in anchors.iter().enumerate() {
            for (b, &ib) in anchors.iter().enumerate() {
                let row = a * na + b;
                for c in 0..hd {
                    u[(row, c)] = h[(ia, c)] + h[(ib, c)];
                }
                for (c, v) in self.rbf((x[ia] - x[ib]).norm()).into_iter().enumerate() {
                    r[(row, c)] = v;
                }
            }
        }
        let mut pre2 = linear(&u, &p[4], &p[6]);
        pre2 += &r * &p[5];
        let z = gelu(&pre2);
        let pde_logits = linear(&z, &p[7], &p[8]);
        (
            ConfidenceOutput {
                anchors: anchors.to_vec(),
                plddt_logits,
                pde_logits,
                plddt_bins: self.config.plddt(),
                pde_bins: self.config.pde(),
            },
            HeadCache {
                x: x_in,
                pre1,
                h,
                u,
                r,
                pre2,
                z,
                n_anchor: na,
                anchors: anchors.to_vec(),
            },
        )
    }

    pub fn predict(&self, system: &MolecularSystem, x: &[Vec3], anchors: &[usize]) -> ConfidenceOutput {
        self.forward(system, x, anchors).0
    }

    /// Accumulate parameter gradients for upstream logit gradients.
    pub(crate) fn backward(&self, cache: &HeadCache, d_plddt: &Mat, d_pde: &Mat, grads: &mut [Mat]) {
        let p = &self.params;
        let (g01, rest) = grads.split_at_mut(2);
        let (g23, rest) = rest.split_at_mut(2);
        let (g456, g78) = rest.split_at_mut(3);
        let (gw7, gb8) = g78.split_at_mut(1);
        let dz = linear_backward(&cache.z, &p[7], d_pde, &mut gw7[0], Some(&mut gb8[0]));
        let dpre2 = gelu_backward(&cache.pre2, &dz);
        let (gw4, g56) = g456.split_at_mut(1);
        let (gw5, gb6) = g56.split_at_mut(1);
        let du = linear_backward(&cache.u, &p[4], &dpre2, &mut gw4[0], Some(&mut gb6[0]));
        gw5[0].gemm_tr(1.0, &cache.r, &dpre2, 1.0);

        let (gw2, gb3) = g23.split_at_mut(1);
        let mut dh = linear_backward(&cache.h, &p[2], d_plddt, &mut gw2[0], Some(&mut gb3[0]));
        let na = cache.n_anchor;
        for (a, &ia) in cache.anchors.iter().enumerate() {
            for (b, &ib) in cache.anchors.iter().enumerate() {
                let row = a * na + b;
                for c in 0..dh.ncols() {
                    dh[(ia, c)] += du[(row, c)];
                    dh[(ib, c)] += du[(row, c)];
                }
            }
        }
        let dpre1 = gelu_backward(&cache.pre1, &dh);
        let (gw0, gb1) = g01.split_at_mut(1);
        linear_backward(&cache.x, &p[0], &dpre1, &mut gw0[0], Some(&mut gb1[0]));
    }

    pub fn set_params(&mut self, params: Vec<Mat>) -> Result<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Checkpoint("parameter shapes do not match the head config".into()));
        }
        self.params = params;
        Ok(())
    }
}

/// Same container as the denoiser checkpoint with its own magic; the
/// header carries the head config (bin layout included) and an echo.
pub fn save_confidence_head(path: &Path, head: &ConfidenceHead, echo: &serde_json::Value) -> Result<()> {
    let mut header = serde_json::Map::new();
    header.insert(
        "head".into(),
        serde_json::to_value(&head.config).map_err(|e| Error::Checkpoint(e.to_string()))?,
    );
    header.insert("input_dim".into(), serde_json::json!(head.params[0].nrows()));
    header.insert("echo".into(), echo.clone());
    write_container(path, CONFIDENCE_MAGIC, header, &head.params)
}

pub fn load_confidence_head(path: &Path) -> Result<(ConfidenceHead, serde_json::Value)> {
    let (mut header, params) = read_container(path, CONFIDENCE_MAGIC)?;
    let config: ConfidenceConfig = header
        .remove("head")
        .ok_or_else(|| Error::Checkpoint("header has no head config".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Error::Checkpoint(e.to_string())))?;
    let input_dim = params.first().map(|m| m.nrows()).unwrap_or(STRUCT_DIM);
    let mut head = ConfidenceHead::new(config, input_dim.saturating_sub(STRUCT_DIM));
    head.set_params(params)?;
    Ok((head, header.remove("echo").unwrap_or(serde_json::Value::Null)))
}
