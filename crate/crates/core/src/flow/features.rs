//! Parameter-free atom and pair features for the toy denoiser, plus the
//! label-weighted frame used to express coordinates in a pose-independent
//! way.

use nalgebra::Matrix3;

use super::nn::Mat;
use crate::geometry::{centroid, Vec3};
use crate::topology::{vocab, MolecularSystem, MoleculeClass};

const INDEX_FREQS: usize = 8;
const RESIDUE_FREQS: usize = 4;
pub(crate) const TIME_FREQS: usize = 8;
const CLASSES: [MoleculeClass; 6] = [
    MoleculeClass::Protein,
    MoleculeClass::Dna,
    MoleculeClass::Rna,
    MoleculeClass::Ligand,
    MoleculeClass::Peptide,
    MoleculeClass::Modified,
];

pub(crate) const STATIC_DIM: usize =
    vocab::ELEMENT_VOCAB_SIZE + vocab::RESIDUE_VOCAB_SIZE + CLASSES.len() + 2 * INDEX_FREQS + 2 * RESIDUE_FREQS + 1;
/// Static features, canonical coordinates (3) and the time embedding.
pub(crate) const INPUT_DIM: usize = STATIC_DIM + 3 + 2 * TIME_FREQS;
pub(crate) const PAIR_DIM: usize = 4;

/// Per-system conditioning computed once and shared across denoiser calls.
#[derive(Debug, Clone)]
pub struct Conditioning {
    pub n_atoms: usize,
    pub(crate) static_features: Mat,
    /// Bonded and same-residue indicator matrices.
    pub(crate) bonded: Mat,
    pub(crate) same_residue: Mat,
}

fn sinusoid(out: &mut Vec<f64>, x: f64, freqs: usize, max_period: f64) {
    for m in 0..freqs {
        let w = max_period.powf(-(m as f64) / freqs as f64);
        out.push((x * w).sin());
        out.push((x * w).cos());
    }
}

impl Conditioning {
    pub fn from_system(system: &MolecularSystem) -> Self {
        let n = system.n_atoms();
        let mut rows = Vec::with_capacity(n * STATIC_DIM);
        let mut res_ordinal = 0usize;
        let mut last = None;
        for (i, a) in system.atoms().iter().enumerate() {
            let key = (a.chain_index, a.residue_index);
            if last.is_some() && last != Some(key) {
                res_ordinal += 1;
            }
            last = Some(key);
            let mut f = vec![0.0; vocab::ELEMENT_VOCAB_SIZE];
            f[vocab::element_index(&a.element)] = 1.0;
            let mut r = vec![0.0; vocab::RESIDUE_VOCAB_SIZE];
            r[vocab::residue_index(&a.residue_name)] = 1.0;
            f.extend(r);
            let class = system.chain(a.chain_index).class;
            f.extend(CLASSES.iter().map(|c| f64::from(u8::from(*c == class))));
            sinusoid(&mut f, i as f64, INDEX_FREQS, 256.0);
            sinusoid(&mut f, res_ordinal as f64, RESIDUE_FREQS, 64.0);
            f.push(n as f64 / 64.0);
            debug_assert_eq!(f.len(), STATIC_DIM);
            rows.extend(f);
        }
        let static_features = Mat::from_row_slice(n, STATIC_DIM, &rows);
        let bonded = Mat::from_fn(n, n, |i, j| f64::from(u8::from(system.is_bonded(i, j))));
        let same_residue = Mat::from_fn(n, n, |i, j| f64::from(u8::from(i != j && system.same_residue(i, j))));
        Self {
            n_atoms: n,
            static_features,
            bonded,
            same_residue,
        }
    }

    /// Pair features at the current coordinates: bonded, same residue,
    /// self, and a distance kernel on `x_t`.
    pub(crate) fn pair_features(&self, x_t: &[Vec3]) -> Vec<Mat> {
        let n = self.n_atoms;
        let kernel = Mat::from_fn(n, n, |i, j| (-(x_t[i] - x_t[j]).norm() / 8.0).exp());
        vec![
            self.bonded.clone(),
            self.same_residue.clone(),
            Mat::identity(n, n),
            kernel,
        ]
    }
}

pub(crate) fn time_embedding(t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * TIME_FREQS);
    for m in 0..TIME_FREQS {
        let w = std::f64::consts::PI * 2f64.powi(m as i32) / 2.0;
        out.push((t * w).sin());
        out.push((t * w).cos());
    }
    out
}

/// Centroid and rotation (rows are the frame axes) built from two
/// atom-index-weighted moment vectors of `x`: a linear weighting gives the
/// first axis, a centred quadratic weighting the second, and their cross
/// product the third. The frame moves rigidly with `x`, so coordinates
/// expressed in it are invariant to proper rigid motions.
pub fn label_frame(x: &[Vec3]) -> (Vec3, Matrix3<f64>) {
    let n = x.len();
    let c = centroid(x);
    if n < 2 {
        return (c, Matrix3::identity());
    }
    let mid = (n as f64 - 1.0) / 2.0;
    let lin: Vec<f64> = (0..n).map(|i| i as f64 - mid).collect();
    let q_mean = lin.iter().map(|l| l * l).sum::<f64>() / n as f64;
    let quad: Vec<f64> = lin.iter().map(|l| l * l - q_mean).collect();
    let u: Vec3 = x.iter().zip(&lin).map(|(p, w)| (p - c) * *w).sum();
    let v: Vec3 = x.iter().zip(&quad).map(|(p, w)| (p - c) * *w).sum();
    let e1 = if u.norm() > 1e-9 { u.normalize() } else { Vec3::x() };
    let mut e2 = v - e1 * e1.dot(&v);
    if e2.norm() <= 1e-9 * (1.0 + v.norm()) {
        let helper = if e1.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        e2 = helper - e1 * e1.dot(&helper);
    }
    let e2 = e2.normalize();
    let e3 = e1.cross(&e2);
    (c, Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]))
}
