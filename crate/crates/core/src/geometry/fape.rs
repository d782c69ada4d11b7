//! Distance-normalised frame-aligned point error.
//!
//! For every frame f (built at an anchor atom from two bonded neighbours by
//! Gram-Schmidt) and every atom p, the error is the distance between p's
//! local coordinates in the predicted and reference frames, clamped, and
//! divided by (reference distance from frame origin to p + d₀). The loss is
//! the mean over all (frame, atom) terms.

use super::Vec3;
use crate::error::{Error, Result};
use crate::topology::{AnchorSet, MolecularSystem};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FapeOptions {
    /// Error clamp in Å; `None` disables clamping.
    pub clamp: Option<f64>,
    /// Distance normaliser offset in Å.
    pub d0: f64,
}

impl Default for FapeOptions {
    fn default() -> Self {
        FapeOptions {
            clamp: Some(10.0),
            d0: 1.0,
        }
    }
}

/// Frame definitions as (origin, first neighbour, second neighbour) atom triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FapeFrames {
    pub triples: Vec<[usize; 3]>,
    pub skipped: Vec<usize>,
}

/// Build frames at the given anchors. Neighbours are chosen as the two
/// nearest bonded atoms in the reference; anchors with fewer than two bonded
/// neighbours, or collinear neighbours, are skipped with a warning.
pub fn fape_frames(system: &MolecularSystem, reference: &[Vec3], anchors: &AnchorSet) -> FapeFrames {
    let mut triples = Vec::new();
    let mut skipped = Vec::new();
    for &a in &anchors.indices {
        let nb = crate::topology::orientation_neighbors(system, reference, a);
        let ok = nb.len() >= 2
            && frame_axes(&reference[a], &reference[nb[0]], &reference[nb[1]]).is_some();
        if ok {
            triples.push([a, nb[0], nb[1]]);
        } else {
            skipped.push(a);
        }
    }
    if !skipped.is_empty() {
        log::warn!("fape: skipped {} degenerate frame(s)", skipped.len());
    }
    FapeFrames { triples, skipped }
}

struct FrameAxes {
    e: [Vec3; 3],
    e1_norm: f64,
    u_norm: f64,
    w: Vec3,
}

fn frame_axes(origin: &Vec3, k: &Vec3, l: &Vec3) -> Option<FrameAxes> {
    let a = k - origin;
    let w = l - origin;
    let e1_norm = a.norm();
    if e1_norm < 1e-8 {
        return None;
    }
    let e1 = a / e1_norm;
    let u = w - e1 * e1.dot(&w);
    let u_norm = u.norm();
    if u_norm < 1e-8 * w.norm().max(1.0) {
        return None;
    }
    let e2 = u / u_norm;
    Some(FrameAxes {
        e: [e1, e2, e1.cross(&e2)],
        e1_norm,
        u_norm,
        w,
    })
}

fn local(axes: &FrameAxes, v: &Vec3) -> Vec3 {
    Vec3::new(axes.e[0].dot(v), axes.e[1].dot(v), axes.e[2].dot(v))
}

/// FAPE value and gradient with respect to `pred`. Reference coordinates are
/// treated as constants.
pub fn fape_with_grad(
    pred: &[Vec3],
    reference: &[Vec3],
    frames: &FapeFrames,
    opts: &FapeOptions,
) -> Result<(f64, Vec<Vec3>)> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: reference.len(),
            got: pred.len(),
        });
    }
    let n = pred.len();
    let mut grad = vec![Vec3::zeros(); n];
    let mut used = 0usize;
    let mut total = 0.0;
    let mut frame_grads = Vec::new();

    for tri in &frames.triples {
        let [o, k, l] = *tri;
        let (Some(fp), Some(fr)) = (
            frame_axes(&pred[o], &pred[k], &pred[l]),
            frame_axes(&reference[o], &reference[k], &reference[l]),
        ) else {
            log::warn!("fape: frame at atom {o} degenerate in prediction, skipped");
            continue;
        };
        used += 1;
        let mut g_e = [Vec3::zeros(); 3];
        let mut g_origin = Vec3::zeros();
        for p in 0..n {
            let v = pred[p] - pred[o];
            let vr = reference[p] - reference[o];
            let diff = local(&fp, &v) - local(&fr, &vr);
            let err = diff.norm();
            let denom = vr.norm() + opts.d0;
            let clamped = opts.clamp.is_some_and(|c| err > c);
            total += opts.clamp.map_or(err, |c| err.min(c)) / denom;
            if clamped || err == 0.0 {
                continue;
            }
            let g_loc = diff / (err * denom);
            let g_v = fp.e[0] * g_loc.x + fp.e[1] * g_loc.y + fp.e[2] * g_loc.z;
            grad[p] += g_v;
            g_origin -= g_v;
            for m in 0..3 {
                g_e[m] += v * g_loc[m];
            }
        }
        frame_grads.push((*tri, fp, g_e, g_origin));
    }
    if used == 0 {
        return Err(Error::InvalidParameter("fape: no usable frames".into()));
    }
    let count = (used * n) as f64;
    for g in &mut grad {
        *g /= count;
    }
    for ([o, k, l], fp, g_e, g_origin) in frame_grads {
        let [e1, e2, _] = fp.e;
        // e3 = e1 × e2
        let mut g1 = g_e[0] + e2.cross(&g_e[2]);
        let g2 = g_e[1] + g_e[2].cross(&e1);
        // e2 = u/|u|, u = w − (e1·w) e1
        let g_u = (g2 - e2 * e2.dot(&g2)) / fp.u_norm;
        let g_w = g_u - e1 * e1.dot(&g_u);
        g1 -= g_u * e1.dot(&fp.w) + fp.w * e1.dot(&g_u);
        // e1 = a/|a|, a = k − o
        let g_a = (g1 - e1 * e1.dot(&g1)) / fp.e1_norm;
        grad[k] += g_a / count;
        grad[l] += g_w / count;
        grad[o] += (g_origin - g_a - g_w) / count;
    }
    Ok((total / count, grad))
}

/// Mean distance-normalised FAPE over frames at `anchors`.
pub fn fape(
    pred: &[Vec3],
    reference: &[Vec3],
    system: &MolecularSystem,
    anchors: &AnchorSet,
    opts: &FapeOptions,
) -> Result<f64> {
    let frames = fape_frames(system, reference, anchors);
    fape_with_grad(pred, reference, &frames, opts).map(|(v, _)| v)
}
