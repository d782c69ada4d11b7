use nalgebra::Matrix3;

use super::MolecularSystem;
use crate::geometry::Vec3;

const DEGENERATE: f64 = 1e-8;

/// Orthonormal frame anchored at an atom. Rows of `axes` are the frame's
/// x, y, z directions, so `axes * v` expresses a global vector locally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub axes: Matrix3<f64>,
}

impl LocalFrame {
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.axes * (p - self.origin)
    }
}

/// Gram-Schmidt frame from two displacement vectors: x along `a`, y the part
/// of `b` orthogonal to `a`, z = x × y.
pub(crate) fn gram_schmidt(a: &Vec3, b: &Vec3) -> Option<Matrix3<f64>> {
    let na = a.norm();
    if na < DEGENERATE {
        return None;
    }
    let e1 = a / na;
    let u = b - e1 * e1.dot(b);
    let nu = u.norm();
    if nu < DEGENERATE * b.norm().max(1.0) {
        return None;
    }
    let e2 = u / nu;
    let e3 = e1.cross(&e2);
    Some(Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]))
}

/// Frame for an under-coordinated atom: z along the single bond, x the global
/// x axis projected orthogonal to z (global y if parallel), y = z × x.
fn fallback_frame(bond: &Vec3) -> Option<Matrix3<f64>> {
    let n = bond.norm();
    if n < DEGENERATE {
        return None;
    }
    let z = bond / n;
    let mut x = Vec3::x() - z * z.x;
    if x.norm() < 1e-6 {
        x = Vec3::y() - z * z.y;
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Some(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
}

/// Bonded neighbours of `atom` ordered by distance (ties by index).
pub(crate) fn nearest_bonded(system: &MolecularSystem, coords: &[Vec3], atom: usize) -> Vec<usize> {
    let mut nb: Vec<usize> = system.neighbors(atom).to_vec();
    nb.sort_by(|&a, &b| {
        let da = (coords[a] - coords[atom]).norm_squared();
        let db = (coords[b] - coords[atom]).norm_squared();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    nb
}

/// Local frame at `atom` from its two nearest bonded neighbours. Atoms with a
/// single bonded neighbour (or collinear neighbours) get the fallback frame;
/// atoms with no bonds have no frame.
pub fn local_frame(system: &MolecularSystem, coords: &[Vec3], atom: usize) -> Option<LocalFrame> {
    let nb = nearest_bonded(system, coords, atom);
    let origin = coords[atom];
    let axes = match nb.as_slice() {
        [] => None,
        [only] => fallback_frame(&(coords[*only] - origin)),
        [k, l, ..] => gram_schmidt(&(coords[*k] - origin), &(coords[*l] - origin))
            .or_else(|| fallback_frame(&(coords[*k] - origin))),
    }?;
    Some(LocalFrame { origin, axes })
}

/// Unit direction of each bond i→j expressed in the local frame of atom i.
/// Bonds whose frame cannot be built yield the zero vector.
pub fn bond_orientation_features(system: &MolecularSystem, coords: &[Vec3]) -> Vec<Vec3> {
    system
        .bonds()
        .iter()
        .map(|b| {
            let d = coords[b.j] - coords[b.i];
            match local_frame(system, coords, b.i) {
                Some(frame) if d.norm() > DEGENERATE => (frame.axes * d).normalize(),
                _ => Vec3::zeros(),
            }
        })
        .collect()
}
