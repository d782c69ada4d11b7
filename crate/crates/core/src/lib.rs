//! Numerical core for physics-informed flow-matching structure generation.
//!
//! The crate is organised by subsystem:
//!
//! * [`topology`] – molecular system model, anchor selection, bond-orientation
//!   features and MSA pairing.
//! * [`prior`] – globular polymer prior via short Langevin dynamics.
//! * [`geometry`] – superposition, RMSD, LDDT, FAPE and pocket definitions.
//! * [`symmetry`] – graph automorphisms and copy-permutation search.
//! * [`flow`] – conditional flow-matching sampler, toy denoiser and training.
//! * [`attention`] – tiled biased attention reference with memory accounting.
//! * [`confidence`] – confidence heads, pDockQ and sample ranking.
//! * [`confbench`] – apo/holo conformational-change scoring.
//! * [`io`] – topology JSON, PDB and manifest readers/writers.

pub mod attention;
pub mod confbench;
pub mod confidence;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod prior;
pub mod symmetry;
pub mod topology;

pub use error::{Error, ErrorCategory, Result};
pub use geometry::{Conformation, Vec3};
pub use topology::{
    AnchorSet, Atom, Bond, BondOrder, Chain, MolecularSystem, MoleculeClass, Residue,
};
