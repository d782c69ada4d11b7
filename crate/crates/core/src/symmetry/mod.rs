//! Chemical-graph symmetry: automorphism enumeration, symmetry-corrected
//! atom permutations and identical-ligand copy assignment.

mod assignment;
mod automorphism;
mod copies;
mod permutation;

pub use assignment::min_cost_assignment;
pub use automorphism::{automorphisms, is_automorphism, Automorphisms, DEFAULT_AUTOMORPHISM_CAP};
pub use copies::{ligand_copies, ligand_copy_min_rmsd, MAX_LIGAND_COPIES};
pub use permutation::{optimal_graph_permutation, AtomPermutation, SymmetryIndex};
